"""Scikit-learn style front end: ``fit`` a game, query equilibrium tables at beliefs."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .backward import backward_recursion
from .belief import BeliefPair
from .forward import construct_strategy
from .game import GameSpec, SpecValidationError, validate_spec
from .grid import build_grid, interpolate_table
from .infinite import solve_ih
from .stage import STRONG, StageSearch


def check_game(spec) -> GameSpec:
    if not isinstance(spec, GameSpec):
        raise TypeError(f"expected a GameSpec, got {type(spec).__name__}")
    errs = validate_spec(spec)
    if errs:
        raise SpecValidationError(errs)
    return spec


def check_beliefs(X, spec: GameSpec) -> tuple[np.ndarray, np.ndarray]:
    """Split ``(n, X_l + X_f)`` rows into leader and follower beliefs, checking each."""
    X = check_array(X, dtype=float, ensure_2d=True)
    width = spec.n_xl + spec.n_xf
    if X.shape[1] != width:
        raise ValueError(f"expected {width} belief columns (leader then follower), got {X.shape[1]}")
    pi_l, pi_f = X[:, :spec.n_xl], X[:, spec.n_xl:]
    for name, p in (("leader", pi_l), ("follower", pi_f)):
        if np.any(p < -1e-9) or np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError(f"{name} beliefs must be probability vectors")
    return pi_l, pi_f


class MPSESolver(TransformerMixin, BaseEstimator):
    """Markov perfect Stackelberg equilibrium on a belief grid.

    ``fit`` takes a :class:`GameSpec` and runs the backward recursion (finite
    horizon) or stationary sweeps (infinite horizon). Afterwards ``X`` rows are
    belief pairs laid out as ``[pi_l..., pi_f...]``.

    Parameters
    ----------
    grid_resolution : int
        Belief lattice resolution per player.
    leader_resolution : int
        Lattice resolution for the leader's commitment search.
    refine_factor : int
        Resolution multiplier for the refinement pass; ``1`` disables it.
    tie_break : {"strong", "pessimistic"}
        How follower indifference is resolved.
    tol : float
        Value comparison tolerance inside a stage.
    ih_tol, max_sweeps : float, int
        Stopping rule for the infinite-horizon sweeps.
    interpolation : {"barycentric", "nearest"}
        Continuation-value lookup between grid points.
    n_jobs : int
        Worker threads per stage sweep.
    """

    def __init__(self, grid_resolution=100, leader_resolution=100, refine_factor=10,
                 tie_break=STRONG, tol=1e-9, ih_tol=1e-6, max_sweeps=200,
                 interpolation="barycentric", n_jobs=1):
        self.grid_resolution = grid_resolution
        self.leader_resolution = leader_resolution
        self.refine_factor = refine_factor
        self.tie_break = tie_break
        self.tol = tol
        self.ih_tol = ih_tol
        self.max_sweeps = max_sweeps
        self.interpolation = interpolation
        self.n_jobs = n_jobs

    def _search(self) -> StageSearch:
        return StageSearch(leader_resolution=self.leader_resolution,
                           refine_factor=self.refine_factor, tol=self.tol,
                           tie_break=self.tie_break)

    def fit(self, spec, y=None):
        spec = check_game(spec)
        if self.interpolation not in ("barycentric", "nearest"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")
        nearest = self.interpolation == "nearest"
        self.spec_ = spec
        self.grid_ = build_grid(spec, self.grid_resolution)
        if spec.is_infinite:
            self.tables_ = solve_ih(spec, self.grid_, self.ih_tol, self.max_sweeps,
                                    self._search(), nearest, self.n_jobs)
            self.converged_ = self.tables_.converged
            self.residual_history_ = list(self.tables_.residual_history)
        else:
            self.tables_ = backward_recursion(spec, self.grid_, self._search(), nearest,
                                              self.n_jobs)
            self.converged_ = not bool(self.tables_.failed.any())
        self.strategy_ = construct_strategy(self.tables_)
        return self

    def predict_prescriptions(self, X, t: int = 1):
        """Prescriptions ``(gamma_l, gamma_f)`` at each belief row, stage ``t``."""
        check_is_fitted(self, "tables_")
        pi_l, pi_f = check_beliefs(X, self.spec_)
        return self.strategy_.prescriptions_many(t, pi_l, pi_f)

    def transform(self, X, t: int = 1):
        """Flattened prescriptions, one row per belief: ``[gamma_l.ravel(), gamma_f.ravel()]``."""
        g_l, g_f = self.predict_prescriptions(X, t)
        n = g_l.shape[0]
        return np.hstack([g_l.reshape(n, -1), g_f.reshape(n, -1)])

    def predict(self, X, t: int = 1):
        """Most likely follower action per follower type, shape ``(n, X_f)``."""
        _, g_f = self.predict_prescriptions(X, t)
        return np.argmax(g_f, axis=-1)

    def value(self, X, t: int = 1):
        """Interpolated ``(v_l, v_f)`` at each belief row."""
        check_is_fitted(self, "tables_")
        pi_l, pi_f = check_beliefs(X, self.spec_)
        v_l, v_f = self.tables_.v_l, self.tables_.v_f
        if v_l.ndim == 4:
            v_l, v_f = v_l[t - 1], v_f[t - 1]
        nearest = self.interpolation == "nearest"
        return (interpolate_table(self.grid_, v_l, pi_l, pi_f, nearest),
                interpolate_table(self.grid_, v_f, pi_l, pi_f, nearest))

    def belief_rows(self, pairs) -> np.ndarray:
        """Stack belief pairs into the ``X`` layout."""
        return np.array([np.concatenate([np.asarray(p[0]), np.asarray(p[1])]) for p in pairs])


__all__ = ["MPSESolver", "check_game", "check_beliefs", "BeliefPair"]
