"""Stationary (infinite-horizon) equilibrium by repeated stage sweeps."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .backward import stage_sweep
from .game import GameSpec
from .grid import BeliefGrid
from .stage import StageSearch, TableContinuation

logger = logging.getLogger(__name__)


class NotConverged(RuntimeError):
    pass


@dataclass
class IHSolution:
    grid: BeliefGrid
    gamma_l: np.ndarray      # (N_l, N_f, X_l, A_l)
    gamma_f: np.ndarray      # (N_l, N_f, X_f, A_f)
    v_l: np.ndarray          # (N_l, N_f, X_l)
    v_f: np.ndarray          # (N_l, N_f, X_f)
    residual_history: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    failed: np.ndarray | None = None
    nearest: bool = False


def solve_ih(spec: GameSpec, grid: BeliefGrid, tol: float = 1e-6, max_sweeps: int = 200,
             search: StageSearch = StageSearch(), nearest: bool = False,
             n_jobs: int = 1, init: IHSolution | None = None) -> IHSolution:
    """Iterate stage sweeps from ``V = 0`` until the sup-norm change is at most ``tol``.

    Non-convergence within ``max_sweeps`` is reported through
    ``converged=False``, not raised.
    """
    if not spec.time_homogeneous:
        raise ValueError("infinite-horizon solve requires time-homogeneous rewards")
    if not spec.delta < 1.0:
        raise ValueError("infinite-horizon solve requires delta < 1")
    nl, nf = grid.shape
    if init is None:
        v_l = np.zeros((nl, nf, spec.n_xl))
        v_f = np.zeros((nl, nf, spec.n_xf))
    else:
        v_l, v_f = init.v_l.copy(), init.v_f.copy()
    sol = IHSolution(grid=grid, gamma_l=None, gamma_f=None, v_l=v_l, v_f=v_f, nearest=nearest)
    for sweep in range(1, max_sweeps + 1):
        sw = stage_sweep(spec, grid, TableContinuation(grid, v_l, nearest),
                         TableContinuation(grid, v_f, nearest), search, 1, n_jobs)
        resid = float(max(np.abs(sw.v_l - v_l).max(), np.abs(sw.v_f - v_f).max()))
        v_l, v_f = sw.v_l, sw.v_f
        sol.residual_history.append(resid)
        sol.gamma_l, sol.gamma_f, sol.failed = sw.gamma_l, sw.gamma_f, sw.failed
        sol.v_l, sol.v_f, sol.iterations = v_l, v_f, sweep
        logger.debug("sweep %d residual %.3e", sweep, resid)
        if resid <= tol:
            sol.converged = True
            break
    if not sol.converged:
        logger.warning("no convergence after %d sweeps (residual %.3e)", max_sweeps,
                       sol.residual_history[-1])
    return sol


@dataclass
class ConvergenceReport:
    fitted_ratio: float
    max_ratio: float
    ratios: list[float]
    contraction_ok: bool
    burn_in: int


def convergence_report(sol_or_history, delta: float, burn_in: int = 3,
                       slack: float = 0.05) -> ConvergenceReport:
    """Per-sweep residual ratios after ``burn_in`` sweeps and a log-linear fit.

    The fit is ``exp(slope)`` of a least-squares line through ``log r_k``
    over the positive residuals; fewer than two of them gives ratio 0.
    """
    hist = getattr(sol_or_history, "residual_history", sol_or_history)
    hist = np.asarray(list(hist), dtype=float)
    if np.any(hist < 0):
        raise ValueError("residuals must be nonnegative")
    tail = hist[burn_in:] if len(hist) > burn_in + 1 else hist
    pos = tail[tail > 0]
    if len(pos) < 2:
        fitted, ratios = 0.0, []
    else:
        k = np.arange(len(pos))
        slope = np.polyfit(k, np.log(pos), 1)[0]
        fitted = float(np.exp(slope))
        ratios = (pos[1:] / pos[:-1]).tolist()
    max_ratio = max(ratios) if ratios else 0.0
    return ConvergenceReport(fitted_ratio=fitted, max_ratio=max_ratio, ratios=ratios,
                             contraction_ok=fitted <= delta + slack, burn_in=burn_in)
