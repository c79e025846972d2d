"""Finite-horizon backward recursion over a discretized belief grid."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .game import GameSpec
from .grid import BeliefGrid
from .stage import (
    NoStageEquilibrium,
    StageSearch,
    TableContinuation,
    ZeroContinuation,
    _scores,
    solve_stage,
)

logger = logging.getLogger(__name__)


class TooManyFailures(RuntimeError):
    """More grid cells lacked a stage equilibrium than allowed."""


@dataclass
class SweepResult:
    """One stage solved at every grid cell."""

    gamma_l: np.ndarray      # (N_l, N_f, X_l, A_l)
    gamma_f: np.ndarray      # (N_l, N_f, X_f, A_f)
    v_l: np.ndarray          # (N_l, N_f, X_l)
    v_f: np.ndarray          # (N_l, N_f, X_f)
    failed: np.ndarray       # (N_l, N_f) bool
    per_type_optimal: np.ndarray


def _fallback(pair, cont_l, cont_f, spec, search, t):
    """Myopic stage solution, valued under the true continuation."""
    myopic = solve_stage(pair, ZeroContinuation(spec.n_xl), ZeroContinuation(spec.n_xf),
                         spec, search, t)
    sc = _scores(pair, myopic.gamma_l[None], myopic.gamma_f[None], cont_l, cont_f, spec, t)
    myopic.v_l = sc.q_l[0, 0].copy()
    myopic.v_f = np.einsum("xa,xa->x", myopic.gamma_f, sc.q_f[0, 0])
    myopic.converged = False
    return myopic


def stage_sweep(spec: GameSpec, grid: BeliefGrid, cont_l, cont_f, search: StageSearch,
                t: int = 1, n_jobs: int = 1) -> SweepResult:
    """Solve the stage problem at every grid cell against frozen continuations."""
    nl, nf = grid.shape
    out = SweepResult(
        gamma_l=np.empty((nl, nf, spec.n_xl, spec.n_al)),
        gamma_f=np.empty((nl, nf, spec.n_xf, spec.n_af)),
        v_l=np.empty((nl, nf, spec.n_xl)),
        v_f=np.empty((nl, nf, spec.n_xf)),
        failed=np.zeros((nl, nf), dtype=bool),
        per_type_optimal=np.ones((nl, nf), dtype=bool),
    )

    def work(cell):
        i, j = cell
        pair = grid.pair(i, j)
        try:
            sol = solve_stage(pair, cont_l, cont_f, spec, search, t)
        except NoStageEquilibrium:
            sol = _fallback(pair, cont_l, cont_f, spec, search, t)
        out.gamma_l[i, j] = sol.gamma_l
        out.gamma_f[i, j] = sol.gamma_f
        out.v_l[i, j] = sol.v_l
        out.v_f[i, j] = sol.v_f
        out.failed[i, j] = not sol.converged
        out.per_type_optimal[i, j] = sol.per_type_optimal

    cells = list(grid.cells())
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            list(pool.map(work, cells))
    else:
        for c in cells:
            work(c)
    return out


@dataclass
class BackwardResult:
    """Equilibrium-generating tables on the grid.

    ``gamma_*[t-1]`` holds the stage-``t`` prescriptions; ``v_*[t-1]`` the
    stage-``t`` values for ``t = 1..T+1`` (the last slice is zero).
    """

    grid: BeliefGrid
    gamma_l: np.ndarray      # (T, N_l, N_f, X_l, A_l)
    gamma_f: np.ndarray      # (T, N_l, N_f, X_f, A_f)
    v_l: np.ndarray          # (T+1, N_l, N_f, X_l)
    v_f: np.ndarray          # (T+1, N_l, N_f, X_f)
    failed: np.ndarray       # (T, N_l, N_f)
    per_type_optimal: np.ndarray = field(default=None)
    nearest: bool = False

    @property
    def horizon(self) -> int:
        return self.gamma_l.shape[0]

    def failure_report(self) -> list[str]:
        return [f"t={t + 1} cell=({i},{j}): no stage equilibrium, myopic fallback used"
                for t, i, j in zip(*np.nonzero(self.failed))]


def backward_recursion(spec: GameSpec, grid: BeliefGrid, search: StageSearch = StageSearch(),
                       nearest: bool = False, n_jobs: int = 1,
                       max_failure_fraction: float = 1.0) -> BackwardResult:
    """Solve stages ``t = T..1`` on every grid cell with interpolated continuations."""
    if spec.horizon is None:
        raise ValueError("backward_recursion requires a finite horizon")
    T = spec.horizon
    nl, nf = grid.shape
    res = BackwardResult(
        grid=grid,
        gamma_l=np.empty((T, nl, nf, spec.n_xl, spec.n_al)),
        gamma_f=np.empty((T, nl, nf, spec.n_xf, spec.n_af)),
        v_l=np.zeros((T + 1, nl, nf, spec.n_xl)),
        v_f=np.zeros((T + 1, nl, nf, spec.n_xf)),
        failed=np.zeros((T, nl, nf), dtype=bool),
        per_type_optimal=np.ones((T, nl, nf), dtype=bool),
        nearest=nearest,
    )
    for t in range(T, 0, -1):
        cont_l = TableContinuation(grid, res.v_l[t], nearest)
        cont_f = TableContinuation(grid, res.v_f[t], nearest)
        sw = stage_sweep(spec, grid, cont_l, cont_f, search, t, n_jobs)
        res.gamma_l[t - 1] = sw.gamma_l
        res.gamma_f[t - 1] = sw.gamma_f
        res.v_l[t - 1] = sw.v_l
        res.v_f[t - 1] = sw.v_f
        res.failed[t - 1] = sw.failed
        res.per_type_optimal[t - 1] = sw.per_type_optimal
        frac = sw.failed.mean()
        if frac:
            logger.warning("t=%d: %d cells without stage equilibrium", t, int(sw.failed.sum()))
        if frac > max_failure_fraction:
            raise TooManyFailures(f"t={t}: {frac:.1%} of cells failed "
                                  f"(limit {max_failure_fraction:.1%})")
    return res
