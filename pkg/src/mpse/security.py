"""Equilibrium curves of the security example along the follower belief line."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .infinite import IHSolution

CURVE_COLUMNS = ("pi_f_high", "p_l", "p_f_low", "p_f_high", "V_f_low", "V_f_high", "V_l")


def security_curves(sol: IHSolution) -> np.ndarray:
    """One row per follower grid point, ordered by increasing ``pi_f_high``.

    ``p_*`` are probabilities of action 1 (D2 for the leader, A2 for the
    follower) under the stationary prescriptions.
    """
    grid = sol.grid
    if len(grid.leader) != 1 or grid.follower.n != 2:
        raise ValueError("curves need a dummy leader type and a binary follower type")
    pts = grid.follower.points
    order = np.argsort(pts[:, 1], kind="stable")
    rows = np.column_stack([
        pts[order, 1],
        sol.gamma_l[0, order, 0, 1],
        sol.gamma_f[0, order, 0, 1],
        sol.gamma_f[0, order, 1, 1],
        sol.v_f[0, order, 0],
        sol.v_f[0, order, 1],
        sol.v_l[0, order, 0],
    ])
    return rows


@dataclass
class CurveSummary:
    n_points: int
    pure_fraction: float
    discontinuities_p_l: list[float]
    discontinuities_p_f_low: list[float]
    discontinuities_p_f_high: list[float]
    v_l_at_high: float
    v_l_at_low: float

    def as_dict(self) -> dict:
        fmt = lambda xs: " ".join(f"{x:.6g}" for x in xs)   # noqa: E731
        return {
            "n_points": self.n_points,
            "pure_fraction": self.pure_fraction,
            "discontinuities_p_l": fmt(self.discontinuities_p_l),
            "discontinuities_p_f_low": fmt(self.discontinuities_p_f_low),
            "discontinuities_p_f_high": fmt(self.discontinuities_p_f_high),
            "V_l_at_pi_f_high_1": self.v_l_at_high,
            "V_l_at_pi_f_high_0": self.v_l_at_low,
        }


def _jumps(x: np.ndarray, y: np.ndarray, threshold: float) -> list[float]:
    """Midpoints between neighbouring grid points where ``y`` jumps by more than ``threshold``."""
    d = np.abs(np.diff(y))
    return [float((x[i] + x[i + 1]) / 2) for i in np.nonzero(d > threshold)[0]]


def summarize_curves(rows: np.ndarray, purity_tol: float = 1e-6,
                     jump: float = 0.1) -> CurveSummary:
    probs = rows[:, 1:4]
    pure = np.all(np.minimum(np.abs(probs), np.abs(probs - 1.0)) <= purity_tol, axis=1)
    x = rows[:, 0]
    return CurveSummary(
        n_points=len(rows),
        pure_fraction=float(pure.mean()),
        discontinuities_p_l=_jumps(x, rows[:, 1], jump),
        discontinuities_p_f_low=_jumps(x, rows[:, 2], jump),
        discontinuities_p_f_high=_jumps(x, rows[:, 3], jump),
        v_l_at_high=float(rows[np.argmax(x), 6]),
        v_l_at_low=float(rows[np.argmin(x), 6]),
    )
