"""Brute-force single-stage Stackelberg solutions for certifying the stage solver.

Nothing here reuses the stage solver's objective code: payoffs are summed
directly from the reward tensors, the follower's best response is found by
comparing expected rewards action by action, and the leader's commitment by
scanning a lattice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game import GameSpec
from .prescription import enumerate_grid
from .stage import StageSearch, ZeroContinuation, solve_stage

_EXACT = 1e-12


@dataclass
class OracleResult:
    leader_value: np.ndarray        # per leader type
    leader_weighted: float
    leader_strategy: np.ndarray     # (X_l, A_l)
    follower_strategy: np.ndarray   # (X_f,) best-response action per follower type
    follower_margin: np.ndarray     # (X_f,) best minus runner-up follower payoff
    search_resolution: int


def _follower_payoffs(pi_l, gamma_l, r):
    """u[x_f, a_f] = sum over x_l, a_l of pi_l(x_l) gamma_l(a_l|x_l) r[x_l, x_f, a_l, a_f]."""
    nxl, nxf, nal, naf = r.shape
    u = np.zeros((nxf, naf))
    for x_l in range(nxl):
        for a_l in range(nal):
            u += pi_l[x_l] * gamma_l[x_l, a_l] * r[x_l, :, a_l, :]
    return u


def brute_force_stackelberg_t1(pair, spec: GameSpec, resolution: int = 1000,
                               tie_break: str = "strong", t: int = 1) -> OracleResult:
    """Exhaustive leader lattice scan with exact follower best responses.

    Follower ties go to the action the leader prefers (``strong``) or
    dislikes (``pessimistic``).
    """
    pi_l = np.asarray(pair[0], dtype=float)
    pi_f = np.asarray(pair[1], dtype=float)
    r_l, r_f = spec.rewards(t)
    cands = enumerate_grid(spec.n_xl, spec.n_al, resolution)
    sign = 1.0 if tie_break == "strong" else -1.0

    best = None
    for gamma_l in cands:
        u_f = _follower_payoffs(pi_l, gamma_l, r_f)          # follower's own payoff
        u_l = _follower_payoffs(pi_l, gamma_l, r_l)          # leader's payoff, same measure
        br = np.empty(spec.n_xf, dtype=np.int64)
        margin = np.empty(spec.n_xf)
        for x_f in range(spec.n_xf):
            top = u_f[x_f].max()
            tied = [a for a in range(spec.n_af) if u_f[x_f, a] >= top - _EXACT]
            br[x_f] = max(tied, key=lambda a: (sign * u_l[x_f, a], -a))
            rest = np.delete(u_f[x_f], br[x_f])
            margin[x_f] = u_f[x_f, br[x_f]] - rest.max() if rest.size else np.inf
        per_type = np.zeros(spec.n_xl)
        for x_l in range(spec.n_xl):
            for x_f in range(spec.n_xf):
                for a_l in range(spec.n_al):
                    per_type[x_l] += pi_f[x_f] * gamma_l[x_l, a_l] * r_l[x_l, x_f, a_l, br[x_f]]
        weighted = float(per_type @ pi_l)
        if best is None or weighted > best.leader_weighted + _EXACT:
            best = OracleResult(per_type, weighted, gamma_l.copy(), br, margin, resolution)
    return best


@dataclass
class CrossCheckReport:
    stage_value: float
    oracle_value: float
    discrepancy: float
    follower_agree: np.ndarray       # (X_f,) bool, True where compared and equal
    compared: np.ndarray             # (X_f,) bool, False inside the indifference margin
    stage_actions: np.ndarray
    oracle_actions: np.ndarray

    @property
    def agree(self) -> bool:
        return bool(np.all(self.follower_agree[self.compared]))

    def as_dict(self) -> dict:
        return {
            "stage_value": self.stage_value,
            "oracle_value": self.oracle_value,
            "discrepancy": self.discrepancy,
            "follower_agree": self.agree,
            "compared_states": int(self.compared.sum()),
        }


def cross_check(pair, spec: GameSpec, resolution: int = 1000,
                search: StageSearch | None = None, margin: float = 1e-6,
                t: int = 1) -> CrossCheckReport:
    """Compare the zero-continuation stage solution with the brute-force oracle."""
    search = search or StageSearch(leader_resolution=resolution)
    sol = solve_stage(pair, ZeroContinuation(spec.n_xl), ZeroContinuation(spec.n_xf),
                      spec, search, t)
    orc = brute_force_stackelberg_t1(pair, spec, resolution, search.tie_break, t)
    stage_actions = np.argmax(sol.gamma_f, axis=1)
    compared = (sol.follower_margin() > margin) & (orc.follower_margin > margin)
    return CrossCheckReport(
        stage_value=sol.leader_value,
        oracle_value=orc.leader_weighted,
        discrepancy=abs(sol.leader_value - orc.leader_weighted),
        follower_agree=stage_actions == orc.follower_strategy,
        compared=compared,
        stage_actions=stage_actions,
        oracle_actions=orc.follower_strategy,
    )
