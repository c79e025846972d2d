"""Forward construction of equilibrium strategies and Monte-Carlo checks.

Play follows the public belief: at each stage both players read their
prescriptions off the table at the current belief pair (nearest grid cell),
act on their own current type, and the belief is pushed forward with the
factorized Bayes update using the *prescribed* prescriptions.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .belief import FOLLOWER, LEADER, BeliefPair, PrescriptionPair, update_many, update_pair
from .game import GameSpec
from .grid import BeliefGrid


class HorizonExceeded(IndexError):
    pass


class StrategyEvaluator:
    """Stage-indexed lookup of equilibrium prescriptions at arbitrary beliefs.

    ``gamma_l`` / ``gamma_f`` carry a leading time axis; a stationary policy
    has a single slice that is reused at every stage.
    """

    def __init__(self, grid: BeliefGrid, gamma_l: np.ndarray, gamma_f: np.ndarray,
                 stationary: bool = False):
        self.grid = grid
        self.gamma_l = np.asarray(gamma_l)
        self.gamma_f = np.asarray(gamma_f)
        self.stationary = stationary

    @property
    def horizon(self) -> int | None:
        return None if self.stationary else self.gamma_l.shape[0]

    def _slice(self, t: int) -> int:
        if self.stationary:
            return 0
        if not 1 <= t <= self.gamma_l.shape[0]:
            raise HorizonExceeded(f"stage {t} outside 1..{self.gamma_l.shape[0]}")
        return t - 1

    def prescriptions(self, t: int, pair) -> PrescriptionPair:
        s = self._slice(t)
        i, j = self.grid.locate(pair)
        return PrescriptionPair(self.gamma_l[s, i, j].copy(), self.gamma_f[s, i, j].copy())

    def action_distribution(self, t: int, pair, player: str, x: int) -> np.ndarray:
        g = self.prescriptions(t, pair)
        return g.gamma_l[x] if player == LEADER else g.gamma_f[x]

    def prescriptions_many(self, t: int, pis_l: np.ndarray, pis_f: np.ndarray):
        s = self._slice(t)
        i = self.grid.leader.nearest(pis_l)
        j = self.grid.follower.nearest(pis_f)
        return self.gamma_l[s, i, j], self.gamma_f[s, i, j]


def construct_strategy(tables) -> StrategyEvaluator:
    """Evaluator from a ``BackwardResult`` or an ``IHSolution``."""
    g_l = tables.gamma_l
    if g_l.ndim == 4:
        return StrategyEvaluator(tables.grid, g_l[None], tables.gamma_f[None], stationary=True)
    return StrategyEvaluator(tables.grid, g_l, tables.gamma_f)


# --- single episodes -----------------------------------------------------

@dataclass
class StepRecord:
    t: int
    x_l: int
    x_f: int
    belief: BeliefPair
    prescriptions: PrescriptionPair
    a_l: int
    a_f: int
    r_l: float
    r_f: float

    def as_row(self) -> dict:
        return {
            "t": self.t, "x_l": self.x_l, "x_f": self.x_f,
            "pi_l": " ".join(repr(float(v)) for v in self.belief.pi_l),
            "pi_f": " ".join(repr(float(v)) for v in self.belief.pi_f),
            "a_l": self.a_l, "a_f": self.a_f, "r_l": self.r_l, "r_f": self.r_f,
        }


@dataclass
class EpisodeTrace:
    steps: list[StepRecord] = field(default_factory=list)
    delta: float = 1.0

    def discounted_return(self) -> tuple[float, float]:
        r_l = math.fsum(self.delta ** (s.t - 1) * s.r_l for s in self.steps)
        r_f = math.fsum(self.delta ** (s.t - 1) * s.r_f for s in self.steps)
        return r_l, r_f


FollowerDeviation = Callable[[int, list, list], int]
"""``deviation(t, public_actions, follower_types) -> follower action``."""


def _sample(rng: np.random.Generator, p: np.ndarray) -> int:
    c = np.cumsum(p)
    return int(min(np.searchsorted(c, rng.random() * c[-1], side="right"), len(p) - 1))


def simulate_episode(evaluator: StrategyEvaluator, spec: GameSpec, seed: int,
                     deviation: FollowerDeviation | None = None,
                     horizon: int | None = None) -> EpisodeTrace:
    """Play one episode; ``deviation`` overrides the follower's equilibrium play."""
    T = horizon or spec.horizon or evaluator.horizon
    if T is None:
        raise ValueError("an episode length is required for stationary strategies")
    rng = np.random.default_rng(seed)
    x_l = _sample(rng, spec.prior_l)
    x_f = _sample(rng, spec.prior_f)
    mu = BeliefPair(np.array(spec.prior_l), np.array(spec.prior_f))
    trace = EpisodeTrace(delta=spec.delta)
    actions, xf_hist = [], []
    for t in range(1, T + 1):
        xf_hist.append(x_f)
        gam = evaluator.prescriptions(t, mu)
        a_l = _sample(rng, gam.gamma_l[x_l])
        a_f = _sample(rng, gam.gamma_f[x_f])
        if deviation is not None:
            a_f = int(deviation(t, list(actions), list(xf_hist)))
        r_l_t, r_f_t = spec.rewards(t)
        trace.steps.append(StepRecord(t, x_l, x_f, mu, gam, a_l, a_f,
                                      float(r_l_t[x_l, x_f, a_l, a_f]),
                                      float(r_f_t[x_l, x_f, a_l, a_f])))
        actions.append((a_l, a_f))
        mu = update_pair(mu, gam, (a_l, a_f), spec)
        x_l = _sample(rng, spec.q_l[x_l, a_l, a_f])
        x_f = _sample(rng, spec.q_f[x_f, a_l, a_f])
    return trace


# --- batched Monte Carlo -------------------------------------------------

def _draw(rng, probs: np.ndarray) -> np.ndarray:
    """One categorical draw per row of ``probs``."""
    c = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[0])[:, None] * c[:, -1:]
    return np.minimum((u >= c).sum(axis=-1), probs.shape[-1] - 1)


def simulate_batch(evaluator: StrategyEvaluator, spec: GameSpec, n: int,
                   rng: np.random.Generator, horizon: int | None = None):
    """Vectorized episodes; returns ``(x_l1, x_f1, return_l, return_f)`` arrays."""
    T = horizon or spec.horizon or evaluator.horizon
    if T is None:
        raise ValueError("an episode length is required for stationary strategies")
    x_l = _draw(rng, np.broadcast_to(spec.prior_l, (n, spec.n_xl)))
    x_f = _draw(rng, np.broadcast_to(spec.prior_f, (n, spec.n_xf)))
    x_l1, x_f1 = x_l.copy(), x_f.copy()
    pi_l = np.tile(spec.prior_l, (n, 1))
    pi_f = np.tile(spec.prior_f, (n, 1))
    ret_l = np.zeros(n)
    ret_f = np.zeros(n)
    idx = np.arange(n)
    for t in range(1, T + 1):
        g_l, g_f = evaluator.prescriptions_many(t, pi_l, pi_f)
        a_l = _draw(rng, g_l[idx, x_l])
        a_f = _draw(rng, g_f[idx, x_f])
        r_l, r_f = spec.rewards(t)
        disc = spec.delta ** (t - 1)
        ret_l += disc * r_l[x_l, x_f, a_l, a_f]
        ret_f += disc * r_f[x_l, x_f, a_l, a_f]
        pi_l = update_many(pi_l, g_l, a_l, a_f, spec.q_l, LEADER)
        pi_f = update_many(pi_f, g_f, a_l, a_f, spec.q_f, FOLLOWER)
        x_l = _draw(rng, spec.q_l[x_l, a_l, a_f])
        x_f = _draw(rng, spec.q_f[x_f, a_l, a_f])
    return x_l1, x_f1, ret_l, ret_f


@dataclass
class MCValue:
    mean_l: np.ndarray       # per initial leader type
    se_l: np.ndarray
    mean_f: np.ndarray       # per initial follower type
    se_f: np.ndarray
    count_l: np.ndarray
    count_f: np.ndarray


def _conditional_stats(groups: np.ndarray, values: np.ndarray, k: int):
    mean = np.full(k, np.nan)
    se = np.full(k, np.nan)
    count = np.zeros(k, dtype=np.int64)
    for x in range(k):
        v = values[groups == x]
        count[x] = len(v)
        if len(v):
            m = math.fsum(v) / len(v)
            mean[x] = m
            se[x] = math.sqrt(math.fsum((v - m) ** 2) / max(len(v) - 1, 1) / len(v))
    return mean, se, count


def monte_carlo_value(evaluator: StrategyEvaluator, spec: GameSpec, num_episodes: int,
                      seed: int, horizon: int | None = None,
                      chunk: int = 50_000) -> MCValue:
    """Mean discounted return per player, conditioned on the initial own type.

    Episodes are simulated in chunks with seeds spawned from ``seed``, so the
    result does not depend on how chunks are scheduled.
    """
    if num_episodes < 1:
        raise ValueError("num_episodes must be >= 1")
    n_chunks = -(-num_episodes // chunk)
    seeds = np.random.SeedSequence(seed).spawn(n_chunks)
    parts = []
    for c, ss in enumerate(seeds):
        n = min(chunk, num_episodes - c * chunk)
        parts.append(simulate_batch(evaluator, spec, n, np.random.default_rng(ss), horizon))
    x_l1, x_f1, r_l, r_f = (np.concatenate(p) for p in zip(*parts))
    mean_l, se_l, c_l = _conditional_stats(x_l1, r_l, spec.n_xl)
    mean_f, se_f, c_f = _conditional_stats(x_f1, r_f, spec.n_xf)
    return MCValue(mean_l, se_l, mean_f, se_f, c_l, c_f)


# --- exact evaluation and follower deviations ------------------------------

def exact_values(evaluator: StrategyEvaluator, spec: GameSpec,
                 horizon: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Expected discounted returns by enumerating every history (small games only).

    Returns ``(v_l[x_l1], v_f[x_f1])`` conditioned on the initial own type.
    """
    T = horizon or spec.horizon or evaluator.horizon
    v_l = np.zeros(spec.n_xl)
    v_f = np.zeros(spec.n_xf)

    def rec(t, mu, x_l, x_f, w, disc, root_l, root_f):
        if t > T or w == 0.0:
            return
        gam = evaluator.prescriptions(t, mu)
        r_l, r_f = spec.rewards(t)
        for a_l in range(spec.n_al):
            for a_f in range(spec.n_af):
                p = gam.gamma_l[x_l, a_l] * gam.gamma_f[x_f, a_f]
                if p == 0.0:
                    continue
                wa = w * p
                v_l[root_l] += wa * disc * r_l[x_l, x_f, a_l, a_f] / spec.prior_l[root_l]
                v_f[root_f] += wa * disc * r_f[x_l, x_f, a_l, a_f] / spec.prior_f[root_f]
                if t == T:
                    continue
                nxt = update_pair(mu, gam, (a_l, a_f), spec)
                for y_l in range(spec.n_xl):
                    for y_f in range(spec.n_xf):
                        q = spec.q_l[x_l, a_l, a_f, y_l] * spec.q_f[x_f, a_l, a_f, y_f]
                        if q:
                            rec(t + 1, nxt, y_l, y_f, wa * q, disc * spec.delta, root_l, root_f)

    mu0 = BeliefPair(np.array(spec.prior_l), np.array(spec.prior_f))
    for x_l in range(spec.n_xl):
        for x_f in range(spec.n_xf):
            w = spec.prior_l[x_l] * spec.prior_f[x_f]
            if w:
                rec(1, mu0, x_l, x_f, w, 1.0, x_l, x_f)
    return v_l, v_f


@dataclass
class DeviationReport:
    values: np.ndarray          # (n_strategies, X_f) follower value per initial type
    n_strategies: int
    best: np.ndarray            # (X_f,) best deviation value per initial type


def follower_deviation_values(evaluator: StrategyEvaluator, spec: GameSpec) -> DeviationReport:
    """Exact follower values of every pure history-dependent strategy, two stages.

    A strategy picks ``a_f1 = s1(x_f1)`` and ``a_f2 = s2(x_f1, a_1, x_f2)``;
    the leader plays its equilibrium prescriptions and public beliefs are
    updated with the equilibrium prescriptions, whatever the follower does.
    """
    if (spec.horizon or evaluator.horizon) != 2:
        raise ValueError("exhaustive deviation enumeration is implemented for two stages")
    nxl, nxf, nal, naf = spec.n_xl, spec.n_xf, spec.n_al, spec.n_af
    mu1 = BeliefPair(np.array(spec.prior_l), np.array(spec.prior_f))
    gam1 = evaluator.prescriptions(1, mu1)
    r1_l, r1_f = spec.rewards(1)
    r2_l, r2_f = spec.rewards(2)
    # imm[x1f, b] and cont[x1f, b, a1l, x2f, c]: value pieces of stage-1 action b
    # and stage-2 action c at information set (x1f, (a1l, b), x2f)
    imm = np.zeros((nxf, naf))
    cont = np.zeros((nxf, naf, nal, nxf, naf))
    for b in range(naf):
        for a1l in range(nal):
            a1 = (a1l, b)
            mu2 = update_pair(mu1, gam1, a1, spec)
            g2_l = evaluator.prescriptions(2, mu2).gamma_l
            for x1f in range(nxf):
                for x1l in range(nxl):
                    w = spec.prior_l[x1l] * gam1.gamma_l[x1l, a1l]
                    if not w:
                        continue
                    imm[x1f, b] += w * r1_f[x1l, x1f, a1l, b]
                    for x2l in range(nxl):
                        for x2f in range(nxf):
                            q = spec.q_l[x1l, a1l, b, x2l] * spec.q_f[x1f, a1l, b, x2f]
                            if not q:
                                continue
                            for a2l in range(nal):
                                cont[x1f, b, a1l, x2f, :] += (
                                    spec.delta * w * q * g2_l[x2l, a2l] * r2_f[x2l, x2f, a2l, :])
    # enumerate every pure strategy: s1 over X_f, s2 over (x1f, a1l, a1f, x2f)
    n_info2 = nxf * nal * naf * nxf
    n_s1 = naf ** nxf
    n_s2 = naf ** n_info2
    s1 = np.array(list(itertools.product(range(naf), repeat=nxf)))             # (n_s1, X_f)
    values = np.empty((n_s1 * n_s2, nxf))
    digits = np.array(list(itertools.product(range(naf), repeat=n_info2)), dtype=np.int8)
    s2 = digits.reshape(n_s2, nxf, nal, naf, nxf)
    for i, first in enumerate(s1):
        for x1f in range(nxf):
            b = first[x1f]
            choice = s2[:, x1f, :, b, :]                                     # (n_s2, A_l, X_f2)
            c = cont[x1f, b]                                                 # (A_l, X_f2, A_f)
            picked = np.take_along_axis(c[None], choice[..., None].astype(np.int64), axis=-1)
            values[i * n_s2:(i + 1) * n_s2, x1f] = imm[x1f, b] + picked[..., 0].sum(axis=(1, 2))
    return DeviationReport(values=values, n_strategies=len(values), best=values.max(axis=0))
