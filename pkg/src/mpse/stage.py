"""Per-belief stage equilibrium: follower fixed point, leader commitment, value backups.

For a public belief pair and continuation values, the leader picks a
prescription from a lattice; for each candidate the follower answers with a
prescription that is a best response to itself (the follower's own
prescription enters the belief update that drives its continuation value).
The follower objective is linear in each row, so the search over follower
answers runs over pure prescriptions.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .belief import FOLLOWER, LEADER, BeliefPair, batch_update, update_pair, PrescriptionPair
from .game import GameSpec
from .grid import BeliefGrid, interpolate_table
from .prescription import LatticeTooLarge, enumerate_grid, pure_prescriptions, refine_around

STRONG = "strong"
PESSIMISTIC = "pessimistic"


class NoFollowerFixedPoint(RuntimeError):
    """No pure follower prescription is a best response to itself."""


class NoStageEquilibrium(RuntimeError):
    """Every leader candidate lacks a follower fixed point."""


class StageWarning(UserWarning):
    pass


# --- continuation values -------------------------------------------------

class ContinuationValue:
    """``V_{t+1}(belief pair, own next type)`` for one player.

    ``outer`` evaluates at all combinations of leader posteriors
    ``(L, A_l, A_f, X_l)`` and follower posteriors ``(P, A_l, A_f, X_f)``
    sharing the joint-action axes, returning ``(L, P, A_l, A_f, X)``.
    """

    n_states: int

    def evaluate(self, pair, x: int) -> float:
        raise NotImplementedError

    def outer(self, post_l: np.ndarray, post_f: np.ndarray) -> np.ndarray:
        L, P = post_l.shape[0], post_f.shape[0]
        al, af = post_l.shape[1:3]
        out = np.empty((L, P, al, af, self.n_states))
        for i in range(L):
            for j in range(P):
                for a in range(al):
                    for b in range(af):
                        pair = BeliefPair(post_l[i, a, b], post_f[j, a, b])
                        for x in range(self.n_states):
                            out[i, j, a, b, x] = self.evaluate(pair, x)
        return out

    def bound(self) -> float:
        return np.inf


class ZeroContinuation(ContinuationValue):
    def __init__(self, n_states: int):
        self.n_states = n_states

    def evaluate(self, pair, x):
        return 0.0

    def outer(self, post_l, post_f):
        return np.zeros((post_l.shape[0], post_f.shape[0]) + post_l.shape[1:3] + (self.n_states,))

    def bound(self):
        return 0.0


class FunctionContinuation(ContinuationValue):
    """Wraps ``fn(pair, x) -> float``."""

    def __init__(self, fn, n_states: int):
        self.fn = fn
        self.n_states = n_states

    def evaluate(self, pair, x):
        return float(self.fn(pair, x))


class TableContinuation(ContinuationValue):
    """Interpolated lookup in a ``(N_l, N_f, X)`` value table on ``grid``."""

    def __init__(self, grid: BeliefGrid, values: np.ndarray, nearest: bool = False):
        self.grid = grid
        self.values = np.asarray(values, dtype=float)
        self.n_states = self.values.shape[-1]
        self.nearest = nearest

    def evaluate(self, pair, x):
        return float(interpolate_table(self.grid, self.values, pair[0], pair[1], self.nearest)[x])

    def _weights(self, sub, beliefs):
        return sub.one_hot_weights(beliefs) if self.nearest else sub.weights(beliefs)

    def outer(self, post_l, post_f):
        il, wl = self._weights(self.grid.leader, post_l)     # (L, Al, Af, kl)
        jf, wf = self._weights(self.grid.follower, post_f)   # (P, Al, Af, kf)
        # contract the follower side first: (N_l, P, Al, Af, X)
        vf = np.einsum("pabk,ipabkx->ipabx", wf, self.values[:, jf, :])
        al, af = post_l.shape[1:3]
        a_idx = np.arange(al)[None, :, None, None]
        b_idx = np.arange(af)[None, None, :, None]
        g = vf[il, :, a_idx, b_idx, :]                       # (L, Al, Af, kl, P, X)
        out = np.einsum("labk,labkpx->lpabx", wl, g)
        return out

    def bound(self):
        return float(np.abs(self.values).max()) if self.values.size else 0.0


# --- reference objectives --------------------------------------------------

def follower_stage_objective(pair, gamma_l, gamma_f_row, gamma_f_full, x_f: int,
                             v_next: ContinuationValue, spec: GameSpec, t: int = 1) -> float:
    """Follower's expected reward-to-go at type ``x_f`` when it plays ``gamma_f_row``.

    The public belief update uses ``gamma_f_full``, the prescription the
    follower is presumed to follow.
    """
    pair = BeliefPair(np.asarray(pair[0], dtype=float), np.asarray(pair[1], dtype=float))
    pi_l = pair.pi_l
    gamma_l = np.asarray(gamma_l, dtype=float)
    row = np.asarray(gamma_f_row, dtype=float)
    gammas = PrescriptionPair(gamma_l, np.asarray(gamma_f_full, dtype=float))
    _, r_f = spec.rewards(t)
    total = 0.0
    for a_l in range(spec.n_al):
        for a_f in range(spec.n_af):
            post = update_pair(pair, gammas, (a_l, a_f), spec)
            cont = [v_next.evaluate(post, y) for y in range(spec.n_xf)]
            for x_l in range(spec.n_xl):
                p = pi_l[x_l] * row[a_f] * gamma_l[x_l, a_l]
                if p == 0.0:
                    continue
                future = sum(spec.q_f[x_f, a_l, a_f, y] * cont[y] for y in range(spec.n_xf))
                total += p * (r_f[x_l, x_f, a_l, a_f] + spec.delta * future)
    return total


def leader_stage_objective(pair, gamma_l, gamma_f_hat, v_next_l: ContinuationValue,
                           spec: GameSpec, t: int = 1) -> np.ndarray:
    """Leader's expected reward-to-go for each leader type under ``(gamma_l, gamma_f_hat)``."""
    pair = BeliefPair(np.asarray(pair[0], dtype=float), np.asarray(pair[1], dtype=float))
    pi_f = pair.pi_f
    gamma_l = np.asarray(gamma_l, dtype=float)
    gamma_f = np.asarray(gamma_f_hat, dtype=float)
    gammas = PrescriptionPair(gamma_l, gamma_f)
    r_l, _ = spec.rewards(t)
    out = np.zeros(spec.n_xl)
    for a_l in range(spec.n_al):
        for a_f in range(spec.n_af):
            post = update_pair(pair, gammas, (a_l, a_f), spec)
            cont = [v_next_l.evaluate(post, y) for y in range(spec.n_xl)]
            for x_l in range(spec.n_xl):
                future = sum(spec.q_l[x_l, a_l, a_f, y] * cont[y] for y in range(spec.n_xl))
                for x_f in range(spec.n_xf):
                    p = pi_f[x_f] * gamma_f[x_f, a_f] * gamma_l[x_l, a_l]
                    if p:
                        out[x_l] += p * (r_l[x_l, x_f, a_l, a_f] + spec.delta * future)
    return out


# --- vectorized stage tensors ------------------------------------------------

@dataclass
class _Scores:
    q_f: np.ndarray       # (L, P, X_f, A_f) follower objective of each pure row
    q_l: np.ndarray       # (L, P, X_l) leader objective per leader type


def _scores(pair, g_l: np.ndarray, g_f: np.ndarray, cont_l: ContinuationValue,
            cont_f: ContinuationValue, spec: GameSpec, t: int) -> _Scores:
    pi_l, pi_f = (np.asarray(p, dtype=float) for p in pair)
    r_l, r_f = spec.rewards(t)
    d = spec.delta
    post_l = batch_update(pi_l, g_l, spec.q_l, LEADER)      # (L, Al, Af, Xl)
    post_f = batch_update(pi_f, g_f, spec.q_f, FOLLOWER)    # (P, Al, Af, Xf)
    v_f = cont_f.outer(post_l, post_f)                      # (L, P, Al, Af, Xf')
    v_l = cont_l.outer(post_l, post_f)                      # (L, P, Al, Af, Xl')

    w_l = pi_l[None, :, None] * g_l                          # (L, Xl, Al)
    m_l = w_l.sum(axis=1)                                   # (L, Al)
    imm_f = np.einsum("lxa,xyab->lyb", w_l, r_f)            # (L, Xf, Af)
    fut_f = np.einsum("yabz,lpabz->lpayb", spec.q_f, v_f)   # (L, P, Al, Xf, Af)
    q_f = imm_f[:, None] + d * np.einsum("la,lpayb->lpyb", m_l, fut_f)

    w_f = pi_f[None, :, None] * g_f                          # (P, Xf, Af)
    m_f = w_f.sum(axis=1)                                   # (P, Af)
    imm_l = np.einsum("lxa,pyb,xyab->lpx", g_l, w_f, r_l)
    fut_l = np.einsum("xabz,lpabz->lpxab", spec.q_l, v_l)   # (L, P, Xl, Al, Af)
    q_l = imm_l + d * np.einsum("lxa,pb,lpxab->lpx", g_l, m_f, fut_l)
    return _Scores(q_f=q_f, q_l=q_l)


def _pure_actions(g_f: np.ndarray) -> np.ndarray:
    return np.argmax(g_f, axis=-1)                          # (P, Xf)


def _select_follower(scores: _Scores, g_f: np.ndarray, pi_l: np.ndarray, tol: float,
                     tie_break: str):
    """Per leader candidate, the selected self-consistent follower index (or -1)."""
    acts = _pure_actions(g_f)
    L, P, Xf, _ = scores.q_f.shape
    best = scores.q_f.max(axis=-1)                          # (L, P, Xf)
    own = np.take_along_axis(scores.q_f, np.broadcast_to(acts[None, :, :, None], (L, P, Xf, 1)),
                             axis=-1)[..., 0]
    consistent = np.all(own >= best - tol, axis=-1)         # (L, P)
    lead = scores.q_l @ pi_l                                # (L, P)
    if tie_break == STRONG:
        key = np.where(consistent, lead, -np.inf)
        target = key.max(axis=1, keepdims=True)
        ok = consistent & (key >= target - tol)
    elif tie_break == PESSIMISTIC:
        key = np.where(consistent, lead, np.inf)
        target = key.min(axis=1, keepdims=True)
        ok = consistent & (key <= target + tol)
    else:
        raise ValueError(f"tie_break must be 'strong' or 'pessimistic', got {tie_break!r}")
    has = ok.any(axis=1)
    choice = np.where(has, np.argmax(ok, axis=1), -1)
    return choice, own, lead, consistent


# --- public stage API ------------------------------------------------------

@dataclass(frozen=True)
class StageSearch:
    """Search settings for the leader lattice and follower fixed point."""

    leader_resolution: int = 100
    refine_factor: int = 10
    tol: float = 1e-9
    tie_break: str = STRONG
    max_candidates: int = 2_000_000
    max_pure_follower: int = 4096
    max_iter: int = 100


@dataclass
class StageSolution:
    gamma_l: np.ndarray
    gamma_f: np.ndarray
    v_l: np.ndarray
    v_f: np.ndarray
    converged: bool = True
    iterations: int = 1
    leader_value: float = 0.0
    per_type_optimal: bool = True
    follower_q: np.ndarray | None = field(default=None, repr=False)

    def follower_margin(self) -> np.ndarray:
        """Gap between the best and second-best pure follower action, per type."""
        if self.follower_q is None or self.follower_q.shape[-1] < 2:
            return np.full(self.v_f.shape, np.inf)
        s = np.sort(self.follower_q, axis=-1)
        return s[:, -1] - s[:, -2]


@lru_cache(maxsize=64)
def _leader_lattice(n_states: int, n_actions: int, resolution: int, cap: int) -> np.ndarray:
    g = enumerate_grid(n_states, n_actions, resolution, cap)
    g.setflags(write=False)
    return g


@lru_cache(maxsize=16)
def _follower_pure(n_states: int, n_actions: int) -> np.ndarray:
    g = pure_prescriptions(n_states, n_actions)
    g.setflags(write=False)
    return g


def follower_best_response(pair, gamma_l, v_next_f: ContinuationValue, spec: GameSpec,
                           tol: float = 1e-9, max_iter: int = 100, *,
                           v_next_l: ContinuationValue | None = None,
                           tie_break: str = STRONG, t: int = 1,
                           max_pure: int = 4096) -> np.ndarray:
    """A follower prescription that is a best response to itself given ``gamma_l``.

    When the pure prescriptions are few enough to scan, every self-consistent
    one is found and the leader's preferred (``strong``) or least preferred
    (``pessimistic``) is returned. Otherwise best-response iteration from
    uniform rows is used, with a cycle check.
    """
    gamma_l = np.asarray(gamma_l, dtype=float)[None]
    v_next_l = v_next_l or ZeroContinuation(spec.n_xl)
    if spec.n_af ** spec.n_xf <= max_pure:
        g_f = _follower_pure(spec.n_xf, spec.n_af)
        sc = _scores(pair, gamma_l, g_f, v_next_l, v_next_f, spec, t)
        choice, *_ = _select_follower(sc, g_f, np.asarray(pair[0], dtype=float), tol, tie_break)
        if choice[0] < 0:
            raise NoFollowerFixedPoint("no pure follower prescription is self-consistent")
        return np.array(g_f[choice[0]])
    return _best_response_iteration(pair, gamma_l, v_next_l, v_next_f, spec, tol, max_iter, t)


def _best_response_iteration(pair, gamma_l, v_next_l, v_next_f, spec, tol, max_iter, t):
    eye = np.eye(spec.n_af)
    current = np.full((1, spec.n_xf, spec.n_af), 1.0 / spec.n_af)
    seen = set()
    for _ in range(max_iter):
        sc = _scores(pair, gamma_l, current, v_next_l, v_next_f, spec, t)
        q = sc.q_f[0, 0]
        own = np.einsum("xa,xa->x", current[0], q)
        if np.all(own >= q.max(axis=-1) - tol):
            return current[0].copy()
        # keep the current action where it is still optimal, for stability
        acts = np.argmax(q >= q.max(axis=-1, keepdims=True) - tol, axis=-1)
        nxt = eye[acts][None]
        key = tuple(acts)
        if key in seen:
            break
        seen.add(key)
        current = nxt
    # cycle or iteration limit: exhaustive scan over pure prescriptions
    for acts in np.ndindex(*(spec.n_af,) * spec.n_xf):
        cand = eye[list(acts)][None]
        q = _scores(pair, gamma_l, cand, v_next_l, v_next_f, spec, t).q_f[0, 0]
        if np.all(q[np.arange(spec.n_xf), list(acts)] >= q.max(axis=-1) - tol):
            return cand[0]
    raise NoFollowerFixedPoint("best-response iteration found no fixed point")


def _evaluate_candidates(pair, g_l, g_f, cont_l, cont_f, spec, search, t):
    sc = _scores(pair, g_l, g_f, cont_l, cont_f, spec, t)
    choice, own, lead, _ = _select_follower(sc, g_f, np.asarray(pair[0], dtype=float),
                                            search.tol, search.tie_break)
    value = np.where(choice >= 0, lead[np.arange(len(g_l)), np.maximum(choice, 0)], -np.inf)
    return sc, choice, own, value


def solve_stage(pair, v_next_l: ContinuationValue, v_next_f: ContinuationValue,
                spec: GameSpec, search: StageSearch = StageSearch(), t: int = 1) -> StageSolution:
    """Stage equilibrium at one belief pair.

    The leader maximizes its belief-weighted objective over the lattice
    (plus one refinement pass around the incumbent); ties go to the
    lexicographically first candidate.
    """
    pair = BeliefPair(np.asarray(pair[0], dtype=float), np.asarray(pair[1], dtype=float))
    if spec.n_af ** spec.n_xf > search.max_pure_follower:
        return _solve_stage_iterative(pair, v_next_l, v_next_f, spec, search, t)
    g_f = _follower_pure(spec.n_xf, spec.n_af)
    g_l = _leader_lattice(spec.n_xl, spec.n_al, search.leader_resolution, search.max_candidates)
    sc, choice, own, value = _evaluate_candidates(pair, g_l, g_f, v_next_l, v_next_f, spec,
                                                  search, t)
    if not np.isfinite(value.max()):
        raise NoStageEquilibrium("no leader candidate admits a follower fixed point")
    best = int(np.argmax(value >= value.max() - search.tol))
    pool = [(g_l, sc, choice, own, value)]
    sel = (0, best)

    if search.refine_factor and search.refine_factor > 1:
        try:
            fine = refine_around(g_l[best], search.leader_resolution, search.refine_factor,
                                 search.max_candidates)
        except LatticeTooLarge:
            fine = None
        if fine is not None and len(fine):
            sc2, choice2, own2, value2 = _evaluate_candidates(pair, fine, g_f, v_next_l, v_next_f,
                                                              spec, search, t)
            pool.append((fine, sc2, choice2, own2, value2))
            if value2.max() > value[best] + search.tol:
                sel = (1, int(np.argmax(value2 >= value2.max() - search.tol)))

    cands, sc, choice, own, value = pool[sel[0]]
    k = sel[1]
    p = int(choice[k])
    gamma_l = np.array(cands[k])
    gamma_f = np.array(g_f[p])
    v_l = sc.q_l[k, p].copy()
    v_f = own[k, p].copy()

    per_type = True
    if spec.n_xl > 1:
        support = pair.pi_l > 0
        for cands_i, sc_i, choice_i, _, value_i in pool:
            ok = choice_i >= 0
            if not ok.any():
                continue
            alt = sc_i.q_l[np.arange(len(cands_i))[ok], choice_i[ok]]   # (n_ok, Xl)
            if np.any(alt[:, support].max(axis=0) > v_l[support] + search.tol):
                per_type = False
        if not per_type:
            warnings.warn("leader prescription is not optimal for every leader type "
                          "separately; belief-weighted objective used", StageWarning,
                          stacklevel=2)
    return StageSolution(gamma_l=gamma_l, gamma_f=gamma_f, v_l=v_l, v_f=v_f,
                         leader_value=float(value[k]), per_type_optimal=per_type,
                         follower_q=sc.q_f[k, p].copy())


def _solve_stage_iterative(pair, v_next_l, v_next_f, spec, search, t):
    g_l = _leader_lattice(spec.n_xl, spec.n_al, search.leader_resolution, search.max_candidates)
    best = None
    for k, gl in enumerate(g_l):
        try:
            gf = _best_response_iteration(pair, gl[None], v_next_l, v_next_f, spec,
                                          search.tol, search.max_iter, t)
        except NoFollowerFixedPoint:
            continue
        sc = _scores(pair, gl[None], gf[None], v_next_l, v_next_f, spec, t)
        val = float(sc.q_l[0, 0] @ pair.pi_l)
        if best is None or val > best[0] + search.tol:
            own = np.einsum("xa,xa->x", gf, sc.q_f[0, 0])
            best = (val, gl, gf, sc.q_l[0, 0], own, sc.q_f[0, 0])
    if best is None:
        raise NoStageEquilibrium("no leader candidate admits a follower fixed point")
    val, gl, gf, v_l, v_f, q = best
    return StageSolution(gamma_l=np.array(gl), gamma_f=np.array(gf), v_l=np.array(v_l),
                         v_f=np.array(v_f), leader_value=val, follower_q=np.array(q))
