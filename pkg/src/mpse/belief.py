"""Common-information belief states and their Bayes updates.

Beliefs over the two players' private types factorize, so each component
is updated on its own: the leader component conditions on the leader's
action through the leader prescription only, and likewise for the follower.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .game import GameSpec
from .validation import DimensionError, check_distribution, check_prescription, clean_simplex

ZERO_MASS = 1e-12

LEADER = "l"
FOLLOWER = "f"


class BeliefPair(NamedTuple):
    pi_l: np.ndarray
    pi_f: np.ndarray


class PrescriptionPair(NamedTuple):
    gamma_l: np.ndarray
    gamma_f: np.ndarray


def prior_pair(spec: GameSpec) -> BeliefPair:
    return BeliefPair(np.array(spec.prior_l), np.array(spec.prior_f))


def _own_action(joint_action, player: str) -> int:
    a_l, a_f = joint_action
    if player == LEADER:
        return int(a_l)
    if player == FOLLOWER:
        return int(a_f)
    raise ValueError(f"player must be 'l' or 'f', got {player!r}")


def update_player(pi, gamma, joint_action, kernel, player: str) -> np.ndarray:
    """One player's belief update after observing the joint action.

    ``kernel`` has shape ``(X, A_l, A_f, X)``. If the observed own action has
    (numerically) zero probability under ``pi`` and ``gamma``, the belief is
    only propagated through the kernel.
    """
    pi = np.asarray(pi, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    kernel = np.asarray(kernel, dtype=float)
    n = pi.shape[0]
    if gamma.ndim != 2 or gamma.shape[0] != n:
        raise DimensionError(f"prescription shape {gamma.shape} does not match belief length {n}")
    if kernel.ndim != 4 or kernel.shape[0] != n or kernel.shape[3] != n:
        raise DimensionError(f"kernel shape {kernel.shape} does not match belief length {n}")
    a_l, a_f = (int(a) for a in joint_action)
    a_own = _own_action(joint_action, player)
    q = kernel[:, a_l, a_f, :]
    w = pi * gamma[:, a_own]
    norm = w.sum()
    if norm < ZERO_MASS:
        out = pi @ q
    else:
        out = (w @ q) / norm
    return clean_simplex(out)


def update_pair(pair: BeliefPair, gammas: PrescriptionPair, joint_action,
                spec: GameSpec) -> BeliefPair:
    return BeliefPair(
        update_player(pair.pi_l, gammas.gamma_l, joint_action, spec.q_l, LEADER),
        update_player(pair.pi_f, gammas.gamma_f, joint_action, spec.q_f, FOLLOWER),
    )


class DegenerateObservation(ArithmeticError):
    """The observed joint action has zero probability under the joint belief."""


def joint_oracle_update(joint_pi, gammas: PrescriptionPair, joint_action,
                        spec: GameSpec) -> np.ndarray:
    """Un-factorized Bayes update of a joint belief over ``(x_l, x_f)``.

    Written as a direct sum over all type pairs; used to test the
    factorized update, not by the solvers.
    """
    joint_pi = np.asarray(joint_pi, dtype=float)
    nxl, nxf = spec.n_xl, spec.n_xf
    if joint_pi.shape != (nxl, nxf):
        raise DimensionError(f"joint belief must have shape {(nxl, nxf)}, got {joint_pi.shape}")
    a_l, a_f = (int(a) for a in joint_action)
    g_l, g_f = gammas
    post = np.zeros((nxl, nxf))
    for xl in range(nxl):
        for xf in range(nxf):
            p_act = joint_pi[xl, xf] * g_l[xl, a_l] * g_f[xf, a_f]
            if p_act == 0.0:
                continue
            for yl in range(nxl):
                for yf in range(nxf):
                    post[yl, yf] += p_act * spec.q_l[xl, a_l, a_f, yl] * spec.q_f[xf, a_l, a_f, yf]
    total = post.sum()
    if total < ZERO_MASS:
        raise DegenerateObservation(f"joint action {joint_action} has probability {total!r}")
    return post / total


def batch_update(pi, gammas, kernel, player: str) -> np.ndarray:
    """Posterior for every candidate prescription and every joint action.

    ``gammas`` has shape ``(K, X, A_own)``; returns ``(K, A_l, A_f, X)``.
    Matches ``update_player`` entry by entry.
    """
    pi = np.asarray(pi, dtype=float)
    gammas = np.asarray(gammas, dtype=float)
    w = pi[None, :, None] * gammas                      # (K, X, A_own)
    norm = w.sum(axis=1)                                # (K, A_own)
    if player == LEADER:
        num = np.einsum("kxa,xabz->kabz", w, kernel)
        norm = norm[:, :, None, None]
    elif player == FOLLOWER:
        num = np.einsum("kxb,xabz->kabz", w, kernel)
        norm = norm[:, None, :, None]
    else:
        raise ValueError(f"player must be 'l' or 'f', got {player!r}")
    pred = np.einsum("x,xabz->abz", pi, kernel)[None]
    degenerate = norm < ZERO_MASS
    out = np.where(degenerate, pred, num / np.where(degenerate, 1.0, norm))
    return clean_simplex(out)


def update_many(pis, gammas, a_l, a_f, kernel, player: str) -> np.ndarray:
    """Vectorized update of ``E`` independent beliefs (one per episode).

    ``pis`` is ``(E, X)``, ``gammas`` is ``(E, X, A_own)``, actions are ``(E,)``.
    """
    pis = np.asarray(pis, dtype=float)
    a_own = a_l if player == LEADER else a_f
    idx = np.arange(pis.shape[0])
    w = pis * gammas[idx, :, a_own]                     # (E, X)
    q = kernel[:, a_l, a_f, :].transpose(1, 0, 2)       # (E, X, X')
    norm = w.sum(axis=1, keepdims=True)
    num = np.einsum("ex,exz->ez", w, q)
    pred = np.einsum("ex,exz->ez", pis, q)
    degenerate = norm < ZERO_MASS
    out = np.where(degenerate, pred, num / np.where(degenerate, 1.0, norm))
    return clean_simplex(out)


def check_pair(pair, spec: GameSpec) -> BeliefPair:
    return BeliefPair(check_distribution(pair[0], spec.n_xl, "pi_l"),
                      check_distribution(pair[1], spec.n_xf, "pi_f"))


def check_gammas(gammas, spec: GameSpec) -> PrescriptionPair:
    return PrescriptionPair(check_prescription(gammas[0], spec.n_xl, spec.n_al, "gamma_l"),
                            check_prescription(gammas[1], spec.n_xf, spec.n_af, "gamma_f"))
