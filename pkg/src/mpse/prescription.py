"""Prescriptions (type -> action distribution maps) and their lattices."""

from __future__ import annotations

import itertools
from math import comb

import numpy as np

DEFAULT_MAX_CANDIDATES = 2_000_000


class LatticeTooLarge(ValueError):
    """Requested enumeration exceeds the configured size cap."""


def lattice_size(n_parts: int, resolution: int) -> int:
    """Number of points ``k / resolution`` on the simplex with ``n_parts`` coordinates."""
    return comb(resolution + n_parts - 1, n_parts - 1)


def simplex_lattice(n_parts: int, resolution: int) -> np.ndarray:
    """Integer compositions of ``resolution`` into ``n_parts``, lexicographic.

    Returns an int array of shape ``(lattice_size, n_parts)``.
    """
    if resolution < 1:
        raise ValueError(f"resolution must be >= 1, got {resolution}")
    if n_parts == 1:
        return np.array([[resolution]], dtype=np.int64)
    rows = []
    for first in range(resolution + 1):
        rest = simplex_lattice(n_parts - 1, resolution - first) if first < resolution \
            else np.zeros((1, n_parts - 1), dtype=np.int64)
        rows.append(np.column_stack([np.full(len(rest), first, dtype=np.int64), rest]))
    return np.vstack(rows)


def enumerate_grid(num_states: int, num_actions: int, resolution: int,
                   max_candidates: int = DEFAULT_MAX_CANDIDATES) -> np.ndarray:
    """All prescriptions whose rows lie on the ``1/resolution`` simplex lattice.

    Returns shape ``(K, num_states, num_actions)`` in lexicographic order, the
    first state's row being the most significant.
    """
    per_row = lattice_size(num_actions, resolution)
    total = per_row ** num_states
    if total > max_candidates:
        raise LatticeTooLarge(
            f"{total} prescriptions ({per_row} rows ^ {num_states} states) exceeds cap {max_candidates}")
    rows = simplex_lattice(num_actions, resolution) / resolution
    return _product(rows, num_states)


def _product(rows: np.ndarray, num_states: int) -> np.ndarray:
    idx = np.array(list(itertools.product(range(len(rows)), repeat=num_states)), dtype=np.int64)
    return rows[idx]


def pure_prescriptions(num_states: int, num_actions: int) -> np.ndarray:
    """All deterministic prescriptions, lexicographic by action index per state."""
    eye = np.eye(num_actions)
    idx = np.array(list(itertools.product(range(num_actions), repeat=num_states)), dtype=np.int64)
    return eye[idx]


def refine_around(incumbent: np.ndarray, resolution: int, factor: int = 10,
                  max_candidates: int = DEFAULT_MAX_CANDIDATES) -> np.ndarray:
    """Lattice points at ``factor * resolution`` within ``1/resolution`` of ``incumbent``.

    The neighbourhood is taken row by row in the sup norm and combined as a
    product across states.
    """
    fine = resolution * factor
    incumbent = np.asarray(incumbent, dtype=float)
    lat = simplex_lattice(incumbent.shape[1], fine) / fine
    per_state = []
    for row in incumbent:
        near = np.all(np.abs(lat - row) <= 1.0 / resolution + 1e-12, axis=1)
        per_state.append(lat[near])
    total = int(np.prod([len(p) for p in per_state]))
    if total > max_candidates:
        raise LatticeTooLarge(f"refinement neighbourhood of {total} exceeds cap {max_candidates}")
    idx = itertools.product(*(range(len(p)) for p in per_state))
    return np.array([[per_state[s][i] for s, i in enumerate(combo)] for combo in idx])


def is_pure(gamma, tol: float = 1e-6) -> bool:
    """True iff every row puts at least ``1 - tol`` mass on a single action."""
    gamma = np.asarray(gamma, dtype=float)
    return bool(np.all(gamma.max(axis=-1) >= 1.0 - tol))
