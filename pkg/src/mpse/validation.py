"""Input validation helpers shared by the solvers and estimators."""

from __future__ import annotations

import numpy as np

PROB_TOL = 1e-12


class DimensionError(ValueError):
    """Array shapes disagree with each other or with the game."""


def check_distribution(p, n: int | None = None, name: str = "belief",
                       tol: float = 1e-9) -> np.ndarray:
    """Return ``p`` as a float vector after checking it is a probability vector."""
    arr = np.asarray(p, dtype=float)
    if arr.ndim != 1:
        raise DimensionError(f"{name}: expected a 1-d vector, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise DimensionError(f"{name}: expected length {n}, got {arr.shape[0]}")
    if np.any(arr < -tol) or abs(arr.sum() - 1.0) > tol:
        raise ValueError(f"{name}: not a probability vector: {arr}")
    return arr


def check_prescription(gamma, n_states: int | None = None, n_actions: int | None = None,
                       name: str = "prescription", tol: float = 1e-9) -> np.ndarray:
    """Return ``gamma`` as a row-stochastic ``(n_states, n_actions)`` matrix."""
    arr = np.asarray(gamma, dtype=float)
    if arr.ndim != 2:
        raise DimensionError(f"{name}: expected a 2-d table, got shape {arr.shape}")
    if n_states is not None and arr.shape[0] != n_states:
        raise DimensionError(f"{name}: expected {n_states} rows, got {arr.shape[0]}")
    if n_actions is not None and arr.shape[1] != n_actions:
        raise DimensionError(f"{name}: expected {n_actions} columns, got {arr.shape[1]}")
    if np.any(arr < -tol) or np.any(np.abs(arr.sum(axis=1) - 1.0) > tol):
        raise ValueError(f"{name}: rows are not probability vectors")
    return arr


def clean_simplex(p: np.ndarray, axis: int = -1) -> np.ndarray:
    """Clamp round-off negatives to zero and renormalize along ``axis``."""
    p = np.maximum(p, 0.0)
    return p / p.sum(axis=axis, keepdims=True)


def check_positive_int(value, name: str) -> int:
    if isinstance(value, bool) or int(value) != value or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
