"""Belief-space discretization and barycentric interpolation.

Each player's simplex is covered by the lattice ``{k / G}``. Values between
lattice points are interpolated with the Freudenthal (Kuhn) triangulation of
the lattice; across the two players the interpolant is the tensor product.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .prescription import LatticeTooLarge, lattice_size, simplex_lattice

DEFAULT_MAX_POINTS = 1_000_000
_SNAP = 1e-9


class SimplexGrid:
    """Lattice ``{k / resolution}`` on the probability simplex over ``n`` states."""

    def __init__(self, n: int, resolution: int, max_points: int = DEFAULT_MAX_POINTS):
        if resolution < 1:
            raise ValueError(f"grid resolution must be >= 1, got {resolution}")
        size = lattice_size(n, resolution)
        if size > max_points:
            raise LatticeTooLarge(f"belief grid of {size} points exceeds cap {max_points}")
        self.n = n
        self.resolution = resolution
        self.counts = simplex_lattice(n, resolution)
        self.points = self.counts / resolution
        # cumulative coordinates s_i = sum(y[i:]), i = 1..n-1, index the lattice
        self._lookup = np.full((resolution + 1,) * (n - 1), -1, dtype=np.int64)
        if n > 1:
            cum = self._cumulative(self.counts.astype(float)).astype(np.int64)
            self._lookup[tuple(cum.T)] = np.arange(size)

    def __len__(self) -> int:
        return len(self.points)

    @staticmethod
    def _cumulative(y: np.ndarray) -> np.ndarray:
        return np.cumsum(y[..., ::-1], axis=-1)[..., ::-1][..., 1:]

    def index_of(self, counts) -> int:
        counts = np.asarray(counts)
        if self.n == 1:
            return 0
        return int(self._lookup[tuple(self._cumulative(counts.astype(float)).astype(np.int64))])

    def weights(self, beliefs) -> tuple[np.ndarray, np.ndarray]:
        """Barycentric vertices and weights of each belief.

        ``beliefs`` has shape ``(..., n)``; returns ``(idx, w)`` each of shape
        ``(..., n)`` with ``w`` summing to one along the last axis.
        """
        b = np.asarray(beliefs, dtype=float)
        lead = b.shape[:-1]
        if self.n == 1:
            return np.zeros(lead + (1,), dtype=np.int64), np.ones(lead + (1,))
        G = self.resolution
        s = self._cumulative(np.maximum(b, 0.0) * G)
        s = np.clip(s, 0.0, G)
        r = np.round(s)
        s = np.where(np.abs(s - r) < _SNAP, r, s)
        base = np.minimum(np.floor(s), G - 1)
        frac = s - base
        d = self.n - 1
        order = np.argsort(-frac, axis=-1, kind="stable")
        fs = np.take_along_axis(frac, order, axis=-1)
        w = np.empty(lead + (self.n,))
        w[..., 0] = 1.0 - fs[..., 0]
        if d > 1:
            w[..., 1:d] = fs[..., :-1] - fs[..., 1:]
        w[..., d] = fs[..., -1]
        verts = np.empty(lead + (self.n, d), dtype=np.int64)
        cur = base.astype(np.int64)
        verts[..., 0, :] = cur
        onehot = np.eye(d, dtype=np.int64)
        for k in range(d):
            cur = cur + onehot[order[..., k]]
            verts[..., k + 1, :] = cur
        verts = np.minimum(verts, G)
        idx = self._lookup[tuple(np.moveaxis(verts, -1, 0))]
        # zero-weight vertices may fall outside the simplex; point them anywhere valid
        bad = idx < 0
        if np.any(bad):
            if np.any(w[bad] > 1e-12):
                raise AssertionError("interpolation left the simplex")
            idx = np.where(bad, 0, idx)
            w = np.where(bad, 0.0, w)
        return idx, w

    def nearest(self, beliefs) -> np.ndarray:
        """Index of the highest-weight vertex of the cell containing each belief."""
        idx, w = self.weights(beliefs)
        k = np.argmax(w, axis=-1)
        return np.take_along_axis(idx, k[..., None], axis=-1)[..., 0]

    def one_hot_weights(self, beliefs) -> tuple[np.ndarray, np.ndarray]:
        near = self.nearest(beliefs)
        return near[..., None], np.ones(near.shape + (1,))


@dataclass
class BeliefGrid:
    """Tensor product of a leader and a follower simplex lattice.

    Flat pair index is ``i_l * len(follower) + i_f``.
    """

    leader: SimplexGrid
    follower: SimplexGrid
    resolution: int = field(default=0)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.leader), len(self.follower)

    @property
    def size(self) -> int:
        return len(self.leader) * len(self.follower)

    def pair(self, i_l: int, i_f: int):
        from .belief import BeliefPair
        return BeliefPair(self.leader.points[i_l].copy(), self.follower.points[i_f].copy())

    def cells(self):
        for i in range(len(self.leader)):
            for j in range(len(self.follower)):
                yield i, j

    def locate(self, pair) -> tuple[int, int]:
        """Grid indices of the nearest cell to a belief pair."""
        return int(self.leader.nearest(pair[0])), int(self.follower.nearest(pair[1]))


def build_grid(spec, resolution: int, max_points: int = DEFAULT_MAX_POINTS) -> BeliefGrid:
    """Belief grid at ``resolution`` for both players (a dummy state gives one point)."""
    g_l = SimplexGrid(spec.n_xl, resolution, max_points)
    g_f = SimplexGrid(spec.n_xf, resolution, max_points)
    if len(g_l) * len(g_f) > max_points:
        raise LatticeTooLarge(f"belief grid of {len(g_l) * len(g_f)} pairs exceeds cap {max_points}")
    return BeliefGrid(g_l, g_f, resolution)


def interpolate_table(grid: BeliefGrid, values: np.ndarray, pi_l, pi_f,
                      nearest: bool = False) -> np.ndarray:
    """Interpolate a ``(N_l, N_f, X)`` table at beliefs of matching batch shape.

    Returns shape ``batch + (X,)``.
    """
    wl = grid.leader.one_hot_weights(pi_l) if nearest else grid.leader.weights(pi_l)
    wf = grid.follower.one_hot_weights(pi_f) if nearest else grid.follower.weights(pi_f)
    il, w_l = wl
    jf, w_f = wf
    # values[il[..., a], jf[..., b], :] weighted by w_l[..., a] * w_f[..., b]
    v = values[il[..., :, None], jf[..., None, :], :]
    return np.einsum("...ab,...abx->...x", w_l[..., :, None] * w_f[..., None, :], v)


def interpolate_value(grid: BeliefGrid, table: np.ndarray, t: int, pair, x: int,
                      nearest: bool = False) -> float:
    """Value at stage ``t`` (1-based) of a ``(T+1, N_l, N_f, X)`` table."""
    return float(interpolate_table(grid, table[t - 1], pair[0], pair[1], nearest)[x])
