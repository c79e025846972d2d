import numpy as np
import pytest

from mpse.backward import backward_recursion
from mpse.grid import build_grid
from mpse.infinite import solve_ih
from mpse.io import load_tables, save_tables
from mpse.stage import StageSearch

SEARCH = StageSearch(leader_resolution=10)


def test_finite_roundtrip(tmp_path, security):
    spec = security.with_horizon(2)
    res = backward_recursion(spec, build_grid(spec, 6), SEARCH)
    path = save_tables(tmp_path / "t.npz", res, spec)
    back, spec2 = load_tables(path)
    assert spec2 == spec
    for name in ("gamma_l", "gamma_f", "v_l", "v_f", "failed"):
        assert np.array_equal(getattr(back, name), getattr(res, name))
    assert np.array_equal(back.grid.follower.points, res.grid.follower.points)


def test_infinite_roundtrip(tmp_path, security):
    sol = solve_ih(security, build_grid(security, 6), 1e-6, 50, SEARCH)
    back, spec = load_tables(save_tables(tmp_path / "t.npz", sol))
    assert spec is None
    assert back.converged == sol.converged and back.iterations == sol.iterations
    assert np.array_equal(back.v_l, sol.v_l)
    assert back.residual_history == sol.residual_history


def test_rejects_foreign_file(tmp_path):
    path = tmp_path / "x.npz"
    np.savez(path, meta=np.asarray('{"format": "other"}'))
    with pytest.raises(ValueError):
        load_tables(path)
