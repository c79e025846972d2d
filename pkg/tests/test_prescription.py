import numpy as np
import pytest

from mpse.prescription import (LatticeTooLarge, enumerate_grid, is_pure, lattice_size,
                               pure_prescriptions, refine_around)


def test_three_point_lattice():
    g = enumerate_grid(1, 2, 2)
    assert g.shape == (3, 1, 2)
    rows = {tuple(r[0]) for r in g}
    assert rows == {(0.0, 1.0), (0.5, 0.5), (1.0, 0.0)}


def test_pure_counts():
    assert len(enumerate_grid(1, 2, 1)) == 2
    assert len(enumerate_grid(2, 2, 1)) == 4
    assert len(pure_prescriptions(3, 2)) == 8


@pytest.mark.parametrize("n_states,n_actions,m", [(1, 2, 7), (2, 3, 3), (3, 2, 4)])
def test_size_and_rows(n_states, n_actions, m):
    g = enumerate_grid(n_states, n_actions, m)
    assert len(g) == lattice_size(n_actions, m) ** n_states
    np.testing.assert_allclose(g.sum(axis=-1), 1.0, atol=1e-12)
    assert np.all(g >= 0)
    assert len({g_.tobytes() for g_ in g}) == len(g)


def test_coarse_lattice_is_subset_of_fine():
    coarse = {g.tobytes() for g in enumerate_grid(1, 3, 2)}
    fine = {g.tobytes() for g in enumerate_grid(1, 3, 4)}
    assert coarse <= fine


def test_cap():
    with pytest.raises(LatticeTooLarge):
        enumerate_grid(4, 4, 50, max_candidates=1000)


def test_is_pure():
    assert is_pure(np.eye(3))
    assert not is_pure(np.array([[0.5, 0.5]]), tol=1e-6)
    assert is_pure(np.array([[1 - 1e-9, 1e-9]]), tol=1e-6)


def test_refinement_stays_near_incumbent():
    inc = np.array([[0.67, 0.33]])
    cands = refine_around(inc, 100, 10)
    assert np.max(np.abs(cands - inc)) <= 0.01 + 1e-12
    assert any(np.allclose(c, [[2 / 3, 1 / 3]], atol=1e-3) for c in cands)
