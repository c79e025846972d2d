import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from mpse.estimator import MPSESolver
from mpse.game import SpecValidationError


def test_params_roundtrip():
    est = MPSESolver(grid_resolution=7, tie_break="pessimistic")
    params = est.get_params()
    assert params["grid_resolution"] == 7 and params["tie_break"] == "pessimistic"
    est2 = clone(est).set_params(leader_resolution=9)
    assert est2.get_params()["leader_resolution"] == 9
    assert est.get_params()["leader_resolution"] == 100


def test_unfitted_raises():
    with pytest.raises(NotFittedError):
        MPSESolver().predict(np.array([[1.0, 0.5, 0.5]]))


def test_fit_rejects_non_spec():
    with pytest.raises(TypeError):
        MPSESolver().fit(np.zeros(3))


def test_fit_rejects_invalid_spec(security):
    import dataclasses
    with pytest.raises(SpecValidationError):
        MPSESolver().fit(dataclasses.replace(security, delta=1.0))


@pytest.fixture(scope="module")
def fitted():
    from mpse.game import example_security_game
    spec = example_security_game(horizon=1)
    return MPSESolver(grid_resolution=10, leader_resolution=100).fit(spec)


def test_predict_and_transform_shapes(fitted):
    X = np.array([[1.0, 1.0, 0.0], [1.0, 0.0, 1.0], [1.0, 0.45, 0.55]])
    assert fitted.predict(X).shape == (3, 2)
    assert fitted.transform(X).shape == (3, 1 * 2 + 2 * 2)
    g_l, g_f = fitted.predict_prescriptions(X)
    np.testing.assert_allclose(g_l.sum(axis=-1), 1.0)


def test_values_at_point_masses(fitted):
    v_l, v_f = fitted.value(np.array([[1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]))
    assert v_l[0, 0] == pytest.approx(3.0, abs=1e-12)
    assert v_l[1, 0] == pytest.approx(11 / 3, abs=1e-3)


def test_predict_matches_tables(fitted):
    X = fitted.belief_rows([fitted.grid_.pair(0, j) for j in range(len(fitted.grid_.follower))])
    np.testing.assert_array_equal(fitted.predict(X), np.argmax(fitted.tables_.gamma_f[0, 0], axis=-1))


def test_bad_beliefs(fitted):
    with pytest.raises(ValueError):
        fitted.predict(np.array([[1.0, 0.7, 0.7]]))
    with pytest.raises(ValueError):
        fitted.predict(np.array([[1.0, 0.5]]))
