import dataclasses

import numpy as np
import pytest

from mpse.oracle import brute_force_stackelberg_t1, cross_check

from conftest import random_game


def test_point_mass_high(security, point_high):
    res = brute_force_stackelberg_t1(point_high, security, 1000)
    assert res.leader_weighted == pytest.approx(3.0, abs=1e-12)
    np.testing.assert_array_equal(res.leader_strategy, [[1.0, 0.0]])
    assert res.follower_strategy[1] == 0


def test_point_mass_low(security, point_low):
    res = brute_force_stackelberg_t1(point_low, security, 1000)
    assert res.leader_weighted == pytest.approx(11 / 3, abs=1e-3)
    assert res.leader_strategy[0, 0] == pytest.approx(2 / 3, abs=1e-3)
    assert res.follower_strategy[0] == 1


def test_follower_strategy_is_best_response(security):
    pair = (np.array([1.0]), np.array([0.3, 0.7]))
    res = brute_force_stackelberg_t1(pair, security, 200)
    p = res.leader_strategy[0]
    for x_f in range(2):
        pay = p @ security.r_f[0, x_f]
        assert pay[res.follower_strategy[x_f]] >= pay.max() - 1e-12


def test_constant_leader_reward():
    spec = random_game(2)
    spec = dataclasses.replace(spec, r_l=np.full_like(spec.r_l, 0.25))
    res = brute_force_stackelberg_t1((np.array([1.0]), np.array([0.5, 0.5])), spec, 50)
    assert res.leader_weighted == pytest.approx(0.25, abs=1e-12)


def test_security_line_cross_check(security):
    for q in np.linspace(0, 1, 11):
        rep = cross_check((np.array([1.0]), np.array([1 - q, q])), security, 1000)
        assert rep.discrepancy <= 2e-3
        assert rep.agree


@pytest.mark.parametrize("seed", range(10))
def test_team_problem_agrees(seed):
    spec = random_game(seed, n_xl=2, n_xf=2)
    spec = dataclasses.replace(spec, r_f=spec.r_l.copy())
    pair = (np.array([0.4, 0.6]), np.array([0.7, 0.3]))
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = cross_check(pair, spec, 100)
    assert rep.discrepancy <= 2e-3
