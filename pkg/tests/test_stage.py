import warnings

import numpy as np
import pytest

from mpse.belief import BeliefPair, PrescriptionPair, joint_oracle_update
from mpse.stage import (FunctionContinuation, NoFollowerFixedPoint, StageSearch, StageWarning, ZeroContinuation,
                        _scores, follower_best_response, follower_stage_objective,
                        leader_stage_objective, solve_stage)

from conftest import random_game

D1, D2 = np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])
A1A1 = np.array([[1.0, 0.0], [1.0, 0.0]])
A2A2 = np.array([[0.0, 1.0], [0.0, 1.0]])
Z1, Z2 = ZeroContinuation(1), ZeroContinuation(2)


def _simplex(rng, shape):
    x = rng.random(shape) + 0.05
    return x / x.sum(axis=-1, keepdims=True)


def _continuation(seed, n):
    c = np.random.default_rng(seed).normal(size=(n, 8))

    def fn(pair, x):
        pl, pf = np.asarray(pair[0]), np.asarray(pair[1])
        return c[x, 0] + c[x, 1] * pl[0] + c[x, 2] * pf[0] + c[x, 3] * float(pf @ pf)
    return FunctionContinuation(fn, n)


def _posterior(spec, pair, gammas, a):
    joint = joint_oracle_update(np.outer(pair[0], pair[1]), gammas, a, spec)
    return BeliefPair(joint.sum(axis=1), joint.sum(axis=0))


def brute_follower(spec, pair, g_l, row, g_full, x_f, cont):
    r_f = spec.r_f
    total = 0.0
    for x_l in range(spec.n_xl):
        for a_l in range(spec.n_al):
            for a_f in range(spec.n_af):
                post = _posterior(spec, pair, PrescriptionPair(g_l, g_full), (a_l, a_f))
                fut = sum(spec.q_f[x_f, a_l, a_f, y] * cont.evaluate(post, y)
                          for y in range(spec.n_xf))
                total += pair[0][x_l] * g_l[x_l, a_l] * row[a_f] * (
                    r_f[x_l, x_f, a_l, a_f] + spec.delta * fut)
    return total


def brute_leader(spec, pair, g_l, g_f, cont):
    out = np.zeros(spec.n_xl)
    for x_l in range(spec.n_xl):
        for x_f in range(spec.n_xf):
            for a_l in range(spec.n_al):
                for a_f in range(spec.n_af):
                    post = _posterior(spec, pair, PrescriptionPair(g_l, g_f), (a_l, a_f))
                    fut = sum(spec.q_l[x_l, a_l, a_f, y] * cont.evaluate(post, y)
                              for y in range(spec.n_xl))
                    out[x_l] += pair[1][x_f] * g_l[x_l, a_l] * g_f[x_f, a_f] * (
                        spec.r_l[x_l, x_f, a_l, a_f] + spec.delta * fut)
    return out


# --- security example values ---------------------------------------------

def test_follower_objective_table_entry(security, point_low):
    assert follower_stage_objective(point_low, D1, [1, 0], A1A1, 0, Z2, security) == 1.0


def test_leader_objective_table_entries(security, point_low, point_high):
    assert leader_stage_objective(point_low, D1, A1A1, Z1, security)[0] == 2.0
    assert leader_stage_objective(point_high, D2, A2A2, Z1, security)[0] == 1.0


def test_zero_continuation_gives_one_stage_reward(security):
    pair = (np.array([1.0]), np.array([0.3, 0.7]))
    g_l = np.array([[0.4, 0.6]])
    row = np.array([0.25, 0.75])
    expected = sum(0.4 * row[b] * security.r_f[0, 1, 0, b] + 0.6 * row[b] * security.r_f[0, 1, 1, b]
                   for b in range(2))
    got = follower_stage_objective(pair, g_l, row, A1A1, 1, Z2, security)
    assert got == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("p_d1,action", [(1.0, 0), (0.0, 1)])
def test_myopic_follower_response(security, point_low, p_d1, action):
    g_l = np.array([[p_d1, 1 - p_d1]])
    g_f = follower_best_response(point_low, g_l, Z2, security)
    assert np.argmax(g_f[0]) == action


def test_stage_point_mass_high(security, point_high):
    sol = solve_stage(point_high, Z1, Z2, security)
    assert sol.leader_value == pytest.approx(3.0, abs=1e-12)
    np.testing.assert_array_equal(sol.gamma_l, D1)
    assert np.argmax(sol.gamma_f[1]) == 0


def test_stage_point_mass_low_strong_ties(security, point_low):
    sol = solve_stage(point_low, Z1, Z2, security)
    assert sol.leader_value == pytest.approx(11 / 3, abs=1e-3)
    assert sol.gamma_l[0, 0] == pytest.approx(2 / 3, abs=1e-3)
    assert np.argmax(sol.gamma_f[0]) == 1


def test_pessimistic_ties_lower_or_equal(security, point_low):
    strong = solve_stage(point_low, Z1, Z2, security)
    pess = solve_stage(point_low, Z1, Z2, security, StageSearch(tie_break="pessimistic"))
    assert pess.leader_value <= strong.leader_value + 1e-12


# --- independent summation oracles -----------------------------------------

@pytest.mark.parametrize("seed", range(5))
def test_objectives_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    spec = random_game(seed, n_xl=2, n_xf=2, static=False, delta=0.8)
    pair = BeliefPair(_simplex(rng, 2), _simplex(rng, 2))
    g_l, g_f = _simplex(rng, (2, 2)), _simplex(rng, (2, 2))
    c_l, c_f = _continuation(seed, 2), _continuation(seed + 100, 2)
    for x_f in range(2):
        row = _simplex(rng, 2)
        assert follower_stage_objective(pair, g_l, row, g_f, x_f, c_f, spec) == pytest.approx(
            brute_follower(spec, pair, g_l, row, g_f, x_f, c_f), abs=1e-12)
    np.testing.assert_allclose(leader_stage_objective(pair, g_l, g_f, c_l, spec),
                               brute_leader(spec, pair, g_l, g_f, c_l), atol=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_vectorized_scores_match_reference(seed):
    rng = np.random.default_rng(seed)
    spec = random_game(seed, n_xl=2, n_xf=2, static=False, delta=0.7)
    pair = BeliefPair(_simplex(rng, 2), _simplex(rng, 2))
    g_l = _simplex(rng, (3, 2, 2))
    g_f = np.eye(2)[np.array([[0, 0], [0, 1], [1, 0], [1, 1]])]
    c_l, c_f = _continuation(seed, 2), _continuation(seed + 1, 2)
    sc = _scores(pair, g_l, g_f, c_l, c_f, spec, 1)
    for k in range(3):
        for p in range(4):
            np.testing.assert_allclose(sc.q_l[k, p],
                                       leader_stage_objective(pair, g_l[k], g_f[p], c_l, spec),
                                       atol=1e-12)
            for x_f in range(2):
                for b in range(2):
                    ref = follower_stage_objective(pair, g_l[k], np.eye(2)[b], g_f[p], x_f, c_f, spec)
                    assert sc.q_f[k, p, x_f, b] == pytest.approx(ref, abs=1e-12)


# --- solution properties -------------------------------------------------

@pytest.mark.parametrize("seed", range(4))
def test_solution_is_consistent_and_optimal(seed):
    rng = np.random.default_rng(seed)
    spec = random_game(seed, n_xl=1, n_xf=2, static=False, delta=0.8)
    pair = BeliefPair(np.array([1.0]), _simplex(rng, 2))
    c_l, c_f = _continuation(seed, 1), _continuation(seed + 7, 2)
    search = StageSearch(leader_resolution=50)
    sol = solve_stage(pair, c_l, c_f, spec, search)
    # follower rows are best responses to themselves
    for x_f in range(2):
        own = follower_stage_objective(pair, sol.gamma_l, sol.gamma_f[x_f], sol.gamma_f, x_f, c_f, spec)
        assert own == pytest.approx(sol.v_f[x_f], abs=1e-12)
        for b in range(2):
            alt = follower_stage_objective(pair, sol.gamma_l, np.eye(2)[b], sol.gamma_f, x_f, c_f, spec)
            assert alt <= own + 1e-9
    # leader backup
    np.testing.assert_allclose(sol.v_l, leader_stage_objective(pair, sol.gamma_l, sol.gamma_f, c_l, spec),
                               atol=1e-12)
    # no coarse lattice point does better once the follower responds
    for p in np.linspace(0, 1, 11):
        g_l = np.array([[p, 1 - p]])
        try:
            g_f = follower_best_response(pair, g_l, c_f, spec, v_next_l=c_l)
        except NoFollowerFixedPoint:
            continue
        val = leader_stage_objective(pair, g_l, g_f, c_l, spec)[0]
        assert val <= sol.leader_value + 1e-9


def test_deterministic(security):
    pair = (np.array([1.0]), np.array([0.37, 0.63]))
    a = solve_stage(pair, Z1, Z2, security)
    b = solve_stage(pair, Z1, Z2, security)
    assert np.array_equal(a.gamma_l, b.gamma_l) and np.array_equal(a.gamma_f, b.gamma_f)
    assert a.leader_value == b.leader_value


def test_constant_rewards():
    spec = random_game(0, n_xl=2, n_xf=2, static=False)
    c = 1.7
    spec = spec.__class__(**{**spec.__dict__, "r_l": np.full_like(spec.r_l, c),
                             "r_f": np.full_like(spec.r_f, c), "r_l_steps": None,
                             "r_f_steps": None})
    pair = (np.array([0.3, 0.7]), np.array([0.6, 0.4]))
    with warnings.catch_warnings():
        warnings.simplefilter("error", StageWarning)
        sol = solve_stage(pair, ZeroContinuation(2), ZeroContinuation(2), spec,
                          StageSearch(leader_resolution=10))
    np.testing.assert_allclose(sol.v_l, c, atol=1e-12)
    np.testing.assert_allclose(sol.v_f, c, atol=1e-12)


def test_prescriptions_row_stochastic():
    spec = random_game(11, n_xl=2, n_xf=3, n_al=3, n_af=2)
    pair = (np.array([0.5, 0.5]), np.array([0.2, 0.3, 0.5]))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StageWarning)
        sol = solve_stage(pair, ZeroContinuation(2), ZeroContinuation(3), spec,
                          StageSearch(leader_resolution=6))
    for g in (sol.gamma_l, sol.gamma_f):
        np.testing.assert_allclose(g.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(g >= 0)
