import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_mdp
from rmdp_lab.envs import ChainSpec, chain_mdp
from rmdp_lab.mdp import (
    TabularMDP,
    bellman_operator,
    expected_reward,
    greedy_policy,
    known_reward_model,
    policy_value,
    stopping_threshold,
    value_iteration,
)


def two_state():
    # s0 -a-> s1 (R=0); s1 -a-> s1 (R=1)
    p = np.zeros((2, 1, 2))
    p[0, 0, 1] = p[1, 0, 1] = 1.0
    r = np.zeros((2, 1, 2))
    r[1, 0, 1] = 1.0
    return TabularMDP(p, r, 0.5)


def sweeps_oracle(mdp, n=200):
    v = np.zeros(mdp.num_states)
    for _ in range(n):
        v = np.max(np.einsum("ijk,ijk->ij", mdp.transition, mdp.reward + mdp.gamma * v), axis=1)
    return v


def test_self_loop_value_is_geometric_series():
    mdp = TabularMDP(np.ones((1, 1, 1)), np.ones((1, 1, 1)), 0.95)
    assert value_iteration(mdp, 1e-9)[0] == pytest.approx(20.0, abs=1e-8)


def test_two_state_fixed_point():
    mdp = two_state()
    v = value_iteration(mdp, 1e-10)
    np.testing.assert_allclose(v, [1.0, 2.0], atol=1e-9)
    np.testing.assert_allclose(v, sweeps_oracle(mdp), atol=1e-9)


def test_chain_values_bounded_by_rmax_horizon():
    v = value_iteration(chain_mdp(), 0.01)
    assert v.max() <= 20.0


def test_policy_value_matches_value_iteration_for_optimal_policy():
    mdp = two_state()
    v = value_iteration(mdp, 0.01)
    vp = policy_value(mdp, greedy_policy(mdp, v), 0.01)
    assert np.max(np.abs(v - vp)) <= 0.02


def test_always_reset_value_on_chain():
    mdp = chain_mdp(ChainSpec(slip="to_start"))
    v = policy_value(mdp, np.ones(5, dtype=np.int64), 1e-9)
    np.testing.assert_allclose(v, 4.0, atol=1e-7)


def test_zero_reward_policy_value_is_zero(rng):
    mdp = random_mdp(rng, 4, 2)
    zero = TabularMDP(mdp.transition, np.zeros_like(mdp.reward), mdp.gamma)
    assert np.all(policy_value(zero, np.zeros(4, dtype=np.int64)) == 0.0)


def test_greedy_policy_dominant_action_and_ties():
    p = np.zeros((2, 3, 2))
    p[:, :, 0] = 1.0
    r = np.zeros((2, 3, 2))
    r[:, 1, :] = 1.0
    mdp = TabularMDP(p, r, 0.9)
    assert list(greedy_policy(mdp, np.zeros(2))) == [1, 1]
    r = np.zeros((2, 3, 2))
    r[:, 0, :] = r[:, 2, :] = 1.0
    tie = TabularMDP(p, r, 0.9)
    assert list(greedy_policy(tie, np.zeros(2))) == [0, 0]


def test_chain_optimal_policy_is_forward():
    mdp = chain_mdp()
    v = value_iteration(mdp, 1e-8)
    q = np.einsum("ijk,ijk->ij", mdp.transition, mdp.reward + mdp.gamma * v)
    assert np.all(q[:, 0] > q[:, 1])
    assert list(greedy_policy(mdp, v)) == [0] * 5


def test_validation_errors():
    with pytest.raises(ValueError):
        TabularMDP(np.full((2, 1, 2), 0.6), np.zeros((2, 1, 2)), 0.9)
    with pytest.raises(ValueError):
        TabularMDP(np.full((2, 1, 2), 0.5), np.zeros((2, 1, 2)), 1.0)
    with pytest.raises(ValueError):
        TabularMDP(np.full((2, 1, 2), 0.5), np.zeros((2, 2, 2)), 0.9)
    with pytest.raises(ValueError):
        stopping_threshold(0.0, 0.9)
    with pytest.raises(ValueError):
        policy_value(two_state(), np.array([0, 1]))


def test_arrays_are_frozen():
    mdp = two_state()
    with pytest.raises(ValueError):
        mdp.transition[0, 0, 0] = 1.0


def test_expected_reward_and_known_model(rng):
    mdp = random_mdp(rng, 3, 2)
    rbar = expected_reward(mdp)
    ref = np.array([[mdp.transition[s, a] @ mdp.reward[s, a] for a in range(2)] for s in range(3)])
    np.testing.assert_allclose(rbar, ref, atol=1e-15)
    known = known_reward_model(mdp)
    assert known.shape == mdp.reward.shape
    np.testing.assert_allclose(expected_reward(TabularMDP(mdp.transition, known, mdp.gamma)), rbar, atol=1e-15)


@given(st.integers(1, 5), st.integers(1, 3), st.floats(0.0, 0.95), st.integers(0, 10 ** 6))
def test_value_iteration_within_tol_of_fixed_point(n_s, n_a, gamma, seed):
    mdp = random_mdp(np.random.default_rng(seed), n_s, n_a, gamma)
    tol = 1e-3
    v = value_iteration(mdp, tol)
    # contraction: ||V - V*|| <= ||V - TV|| / (1 - gamma)
    residual = np.max(np.abs(v - bellman_operator(mdp, v)))
    assert residual / (1.0 - gamma) <= tol + 1e-12
    lo, hi = mdp.value_bounds
    assert np.all(v >= lo - tol) and np.all(v <= hi + tol)
