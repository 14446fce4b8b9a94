import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_mdp
from rmdp_lab.envs import DiscreteEnv, chain_mdp
from rmdp_lab.explorers import (
    Beb,
    Bolt,
    DirichletModel,
    EpsGreedy,
    EpsGreedyAgent,
    Mbie,
    PacRmdp,
    PacRmdpAgent,
    TransitionCounts,
    Vbe,
    VBE_ALPHA0,
    beb_bonus,
    beb_internal_values,
    bolt_internal_values,
    make_agent,
    mbie_default_m,
    mbie_equivalent_h,
    mbie_internal_values,
    mbie_radius,
    rmdp_internal_values,
    solve_l1_optimistic,
    vbe_bonus,
    vbe_internal_values,
)
from rmdp_lab.mdp import TabularMDP, known_reward_model, value_iteration

TIGHT = 1e-10


def sweep(backup, n_s, n=500):
    v = np.zeros(n_s)
    for _ in range(n):
        v = backup(v)
    return v


def two_state_reward():
    r = np.zeros((2, 1, 2))
    r[:, :, 1] = 1.0
    return r


# --- PAC-RMDP -----------------------------------------------------------------


def test_rmdp_hand_example():
    counts = np.zeros((2, 1, 2))
    counts[0, 0, 0] = 2
    counts[1, 0, 1] = 2
    v = rmdp_internal_values(counts, two_state_reward(), 0.5, 2, TIGHT)
    np.testing.assert_allclose(v, [4.0 / 3.0, 2.0], atol=1e-9)


def test_rmdp_h0_is_sample_mean_value_iteration(rng):
    mdp = random_mdp(rng, 4, 3)
    counts = rng.integers(1, 10, size=(4, 3, 4)).astype(float)
    p_hat = counts / counts.sum(axis=2, keepdims=True)
    ref = value_iteration(TabularMDP(p_hat, mdp.reward, mdp.gamma), TIGHT)
    np.testing.assert_allclose(rmdp_internal_values(counts, mdp.reward, mdp.gamma, 0, TIGHT), ref, atol=1e-8)


def test_rmdp_large_h_is_fully_optimistic(rng):
    mdp = random_mdp(rng, 3, 2)
    counts = rng.integers(0, 5, size=(3, 2, 3)).astype(float)

    def optimistic(v):
        return np.max(np.max(mdp.reward + mdp.gamma * v[None, None, :], axis=2), axis=1)

    ref = sweep(optimistic, 3, 2000)
    v = rmdp_internal_values(counts, mdp.reward, mdp.gamma, 1e9, TIGHT)
    np.testing.assert_allclose(v, ref, atol=1e-6)
    np.testing.assert_allclose(rmdp_internal_values(counts, mdp.reward, mdp.gamma, np.inf, TIGHT), ref, atol=1e-8)


def test_rmdp_unvisited_h0_is_fully_optimistic():
    counts = np.zeros((2, 1, 2))
    v = rmdp_internal_values(counts, two_state_reward(), 0.5, 0, TIGHT)
    np.testing.assert_allclose(v, [2.0, 2.0], atol=1e-9)


@given(st.integers(0, 10 ** 6), st.integers(0, 6))
def test_rmdp_values_monotone_in_h(seed, h):
    rng = np.random.default_rng(seed)
    mdp = random_mdp(rng, 3, 2)
    counts = rng.integers(0, 6, size=(3, 2, 3)).astype(float)
    lo = rmdp_internal_values(counts, mdp.reward, mdp.gamma, h, TIGHT)
    hi = rmdp_internal_values(counts, mdp.reward, mdp.gamma, h + 1, TIGHT)
    assert np.all(hi >= lo - 1e-8)


def test_rmdp_rejects_negative_h():
    with pytest.raises(ValueError):
        rmdp_internal_values(np.zeros((2, 1, 2)), two_state_reward(), 0.5, -1)
    with pytest.raises(ValueError):
        PacRmdp(-1).validate()


# --- MBIE ---------------------------------------------------------------------


def test_l1_examples():
    np.testing.assert_allclose(solve_l1_optimistic([0.5, 0.5], [0.0, 1.0], 0.4), [0.3, 0.7], atol=1e-15)
    p = np.array([0.2, 0.5, 0.3])
    np.testing.assert_array_equal(solve_l1_optimistic(p, [3.0, 1.0, 2.0], 0.0), p)
    np.testing.assert_allclose(solve_l1_optimistic(p, [3.0, 1.0, 2.0], 2.0), [1.0, 0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(solve_l1_optimistic(p, [3.0, 1.0, 2.0], 7.0), [1.0, 0.0, 0.0], atol=1e-15)
    with pytest.raises(ValueError):
        solve_l1_optimistic(p, [1.0, 2.0, 3.0], -0.1)


@given(st.integers(0, 10 ** 6), st.integers(2, 6), st.floats(0.0, 2.5))
def test_l1_solution_feasible_and_optimal(seed, n, radius):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(n))
    values = rng.normal(size=n)
    out = solve_l1_optimistic(p, values, radius)
    assert np.all(out >= -1e-15) and abs(out.sum() - 1.0) <= 1e-12
    assert np.abs(out - p).sum() <= min(radius, 2.0) + 1e-12
    # no feasible point found by random search does better
    for _ in range(200):
        q = rng.dirichlet(np.ones(n) * 0.3)
        dist = np.abs(q - p).sum()
        if dist > radius:
            q = p + (q - p) * (radius / dist)
        assert q @ values <= out @ values + 1e-12


def test_mbie_radius_and_equivalent_h():
    assert mbie_radius(4000, 5, 2, 100, 0.5) == pytest.approx(0.1530, abs=1e-4)
    assert mbie_equivalent_h(4000, 5, 2, 100, 0.5) == pytest.approx(722.5, abs=0.5)
    assert mbie_radius(10, 5, 2, 100, 0.1) == pytest.approx(3.26, abs=0.01)
    assert math.isinf(mbie_equivalent_h(10, 5, 2, 100, 0.1))
    assert math.isinf(mbie_radius(0, 5, 2, 100, 0.1))
    n, z = 10.0, 0.5
    assert n * z / (1 - z) == 10.0


def test_mbie_default_m_is_positive_integer():
    m = mbie_default_m(0.01, 0.1, 0.95, 5, 2)
    assert isinstance(m, int) and m >= 1
    scale = 1.0 / (0.01 ** 2 * 0.05 ** 4)
    assert m == math.ceil(scale * 5 + scale * math.log(10 / (0.01 * 0.05 * 0.1)))
    assert mbie_default_m(1e4, 0.2, 0.95, 5, 2) >= 1


def test_mbie_no_data_is_fully_optimistic(rng):
    mdp = random_mdp(rng, 3, 2)

    def optimistic(v):
        return np.max(np.max(mdp.reward + mdp.gamma * v[None, None, :], axis=2), axis=1)

    v = mbie_internal_values(np.zeros((3, 2, 3)), mdp.reward, mdp.gamma, 0.1, 100, TIGHT)
    np.testing.assert_allclose(v, sweep(optimistic, 3, 2000), atol=1e-7)


def test_mbie_many_samples_approaches_sample_mean(rng):
    mdp = random_mdp(rng, 3, 2)
    counts = np.round(mdp.transition * 1e9)
    p_hat = counts / counts.sum(axis=2, keepdims=True)
    ref = value_iteration(TabularMDP(p_hat, mdp.reward, mdp.gamma), TIGHT)
    v = mbie_internal_values(counts, mdp.reward, mdp.gamma, 0.1, 100, TIGHT)
    np.testing.assert_allclose(v, ref, atol=0.02)


def test_mbie_config_validation():
    with pytest.raises(ValueError):
        Mbie(0.1, 1.5).validate()
    with pytest.raises(ValueError):
        Mbie(0.0, 0.5).validate()
    with pytest.raises(ValueError):
        Mbie(0.1, 0.5, m=0).validate()


# --- Dirichlet explorers ---------------------------------------------------------


def test_dirichlet_variance_sum_closed_form(rng):
    belief = DirichletModel(rng.random((3, 2, 3)) + 0.1)
    a = belief.alpha
    a0 = a.sum(axis=2, keepdims=True)
    var = a * (a0 - a) / (a0 ** 2 * (a0 + 1))
    np.testing.assert_allclose(belief.variance_sum(), var.sum(axis=2), atol=1e-15)


def test_bolt_matches_rmdp_on_pseudo_counts(rng):
    mdp = random_mdp(rng, 4, 2)
    belief = DirichletModel(np.zeros((4, 2, 4)))
    for _ in range(30):
        belief.add(int(rng.integers(4)), int(rng.integers(2)), int(rng.integers(4)))
    for eta in (0, 1, 5.5):
        a = bolt_internal_values(belief, mdp.reward, mdp.gamma, eta, TIGHT)
        b = rmdp_internal_values(belief.counts, mdp.reward, mdp.gamma, eta, TIGHT)
        assert np.array_equal(a, b)


def test_bolt_flat_prior_hand_example():
    belief = DirichletModel.symmetric(2, 1, 1.0)
    r = two_state_reward()

    def backup(v):
        nxt = r[:, 0, :] + 0.5 * v[None, :]
        return (2.0 / 3.0) * nxt.mean(axis=1) + (1.0 / 3.0) * nxt.max(axis=1)

    np.testing.assert_allclose(bolt_internal_values(belief, r, 0.5, 1, TIGHT), sweep(backup, 2), atol=1e-9)


def test_bolt_eta0_is_mean_model(rng):
    mdp = random_mdp(rng, 3, 2)
    belief = DirichletModel.symmetric(3, 2)
    belief.add(0, 1, 2)
    ref = value_iteration(TabularMDP(belief.mean(), mdp.reward, mdp.gamma), TIGHT)
    np.testing.assert_allclose(bolt_internal_values(belief, mdp.reward, mdp.gamma, 0, TIGHT), ref, atol=1e-8)


def test_beb_bonus_values(rng):
    belief = DirichletModel.symmetric(5, 2)
    beta = 2 * 148 ** 2
    assert np.all(beb_bonus(belief, beta) == 43808.0)
    belief.add(0, 0, 1)
    assert beb_bonus(belief, beta)[0, 0] == 43808.0 / 2
    mdp = random_mdp(rng, 5, 2)
    ref = value_iteration(TabularMDP(belief.mean(), mdp.reward, mdp.gamma), TIGHT)
    np.testing.assert_allclose(beb_internal_values(belief, mdp.reward, mdp.gamma, 1e-300, TIGHT), ref, atol=1e-8)


def test_vbe_bonus_flat_prior_value():
    # flat prior, no data, |S| = 5: variance sum = (1 - 5 * 0.2^2) / 6
    belief = DirichletModel.symmetric(5, 2, VBE_ALPHA0)
    expected = 0.95 / 0.05 ** 2 * math.sqrt(5 * (0.8 / 6) / 0.1)
    np.testing.assert_allclose(vbe_bonus(belief, 0.95, 0.1), expected, rtol=1e-14)
    assert expected == pytest.approx(981.16, abs=0.01)


def test_vbe_bonus_vanishes_with_data(rng):
    mdp = random_mdp(rng, 3, 2)
    belief = DirichletModel.symmetric(3, 2, 1.0)
    belief.counts = TransitionCounts(np.round(mdp.transition * 1e12))
    assert vbe_bonus(belief, mdp.gamma, 0.1).max() < 1e-3
    ref = value_iteration(TabularMDP(belief.mean(), mdp.reward, mdp.gamma), TIGHT)
    np.testing.assert_allclose(vbe_internal_values(belief, mdp.reward, mdp.gamma, 0.1, TIGHT), ref, atol=0.05)


def test_vbe_bonus_shrinks_with_counts():
    belief = DirichletModel.symmetric(3, 1, 1.0)
    before = vbe_bonus(belief, 0.9, 0.5)[0, 0]
    belief.add(0, 0, 1)
    assert vbe_bonus(belief, 0.9, 0.5)[0, 0] < before


def test_dirichlet_configs_validate():
    with pytest.raises(ValueError):
        Vbe(0.0).validate()
    with pytest.raises(ValueError):
        Beb(-1.0).validate()
    with pytest.raises(ValueError):
        Bolt(-1.0).validate()
    with pytest.raises(ValueError):
        EpsGreedy(1.5).validate()
    with pytest.raises(ValueError):
        DirichletModel(-np.ones((2, 1, 2)))


def test_labels():
    assert PacRmdp(8).label == "PAC-RMDP(8)"
    assert Mbie(1e4, 0.2).label == "MBIE(10000, 0.2)"
    assert Vbe(0.99).label == "VBE(0.99)"
    assert Beb(2 * 148 ** 2).label == "BEB(43808)"
    assert Bolt(148).label == "BOLT(148)"


# --- agents -----------------------------------------------------------------------


def test_counts_reject_out_of_range():
    counts = TransitionCounts.zeros(2, 2)
    with pytest.raises(IndexError):
        counts.add(0, 2, 1)
    agent = PacRmdpAgent(np.zeros((2, 2, 2)), 0.9, 1)
    with pytest.raises(IndexError):
        agent.observe(0, 0, 5)
    with pytest.raises(IndexError):
        agent.act(3)


def test_sample_mean_uniform_for_unvisited():
    counts = TransitionCounts.zeros(3, 1)
    counts.add(0, 0, 2)
    p_hat, unvisited = counts.sample_mean()
    np.testing.assert_array_equal(p_hat[0, 0], [0, 0, 1])
    np.testing.assert_allclose(p_hat[1, 0], 1 / 3)
    assert list(unvisited[:, 0]) == [False, True, True]


def test_h0_agent_after_full_visit_is_certainty_equivalent(rng):
    mdp = random_mdp(rng, 3, 2)
    agent = PacRmdpAgent(mdp.reward, mdp.gamma, 0, TIGHT)
    for s in range(3):
        for a in range(2):
            agent.observe(s, a, int(rng.integers(3)))
    p_hat, _ = agent.counts.sample_mean()
    model = TabularMDP(p_hat, mdp.reward, mdp.gamma)
    v = value_iteration(model, TIGHT)
    q = np.einsum("ijk,ijk->ij", p_hat, mdp.reward + mdp.gamma * v)
    for s in range(3):
        assert agent.act(s) == int(np.argmax(q[s]))


def _trace(config, seed, steps=200):
    mdp = chain_mdp()
    env_rng, agent_rng = (np.random.default_rng(c) for c in np.random.SeedSequence(seed).spawn(2))
    env = DiscreteEnv(mdp, env_rng)
    agent = make_agent(config, known_reward_model(mdp), 0.95, 0.01, agent_rng)
    s = env.reset()
    out = []
    for _ in range(steps):
        a = agent.act(s)
        s2, r = env.step(a)
        agent.observe(s, a, s2, r)
        out.append((s, a, s2, r))
        s = s2
    return out


@pytest.mark.parametrize("config", [PacRmdp(1), Mbie(20, 0.9), Vbe(0.1), Beb(2.0), Bolt(3), EpsGreedy(0.1)])
def test_agents_are_deterministic_given_seed(config):
    assert _trace(config, 5) == _trace(config, 5)


def test_eps_greedy_needs_generator_and_explores():
    with pytest.raises(ValueError):
        EpsGreedyAgent(np.zeros((2, 2, 2)), 0.9, 0.1)
    assert len({a for _, a, _, _ in _trace(EpsGreedy(1.0), 0, 100)}) == 2


def test_make_agent_rejects_invalid_config():
    with pytest.raises(ValueError):
        make_agent(Mbie(0.1, 2.0), np.zeros((2, 2, 2)), 0.9)
    with pytest.raises(TypeError):
        make_agent("nope", np.zeros((2, 2, 2)), 0.9)


def test_internal_values_within_tolerance_of_fixed_point(rng):
    mdp = random_mdp(rng, 4, 2, 0.95)
    counts = rng.integers(0, 4, size=(4, 2, 4)).astype(float)
    loose = rmdp_internal_values(counts, mdp.reward, mdp.gamma, 2, 0.01)
    tight = rmdp_internal_values(counts, mdp.reward, mdp.gamma, 2, TIGHT)
    assert np.max(np.abs(loose - tight)) <= 0.01
