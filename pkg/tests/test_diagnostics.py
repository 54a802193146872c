import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpgplay.diagnostics import (
    ascent_check,
    best_response,
    brute_force_pure_ne,
    c_theta,
    diagnose,
    lojasiewicz_check,
    m_theta,
    ne_gap,
    solve_mdp,
    validate_potential_property,
)
from mpgplay.dynamics import gradient_play_step, log_barrier_npg_step, npg_step, theory_stepsizes
from mpgplay.errors import MissingPotentialError, SearchSpaceTooLarge
from mpgplay.evaluation import evaluate
from mpgplay.game import GameSpec, random_identical_interest_game
from mpgplay.policy import PolicyParams, deterministic_table, random_params, softmax_policy, uniform_params

from conftest import chain_game, constant_game, oracle_grid


def near_deterministic(game, choice, gap=40.0):
    th = []
    for i, m in enumerate(game.action_sizes):
        t = np.zeros((game.n_states, m))
        t[np.arange(game.n_states), choice[i]] = gap
        th.append(t)
    return PolicyParams(tuple(th))


def value_iteration(P, r, gamma, iters=5000):
    V = np.zeros(r.shape[0])
    for _ in range(iters):
        V = (r + gamma * P @ V).max(axis=1)
    return V


def test_best_response_examples(fig1):
    br = best_response(fig1, deterministic_table(fig1, [[0], [0]]), 0)
    assert br.value == pytest.approx(0.2) and br.actions.tolist() == [2]
    br = best_response(fig1, softmax_policy(uniform_params(fig1)), 0)
    assert br.value == pytest.approx(0.155) and br.actions.tolist() == [1]


def test_best_response_single_action():
    g = random_identical_interest_game(3, (2, 2, [1, 3]), 0.6)
    table = softmax_policy(random_params(g, 1))
    assert best_response(g, table, 0).value == pytest.approx(evaluate(g, table).J[0], abs=1e-12)


@pytest.mark.parametrize("seed", range(8))
def test_policy_iteration_matches_value_iteration(seed):
    rng = np.random.default_rng(seed)
    S, A = 4, 3
    P = rng.uniform(size=(S, A, S))
    P /= P.sum(axis=2, keepdims=True)
    r = rng.uniform(size=(S, A))
    V, sigma, _ = solve_mdp(P, r, 0.9)
    np.testing.assert_allclose(V, value_iteration(P, r, 0.9), atol=1e-9)


def test_ne_gap_uniform(fig1):
    gap = ne_gap(fig1, softmax_policy(uniform_params(fig1)))
    np.testing.assert_allclose(gap.per_agent, [0.155 + 0.225, -0.64 / 3 + 0.225], atol=1e-12)
    assert gap.per_agent[1] == pytest.approx(0.011666666666666, abs=1e-12)
    assert gap.max == pytest.approx(0.38, abs=1e-12)


def test_ne_gap_at_equilibrium(fig1):
    gap = ne_gap(fig1, softmax_policy(near_deterministic(fig1, [[2], [0]])))
    assert gap.max <= 1e-8
    assert ne_gap(fig1, deterministic_table(fig1, [[2], [0]])).max == 0.0


def test_c_theta_examples(fig1):
    c, per = c_theta(fig1, softmax_policy(uniform_params(fig1)))
    assert per == pytest.approx([1 / 3, 1 / 2]) and c == pytest.approx(1 / 3)
    c, _ = c_theta(fig1, softmax_policy(near_deterministic(fig1, [[2], [0]])))
    assert c == pytest.approx(1.0, abs=1e-12)
    c, _ = c_theta(constant_game(), softmax_policy(random_params(constant_game(), 0)))
    assert c == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        c_theta(fig1, softmax_policy(uniform_params(fig1)), tie_tol=-1)


def test_m_theta_examples(fig1):
    assert m_theta(fig1, softmax_policy(uniform_params(fig1))) == 1.0
    g = chain_game(0.5)
    assert m_theta(g, softmax_policy(uniform_params(g))) == pytest.approx(2.0)


def test_lojasiewicz_example(fig1):
    res = lojasiewicz_check(fig1, uniform_params(fig1))
    gnorm = math.sqrt((0.205 ** 2 + 0.38 ** 2 + 0.175 ** 2)) / 3
    assert res[0].lhs == pytest.approx(0.38)
    assert res[0].rhs == pytest.approx(math.sqrt(3) * 3 * gnorm)
    assert res[0].rhs == pytest.approx(0.8069, abs=1e-4)
    assert all(r.holds for r in res)


@given(st.integers(0, 10**5), st.sampled_from([0.0, 0.5, 0.9]), st.floats(0.1, 4.0))
@settings(max_examples=50, deadline=None)
def test_lojasiewicz_random(seed, gamma, scale):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 4))
    g = random_identical_interest_game(seed, (n, int(rng.integers(1, 4)), list(rng.integers(2, 4, size=n))), gamma)
    res = lojasiewicz_check(g, random_params(g, seed, scale))
    assert all(r.holds for r in res)
    assert all(r.lhs >= -1e-9 for r in res)


def test_brute_force_figure1(fig1):
    found = brute_force_pure_ne(fig1)
    assert len(found) == 1
    assert [list(a) for a in found[0].actions] == [[2], [0]]
    assert found[0].values == pytest.approx([0.2, 0.2])


def test_brute_force_constant_and_single_agent():
    assert len(brute_force_pure_ne(constant_game((2, 2)))) == 4
    g = GameSpec(["s"], [["a", "b", "c"]], np.ones((1, 3, 1)), np.array([[[0.1, 0.5, 0.5]]]), 0.0, [1.0],
                 identical_interest=True)
    assert sorted(ne.actions[0][0] for ne in brute_force_pure_ne(g)) == [1, 2]


def test_brute_force_guard():
    g = random_identical_interest_game(0, (3, 3, [3, 3, 3]), 0.5)
    with pytest.raises(SearchSpaceTooLarge):
        brute_force_pure_ne(g, limit=1000)


def test_potential_property():
    g = random_identical_interest_game(1, (2, 2, [2, 2]), 0.7)
    assert validate_potential_property(g, samples=30).max_violation <= 1e-10
    phi = g.potential.copy()
    phi[0, 1] += 0.1
    bad = GameSpec(g.states, g.actions, g.transition, g.rewards, g.gamma, g.rho, potential=phi)
    rep = validate_potential_property(bad, samples=30)
    assert rep.max_violation > 1e-3 and not rep.ok
    rep0 = validate_potential_property(g, samples=0)
    assert rep0.n_deterministic > 0 and rep0.ok
    nop = GameSpec(g.states, g.actions, g.transition, g.rewards, g.gamma, g.rho)
    with pytest.raises(MissingPotentialError):
        validate_potential_property(nop)


@pytest.mark.parametrize("k", range(20))
def test_potential_property_grid(k):
    assert validate_potential_property(oracle_grid()[k], samples=10, seed=k).max_violation <= 1e-10


def test_ascent_gp_and_npg_theory(fig1):
    rep = theory_stepsizes(fig1)
    p = random_params(fig1, 2)
    a = ascent_check(fig1, p, gradient_play_step(fig1, p, rep.eta_gp), "GP", rep.eta_gp)
    assert a.holds and a.bound > 0 and a.min_z is None
    a = ascent_check(fig1, p, npg_step(fig1, p, rep.eta_npg), "NPG", rep.eta_npg)
    assert a.holds and a.min_z >= 1 - 1e-12
    assert a.ratio_range[0] < 0 < a.ratio_range[1]


def test_ascent_npg_logbar_theory():
    g = random_identical_interest_game(8, (2, 2, [2, 3]), 0.5)
    rep = theory_stepsizes(g, 0.01)
    p = uniform_params(g)
    new = log_barrier_npg_step(g, p, rep.eta_npg_logbar, 0.01)
    a = ascent_check(g, p, new, "NPG-logbar", rep.eta_npg_logbar, 0.01, M=rep.M)
    assert a.holds and a.bound >= 0


def test_ascent_fixed_point():
    g = constant_game((2, 2))
    p = uniform_params(g)
    a = ascent_check(g, p, npg_step(g, p, 1.0), "NPG", 1.0)
    assert a.delta == pytest.approx(0.0, abs=1e-15) and a.bound == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        ascent_check(g, p, p, "SGD", 1.0)


def test_diagnose_record(fig1):
    b = evaluate(fig1, uniform_params(fig1))
    rec = diagnose(fig1, b, uniform_params(fig1), lam=0.003)
    assert rec.ne_gap_max == pytest.approx(0.38)
    assert rec.phi_reg == pytest.approx(-0.239046, abs=1e-6)
    assert rec.min_policy_entry == pytest.approx(1 / 3)
    assert set(rec.to_dict()) >= {"c_theta", "m_theta", "lojasiewicz_rhs"}


def test_dichotomy_on_converged_iterates(figure1_runs):
    seen = 0
    for rec in figure1_runs.values():
        for r in rec.rows:
            if r.diag.grad_norm < 1e-8:
                seen += 1
                assert not (0.1 <= r.diag.c_theta <= 0.9)
    assert seen > 0
