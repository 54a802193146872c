import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mpgplay.game import JointActionIndex, random_identical_interest_game
from mpgplay.policy import (
    PolicyParams,
    deterministic_table,
    dump_policy,
    joint_action_prob,
    load_policy,
    log_policy,
    softmax_policy,
    uniform_params,
)

logits = arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 5)),
                elements=st.floats(-300, 300, allow_nan=False))


@given(logits)
def test_rows_are_open_simplex(theta):
    p = softmax_policy(PolicyParams((theta,))).pi[0]
    assert (p > 0).all() and (p <= 1).all()
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)


@given(logits, st.floats(-200, 200))
def test_shift_invariance(theta, c):
    p = softmax_policy(PolicyParams((theta,))).pi[0]
    q = softmax_policy(PolicyParams((theta + c,))).pi[0]
    np.testing.assert_allclose(p, q, atol=1e-12)


@given(logits)
def test_log_policy_consistent(theta):
    params = PolicyParams((theta,))
    p = softmax_policy(params).pi[0]
    lp = log_policy(params)[0]
    mask = p > 1e-300
    np.testing.assert_allclose(np.log(p[mask]), lp[mask], rtol=1e-12, atol=1e-12)


def test_examples(fig1):
    p = softmax_policy(PolicyParams((np.array([[math.log(2), 0.0]]),))).pi[0]
    np.testing.assert_allclose(p, [[2 / 3, 1 / 3]], atol=1e-15)
    u = softmax_policy(uniform_params(fig1))
    np.testing.assert_allclose(u.pi[0], [[1 / 3] * 3])
    np.testing.assert_allclose(u.pi[1], [[0.5, 0.5]])
    for p in u.pi:
        assert -(p * np.log(p)).sum() == pytest.approx(math.log(p.shape[1]), abs=1e-12)


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        PolicyParams((np.array([[np.inf, 0.0]]),))
    with pytest.raises(ValueError):
        PolicyParams((np.zeros(3),))


def test_joint_action_prob(fig1):
    u = softmax_policy(uniform_params(fig1))
    assert joint_action_prob(u, 0, JointActionIndex((2, 1), 5)) == pytest.approx(1 / 6)
    sharp = softmax_policy(PolicyParams((np.array([[40.0, 0.0, 0.0]]), np.array([[0.3, -0.2]]))))
    other = sharp.pi[1][0, 1]
    assert joint_action_prob(sharp, 0, JointActionIndex((0, 1), 1)) == pytest.approx(other, abs=1e-12)
    with pytest.raises(IndexError):
        joint_action_prob(u, 1, JointActionIndex((0, 0), 0))
    with pytest.raises(IndexError):
        joint_action_prob(u, 0, JointActionIndex((3, 0), 0))


@given(st.integers(0, 1000))
@settings(max_examples=25, deadline=None)
def test_joint_sums_to_one(seed):
    g = random_identical_interest_game(seed, (3, 2, [2, 3, 2]), 0.5)
    rng = np.random.default_rng(seed)
    params = PolicyParams(tuple(rng.standard_normal((2, m)) * 5 for m in g.action_sizes))
    np.testing.assert_allclose(softmax_policy(params).joint().sum(axis=1), 1.0, atol=1e-10)


def test_deterministic_table(fig1):
    t = deterministic_table(fig1, [[2], [0]])
    np.testing.assert_array_equal(t.pi[0], [[0, 0, 1]])
    np.testing.assert_array_equal(t.joint(), [[0, 0, 0, 0, 1, 0]])


def test_policy_file_roundtrip(fig1):
    params = PolicyParams((np.array([[0.1, -2.0, 3.0]]), np.array([[1.5, 0.0]])))
    text = dump_policy(params)
    doc = json.loads(text)
    assert "pi" in doc and "theta" in doc
    back = load_policy(text, fig1)
    for a, b in zip(back.theta, params.theta):
        np.testing.assert_array_equal(a, b)
    with pytest.raises(ValueError):
        load_policy(json.dumps({"theta": [[[0.0, 0.0]]]}), fig1)
