"""Tabular softmax policies.

Parameters are the source of truth; probability tables are always derived.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import kernels
from .game import GameSpec, JointActionIndex


@dataclass(frozen=True, eq=False)
class PolicyParams:
    """Per-agent logits, ``theta[i]`` of shape ``(S, A_i)``."""

    theta: tuple

    def __post_init__(self):
        arrs = []
        for t in self.theta:
            a = np.array(t, dtype=np.float64)
            if a.ndim != 2:
                raise ValueError("each agent's theta must be a 2-D (state, action) array")
            if not np.isfinite(a).all():
                raise ValueError("policy parameters must be finite")
            a.setflags(write=False)
            arrs.append(a)
        object.__setattr__(self, "theta", tuple(arrs))

    @property
    def n_agents(self):
        return len(self.theta)

    def check_shapes(self, game: GameSpec):
        want = [(game.n_states, m) for m in game.action_sizes]
        got = [t.shape for t in self.theta]
        if got != want:
            raise ValueError(f"theta shapes {got} do not match game {want}")
        return self

    def flat(self) -> np.ndarray:
        return np.concatenate([t.ravel() for t in self.theta])

    def with_flat(self, vec) -> "PolicyParams":
        out, k = [], 0
        for t in self.theta:
            out.append(np.asarray(vec[k:k + t.size]).reshape(t.shape))
            k += t.size
        return PolicyParams(tuple(out))

    def replace_agent(self, i, theta_i) -> "PolicyParams":
        th = list(self.theta)
        th[i] = theta_i
        return PolicyParams(tuple(th))


@dataclass(frozen=True, eq=False)
class PolicyTable:
    """Per-agent probability rows ``pi[i][s, a_i]``."""

    pi: tuple

    @property
    def n_agents(self):
        return len(self.pi)

    def joint(self) -> np.ndarray:
        """Product policy over flat joint actions, shape ``(S, J)``."""
        return kernels.joint_policy(list(self.pi))


def softmax_policy(params: PolicyParams) -> PolicyTable:
    return PolicyTable(tuple(kernels.softmax_rows(t) for t in params.theta))


def log_policy(params: PolicyParams) -> tuple:
    """Per-agent ``log pi`` computed without forming ``pi`` (stable near the boundary)."""
    return tuple(kernels.log_softmax_rows(t) for t in params.theta)


def uniform_params(game: GameSpec) -> PolicyParams:
    return PolicyParams(tuple(np.zeros((game.n_states, m)) for m in game.action_sizes))


def random_params(game: GameSpec, seed, scale=1.0) -> PolicyParams:
    rng = np.random.default_rng(seed)
    return PolicyParams(tuple(scale * rng.standard_normal((game.n_states, m)) for m in game.action_sizes))


def deterministic_table(game: GameSpec, choice) -> PolicyTable:
    """One-hot table from ``choice[i][s]`` action indices (a boundary point of the simplex)."""
    pis = []
    for i, m in enumerate(game.action_sizes):
        p = np.zeros((game.n_states, m))
        p[np.arange(game.n_states), np.asarray(choice[i], dtype=int)] = 1.0
        pis.append(p)
    return PolicyTable(tuple(pis))


def joint_action_prob(table: PolicyTable, s: int, a: JointActionIndex) -> float:
    S = table.pi[0].shape[0]
    if not 0 <= s < S:
        raise IndexError(f"state {s} out of range")
    if len(a.per_agent) != table.n_agents:
        raise IndexError("joint action has wrong number of agents")
    prob = 1.0
    for p, ai in zip(table.pi, a.per_agent):
        if not 0 <= ai < p.shape[1]:
            raise IndexError(f"action {ai} out of range")
        prob *= p[s, ai]
    return float(prob)


def dump_policy(params: PolicyParams) -> str:
    table = softmax_policy(params)
    return json.dumps(
        {"theta": [t.tolist() for t in params.theta], "pi": [p.tolist() for p in table.pi]},
        indent=2,
    )


def load_policy(text: str, game: GameSpec | None = None) -> PolicyParams:
    doc = json.loads(text)
    params = PolicyParams(tuple(np.asarray(t, dtype=np.float64) for t in doc["theta"]))
    if game is not None:
        params.check_shapes(game)
    return params
