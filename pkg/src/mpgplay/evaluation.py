"""Exact evaluation of a (game, policy) pair by dense linear solves.

Everything here is closed form: visitation, per-agent values, Q and advantage
functions, their averages over the other agents, gradients, Fisher blocks and
the (regularized) potential.  No sampling anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import MissingPotentialError
from .game import GameSpec
from .policy import PolicyParams, PolicyTable, log_policy, softmax_policy

PRECONDITION_TOL = 1e-8
# relative singular-value cutoff; the numpy default (1e-15) can keep the
# round-off image of the exact null direction of a block
PINV_RCOND = 1e-12


def _as_table(policy) -> PolicyTable:
    if isinstance(policy, PolicyTable):
        return policy
    if isinstance(policy, PolicyParams):
        return softmax_policy(policy)
    raise TypeError(f"expected PolicyParams or PolicyTable, got {type(policy).__name__}")


def _solve(A, b, what):
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise FloatingPointError(f"{what}: linear solve failed ({exc})") from exc


@dataclass(frozen=True, eq=False)
class EvalBundle:
    """All exact quantities for one policy.

    ``V`` has shape ``(n, S)``, ``Q`` has shape ``(n, S, J)``.  ``Qbar[i]`` and
    ``Abar[i]`` have shape ``(S, A_i)``.  ``induced[i]`` is the model tensor
    averaged over agents other than ``i``, shape ``(S, A_i, S + n + 1)``: the
    first ``S`` columns are the induced transition, then each agent's averaged
    reward, then the averaged potential.
    """

    table: PolicyTable
    gamma: float
    joint: np.ndarray
    P_pi: np.ndarray
    d: np.ndarray
    V: np.ndarray
    Q: np.ndarray
    Qbar: tuple
    Abar: tuple
    J: np.ndarray
    induced: tuple
    V_phi: np.ndarray | None = None
    Abar_phi: tuple | None = None
    Phi: float | None = None

    @property
    def A(self) -> np.ndarray:
        return self.Q - self.V[:, :, None]

    @property
    def n_agents(self):
        return self.V.shape[0]

    def gradient(self, i) -> np.ndarray:
        """d J_i / d theta_{s, a_i} = d(s) pi_i(a_i|s) Abar_i(s, a_i) / (1 - gamma)."""
        return self.d[:, None] * self.table.pi[i] * self.Abar[i] / (1.0 - self.gamma)

    def gradients(self) -> list:
        return [self.gradient(i) for i in range(self.n_agents)]

    def to_dict(self) -> dict:
        out = {
            "d": self.d.tolist(),
            "V": self.V.tolist(),
            "Q": self.Q.tolist(),
            "A": self.A.tolist(),
            "Qbar": [q.tolist() for q in self.Qbar],
            "Abar": [a.tolist() for a in self.Abar],
            "J": self.J.tolist(),
            "pi": [p.tolist() for p in self.table.pi],
        }
        if self.Phi is not None:
            out["Phi"] = self.Phi
        return out


def evaluate(game: GameSpec, policy) -> EvalBundle:
    table = _as_table(policy)
    pis = list(table.pi)
    S, n, g = game.n_states, game.n_agents, game.gamma
    joint = kernels.joint_policy(pis)
    P_pi = np.einsum("sj,sjt->st", joint, game.transition)
    # columns: each agent's stage reward then the potential
    stage = np.einsum("sj,sjk->sk", joint, game.model_stack[:, :, S:])
    lhs = np.eye(S) - g * P_pi
    W = _solve(lhs, stage, "value functions")
    d = _solve(lhs.T, (1.0 - g) * game.rho, "visitation")
    V = np.ascontiguousarray(W[:, :n].T)
    Q = game.rewards + g * np.einsum("sjt,it->isj", game.transition, V)

    induced, Qbar, Abar, Abar_phi = [], [], [], []
    V_phi = W[:, n] if game.has_potential else None
    for i in range(n):
        m = kernels.marginalize(game.model_stack, pis, i)
        Pt = m[:, :, :S]
        qb = m[:, :, S + i] + g * (Pt @ V[i])
        induced.append(m)
        Qbar.append(qb)
        Abar.append(qb - V[i][:, None])
        if V_phi is not None:
            Abar_phi.append(m[:, :, S + n] + g * (Pt @ V_phi) - V_phi[:, None])
    return EvalBundle(
        table=table,
        gamma=g,
        joint=joint,
        P_pi=P_pi,
        d=d,
        V=V,
        Q=Q,
        Qbar=tuple(Qbar),
        Abar=tuple(Abar),
        J=V @ game.rho,
        induced=tuple(induced),
        V_phi=V_phi,
        Abar_phi=tuple(Abar_phi) if V_phi is not None else None,
        Phi=float(game.rho @ V_phi) if V_phi is not None else None,
    )


def visitation(game: GameSpec, table: PolicyTable) -> np.ndarray:
    """Discounted state visitation d(s), solving (I - gamma P_pi^T) d = (1 - gamma) rho."""
    table = _as_table(table)
    joint = kernels.joint_policy(list(table.pi))
    P_pi = np.einsum("sj,sjt->st", joint, game.transition)
    lhs = np.eye(game.n_states) - game.gamma * P_pi.T
    return _solve(lhs, (1.0 - game.gamma) * game.rho, "visitation")


def _stage_values(game, table, stage_cost):
    joint = kernels.joint_policy(list(table.pi))
    P_pi = np.einsum("sj,sjt->st", joint, game.transition)
    rbar = (joint * stage_cost).sum(axis=1)
    V = _solve(np.eye(game.n_states) - game.gamma * P_pi, rbar, "value functions")
    Q = stage_cost + game.gamma * game.transition @ V
    return V, Q


def value_functions(game: GameSpec, table: PolicyTable, i: int):
    """Return ``(V_i, Q_i, A_i)`` for agent ``i``."""
    table = _as_table(table)
    V, Q = _stage_values(game, table, game.rewards[i])
    return V, Q, Q - V[:, None]


def averaged_functions(game: GameSpec, table: PolicyTable, i: int, values=None):
    """Return ``(Qbar_i, Abar_i)`` by averaging the joint Q_i over the other agents.

    ``values`` may carry a precomputed ``(V_i, Q_i, A_i)`` triple.
    """
    table = _as_table(table)
    V, Q, _ = values if values is not None else value_functions(game, table, i)
    qbar = kernels.marginalize(np.ascontiguousarray(Q[:, :, None]), list(table.pi), i)[:, :, 0]
    return qbar, qbar - V[:, None]


def agent_values(game: GameSpec, policy) -> np.ndarray:
    """J_i = E_{s ~ rho} V_i(s) for every agent."""
    table = _as_table(policy)
    return np.array([game.rho @ _stage_values(game, table, game.rewards[i])[0] for i in range(game.n_agents)])


def policy_gradient(game: GameSpec, params: PolicyParams, i: int) -> np.ndarray:
    table = softmax_policy(params)
    _, abar = averaged_functions(game, table, i)
    d = visitation(game, table)
    return d[:, None] * table.pi[i] * abar / (1.0 - game.gamma)


@dataclass(frozen=True, eq=False)
class FisherBlock:
    """Per-state ``F_{i,s} = diag(pi) - pi pi^T`` with state weights ``d(s)``."""

    blocks: np.ndarray  # (S, A_i, A_i)
    weights: np.ndarray  # (S,)

    def matrix(self) -> np.ndarray:
        """Full block-diagonal ``blkdiag(d(s) F_{i,s})``."""
        S, A, _ = self.blocks.shape
        F = np.zeros((S * A, S * A))
        for s in range(S):
            F[s * A:(s + 1) * A, s * A:(s + 1) * A] = self.weights[s] * self.blocks[s]
        return F


def fisher_block(game: GameSpec, table: PolicyTable, i: int) -> FisherBlock:
    table = _as_table(table)
    p = table.pi[i]
    blocks = np.einsum("sa,ab->sab", p, np.eye(p.shape[1])) - p[:, :, None] * p[:, None, :]
    return FisherBlock(blocks, visitation(game, table))


def natural_direction_pinv(game: GameSpec, params: PolicyParams, i: int, g) -> np.ndarray:
    """Moore-Penrose preconditioned direction ``F_i(theta)^+ g``, block by block.

    This is the verification route; the dynamics use the closed forms.
    """
    g = np.asarray(g, dtype=np.float64)
    if np.abs(g.sum(axis=1)).max() > PRECONDITION_TOL:
        raise ValueError("direction must sum to zero over each state's actions")
    fb = fisher_block(game, softmax_policy(params), i)
    out = np.empty_like(g)
    for s in range(g.shape[0]):
        out[s] = np.linalg.pinv(fb.weights[s] * fb.blocks[s], rcond=PINV_RCOND, hermitian=True) @ g[s]
    return out


def potential_value(game: GameSpec, table: PolicyTable) -> float:
    """Total potential Phi: expected discounted potential from rho."""
    if not game.has_potential:
        raise MissingPotentialError("game has no potential function")
    table = _as_table(table)
    V, _ = _stage_values(game, table, game.potential)
    return float(game.rho @ V)


def barrier_term(params: PolicyParams) -> float:
    """sum_i sum_{s, a_i} log pi_i(a_i|s)."""
    return float(sum(lp.sum() for lp in log_policy(params)))


def regularized_potential(game: GameSpec, params: PolicyParams, lam: float) -> float:
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    return potential_value(game, params) + lam * barrier_term(params)


def barrier_gradient(pi_i: np.ndarray, lam: float) -> np.ndarray:
    """lam - lam |A_i| pi_i(a_i|s), the log-barrier part of the regularized gradient."""
    return lam - lam * pi_i.shape[1] * pi_i


def regularized_gradient(game: GameSpec, params: PolicyParams, i: int, lam: float) -> np.ndarray:
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    grad = policy_gradient(game, params, i)
    if lam == 0:
        return grad
    return grad + barrier_gradient(softmax_policy(params).pi[i], lam)
