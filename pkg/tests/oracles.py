"""Reference computations that avoid the package's vectorized paths."""

import itertools

import numpy as np

from mpgplay.policy import PolicyParams


def _softmax(theta):
    z = np.exp(theta - theta.max(axis=1, keepdims=True))
    return z / z.sum(axis=1, keepdims=True)


def loop_eval(game, thetas):
    """Plain-loop evaluation: returns dict with d, V (n, S), Qbar list, J."""
    pis = [_softmax(np.asarray(t)) for t in thetas]
    S, n, g = game.n_states, game.n_agents, game.gamma
    profiles = list(itertools.product(*[range(m) for m in game.action_sizes]))
    joint = np.zeros((S, len(profiles)))
    for s in range(S):
        for j, a in enumerate(profiles):
            joint[s, j] = np.prod([pis[k][s, a[k]] for k in range(n)])
    P_pi = np.zeros((S, S))
    for s in range(S):
        for j in range(len(profiles)):
            P_pi[s] += joint[s, j] * game.transition[s, j]
    V = np.zeros((n, S))
    for i in range(n):
        r = np.array([sum(joint[s, j] * game.rewards[i, s, j] for j in range(len(profiles))) for s in range(S)])
        V[i] = np.linalg.solve(np.eye(S) - g * P_pi, r)
    d = np.linalg.solve(np.eye(S) - g * P_pi.T, (1 - g) * game.rho)
    Qbar = []
    for i in range(n):
        qb = np.zeros((S, game.action_sizes[i]))
        for s in range(S):
            for j, a in enumerate(profiles):
                w = np.prod([pis[k][s, a[k]] for k in range(n) if k != i])
                q = game.rewards[i, s, j] + g * game.transition[s, j] @ V[i]
                qb[s, a[i]] += w * q
        Qbar.append(qb)
    return {"pi": pis, "d": d, "V": V, "Qbar": Qbar, "J": V @ game.rho}


def fd_gradient(fun, params: PolicyParams, i, h=1e-5):
    """Central differences of a scalar function of PolicyParams w.r.t. theta_i."""
    base = params.theta[i]
    out = np.zeros_like(base)
    for idx in np.ndindex(*base.shape):
        plus = base.copy()
        minus = base.copy()
        plus[idx] += h
        minus[idx] -= h
        out[idx] = (fun(params.replace_agent(i, plus)) - fun(params.replace_agent(i, minus))) / (2 * h)
    return out


def rel_err(a, b, floor=1e-12):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), floor))
