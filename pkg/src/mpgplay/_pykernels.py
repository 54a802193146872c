"""Pure numpy implementations of the inner-loop kernels.

Joint actions are flattened row-major over agents (last agent fastest), which
is exactly numpy's C order for an array shaped ``(A_1, ..., A_n)``.
"""

import numpy as np


def softmax_rows(theta):
    z = theta - theta.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def log_softmax_rows(theta):
    z = theta - theta.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def _broadcast(p, k, n):
    # (S, A_k) -> (S, 1, .., A_k, .., 1)
    shape = [p.shape[0]] + [1] * n
    shape[k + 1] = p.shape[1]
    return p.reshape(shape)


def _product(pis, skip=None):
    n = len(pis)
    out = None
    for k, p in enumerate(pis):
        if k == skip:
            continue
        b = _broadcast(p, k, n)
        out = b if out is None else out * b
    return out


def joint_policy(pis):
    """pi(a|s) over flat joint actions, shape (S, J)."""
    S = pis[0].shape[0]
    full = _product(pis)
    sizes = tuple(p.shape[1] for p in pis)
    return np.broadcast_to(full, (S,) + sizes).reshape(S, -1).copy()


def marginalize(X, pis, agent):
    """Average ``X[s, a, k]`` over the other agents' actions.

    Returns ``out[s, a_i, k] = sum_{a_-i} pi_-i(a_-i|s) X[s, (a_i, a_-i), k]``.
    """
    S, _, K = X.shape
    n = len(pis)
    sizes = tuple(p.shape[1] for p in pis)
    Xr = X.reshape((S,) + sizes + (K,))
    if n == 1:
        return Xr.copy()
    w = _product(pis, skip=agent)
    prod = Xr * w[..., None]
    axes = tuple(k + 1 for k in range(n) if k != agent)
    return prod.sum(axis=axes)
