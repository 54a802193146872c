"""Backend selection for the hot kernels.

The compiled Cython module is used when it imports; otherwise (or when
``MPGPLAY_PURE_PYTHON`` is set) the numpy fallback is used.  Callers should go
through this module's attributes so :func:`set_backend` takes effect globally.
"""

import os

from . import _pykernels

try:
    from . import _kernels as _ckernels
except ImportError:  # extension not built
    _ckernels = None

__all__ = [
    "BACKEND",
    "available_backends",
    "set_backend",
    "softmax_rows",
    "log_softmax_rows",
    "joint_policy",
    "marginalize",
]

BACKEND = None
softmax_rows = log_softmax_rows = joint_policy = marginalize = None


def available_backends():
    return ["cython", "python"] if _ckernels is not None else ["python"]


def set_backend(name):
    """Switch kernels to ``"cython"`` or ``"python"``; returns the previous name."""
    global BACKEND, softmax_rows, log_softmax_rows, joint_policy, marginalize
    if name == "cython":
        if _ckernels is None:
            raise RuntimeError("compiled kernels are not available; build the extension first")
        mod = _ckernels
    elif name == "python":
        mod = _pykernels
    else:
        raise ValueError(f"unknown backend {name!r}")
    previous = BACKEND
    softmax_rows = mod.softmax_rows
    log_softmax_rows = mod.log_softmax_rows
    joint_policy = mod.joint_policy
    marginalize = mod.marginalize
    BACKEND = name
    return previous


if _ckernels is not None and not os.environ.get("MPGPLAY_PURE_PYTHON"):
    set_backend("cython")
else:
    set_backend("python")
