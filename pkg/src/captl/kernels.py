"""Bellman-backup kernels for value iteration.

The inner loop (per-state max/min over action distributions) dominates the
runtime of every quantitative analysis here, so it is JIT-compiled with numba
by default.  Setting the environment variable ``CAPTL_BACKEND=numpy`` selects
a vectorized pure-numpy fallback instead (``CAPTL_BACKEND=numba`` forces the
JIT path and fails loudly if numba is unavailable).

A sweep performs one Jacobi backup:

    x'[s] = opt_{choices c of s}  sum_k probs[k] * x[cols[k]]

for every state with ``update[s]`` set and at least one choice; all other
states keep their current value (pinned target/zero states, deadlocks).
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only on stripped installs
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


def sweep_numpy(x, state_ptr, choice_ptr, cols, probs, update, maximize):
    """One Jacobi Bellman sweep, vectorized with reduceat segment reductions."""
    x_new = x.copy()
    if len(cols) == 0:
        return x_new
    choice_vals = np.add.reduceat(probs * x[cols], choice_ptr[:-1])
    # Reduce over every state that has choices: their segments tile the choice
    # array contiguously (choiceless states occupy zero width), which is the
    # layout reduceat requires.  The update mask is applied at scatter time.
    has = np.diff(state_ptr) > 0
    starts = state_ptr[:-1][has]
    if maximize:
        best = np.maximum.reduceat(choice_vals, starts)
    else:
        best = np.minimum.reduceat(choice_vals, starts)
    sel = update[has]
    x_new[np.flatnonzero(has)[sel]] = best[sel]
    return x_new


@njit(cache=True)
def _sweep_jit(x, state_ptr, choice_ptr, cols, probs, update, maximize):
    n = len(state_ptr) - 1
    x_new = x.copy()
    for s in range(n):
        if not update[s]:
            continue
        c0 = state_ptr[s]
        c1 = state_ptr[s + 1]
        if c0 == c1:
            continue
        best = -np.inf if maximize else np.inf
        for c in range(c0, c1):
            acc = 0.0
            for k in range(choice_ptr[c], choice_ptr[c + 1]):
                acc += probs[k] * x[cols[k]]
            if maximize:
                if acc > best:
                    best = acc
            else:
                if acc < best:
                    best = acc
        x_new[s] = best
    return x_new


def sweep_numba(x, state_ptr, choice_ptr, cols, probs, update, maximize):
    return _sweep_jit(x, state_ptr, choice_ptr, cols, probs, update, bool(maximize))


def backend_name() -> str:
    choice = os.environ.get("CAPTL_BACKEND", "").strip().lower()
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        if not NUMBA_AVAILABLE:
            raise RuntimeError("CAPTL_BACKEND=numba requested but numba is not installed")
        return "numba"
    if choice not in ("", "auto"):
        raise RuntimeError("unknown CAPTL_BACKEND %r (expected 'numba' or 'numpy')" % choice)
    return "numba" if NUMBA_AVAILABLE else "numpy"


def bellman_sweep(x, state_ptr, choice_ptr, cols, probs, update, maximize):
    """Dispatch one sweep to the configured backend."""
    if backend_name() == "numba":
        return sweep_numba(x, state_ptr, choice_ptr, cols, probs, update, maximize)
    return sweep_numpy(x, state_ptr, choice_ptr, cols, probs, update, maximize)
