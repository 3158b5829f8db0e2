"""Kernel backend selection.

Set GOALIMPACT_BACKEND to "numba" (require the JIT path), "numpy" (force
the pure-numpy fallback) or "auto" (default: numba when importable).
`benchmarks/bench_kernels.py` compares the two.
"""

import os

from . import _core

BACKEND = "numpy"
_requested = os.environ.get("GOALIMPACT_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"GOALIMPACT_BACKEND={_requested!r}; expected auto, numba or numpy"
    )

if _requested in ("auto", "numba"):
    try:
        from numba import njit

        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise

if BACKEND == "numba":
    _jit = njit(cache=True, fastmath=False)
    active_counts = _jit(_core.active_counts)
    lstm_forward_cached = _jit(_core.lstm_forward_cached)
    lstm_forward_probs = _jit(_core.lstm_forward_probs)
    lstm_backward = _jit(_core.lstm_backward)
else:
    active_counts = _core.active_counts
    lstm_forward_cached = _core.lstm_forward_cached
    lstm_forward_probs = _core.lstm_forward_probs
    lstm_backward = _core.lstm_backward

__all__ = [
    "BACKEND",
    "active_counts",
    "lstm_forward_cached",
    "lstm_forward_probs",
    "lstm_backward",
]
