"""Kernel backend selection: compiled extension if built, NumPy otherwise.

Set ``TRACE_EVAL_FORCE_NUMPY_KERNELS=1`` to force the fallback (used by the
benchmark and the cross-implementation tests).
"""

from __future__ import annotations

import os

import numpy as np

from . import kernels_numpy

if os.environ.get("TRACE_EVAL_FORCE_NUMPY_KERNELS") == "1":
    _impl = kernels_numpy
    BACKEND = "numpy"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        _impl = kernels_numpy
        BACKEND = "numpy"


def frame_autocorr(x, frame_len: int, hop: int, n_lags: int) -> np.ndarray:
    return _impl.frame_autocorr(
        np.ascontiguousarray(x, dtype=np.float64), frame_len, hop, n_lags)


def block_mean_square(x, block_len: int, hop: int) -> np.ndarray:
    return _impl.block_mean_square(
        np.ascontiguousarray(x, dtype=np.float64), block_len, hop)


def frame_rms(x, frame_len: int) -> np.ndarray:
    return _impl.frame_rms(
        np.ascontiguousarray(x, dtype=np.float64), frame_len)
