# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled inner loops for prosody extraction.

Same contract as ``kernels_numpy``; selection happens in ``kernels``.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def frame_autocorr(double[::1] x, Py_ssize_t frame_len, Py_ssize_t hop,
                   Py_ssize_t n_lags):
    """Per-frame demeaned autocorrelation, lags 0..n_lags-1 (biased sums).

    The lag loop is register-tiled four lags at a time so every pass over
    the frame feeds four accumulators, quartering memory traffic.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t n_frames = 0
    if n >= frame_len and frame_len > 0:
        n_frames = 1 + (n - frame_len) // hop
    if n_lags > frame_len:
        n_lags = frame_len
    out_arr = np.zeros((n_frames, n_lags), dtype=np.float64)
    if n_frames == 0:
        return out_arr
    cdef double[:, ::1] out = out_arr
    frame_arr = np.empty(frame_len, dtype=np.float64)
    cdef double[::1] frame = frame_arr
    cdef Py_ssize_t f, i, lag, start, limit
    cdef double mean, acc0, acc1, acc2, acc3, v
    for f in range(n_frames):
        start = f * hop
        mean = 0.0
        for i in range(frame_len):
            mean += x[start + i]
        mean /= frame_len
        for i in range(frame_len):
            frame[i] = x[start + i] - mean
        lag = 0
        while lag + 4 <= n_lags:
            acc0 = acc1 = acc2 = acc3 = 0.0
            limit = frame_len - lag - 3
            for i in range(limit):
                v = frame[i]
                acc0 += v * frame[i + lag]
                acc1 += v * frame[i + lag + 1]
                acc2 += v * frame[i + lag + 2]
                acc3 += v * frame[i + lag + 3]
            # tails the tiled loop left out (j + lag + k >= frame_len - 3)
            for i in range(limit, frame_len - lag):
                v = frame[i]
                acc0 += v * frame[i + lag]
                if i + lag + 1 < frame_len:
                    acc1 += v * frame[i + lag + 1]
                if i + lag + 2 < frame_len:
                    acc2 += v * frame[i + lag + 2]
            out[f, lag] = acc0
            out[f, lag + 1] = acc1
            out[f, lag + 2] = acc2
            out[f, lag + 3] = acc3
            lag += 4
        while lag < n_lags:
            acc0 = 0.0
            for i in range(frame_len - lag):
                acc0 += frame[i] * frame[i + lag]
            out[f, lag] = acc0
            lag += 1
    return out_arr


def block_mean_square(double[::1] x, Py_ssize_t block_len, Py_ssize_t hop):
    """Mean square per overlapping block."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t n_blocks = 0
    if n >= block_len and block_len > 0:
        n_blocks = 1 + (n - block_len) // hop
    out_arr = np.zeros(n_blocks, dtype=np.float64)
    if n_blocks == 0:
        return out_arr
    cdef double[::1] out = out_arr
    cdef Py_ssize_t b, i, start
    cdef double acc
    for b in range(n_blocks):
        start = b * hop
        acc = 0.0
        for i in range(block_len):
            acc += x[start + i] * x[start + i]
        out[b] = acc / block_len
    return out_arr


def frame_rms(double[::1] x, Py_ssize_t frame_len):
    """RMS over adjacent non-overlapping full frames."""
    cdef Py_ssize_t n_frames = x.shape[0] // frame_len if frame_len > 0 else 0
    out_arr = np.zeros(n_frames, dtype=np.float64)
    if n_frames == 0:
        return out_arr
    cdef double[::1] out = out_arr
    cdef Py_ssize_t f, i, start
    cdef double acc
    for f in range(n_frames):
        start = f * frame_len
        acc = 0.0
        for i in range(frame_len):
            acc += x[start + i] * x[start + i]
        out[f] = (acc / frame_len) ** 0.5
    return out_arr
