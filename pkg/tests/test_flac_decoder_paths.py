"""Hand-built bitstreams exercising decoder paths the test encoder never
emits: LPC subframes, partitioned Rice with escapes, mid/side stereo, and
wasted bits."""

import numpy as np
import pytest

from trace_eval.acoustics import flac
from trace_eval.acoustics.flac import FlacError, _BitWriter


def streaminfo(rate, channels, bps, total, block_size):
    w = _BitWriter()
    w.write_uint(block_size, 16)
    w.write_uint(block_size, 16)
    w.write_uint(0, 24)
    w.write_uint(0, 24)
    w.write_uint(rate, 20)
    w.write_uint(channels - 1, 3)
    w.write_uint(bps - 1, 5)
    w.write_uint(total, 36)
    for _ in range(16):
        w.write_uint(0, 8)
    body = w.bytes()
    return b"fLaC" + bytes([0x80]) + len(body).to_bytes(3, "big") + body


def frame_header(w, block_size, chan_code, ss_code):
    w.write_uint(0b11111111111110, 14)
    w.write_uint(0, 1)
    w.write_uint(0, 1)
    w.write_uint(7, 4)       # 16-bit block size follows
    w.write_uint(0, 4)       # rate from STREAMINFO
    w.write_uint(chan_code, 4)
    w.write_uint(ss_code, 3)
    w.write_uint(0, 1)
    w.write_uint(0, 8)       # frame number 0 (UTF-8 single byte)
    w.write_uint(block_size - 1, 16)
    w.align()
    w.write_uint(0, 8)       # CRC-8 placeholder (decoder does not verify)


def write_rice(w, value, param):
    zz = (value << 1) ^ (value >> 63)
    w.write_uint(1, (zz >> param) + 1)
    if param:
        w.write_uint(zz & ((1 << param) - 1), param)


def test_lpc_subframe_with_partitioned_rice_and_escape():
    # ramp of 16 samples; LPC order 1, coef 1, shift 0 predicts x[i-1],
    # so every residual is 1
    samples = list(range(100, 116))
    data = bytearray(streaminfo(8000, 1, 16, 16, 16))
    w = _BitWriter()
    frame_header(w, 16, chan_code=0, ss_code=4)
    w.write_uint(0, 1)        # subframe pad
    w.write_uint(32, 6)       # LPC, order 1
    w.write_uint(0, 1)        # no wasted bits
    w.write_sint(samples[0], 16)
    w.write_uint(11, 4)       # coefficient precision 12
    w.write_sint(0, 5)        # shift
    w.write_sint(1, 12)       # coef
    # residual: 4-bit rice, partition order 2 -> 4 partitions (3,4,4,4)
    w.write_uint(0, 2)
    w.write_uint(2, 4)
    for part, count in enumerate((3, 4, 4)):
        w.write_uint(1, 4)    # rice parameter 1
        for _ in range(count):
            write_rice(w, 1, 1)
    w.write_uint(15, 4)       # escape code
    w.write_uint(5, 5)        # raw 5-bit residuals
    for _ in range(4):
        w.write_sint(1, 5)
    w.align()
    w.write_uint(0, 16)       # CRC-16 placeholder
    data += w.bytes()
    decoded, rate = flac.decode(bytes(data))
    assert rate == 8000
    np.testing.assert_allclose(decoded[:, 0] * 32768.0, samples)


def test_mid_side_stereo_decorrelation():
    # L = 1000, R = 400 -> mid = 700, side = 600
    data = bytearray(streaminfo(16000, 2, 16, 8, 8))
    w = _BitWriter()
    frame_header(w, 8, chan_code=10, ss_code=4)
    w.write_uint(0, 1)
    w.write_uint(0, 6)        # constant mid
    w.write_uint(0, 1)
    w.write_sint(700, 16)
    w.write_uint(0, 1)
    w.write_uint(0, 6)        # constant side (17 bits: +1 for side channel)
    w.write_uint(0, 1)
    w.write_sint(600, 17)
    w.align()
    w.write_uint(0, 16)
    data += w.bytes()
    decoded, _ = flac.decode(bytes(data))
    left = decoded[:, 0] * 32768.0
    right = decoded[:, 1] * 32768.0
    np.testing.assert_allclose(left, [1000] * 8)
    np.testing.assert_allclose(right, [400] * 8)


def test_wasted_bits_shift_restored():
    data = bytearray(streaminfo(8000, 1, 16, 4, 4))
    w = _BitWriter()
    frame_header(w, 4, chan_code=0, ss_code=4)
    w.write_uint(0, 1)
    w.write_uint(0, 6)        # constant
    w.write_uint(1, 1)        # wasted-bits flag
    w.write_uint(0b01, 2)     # unary 1 -> wasted = 2
    w.write_sint(50, 14)      # value at bps - wasted
    w.align()
    w.write_uint(0, 16)
    data += w.bytes()
    decoded, _ = flac.decode(bytes(data))
    np.testing.assert_allclose(decoded[:, 0] * 32768.0, [200] * 4)


def test_escape_with_zero_raw_bits_means_silence_residual():
    # fixed order 0 with an all-escape zero-bit partition decodes to zeros
    data = bytearray(streaminfo(8000, 1, 16, 8, 8))
    w = _BitWriter()
    frame_header(w, 8, chan_code=0, ss_code=4)
    w.write_uint(0, 1)
    w.write_uint(8, 6)        # fixed, order 0
    w.write_uint(0, 1)
    w.write_uint(0, 2)        # 4-bit rice
    w.write_uint(0, 4)        # one partition
    w.write_uint(15, 4)       # escape
    w.write_uint(0, 5)        # zero raw bits
    w.align()
    w.write_uint(0, 16)
    data += w.bytes()
    decoded, _ = flac.decode(bytes(data))
    np.testing.assert_allclose(decoded[:, 0], np.zeros(8))


def test_reserved_subframe_type_rejected():
    data = bytearray(streaminfo(8000, 1, 16, 4, 4))
    w = _BitWriter()
    frame_header(w, 4, chan_code=0, ss_code=4)
    w.write_uint(0, 1)
    w.write_uint(2, 6)        # reserved type
    w.write_uint(0, 1)
    w.align()
    w.write_uint(0, 16)
    data += w.bytes()
    with pytest.raises(FlacError, match="reserved subframe"):
        flac.decode(bytes(data))


def test_lost_sync_rejected():
    data = bytearray(streaminfo(8000, 1, 16, 4, 4))
    data += b"\x00\x00\x00\x00"
    with pytest.raises(FlacError, match="sync"):
        flac.decode(bytes(data))
