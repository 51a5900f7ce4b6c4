"""Self-contained FLAC codec subset.

No FLAC decoding library is available in the target environments, so the
decoder is implemented here directly from the stream format: STREAMINFO
parsing, frame headers with UTF-8-coded numbers, constant / verbatim /
fixed / LPC subframes, Rice-coded residuals with escapes, wasted bits, and
stereo decorrelation. CRCs are parsed but not verified.

The encoder emits a deliberately small subset (constant, verbatim, and
fixed order-0/1 subframes; independent channels; 16-bit), enough to build
valid fixtures and round-trip the decoder.
"""

from __future__ import annotations

import numpy as np


class FlacError(ValueError):
    """Malformed or unsupported FLAC stream."""


class _BitReader:
    def __init__(self, data: bytes, byte_pos: int = 0):
        self.data = data
        self.byte_pos = byte_pos
        self.bit_pos = 0  # bits consumed within the current byte

    def eof(self) -> bool:
        return self.byte_pos >= len(self.data)

    def read_uint(self, n: int) -> int:
        value = 0
        while n > 0:
            if self.byte_pos >= len(self.data):
                raise FlacError("unexpected end of stream")
            avail = 8 - self.bit_pos
            take = min(n, avail)
            byte = self.data[self.byte_pos]
            shift = avail - take
            value = (value << take) | ((byte >> shift) & ((1 << take) - 1))
            self.bit_pos += take
            if self.bit_pos == 8:
                self.bit_pos = 0
                self.byte_pos += 1
            n -= take
        return value

    def read_sint(self, n: int) -> int:
        value = self.read_uint(n)
        if value >= (1 << (n - 1)):
            value -= 1 << n
        return value

    def read_unary(self) -> int:
        count = 0
        while self.read_uint(1) == 0:
            count += 1
        return count

    def read_rice(self, param: int) -> int:
        quotient = self.read_unary()
        value = (quotient << param) | (self.read_uint(param) if param else 0)
        return (value >> 1) ^ -(value & 1)

    def align(self) -> None:
        if self.bit_pos:
            self.bit_pos = 0
            self.byte_pos += 1


_BLOCK_SIZE_TABLE = {1: 192, 2: 576, 3: 1152, 4: 2304, 5: 4608,
                     8: 256, 9: 512, 10: 1024, 11: 2048, 12: 4096,
                     13: 8192, 14: 16384, 15: 32768}
_SAMPLE_RATE_TABLE = {1: 88200, 2: 176400, 3: 192000, 4: 8000, 5: 16000,
                      6: 22050, 7: 24000, 8: 32000, 9: 44100, 10: 48000,
                      11: 96000}
_SAMPLE_SIZE_TABLE = {1: 8, 2: 12, 4: 16, 5: 20, 6: 24, 7: 32}


def _read_coded_number(r: _BitReader) -> int:
    first = r.read_uint(8)
    if first < 0x80:
        return first
    ones = 0
    mask = 0x80
    while first & mask:
        ones += 1
        mask >>= 1
    if ones < 2 or ones > 7:
        raise FlacError("invalid UTF-8-coded number in frame header")
    value = first & (0xFF >> (ones + 1))
    for _ in range(ones - 1):
        cont = r.read_uint(8)
        if cont & 0xC0 != 0x80:
            raise FlacError("invalid UTF-8 continuation byte")
        value = (value << 6) | (cont & 0x3F)
    return value


def _decode_residual(r: _BitReader, block_size: int, order: int) -> list[int]:
    method = r.read_uint(2)
    if method > 1:
        raise FlacError(f"reserved residual coding method {method}")
    param_bits = 4 if method == 0 else 5
    escape = (1 << param_bits) - 1
    porder = r.read_uint(4)
    if block_size % (1 << porder):
        raise FlacError("partition order does not divide block size")
    residual: list[int] = []
    for part in range(1 << porder):
        count = (block_size >> porder) - (order if part == 0 else 0)
        param = r.read_uint(param_bits)
        if param == escape:
            raw_bits = r.read_uint(5)
            if raw_bits == 0:
                residual.extend([0] * count)
            else:
                residual.extend(r.read_sint(raw_bits) for _ in range(count))
        else:
            residual.extend(r.read_rice(param) for _ in range(count))
    return residual


_FIXED_COEFS = {0: [], 1: [1], 2: [2, -1], 3: [3, -3, 1], 4: [4, -6, 4, -1]}


def _predict(warmup: list[int], residual: list[int], coefs: list[int],
             shift: int) -> list[int]:
    samples = list(warmup)
    order = len(coefs)
    for res in residual:
        acc = 0
        for j, coef in enumerate(coefs):
            acc += coef * samples[-1 - j]
        samples.append(res + (acc >> shift))
    return samples


def _decode_subframe(r: _BitReader, block_size: int, bps: int) -> list[int]:
    if r.read_uint(1):
        raise FlacError("subframe header padding bit set")
    sf_type = r.read_uint(6)
    wasted = 0
    if r.read_uint(1):
        wasted = r.read_unary() + 1
    bps -= wasted
    if sf_type == 0:
        value = r.read_sint(bps)
        samples = [value] * block_size
    elif sf_type == 1:
        samples = [r.read_sint(bps) for _ in range(block_size)]
    elif 8 <= sf_type <= 12:
        order = sf_type - 8
        warmup = [r.read_sint(bps) for _ in range(order)]
        residual = _decode_residual(r, block_size, order)
        samples = _predict(warmup, residual, _FIXED_COEFS[order], 0)
    elif sf_type >= 32:
        order = (sf_type & 31) + 1
        warmup = [r.read_sint(bps) for _ in range(order)]
        precision = r.read_uint(4) + 1
        if precision == 16:
            raise FlacError("invalid LPC coefficient precision")
        shift = r.read_sint(5)
        if shift < 0:
            raise FlacError("negative LPC shift")
        coefs = [r.read_sint(precision) for _ in range(order)]
        residual = _decode_residual(r, block_size, order)
        samples = _predict(warmup, residual, coefs, shift)
    else:
        raise FlacError(f"reserved subframe type {sf_type}")
    if wasted:
        samples = [s << wasted for s in samples]
    return samples


def decode(data: bytes) -> tuple[np.ndarray, int]:
    """Decode a FLAC stream to (float array shaped (n, channels), rate).

    Samples are scaled to [-1, 1] by the stream's bit depth.
    """
    if data[:4] != b"fLaC":
        raise FlacError("missing fLaC stream marker")
    pos = 4
    info = None
    while True:
        if pos + 4 > len(data):
            raise FlacError("truncated metadata block")
        header = data[pos]
        last = bool(header & 0x80)
        btype = header & 0x7F
        length = int.from_bytes(data[pos + 1:pos + 4], "big")
        body = data[pos + 4:pos + 4 + length]
        pos += 4 + length
        if btype == 0:
            r = _BitReader(body)
            r.read_uint(16)  # min block size
            r.read_uint(16)  # max block size
            r.read_uint(24)  # min frame size
            r.read_uint(24)  # max frame size
            rate = r.read_uint(20)
            channels = r.read_uint(3) + 1
            bps = r.read_uint(5) + 1
            total = r.read_uint(36)
            info = (rate, channels, bps, total)
        if last:
            break
    if info is None:
        raise FlacError("missing STREAMINFO block")
    rate, channels, bps, total = info
    if rate == 0:
        raise FlacError("STREAMINFO declares zero sample rate")

    r = _BitReader(data, pos)
    channel_data: list[list[int]] = [[] for _ in range(channels)]
    decoded = 0
    while not r.eof() and (total == 0 or decoded < total):
        sync = r.read_uint(14)
        if sync != 0b11111111111110:
            raise FlacError("lost frame sync")
        if r.read_uint(1):
            raise FlacError("frame header reserved bit set")
        r.read_uint(1)  # blocking strategy
        bs_code = r.read_uint(4)
        sr_code = r.read_uint(4)
        chan_code = r.read_uint(4)
        ss_code = r.read_uint(3)
        if r.read_uint(1):
            raise FlacError("frame header reserved bit set")
        _read_coded_number(r)
        if bs_code == 0:
            raise FlacError("reserved block size code")
        elif bs_code == 6:
            block_size = r.read_uint(8) + 1
        elif bs_code == 7:
            block_size = r.read_uint(16) + 1
        else:
            block_size = _BLOCK_SIZE_TABLE[bs_code]
        if sr_code == 0:
            pass
        elif sr_code in _SAMPLE_RATE_TABLE:
            if _SAMPLE_RATE_TABLE[sr_code] != rate:
                raise FlacError("frame sample rate contradicts STREAMINFO")
        elif sr_code == 12:
            r.read_uint(8)
        elif sr_code in (13, 14):
            r.read_uint(16)
        else:
            raise FlacError("invalid sample rate code")
        frame_bps = bps if ss_code == 0 else _SAMPLE_SIZE_TABLE.get(ss_code)
        if frame_bps is None:
            raise FlacError(f"reserved sample size code {ss_code}")
        r.read_uint(8)  # header CRC-8 (not verified)

        if chan_code <= 7:
            n_chan = chan_code + 1
            if n_chan != channels:
                raise FlacError("frame channel count contradicts STREAMINFO")
            subframes = [_decode_subframe(r, block_size, frame_bps)
                         for _ in range(n_chan)]
        elif chan_code in (8, 9, 10):
            if channels != 2:
                raise FlacError("stereo decorrelation in non-stereo stream")
            # side channel carries one extra bit
            if chan_code == 8:  # left/side
                left = _decode_subframe(r, block_size, frame_bps)
                side = _decode_subframe(r, block_size, frame_bps + 1)
                right = [l - s for l, s in zip(left, side)]
                subframes = [left, right]
            elif chan_code == 9:  # right/side
                side = _decode_subframe(r, block_size, frame_bps + 1)
                right = _decode_subframe(r, block_size, frame_bps)
                left = [rr + s for rr, s in zip(right, side)]
                subframes = [left, right]
            else:  # mid/side
                mid = _decode_subframe(r, block_size, frame_bps)
                side = _decode_subframe(r, block_size, frame_bps + 1)
                left, right = [], []
                for m, s in zip(mid, side):
                    m = (m << 1) | (s & 1)
                    left.append((m + s) >> 1)
                    right.append((m - s) >> 1)
                subframes = [left, right]
        else:
            raise FlacError(f"reserved channel assignment {chan_code}")

        r.align()
        r.read_uint(16)  # frame CRC-16 (not verified)
        for ch in range(channels):
            channel_data[ch].extend(subframes[ch])
        decoded += block_size

    if total and decoded > total:
        channel_data = [ch[:total] for ch in channel_data]
    scale = float(1 << (bps - 1))
    out = np.array(channel_data, dtype=np.float64).T / scale
    return out, rate


class _BitWriter:
    def __init__(self):
        self.buf = bytearray()
        self.acc = 0
        self.nbits = 0

    def write_uint(self, value: int, n: int) -> None:
        self.acc = (self.acc << n) | (value & ((1 << n) - 1))
        self.nbits += n
        while self.nbits >= 8:
            self.nbits -= 8
            self.buf.append((self.acc >> self.nbits) & 0xFF)
        self.acc &= (1 << self.nbits) - 1

    def write_sint(self, value: int, n: int) -> None:
        self.write_uint(value & ((1 << n) - 1), n)

    def align(self) -> None:
        if self.nbits:
            self.write_uint(0, 8 - self.nbits)

    def bytes(self) -> bytes:
        assert self.nbits == 0
        return bytes(self.buf)


def _crc8(data: bytes) -> int:
    crc = 0
    for byte in data:
        crc ^= byte
        for _ in range(8):
            crc = ((crc << 1) ^ 0x07) & 0xFF if crc & 0x80 else (crc << 1) & 0xFF
    return crc


def _crc16(data: bytes) -> int:
    crc = 0
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x8005) & 0xFFFF if crc & 0x8000 \
                else (crc << 1) & 0xFFFF
    return crc


def _write_coded_number(w: _BitWriter, value: int) -> None:
    if value < 0x80:
        w.write_uint(value, 8)
    elif value < 0x800:
        w.write_uint(0xC0 | (value >> 6), 8)
        w.write_uint(0x80 | (value & 0x3F), 8)
    else:
        raise FlacError("encoder supports frame numbers < 2048")


def encode(samples: np.ndarray, rate: int, block_size: int = 4096,
           use_fixed: bool = False) -> bytes:
    """Encode 16-bit audio to a valid single-stream FLAC file.

    ``samples`` is float in [-1, 1], shaped (n,) or (n, channels).
    Subframes are constant where possible, otherwise fixed order-1
    (when ``use_fixed``) or verbatim. Intended for fixtures and tests.
    """
    if samples.ndim == 1:
        samples = samples[:, None]
    n, channels = samples.shape
    if channels > 2:
        raise FlacError("encoder supports mono or stereo only")
    ints = np.clip(np.round(samples * 32768.0), -32768, 32767).astype(np.int64)

    out = bytearray(b"fLaC")
    info = _BitWriter()
    info.write_uint(block_size, 16)
    info.write_uint(block_size, 16)
    info.write_uint(0, 24)
    info.write_uint(0, 24)
    info.write_uint(rate, 20)
    info.write_uint(channels - 1, 3)
    info.write_uint(15, 5)  # bps - 1
    info.write_uint(n, 36)
    for _ in range(16):
        info.write_uint(0, 8)  # md5 unknown
    body = info.bytes()
    out.append(0x80)  # last metadata block, STREAMINFO
    out += len(body).to_bytes(3, "big")
    out += body

    for frame_idx, start in enumerate(range(0, n, block_size)):
        block = ints[start:start + block_size]
        bs = block.shape[0]
        w = _BitWriter()
        w.write_uint(0b11111111111110, 14)
        w.write_uint(0, 1)
        w.write_uint(0, 1)  # fixed blocking
        w.write_uint(7, 4)  # 16-bit block size follows
        w.write_uint(0, 4)  # rate from STREAMINFO
        w.write_uint(channels - 1, 4)
        w.write_uint(4, 3)  # 16 bps
        w.write_uint(0, 1)
        _write_coded_number(w, frame_idx)
        w.write_uint(bs - 1, 16)
        w.align()
        header = w.buf[:]
        w.write_uint(_crc8(bytes(header)), 8)

        for ch in range(channels):
            x = block[:, ch]
            w.write_uint(0, 1)
            if bs and (x == x[0]).all():
                w.write_uint(0, 6)  # constant
                w.write_uint(0, 1)
                w.write_sint(int(x[0]), 16)
            elif use_fixed and bs > 1:
                w.write_uint(8 + 1, 6)  # fixed, order 1
                w.write_uint(0, 1)
                w.write_sint(int(x[0]), 16)
                residual = np.diff(x)
                w.write_uint(0, 2)  # 4-bit rice
                w.write_uint(0, 4)  # one partition
                mean_abs = max(1, int(np.mean(np.abs(residual))))
                param = min(14, mean_abs.bit_length())
                w.write_uint(param, 4)
                for res in residual:
                    zz = (int(res) << 1) ^ (int(res) >> 63)
                    w.write_uint(1, (zz >> param) + 1)  # unary quotient
                    if param:
                        w.write_uint(zz & ((1 << param) - 1), param)
            else:
                w.write_uint(1, 6)  # verbatim
                w.write_uint(0, 1)
                for v in x:
                    w.write_sint(int(v), 16)
        w.align()
        frame_body = w.buf[:]
        w.write_uint(_crc16(bytes(frame_body)), 16)
        out += w.bytes()
    return bytes(out)
