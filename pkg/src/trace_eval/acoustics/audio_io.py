"""Audio loading: WAV (PCM 16/24-bit and float32) and FLAC containers.

Anything else is rejected up front by magic-byte sniffing. Stereo input is
downmixed to mono by channel averaging at load time.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from . import flac


class UnsupportedFormatError(ValueError):
    """The file is not a WAV or FLAC container."""


class AudioReadError(ValueError):
    """The container is recognized but cannot be decoded."""


@dataclass
class AudioClip:
    """Mono audio in [-1, 1] plus its sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("AudioClip holds mono samples; downmix first")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def _downmix(data: np.ndarray) -> np.ndarray:
    if data.ndim == 1:
        return data.astype(np.float64)
    return data.astype(np.float64).mean(axis=1)


_PCM_SCALE = {np.dtype(np.int16): 32768.0, np.dtype(np.int32): 2147483648.0}


def load_audio(path: str | Path) -> AudioClip:
    """Load a WAV or FLAC file as a mono clip.

    Raises UnsupportedFormatError for other containers and AudioReadError
    for corrupt files.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == b"RIFF":
        try:
            rate, data = wavfile.read(path)
        except Exception as exc:
            raise AudioReadError(f"cannot decode WAV {path}: {exc}") from exc
        data = np.asarray(data)
        if data.dtype in _PCM_SCALE:
            samples = _downmix(data) / _PCM_SCALE[data.dtype]
        elif data.dtype == np.uint8:
            samples = (_downmix(data) - 128.0) / 128.0
        else:  # float32/float64 WAV is already normalized
            samples = _downmix(data)
        return AudioClip(samples=samples, sample_rate=int(rate))
    if magic == b"fLaC":
        try:
            data, rate = flac.decode(path.read_bytes())
        except flac.FlacError as exc:
            raise AudioReadError(f"cannot decode FLAC {path}: {exc}") from exc
        return AudioClip(samples=_downmix(data), sample_rate=rate)
    raise UnsupportedFormatError(
        f"{path}: unsupported container (magic {magic!r}); "
        "expected WAV (RIFF) or FLAC")


def save_wav(path: str | Path, clip: AudioClip) -> None:
    """Write a clip as 16-bit PCM WAV (fixture/test helper)."""
    pcm = np.clip(np.round(clip.samples * 32767.0), -32768, 32767)
    wavfile.write(Path(path), clip.sample_rate, pcm.astype(np.int16))
