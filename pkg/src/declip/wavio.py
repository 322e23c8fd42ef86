"""WAV reading and writing (16-bit PCM and 32-bit IEEE float).

Samples are held as float64 arrays of shape ``(channels, frames)`` in
full-scale units. PCM is scaled by 1/32768 on read, which makes a
read/write round trip bit-exact.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from scipy.io import wavfile

__all__ = ["WavError", "WavAudio", "read_wav", "write_wav", "file_digest", "PCM16_STEP"]

log = logging.getLogger(__name__)

PCM16_STEP = 1.0 / 32768.0
BIT_DEPTHS = ("pcm16", "float32")


class WavError(OSError):
    """Unreadable or unsupported WAV data."""


@dataclass
class WavAudio:
    sample_rate: int
    samples: np.ndarray
    bit_depth: str = "pcm16"

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[None, :]
        if s.ndim != 2:
            raise ValueError("samples must be (channels, frames)")
        if int(self.sample_rate) <= 0:
            raise ValueError("sample_rate must be positive")
        if self.bit_depth not in BIT_DEPTHS:
            raise ValueError(f"bit_depth must be one of {BIT_DEPTHS}")
        self.samples = s
        self.sample_rate = int(self.sample_rate)

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_frames(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.n_frames / self.sample_rate


def read_wav(path: Union[str, Path]) -> WavAudio:
    try:
        rate, data = wavfile.read(str(path))
    except FileNotFoundError:
        raise
    except (ValueError, EOFError) as exc:
        raise WavError(f"{path}: cannot parse WAV ({exc})") from exc
    if data.dtype == np.int16:
        depth = "pcm16"
        samples = data.astype(np.float64) * PCM16_STEP
    elif data.dtype == np.float32:
        depth = "float32"
        samples = data.astype(np.float64)
    else:
        raise WavError(f"{path}: unsupported sample format {data.dtype}; need 16-bit PCM or float32")
    samples = samples.T if samples.ndim == 2 else samples[None, :]
    return WavAudio(rate, np.ascontiguousarray(samples), depth)


def to_pcm16(samples: np.ndarray) -> np.ndarray:
    q = np.round(np.asarray(samples, dtype=float) * 32768.0)
    over = int(np.count_nonzero((q > 32767) | (q < -32768)))
    if over:
        log.warning("%d samples exceed 16-bit full scale and were saturated", over)
    return np.clip(q, -32768, 32767).astype(np.int16)


def write_wav(path: Union[str, Path], audio: WavAudio) -> None:
    if audio.bit_depth == "pcm16":
        data = to_pcm16(audio.samples)
    else:
        data = audio.samples.astype(np.float32)
    data = data[0] if audio.channels == 1 else np.ascontiguousarray(data.T)
    wavfile.write(str(path), audio.sample_rate, data)


def file_digest(path: Union[str, Path]) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return "sha256:" + h.hexdigest()
