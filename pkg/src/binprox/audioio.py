"""Stereo/mono WAV reading and writing plus resampling helpers.

All pipeline audio is float in [-1, 1] at 24 kHz internally and stored as
16-bit PCM WAV on disk.
"""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

SAMPLE_RATE = 24000
PCM_FULL_SCALE = 32767.0


def write_wav(path: str | Path, audio: np.ndarray, sample_rate: int = SAMPLE_RATE) -> None:
    """Write float audio (channels, samples) or (samples,) as 16-bit PCM."""
    audio = np.asarray(audio, dtype=np.float64)
    if audio.ndim == 1:
        data = audio[:, None]
    elif audio.ndim == 2:
        data = audio.T  # wavfile expects (samples, channels)
    else:
        raise ValueError(f"audio must be 1-D or 2-D, got shape {audio.shape}")
    pcm = np.clip(np.round(data * PCM_FULL_SCALE), -32768, 32767).astype(np.int16)
    wavfile.write(str(path), sample_rate, pcm)


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Read a WAV file to float (channels, samples) in [-1, 1]."""
    sample_rate, data = wavfile.read(str(path))
    if data.ndim == 1:
        data = data[:, None]
    if data.dtype == np.int16:
        audio = data.astype(np.float64) / PCM_FULL_SCALE
    elif data.dtype == np.int32:
        audio = data.astype(np.float64) / 2147483647.0
    elif data.dtype == np.uint8:
        audio = (data.astype(np.float64) - 128.0) / 127.0
    else:  # float wav
        audio = data.astype(np.float64)
    return audio.T, sample_rate


def resample(audio: np.ndarray, sr_in: int, sr_out: int) -> np.ndarray:
    """Polyphase-resample 1-D audio between integer sample rates."""
    if sr_in == sr_out:
        return np.asarray(audio, dtype=np.float64)
    ratio = Fraction(sr_out, sr_in)
    return resample_poly(np.asarray(audio, dtype=np.float64), ratio.numerator, ratio.denominator)


def to_mono(audio: np.ndarray) -> np.ndarray:
    """Average a (channels, samples) array down to one channel."""
    audio = np.asarray(audio, dtype=np.float64)
    if audio.ndim == 1:
        return audio
    return audio.mean(axis=0)


def peak_normalize(audio: np.ndarray, peak: float = 0.99) -> np.ndarray:
    """Scale so the absolute maximum equals ``peak`` (no-op on silence)."""
    m = np.max(np.abs(audio))
    if m == 0:
        return np.asarray(audio, dtype=np.float64)
    return np.asarray(audio, dtype=np.float64) * (peak / m)
