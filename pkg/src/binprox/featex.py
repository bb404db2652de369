"""Binaural feature extraction: sin/cos IPD, ILD and a magnitude plane.

The short-time transform uses 40 ms Hamming windows (960 samples at 24 kHz)
with 50% overlap, zero-padded to 1024 points; the DC bin is dropped so every
frame carries 512 frequency bins.  Features form a 4-channel plane stack
ordered [sin IPD, cos IPD, ILD, log magnitude] and are consumed by the
network in non-overlapping 128-frame chunks (4 x 128 x 512 tensors), the
final partial chunk zero-padded with a validity mask.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SAMPLE_RATE = 24000
WINDOW_SIZE = 960      # 40 ms
HOP_SIZE = 480         # 50% overlap
FFT_SIZE = 1024
N_BINS = 512           # rfft bins 1..512, DC dropped
N_FEATURES = 4
CHUNK_FRAMES = 128
HOP_SECONDS = HOP_SIZE / SAMPLE_RATE
CHANNEL_ORDER = ("sin_ipd", "cos_ipd", "ild", "log_mag")
ILD_CLIP_DB = 40.0
ILD_EPS = 1e-8


class TooShortError(ValueError):
    """Input shorter than one analysis window."""


def n_frames(n_samples: int) -> int:
    """Frame count of an ``n_samples``-long signal under the fixed hop."""
    if n_samples < WINDOW_SIZE:
        raise TooShortError(f"{n_samples} samples is less than one {WINDOW_SIZE}-sample window")
    return (n_samples - WINDOW_SIZE) // HOP_SIZE + 1


def stft(wave: np.ndarray) -> np.ndarray:
    """Complex spectrogram per channel: (channels, frames, 512).

    Hamming-windowed 960-sample frames, hop 480, zero-padded to a 1024-point
    transform; bin 0 (DC) is dropped.
    """
    wave = np.atleast_2d(np.asarray(wave, dtype=np.float64))
    frames = n_frames(wave.shape[1])
    window = np.hamming(WINDOW_SIZE)
    idx = np.arange(WINDOW_SIZE)[None, :] + HOP_SIZE * np.arange(frames)[:, None]
    segments = wave[:, idx] * window  # (channels, frames, WINDOW_SIZE)
    spec = np.fft.rfft(segments, n=FFT_SIZE, axis=2)
    return spec[:, :, 1:N_BINS + 1]


def ipd_sincos(stft_l: np.ndarray, stft_r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sine and cosine of the interaural phase difference, per cell.

    The difference angle(L) - angle(R) is taken through the complex product
    L * conj(R), so no unwrapping is ever needed and sin^2 + cos^2 == 1 by
    construction (silent cells count as zero phase).
    """
    if stft_l.shape != stft_r.shape:
        raise ValueError("channel spectrograms differ in shape")
    cross = stft_l * np.conj(stft_r)
    mag = np.abs(cross)
    sin = np.zeros_like(mag)
    cos = np.ones_like(mag)
    nz = mag > 0
    sin[nz] = cross.imag[nz] / mag[nz]
    cos[nz] = cross.real[nz] / mag[nz]
    return sin, cos


def ild(stft_l: np.ndarray, stft_r: np.ndarray) -> np.ndarray:
    """Interaural level difference in dB, floored and clipped to +-40 dB."""
    if stft_l.shape != stft_r.shape:
        raise ValueError("channel spectrograms differ in shape")
    ratio = (np.abs(stft_l) + ILD_EPS) / (np.abs(stft_r) + ILD_EPS)
    return np.clip(20.0 * np.log10(ratio), -ILD_CLIP_DB, ILD_CLIP_DB)


def magnitude_plane(stft_l: np.ndarray, stft_r: np.ndarray) -> np.ndarray:
    """log1p of the channel-mean magnitude spectrogram."""
    if stft_l.shape != stft_r.shape:
        raise ValueError("channel spectrograms differ in shape")
    return np.log1p(0.5 * (np.abs(stft_l) + np.abs(stft_r)))


def extract_features(wave: np.ndarray) -> np.ndarray:
    """Stereo waveform -> feature planes (frames, 512, 4).

    Plane order: sin IPD, cos IPD, ILD, log magnitude.
    """
    wave = np.asarray(wave, dtype=np.float64)
    if wave.ndim != 2 or wave.shape[0] != 2:
        raise ValueError(f"expected stereo (2, n) input, got shape {wave.shape}")
    spec = stft(wave)
    sin, cos = ipd_sincos(spec[0], spec[1])
    planes = np.stack([sin, cos, ild(spec[0], spec[1]), magnitude_plane(spec[0], spec[1])], axis=2)
    return planes.astype(np.float32)


@dataclass
class FeatureTensor:
    """One network input chunk: (4, 128, 512) with a tail-padding mask."""

    data: np.ndarray   # (N_FEATURES, CHUNK_FRAMES, N_BINS) float32
    valid: int         # leading frames that carry real data

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(CHUNK_FRAMES, dtype=bool)
        m[: self.valid] = True
        return m


def chunk_sequence(features: np.ndarray) -> list[FeatureTensor]:
    """Split a (frames, 512, 4) feature array into 128-frame input tensors.

    Chunks are non-overlapping; the final partial chunk is zero-padded and
    its ``valid`` count marks the real frames.
    """
    frames = features.shape[0]
    if frames < 1:
        raise ValueError("need at least one frame")
    if features.shape[1:] != (N_BINS, N_FEATURES):
        raise ValueError(f"expected (frames, {N_BINS}, {N_FEATURES}), got {features.shape}")
    out = []
    for lo in range(0, frames, CHUNK_FRAMES):
        piece = features[lo:lo + CHUNK_FRAMES]
        valid = piece.shape[0]
        if valid < CHUNK_FRAMES:
            piece = np.concatenate(
                [piece, np.zeros((CHUNK_FRAMES - valid,) + piece.shape[1:], piece.dtype)]
            )
        out.append(FeatureTensor(np.ascontiguousarray(piece.transpose(2, 0, 1), dtype=np.float32), valid))
    return out


def chunk_label_grid(grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Chunk a (frames, C) label grid exactly like :func:`chunk_sequence`.

    Returns (chunks (n, 128, C) uint8, valid counts (n,)); frame n of chunk k
    aligns with the same frame of the feature chunk.
    """
    frames, n_classes = grid.shape
    n_chunks = max(1, -(-frames // CHUNK_FRAMES))
    chunks = np.zeros((n_chunks, CHUNK_FRAMES, n_classes), dtype=np.uint8)
    valid = np.zeros(n_chunks, dtype=np.int64)
    for k in range(n_chunks):
        lo = k * CHUNK_FRAMES
        piece = grid[lo:lo + CHUNK_FRAMES]
        chunks[k, : piece.shape[0]] = piece
        valid[k] = piece.shape[0]
    return chunks, valid


@dataclass
class FeatureStats:
    """Global per-plane standardization statistics (from training folds)."""

    mean: np.ndarray  # (N_FEATURES,)
    std: np.ndarray   # (N_FEATURES,)

    @classmethod
    def compute(cls, chunk_arrays, valid_counts) -> "FeatureStats":
        """Single pass over (n, 4, 128, 512) chunk arrays, padded frames excluded."""
        total = np.zeros(N_FEATURES)
        total_sq = np.zeros(N_FEATURES)
        count = 0
        for chunks, valid in zip(chunk_arrays, valid_counts):
            for chunk, v in zip(chunks, valid):
                live = chunk[:, :v, :].astype(np.float64)
                total += live.sum(axis=(1, 2))
                total_sq += (live**2).sum(axis=(1, 2))
                count += int(v) * N_BINS
        if count == 0:
            raise ValueError("no valid frames to compute statistics from")
        mean = total / count
        var = np.maximum(total_sq / count - mean**2, 1e-12)
        return cls(mean, np.sqrt(var))

    def apply(self, chunks: np.ndarray) -> np.ndarray:
        """Standardize (..., 4, 128, 512) feature chunks, returning float32."""
        shape = (1,) * (chunks.ndim - 3) + (N_FEATURES, 1, 1)
        mean = self.mean.reshape(shape).astype(np.float32)
        std = self.std.reshape(shape).astype(np.float32)
        return (chunks.astype(np.float32) - mean) / std


# ---------------------------------------------------------------------------
# Feature/label chunk container: "BFCF" header + little-endian float32 planes.
#
#   magic    4s   b"BFCF"
#   version  u32  1
#   fields   u32 x 6: sample_rate, n_chunks, chunk_frames, n_bins, n_features,
#                     n_classes (0 when no label grid is stored)
#   applied  u8   1 if the stored features are already standardized
#   order    16s x n_features   feature plane names, ASCII, NUL padded
#   scheme   32s  label scheme id, ASCII, NUL padded (empty if unlabeled)
#   stats    f32 x (2 * n_features)   per-plane mean then std
#   valid    u32 x n_chunks           valid frame count per chunk
#   features f32 x (n_chunks * n_features * chunk_frames * n_bins), C order
#   labels   u8  x (n_chunks * chunk_frames * n_classes), only if n_classes > 0
# ---------------------------------------------------------------------------

_MAGIC = b"BFCF"
_HEADER = struct.Struct("<4sIIIIIIIB")


@dataclass
class FeatureFile:
    """In-memory image of one recording's chunk container."""

    features: np.ndarray          # (n_chunks, 4, 128, 512) float32
    valid: np.ndarray             # (n_chunks,) int
    labels: np.ndarray | None     # (n_chunks, 128, C) uint8 or None
    scheme_id: str
    stats: FeatureStats
    stats_applied: bool
    sample_rate: int = SAMPLE_RATE

    @property
    def n_chunks(self) -> int:
        return self.features.shape[0]

    @property
    def total_frames(self) -> int:
        return int(self.valid.sum())


def feature_file_from_chunks(tensors: list[FeatureTensor], labels: np.ndarray | None = None,
                             scheme_id: str = "") -> FeatureFile:
    """Bundle chunk tensors (plus an optional aligned label grid) for storage."""
    feats = np.stack([t.data for t in tensors])
    valid = np.array([t.valid for t in tensors], dtype=np.int64)
    flat_mean = np.zeros(N_FEATURES)
    flat_std = np.ones(N_FEATURES)
    live = np.concatenate([t.data[:, :t.valid, :].reshape(N_FEATURES, -1) for t in tensors], axis=1)
    if live.size:
        flat_mean = live.mean(axis=1)
        flat_std = live.std(axis=1)
    stats = FeatureStats(flat_mean.astype(np.float64), flat_std.astype(np.float64))
    return FeatureFile(feats, valid, labels, scheme_id, stats, stats_applied=False)


def write_feature_file(path: str | Path, ff: FeatureFile) -> None:
    n_classes = 0 if ff.labels is None else ff.labels.shape[2]
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, 1, ff.sample_rate, ff.n_chunks, CHUNK_FRAMES,
                              N_BINS, N_FEATURES, n_classes, int(ff.stats_applied)))
        for name in CHANNEL_ORDER:
            fh.write(name.encode("ascii").ljust(16, b"\0"))
        fh.write(ff.scheme_id.encode("ascii").ljust(32, b"\0"))
        fh.write(ff.stats.mean.astype("<f4").tobytes())
        fh.write(ff.stats.std.astype("<f4").tobytes())
        fh.write(ff.valid.astype("<u4").tobytes())
        fh.write(ff.features.astype("<f4").tobytes())
        if ff.labels is not None:
            fh.write(ff.labels.astype(np.uint8).tobytes())


def read_feature_file(path: str | Path) -> FeatureFile:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, version, sr, n_chunks, chunk_frames, n_bins, n_feat, n_classes, applied = \
            _HEADER.unpack(head)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a feature container (bad magic {magic!r})")
        if version != 1:
            raise ValueError(f"{path}: unsupported container version {version}")
        if (chunk_frames, n_bins, n_feat) != (CHUNK_FRAMES, N_BINS, N_FEATURES):
            raise ValueError(f"{path}: geometry {chunk_frames}x{n_bins}x{n_feat} unsupported")
        names = tuple(fh.read(16).rstrip(b"\0").decode("ascii") for _ in range(n_feat))
        if names != CHANNEL_ORDER:
            raise ValueError(f"{path}: unexpected plane order {names}")
        scheme = fh.read(32).rstrip(b"\0").decode("ascii")
        mean = np.frombuffer(fh.read(4 * n_feat), dtype="<f4").astype(np.float64)
        std = np.frombuffer(fh.read(4 * n_feat), dtype="<f4").astype(np.float64)
        valid = np.frombuffer(fh.read(4 * n_chunks), dtype="<u4").astype(np.int64)
        n_vals = n_chunks * n_feat * chunk_frames * n_bins
        feats = np.frombuffer(fh.read(4 * n_vals), dtype="<f4")
        if feats.size != n_vals:
            raise ValueError(f"{path}: truncated feature payload")
        feats = feats.reshape(n_chunks, n_feat, chunk_frames, n_bins).copy()
        labels = None
        if n_classes:
            raw = np.frombuffer(fh.read(n_chunks * chunk_frames * n_classes), dtype=np.uint8)
            if raw.size != n_chunks * chunk_frames * n_classes:
                raise ValueError(f"{path}: truncated label payload")
            labels = raw.reshape(n_chunks, chunk_frames, n_classes).copy()
    return FeatureFile(feats, valid, labels, scheme, FeatureStats(mean, std),
                       bool(applied), sr)
