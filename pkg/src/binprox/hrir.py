"""Head-related impulse response databases with near-field distance rings.

A database holds one impulse-response pair per (distance ring, grid
direction).  Rings run from 0.2 m to the 1.5 m far-field ring in 0.1 m steps.
Impulses are distance-normalized: spherical spreading (1/r) is applied by the
renderer, so a ring only encodes interaural time and level structure.

The built-in synthetic provider uses a rigid-sphere head model: interaural
delays from Woodworth's arc formula, a frequency-independent contralateral
shadowing gain, and per-ear distance ratios that grow the level difference at
near rings.  Impulse pairs are scaled windowed-sinc kernels (pure delay plus
gain), i.e. minimal phase up to the interaural delay.

Head coordinate convention: x forward, y towards the left ear, z up; azimuth
is positive to the left, elevation positive up.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .labelspace import SphericalDirection

SPEED_OF_SOUND = 343.0  # m/s
HEAD_RADIUS = 0.0875    # m
FAR_FIELD_DISTANCE = 1.5
RING_DISTANCES = tuple(round(0.2 + 0.1 * i, 1) for i in range(14))  # 0.2 .. 1.5
SHADOW_DEPTH_DB = 8.0   # level drop of a fully contralateral ear, far field


class MissingHrirError(KeyError):
    """The database lacks a ring or direction required by the renderer."""


def direction_to_unit(direction: SphericalDirection) -> np.ndarray:
    """Unit vector (x fwd, y left, z up) of a head-relative direction."""
    az = np.radians(direction.azimuth)
    el = np.radians(direction.elevation)
    return np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])


def unit_to_direction(v: np.ndarray) -> SphericalDirection:
    """Inverse of :func:`direction_to_unit` (input need not be normalized)."""
    x, y, z = v
    az = np.degrees(np.arctan2(y, x))
    el = np.degrees(np.arctan2(z, np.hypot(x, y)))
    return SphericalDirection(float(az), float(np.clip(el, -90.0, 90.0)))


def fractional_delay_taps(delay: float, n_taps: int = 8) -> tuple[int, np.ndarray]:
    """Windowed-sinc interpolation kernel realizing a fractional delay.

    Returns (first_index, taps): adding ``taps[k]`` at sample
    ``first_index + k`` realizes a unit impulse delayed by ``delay`` samples.
    Exact (a single 1.0 tap) for integer delays.
    """
    half = n_taps // 2
    n0 = int(np.floor(delay))
    frac = delay - n0
    k = np.arange(n_taps)
    t = k - (half - 1) - frac
    window = 0.5 * (1.0 + np.cos(np.pi * t / half))
    taps = np.sinc(t) * np.clip(window, 0.0, None)
    return n0 - (half - 1), taps


def woodworth_itd(lateral_angle_rad: float, head_radius: float = HEAD_RADIUS) -> float:
    """Interaural time difference of a rigid sphere, in seconds."""
    g = abs(lateral_angle_rad)
    return head_radius / SPEED_OF_SOUND * (g + np.sin(g))


@dataclass
class Hrir:
    """One impulse-response pair."""

    left: np.ndarray
    right: np.ndarray
    direction: SphericalDirection
    distance: float
    sample_rate: int

    def __post_init__(self):
        if self.left.shape != self.right.shape:
            raise ValueError("left/right impulse responses differ in length")

    @property
    def pair(self) -> np.ndarray:
        return np.stack([self.left, self.right])


class HrirDatabase:
    """Impulse pairs indexed by (distance ring, direction grid).

    ``impulses`` has shape (n_rings, n_dirs, 2, ir_length); every ring shares
    the same direction grid and the far-field 1.5 m ring must be present.
    """

    def __init__(self, ring_distances, directions, impulses, sample_rate):
        self.ring_distances = np.asarray(ring_distances, dtype=np.float64)
        self.directions = np.asarray(directions, dtype=np.float64)  # (n, 2) az, el deg
        self.impulses = np.asarray(impulses, dtype=np.float64)
        self.sample_rate = int(sample_rate)
        if self.impulses.shape[:3] != (len(self.ring_distances), len(self.directions), 2):
            raise ValueError(f"impulse array shape {self.impulses.shape} inconsistent with index")
        if not np.all(np.diff(self.ring_distances) > 0):
            raise ValueError("ring distances must be strictly increasing")
        if not np.any(np.isclose(self.ring_distances, FAR_FIELD_DISTANCE)):
            raise MissingHrirError(f"database lacks the {FAR_FIELD_DISTANCE} m far-field ring")
        az = np.radians(self.directions[:, 0])
        el = np.radians(self.directions[:, 1])
        self._units = np.stack(
            [np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=1
        )
        self._far_ring = int(np.argmin(np.abs(self.ring_distances - FAR_FIELD_DISTANCE)))

    @property
    def n_rings(self) -> int:
        return len(self.ring_distances)

    @property
    def n_directions(self) -> int:
        return len(self.directions)

    @property
    def ir_length(self) -> int:
        return self.impulses.shape[3]

    @property
    def far_field_ring(self) -> int:
        return self._far_ring

    def nearest_ring(self, distance: float) -> int:
        """Index of the ring nearest to ``distance`` (clamped to the range)."""
        return int(np.argmin(np.abs(self.ring_distances - distance)))

    def nearest_direction(self, direction: SphericalDirection) -> int:
        """Grid index minimizing great-circle distance to ``direction``."""
        u = direction_to_unit(direction)
        return int(np.argmax(self._units @ u))

    def lookup(self, direction: SphericalDirection, distance: float,
               far_field: bool = False) -> Hrir:
        """Nearest-neighbor impulse pair for a source at (direction, distance).

        ``far_field=True`` forces the 1.5 m ring regardless of distance, as
        used for reflected paths.
        """
        ring = self._far_ring if (far_field or distance >= FAR_FIELD_DISTANCE) \
            else self.nearest_ring(distance)
        d = self.nearest_direction(direction)
        ir = self.impulses[ring, d]
        grid_az, grid_el = self.directions[d]
        return Hrir(ir[0], ir[1], SphericalDirection(grid_az, grid_el),
                    float(self.ring_distances[ring]), self.sample_rate)


def _ear_gains_and_delays(direction: SphericalDirection, distance: float):
    """Per-ear (gain, delay_seconds) of the rigid-sphere model."""
    u = direction_to_unit(direction)
    sin_lat = float(np.clip(u[1], -1.0, 1.0))  # towards left ear
    gamma = np.arcsin(abs(sin_lat))
    ipsi_delay = -HEAD_RADIUS / SPEED_OF_SOUND * np.sin(gamma)
    contra_delay = HEAD_RADIUS / SPEED_OF_SOUND * gamma
    if sin_lat >= 0:
        delay_l, delay_r = ipsi_delay, contra_delay
    else:
        delay_l, delay_r = contra_delay, ipsi_delay

    src = u * distance
    ear_l = np.array([0.0, HEAD_RADIUS, 0.0])
    r_l = float(np.linalg.norm(src - ear_l))
    r_r = float(np.linalg.norm(src + ear_l))
    shadow_l = 10.0 ** (-SHADOW_DEPTH_DB * (1.0 - sin_lat) / 2.0 / 20.0)
    shadow_r = 10.0 ** (-SHADOW_DEPTH_DB * (1.0 + sin_lat) / 2.0 / 20.0)
    gain_l = distance / r_l * shadow_l
    gain_r = distance / r_r * shadow_r
    return (gain_l, delay_l), (gain_r, delay_r)


def synthetic_hrir_provider(az_step: float = 10.0, el_step: float = 10.0,
                            ir_length: int = 64, sample_rate: int = 24000) -> HrirDatabase:
    """Build the full-ring spherical-head database on a regular direction grid."""
    azimuths = np.arange(-180.0 + az_step, 180.0 + az_step / 2, az_step)
    elevations = np.arange(-90.0, 90.0 + el_step / 2, el_step)
    directions = np.array([(az, el) for el in elevations for az in azimuths])
    base = 12  # common onset offset, leaves room for negative interaural lead
    impulses = np.zeros((len(RING_DISTANCES), len(directions), 2, ir_length))
    for d, (az, el) in enumerate(directions):
        direction = SphericalDirection(az, el)
        for ring, dist in enumerate(RING_DISTANCES):
            for ch, (gain, delay) in enumerate(_ear_gains_and_delays(direction, dist)):
                start, taps = fractional_delay_taps(base + delay * sample_rate)
                impulses[ring, d, ch, start:start + len(taps)] = gain * taps
    return HrirDatabase(RING_DISTANCES, directions, impulses, sample_rate)


# ---------------------------------------------------------------------------
# On-disk container: "BHDB" header + raw little-endian float32 impulse pairs.
#
#   magic    4s   b"BHDB"
#   version  u32  1
#   fields   u32 x 4: sample_rate, n_rings, n_dirs, ir_length
#   rings    f32 x n_rings           ring distances, meters, ascending
#   grid     f32 x (n_dirs * 2)      azimuth, elevation pairs, degrees
#   payload  f32 x (n_rings * n_dirs * 2 * ir_length), C order,
#            channel axis ordered left, right
# ---------------------------------------------------------------------------

_MAGIC = b"BHDB"
_HEADER = struct.Struct("<4sIIIII")


def save_hrir_database(db: HrirDatabase, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, 1, db.sample_rate, db.n_rings,
                              db.n_directions, db.ir_length))
        fh.write(db.ring_distances.astype("<f4").tobytes())
        fh.write(db.directions.astype("<f4").tobytes())
        fh.write(db.impulses.astype("<f4").tobytes())


def load_hrir_database(path: str | Path) -> HrirDatabase:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, version, sample_rate, n_rings, n_dirs, ir_len = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not an HRIR database (bad magic {magic!r})")
        if version != 1:
            raise ValueError(f"{path}: unsupported container version {version}")
        rings = np.frombuffer(fh.read(4 * n_rings), dtype="<f4").astype(np.float64)
        grid = np.frombuffer(fh.read(8 * n_dirs), dtype="<f4").reshape(n_dirs, 2)
        payload = np.frombuffer(fh.read(4 * n_rings * n_dirs * 2 * ir_len), dtype="<f4")
        if payload.size != n_rings * n_dirs * 2 * ir_len:
            raise ValueError(f"{path}: truncated payload")
        impulses = payload.reshape(n_rings, n_dirs, 2, ir_len)
    return HrirDatabase(np.round(rings, 6), grid, impulses, sample_rate)
