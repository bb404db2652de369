"""Coarse direction and proximity label schemes for binaural classification.

The sphere around the listener is carved into direction classes in two ways:

* ``unequal`` -- six disjoint cones (front, back, left, right, top, bottom),
  with the top/bottom cones taking precedence for |elevation| >= 35 degrees.
* ``equal`` -- three independent hemisphere pairs (left/right, front/back,
  top/bottom), one binary label per plane, combinable into eight octants.

Source distance maps onto a binary near/far proximity split with an excluded
buffer zone between the two bands.

Boundary convention: all interval lower bounds are inclusive and upper bounds
exclusive, except elevation +90 which belongs to the top band.  Azimuth is in
degrees in (-180, 180] with positive azimuth towards the left ear; elevation
is in degrees in [-90, 90] with positive up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np

NEAR_RANGE = (0.4, 2.0)
FAR_RANGE = (3.0, 8.0)
POLAR_BAND_DEG = 35.0  # |elevation| at or above this -> top/bottom cone (unequal scheme)


class LabelError(ValueError):
    """Invalid label-space input."""


class BufferZoneError(LabelError):
    """Distance falls in the excluded band between near and far."""


class OutOfRangeError(LabelError):
    """Distance outside every legal proximity band."""


class UnknownMethodError(LabelError):
    """Method name not present in the scheme registry."""


class DivisionScheme(Enum):
    UNEQUAL = "unequal"
    EQUAL = "equal"


class DirectionLabel(Enum):
    FRONT = "front"
    BACK = "back"
    LEFT = "left"
    RIGHT = "right"
    TOP = "top"
    BOTTOM = "bottom"


class ProximityLabel(Enum):
    NEAR = "near"
    FAR = "far"


#: Fixed orderings; label grids, network outputs and metrics all rely on them.
DIRECTION_ORDER = (
    DirectionLabel.FRONT,
    DirectionLabel.BACK,
    DirectionLabel.LEFT,
    DirectionLabel.RIGHT,
    DirectionLabel.TOP,
    DirectionLabel.BOTTOM,
)
PROXIMITY_ORDER = (ProximityLabel.NEAR, ProximityLabel.FAR)
#: Column order of the per-plane hemisphere classes (lr, fb, tb planes).
PLANE_CLASS_ORDER = ("left", "right", "front", "back", "top", "bottom")


def normalize_azimuth(az: float) -> float:
    """Wrap an azimuth in degrees into (-180, 180]."""
    az = math.fmod(az, 360.0)
    if az > 180.0:
        az -= 360.0
    elif az <= -180.0:
        az += 360.0
    return az


@dataclass(frozen=True)
class SphericalDirection:
    """A direction relative to the listener's head.

    azimuth: degrees in (-180, 180], positive towards the left.
    elevation: degrees in [-90, 90], positive up.
    """

    azimuth: float
    elevation: float

    def __post_init__(self):
        if not -90.0 <= self.elevation <= 90.0:
            raise LabelError(f"elevation {self.elevation} outside [-90, 90]")
        object.__setattr__(self, "azimuth", normalize_azimuth(self.azimuth))

    def mirrored_lr(self) -> "SphericalDirection":
        return SphericalDirection(-self.azimuth, self.elevation)


@dataclass(frozen=True)
class OctantLabel:
    """One of the eight sphere octants formed by the three hemisphere pairs.

    The index packs the three binary plane labels as
    ``4*[left] + 2*[front] + 1*[top]``.
    """

    lr: DirectionLabel
    fb: DirectionLabel
    tb: DirectionLabel
    index: int

    @property
    def name(self) -> str:
        return f"{self.lr.value}-{self.fb.value}-{self.tb.value}"


def classify_unequal(direction: SphericalDirection) -> DirectionLabel:
    """Assign the single cone label of the unequal sphere division.

    The elevation test runs first: |elevation| >= 35 degrees selects top or
    bottom regardless of azimuth.  Otherwise the azimuth cone decides, with
    half-open intervals: front [-45, 45), left [45, 135), back
    [135, 180] + (-180, -135), right [-135, -45).
    """
    el = direction.elevation
    if el >= POLAR_BAND_DEG:
        return DirectionLabel.TOP
    if el <= -POLAR_BAND_DEG:
        return DirectionLabel.BOTTOM
    az = direction.azimuth
    if -45.0 <= az < 45.0:
        return DirectionLabel.FRONT
    if 45.0 <= az < 135.0:
        return DirectionLabel.LEFT
    if -135.0 <= az < -45.0:
        return DirectionLabel.RIGHT
    return DirectionLabel.BACK


def classify_equal(direction: SphericalDirection) -> tuple[DirectionLabel, DirectionLabel, DirectionLabel]:
    """Assign the three independent hemisphere labels (lr, fb, tb).

    left <=> azimuth in [0, 180); front <=> azimuth in [-90, 90);
    top <=> elevation in [0, 90].
    """
    az = direction.azimuth
    lr = DirectionLabel.LEFT if 0.0 <= az < 180.0 else DirectionLabel.RIGHT
    fb = DirectionLabel.FRONT if -90.0 <= az < 90.0 else DirectionLabel.BACK
    tb = DirectionLabel.TOP if direction.elevation >= 0.0 else DirectionLabel.BOTTOM
    return lr, fb, tb


def octant_index(lr: DirectionLabel, fb: DirectionLabel, tb: DirectionLabel) -> OctantLabel:
    """Pack three hemisphere labels into their octant, bijectively."""
    if lr not in (DirectionLabel.LEFT, DirectionLabel.RIGHT):
        raise LabelError(f"{lr} is not a left/right label")
    if fb not in (DirectionLabel.FRONT, DirectionLabel.BACK):
        raise LabelError(f"{fb} is not a front/back label")
    if tb not in (DirectionLabel.TOP, DirectionLabel.BOTTOM):
        raise LabelError(f"{tb} is not a top/bottom label")
    index = (
        4 * (lr == DirectionLabel.LEFT)
        + 2 * (fb == DirectionLabel.FRONT)
        + 1 * (tb == DirectionLabel.TOP)
    )
    return OctantLabel(lr, fb, tb, index)


def octant_from_index(index: int) -> OctantLabel:
    """Inverse of :func:`octant_index` on 0..7."""
    if not 0 <= index <= 7:
        raise LabelError(f"octant index {index} outside 0..7")
    lr = DirectionLabel.LEFT if index & 4 else DirectionLabel.RIGHT
    fb = DirectionLabel.FRONT if index & 2 else DirectionLabel.BACK
    tb = DirectionLabel.TOP if index & 1 else DirectionLabel.BOTTOM
    return OctantLabel(lr, fb, tb, index)


OCTANT_NAMES = tuple(octant_from_index(i).name for i in range(8))


def classify_octant(direction: SphericalDirection) -> OctantLabel:
    return octant_index(*classify_equal(direction))


def classify_proximity(distance: float) -> ProximityLabel:
    """Map a source distance in meters onto the near/far split.

    Raises BufferZoneError inside the excluded (2.0, 3.0) m band and
    OutOfRangeError outside [0.4, 8.0] m; both signal invalid geometry.
    """
    if distance <= 0:
        raise OutOfRangeError(f"distance {distance} must be positive")
    if NEAR_RANGE[0] <= distance <= NEAR_RANGE[1]:
        return ProximityLabel.NEAR
    if FAR_RANGE[0] <= distance <= FAR_RANGE[1]:
        return ProximityLabel.FAR
    if NEAR_RANGE[1] < distance < FAR_RANGE[0]:
        raise BufferZoneError(f"distance {distance} m inside the excluded buffer zone")
    raise OutOfRangeError(f"distance {distance} m outside every proximity band")


# ---------------------------------------------------------------------------
# Label schemes: the class list of each classification method and the mapping
# from source geometry to active classes.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LabelScheme:
    """Class layout of one classification method.

    ``blocks`` names contiguous column groups of the grid (e.g. the three
    hemisphere planes, or the proximity pair of a joint method); evaluation
    and branched networks address columns through them.
    """

    name: str
    division: DivisionScheme
    joint: bool
    class_names: tuple[str, ...]
    blocks: tuple[tuple[str, tuple[int, int]], ...]
    _classifier: Callable[[SphericalDirection, float], tuple[int, ...]]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def block_slice(self, block: str) -> slice:
        for bname, (lo, hi) in self.blocks:
            if bname == block:
                return slice(lo, hi)
        raise KeyError(f"scheme {self.name} has no block {block!r}")

    def block_names(self) -> tuple[str, ...]:
        return tuple(bname for bname, _ in self.blocks)

    def active_classes(self, direction: SphericalDirection, distance: float) -> tuple[int, ...]:
        """Class indexes activated by a source at (direction, distance)."""
        return self._classifier(direction, distance)


def _uneq_one(direction, distance):
    return (DIRECTION_ORDER.index(classify_unequal(direction)),)


def _eq_planes(direction, distance):
    lr, fb, tb = classify_equal(direction)
    return (
        0 + (lr == DirectionLabel.RIGHT),
        2 + (fb == DirectionLabel.BACK),
        4 + (tb == DirectionLabel.BOTTOM),
    )


def _eq_one(direction, distance):
    return (classify_octant(direction).index,)


def _uneq_single(direction, distance):
    prox = classify_proximity(distance)
    d = DIRECTION_ORDER.index(classify_unequal(direction))
    return (PROXIMITY_ORDER.index(prox) * 6 + d,)


def _uneq_multi(direction, distance):
    d = DIRECTION_ORDER.index(classify_unequal(direction))
    p = PROXIMITY_ORDER.index(classify_proximity(distance))
    return (d, 6 + p)


def _eq_planes_joint(direction, distance):
    p = PROXIMITY_ORDER.index(classify_proximity(distance))
    return _eq_planes(direction, distance) + (6 + p,)


def _eq_one_joint(direction, distance):
    p = PROXIMITY_ORDER.index(classify_proximity(distance))
    return (classify_octant(direction).index, 8 + p)


_DIR_NAMES = tuple(d.value for d in DIRECTION_ORDER)
_PROX_NAMES = tuple(p.value for p in PROXIMITY_ORDER)

_PLANE_BLOCKS = (("lr", (0, 2)), ("fb", (2, 4)), ("tb", (4, 6)))

SCHEMES: dict[str, LabelScheme] = {}


def _register(scheme: LabelScheme) -> LabelScheme:
    SCHEMES[scheme.name] = scheme
    return scheme


_register(LabelScheme(
    "UneqOne", DivisionScheme.UNEQUAL, False,
    _DIR_NAMES, (("dir", (0, 6)),), _uneq_one,
))
for _name in ("EqSepMod", "EqSepBran"):
    _register(LabelScheme(
        _name, DivisionScheme.EQUAL, False,
        PLANE_CLASS_ORDER, _PLANE_BLOCKS, _eq_planes,
    ))
_register(LabelScheme(
    "EqOne", DivisionScheme.EQUAL, False,
    OCTANT_NAMES, (("oct", (0, 8)),), _eq_one,
))
_register(LabelScheme(
    "UneqSingle", DivisionScheme.UNEQUAL, True,
    tuple(f"{p}-{d}" for p in _PROX_NAMES for d in _DIR_NAMES),
    (("joint", (0, 12)),), _uneq_single,
))
_register(LabelScheme(
    "UneqMulti", DivisionScheme.UNEQUAL, True,
    _DIR_NAMES + _PROX_NAMES,
    (("dir", (0, 6)), ("prox", (6, 8))), _uneq_multi,
))
for _name in ("EqSepMod-J", "EqSepBran-J"):
    _register(LabelScheme(
        _name, DivisionScheme.EQUAL, True,
        PLANE_CLASS_ORDER + _PROX_NAMES,
        _PLANE_BLOCKS + (("prox", (6, 8)),), _eq_planes_joint,
    ))
_register(LabelScheme(
    "EqOne-J", DivisionScheme.EQUAL, True,
    OCTANT_NAMES + _PROX_NAMES,
    (("oct", (0, 8)), ("prox", (8, 10))), _eq_one_joint,
))

METHOD_NAMES = tuple(SCHEMES)


def get_scheme(method: str) -> LabelScheme:
    try:
        return SCHEMES[method]
    except KeyError:
        raise UnknownMethodError(
            f"unknown method {method!r}; valid: {', '.join(METHOD_NAMES)}"
        ) from None


# ---------------------------------------------------------------------------
# Frame-level target grids
# ---------------------------------------------------------------------------

@dataclass
class FrameLabels:
    """Per-frame multi-hot targets: a frames x classes binary grid."""

    grid: np.ndarray  # (frames, n_classes) uint8
    scheme_id: str
    class_names: tuple[str, ...]
    hop: float

    @property
    def frames(self) -> int:
        return self.grid.shape[0]

    @property
    def n_classes(self) -> int:
        return self.grid.shape[1]


def build_frame_labels(
    events: Iterable[tuple[float, float, SphericalDirection, float]],
    method: str | LabelScheme,
    frames: int,
    hop: float,
) -> FrameLabels:
    """Rasterize timed events into the per-frame target grid of a method.

    ``events`` holds (onset_s, offset_s, direction, distance) tuples.  Frame n
    covers [n*hop, (n+1)*hop); an event marks every frame whose interval it
    overlaps, in every class the method's scheme activates for its geometry.
    """
    scheme = get_scheme(method) if isinstance(method, str) else method
    if frames < 0 or hop <= 0:
        raise LabelError("frames must be >= 0 and hop > 0")
    grid = np.zeros((frames, scheme.n_classes), dtype=np.uint8)
    span = frames * hop
    for onset, offset, direction, distance in events:
        if offset < onset:
            raise LabelError(f"event offset {offset} before onset {onset}")
        if onset < 0 or offset > span + 1e-9:
            raise LabelError(
                f"event [{onset}, {offset}] outside the grid span [0, {span}]"
            )
        if offset == onset:
            continue
        first = max(0, int(math.floor(onset / hop)))
        last = min(frames, int(math.ceil(offset / hop)))
        cols = scheme.active_classes(direction, distance)
        for c in cols:
            grid[first:last, c] = 1
    return FrameLabels(grid, scheme.name, scheme.class_names, hop)
