"""Octant probability fusion and one-second segment-based F1 scoring.

The three hemisphere-plane probability grids combine into eight exclusive
octant activations through a per-frame cube-root probability product,
binarized at the inclusive 0.5 threshold.  Detection quality is measured per
one-second segment: a class is active in a segment iff it is active in at
least one of its frames, and counts are micro-averaged over the requested
class columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .labelspace import octant_from_index

ACTIVE_THRESHOLD = 0.5
SEGMENT_SECONDS = 1.0


class ShapeMismatchError(ValueError):
    """Prediction and reference grids disagree in shape."""


@dataclass
class FusedGrid:
    """Frame-level octant activations P_c and their binarized companion."""

    values: np.ndarray  # (frames, 8) in [0, 1]
    binary: np.ndarray  # (frames, 8) uint8, values >= 0.5

    @property
    def frames(self) -> int:
        return self.values.shape[0]


def fuse_octants(p_lr: np.ndarray, p_fb: np.ndarray, p_tb: np.ndarray) -> FusedGrid:
    """Combine per-plane probabilities into the eight octant classes.

    Plane grids are (frames, 2) with columns ordered [left, right],
    [front, back], [top, bottom].  Octant c picks the matching column from
    each plane and takes the cube root of the product; activation uses the
    inclusive 0.5 threshold.  Octant order follows the packed index
    4*[left] + 2*[front] + 1*[top].
    """
    planes = (np.asarray(p_lr, dtype=np.float64),
              np.asarray(p_fb, dtype=np.float64),
              np.asarray(p_tb, dtype=np.float64))
    frames = planes[0].shape[0]
    for p in planes:
        if p.shape != (frames, 2):
            raise ShapeMismatchError(f"plane grids must share shape (frames, 2), got {p.shape}")
    values = np.empty((frames, 8))
    for c in range(8):
        o = octant_from_index(c)
        cols = (0 if c & 4 else 1, 0 if c & 2 else 1, 0 if c & 1 else 1)
        values[:, c] = np.cbrt(planes[0][:, cols[0]] * planes[1][:, cols[1]] * planes[2][:, cols[2]])
    return FusedGrid(values, (values >= ACTIVE_THRESHOLD).astype(np.uint8))


@dataclass
class SegmentScore:
    """Per-class true/false positive and false negative segment counts."""

    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    n_segments: int

    @property
    def n_classes(self) -> int:
        return len(self.tp)

    def __add__(self, other: "SegmentScore") -> "SegmentScore":
        if self.n_classes != other.n_classes:
            raise ShapeMismatchError("cannot add scores over different class sets")
        return SegmentScore(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn,
                            self.n_segments + other.n_segments)

    def f1(self, cols: Sequence[int] | None = None) -> float | None:
        """Micro-averaged F1 over the selected class columns.

        Returns None when neither reference nor prediction activity exists
        (undefined, reported as absent rather than zero).
        """
        sel = slice(None) if cols is None else list(cols)
        tp = int(self.tp[sel].sum())
        fp = int(self.fp[sel].sum())
        fn = int(self.fn[sel].sum())
        denom = 2 * tp + fp + fn
        if denom == 0:
            return None
        return 2.0 * tp / denom


def segment_f1(pred: np.ndarray, ref: np.ndarray, hop: float = 0.02,
               segment_s: float = SEGMENT_SECONDS) -> SegmentScore:
    """Segment-based counts of a binary prediction grid against a reference.

    Both grids are (frames, classes); a class is active in a segment iff any
    of the segment's frames activates it.  The trailing partial segment
    counts with its remaining frames.
    """
    pred = np.asarray(pred)
    ref = np.asarray(ref)
    if pred.shape != ref.shape or pred.ndim != 2:
        raise ShapeMismatchError(f"grids disagree: {pred.shape} vs {ref.shape}")
    frames_per_segment = int(round(segment_s / hop))
    if frames_per_segment < 1:
        raise ValueError("segment shorter than one frame")
    frames, n_classes = pred.shape
    n_seg = math.ceil(frames / frames_per_segment) if frames else 0
    tp = np.zeros(n_classes, dtype=np.int64)
    fp = np.zeros(n_classes, dtype=np.int64)
    fn = np.zeros(n_classes, dtype=np.int64)
    for s in range(n_seg):
        lo = s * frames_per_segment
        hi = min(frames, lo + frames_per_segment)
        p = pred[lo:hi].any(axis=0)
        r = ref[lo:hi].any(axis=0)
        tp += p & r
        fp += p & ~r
        fn += ~p & r
    return SegmentScore(tp, fp, fn, n_seg)


def fold_average(fold_f1s: Iterable[float | None]) -> float | None:
    """Arithmetic mean of per-fold F1 values, skipping undefined folds."""
    vals = [v for v in fold_f1s if v is not None]
    if not vals:
        return None
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------

DIRECTION_TABLE_ROWS = (
    ("lr", "Left/Right"),
    ("fb", "Front/Back"),
    ("tb", "Top/Bottom"),
    ("single", "Single-label"),
    ("multi", "Multi-label"),
)
DIRECTION_TABLE_COLUMNS = ("UneqOne", "EqOne", "EqSepBran", "EqSepMod")
JOINT_TABLE_ROWS = ("UneqSingle", "UneqMulti", "EqOne-J", "EqSepBran-J", "EqSepMod-J")
#: stage-1 counterpart whose single-label direction score fills "Sep. direction"
SEPARATE_DIRECTION_REFERENCE = {
    "UneqSingle": "UneqOne",
    "UneqMulti": "UneqOne",
    "EqOne-J": "EqOne",
    "EqSepBran-J": "EqSepBran",
    "EqSepMod-J": "EqSepMod",
}


def _cell(value: float | None) -> str:
    return "-" if value is None else f"{100.0 * value:.2f}"


def _render_grid(title: str, headers: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    lines = [title]
    lines.append("  ".join(h.rjust(w) if i else h.ljust(w)
                           for i, (h, w) in enumerate(zip(headers, widths))))
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(c.rjust(w) if i else c.ljust(w)
                               for i, (c, w) in enumerate(zip(r, widths))))
    return "\n".join(lines)


def report_tables(results: dict) -> str:
    """Render the direction tables (per subset) and the joint task table.

    ``results`` maps subset -> method -> row key -> fold-mean F1 in [0, 1]
    (or None).  Missing methods and inapplicable cells render as "-".
    Row keys: lr, fb, tb, single, multi, prox, joint.
    """
    sections = []
    for subset in sorted(results):
        methods = results[subset]
        stage1_present = [m for m in DIRECTION_TABLE_COLUMNS if m in methods]
        if stage1_present:
            rows = []
            for key, label in DIRECTION_TABLE_ROWS:
                cells = [label]
                for method in DIRECTION_TABLE_COLUMNS:
                    cells.append(_cell(methods.get(method, {}).get(key)))
                rows.append(cells)
            sections.append(_render_grid(
                f"Direction classification F1 [%] ({subset} subset)",
                ["Row"] + list(DIRECTION_TABLE_COLUMNS), rows,
            ))
        joint_present = [m for m in JOINT_TABLE_ROWS if m in methods]
        if joint_present:
            rows = []
            for method in JOINT_TABLE_ROWS:
                scores = methods.get(method, {})
                if method == "UneqSingle":
                    joint = scores.get("joint")
                    prox_cell = dir_cell = _cell(joint)
                else:
                    prox_cell = _cell(scores.get("prox"))
                    dir_cell = _cell(scores.get("single"))
                ref = SEPARATE_DIRECTION_REFERENCE[method]
                sep_cell = _cell(methods.get(ref, {}).get("single"))
                if method not in methods:
                    prox_cell = dir_cell = "-"
                rows.append([method, prox_cell, dir_cell, sep_cell])
            sections.append(_render_grid(
                f"Joint proximity and direction F1 [%] ({subset} subset)",
                ["Model", "Proximity", "Direction", "Sep. direction"], rows,
            ))
    return "\n\n".join(sections) + "\n"
