import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from binprox.labelspace import (
    BufferZoneError,
    DirectionLabel,
    OutOfRangeError,
    ProximityLabel,
    SphericalDirection,
    UnknownMethodError,
    LabelError,
    METHOD_NAMES,
    build_frame_labels,
    classify_equal,
    classify_proximity,
    classify_unequal,
    get_scheme,
    normalize_azimuth,
    octant_from_index,
    octant_index,
)

L, R = DirectionLabel.LEFT, DirectionLabel.RIGHT
F, B = DirectionLabel.FRONT, DirectionLabel.BACK
T, BO = DirectionLabel.TOP, DirectionLabel.BOTTOM


def random_directions(n, seed=0):
    rng = np.random.default_rng(seed)
    az = rng.uniform(-180.0, 180.0, n)
    el = np.degrees(np.arcsin(rng.uniform(-1.0, 1.0, n)))  # area-uniform
    return az, el


def unequal_boxes_oracle(az, el):
    """Membership test straight off the six cone definitions."""
    hits = []
    if 35.0 <= el <= 90.0:
        hits.append(T)
    if -90.0 <= el <= -35.0:
        hits.append(BO)
    if -35.0 < el < 35.0:
        if -45.0 <= az < 45.0:
            hits.append(F)
        if 45.0 <= az < 135.0:
            hits.append(L)
        if az >= 135.0 or az < -135.0:
            hits.append(B)
        if -135.0 <= az < -45.0:
            hits.append(R)
    return hits


class TestSphericalDirection:
    def test_azimuth_normalized(self):
        assert SphericalDirection(190.0, 0.0).azimuth == pytest.approx(-170.0)
        assert SphericalDirection(-180.0, 0.0).azimuth == pytest.approx(180.0)
        assert SphericalDirection(540.0, 0.0).azimuth == pytest.approx(180.0)

    def test_elevation_bounds(self):
        with pytest.raises(LabelError):
            SphericalDirection(0.0, 91.0)
        with pytest.raises(LabelError):
            SphericalDirection(0.0, -90.5)

    @given(st.floats(-1e4, 1e4, allow_nan=False))
    def test_normalize_range(self, az):
        out = normalize_azimuth(az)
        assert -180.0 < out <= 180.0


class TestUnequal:
    def test_examples(self):
        assert classify_unequal(SphericalDirection(0, 0)) == F
        assert classify_unequal(SphericalDirection(0, 90)) == T
        assert classify_unequal(SphericalDirection(180, -10)) == B

    def test_cone_edges(self):
        assert classify_unequal(SphericalDirection(45, 0)) == L
        assert classify_unequal(SphericalDirection(-45, 0)) == F
        assert classify_unequal(SphericalDirection(135, 0)) == B
        assert classify_unequal(SphericalDirection(-135, 0)) == R
        assert classify_unequal(SphericalDirection(0, 35)) == T
        assert classify_unequal(SphericalDirection(0, -35)) == BO

    def test_partition_on_dense_grid(self):
        az, el = random_directions(20000, seed=1)
        seen = set()
        for a, e in zip(az, el):
            lab = classify_unequal(SphericalDirection(a, e))
            hits = unequal_boxes_oracle(a, e)
            assert hits == [lab]
            seen.add(lab)
        assert seen == set(DirectionLabel)

    @given(st.floats(-179.9, 179.9), st.floats(-89.9, 89.9))
    @settings(max_examples=200)
    def test_mirror_symmetry(self, az, el):
        # stay off the cone boundaries where the mirror is not a bijection
        if min(abs(abs(az) - b) for b in (0.0, 45.0, 135.0, 180.0)) < 1e-6:
            return
        if abs(abs(el) - 35.0) < 1e-6:
            return
        mirror = {L: R, R: L}
        a = classify_unequal(SphericalDirection(az, el))
        b = classify_unequal(SphericalDirection(-az, el))
        assert b == mirror.get(a, a)


class TestEqual:
    def test_examples(self):
        assert classify_equal(SphericalDirection(30, -10)) == (L, F, BO)
        assert classify_equal(SphericalDirection(0, 0)) == (L, F, T)
        assert classify_equal(SphericalDirection(-170, 40)) == (R, B, T)

    def test_sign_oracle(self):
        az, el = random_directions(20000, seed=2)
        for a, e in zip(az, el):
            lr, fb, tb = classify_equal(SphericalDirection(a, e))
            assert (lr == L) == (math.sin(math.radians(a)) >= 0)
            assert (fb == F) == (math.cos(math.radians(a)) >= 0)
            assert (tb == T) == (e >= 0)

    @given(st.floats(-179.9, 179.9), st.floats(-89.9, 89.9))
    @settings(max_examples=200)
    def test_mirror_symmetry(self, az, el):
        if abs(az) < 1e-6 or abs(abs(az) - 180.0) < 1e-6 or abs(abs(az) - 90.0) < 1e-6:
            return
        lr1, fb1, tb1 = classify_equal(SphericalDirection(az, el))
        lr2, fb2, tb2 = classify_equal(SphericalDirection(-az, el))
        assert {lr1, lr2} == {L, R}
        assert fb1 == fb2 and tb1 == tb2


class TestOctants:
    def test_examples(self):
        assert octant_index(L, F, T).index == 7
        assert octant_index(R, B, BO).index == 0
        assert octant_index(L, B, T).index == 5

    def test_bijection(self):
        for i in range(8):
            o = octant_from_index(i)
            assert octant_index(o.lr, o.fb, o.tb).index == i

    def test_rejects_wrong_axis(self):
        with pytest.raises(LabelError):
            octant_index(F, F, T)


class TestProximity:
    def test_examples(self):
        assert classify_proximity(1.0) == ProximityLabel.NEAR
        assert classify_proximity(5.0) == ProximityLabel.FAR
        with pytest.raises(BufferZoneError):
            classify_proximity(2.5)

    def test_band_edges(self):
        assert classify_proximity(0.4) == ProximityLabel.NEAR
        assert classify_proximity(2.0) == ProximityLabel.NEAR
        assert classify_proximity(3.0) == ProximityLabel.FAR
        assert classify_proximity(8.0) == ProximityLabel.FAR

    def test_out_of_range(self):
        with pytest.raises(OutOfRangeError):
            classify_proximity(0.3)
        with pytest.raises(OutOfRangeError):
            classify_proximity(8.5)
        with pytest.raises(OutOfRangeError):
            classify_proximity(-1.0)


def brute_force_grid(events, scheme, frames, hop):
    grid = np.zeros((frames, scheme.n_classes), dtype=np.uint8)
    for n in range(frames):
        lo, hi = n * hop, (n + 1) * hop
        for onset, offset, direction, distance in events:
            if onset < hi and offset > lo:
                for c in scheme.active_classes(direction, distance):
                    grid[n, c] = 1
    return grid


class TestFrameLabels:
    def test_single_event_uneq_single(self):
        hop = 0.02
        ev = [(10 * hop, 21 * hop, SphericalDirection(0, 0), 1.0)]
        labels = build_frame_labels(ev, "UneqSingle", 40, hop)
        col = labels.class_names.index("near-front")
        expect = np.zeros((40, 12), dtype=np.uint8)
        expect[10:21, col] = 1
        np.testing.assert_array_equal(labels.grid, expect)

    def test_no_events(self):
        labels = build_frame_labels([], "UneqOne", 16, 0.02)
        assert not labels.grid.any()

    def test_two_overlapping_events(self):
        hop = 0.02
        evs = [
            (0.0, 0.2, SphericalDirection(90, 0), 5.0),
            (0.1, 0.3, SphericalDirection(-90, 0), 5.0),
        ]
        labels = build_frame_labels(evs, "UneqOne", 15, hop)
        left = labels.class_names.index("left")
        right = labels.class_names.index("right")
        assert labels.grid[5:10, left].all() and labels.grid[5:10, right].all()
        assert not labels.grid[:, [0, 1, 4, 5]].any()

    @pytest.mark.parametrize("method", METHOD_NAMES)
    def test_against_brute_force(self, method):
        rng = np.random.default_rng(hash(method) % 2**32)
        scheme = get_scheme(method)
        hop = 0.02
        for _ in range(20):
            frames = int(rng.integers(10, 200))
            events = []
            for _ in range(rng.integers(0, 6)):
                onset = rng.uniform(0, frames * hop * 0.9)
                offset = min(frames * hop, onset + rng.uniform(0, frames * hop / 2))
                d = SphericalDirection(rng.uniform(-180, 180), rng.uniform(-90, 90))
                dist = rng.choice([rng.uniform(0.4, 2.0), rng.uniform(3.0, 8.0)])
                events.append((onset, offset, d, dist))
            got = build_frame_labels(events, method, frames, hop)
            np.testing.assert_array_equal(got.grid, brute_force_grid(events, scheme, frames, hop))

    def test_unknown_method(self):
        with pytest.raises(UnknownMethodError):
            build_frame_labels([], "NoSuchMethod", 10, 0.02)

    def test_event_outside_span(self):
        with pytest.raises(LabelError):
            build_frame_labels(
                [(0.0, 1.0, SphericalDirection(0, 0), 1.0)], "UneqOne", 10, 0.02
            )


def test_scheme_shapes():
    sizes = {
        "UneqOne": 6, "EqSepMod": 6, "EqSepBran": 6, "EqOne": 8,
        "UneqSingle": 12, "UneqMulti": 8, "EqSepMod-J": 8,
        "EqSepBran-J": 8, "EqOne-J": 10,
    }
    for name, n in sizes.items():
        assert get_scheme(name).n_classes == n


def test_scheme_blocks():
    s = get_scheme("EqSepBran-J")
    assert s.block_names() == ("lr", "fb", "tb", "prox")
    assert s.block_slice("prox") == slice(6, 8)
    assert s.class_names[s.block_slice("lr")] == ("left", "right")
