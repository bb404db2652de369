import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from binprox.evaluation import (
    FusedGrid,
    SegmentScore,
    ShapeMismatchError,
    fold_average,
    fuse_octants,
    report_tables,
    segment_f1,
)
from tests.oracles import segment_counts_brute


class TestFusion:
    def test_all_ones(self):
        ones = np.ones((3, 2))
        fused = fuse_octants(ones, ones, ones)
        np.testing.assert_allclose(fused.values, 1.0)
        assert fused.binary.all()

    def test_boundary_half_is_active(self):
        half = np.full((2, 2), 0.5)
        fused = fuse_octants(half, half, half)
        np.testing.assert_allclose(fused.values, 0.5, atol=1e-15)
        assert fused.binary.all()

    def test_arithmetic_example(self):
        p_lr = np.array([[0.9, 0.1]])
        p_fb = np.array([[0.8, 0.2]])
        p_tb = np.array([[0.7, 0.3]])
        fused = fuse_octants(p_lr, p_fb, p_tb)
        assert fused.values[0, 7] == pytest.approx(0.504 ** (1 / 3), rel=1e-12)
        assert fused.binary[0, 7] == 1

    def test_matches_independent_arithmetic(self):
        rng = np.random.default_rng(0)
        p = rng.uniform(0, 1, (10000, 3))
        fused = fuse_octants(
            np.stack([p[:, 0], 1 - p[:, 0]], axis=1),
            np.stack([p[:, 1], 1 - p[:, 1]], axis=1),
            np.stack([p[:, 2], 1 - p[:, 2]], axis=1),
        )
        for c in range(8):
            a = p[:, 0] if c & 4 else 1 - p[:, 0]
            b = p[:, 1] if c & 2 else 1 - p[:, 1]
            d = p[:, 2] if c & 1 else 1 - p[:, 2]
            expect = (a * b * d) ** (1.0 / 3.0)
            assert np.max(np.abs(fused.values[:, c] - expect)) < 1e-12

    def test_monotone_in_each_plane(self):
        rng = np.random.default_rng(1)
        base = [rng.uniform(0.1, 0.9, (5, 2)) for _ in range(3)]
        fused = fuse_octants(*base)
        bumped = [b.copy() for b in base]
        bumped[1][:, 0] += 0.05  # raise front probabilities
        fused2 = fuse_octants(*bumped)
        front_octants = [c for c in range(8) if c & 2]
        assert np.all(fused2.values[:, front_octants] >= fused.values[:, front_octants])

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(2)
        planes = [rng.uniform(0, 1, (4, 2)) for _ in range(3)]
        fused = fuse_octants(*planes)
        swapped = [p[:, ::-1] for p in planes]  # swap both classes of every plane
        fused2 = fuse_octants(*swapped)
        # flipping all three plane polarities maps octant c to 7 - c
        np.testing.assert_allclose(fused2.values, fused.values[:, ::-1], atol=1e-15)

    def test_shape_guard(self):
        with pytest.raises(ShapeMismatchError):
            fuse_octants(np.ones((3, 2)), np.ones((4, 2)), np.ones((3, 2)))


class TestSegmentF1:
    def test_perfect_prediction(self):
        rng = np.random.default_rng(3)
        ref = rng.integers(0, 2, (230, 4)).astype(np.uint8)
        score = segment_f1(ref, ref)
        assert score.f1() == 1.0

    def test_all_zero_prediction(self):
        ref = np.zeros((100, 3), dtype=np.uint8)
        ref[10:30, 1] = 1
        score = segment_f1(np.zeros_like(ref), ref)
        assert score.f1() == 0.0

    def test_empty_everything_is_undefined(self):
        z = np.zeros((100, 3), dtype=np.uint8)
        assert segment_f1(z, z).f1() is None

    def test_handcrafted_three_segments(self):
        # 3 segments of 50 frames, 2 classes
        pred = np.zeros((150, 2), dtype=np.uint8)
        ref = np.zeros((150, 2), dtype=np.uint8)
        pred[0, 0] = 1          # seg 0 class 0: TP
        ref[20, 0] = 1
        pred[60, 1] = 1         # seg 1 class 1: FP
        ref[110, 0] = 1         # seg 2 class 0: FN
        score = segment_f1(pred, ref)
        np.testing.assert_array_equal(score.tp, [1, 0])
        np.testing.assert_array_equal(score.fp, [0, 1])
        np.testing.assert_array_equal(score.fn, [1, 0])
        assert score.f1() == pytest.approx(2 * 1 / (2 * 1 + 1 + 1))

    def test_against_brute_force(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            frames = int(rng.integers(1, 1000))
            n_classes = int(rng.integers(1, 11))
            density = rng.uniform(0.005, 0.2)
            pred = (rng.uniform(size=(frames, n_classes)) < density).astype(np.uint8)
            ref = (rng.uniform(size=(frames, n_classes)) < density).astype(np.uint8)
            score = segment_f1(pred, ref)
            tp, fp, fn = segment_counts_brute(pred, ref, 50)
            np.testing.assert_array_equal(score.tp, tp)
            np.testing.assert_array_equal(score.fp, fp)
            np.testing.assert_array_equal(score.fn, fn)

    def test_column_subsets(self):
        pred = np.zeros((100, 4), dtype=np.uint8)
        ref = np.zeros((100, 4), dtype=np.uint8)
        pred[:50, 0] = 1
        ref[:50, 0] = 1
        ref[:50, 2] = 1
        score = segment_f1(pred, ref)
        assert score.f1([0, 1]) == 1.0
        assert score.f1([2, 3]) == 0.0

    def test_addition(self):
        rng = np.random.default_rng(5)
        a = rng.integers(0, 2, (100, 2)).astype(np.uint8)
        b = rng.integers(0, 2, (150, 2)).astype(np.uint8)
        whole = segment_f1(np.concatenate([a, np.zeros((0, 2), np.uint8)]), a)
        parts = segment_f1(a, a) + segment_f1(b, b)
        assert parts.n_segments == 2 + 3
        assert parts.f1() == 1.0
        assert whole.f1() == 1.0

    @given(st.integers(1, 400), st.integers(1, 6), st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_f1_bounds(self, frames, n_classes, seed):
        rng = np.random.default_rng(seed)
        pred = rng.integers(0, 2, (frames, n_classes)).astype(np.uint8)
        ref = rng.integers(0, 2, (frames, n_classes)).astype(np.uint8)
        f1 = segment_f1(pred, ref).f1()
        assert f1 is None or 0.0 <= f1 <= 1.0


class TestFoldAverage:
    def test_mean_skips_undefined(self):
        assert fold_average([0.5, None, 1.0]) == pytest.approx(0.75)
        assert fold_average([None, None]) is None


class TestReport:
    def test_single_method_single_cell(self):
        text = report_tables({"double": {"UneqOne": {"lr": 0.7177, "single": 0.5530}}})
        assert "UneqOne" in text
        assert "71.77" in text
        assert "55.30" in text

    def test_missing_methods_render_dash(self):
        text = report_tables({"double": {"UneqOne": {"lr": 0.5, "single": 0.4}}})
        lines = [l for l in text.splitlines() if l.startswith("Left/Right")]
        assert lines and lines[0].count("-") >= 3  # EqOne, EqSepBran, EqSepMod absent

    def test_joint_table_merges_uneq_single(self):
        res = {"double": {
            "UneqSingle": {"joint": 0.5063},
            "UneqOne": {"single": 0.5503},
        }}
        text = report_tables(res)
        row = [l for l in text.splitlines() if l.startswith("UneqSingle")][0]
        assert row.count("50.63") == 2
        assert "55.03" in row

    def test_eqone_plane_rows_dashed(self):
        res = {"single": {"EqOne": {"single": 0.3044}}}
        text = report_tables(res)
        row = [l for l in text.splitlines() if l.startswith("Left/Right")][0]
        assert "30.44" not in row
        single_row = [l for l in text.splitlines() if l.startswith("Single-label")][0]
        assert "30.44" in single_row
