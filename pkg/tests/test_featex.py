import numpy as np
import pytest

from binprox.featex import (
    CHUNK_FRAMES,
    FeatureStats,
    HOP_SIZE,
    N_BINS,
    SAMPLE_RATE,
    TooShortError,
    WINDOW_SIZE,
    chunk_label_grid,
    chunk_sequence,
    extract_features,
    feature_file_from_chunks,
    ild,
    ipd_sincos,
    magnitude_plane,
    n_frames,
    read_feature_file,
    stft,
    write_feature_file,
)


def tone(freq, seconds=1.0, phase=0.0):
    t = np.arange(int(seconds * SAMPLE_RATE)) / SAMPLE_RATE
    return np.sin(2 * np.pi * freq * t + phase)


class TestStft:
    def test_frame_count_15s(self):
        assert n_frames(15 * SAMPLE_RATE) == 749

    def test_tone_bin(self):
        wave = np.stack([tone(1000.0), tone(1000.0)])
        spec = stft(wave)
        # rfft bin round(1000 / 23.4375) = 43; DC dropped shifts it to col 42
        assert spec.shape == (2, n_frames(wave.shape[1]), N_BINS)
        bins = np.argmax(np.abs(spec[0]), axis=1)
        assert np.all(bins == 42)

    def test_zero_input(self):
        spec = stft(np.zeros((2, 4 * WINDOW_SIZE)))
        assert np.all(np.abs(spec) == 0)

    def test_too_short(self):
        with pytest.raises(TooShortError):
            stft(np.zeros((2, WINDOW_SIZE - 1)))

    def test_shift_covariance(self):
        rng = np.random.default_rng(0)
        x = rng.normal(0, 0.3, (2, 8 * WINDOW_SIZE))
        shifted = np.concatenate([np.zeros((2, HOP_SIZE)), x], axis=1)
        a = extract_features(x)
        b = extract_features(shifted)
        np.testing.assert_allclose(b[1:a.shape[0] + 1], a, atol=1e-5)


class TestIpd:
    def test_identical_channels(self):
        spec = stft(np.stack([tone(500.0), tone(500.0)]))
        sin, cos = ipd_sincos(spec[0], spec[1])
        np.testing.assert_allclose(sin, 0.0, atol=1e-12)
        np.testing.assert_allclose(cos, 1.0, atol=1e-12)

    def test_delayed_tone_phase(self):
        freq, delay = 1000.0, 10
        left = tone(freq)
        right = np.concatenate([np.zeros(delay), left[:-delay]])
        spec = stft(np.stack([left, right]))
        sin, cos = ipd_sincos(spec[0], spec[1])
        phi = 2 * np.pi * freq * delay / SAMPLE_RATE
        # check at the tone bin, away from the edge frames
        assert sin[5, 42] == pytest.approx(np.sin(phi), abs=5e-3)
        assert cos[5, 42] == pytest.approx(np.cos(phi), abs=5e-3)

    def test_swap_antisymmetry(self):
        rng = np.random.default_rng(1)
        wave = rng.normal(0, 0.2, (2, 4 * WINDOW_SIZE))
        spec = stft(wave)
        sin_a, cos_a = ipd_sincos(spec[0], spec[1])
        sin_b, cos_b = ipd_sincos(spec[1], spec[0])
        np.testing.assert_allclose(sin_b, -sin_a, atol=1e-12)
        np.testing.assert_allclose(cos_b, cos_a, atol=1e-12)

    def test_unit_circle_everywhere(self):
        rng = np.random.default_rng(2)
        wave = rng.normal(0, 0.2, (2, 6 * WINDOW_SIZE))
        wave[:, 2 * WINDOW_SIZE:3 * WINDOW_SIZE] = 0  # include silence
        spec = stft(wave)
        sin, cos = ipd_sincos(spec[0], spec[1])
        np.testing.assert_allclose(sin**2 + cos**2, 1.0, atol=1e-5)


class TestIld:
    def test_identical_channels(self):
        spec = stft(np.stack([tone(500.0), tone(500.0)]))
        np.testing.assert_allclose(ild(spec[0], spec[1]), 0.0, atol=1e-12)

    def test_swap_negates(self):
        rng = np.random.default_rng(3)
        wave = rng.normal(0, 0.2, (2, 4 * WINDOW_SIZE))
        spec = stft(wave)
        np.testing.assert_allclose(ild(spec[1], spec[0]), -ild(spec[0], spec[1]), atol=1e-12)

    def test_factor_ten_level(self):
        left = tone(1000.0)
        spec = stft(np.stack([left, 0.1 * left]))
        plane = ild(spec[0], spec[1])
        assert plane[5, 42] == pytest.approx(20.0, abs=1e-3)

    def test_clipped_on_silence_vs_tone(self):
        left = tone(1000.0)
        spec = stft(np.stack([left, np.zeros_like(left)]))
        plane = ild(spec[0], spec[1])
        assert plane.max() <= 40.0
        assert plane[5, 42] == 40.0


class TestMagnitude:
    def test_zero_input(self):
        spec = stft(np.zeros((2, 4 * WINDOW_SIZE)))
        np.testing.assert_array_equal(magnitude_plane(spec[0], spec[1]), 0.0)

    def test_monotone_in_amplitude(self):
        wave = np.stack([tone(700.0), tone(700.0)])
        a = magnitude_plane(*stft(wave))
        b = magnitude_plane(*stft(2 * wave))
        assert np.all(b >= a)
        assert b[5, 29] > a[5, 29]

    def test_tone_bin_value(self):
        left = tone(1000.0)
        spec = stft(np.stack([left, 3 * left]))
        got = magnitude_plane(spec[0], spec[1])[5, 42]
        expect = np.log1p(0.5 * (np.abs(spec[0, 5, 42]) + np.abs(spec[1, 5, 42])))
        assert got == pytest.approx(expect, rel=1e-12)


class TestChunking:
    def test_749_frames_six_chunks(self):
        feats = np.zeros((749, N_BINS, 4), dtype=np.float32)
        feats[-1, 0, 0] = 1.0
        chunks = chunk_sequence(feats)
        assert len(chunks) == 6
        assert [c.valid for c in chunks] == [128] * 5 + [109]
        assert chunks[-1].data.shape == (4, CHUNK_FRAMES, N_BINS)
        assert chunks[-1].data[0, 108, 0] == 1.0
        assert not chunks[-1].data[:, 109:].any()

    def test_exact_single_chunk(self):
        chunks = chunk_sequence(np.ones((128, N_BINS, 4), dtype=np.float32))
        assert len(chunks) == 1 and chunks[0].valid == 128

    def test_labels_align(self):
        grid = np.arange(749 * 3).reshape(749, 3).astype(np.uint8)
        chunks, valid = chunk_label_grid(grid)
        assert chunks.shape == (6, 128, 3)
        np.testing.assert_array_equal(valid, [128] * 5 + [109])
        np.testing.assert_array_equal(chunks[2, 17], grid[2 * 128 + 17])
        assert not chunks[5, 109:].any()


class TestStats:
    def test_standardizes_to_zero_mean_unit_var(self):
        rng = np.random.default_rng(4)
        feats = rng.normal(3.0, 2.0, (5, 4, CHUNK_FRAMES, N_BINS)).astype(np.float32)
        valid = np.full(5, CHUNK_FRAMES)
        stats = FeatureStats.compute([feats], [valid])
        out = stats.apply(feats)
        assert abs(out.mean()) < 1e-3
        assert out.std() == pytest.approx(1.0, abs=1e-3)

    def test_padding_excluded(self):
        feats = np.zeros((1, 4, CHUNK_FRAMES, N_BINS), dtype=np.float32)
        feats[0, :, :10, :] = 5.0
        stats = FeatureStats.compute([feats], [np.array([10])])
        np.testing.assert_allclose(stats.mean, 5.0)


class TestContainer:
    def test_round_trip_with_labels(self, tmp_path):
        rng = np.random.default_rng(5)
        wave = rng.normal(0, 0.1, (2, 5 * WINDOW_SIZE))
        tensors = chunk_sequence(extract_features(wave))
        grid = rng.integers(0, 2, (n_frames(wave.shape[1]), 6)).astype(np.uint8)
        labels, _ = chunk_label_grid(grid)
        ff = feature_file_from_chunks(tensors, labels, scheme_id="EqSepBran")
        path = tmp_path / "rec.bfc"
        write_feature_file(path, ff)
        back = read_feature_file(path)
        np.testing.assert_array_equal(back.features, ff.features)
        np.testing.assert_array_equal(back.valid, ff.valid)
        np.testing.assert_array_equal(back.labels, labels)
        assert back.scheme_id == "EqSepBran"
        assert not back.stats_applied
        np.testing.assert_allclose(back.stats.mean, ff.stats.mean, atol=1e-6)

    def test_round_trip_without_labels(self, tmp_path):
        tensors = chunk_sequence(np.zeros((130, N_BINS, 4), dtype=np.float32))
        ff = feature_file_from_chunks(tensors)
        path = tmp_path / "rec.bfc"
        write_feature_file(path, ff)
        back = read_feature_file(path)
        assert back.labels is None
        assert back.n_chunks == 2
        assert back.total_frames == 130

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.bfc"
        path.write_bytes(b"NOPE" + b"\0" * 64)
        with pytest.raises(ValueError):
            read_feature_file(path)
