import struct

import numpy as np
import pytest

from vibgmm.data import (
    Dataset,
    ParseError,
    SyntheticGmmSpec,
    destandardize,
    generate_synthetic,
    load_csv,
    load_feature_matrix,
    load_idx,
    load_vibf,
    save_vibf,
    standardize,
)


def _write_idx_images(path, images):
    n, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(images.astype(np.uint8).tobytes())


def _write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(np.asarray(labels, dtype=np.uint8).tobytes())


class TestLoadIdx:
    def test_minimal_valid_file(self, tmp_path):
        images = np.arange(8, dtype=np.uint8).reshape(2, 2, 2)
        path = tmp_path / "imgs.idx"
        _write_idx_images(path, images)
        ds = load_idx(path)
        assert ds.n == 2
        assert ds.n_x == 4
        assert ds.labels is None

    def test_pixel_scaling(self, tmp_path):
        images = np.array([[[0, 255]], [[128, 64]]], dtype=np.uint8)
        path = tmp_path / "imgs.idx"
        _write_idx_images(path, images)
        ds = load_idx(path)
        assert ds.features[0, 1] == 1.0
        assert ds.features[0, 0] == 0.0
        assert ds.features[1, 0] == pytest.approx(128 / 255)

    def test_labels_loaded_and_matched(self, tmp_path):
        _write_idx_images(tmp_path / "i.idx", np.zeros((3, 2, 2), dtype=np.uint8))
        _write_idx_labels(tmp_path / "l.idx", [1, 0, 2])
        ds = load_idx(tmp_path / "i.idx", tmp_path / "l.idx")
        assert np.array_equal(ds.labels, [1, 0, 2])

    def test_bad_magic_reports_offset(self, tmp_path):
        path = tmp_path / "bad.idx"
        path.write_bytes(struct.pack(">IIII", 0xDEADBEEF, 1, 1, 1) + b"\x00")
        with pytest.raises(ParseError, match="offset 0"):
            load_idx(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "short.idx"
        path.write_bytes(struct.pack(">IIII", 0x00000803, 2, 2, 2) + b"\x00" * 5)
        with pytest.raises(ParseError, match="truncated"):
            load_idx(path)

    def test_label_count_mismatch(self, tmp_path):
        _write_idx_images(tmp_path / "i.idx", np.zeros((3, 1, 1), dtype=np.uint8))
        _write_idx_labels(tmp_path / "l.idx", [0, 1])
        with pytest.raises(ParseError, match="labels for 3 images"):
            load_idx(tmp_path / "i.idx", tmp_path / "l.idx")

    def test_loading_is_byte_deterministic(self, tmp_path):
        images = np.random.default_rng(0).integers(0, 256, (5, 3, 3)).astype(np.uint8)
        path = tmp_path / "i.idx"
        _write_idx_images(path, images)
        a = load_idx(path)
        b = load_idx(path)
        assert np.array_equal(a.features, b.features)


class TestCsv:
    def test_two_rows(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("1,2\n3,4\n")
        ds = load_csv(path)
        assert ds.n == 2 and ds.n_x == 2
        np.testing.assert_array_equal(ds.features, [[1.0, 2.0], [3.0, 4.0]])

    def test_label_column_via_header(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("a,b,label\n1,2,0\n3,4,1\n")
        ds = load_csv(path, header=True)
        assert ds.n_x == 2
        assert np.array_equal(ds.labels, [0, 1])

    def test_forced_label_column(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("1,2,1\n3,4,0\n")
        ds = load_csv(path, label_column=True)
        assert ds.n_x == 2
        assert np.array_equal(ds.labels, [1, 0])

    def test_ragged_rows_report_line(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("1,2\n3,4,5\n")
        with pytest.raises(ParseError, match="row 2"):
            load_csv(path)

    def test_non_numeric_reports_line(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("1,2\n3,oops\n")
        with pytest.raises(ParseError, match="row 2"):
            load_csv(path)


class TestStandardize:
    def test_round_trip(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((30, 4)) * np.array([1, 5, 0.1, 2]) + 3.0
        scaled, record = standardize(x)
        np.testing.assert_allclose(scaled.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(destandardize(scaled, record), x, atol=1e-12)

    def test_flag_records_normalization(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("1,10\n3,20\n5,30\n")
        ds = load_feature_matrix(path, "csv", scale=True)
        assert ds.normalization is not None
        np.testing.assert_allclose(ds.features.mean(axis=0), 0.0, atol=1e-12)


class TestVibf:
    def test_round_trip_with_labels(self, tmp_path):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((7, 3))
        labels = rng.integers(0, 4, 7)
        path = tmp_path / "d.vibf"
        save_vibf(path, x, labels)
        ds = load_vibf(path)
        np.testing.assert_array_equal(ds.features, x)
        np.testing.assert_array_equal(ds.labels, labels)

    def test_round_trip_without_labels(self, tmp_path):
        x = np.ones((2, 2))
        path = tmp_path / "d.vibf"
        save_vibf(path, x)
        assert load_vibf(path).labels is None

    def test_truncated_label_block(self, tmp_path):
        path = tmp_path / "d.vibf"
        save_vibf(path, np.ones((3, 2)), labels=[0, 1, 2])
        path.write_bytes(path.read_bytes()[:-2])
        with pytest.raises(ParseError, match="label block"):
            load_vibf(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "d.vibf"
        path.write_bytes(b"XXXX" + b"\x00" * 30)
        with pytest.raises(ParseError, match="magic"):
            load_vibf(path)


class TestSynthetic:
    def test_k1_sample_mean(self):
        spec = SyntheticGmmSpec(k=1, d=2, means=[[3.0, -1.0]], variances=2.0,
                                weights=[1.0], n=4000, seed=3)
        ds = generate_synthetic(spec)
        bound = 3 * np.sqrt(2.0) / np.sqrt(4000)
        assert np.abs(ds.features.mean(axis=0) - [3.0, -1.0]).max() < bound

    def test_zero_variance_degenerates_to_means(self):
        spec = SyntheticGmmSpec(k=2, d=2, means=[[0.0, 0.0], [5.0, 5.0]],
                                variances=0.0, weights=[0.5, 0.5], n=100, seed=4)
        ds = generate_synthetic(spec)
        np.testing.assert_array_equal(ds.features, spec.means[ds.labels])

    def test_component_frequencies_within_multinomial_bounds(self):
        w = np.array([0.2, 0.3, 0.5])
        spec = SyntheticGmmSpec(k=3, d=1, means=np.zeros((3, 1)), variances=1.0,
                                weights=w, n=10_000, seed=5)
        ds = generate_synthetic(spec)
        freq = np.bincount(ds.labels, minlength=3) / 10_000
        sigma = np.sqrt(w * (1 - w) / 10_000)
        assert (np.abs(freq - w) < 3 * sigma).all()

    def test_seed_deterministic(self):
        spec = SyntheticGmmSpec(k=2, d=2, means=np.zeros((2, 2)), variances=1.0,
                                weights=[0.5, 0.5], n=50, seed=6)
        a, b = generate_synthetic(spec), generate_synthetic(spec)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)

    def test_invalid_weights_rejected(self):
        with pytest.raises(ValueError):
            SyntheticGmmSpec(k=2, d=1, means=np.zeros((2, 1)), variances=1.0,
                             weights=[0.5, 0.6], n=10)


class TestDatasetContract:
    def test_train_view_has_no_labels_and_is_read_only(self):
        ds = Dataset(features=np.ones((3, 2)), labels=np.array([0, 1, 0]))
        view = ds.train_view()
        assert isinstance(view, np.ndarray)
        with pytest.raises(ValueError):
            view[0, 0] = 5.0

    def test_label_length_checked(self):
        with pytest.raises(ParseError):
            Dataset(features=np.ones((3, 2)), labels=np.array([0, 1]))
