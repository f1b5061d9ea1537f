import numpy as np
import pytest

from helpers import brute_force_accuracy
from vibgmm.metrics import clustering_accuracy, confusion_matrix, pca_project_2d


class TestClusteringAccuracy:
    def test_identical_labelings(self):
        labels = np.array([0, 1, 2, 1, 0])
        assert clustering_accuracy(labels, labels) == 1.0

    def test_permuted_labels_still_perfect(self):
        true = np.array([0, 0, 1, 1, 2, 2])
        pred = np.array([2, 2, 0, 0, 1, 1])
        assert clustering_accuracy(pred, true) == 1.0

    def test_worked_example(self):
        pred = np.array([0, 0, 1, 1])
        true = np.array([1, 1, 0, 2])
        assert clustering_accuracy(pred, true) == pytest.approx(0.75)
        assert brute_force_accuracy(pred, true) == pytest.approx(0.75)

    def test_matches_brute_force_on_random_instances(self):
        rng = np.random.default_rng(0)
        for _ in range(60):
            n = int(rng.integers(5, 40))
            kp = int(rng.integers(1, 7))
            kt = int(rng.integers(1, 7))
            pred = rng.integers(0, kp, n)
            true = rng.integers(0, kt, n)
            assert clustering_accuracy(pred, true) == pytest.approx(
                brute_force_accuracy(pred, true)
            )

    def test_invariant_to_label_renaming(self):
        rng = np.random.default_rng(1)
        pred = rng.integers(0, 4, 50)
        true = rng.integers(0, 4, 50)
        base = clustering_accuracy(pred, true)
        perm = rng.permutation(4)
        assert clustering_accuracy(perm[pred], true) == pytest.approx(base)
        assert clustering_accuracy(pred, perm[true]) == pytest.approx(base)

    def test_constant_predictor_on_balanced_labels(self):
        true = np.repeat(np.arange(4), 25)
        pred = np.zeros(100, dtype=int)
        assert clustering_accuracy(pred, true) == pytest.approx(0.25)

    def test_rectangular_label_sets(self):
        pred = np.array([0, 1, 2, 3])
        true = np.array([0, 0, 1, 1])
        assert clustering_accuracy(pred, true) == pytest.approx(0.5)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            clustering_accuracy(np.zeros(3, dtype=int), np.zeros(4, dtype=int))

    def test_confusion_totals(self):
        pred = np.array([0, 0, 1, 1])
        true = np.array([1, 1, 0, 2])
        counts = confusion_matrix(pred, true)
        assert counts.sum() == 4
        assert counts.shape == (2, 3)


class TestPcaProject2d:
    def test_axis_aligned_2d_is_identity_up_to_sign(self):
        rng = np.random.default_rng(2)
        base = rng.standard_normal((25, 2)) * np.array([5.0, 1.0])
        # 4-fold reflection symmetry makes the sample covariance exactly
        # diagonal, so the principal axes are the coordinate axes
        x = np.vstack([base, base * [-1, 1], base * [1, -1], base * [-1, -1]])
        proj = pca_project_2d(x)
        centered = x - x.mean(axis=0)
        for axis in range(2):
            col = proj.coords[:, axis]
            assert (
                np.allclose(col, centered[:, axis], atol=1e-9)
                or np.allclose(col, -centered[:, axis], atol=1e-9)
            )
        assert proj.captured_variance == pytest.approx(1.0, abs=1e-12)

    def test_planted_plane_reconstructs(self):
        rng = np.random.default_rng(3)
        basis = np.linalg.qr(rng.standard_normal((3, 2)))[0].T  # [2, 3]
        coords = rng.standard_normal((50, 2)) * np.array([3.0, 1.0])
        x = coords @ basis + np.array([1.0, -2.0, 0.5])
        proj = pca_project_2d(x)
        recon = proj.coords @ proj.components + proj.mean
        np.testing.assert_allclose(recon, x, atol=1e-9)

    def test_captured_variance_in_unit_interval(self):
        rng = np.random.default_rng(4)
        proj = pca_project_2d(rng.standard_normal((40, 6)))
        assert 0.0 <= proj.captured_variance <= 1.0

    def test_zero_variance_flags_degenerate(self):
        proj = pca_project_2d(np.ones((10, 3)))
        assert proj.degenerate
        np.testing.assert_array_equal(proj.coords, np.zeros((10, 2)))

    def test_needs_two_rows(self):
        with pytest.raises(ValueError):
            pca_project_2d(np.ones((1, 3)))

    def test_components_ordered_by_variance(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((200, 3)) * np.array([0.1, 4.0, 1.0])
        proj = pca_project_2d(x)
        var0 = proj.coords[:, 0].var()
        var1 = proj.coords[:, 1].var()
        assert var0 >= var1
