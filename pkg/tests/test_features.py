import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from costal.features import (
    FeatureError, fit_pca, gray_world_normalize, project, reconstruct, resize_bilinear, to_feature_vector,
)

from oracles import bilinear_pixel, covariance, jacobi_eigh


class TestGrayWorld:
    def test_balanced_image_unchanged(self):
        img = np.full((3, 4, 3), 0.5)
        np.testing.assert_allclose(gray_world_normalize(img), img)

    def test_hand_computed_gains(self):
        img = np.empty((2, 2, 3))
        img[..., 0] = [[0.7, 0.9], [0.8, 0.8]]
        img[..., 1] = [[0.3, 0.5], [0.4, 0.4]]
        img[..., 2] = [[0.1, 0.3], [0.2, 0.2]]
        out = gray_world_normalize(img)
        global_mean = (0.8 + 0.4 + 0.2) / 3  # 0.4666...
        gains = np.array([global_mean / 0.8, global_mean / 0.4, global_mean / 0.2])
        np.testing.assert_allclose(gains, [0.5833333333, 1.1666666667, 2.3333333333], atol=1e-9)
        np.testing.assert_allclose(out, img * gains, atol=1e-12)
        np.testing.assert_allclose(out.mean(axis=(0, 1)), global_mean, atol=1e-6)

    def test_zero_channel(self):
        img = np.full((2, 2, 3), 0.5)
        img[..., 2] = 0.0
        with pytest.raises(FeatureError, match="degenerate channel"):
            gray_world_normalize(img)

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, (5, 6, 3), elements=st.floats(0.01, 1.0)))
    def test_pre_clamp_means_equal(self, img):
        means = img.mean(axis=(0, 1))
        scaled = img * (means.mean() / means)
        np.testing.assert_allclose(scaled.mean(axis=(0, 1)), means.mean(), atol=1e-6)
        out = gray_world_normalize(img)
        assert out.min() >= 0.0 and out.max() <= 1.0
        np.testing.assert_allclose(out, np.clip(scaled, 0, 1), atol=1e-12)


class TestResize:
    def test_identity(self, rng):
        img = rng.random((5, 7, 3))
        np.testing.assert_array_equal(resize_bilinear(img, 5, 7), img)

    def test_checkerboard_to_single_pixel(self):
        img = np.array([[0.0, 1.0], [1.0, 0.0]])[:, :, None]
        out = resize_bilinear(img, 1, 1)
        # the centre (0.5, 0.5) weighs all four pixels by 1/4
        assert out.shape == (1, 1, 1)
        assert out[0, 0, 0] == pytest.approx(bilinear_pixel(img[:, :, 0], 0.5, 0.5)) == pytest.approx(0.5)

    @pytest.mark.parametrize("shape", [(1, 1), (3, 9), (17, 4), (32, 32)])
    def test_constant(self, shape):
        out = resize_bilinear(np.full((6, 5, 2), 0.37), *shape)
        assert out.shape == (*shape, 2)
        np.testing.assert_allclose(out, 0.37, atol=1e-15)

    def test_matches_direct_formula(self, rng):
        img = rng.random((7, 5, 1))
        out = resize_bilinear(img, 4, 9)
        for i in range(4):
            for j in range(9):
                y = (i + 0.5) * 7 / 4 - 0.5
                x = (j + 0.5) * 5 / 9 - 0.5
                assert out[i, j, 0] == pytest.approx(bilinear_pixel(img[:, :, 0], y, x), abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(arrays(np.float64, (6, 4, 3), elements=st.floats(0.0, 1.0)),
           st.integers(1, 12), st.integers(1, 12))
    def test_range_preserved(self, img, h, w):
        out = resize_bilinear(img, h, w)
        assert out.min() >= img.min() - 1e-12 and out.max() <= img.max() + 1e-12

    def test_bad_size(self):
        with pytest.raises(FeatureError):
            resize_bilinear(np.zeros((2, 2, 1)), 0, 3)


class TestFeatureVector:
    def test_row_major(self):
        img = np.array([[0.1, 0.2], [0.3, 0.4]])[:, :, None]
        np.testing.assert_allclose(to_feature_vector(img, 2), [0.1, 0.2, 0.3, 0.4])

    def test_grayscale_is_channel_mean(self):
        img = np.array([[[0.2, 0.4, 0.6]]])
        np.testing.assert_allclose(to_feature_vector(img, 1), [0.4])

    def test_constant(self):
        v = to_feature_vector(np.full((9, 9, 3), 0.25), 4)
        assert v.shape == (16,)
        np.testing.assert_allclose(v, 0.25)


class TestPCA:
    def test_diagonal_points(self):
        basis = fit_pca([[-1, -1], [0, 0], [1, 1]], 1)
        np.testing.assert_allclose(basis.components[0], [1 / math.sqrt(2), 1 / math.sqrt(2)], atol=1e-12)
        assert basis.explained_variance[0] == pytest.approx(2.0)
        assert project(basis, [1, 1])[0] == pytest.approx(math.sqrt(2))

    def test_single_axis(self):
        basis = fit_pca([[0, 3, 0], [0, -1, 0], [0, 5, 0], [0, 2, 0]], 1)
        np.testing.assert_allclose(basis.components[0], [0, 1, 0], atol=1e-12)

    def test_project_mean_is_zero(self, rng):
        basis = fit_pca(rng.normal(size=(30, 6)), 3)
        np.testing.assert_allclose(project(basis, basis.mean), 0.0, atol=1e-12)

    def test_affine_in_input(self, rng):
        basis = fit_pca(rng.normal(size=(30, 6)), 4)
        a, b = rng.normal(size=6), rng.normal(size=6)
        offset = basis.components @ basis.mean
        np.testing.assert_allclose(project(basis, a + b), project(basis, a) + project(basis, b) + offset, atol=1e-10)

    def test_invariants(self, rng):
        basis = fit_pca(rng.normal(size=(40, 7)) * np.arange(1, 8), 5)
        np.testing.assert_allclose(np.linalg.norm(basis.components, axis=1), 1.0, atol=1e-9)
        gram = basis.components @ basis.components.T
        assert np.all(np.abs(gram - np.eye(5)) <= 1e-6)
        ev = basis.explained_variance
        assert np.all(ev >= 0) and np.all(np.diff(ev) <= 0)
        for comp in basis.components:
            assert comp[np.argmax(np.abs(comp))] > 0

    def test_full_rank_reconstruction(self, rng):
        X = rng.normal(size=(25, 6))
        basis = fit_pca(X, 6)
        for v in rng.normal(size=(20, 6)):
            np.testing.assert_allclose(reconstruct(basis, project(basis, v)), v, atol=1e-6)

    def test_matches_jacobi_oracle(self, rng):
        for _ in range(10):
            X = rng.normal(size=(20, 5)) @ rng.normal(size=(5, 5))
            evals, evecs = jacobi_eigh(covariance(X))
            basis = fit_pca(X, 5)
            for j in range(5):
                assert abs(basis.components[j] @ evecs[:, j]) >= 1 - 1e-8
            np.testing.assert_allclose(basis.explained_variance, evals, rtol=1e-8)

    def test_errors(self):
        with pytest.raises(FeatureError, match="zero variance"):
            fit_pca([[1.0, 2.0]] * 4, 1)
        with pytest.raises(FeatureError):
            fit_pca([[1.0, 2.0]], 1)
        with pytest.raises(FeatureError):
            fit_pca([[1, 2], [3, 4], [5, 7]], 3)
        basis = fit_pca([[1, 2], [3, 4], [5, 7]], 1)
        with pytest.raises(FeatureError):
            project(basis, [1, 2, 3])
