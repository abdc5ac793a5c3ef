"""Image normalisation and the PCA path used for diversity features.

These features never touch the classifier, so representative selection stays
independent of the model being trained.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

_EPS = 1e-12


class FeatureError(ValueError):
    pass


def _as_hwc(image) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3:
        raise FeatureError("image must be H x W x C")
    return img


def gray_world_normalize(image) -> np.ndarray:
    """Scale each channel so its mean equals the mean over all channels."""
    img = _as_hwc(image)
    if img.shape[2] != 3:
        raise FeatureError("gray world needs 3 channels")
    means = img.mean(axis=(0, 1))
    if np.any(means <= _EPS):
        raise FeatureError("degenerate channel")
    gains = means.mean() / means
    return np.clip(img * gains, 0.0, 1.0)


def resize_coords(in_h: int, in_w: int, out_h: int, out_w: int):
    """Half-pixel-centre source coordinates for every output pixel."""
    ys = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    return np.meshgrid(ys, xs, indexing="ij")


def resize_bilinear(image, out_h: int, out_w: int) -> np.ndarray:
    if out_h < 1 or out_w < 1:
        raise FeatureError("output size must be >= 1")
    img = _as_hwc(image)
    h, w, _ = img.shape
    if (h, w) == (out_h, out_w):
        return img.copy()
    ys, xs = resize_coords(h, w, out_h, out_w)
    out = kernels.bilinear_sample(np.ascontiguousarray(img), ys, xs)
    return np.clip(out, 0.0, 1.0)


def to_feature_vector(image, side: int) -> np.ndarray:
    """Grayscale (channel mean), resize to side x side, flatten row-major."""
    if side < 1:
        raise FeatureError("side must be >= 1")
    gray = _as_hwc(image).mean(axis=2, keepdims=True)
    return resize_bilinear(gray, side, side).reshape(-1)


@dataclass(frozen=True)
class PCABasis:
    mean: np.ndarray
    components: np.ndarray  # (d_out, d_in), rows are unit vectors
    explained_variance: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.mean.shape[0]

    @property
    def output_dim(self) -> int:
        return self.components.shape[0]


def fit_pca(vectors, d_out: int) -> PCABasis:
    """Top ``d_out`` eigenvectors of the sample covariance (divisor n - 1).

    Each component is flipped so its largest-magnitude coordinate is positive.
    """
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise FeatureError("need at least 2 vectors of equal length")
    n, d = X.shape
    if not 1 <= d_out <= min(n - 1, d):
        raise FeatureError(f"d_out must be in [1, {min(n - 1, d)}]")
    if np.all(X == X[0]):
        raise FeatureError("zero variance")
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:d_out]
    comps = evecs[:, order].T.copy()
    var = np.clip(evals[order], 0.0, None)
    for j in range(d_out):
        if comps[j, np.argmax(np.abs(comps[j]))] < 0:
            comps[j] = -comps[j]
    comps /= np.linalg.norm(comps, axis=1, keepdims=True)
    return PCABasis(mean=mean, components=comps, explained_variance=var)


def project(basis: PCABasis, vector) -> np.ndarray:
    """Coordinates of ``vector - mean`` on the basis; accepts one vector or a row stack."""
    v = np.asarray(vector, dtype=np.float64)
    if v.shape[-1] != basis.input_dim:
        raise FeatureError(f"expected length {basis.input_dim}, got {v.shape[-1]}")
    return (v - basis.mean) @ basis.components.T


def reconstruct(basis: PCABasis, coords) -> np.ndarray:
    return np.asarray(coords, dtype=np.float64) @ basis.components + basis.mean
