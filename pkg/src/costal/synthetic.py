"""Desk-scale synthetic image data with small between-class and large within-class spread.

Both classes draw from the same ``modes_per_class`` texture prototypes (an
oriented grating mixed with a smooth random field, tinted per mode), with
Zipf-skewed mode frequencies. Class identity is only a global brightness
offset of ``class_separation * CLASS_SHIFT_PER_UNIT`` between the classes;
texture mode, contrast, illumination and strong pixel noise carry the rest
of the variance.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .pool import Oracle, Sample, SamplePool

SPLIT_FRACTIONS = (0.7, 0.1, 0.2)
CLASS_SHIFT_PER_UNIT = 0.1


class SyntheticError(ValueError):
    pass


@dataclass(frozen=True)
class SyntheticSpec:
    n_samples: int = 1000
    image_side: int = 32
    n_classes: int = 2
    modes_per_class: int = 4
    class_separation: float = 0.3
    noise_sigma: float = 0.25
    illumination_sigma: float = 0.0
    positive_fraction: float = 0.3
    seed: int = 7

    def validate(self):
        if self.n_classes != 2:
            raise SyntheticError("only binary data is supported")
        if self.modes_per_class < 1:
            raise SyntheticError("modes_per_class must be >= 1")
        if self.image_side < 8:
            raise SyntheticError("image_side must be >= 8")
        if self.n_samples < 20:
            raise SyntheticError("n_samples must be >= 20")
        if min(self.noise_sigma, self.class_separation, self.illumination_sigma) < 0:
            raise SyntheticError("noise_sigma, illumination_sigma and class_separation must be >= 0")
        if not 0.0 < self.positive_fraction < 1.0:
            raise SyntheticError("positive_fraction must be in (0, 1)")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class Split:
    ids: np.ndarray
    images: np.ndarray  # (n, H, W, 3)
    labels: np.ndarray


@dataclass
class SyntheticData:
    pool: SamplePool
    oracle: Oracle
    train: Split
    val: Split
    test: Split


def _smooth_field(rng, side: int) -> np.ndarray:
    f = gaussian_filter(rng.standard_normal((side, side)), sigma=side / 8.0, mode="wrap")
    return f / (np.abs(f).max() + 1e-12)


def _prototype(rng, side: int):
    yy, xx = np.mgrid[0:side, 0:side] / side
    freq = rng.uniform(1.5, 5.0)
    theta = rng.uniform(0.0, np.pi)
    phase = rng.uniform(0.0, 2 * np.pi)
    grating = np.sin(2 * np.pi * freq * (xx * np.cos(theta) + yy * np.sin(theta)) + phase)
    pattern = 0.6 * grating + 0.4 * _smooth_field(rng, side)
    tint = rng.uniform(0.7, 1.3, size=3)
    return pattern, tint


def generate_synthetic(spec: SyntheticSpec) -> SyntheticData:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    side = spec.image_side
    protos = [_prototype(rng, side) for _ in range(spec.modes_per_class)]
    mode_p = 1.0 / np.arange(1, spec.modes_per_class + 1)
    mode_p /= mode_p.sum()

    n_pos = int(round(spec.n_samples * spec.positive_fraction))
    labels = np.array([1] * n_pos + [0] * (spec.n_samples - n_pos), dtype=np.int64)
    labels = labels[rng.permutation(spec.n_samples)]

    images = np.empty((spec.n_samples, side, side, 3))
    for i, lab in enumerate(labels):
        pattern, tint = protos[int(rng.choice(spec.modes_per_class, p=mode_p))]
        contrast = rng.uniform(0.7, 1.3)
        illum = spec.illumination_sigma * rng.standard_normal()
        shift = CLASS_SHIFT_PER_UNIT * spec.class_separation * (lab - (spec.n_classes - 1) / 2.0)
        img = 0.5 + illum + shift + 0.2 * contrast * pattern[:, :, None] * tint
        img = img + spec.noise_sigma * rng.standard_normal(img.shape)
        images[i] = np.clip(img, 0.0, 1.0)

    # stratified 70/10/20
    parts = {"train": [], "val": [], "test": []}
    for c in range(spec.n_classes):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(idx.size)]
        n_tr = int(round(idx.size * SPLIT_FRACTIONS[0]))
        n_va = int(round(idx.size * SPLIT_FRACTIONS[1]))
        parts["train"].append(idx[:n_tr])
        parts["val"].append(idx[n_tr:n_tr + n_va])
        parts["test"].append(idx[n_tr + n_va:])
    splits = {}
    for name, chunks in parts.items():
        ids = np.sort(np.concatenate(chunks))
        splits[name] = Split(ids=ids, images=images[ids], labels=labels[ids])

    tr = splits["train"]
    pool = SamplePool.from_samples(
        (Sample(int(i), img) for i, img in zip(tr.ids, tr.images)), spec.n_classes
    )
    oracle = Oracle({int(i): int(y) for i, y in zip(tr.ids, tr.labels)})
    return SyntheticData(pool=pool, oracle=oracle, train=tr, val=splits["val"], test=splits["test"])
