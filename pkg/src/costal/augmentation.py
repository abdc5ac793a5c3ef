"""Intra-class 2x2 aggregation, its replicate ablation, mix-up, and geometric jitter."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from . import kernels
from .features import resize_bilinear


class AugmentationError(ValueError):
    pass


@dataclass
class AugmentedSample:
    image: np.ndarray
    label: int
    provenance: list[int]
    # ((label_a, weight_a), (label_b, weight_b)) for mix-up, None otherwise
    soft_label: Optional[tuple] = field(default=None)

    def target(self, num_classes: int) -> np.ndarray:
        t = np.zeros(num_classes)
        if self.soft_label is None:
            t[self.label] = 1.0
        else:
            for lab, w in self.soft_label:
                t[lab] += w
        return t


def compose_2x2(images: Sequence[np.ndarray]) -> np.ndarray:
    """Tile four equal-shape images as [[0, 1], [2, 3]] without resampling."""
    if len(images) != 4:
        raise AugmentationError("need exactly four tiles")
    tiles = [np.asarray(im, dtype=np.float64) for im in images]
    tiles = [t[:, :, None] if t.ndim == 2 else t for t in tiles]
    if any(t.shape != tiles[0].shape for t in tiles):
        raise AugmentationError("heterogeneous tile shapes")
    top = np.concatenate(tiles[:2], axis=1)
    bottom = np.concatenate(tiles[2:], axis=1)
    return np.concatenate([top, bottom], axis=0)


def stitch_2x2(images, label: int, target_h: int, target_w: int, provenance=None) -> AugmentedSample:
    if target_h < 1 or target_w < 1:
        raise AugmentationError("target size must be >= 1")
    composite = compose_2x2(images)
    return AugmentedSample(
        image=resize_bilinear(composite, target_h, target_w),
        label=int(label),
        provenance=list(provenance) if provenance is not None else [],
    )


def replicate_4(image, label: int, target_h: int, target_w: int, sample_id: Optional[int] = None) -> AugmentedSample:
    prov = [sample_id] * 4 if sample_id is not None else None
    return stitch_2x2([image] * 4, label, target_h, target_w, provenance=prov)


def mixup(image_a, label_a: int, image_b, label_b: int, lam: float, provenance=None) -> AugmentedSample:
    """Convex pixel blend with the matching soft label pair."""
    a = np.asarray(image_a, dtype=np.float64)
    b = np.asarray(image_b, dtype=np.float64)
    if a.shape != b.shape:
        raise AugmentationError("mix-up images differ in shape")
    if not 0.0 <= lam <= 1.0:
        raise AugmentationError("lambda must be in [0, 1]")
    return AugmentedSample(
        image=lam * a + (1.0 - lam) * b,
        label=int(label_a if lam >= 0.5 else label_b),
        provenance=list(provenance) if provenance is not None else [],
        soft_label=((int(label_a), float(lam)), (int(label_b), 1.0 - float(lam))),
    )


# ---------------------------------------------------------------------------
# geometric augmentation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeometricParams:
    rotation_deg: float = 0.0
    shear_deg: float = 0.0
    scale: float = 1.0
    flip_h: bool = False
    flip_v: bool = False


def sample_geometric_params(seed: int) -> GeometricParams:
    rng = np.random.default_rng(seed)
    return GeometricParams(
        rotation_deg=float(rng.uniform(-90.0, 90.0)),
        shear_deg=float(rng.uniform(-20.0, 20.0)),
        scale=float(rng.uniform(0.8, 1.2)),
        flip_h=bool(rng.random() < 0.5),
        flip_v=bool(rng.random() < 0.5),
    )


def geometric_matrix(params: GeometricParams) -> np.ndarray:
    """Forward 2x2 map on centred (x, y): rotate, shear, scale, then flip."""
    t = math.radians(params.rotation_deg)
    rot = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    shear = np.array([[1.0, math.tan(math.radians(params.shear_deg))], [0.0, 1.0]])
    scale = np.eye(2) * params.scale
    flip = np.diag([-1.0 if params.flip_h else 1.0, -1.0 if params.flip_v else 1.0])
    return flip @ scale @ shear @ rot


def affine_warp(image, matrix: np.ndarray) -> np.ndarray:
    """Apply a centred 2x2 forward map by inverse bilinear sampling, edges replicated."""
    img = np.ascontiguousarray(np.asarray(image, dtype=np.float64))
    squeeze = img.ndim == 2
    if squeeze:
        img = img[:, :, None]
    h, w, _ = img.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.meshgrid(np.arange(h) - cy, np.arange(w) - cx, indexing="ij")
    inv = np.linalg.inv(matrix)
    src_x = inv[0, 0] * xx + inv[0, 1] * yy + cx
    src_y = inv[1, 0] * xx + inv[1, 1] * yy + cy
    # snap float noise so exact-integer coordinates stay exact
    src_x = np.where(np.abs(src_x - np.round(src_x)) < 1e-9, np.round(src_x), src_x)
    src_y = np.where(np.abs(src_y - np.round(src_y)) < 1e-9, np.round(src_y), src_y)
    out = np.clip(kernels.bilinear_sample(img, src_y, src_x), 0.0, 1.0)
    return out[:, :, 0] if squeeze else out


def geometric_augment(image, seed: int, params: Optional[GeometricParams] = None) -> np.ndarray:
    """Random rotation, shear, scale and flips; ``params`` overrides the draw."""
    if params is None:
        params = sample_geometric_params(seed)
    return affine_warp(image, geometric_matrix(params))


# ---------------------------------------------------------------------------
# set builders
# ---------------------------------------------------------------------------

def _by_class(labeled):
    groups: dict[int, list[int]] = {}
    for sid, lab in labeled:
        groups.setdefault(int(lab), []).append(int(sid))
    return groups


def build_aggregated_set(
    labeled: Sequence[tuple[int, int]],
    images: Mapping[int, np.ndarray],
    seed: int,
    target_shape: Optional[tuple[int, int]] = None,
    mode: str = "stitch",
) -> list[AugmentedSample]:
    """One aggregated image per labeled anchor.

    ``mode="stitch"`` pairs each anchor with three same-class companions drawn
    uniformly with replacement; ``mode="replicate"`` tiles the anchor with
    itself. Output keeps the anchor's source resolution unless ``target_shape``
    is given.
    """
    if mode not in ("stitch", "replicate"):
        raise AugmentationError(f"unknown aggregation mode {mode!r}")
    groups = _by_class(labeled)
    rng = np.random.default_rng(seed)
    out = []
    for sid, lab in labeled:
        sid, lab = int(sid), int(lab)
        if mode == "stitch":
            members = groups[lab]
            companions = [members[i] for i in rng.integers(0, len(members), size=3)]
        else:
            companions = [sid] * 3
        prov = [sid] + companions
        h, w = target_shape or images[sid].shape[:2]
        out.append(stitch_2x2([images[i] for i in prov], lab, h, w, provenance=prov))
    return out


def build_mixup_set(
    labeled: Sequence[tuple[int, int]],
    images: Mapping[int, np.ndarray],
    seed: int,
    alpha: float = 0.2,
) -> list[AugmentedSample]:
    """One blend per anchor with a partner drawn from a different class.

    Anchors whose class is the only one present are skipped.
    """
    groups = _by_class(labeled)
    rng = np.random.default_rng(seed)
    out = []
    for sid, lab in labeled:
        others = [i for c, ids in groups.items() if c != lab for i in ids]
        if not others:
            continue
        partner = others[int(rng.integers(0, len(others)))]
        partner_label = next(c for c, ids in groups.items() if partner in ids)
        lam = float(rng.beta(alpha, alpha))
        out.append(mixup(images[sid], lab, images[partner], partner_label, lam, provenance=[sid, partner]))
    return out


def dump_pngs(samples: Sequence[AugmentedSample], directory, prefix: str = "aug") -> list[Path]:
    from PIL import Image

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, s in enumerate(samples):
        img = np.clip(np.round(s.image * 255.0), 0, 255).astype(np.uint8)
        if img.ndim == 3 and img.shape[2] == 1:
            img = img[:, :, 0]
        path = directory / f"{prefix}_{k:05d}_c{s.label}.png"
        Image.fromarray(img).save(path)
        paths.append(path)
    return paths
