"""Sample universe, labeled/unlabeled partition and the simulated annotator."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional

import numpy as np


class PoolError(ValueError):
    pass


def round_half_up(x: float) -> int:
    """Round to nearest integer, halves upward.

    A 1e-9 slack absorbs binary noise such as ``0.7 * 5 == 3.4999999999999996``.
    """
    return int(math.floor(x + 0.5 + 1e-9))


@dataclass
class Sample:
    id: int
    image: np.ndarray
    cached_feature: Optional[np.ndarray] = None

    def __post_init__(self):
        img = np.asarray(self.image, dtype=np.float64)
        if img.ndim == 2:
            img = img[:, :, None]
        if img.ndim != 3 or min(img.shape) < 1:
            raise PoolError(f"sample {self.id}: image must be H x W x C with all dims >= 1")
        if not np.all(np.isfinite(img)) or img.min() < 0.0 or img.max() > 1.0:
            raise PoolError(f"sample {self.id}: pixel values must be finite and in [0, 1]")
        self.image = img


class Oracle:
    """Total, noise-free label source over the registered ids."""

    def __init__(self, labels: Mapping[int, int]):
        self._labels = {int(k): int(v) for k, v in labels.items()}

    def __call__(self, sample_id: int) -> int:
        try:
            return self._labels[sample_id]
        except KeyError:
            raise PoolError(f"oracle has no label for id {sample_id}") from None

    def __contains__(self, sample_id) -> bool:
        return sample_id in self._labels

    def __len__(self) -> int:
        return len(self._labels)


@dataclass
class SamplePool:
    """Unlabeled set D_U plus the ordered labeled list D_A.

    Mutating methods act in place and return the pool so calls can chain.
    """

    samples: dict[int, Sample]
    num_classes: int
    unlabeled: set[int] = field(default=None)
    labeled: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        if self.num_classes < 1:
            raise PoolError("num_classes must be positive")
        if self.unlabeled is None:
            self.unlabeled = set(self.samples)
        self.total_available = len(self.samples)

    @classmethod
    def from_samples(cls, samples: Iterable[Sample], num_classes: int) -> "SamplePool":
        by_id: dict[int, Sample] = {}
        for s in samples:
            if s.id in by_id:
                raise PoolError(f"duplicate sample id {s.id}")
            by_id[s.id] = s
        return cls(samples=by_id, num_classes=num_classes)

    @property
    def labeled_ids(self) -> list[int]:
        return [i for i, _ in self.labeled]

    def unlabeled_sorted(self) -> list[int]:
        return sorted(self.unlabeled)

    def image(self, sample_id: int) -> np.ndarray:
        return self.samples[sample_id].image

    def init_random(self, fraction: float, seed: int, oracle: Oracle) -> "SamplePool":
        if not self.unlabeled:
            raise PoolError("empty pool")
        if not (0.0 < fraction <= 1.0):
            raise PoolError("invalid fraction")
        n = round_half_up(fraction * self.total_available)
        if n < 1:
            raise PoolError("invalid fraction")
        n = min(n, len(self.unlabeled))
        rng = np.random.default_rng(seed)
        chosen = rng.choice(np.array(self.unlabeled_sorted()), size=n, replace=False)
        return self.annotate([int(i) for i in chosen], oracle)

    def annotate(self, ids: Iterable[int], oracle: Oracle) -> "SamplePool":
        ids = [int(i) for i in ids]
        if len(set(ids)) != len(ids) or any(i not in self.unlabeled for i in ids):
            raise PoolError("invalid annotation target")
        labels = [oracle(i) for i in ids]
        for lab in labels:
            if not 0 <= lab < self.num_classes:
                raise PoolError(f"label {lab} outside [0, {self.num_classes})")
        for i, lab in zip(ids, labels):
            self.unlabeled.remove(i)
            self.labeled.append((i, lab))
        return self

    def class_counts(self) -> np.ndarray:
        counts = np.zeros(self.num_classes, dtype=np.int64)
        for _, lab in self.labeled:
            counts[lab] += 1
        return counts


def load_manifest(path, num_classes: Optional[int] = None) -> tuple[SamplePool, Oracle]:
    """Read an ``id,path,label`` CSV; image paths are relative to the CSV's folder."""
    from PIL import Image

    path = Path(path)
    samples, labels = [], {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["id", "path", "label"]:
            raise PoolError(f"{path}: expected header id,path,label")
        for row in reader:
            sid = int(row["id"])
            img_path = Path(row["path"])
            if not img_path.is_absolute():
                img_path = path.parent / img_path
            with Image.open(img_path) as im:
                arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
            samples.append(Sample(sid, arr))
            labels[sid] = int(row["label"])
    if num_classes is None:
        num_classes = max(labels.values()) + 1 if labels else 1
    return SamplePool.from_samples(samples, num_classes), Oracle(labels)
