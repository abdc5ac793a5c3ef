"""p-stable LSH folded onto exactly K buckets, plus round-robin bucket fetching."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

N_PROJECTIONS = 4
HASH_BASE = 31
MIN_WIDTH = 1e-9


class HashingError(ValueError):
    pass


@dataclass
class LSHIndex:
    projections: np.ndarray  # (b, d), unit rows
    offsets: np.ndarray  # (b,)
    bucket_width: float
    num_buckets: int
    assignment: dict[int, int]

    def bucket_members(self) -> dict[int, list[int]]:
        members: dict[int, list[int]] = {}
        for sid in sorted(self.assignment):
            members.setdefault(self.assignment[sid], []).append(sid)
        return members


def _buckets(index_parts, X: np.ndarray) -> np.ndarray:
    projections, offsets, width, k = index_parts
    codes = np.floor((X @ projections.T + offsets) / width).astype(np.int64)
    weights = HASH_BASE ** np.arange(codes.shape[1], dtype=np.int64)
    # numpy's % follows the divisor's sign, so negative sums land in [0, k)
    return (codes @ weights) % k


def build_index(features: Mapping[int, np.ndarray], K: int, seed: int) -> LSHIndex:
    if K < 1:
        raise HashingError("K must be >= 1")
    if not features:
        raise HashingError("no features to index")
    ids = sorted(features)
    vecs = [np.asarray(features[i], dtype=np.float64) for i in ids]
    if len({v.shape for v in vecs}) != 1 or vecs[0].ndim != 1:
        raise HashingError("feature vectors must share one length")
    X = np.stack(vecs)
    if not np.all(np.isfinite(X)):
        raise HashingError("features must be finite")
    rng = np.random.default_rng(seed)
    proj = rng.standard_normal((N_PROJECTIONS, X.shape[1]))
    proj /= np.linalg.norm(proj, axis=1, keepdims=True)
    values = X @ proj.T
    lo, hi = np.percentile(values, [5.0, 95.0])
    width = max((hi - lo) / K, MIN_WIDTH)
    offsets = rng.uniform(0.0, width, size=N_PROJECTIONS)
    buckets = _buckets((proj, offsets, width, K), X)
    return LSHIndex(
        projections=proj,
        offsets=offsets,
        bucket_width=float(width),
        num_buckets=K,
        assignment={sid: int(b) for sid, b in zip(ids, buckets)},
    )


def bucket_of(index: LSHIndex, feature) -> int:
    x = np.asarray(feature, dtype=np.float64)
    if x.shape != (index.projections.shape[1],):
        raise HashingError(f"feature length must be {index.projections.shape[1]}")
    parts = (index.projections, index.offsets, index.bucket_width, index.num_buckets)
    return int(_buckets(parts, x[None, :])[0])


def round_robin_order(index: LSHIndex, candidates: Iterable[int], seed: int) -> list[int]:
    """Every candidate once: one per bucket per pass, buckets ascending.

    Within a bucket the visiting order is a seeded shuffle of the sorted ids.
    """
    cands = sorted(set(candidates))
    missing = [c for c in cands if c not in index.assignment]
    if missing:
        raise HashingError(f"candidates not indexed: {missing[:5]}")
    rng = np.random.default_rng(seed)
    queues = []
    for b in range(index.num_buckets):
        members = [c for c in cands if index.assignment[c] == b]
        if members:
            queues.append([members[i] for i in rng.permutation(len(members))])
    order = []
    depth = 0
    while queues:
        for q in queues:
            order.append(q[depth])
        depth += 1
        queues = [q for q in queues if len(q) > depth]
    return order


def uniform_fetch(index: LSHIndex, candidates: Iterable[int], n: int, seed: int) -> list[int]:
    if n < 0:
        raise HashingError("n must be >= 0")
    return round_robin_order(index, candidates, seed)[:n]
