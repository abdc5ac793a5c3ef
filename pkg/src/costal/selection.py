"""Per-round sample selection: certainty ranking, LSH diversity, and baselines."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .classifier import ClassifierError
from .hashing import build_index, round_robin_order
from .pool import SamplePool, round_half_up


@dataclass(frozen=True)
class SelectionConfig:
    gamma: float = 0.7
    round_fraction: float = 0.10
    K: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if not 0.0 < self.round_fraction <= 1.0:
            raise ValueError("round_fraction must be in (0, 1]")
        if self.K < 1:
            raise ValueError("K must be >= 1")


@dataclass
class SelectionRound:
    informative: list[int]
    representative: list[int]
    n_informative: int
    n_representative: int
    scores: dict[int, float] = field(default_factory=dict)
    buckets: dict[int, int] = field(default_factory=dict)

    @property
    def selected(self) -> list[int]:
        return self.informative + self.representative


def budget(total: int, config: SelectionConfig) -> tuple[int, int]:
    """Split one round's budget round(f * N) into (N_I, N_R)."""
    if total < 1:
        raise ValueError("total must be >= 1")
    round_total = round_half_up(config.round_fraction * total)
    n_inf = round_half_up(round_total * config.gamma)
    return n_inf, round_total - n_inf


def _stack(ids, inputs: Mapping[int, np.ndarray]) -> np.ndarray:
    return np.asarray([inputs[i] for i in ids], dtype=np.float64)


def certainty_scores(pool: SamplePool, model, inputs) -> dict[int, float]:
    ids = pool.unlabeled_sorted()
    if not ids:
        return {}
    if not getattr(model, "trained", False):
        raise ClassifierError("model is untrained")
    return dict(zip(ids, model.certainty(_stack(ids, inputs)).tolist()))


def entropy_scores(pool: SamplePool, model, inputs) -> dict[int, float]:
    ids = pool.unlabeled_sorted()
    if not ids:
        return {}
    if not getattr(model, "trained", False):
        raise ClassifierError("model is untrained")
    return dict(zip(ids, model.entropy(_stack(ids, inputs)).tolist()))


def select_informative(pool: SamplePool, model, n: int, inputs) -> list[int]:
    """Lowest-certainty unlabeled ids, ties by ascending id."""
    if n <= 0:
        return []
    scores = certainty_scores(pool, model, inputs)
    return sorted(scores, key=lambda i: (scores[i], i))[:n]


def select_entropy(pool: SamplePool, model, n: int, inputs) -> list[int]:
    """Highest-entropy unlabeled ids, ties by ascending id."""
    if n <= 0:
        return []
    scores = entropy_scores(pool, model, inputs)
    return sorted(scores, key=lambda i: (-scores[i], i))[:n]


def select_random(pool: SamplePool, n: int, seed: int) -> list[int]:
    ids = np.array(pool.unlabeled_sorted(), dtype=np.int64)
    n = min(max(n, 0), ids.size)
    if n == 0:
        return []
    rng = np.random.default_rng(seed)
    return [int(i) for i in rng.choice(ids, size=n, replace=False)]


def representative_order(pool: SamplePool, features: Mapping[int, np.ndarray], config: SelectionConfig):
    """Full round-robin order over the unlabeled set, and the bucket map used."""
    unl = pool.unlabeled_sorted()
    if not unl:
        return [], {}
    index = build_index({i: features[i] for i in unl}, config.K, config.seed)
    return round_robin_order(index, unl, config.seed), index.assignment


def select_representative(pool: SamplePool, features, config: SelectionConfig, n: int) -> list[int]:
    if n <= 0:
        return []
    order, _ = representative_order(pool, features, config)
    return order[:n]


def select_round(pool: SamplePool, model, inputs, features, config: SelectionConfig) -> SelectionRound:
    """One dual-criteria round.

    The informative pick is kept whole; representative picks that collide with
    it are skipped and the round-robin continues until N_R fresh ids are found
    or the pool runs dry.
    """
    n_inf, n_rep = budget(pool.total_available, config)
    scores = certainty_scores(pool, model, inputs) if n_inf else {}
    informative = sorted(scores, key=lambda i: (scores[i], i))[:n_inf]
    taken = set(informative)
    representative, buckets = [], {}
    if n_rep:
        order, buckets = representative_order(pool, features, config)
        for sid in order:
            if len(representative) == n_rep:
                break
            if sid not in taken:
                representative.append(sid)
                taken.add(sid)
    return SelectionRound(
        informative=informative,
        representative=representative,
        n_informative=n_inf,
        n_representative=n_rep,
        scores={i: scores[i] for i in informative},
        buckets={i: buckets[i] for i in representative},
    )
