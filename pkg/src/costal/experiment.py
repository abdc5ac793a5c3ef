"""Active-learning loop, multi-seed comparisons and CSV reporting."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import augmentation as aug
from .classifier import ClassifierConfig, SoftmaxClassifier, inverse_frequency_weights
from .features import fit_pca, gray_world_normalize, project, to_feature_vector
from .metrics import EvalResult, evaluate, mcnemar_p
from .pool import load_manifest
from .selection import SelectionConfig, budget, entropy_scores, select_entropy, select_random, select_round
from .synthetic import Split, SyntheticData, SyntheticSpec, generate_synthetic

log = logging.getLogger(__name__)

STRATEGIES = ("sa", "sa_as", "random", "entropy", "sa_mixup")
CURVE_HEADER = ["round", "query_ratio", "n_labeled", "split", "acc", "auc", "ap", "se", "sp"]
SELECTION_HEADER = ["round", "strategy", "id", "score", "criterion"]


class ConfigError(ValueError):
    pass


class ExperimentError(RuntimeError):
    pass


@dataclass(frozen=True)
class ClassifierSettings:
    """Classifier hyperparameters minus ``input_dim``, which the feature side fixes."""

    hidden_units: int = 0
    learning_rate: float = 1e-4
    epochs: int = 200
    batch_size: int = 32
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8


@dataclass(frozen=True)
class ExperimentConfig:
    strategy: str = "sa"
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    classifier: ClassifierSettings = field(default_factory=ClassifierSettings)
    init_fraction: float = 0.10
    max_rounds: int = 9
    stop_p: float = 0.05
    early_stop: bool = True
    cold_start: bool = False
    seed: int = 7
    dataset: Union[SyntheticSpec, str] = field(default_factory=SyntheticSpec)
    output_dir: Optional[str] = None
    feature_side: int = 16
    pca_side: int = 32
    pca_dim: int = 8
    gray_world: bool = True
    geometric: bool = False
    aggregation: str = "stitch"
    mixup_alpha: float = 0.2
    dump_aug_dir: Optional[str] = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}")
        if not 0.0 < self.stop_p < 1.0:
            raise ConfigError("stop_p must be in (0, 1)")
        if self.max_rounds < 1:
            raise ConfigError("max_rounds must be >= 1")
        if not 0.0 < self.init_fraction <= 1.0:
            raise ConfigError("init_fraction must be in (0, 1]")
        if self.aggregation not in ("stitch", "replicate"):
            raise ConfigError("aggregation must be 'stitch' or 'replicate'")
        if min(self.feature_side, self.pca_side, self.pca_dim) < 1:
            raise ConfigError("feature_side, pca_side and pca_dim must be >= 1")

    def with_(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)

    def classifier_config(self, num_classes: int) -> ClassifierConfig:
        c = self.classifier
        return ClassifierConfig(
            input_dim=self.feature_side ** 2, num_classes=num_classes, hidden_units=c.hidden_units,
            learning_rate=c.learning_rate, adam_beta1=c.adam_beta1, adam_beta2=c.adam_beta2,
            adam_epsilon=c.adam_epsilon, epochs=c.epochs, batch_size=c.batch_size,
            seed=sub_seed(self.seed, "init"), optimizer=c.optimizer,
        )


def sub_seed(seed: int, *keys) -> int:
    """Independent 32-bit seed derived from ``seed`` and a tag path."""
    words = [int(seed) & 0xFFFFFFFF]
    for k in keys:
        words.append(k if isinstance(k, int) else sum(ord(ch) * 131 ** i for i, ch in enumerate(k)) & 0xFFFFFFFF)
    return int(np.random.SeedSequence(words).generate_state(1)[0])


# ---------------------------------------------------------------------------
# learning curve
# ---------------------------------------------------------------------------

@dataclass
class CurveRow:
    round: int
    query_ratio: float
    n_labeled: int
    split: str
    result: EvalResult


@dataclass
class LearningCurve:
    strategy: str
    seed: int
    rows: list[CurveRow] = field(default_factory=list)
    selection_log: list[tuple] = field(default_factory=list)
    stop_reason: str = ""
    p_values: list[float] = field(default_factory=list)

    def split_rows(self, split: str = "test") -> list[CurveRow]:
        return [r for r in self.rows if r.split == split]

    def n_rounds(self) -> int:
        return len(self.split_rows("test"))

    def final(self, split: str = "test") -> EvalResult:
        return self.split_rows(split)[-1].result

    def acc_by_ratio(self, split: str = "test") -> dict[float, float]:
        return {round(r.query_ratio, 6): r.result.acc for r in self.split_rows(split)}

    def curve_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for r in self.rows:
            e = r.result
            w.writerow([r.round, _fmt(r.query_ratio), r.n_labeled, r.split,
                        _fmt(e.acc), _fmt(e.auc), _fmt(e.ap), _fmt(e.se), _fmt(e.sp)])
        return buf.getvalue()

    def selection_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SELECTION_HEADER)
        for rnd, strat, sid, score, crit in self.selection_log:
            w.writerow([rnd, strat, sid, "" if score is None else _fmt(score), crit])
        return buf.getvalue()

    def write(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "curve.csv").write_text(self.curve_csv())
        (d / "selection_log.csv").write_text(self.selection_csv())


def _fmt(x: float) -> str:
    return "nan" if x != x else f"{x:.10g}"


# ---------------------------------------------------------------------------
# data preparation
# ---------------------------------------------------------------------------

@dataclass
class PreparedData:
    data: SyntheticData
    images: dict[int, np.ndarray]  # pool images after normalisation
    inputs: dict[int, np.ndarray]  # classifier features of pool images
    val_X: np.ndarray
    test_X: np.ndarray
    encode: Callable[[np.ndarray], np.ndarray]  # normalised image -> classifier input


def load_dataset(dataset) -> SyntheticData:
    if isinstance(dataset, SyntheticSpec):
        return generate_synthetic(dataset)
    pool, oracle = load_manifest(dataset)
    return _split_manifest(pool, oracle)


def _split_manifest(pool, oracle) -> SyntheticData:
    """Stratified 70/10/20 split of a manifest dataset; the pool keeps the 70%."""
    from .pool import SamplePool

    ids = np.array(sorted(pool.samples), dtype=np.int64)
    labels = np.array([oracle(int(i)) for i in ids])
    rng = np.random.default_rng(0)
    parts = {"train": [], "val": [], "test": []}
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        n_tr, n_va = int(round(idx.size * 0.7)), int(round(idx.size * 0.1))
        parts["train"].append(idx[:n_tr])
        parts["val"].append(idx[n_tr:n_tr + n_va])
        parts["test"].append(idx[n_tr + n_va:])
    splits = {}
    for name, chunks in parts.items():
        sel = np.sort(np.concatenate(chunks))
        imgs = np.stack([pool.image(int(i)) for i in ids[sel]]) if sel.size else np.empty((0, 1, 1, 3))
        splits[name] = Split(ids=ids[sel], images=imgs, labels=labels[sel])
    train_ids = set(int(i) for i in splits["train"].ids)
    new_pool = SamplePool.from_samples((pool.samples[i] for i in sorted(train_ids)), pool.num_classes)
    return SyntheticData(pool=new_pool, oracle=oracle, train=splits["train"], val=splits["val"], test=splits["test"])


def _normalize(img, gray_world: bool):
    if gray_world and img.shape[2] == 3:
        return gray_world_normalize(img)
    return img


def prepare(data: SyntheticData, feature_side: int, gray_world: bool) -> PreparedData:
    images = {sid: _normalize(s.image, gray_world) for sid, s in data.pool.samples.items()}
    ids = sorted(images)
    raw = np.array([to_feature_vector(images[i], feature_side) for i in ids])
    # per-feature z-scoring from pool statistics; labels are never consulted
    mu = raw.mean(axis=0)
    sd = raw.std(axis=0) + 1e-8

    def encode(img):
        return (to_feature_vector(img, feature_side) - mu) / sd

    inputs = dict(zip(ids, (raw - mu) / sd))

    def split_X(split: Split):
        return np.array([encode(_normalize(im, gray_world)) for im in split.images])

    return PreparedData(data, images, inputs, split_X(data.val), split_X(data.test), encode)


def pca_features(prepared: PreparedData, side: int, dim: int) -> dict[int, np.ndarray]:
    """Pool-wide PCA projections of every pool image."""
    ids = sorted(prepared.images)
    vecs = np.array([to_feature_vector(prepared.images[i], side) for i in ids])
    basis = fit_pca(vecs, min(dim, len(ids) - 1, vecs.shape[1]))
    return dict(zip(ids, project(basis, vecs)))


# ---------------------------------------------------------------------------
# the loop
# ---------------------------------------------------------------------------

def should_stop(prev_correct, curr_correct, stop_p: float) -> tuple[bool, float]:
    """Stop once the paired change in validation correctness is not significant."""
    p = mcnemar_p(prev_correct, curr_correct)
    return p > stop_p, p


def _training_set(config: ExperimentConfig, prepared: PreparedData, labeled, round_idx: int, num_classes: int):
    X = [prepared.inputs[i] for i, _ in labeled]
    T = [np.eye(num_classes)[lab] for _, lab in labeled]
    extra = []
    if config.strategy == "sa_as":
        extra = aug.build_aggregated_set(
            labeled, prepared.images, sub_seed(config.seed, "aggregate", round_idx), mode=config.aggregation
        )
    elif config.strategy == "sa_mixup":
        extra = aug.build_mixup_set(
            labeled, prepared.images, sub_seed(config.seed, "mixup", round_idx), alpha=config.mixup_alpha
        )
    if extra and config.dump_aug_dir:
        aug.dump_pngs(extra, Path(config.dump_aug_dir) / f"round_{round_idx:03d}")
    for s in extra:
        X.append(prepared.encode(s.image))
        T.append(s.target(num_classes))
    if config.geometric:
        for k, (sid, lab) in enumerate(labeled):
            img = aug.geometric_augment(prepared.images[sid], sub_seed(config.seed, "geom", round_idx, k))
            X.append(prepared.encode(img))
            T.append(np.eye(num_classes)[lab])
    return np.array(X), np.array(T)


def run_experiment(
    config: ExperimentConfig,
    classifier_factory: Optional[Callable[[ClassifierConfig], object]] = None,
    data: Optional[SyntheticData] = None,
    prepared: Optional[PreparedData] = None,
) -> LearningCurve:
    """Run one active-learning experiment and return its learning curve.

    ``classifier_factory`` swaps in any model exposing ``train``,
    ``predict_proba``, ``certainty``, ``entropy``, ``reset`` and ``trained``.
    ``data``/``prepared`` let callers reuse an already generated dataset;
    pools are copied, never mutated.
    """
    if prepared is None:
        if data is None:
            data = load_dataset(config.dataset)
        prepared = prepare(data, config.feature_side, config.gray_world)
    data = prepared.data
    pool = _fresh_pool(data.pool)
    oracle = data.oracle
    num_classes = pool.num_classes
    if num_classes != 2:
        raise ExperimentError("the metric suite is binary; datasets must have two classes")

    ccfg = config.classifier_config(num_classes)
    model = (classifier_factory or SoftmaxClassifier)(ccfg)
    curve = LearningCurve(strategy=config.strategy, seed=config.seed)
    sel_cfg = replace(config.selection, seed=sub_seed(config.seed, "select"))
    uses_pca = config.strategy in ("sa", "sa_as", "sa_mixup")
    pca = None

    pool.init_random(config.init_fraction, sub_seed(config.seed, "init_pool"), oracle)
    N = pool.total_available
    prev_val_correct = None
    rnd = 0
    while True:
        try:
            labeled = list(pool.labeled)
            X, T = _training_set(config, prepared, labeled, rnd, num_classes)
            if config.cold_start and rnd > 0:
                model.reset()
            cw = inverse_frequency_weights(pool.class_counts())
            model.train(X, T, cw, shuffle_seed=sub_seed(config.seed, "shuffle", rnd))

            train_X = np.array([prepared.inputs[i] for i, _ in labeled])
            train_y = np.array([lab for _, lab in labeled])
            n_lab = len(labeled)
            ratio = n_lab / N
            val_scores = None
            for split, Xs, ys in (
                ("train", train_X, train_y),
                ("val", prepared.val_X, data.val.labels),
                ("test", prepared.test_X, data.test.labels),
            ):
                scores = model.predict_proba(Xs)[:, 1]
                curve.rows.append(CurveRow(rnd, ratio, n_lab, split, evaluate(scores, ys)))
                if split == "val":
                    val_scores = scores
            val_correct = (val_scores >= 0.5).astype(int) == data.val.labels

            if prev_val_correct is not None and config.early_stop:
                stop, p = should_stop(prev_val_correct, val_correct, config.stop_p)
                curve.p_values.append(p)
                if stop:
                    curve.stop_reason = f"not significant (p={p:.4g})"
                    break
            if rnd >= config.max_rounds:
                curve.stop_reason = "max_rounds"
                break
            if not pool.unlabeled:
                curve.stop_reason = "pool exhausted"
                break

            if uses_pca and pca is None:
                pca = pca_features(prepared, config.pca_side, config.pca_dim)
            ids = _picked_ids(config, pool, model, prepared, sel_cfg, rnd, N, pca, curve)
            pool.annotate(ids, oracle)
            prev_val_correct = val_correct
            rnd += 1
        except Exception as exc:
            raise ExperimentError(f"round {rnd} failed: {exc}") from exc

    if config.output_dir:
        curve.write(config.output_dir)
        if hasattr(model, "save"):
            model.save(Path(config.output_dir) / "model.ckpt")
    return curve


def _fresh_pool(pool):
    from .pool import SamplePool

    return SamplePool(samples=pool.samples, num_classes=pool.num_classes,
                      unlabeled=set(pool.unlabeled), labeled=list(pool.labeled))


def _picked_ids(config, pool, model, prepared, sel_cfg, rnd, N, pca, curve) -> list[int]:
    strategy = config.strategy
    tag = rnd + 1
    if strategy in ("sa", "sa_as", "sa_mixup"):
        cfg = replace(sel_cfg, seed=sub_seed(sel_cfg.seed, rnd))
        sr = select_round(pool, model, prepared.inputs, pca, cfg)
        for sid in sr.informative:
            curve.selection_log.append((tag, strategy, sid, sr.scores[sid], "informative"))
        for sid in sr.representative:
            curve.selection_log.append((tag, strategy, sid, float(sr.buckets[sid]), "representative"))
        return sr.selected
    n = sum(budget(N, sel_cfg))
    if strategy == "random":
        ids = select_random(pool, n, sub_seed(sel_cfg.seed, "random", rnd))
        for sid in ids:
            curve.selection_log.append((tag, strategy, sid, None, "random"))
        return ids
    ids = select_entropy(pool, model, n, prepared.inputs)
    scores = entropy_scores(pool, model, prepared.inputs)
    for sid in ids:
        curve.selection_log.append((tag, strategy, sid, scores[sid], "entropy"))
    return ids


# ---------------------------------------------------------------------------
# multi-run summaries
# ---------------------------------------------------------------------------

SUMMARY_HEADER = ["label", "strategy", "query_ratio", "n_runs", "mean_acc", "sd_acc",
                  "mean_diff_vs_ref", "sd_diff_vs_ref", "paired_diffs"]


@dataclass
class Summary:
    rows: list[dict]
    curves: dict[str, list[LearningCurve]]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=SUMMARY_HEADER, lineterminator="\n")
        w.writeheader()
        for row in self.rows:
            w.writerow({k: (_fmt(v) if isinstance(v, float) else v) for k, v in row.items()})
        return buf.getvalue()

    def write(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(self.to_csv())


def _summarize(labelled: dict[str, tuple[str, list[LearningCurve]]]) -> Summary:
    ratios = sorted({q for _, cs in labelled.values() for c in cs for q in c.acc_by_ratio()})
    ref_label = next(iter(labelled))
    ref_curves = labelled[ref_label][1]
    rows = []
    for label, (strategy, curves) in labelled.items():
        for q in ratios:
            accs = [c.acc_by_ratio().get(q) for c in curves]
            present = [a for a in accs if a is not None]
            diffs = []
            for a, rc in zip(accs, ref_curves):
                b = rc.acc_by_ratio().get(q)
                if a is not None and b is not None:
                    diffs.append(a - b)
            rows.append({
                "label": label,
                "strategy": strategy,
                "query_ratio": q,
                "n_runs": len(present),
                "mean_acc": float(np.mean(present)) if present else float("nan"),
                "sd_acc": float(np.std(present, ddof=1)) if len(present) > 1 else 0.0 if present else float("nan"),
                "mean_diff_vs_ref": float(np.mean(diffs)) if diffs else float("nan"),
                "sd_diff_vs_ref": float(np.std(diffs, ddof=1)) if len(diffs) > 1 else 0.0 if diffs else float("nan"),
                "paired_diffs": ";".join(_fmt(d) for d in diffs),
            })
    return Summary(rows=rows, curves={k: v[1] for k, v in labelled.items()})


def experiment_seeds(n_seeds: int, base: int = 0) -> list[int]:
    return [base + k for k in range(n_seeds)]


def compare_strategies(
    configs: Sequence[ExperimentConfig], n_seeds: int, labels: Optional[Sequence[str]] = None,
    base_seed: int = 0,
) -> Summary:
    """Run every config under the same seeds; the first config is the difference reference."""
    if not configs:
        raise ConfigError("no configs to compare")
    if any(c.dataset != configs[0].dataset for c in configs):
        raise ConfigError("all configs must share one dataset")
    labels = list(labels) if labels is not None else _default_labels(configs)
    if len(set(labels)) != len(labels):
        raise ConfigError("labels must be unique")
    data = load_dataset(configs[0].dataset)
    cache: dict[tuple, PreparedData] = {}
    out: dict[str, tuple[str, list[LearningCurve]]] = {}
    for label, cfg in zip(labels, configs):
        key = (cfg.feature_side, cfg.gray_world)
        if key not in cache:
            cache[key] = prepare(data, *key)
        curves = [
            run_experiment(cfg.with_(seed=s, output_dir=None), prepared=cache[key])
            for s in experiment_seeds(n_seeds, base_seed)
        ]
        out[label] = (cfg.strategy, curves)
    return _summarize(out)


def _default_labels(configs) -> list[str]:
    labels, seen = [], {}
    for c in configs:
        k = seen.get(c.strategy, 0)
        seen[c.strategy] = k + 1
        labels.append(c.strategy if k == 0 else f"{c.strategy}#{k}")
    return labels


def gamma_sweep(base: ExperimentConfig, gammas: Sequence[float], n_seeds: int = 1, base_seed: int = 0) -> Summary:
    """One curve set per gamma, all on the same seeds; the first gamma is the reference."""
    configs = [base.with_(selection=replace(base.selection, gamma=float(g))) for g in gammas]
    labels = [f"gamma={float(g):g}" for g in gammas]
    return compare_strategies(configs, n_seeds, labels=labels, base_seed=base_seed)
