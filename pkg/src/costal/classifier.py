"""Softmax classifiers trained with class-weighted cross-entropy.

Two shapes share one code path: a linear softmax model (``hidden_units=0``)
and a single tanh hidden layer. Training runs in :mod:`costal.kernels`.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import kernels


class ClassifierError(RuntimeError):
    pass


OPTIMIZERS = {"adam": kernels.OPT_ADAM, "sgd": kernels.OPT_SGD}


@dataclass(frozen=True)
class ClassifierConfig:
    input_dim: int
    num_classes: int = 2
    hidden_units: int = 0
    learning_rate: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0
    optimizer: str = "adam"

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError("input_dim must be positive")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.hidden_units < 0:
            raise ValueError("hidden_units must be >= 0")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError("learning_rate, batch_size must be positive and epochs >= 0")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {sorted(OPTIMIZERS)}")

    def with_(self, **kw) -> "ClassifierConfig":
        return replace(self, **kw)


class SoftmaxClassifier:
    """Probabilistic classifier over fixed-length feature vectors."""

    def __init__(self, config: ClassifierConfig, init: str = "uniform"):
        self.config = config
        self.trained = False
        self.last_loss: Optional[float] = None
        self.loss_history: Optional[np.ndarray] = None
        self.reset(init)

    @property
    def hidden(self) -> int:
        return self.config.hidden_units

    def reset(self, init: str = "uniform"):
        """(Re)initialise parameters; ``init`` is ``"uniform"`` or ``"zeros"``."""
        cfg = self.config
        d, h, c = cfg.input_dim, cfg.hidden_units, cfg.num_classes
        shapes = [(d, h or c), (h or c,)]
        if h:
            shapes += [(h, c), (c,)]
        fan_ins = [d, d, h, h]
        rng = np.random.default_rng(cfg.seed)
        params = []
        for shape, fan_in in zip(shapes, fan_ins):
            if init == "zeros":
                params.append(np.zeros(shape))
            elif init == "uniform":
                bound = 1.0 / np.sqrt(fan_in)
                params.append(rng.uniform(-bound, bound, size=shape))
            else:
                raise ValueError(f"unknown init {init!r}")
        if not h:
            params += [np.zeros((0, 0)), np.zeros(0)]
        self.W1, self.b1, self.W2, self.b2 = params
        self.trained = False

    def parameters(self) -> list[np.ndarray]:
        if self.hidden:
            return [self.W1, self.b1, self.W2, self.b2]
        return [self.W1, self.b1]

    def logits(self, X) -> np.ndarray:
        X = self._check(X)
        if self.hidden:
            return np.tanh(X @ self.W1 + self.b1) @ self.W2 + self.b2
        return X @ self.W1 + self.b1

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.config.input_dim:
            raise ClassifierError(f"feature length {X.shape[-1]} != input_dim {self.config.input_dim}")
        return X

    def train(self, X, targets, class_weights=None, epochs: Optional[int] = None,
              shuffle_seed: Optional[int] = None) -> float:
        """Fit on ``X`` (n, d) against integer labels or soft targets (n, C).

        Mini-batch order comes from ``shuffle_seed`` (default: the config seed).
        Returns the full-data loss after the final epoch.
        """
        cfg = self.config
        X = np.ascontiguousarray(self._check(X))
        if X.ndim != 2 or X.shape[0] == 0:
            raise ClassifierError("empty training data")
        T = soft_targets(targets, cfg.num_classes)
        if T.shape[0] != X.shape[0]:
            raise ClassifierError("targets and features differ in length")
        cw = np.ones(cfg.num_classes) if class_weights is None else np.asarray(class_weights, dtype=np.float64)
        if cw.shape != (cfg.num_classes,) or np.any(cw <= 0):
            raise ClassifierError("class_weights must be positive, one per class")
        epochs = cfg.epochs if epochs is None else epochs
        rng = np.random.default_rng(cfg.seed if shuffle_seed is None else shuffle_seed)
        n = X.shape[0]
        orders = np.empty((epochs, n), dtype=np.int64)
        for e in range(epochs):
            orders[e] = rng.permutation(n)
        losses = kernels.train_softmax(
            self.W1, self.b1, self.W2, self.b2, X, T, cw, orders, cfg.batch_size, self.hidden,
            cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon, OPTIMIZERS[cfg.optimizer],
        )
        if not np.all(np.isfinite(losses)):
            raise ClassifierError("diverged")
        self.loss_history = np.asarray(losses)
        self.last_loss = float(losses[-1])
        self.trained = True
        return self.last_loss

    def loss(self, X, targets, class_weights=None) -> float:
        X = np.ascontiguousarray(self._check(X))
        T = soft_targets(targets, self.config.num_classes)
        cw = np.ones(self.config.num_classes) if class_weights is None else np.asarray(class_weights, dtype=np.float64)
        return float(kernels.forward_loss_np(self.W1, self.b1, self.W2, self.b2, X, T, cw, self.hidden))

    def gradients(self, X, targets, class_weights=None) -> list[np.ndarray]:
        """Analytic full-batch gradient of :meth:`loss`, same layout as :meth:`parameters`."""
        X = np.ascontiguousarray(self._check(X))
        T = soft_targets(targets, self.config.num_classes)
        cw = np.ones(self.config.num_classes) if class_weights is None else np.asarray(class_weights, dtype=np.float64)
        grads = [np.zeros_like(p) for p in (self.W1, self.b1, self.W2, self.b2)]
        idx = np.arange(X.shape[0])
        kernels.batch_grad_np(self.W1, self.b1, self.W2, self.b2, X, T, cw, idx, self.hidden, *grads)
        return grads if self.hidden else grads[:2]

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.logits(X))

    def certainty(self, X) -> np.ndarray:
        self._require_trained()
        return self.predict_proba(X).max(axis=-1)

    def entropy(self, X) -> np.ndarray:
        self._require_trained()
        return entropy(self.predict_proba(X))

    def _require_trained(self):
        if not self.trained:
            raise ClassifierError("model is untrained")

    # -- checkpoints -----------------------------------------------------

    def save(self, path):
        """Write the binary checkpoint described in the README."""
        cfg = self.config
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<4I", _VERSION, cfg.input_dim, cfg.hidden_units, cfg.num_classes))
            for p in self.parameters():
                fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path, config: Optional[ClassifierConfig] = None) -> "SoftmaxClassifier":
        raw = Path(path).read_bytes()
        if raw[:4] != _MAGIC:
            raise ClassifierError(f"{path}: not a checkpoint")
        version, d, h, c = struct.unpack("<4I", raw[4:20])
        if version != _VERSION:
            raise ClassifierError(f"{path}: unsupported checkpoint version {version}")
        if config is None:
            config = ClassifierConfig(input_dim=d, hidden_units=h, num_classes=c)
        elif (config.input_dim, config.hidden_units, config.num_classes) != (d, h, c):
            raise ClassifierError(f"{path}: header ({d}, {h}, {c}) does not match config")
        model = cls(config, init="zeros")
        flat = np.frombuffer(raw[20:], dtype="<f8") if (len(raw) - 20) % 8 == 0 else np.zeros(0)
        if flat.size != sum(p.size for p in model.parameters()):
            raise ClassifierError(f"{path}: parameter payload has wrong length")
        pos = 0
        for p in model.parameters():
            p[...] = flat[pos:pos + p.size].reshape(p.shape)
            pos += p.size
        model.trained = True
        return model


_MAGIC = b"CSTL"
_VERSION = 1


def softmax(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def entropy(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    logs = np.log(np.where(p > 0, p, 1.0))
    return -(p * logs).sum(axis=-1)


def soft_targets(targets, num_classes: int) -> np.ndarray:
    t = np.asarray(targets)
    if t.ndim == 1:
        t = t.astype(np.int64)
        if np.any((t < 0) | (t >= num_classes)):
            raise ClassifierError("label out of range")
        out = np.zeros((t.shape[0], num_classes))
        out[np.arange(t.shape[0]), t] = 1.0
        return out
    t = np.ascontiguousarray(t, dtype=np.float64)
    if t.ndim != 2 or t.shape[1] != num_classes:
        raise ClassifierError("soft targets must be (n, num_classes)")
    return t


def inverse_frequency_weights(counts) -> np.ndarray:
    """Inverse class frequency, rescaled to mean 1; empty classes count as 1."""
    counts = np.maximum(np.asarray(counts, dtype=np.float64), 1.0)
    w = 1.0 / counts
    return w / w.mean()
