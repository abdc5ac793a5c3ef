import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from costal.classifier import (
    ClassifierConfig, ClassifierError, SoftmaxClassifier, entropy, inverse_frequency_weights, soft_targets, softmax,
)


def blobs(seed=0, n=100):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal([2, 0], 0.3, (n, 2)), rng.normal([-2, 0], 0.3, (n, 2))])
    y = np.r_[np.zeros(n), np.ones(n)].astype(np.int64)
    return X, y


def numeric_gradient(model, X, T, cw, h=1e-5):
    grads = []
    for p in model.parameters():
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for k in range(flat.size):
            old = flat[k]
            flat[k] = old + h
            up = model.loss(X, T, cw)
            flat[k] = old - h
            down = model.loss(X, T, cw)
            flat[k] = old
            gflat[k] = (up - down) / (2 * h)
        grads.append(g)
    return grads


class TestConfig:
    @pytest.mark.parametrize("kw", [
        {"input_dim": 0}, {"input_dim": 2, "num_classes": 1}, {"input_dim": 2, "hidden_units": -1},
        {"input_dim": 2, "learning_rate": 0.0}, {"input_dim": 2, "batch_size": 0}, {"input_dim": 2, "optimizer": "rmsprop"},
    ])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            ClassifierConfig(**kw)

    def test_defaults(self):
        cfg = ClassifierConfig(input_dim=3)
        assert (cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon) == (1e-4, 0.9, 0.999, 1e-8)
        assert cfg.optimizer == "adam"


class TestInit:
    @pytest.mark.parametrize("hidden", [0, 5])
    def test_uniform_bounds(self, hidden):
        m = SoftmaxClassifier(ClassifierConfig(input_dim=9, hidden_units=hidden, num_classes=3, seed=4))
        fan_ins = [9, 9, hidden, hidden]
        for p, fan_in in zip(m.parameters(), fan_ins):
            assert np.all(np.abs(p) <= 1 / math.sqrt(fan_in))
            assert np.abs(p).max() > 0

    def test_zero_model_is_uniform(self, rng):
        m = SoftmaxClassifier(ClassifierConfig(input_dim=4, num_classes=3), init="zeros")
        np.testing.assert_allclose(m.predict_proba(rng.normal(size=(5, 4))), 1 / 3)

    def test_epochs_zero_keeps_init(self):
        X, y = blobs()
        m = SoftmaxClassifier(ClassifierConfig(input_dim=2, seed=3))
        before = [p.copy() for p in m.parameters()]
        initial = m.loss(X, y)
        final = m.train(X, y, epochs=0)
        for a, b in zip(before, m.parameters()):
            np.testing.assert_array_equal(a, b)
        assert final == pytest.approx(initial, rel=1e-12)


class TestSoftmaxAndScores:
    def test_hand_computed(self):
        p = softmax([2.0, 0.0])
        np.testing.assert_allclose(p, [math.e ** 2 / (math.e ** 2 + 1), 1 / (math.e ** 2 + 1)])
        np.testing.assert_allclose(p, [0.8808, 0.1192], atol=5e-5)
        assert p.max() == pytest.approx(0.8808, abs=5e-5)
        exact = -(p[0] * math.log(p[0]) + p[1] * math.log(p[1]))
        assert entropy(p) == pytest.approx(exact, rel=1e-12)
        # 0.3652 is the commonly quoted figure from 4-digit probabilities
        assert entropy(p) == pytest.approx(0.3652, abs=2e-4)

    def test_entropy_edges(self):
        assert entropy([0.5, 0.5]) == pytest.approx(math.log(2))
        assert entropy([1.0, 0.0]) == 0.0
        assert entropy([0.2, 0.3, 0.5]) == pytest.approx(entropy([0.5, 0.2, 0.3]))

    def test_large_logits_stable(self):
        np.testing.assert_allclose(softmax([1000.0, 0.0]), [1.0, 0.0])

    @pytest.mark.parametrize("hidden,classes", [(0, 2), (0, 5), (6, 2), (4, 3)])
    def test_normalization(self, rng, hidden, classes):
        m = SoftmaxClassifier(ClassifierConfig(input_dim=7, hidden_units=hidden, num_classes=classes, seed=2))
        P = m.predict_proba(rng.normal(scale=5.0, size=(1000, 7)))
        assert P.shape == (1000, classes)
        assert np.all(P >= 0)
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-9)

    def test_scores_need_training(self, rng):
        m = SoftmaxClassifier(ClassifierConfig(input_dim=2))
        with pytest.raises(ClassifierError, match="untrained"):
            m.certainty(rng.normal(size=(3, 2)))
        with pytest.raises(ClassifierError, match="untrained"):
            m.entropy(rng.normal(size=(3, 2)))

    def test_certainty_is_max_probability(self, rng):
        X, y = blobs()
        m = SoftmaxClassifier(ClassifierConfig(input_dim=2, epochs=3))
        m.train(X, y)
        Z = rng.normal(size=(20, 2))
        np.testing.assert_allclose(m.certainty(Z), m.predict_proba(Z).max(axis=1))
        assert np.all(m.certainty(Z) >= 0.5)

    def test_length_mismatch(self):
        m = SoftmaxClassifier(ClassifierConfig(input_dim=3))
        with pytest.raises(ClassifierError):
            m.predict_proba(np.zeros(4))

    @settings(max_examples=80, deadline=None)
    @given(arrays(np.float64, (4,), elements=st.floats(-50, 50)))
    def test_softmax_properties(self, z):
        p = softmax(z)
        assert abs(p.sum() - 1) <= 1e-9
        np.testing.assert_allclose(softmax(z + 3.0), p, atol=1e-12)
        assert 0.0 <= entropy(p) <= math.log(4) + 1e-12


class TestTraining:
    def test_separable_blobs(self):
        X, y = blobs()
        for seed in range(3):
            m = SoftmaxClassifier(ClassifierConfig(input_dim=2, epochs=500, learning_rate=1e-3, seed=seed))
            m.train(X, y)
            assert (m.predict_proba(X).argmax(axis=1) == y).mean() >= 0.99

    def test_loss_nearly_monotone(self):
        X, y = blobs()
        m = SoftmaxClassifier(ClassifierConfig(input_dim=2, epochs=200, learning_rate=1e-3))
        m.train(X, y)
        h = m.loss_history
        assert h.shape == (201,)
        assert np.all(h[1:] <= 1.05 * h[:-1])
        assert h[-1] < h[0]

    @pytest.mark.parametrize("w", [0.5, 3.0, 100.0])
    def test_uniform_class_weights_are_scale_free(self, w):
        X, y = blobs()
        a = SoftmaxClassifier(ClassifierConfig(input_dim=2, epochs=50, seed=1))
        b = SoftmaxClassifier(ClassifierConfig(input_dim=2, epochs=50, seed=1))
        a.train(X, y)
        b.train(X, y, class_weights=[w, w])
        for p, q in zip(a.parameters(), b.parameters()):
            np.testing.assert_allclose(p, q, atol=1e-6)

    @pytest.mark.parametrize("hidden", [0, 8])
    def test_bit_determinism(self, hidden):
        X, y = blobs()
        runs = []
        for _ in range(2):
            m = SoftmaxClassifier(ClassifierConfig(input_dim=2, hidden_units=hidden, epochs=30, seed=5))
            m.train(X, y, class_weights=[0.7, 1.3])
            runs.append(m.parameters())
        for p, q in zip(*runs):
            np.testing.assert_array_equal(p, q)

    def test_shuffle_seed_changes_trajectory(self):
        X, y = blobs()
        a = SoftmaxClassifier(ClassifierConfig(input_dim=2, epochs=5, batch_size=8))
        b = SoftmaxClassifier(ClassifierConfig(input_dim=2, epochs=5, batch_size=8))
        a.train(X, y, shuffle_seed=1)
        b.train(X, y, shuffle_seed=2)
        assert not np.array_equal(a.W1, b.W1)

    def test_sgd_option_learns(self):
        X, y = blobs()
        m = SoftmaxClassifier(ClassifierConfig(input_dim=2, epochs=100, optimizer="sgd", learning_rate=0.1))
        m.train(X, y)
        assert (m.predict_proba(X).argmax(axis=1) == y).mean() >= 0.99

    def test_weighted_loss_definition(self, rng):
        m = SoftmaxClassifier(ClassifierConfig(input_dim=3, num_classes=3, seed=1))
        X = rng.normal(size=(6, 3))
        y = np.array([0, 1, 2, 2, 1, 0])
        cw = np.array([0.5, 2.0, 1.0])
        P = m.predict_proba(X)
        expected = np.mean([-cw[c] * math.log(P[i, c]) for i, c in enumerate(y)])
        assert m.loss(X, y, cw) == pytest.approx(expected, rel=1e-12)

    def test_errors(self):
        m = SoftmaxClassifier(ClassifierConfig(input_dim=2))
        with pytest.raises(ClassifierError, match="empty"):
            m.train(np.zeros((0, 2)), np.zeros(0, dtype=int))
        with pytest.raises(ClassifierError):
            m.train(np.zeros((2, 2)), [0, 2])
        with pytest.raises(ClassifierError):
            m.train(np.zeros((2, 2)), [0, 1], class_weights=[1.0, 0.0])

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_reported(self):
        X = np.array([[1e200, -1e200], [-1e200, 1e200]])
        m = SoftmaxClassifier(ClassifierConfig(input_dim=2, epochs=3, optimizer="sgd", learning_rate=1e10))
        wrong = m.predict_proba(X).argmin(axis=1)
        with pytest.raises(ClassifierError, match="diverged"):
            m.train(X, wrong)


class TestGradients:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(123)
        for trial in range(20):
            d, c = int(rng.integers(1, 6)), int(rng.integers(2, 5))
            hidden = int(rng.choice([0, 0, 3, 5]))
            m = SoftmaxClassifier(ClassifierConfig(input_dim=d, num_classes=c, hidden_units=hidden, seed=trial))
            X = rng.normal(size=(7, d))
            T = rng.dirichlet(np.ones(c), size=7)
            cw = rng.uniform(0.2, 3.0, size=c)
            analytic = m.gradients(X, T, cw)
            numeric = numeric_gradient(m, X, T, cw)
            for a, n in zip(analytic, numeric):
                rel = np.abs(a - n).max() / max(np.abs(n).max(), 1e-8)
                assert rel <= 1e-4, (trial, rel)


class TestHelpers:
    def test_soft_targets(self):
        np.testing.assert_array_equal(soft_targets([1, 0], 3), [[0, 1, 0], [1, 0, 0]])
        with pytest.raises(ClassifierError):
            soft_targets(np.ones((2, 2)), 3)

    def test_inverse_frequency(self):
        w = inverse_frequency_weights([30, 10])
        assert w.mean() == pytest.approx(1.0)
        assert w[1] / w[0] == pytest.approx(3.0)
        np.testing.assert_allclose(inverse_frequency_weights([0, 1]), [1.0, 1.0])


class TestCheckpoint:
    @pytest.mark.parametrize("hidden", [0, 4])
    def test_round_trip(self, tmp_path, rng, hidden):
        X, y = blobs()
        m = SoftmaxClassifier(ClassifierConfig(input_dim=2, hidden_units=hidden, epochs=5))
        m.train(X, y)
        path = tmp_path / "m.ckpt"
        m.save(path)
        loaded = SoftmaxClassifier.load(path)
        assert loaded.config.hidden_units == hidden
        for p, q in zip(m.parameters(), loaded.parameters()):
            np.testing.assert_array_equal(p, q)
        Z = rng.normal(size=(10, 2))
        np.testing.assert_array_equal(m.predict_proba(Z), loaded.predict_proba(Z))
        n_params = sum(p.size for p in m.parameters())
        assert path.stat().st_size == 4 + 16 + 8 * n_params

    def test_bad_files(self, tmp_path):
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(b"XXXX" + bytes(16))
        with pytest.raises(ClassifierError):
            SoftmaxClassifier.load(bad)
        m = SoftmaxClassifier(ClassifierConfig(input_dim=2))
        m.save(tmp_path / "ok.ckpt")
        with pytest.raises(ClassifierError):
            SoftmaxClassifier.load(tmp_path / "ok.ckpt", ClassifierConfig(input_dim=3))
        truncated = tmp_path / "short.ckpt"
        truncated.write_bytes((tmp_path / "ok.ckpt").read_bytes()[:-8])
        with pytest.raises(ClassifierError):
            SoftmaxClassifier.load(truncated)
