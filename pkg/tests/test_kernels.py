import os
import subprocess
import sys

import numpy as np
import pytest

from costal import kernels

from oracles import bilinear_pixel


def train_inputs(rng, d=5, c=3, hidden=0, n=40, epochs=4):
    X = rng.normal(size=(n, d))
    T = np.eye(c)[rng.integers(0, c, size=n)]
    cw = rng.uniform(0.5, 2.0, size=c)
    orders = np.stack([rng.permutation(n) for _ in range(epochs)])
    W1 = rng.uniform(-0.3, 0.3, size=(d, hidden or c))
    b1 = rng.uniform(-0.3, 0.3, size=hidden or c)
    W2 = rng.uniform(-0.3, 0.3, size=(hidden, c)) if hidden else np.zeros((0, 0))
    b2 = rng.uniform(-0.3, 0.3, size=c) if hidden else np.zeros(0)
    return [W1, b1, W2, b2], X, T, cw, orders


class TestBilinear:
    def test_flavours_agree(self, rng):
        img = rng.random((9, 11, 3))
        ys = rng.uniform(-2, 11, size=(6, 7))
        xs = rng.uniform(-2, 13, size=(6, 7))
        np.testing.assert_allclose(kernels.bilinear_sample_nb(img, ys, xs), kernels.bilinear_sample_np(img, ys, xs), atol=1e-14)

    def test_matches_scalar_formula(self, rng):
        img = rng.random((5, 6, 1))
        ys = rng.uniform(-1, 6, size=(4, 4))
        xs = rng.uniform(-1, 7, size=(4, 4))
        out = kernels.bilinear_sample(img, ys, xs)
        for i in range(4):
            for j in range(4):
                assert out[i, j, 0] == pytest.approx(bilinear_pixel(img[:, :, 0], ys[i, j], xs[i, j]), abs=1e-12)

    def test_integer_coordinates_are_exact(self, rng):
        img = rng.random((4, 5, 2))
        yy, xx = np.meshgrid(np.arange(4.0), np.arange(5.0), indexing="ij")
        np.testing.assert_array_equal(kernels.bilinear_sample(img, yy, xx), img)


class TestPairCount:
    def test_flavours_agree(self, rng):
        for _ in range(30):
            pos = np.round(rng.random(int(rng.integers(1, 40))), 1)
            neg = np.round(rng.random(int(rng.integers(1, 40))), 1)
            assert kernels.pair_count_nb(pos, neg) == kernels.pair_count_np(pos, neg)

    def test_hand_count(self):
        assert kernels.pair_count(np.array([0.35, 0.8]), np.array([0.1, 0.4])) == 3.0
        assert kernels.pair_count(np.array([0.5]), np.array([0.5])) == 0.5


class TestTraining:
    @pytest.mark.parametrize("hidden,opt", [(0, kernels.OPT_ADAM), (4, kernels.OPT_ADAM), (0, kernels.OPT_SGD), (3, kernels.OPT_SGD)])
    def test_flavours_agree(self, hidden, opt):
        rng = np.random.default_rng(hidden * 10 + opt)
        params, X, T, cw, orders = train_inputs(rng, hidden=hidden)
        p_nb = [p.copy() for p in params]
        p_np = [p.copy() for p in params]
        args = (X, T, cw, orders, 8, hidden, 1e-2, 0.9, 0.999, 1e-8, opt)
        loss_nb = kernels.train_nb(*p_nb, *args)
        loss_np = kernels.train_np(*p_np, *args)
        np.testing.assert_allclose(loss_nb, loss_np, rtol=1e-10)
        for a, b in zip(p_nb, p_np):
            np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)

    def test_forward_loss_flavours(self, rng):
        params, X, T, cw, _ = train_inputs(rng, hidden=6)
        a = kernels._forward_loss_nb(*params, X, T, cw, 6)
        b = kernels.forward_loss_np(*params, X, T, cw, 6)
        assert a == pytest.approx(b, rel=1e-12)


def _flag_probe(value):
    env = dict(os.environ)
    env["COSTAL_DISABLE_NUMBA"] = value
    code = "from costal import _accel, kernels; print(_accel.USE_NUMBA, kernels.train_softmax is kernels.train_np)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return out.stdout.split()


class TestEnvFlag:
    def test_disable(self):
        assert _flag_probe("1") == ["False", "True"]

    def test_default(self):
        assert _flag_probe("") == ["True", "False"]
