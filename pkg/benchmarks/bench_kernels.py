"""Time the numba kernels against their pure-numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both flavours are always importable, so one process measures both; the
numba timings exclude the first (compiling) call.
"""
import argparse
import timeit

import numpy as np

from costal import _accel, kernels


def _train_case(rng, hidden, n=700, d=256, epochs=20):
    X = rng.normal(size=(n, d))
    T = np.eye(2)[rng.integers(0, 2, size=n)]
    cw = np.array([0.7, 1.3])
    orders = np.stack([rng.permutation(n) for _ in range(epochs)])
    width = hidden or 2
    params = [rng.uniform(-0.05, 0.05, size=(d, width)), np.zeros(width),
              rng.uniform(-0.05, 0.05, size=(hidden, 2)) if hidden else np.zeros((0, 0)),
              np.zeros(2) if hidden else np.zeros(0)]

    def run(fn):
        p = [a.copy() for a in params]
        return fn(*p, X, T, cw, orders, 32, hidden, 1e-4, 0.9, 0.999, 1e-8, kernels.OPT_ADAM)

    return run


def cases(rng):
    img = rng.random((64, 64, 3))
    yy, xx = np.meshgrid(np.linspace(-0.5, 63.5, 32), np.linspace(-0.5, 63.5, 32), indexing="ij")
    pos, neg = rng.random(2000), rng.random(3000)
    linear, hidden = _train_case(rng, 0), _train_case(rng, 16)
    return [
        ("bilinear 64x64 -> 32x32", lambda f: f(img, yy, xx), kernels.bilinear_sample_nb, kernels.bilinear_sample_np),
        ("pair count 2000x3000", lambda f: f(pos, neg), kernels.pair_count_nb, kernels.pair_count_np),
        ("train linear, 700x256, 20 epochs", linear, kernels.train_nb, kernels.train_np),
        ("train tanh-16, 700x256, 20 epochs", hidden, kernels.train_nb, kernels.train_np),
    ]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':36s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for name, call, nb, np_fn in cases(rng):
        call(nb)  # compile
        t_nb = min(timeit.repeat(lambda: call(nb), number=1, repeat=args.repeat)) * 1e3
        t_np = min(timeit.repeat(lambda: call(np_fn), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:36s} {t_nb:10.2f} {t_np:10.2f} {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
