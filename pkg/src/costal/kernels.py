"""Hot loops, each in a numba flavour and a pure-numpy flavour.

The public names at the bottom dispatch on ``costal._accel.USE_NUMBA``. Both
flavours are importable directly (``*_nb`` / ``*_np``) so tests and the
benchmark can compare them side by side.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

OPT_ADAM = 0
OPT_SGD = 1


# ---------------------------------------------------------------------------
# bilinear sampling with edge replication
# ---------------------------------------------------------------------------

def _bilinear_sample_py(image, ys, xs):
    h, w, c = image.shape
    oh, ow = ys.shape
    out = np.empty((oh, ow, c), dtype=np.float64)
    for i in range(oh):
        for j in range(ow):
            y = min(max(ys[i, j], 0.0), h - 1.0)
            x = min(max(xs[i, j], 0.0), w - 1.0)
            y0 = int(np.floor(y))
            x0 = int(np.floor(x))
            y1 = min(y0 + 1, h - 1)
            x1 = min(x0 + 1, w - 1)
            fy = y - y0
            fx = x - x0
            for k in range(c):
                top = image[y0, x0, k] * (1.0 - fx) + image[y0, x1, k] * fx
                bot = image[y1, x0, k] * (1.0 - fx) + image[y1, x1, k] * fx
                out[i, j, k] = top * (1.0 - fy) + bot * fy
    return out


bilinear_sample_nb = njit(_bilinear_sample_py)


def bilinear_sample_np(image, ys, xs):
    """Sample ``image`` (H, W, C) at fractional pixel-centre coordinates.

    Coordinates outside the raster are clamped onto the border, which is the
    same as edge replication.
    """
    h, w, _ = image.shape
    y = np.clip(ys, 0.0, h - 1.0)
    x = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(y).astype(np.int64)
    x0 = np.floor(x).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (y - y0)[..., None]
    fx = (x - x0)[..., None]
    top = image[y0, x0] * (1.0 - fx) + image[y0, x1] * fx
    bot = image[y1, x0] * (1.0 - fx) + image[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


# ---------------------------------------------------------------------------
# Mann-Whitney pair count
# ---------------------------------------------------------------------------

def _pair_count_py(pos, neg):
    # merge walk over both sorted arrays: O((n + m) log(n + m))
    p = np.sort(pos)
    q = np.sort(neg)
    total = 0.0
    below = 0  # negatives strictly below p[i]
    upto = 0  # negatives <= p[i]
    for i in range(p.shape[0]):
        while below < q.shape[0] and q[below] < p[i]:
            below += 1
        if upto < below:
            upto = below
        while upto < q.shape[0] and q[upto] <= p[i]:
            upto += 1
        total += below + 0.5 * (upto - below)
    return total


pair_count_nb = njit(_pair_count_py)


def pair_count_np(pos, neg):
    """Number of (pos, neg) pairs with pos > neg, ties counted as one half."""
    neg_sorted = np.sort(neg)
    below = np.searchsorted(neg_sorted, pos, side="left")
    not_above = np.searchsorted(neg_sorted, pos, side="right")
    return float(below.sum() + 0.5 * (not_above - below).sum())


# ---------------------------------------------------------------------------
# weighted soft-target cross-entropy training
# ---------------------------------------------------------------------------
#
# Parameters of a linear model are (W1: d x C, b1: C); a one-hidden-layer tanh
# model is (W1: d x H, b1: H, W2: H x C, b2: C). ``hidden == 0`` selects the
# linear form, and W2/b2 are then ignored (pass 0-size arrays).
#
# Per-sample loss is -sum_c t_c * cw_c * log p_c; the objective is the plain
# mean over samples.

@njit
def _affine_row(X, s, W, b, out):
    """out[j] = b[j] + sum_k X[s, k] * W[k, j].

    Narrow outputs take one dot product per column; wide ones walk W row by
    row so the inner loop stays contiguous. Both sum over k in order.
    """
    width = out.shape[0]
    if width < 8:
        for j in range(width):
            acc = b[j]
            for k in range(X.shape[1]):
                acc += X[s, k] * W[k, j]
            out[j] = acc
        return
    for j in range(width):
        out[j] = b[j]
    for k in range(X.shape[1]):
        xk = X[s, k]
        for j in range(width):
            out[j] += xk * W[k, j]


def _forward_loss_py(W1, b1, W2, b2, X, T, cw, hidden):
    n, d = X.shape
    C = T.shape[1]
    total = 0.0
    z = np.empty(C)
    h = np.empty(max(hidden, 1))
    for s in range(n):
        if hidden == 0:
            _affine_row(X, s, W1, b1, z)
        else:
            _affine_row(X, s, W1, b1, h)
            for u in range(hidden):
                h[u] = np.tanh(h[u])
            for c in range(C):
                acc = b2[c]
                for u in range(hidden):
                    acc += h[u] * W2[u, c]
                z[c] = acc
        zmax = z[0]
        for c in range(1, C):
            if z[c] > zmax:
                zmax = z[c]
        lse = 0.0
        for c in range(C):
            lse += np.exp(z[c] - zmax)
        lse = np.log(lse) + zmax
        for c in range(C):
            a = T[s, c] * cw[c]
            if a != 0.0:
                total += a * (lse - z[c])
    return total / n


def _batch_grad_py(W1, b1, W2, b2, X, T, cw, idx, hidden, gW1, gb1, gW2, gb2):
    d = X.shape[1]
    C = T.shape[1]
    m = idx.shape[0]
    gW1[:] = 0.0
    gb1[:] = 0.0
    if hidden > 0:
        gW2[:] = 0.0
        gb2[:] = 0.0
    z = np.empty(C)
    dz = np.empty(C)
    h = np.empty(max(hidden, 1))
    dpre = np.empty(max(hidden, 1))
    inv = 1.0 / m
    for r in range(m):
        s = idx[r]
        if hidden == 0:
            _affine_row(X, s, W1, b1, z)
        else:
            _affine_row(X, s, W1, b1, h)
            for u in range(hidden):
                h[u] = np.tanh(h[u])
            for c in range(C):
                acc = b2[c]
                for u in range(hidden):
                    acc += h[u] * W2[u, c]
                z[c] = acc
        zmax = z[0]
        for c in range(1, C):
            if z[c] > zmax:
                zmax = z[c]
        ssum = 0.0
        for c in range(C):
            z[c] = np.exp(z[c] - zmax)
            ssum += z[c]
        wsum = 0.0
        for c in range(C):
            wsum += T[s, c] * cw[c]
        for c in range(C):
            dz[c] = (wsum * z[c] / ssum - T[s, c] * cw[c]) * inv
        if hidden == 0:
            for k in range(d):
                xk = X[s, k]
                for c in range(C):
                    gW1[k, c] += xk * dz[c]
            for c in range(C):
                gb1[c] += dz[c]
        else:
            for u in range(hidden):
                acc = 0.0
                for c in range(C):
                    gW2[u, c] += h[u] * dz[c]
                    acc += dz[c] * W2[u, c]
                dpre[u] = acc * (1.0 - h[u] * h[u])
            for c in range(C):
                gb2[c] += dz[c]
            for k in range(d):
                xk = X[s, k]
                for u in range(hidden):
                    gW1[k, u] += xk * dpre[u]
            for u in range(hidden):
                gb1[u] += dpre[u]


def _step(p, g, m, v, lr, beta1, beta2, eps, t, opt):
    if opt == OPT_SGD:
        p -= lr * g
        return
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    mhat_scale = 1.0 / (1.0 - beta1 ** t)
    vhat_scale = 1.0 / (1.0 - beta2 ** t)
    p -= lr * (m * mhat_scale) / (np.sqrt(v * vhat_scale) + eps)


def _step_loop(p, g, m, v, lr, beta1, beta2, eps, t, opt):
    # same update as _step, element by element without temporaries
    pf, gf, mf, vf = p.reshape(-1), g.reshape(-1), m.reshape(-1), v.reshape(-1)
    if opt == OPT_SGD:
        for i in range(pf.shape[0]):
            pf[i] -= lr * gf[i]
        return
    mhat_scale = 1.0 / (1.0 - beta1 ** t)
    vhat_scale = 1.0 / (1.0 - beta2 ** t)
    for i in range(pf.shape[0]):
        gi = gf[i]
        mf[i] = beta1 * mf[i] + (1.0 - beta1) * gi
        vf[i] = beta2 * vf[i] + (1.0 - beta2) * gi * gi
        pf[i] -= lr * (mf[i] * mhat_scale) / (np.sqrt(vf[i] * vhat_scale) + eps)


def _make_train(forward_loss, batch_grad, step):
    def train(W1, b1, W2, b2, X, T, cw, orders, batch_size, hidden,
              lr, beta1, beta2, eps, opt):
        epochs, n = orders.shape
        losses = np.empty(epochs + 1)
        losses[0] = forward_loss(W1, b1, W2, b2, X, T, cw, hidden)
        gW1 = np.zeros_like(W1)
        gb1 = np.zeros_like(b1)
        gW2 = np.zeros_like(W2)
        gb2 = np.zeros_like(b2)
        mW1 = np.zeros_like(W1)
        vW1 = np.zeros_like(W1)
        mb1 = np.zeros_like(b1)
        vb1 = np.zeros_like(b1)
        mW2 = np.zeros_like(W2)
        vW2 = np.zeros_like(W2)
        mb2 = np.zeros_like(b2)
        vb2 = np.zeros_like(b2)
        t = 0
        for e in range(epochs):
            for start in range(0, n, batch_size):
                stop = min(start + batch_size, n)
                idx = orders[e, start:stop]
                batch_grad(W1, b1, W2, b2, X, T, cw, idx, hidden, gW1, gb1, gW2, gb2)
                t += 1
                step(W1, gW1, mW1, vW1, lr, beta1, beta2, eps, t, opt)
                step(b1, gb1, mb1, vb1, lr, beta1, beta2, eps, t, opt)
                if hidden > 0:
                    step(W2, gW2, mW2, vW2, lr, beta1, beta2, eps, t, opt)
                    step(b2, gb2, mb2, vb2, lr, beta1, beta2, eps, t, opt)
            losses[e + 1] = forward_loss(W1, b1, W2, b2, X, T, cw, hidden)
        return losses

    return train


_forward_loss_nb = njit(_forward_loss_py)
_batch_grad_nb = njit(_batch_grad_py)
_step_nb = njit(_step_loop)
train_nb = njit(_make_train(_forward_loss_nb, _batch_grad_nb, _step_nb))


def _logits_np(W1, b1, W2, b2, X, hidden):
    if hidden == 0:
        return X @ W1 + b1, None
    h = np.tanh(X @ W1 + b1)
    return h @ W2 + b2, h


def forward_loss_np(W1, b1, W2, b2, X, T, cw, hidden):
    z, _ = _logits_np(W1, b1, W2, b2, X, hidden)
    zmax = z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z - zmax).sum(axis=1, keepdims=True)) + zmax
    return float(((T * cw) * (lse - z)).sum() / X.shape[0])


def batch_grad_np(W1, b1, W2, b2, X, T, cw, idx, hidden, gW1, gb1, gW2, gb2):
    xb = X[idx]
    a = T[idx] * cw
    z, h = _logits_np(W1, b1, W2, b2, xb, hidden)
    z = np.exp(z - z.max(axis=1, keepdims=True))
    p = z / z.sum(axis=1, keepdims=True)
    dz = (a.sum(axis=1, keepdims=True) * p - a) / idx.shape[0]
    if hidden == 0:
        gW1[...] = xb.T @ dz
        gb1[...] = dz.sum(axis=0)
        return
    gW2[...] = h.T @ dz
    gb2[...] = dz.sum(axis=0)
    dpre = (dz @ W2.T) * (1.0 - h * h)
    gW1[...] = xb.T @ dpre
    gb1[...] = dpre.sum(axis=0)


train_np = _make_train(forward_loss_np, batch_grad_np, _step)


if USE_NUMBA:
    bilinear_sample = bilinear_sample_nb
    pair_count = pair_count_nb
    train_softmax = train_nb
    forward_loss = _forward_loss_nb
else:
    bilinear_sample = bilinear_sample_np
    pair_count = pair_count_np
    train_softmax = train_np
    forward_loss = forward_loss_np
