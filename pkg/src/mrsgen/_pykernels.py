"""Pure-numpy reference versions of the compiled kernels in ``_ckernels.pyx``.

Index convention shared by all three 1-D kernels, for stride ``s`` and padding ``p``:
output position ``l`` of the correlation reads input position ``l*s - p + k``.
"""

import numpy as np


def _taps(n_out, n_in, stride, pad, k):
    pos = np.arange(n_out) * stride - pad + k
    valid = (pos >= 0) & (pos < n_in)
    return valid, pos[valid]


def correlate1d(x, w, stride, pad):
    """``y[b,o,l] = sum_{i,k} w[o,i,k] * x[b,i,l*s-p+k]``."""
    B, C_in, L_in = x.shape
    C_out, _, K = w.shape
    L_out = (L_in + 2 * pad - K) // stride + 1
    y = np.zeros((B, C_out, L_out))
    for k in range(K):
        valid, pos = _taps(L_out, L_in, stride, pad, k)
        if pos.size:
            y[:, :, valid] += np.einsum("oi,bil->bol", w[:, :, k], x[:, :, pos])
    return y


def scatter1d(g, w, stride, pad, L_in):
    """Adjoint of :func:`correlate1d` with respect to ``x``."""
    B, C_out, L_out = g.shape
    _, C_in, K = w.shape
    x = np.zeros((B, C_in, L_in))
    for k in range(K):
        valid, pos = _taps(L_out, L_in, stride, pad, k)
        if pos.size:
            # positions are distinct for a fixed tap, plain fancy assignment is safe
            x[:, :, pos] += np.einsum("oi,bol->bil", w[:, :, k], g[:, :, valid])
    return x


def weight_grad1d(x, g, stride, pad, K):
    """Adjoint of :func:`correlate1d` with respect to ``w``."""
    B, C_in, L_in = x.shape
    _, C_out, L_out = g.shape
    gw = np.zeros((C_out, C_in, K))
    for k in range(K):
        valid, pos = _taps(L_out, L_in, stride, pad, k)
        if pos.size:
            gw[:, :, k] = np.einsum("bol,bil->oi", g[:, :, valid], x[:, :, pos])
    return gw


def split_scan(X, y, features, n_classes):
    """Best Gini split over ``features``.

    Returns ``(feature, threshold, score)`` where ``score = sum_c nl_c^2/nl +
    sum_c nr_c^2/nr`` is maximised; ``feature == -1`` when no threshold exists.
    Ties keep the earliest (feature, threshold) pair.
    """
    n = X.shape[0]
    onehot = np.zeros((n, n_classes), dtype=np.int64)
    best_f, best_t, best_score = -1, 0.0, -np.inf
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        onehot[:] = 0
        onehot[np.arange(n), y[order]] = 1
        left = np.cumsum(onehot, axis=0)[:-1]
        right = left[-1] + onehot[-1] - left
        nl = np.arange(1, n, dtype=np.int64)
        nr = n - nl
        distinct = xs[:-1] < xs[1:]
        if not distinct.any():
            continue
        sl = (left * left).sum(axis=1)
        sr = (right * right).sum(axis=1)
        score = sl.astype(np.float64) / nl + sr.astype(np.float64) / nr
        score[~distinct] = -np.inf
        i = int(np.argmax(score))
        if score[i] > best_score:
            best_f, best_score = int(f), float(score[i])
            best_t = float(0.5 * (xs[i] + xs[i + 1]))
    return best_f, best_t, best_score
