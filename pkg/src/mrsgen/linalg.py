"""PCA (covariance or Gram-matrix route) and seeded k-means."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (k, d), rows orthonormal
    eigenvalues: np.ndarray  # (k,), descending

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def dim(self) -> int:
        return self.components.shape[1]


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # largest-magnitude coordinate of every row is made positive
    idx = np.argmax(np.abs(vectors), axis=1)
    signs = np.sign(vectors[np.arange(len(vectors)), idx])
    signs[signs == 0] = 1.0
    return vectors * signs[:, None]


def pca_fit(data, k: int) -> PcaModel:
    """Top-``k`` principal axes of the sample covariance (divisor n-1)."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError("data must be (n, d)")
    n, d = data.shape
    if n < 2:
        raise ValueError("PCA needs at least two samples")
    if not 1 <= k <= min(n, d):
        raise ValueError(f"k={k} outside [1, {min(n, d)}]")
    mean = data.mean(axis=0)
    centered = data - mean
    total_var = float(np.sum(centered ** 2)) / (n - 1)
    if total_var <= 1e-300:
        raise ValueError("zero-variance data")

    vals = vecs = None
    if d > 4 * n:
        # Gram route: eigenvectors of X X^T / (n-1) lift to those of X^T X / (n-1)
        gram = centered @ centered.T / (n - 1)
        gvals, gvecs = np.linalg.eigh(gram)
        order = np.argsort(gvals)[::-1][:k]
        gvals = gvals[order]
        if gvals[-1] > 1e-12 * gvals[0]:
            lifted = centered.T @ gvecs[:, order] / np.sqrt(gvals * (n - 1))
            # one Gram-Schmidt pass cleans round-off from the lift
            q, _ = np.linalg.qr(lifted)
            q *= np.sign(np.sum(q * lifted, axis=0))
            vals, vecs = gvals, q.T
    if vals is None:
        cov = centered.T @ centered / (n - 1)
        cvals, cvecs = np.linalg.eigh(cov)
        order = np.argsort(cvals)[::-1][:k]
        vals, vecs = cvals[order], cvecs[:, order].T
    vals = np.clip(vals, 0.0, None)
    return PcaModel(mean=mean, components=_fix_signs(vecs), eigenvalues=vals)


def pca_project(model: PcaModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.dim:
        raise ValueError(f"expected length {model.dim}, got {x.shape[-1]}")
    return (x - model.mean) @ model.components.T


def pca_reconstruct(model: PcaModel, coeffs) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape[-1] != model.k:
        raise ValueError(f"expected {model.k} coefficients, got {coeffs.shape[-1]}")
    return model.mean + coeffs @ model.components


@dataclass(frozen=True)
class KmeansResult:
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    trace: tuple  # inertia after every assignment step, non-increasing


def _sq_dists(data, centroids):
    return ((data[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _kmeans_pp(data, k, rng):
    n = len(data)
    centers = [data[rng.integers(n)]]
    closest = ((data - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = rng.choice(n, p=closest / total)
        else:
            idx = rng.integers(n)
        centers.append(data[idx])
        closest = np.minimum(closest, ((data - data[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def kmeans(data, k: int, seed: int = 0, max_iters: int = 100) -> KmeansResult:
    """Lloyd iterations from k-means++ seeding; empty clusters keep their centroid."""
    data = np.asarray(data, dtype=np.float64)
    n = len(data)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in [1, n={n}]")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp(data, k, rng)
    trace = []
    prev = None
    for _ in range(max_iters):
        dists = _sq_dists(data, centroids)
        labels = np.argmin(dists, axis=1)
        trace.append(float(dists[np.arange(n), labels].sum()))
        if prev is not None and np.array_equal(labels, prev):
            break
        prev = labels
        for j in range(k):
            members = data[labels == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
    else:
        dists = _sq_dists(data, centroids)
        labels = np.argmin(dists, axis=1)
        trace.append(float(dists[np.arange(n), labels].sum()))
    inertia = float(((data - centroids[labels]) ** 2).sum())
    return KmeansResult(centroids, labels, inertia, tuple(trace))
