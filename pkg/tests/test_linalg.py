import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrsgen.linalg import kmeans, pca_fit, pca_project, pca_reconstruct
from oracles import best_label_agreement, brute_covariance, jacobi_eigh


def test_collinear_points():
    m = pca_fit([[0, 0], [1, 1], [2, 2], [3, 3]], 1)
    np.testing.assert_allclose(m.components[0], [2 ** -0.5, 2 ** -0.5], atol=1e-12)
    full = pca_fit([[0, 0], [1, 1], [2, 2], [3, 3]], 2)
    assert abs(full.eigenvalues[1]) < 1e-12


def test_symmetric_cross():
    m = pca_fit([[1, 0], [-1, 0], [0, 1], [0, -1]], 2)
    np.testing.assert_allclose(m.eigenvalues, [2 / 3, 2 / 3], atol=1e-12)
    np.testing.assert_allclose(m.components @ m.components.T, np.eye(2), atol=1e-12)


@pytest.mark.parametrize("shape", [(6, 4), (20, 8)])
def test_against_jacobi_oracle(shape):
    data = np.random.default_rng(sum(shape)).normal(size=shape)
    n, d = shape
    m = pca_fit(data, d)
    mean, cov = brute_covariance(data)
    vals, vecs = jacobi_eigh(cov)
    np.testing.assert_allclose(m.mean, mean, atol=1e-12)
    np.testing.assert_allclose(m.eigenvalues, vals, atol=1e-8)
    for comp, ref in zip(m.components, vecs):
        assert abs(comp @ ref) > 1 - 1e-8


def test_gram_route_matches_covariance_route():
    rng = np.random.default_rng(8)
    data = rng.normal(size=(10, 60)) @ np.diag(np.linspace(3, 0.5, 60))
    m = pca_fit(data, 6)  # d > 4n: Gram route
    _, cov = brute_covariance(data)
    vals, vecs = np.linalg.eigh(cov)
    np.testing.assert_allclose(m.eigenvalues, vals[::-1][:6], rtol=1e-10)
    for comp, ref in zip(m.components, vecs[:, ::-1].T):
        assert abs(comp @ ref) > 1 - 1e-8
    np.testing.assert_allclose(m.components @ m.components.T, np.eye(6), atol=1e-10)


def test_sign_convention():
    data = np.random.default_rng(2).normal(size=(12, 5))
    m = pca_fit(data, 5)
    for comp in m.components:
        assert comp[np.argmax(np.abs(comp))] > 0


def test_total_variance():
    data = np.random.default_rng(4).normal(size=(9, 5)) * [1, 2, 3, 4, 5]
    m = pca_fit(data, 5)
    assert abs(m.eigenvalues.sum() - np.trace(np.cov(data, rowvar=False))) < 1e-8


def test_errors():
    with pytest.raises(ValueError):
        pca_fit(np.zeros((4, 3)) + 1.0, 1)
    with pytest.raises(ValueError):
        pca_fit(np.eye(3), 4)
    with pytest.raises(ValueError):
        pca_fit([[1.0, 2.0]], 1)
    m = pca_fit(np.eye(3), 2)
    with pytest.raises(ValueError):
        pca_project(m, [1.0, 2.0])
    with pytest.raises(ValueError):
        pca_reconstruct(m, [1.0])


def test_project_reconstruct():
    data = np.random.default_rng(5).normal(size=(8, 4))
    m = pca_fit(data, 4)
    np.testing.assert_allclose(pca_project(m, m.mean), 0, atol=1e-14)
    np.testing.assert_allclose(pca_project(m, m.mean + 2 * m.components[0]), [2, 0, 0, 0], atol=1e-12)
    np.testing.assert_allclose(pca_reconstruct(m, np.zeros(4)), m.mean)
    for x in data:
        np.testing.assert_allclose(pca_reconstruct(m, pca_project(m, x)), x, atol=1e-8)
    a, b = np.array([1.0, -2, 0.5, 3]), np.array([0.3, 0.1, -1, 2])
    np.testing.assert_allclose(pca_reconstruct(m, a + b),
                               pca_reconstruct(m, a) + pca_reconstruct(m, b) - m.mean, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 12), st.integers(1, 6), st.integers(0, 10_000))
def test_orthonormal_components(n, d, seed):
    data = np.random.default_rng(seed).normal(size=(n, d))
    k = min(n, d)
    m = pca_fit(data, k)
    np.testing.assert_allclose(m.components @ m.components.T, np.eye(k), atol=1e-8)
    assert np.all(np.diff(m.eigenvalues) <= 1e-12)
    if k == d:
        x = data[0] + 0.5
        np.testing.assert_allclose(pca_reconstruct(m, pca_project(m, x)), x, atol=1e-8)


def test_kmeans_separated_pairs():
    data = np.array([[0.0, 0], [0, 0], [10, 10], [10, 10]])
    r = kmeans(data, 2, seed=0, max_iters=10)
    assert r.inertia == 0
    assert sorted(map(tuple, r.centroids)) == [(0, 0), (10, 10)]


def test_kmeans_k_equals_n():
    data = np.random.default_rng(0).normal(size=(7, 3))
    r = kmeans(data, 7, seed=1, max_iters=5)
    assert r.inertia == pytest.approx(0, abs=1e-20)
    assert len(set(r.assignments)) == 7


def test_kmeans_blobs():
    rng = np.random.default_rng(30)
    centers = np.array([[0, 0], [6, 0], [0, 6]])
    truth = np.repeat(np.arange(3), 10)
    data = centers[truth] + rng.normal(size=(30, 2))
    r = kmeans(data, 3, seed=3, max_iters=100)
    assert best_label_agreement(r.assignments, truth, 3) >= 28


def test_kmeans_invariants_and_determinism():
    data = np.random.default_rng(9).normal(size=(40, 3))
    r = kmeans(data, 4, seed=5, max_iters=50)
    assert all(b <= a + 1e-12 for a, b in zip(r.trace, r.trace[1:]))
    dists = ((data[:, None] - r.centroids[None]) ** 2).sum(-1)
    np.testing.assert_array_equal(r.assignments, dists.argmin(1))
    assert abs(r.inertia - dists.min(1).sum()) < 1e-8
    again = kmeans(data, 4, seed=5, max_iters=50)
    np.testing.assert_array_equal(again.centroids, r.centroids)


def test_kmeans_errors():
    with pytest.raises(ValueError):
        kmeans(np.zeros((2, 2)), 3)
    with pytest.raises(ValueError):
        kmeans(np.zeros((2, 2)), 1, max_iters=0)
