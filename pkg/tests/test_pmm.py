import itertools

import numpy as np
import pytest
from scipy.optimize import nnls as scipy_nnls

from mrsgen import pmm
from mrsgen.nnls import nnls
from mrsgen.spectra import GRADES, Grade, LabeledDataset


@pytest.fixture(scope="module")
def models(phantom64):
    train, _ = phantom64
    return [pmm.fit_tissue_model(train, g, 3) for g in GRADES]


def test_fit_identical_spectra_rejected():
    ds = LabeledDataset(np.ones((4, 8)), [Grade.LOW] * 4)
    with pytest.raises(ValueError):
        pmm.fit_tissue_model(ds, Grade.LOW, 1)


def test_fit_too_few_samples():
    ds = LabeledDataset(np.random.default_rng(0).normal(size=(3, 8)), [Grade.LOW] * 3)
    with pytest.raises(ValueError, match="K\\+1"):
        pmm.fit_tissue_model(ds, Grade.LOW, 3)


def test_two_sample_model():
    a, b = np.array([1.0, 2, 3, 4]), np.array([3.0, 1, 0, 4])
    m = pmm.fit_tissue_model(LabeledDataset([a, b], [Grade.HIGH] * 2), Grade.HIGH, 1)
    np.testing.assert_allclose(m.mean, (a + b) / 2)
    d = (a - b) / np.linalg.norm(a - b)
    assert abs(abs(m.eigenvectors[0] @ d) - 1) < 1e-12


def test_completeness_on_phantom(phantom64):
    train, _ = phantom64
    low = train.subset(Grade.LOW)
    m = pmm.fit_tissue_model(train, Grade.LOW, len(low) - 1)
    for x in low.spectra:
        alphas = (x - m.mean) @ m.eigenvectors.T
        np.testing.assert_allclose(pmm.synthesize(m, alphas), x, atol=1e-6)


def test_synthesize(models):
    m = models[0]
    assert np.array_equal(pmm.synthesize(m, np.zeros(3)), m.mean)
    out = pmm.synthesize(m, [-2.5, 0, 0])
    assert abs(np.linalg.norm(out - m.mean) - 2.5) < 1e-10
    alphas = np.array([0.3, -1.2, 0.7])
    assert abs(np.linalg.norm(pmm.synthesize(m, alphas) - m.mean) - np.linalg.norm(alphas)) < 1e-8
    with pytest.raises(ValueError):
        pmm.synthesize(m, [1.0])


def test_mix(models):
    by = {m.grade: m for m in models}
    np.testing.assert_array_equal(pmm.mix(models, {}, pmm.MixtureWeights(1, 0, 0)),
                                  by[Grade.HEALTHY].mean)
    np.testing.assert_allclose(pmm.mix(models, {}, pmm.MixtureWeights(0.5, 0.5, 0)),
                               (by[Grade.HEALTHY].mean + by[Grade.LOW].mean) / 2, atol=1e-15)
    w, v = pmm.MixtureWeights(0.2, 1.5, 0.1), pmm.MixtureWeights(0.4, 0.3, 2.0)
    both = pmm.MixtureWeights(*(w.as_array() + v.as_array()))
    np.testing.assert_allclose(pmm.mix(models, {}, w) + pmm.mix(models, {}, v),
                               pmm.mix(models, {}, both), atol=1e-10)


def test_mix_requires_three_grades(models):
    with pytest.raises(ValueError, match="duplicate"):
        pmm.mix([models[0], models[0], models[2]], {}, pmm.MixtureWeights(1, 0, 0))
    with pytest.raises(ValueError, match="missing"):
        pmm.mix(models[:2], {}, pmm.MixtureWeights(1, 0, 0))


def test_nnls_matches_scipy():
    rng = np.random.default_rng(17)
    for _ in range(20):
        A = rng.normal(size=(15, 4))
        b = rng.normal(size=15)
        x, r = nnls(A, b)
        ref, rref = scipy_nnls(A, b)
        np.testing.assert_allclose(x, ref, atol=1e-10)
        assert abs(r - rref) < 1e-10


def test_estimate_exact_member(models):
    w = pmm.estimate_weights(models[0].mean, models)
    np.testing.assert_allclose(list(w), [1, 0, 0], atol=1e-6)


def test_estimate_constructed_mixture(models):
    by = {m.grade: m for m in models}
    x = 0.3 * by[Grade.HEALTHY].mean + 0.7 * by[Grade.HIGH].mean
    w = pmm.estimate_weights(x, models)
    np.testing.assert_allclose(list(w), [0.3, 0, 0.7], atol=1e-4)
    assert pmm.energy(x, models, w) <= 1e-8


def test_smoothness_pulls_towards_neighbour(models):
    by = {m.grade: m for m in models}
    x, neighbour = by[Grade.LOW].mean, by[Grade.HIGH].mean
    M = pmm.mean_matrix(models)
    free = M @ pmm.estimate_weights(x, models, [neighbour], 0.0).as_array()
    pulled = M @ pmm.estimate_weights(x, models, [neighbour], 1e6).as_array()
    assert np.linalg.norm(pulled - neighbour) < np.linalg.norm(free - neighbour)


def test_energy_not_worse_than_corners(models):
    rng = np.random.default_rng(3)
    x = models[1].mean + rng.normal(scale=0.05, size=models[1].dim)
    neighbours = [models[2].mean, models[0].mean]
    for lam in (0.0, 0.3, 5.0):
        w = pmm.estimate_weights(x, models, neighbours, lam)
        e = pmm.energy(x, models, w, neighbours, lam)
        assert all(v >= 0 for v in w)
        for corner in np.eye(3):
            assert e <= pmm.energy(x, models, corner, neighbours, lam) + 1e-12


def test_rank_deficient_names_grades(models):
    clone = pmm.TissueModel(Grade.LOW, models[0].mean, models[1].eigenvectors,
                            models[1].eigenvalues)
    with pytest.raises(ValueError, match="healthy and low"):
        pmm.estimate_weights(models[0].mean, [models[0], clone, models[2]])


def test_grid_enumeration(models):
    m2 = pmm.TissueModel(Grade.LOW, models[1].mean, models[1].eigenvectors[:2],
                         models[1].eigenvalues[:2])
    s = np.sqrt(m2.eigenvalues)
    grid = pmm.CoefficientGrid(tuple(np.array([-v, 0, v]) for v in s))
    ds = pmm.generate_pmm_dataset(m2, grid, max_samples=100, seed=0)
    assert len(ds) == 9 and set(ds.labels) == {Grade.LOW}
    assert sum(np.array_equal(x, m2.mean) for x in ds.spectra) == 1


def test_degenerate_grid(models):
    grid = pmm.CoefficientGrid(tuple(np.zeros(1) for _ in range(3)))
    ds = pmm.generate_pmm_dataset(models[0], grid, 10)
    assert len(ds) == 1 and np.array_equal(ds.spectra[0], models[0].mean)


def test_subsampled_grid_membership(models):
    m = models[2]
    axes = tuple(np.linspace(-2, 2, 5) * np.sqrt(v) for v in m.eigenvalues)
    grid = pmm.CoefficientGrid(axes)
    ds = pmm.generate_pmm_dataset(m, grid, max_samples=50, seed=11)
    assert len(ds) == 50
    recovered = (ds.spectra - m.mean) @ m.eigenvectors.T
    members = np.array(list(itertools.product(*axes)))
    assert len(members) == 125
    tuples = set()
    for r in recovered:
        hit = np.flatnonzero(np.all(np.abs(members - r) < 1e-9, axis=1))
        assert len(hit) == 1
        tuples.add(int(hit[0]))
    assert len(tuples) == 50
    again = pmm.generate_pmm_dataset(m, grid, max_samples=50, seed=11)
    assert again == ds


def test_default_grid(models):
    grid = pmm.default_grid(models[0])
    assert grid.size == 1000
    np.testing.assert_allclose(grid.axes[0][[0, -1]],
                               [-2 * np.sqrt(models[0].eigenvalues[0]),
                                2 * np.sqrt(models[0].eigenvalues[0])])


def test_model_serialization(models, tmp_path):
    p1, p2 = tmp_path / "a.pmm", tmp_path / "b.pmm"
    pmm.save_model(models[1], p1)
    text = p1.read_text()
    assert text.splitlines()[0] == f"low,{models[1].dim},3"
    back = pmm.load_model(p1)
    np.testing.assert_array_equal(back.mean, models[1].mean)
    np.testing.assert_array_equal(back.eigenvectors, models[1].eigenvectors)
    pmm.save_model(back, p2)
    assert p1.read_bytes() == p2.read_bytes()
