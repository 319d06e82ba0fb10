"""Pairwise Mixture Model: per-grade tissue models, mixing, weight estimation
and coefficient-grid sampling."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .linalg import pca_fit
from .nnls import nnls
from .spectra import GRADES, Grade, LabeledDataset, format_float


@dataclass(frozen=True)
class TissueModel:
    grade: Grade
    mean: np.ndarray
    eigenvectors: np.ndarray  # (K, d)
    eigenvalues: np.ndarray  # (K,)

    @property
    def K(self) -> int:
        return self.eigenvectors.shape[0]

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class MixtureWeights:
    healthy: float
    low: float
    high: float

    def as_array(self) -> np.ndarray:
        return np.array([self.healthy, self.low, self.high])

    def __iter__(self):
        return iter((self.healthy, self.low, self.high))


@dataclass(frozen=True)
class CoefficientGrid:
    """Candidate coefficient values per eigenvector axis."""

    axes: tuple

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=np.float64).ravel() for a in self.axes)
        if not axes or any(len(a) < 1 for a in axes):
            raise ValueError("every axis needs at least one value")
        object.__setattr__(self, "axes", axes)

    @property
    def size(self) -> int:
        return int(np.prod([len(a) for a in self.axes]))

    def point(self, flat_index: int) -> np.ndarray:
        idx = np.unravel_index(flat_index, [len(a) for a in self.axes])
        return np.array([a[i] for a, i in zip(self.axes, idx)])


def default_grid(model: TissueModel, c: int = 10, width: float = 2.0) -> CoefficientGrid:
    """``c`` equispaced values per axis spanning +/- ``width`` standard deviations."""
    sd = np.sqrt(model.eigenvalues)
    if c == 1:
        return CoefficientGrid(tuple(np.zeros(1) for _ in sd))
    return CoefficientGrid(tuple(np.linspace(-width * s, width * s, c) for s in sd))


def fit_tissue_model(dataset: LabeledDataset, grade: Grade, K: int) -> TissueModel:
    grade = Grade(grade)
    data = dataset.subset(grade).spectra
    if len(data) < K + 1:
        raise ValueError(
            f"{grade.token}: need at least K+1={K + 1} spectra, have {len(data)}")
    pca = pca_fit(data, K)
    return TissueModel(grade, pca.mean, pca.components, pca.eigenvalues)


def synthesize(model: TissueModel, alphas) -> np.ndarray:
    alphas = np.asarray(alphas, dtype=np.float64)
    if alphas.shape[-1] != model.K:
        raise ValueError(f"expected {model.K} coefficients, got {alphas.shape[-1]}")
    return model.mean + alphas @ model.eigenvectors


def _by_grade(models) -> dict:
    found = {}
    for m in models:
        if m.grade in found:
            raise ValueError(f"duplicate model for grade {m.grade.token}")
        found[m.grade] = m
    missing = [g.token for g in GRADES if g not in found]
    if missing:
        raise ValueError(f"missing models for grades: {', '.join(missing)}")
    if len({m.dim for m in found.values()}) != 1:
        raise ValueError("tissue models disagree on dim")
    return found


def mix(models, alphas, weights: MixtureWeights) -> np.ndarray:
    """Weighted sum of the three synthesized tissue signals.

    ``alphas`` maps each grade to its coefficient vector (missing grades use zeros).
    """
    by_grade = _by_grade(models)
    out = np.zeros(by_grade[Grade.HEALTHY].dim)
    for grade, w in zip(GRADES, weights):
        model = by_grade[grade]
        a = alphas.get(grade) if alphas else None
        out += w * synthesize(model, np.zeros(model.K) if a is None else a)
    return out


def mean_matrix(models) -> np.ndarray:
    by_grade = _by_grade(models)
    return np.column_stack([by_grade[g].mean for g in GRADES])


def energy(x, models, weights, neighbor_signals=(), smoothness_lambda=0.0) -> float:
    """Discretized mixture energy with coefficients held at zero."""
    M = mean_matrix(models)
    s = M @ np.asarray(list(weights), dtype=np.float64)
    e = float(np.sum((np.asarray(x) - s) ** 2))
    for sj in neighbor_signals:
        e += smoothness_lambda * float(np.sum((s - np.asarray(sj)) ** 2))
    return e


def estimate_weights(x, models, neighbor_signals=(), smoothness_lambda=0.0) -> MixtureWeights:
    """Non-negative weights minimizing the data term plus neighbour smoothness.

    ``||x - Mw||^2 + lambda * sum_j ||Mw - s_j||^2`` collapses to a single NNLS
    problem ``(1 + lambda J) ||Mw - target||^2`` with
    ``target = (x + lambda * sum_j s_j) / (1 + lambda J)``.
    """
    if smoothness_lambda < 0:
        raise ValueError("smoothness_lambda must be >= 0")
    x = np.asarray(x, dtype=np.float64)
    by_grade = _by_grade(models)
    M = mean_matrix(models)
    if x.shape != (M.shape[0],):
        raise ValueError(f"signal length {x.shape} does not match model dim {M.shape[0]}")
    for a, b in itertools.combinations(GRADES, 2):
        if np.array_equal(by_grade[a].mean, by_grade[b].mean):
            raise ValueError(
                f"rank-deficient mixture: {a.token} and {b.token} means are identical")
    if np.linalg.matrix_rank(M) < 3:
        raise ValueError("rank-deficient mixture: class means are linearly dependent")

    neighbors = [np.asarray(s, dtype=np.float64) for s in neighbor_signals]
    for s in neighbors:
        if s.shape != x.shape:
            raise ValueError("neighbour signal length mismatch")
    J = len(neighbors)
    denom = 1.0 + smoothness_lambda * J
    target = x + smoothness_lambda * sum(neighbors, np.zeros_like(x))
    target /= denom
    root = np.sqrt(denom)
    w, _ = nnls(root * M, root * target)
    return MixtureWeights(*(float(v) for v in w))


def sample_grid_indices(grid: CoefficientGrid, max_samples: int, seed: int) -> np.ndarray:
    total = grid.size
    if max_samples < 1:
        raise ValueError("max_samples must be >= 1")
    if total <= max_samples:
        return np.arange(total)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(total, size=max_samples, replace=False))


def generate_pmm_dataset(model: TissueModel, grid: CoefficientGrid,
                         max_samples: int, seed: int = 0) -> LabeledDataset:
    if len(grid.axes) != model.K:
        raise ValueError(f"grid has {len(grid.axes)} axes, model has K={model.K}")
    idx = sample_grid_indices(grid, max_samples, seed)
    alphas = np.array([grid.point(i) for i in idx])
    spectra = synthesize(model, alphas)
    return LabeledDataset(spectra, [model.grade] * len(idx), "pmm")


# ---------------------------------------------------------------------------
# text serialization


def dumps_model(model: TissueModel) -> str:
    rows = [f"{model.grade.token},{model.dim},{model.K}",
            ",".join(map(format_float, model.mean))]
    rows += [",".join(map(format_float, v)) for v in model.eigenvectors]
    rows.append(",".join(map(format_float, model.eigenvalues)))
    return "".join(r + "\n" for r in rows)


def loads_model(text: str) -> TissueModel:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    try:
        token, d, K = lines[0].split(",")
        grade, d, K = Grade.parse(token), int(d), int(K)
    except (IndexError, ValueError) as exc:
        raise ValueError(f"bad tissue-model header: {exc}") from None
    if len(lines) != K + 3:
        raise ValueError(f"expected {K + 3} lines, got {len(lines)}")
    mean = np.array([float(v) for v in lines[1].split(",")])
    vecs = np.array([[float(v) for v in ln.split(",")] for ln in lines[2:2 + K]])
    vals = np.array([float(v) for v in lines[-1].split(",")])
    if mean.shape != (d,) or vecs.shape != (K, d) or vals.shape != (K,):
        raise ValueError("tissue-model block shapes disagree with header")
    return TissueModel(grade, mean, vecs, vals)


def save_model(model: TissueModel, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps_model(model))


def load_model(path) -> TissueModel:
    with open(path) as fh:
        return loads_model(fh.read())
