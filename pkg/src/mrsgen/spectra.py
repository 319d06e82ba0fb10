"""Labeled spectra, CSV interchange and the phantom ground-truth synthesizer."""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class Grade(enum.IntEnum):
    HEALTHY = 0
    LOW = 1
    HIGH = 2

    @property
    def token(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, token: str) -> "Grade":
        try:
            return cls[token.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown grade token {token!r}") from None


GRADES = tuple(Grade)


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledDataset:
    """Spectra stored as a read-only ``(n, dim)`` float array plus one grade per row.

    ``provenance`` is a free-form tag (``"real"``, ``"pmm"``, ``"gan"``...) carried
    through the pipeline so reports can prove which data trained which forest.
    """

    spectra: np.ndarray
    labels: tuple
    provenance: str = "real"

    def __post_init__(self):
        spectra = np.array(self.spectra, dtype=np.float64, copy=True)
        if spectra.ndim == 1 and spectra.size == 0:
            spectra = spectra.reshape(0, 0)
        if spectra.ndim != 2:
            raise DatasetError("spectra must be a 2-D array (n, dim)")
        labels = tuple(Grade(g) for g in self.labels)
        if len(labels) != spectra.shape[0]:
            raise DatasetError(
                f"{spectra.shape[0]} spectra but {len(labels)} labels")
        if not np.all(np.isfinite(spectra)):
            raise DatasetError("spectra contain non-finite values")
        spectra.flags.writeable = False
        object.__setattr__(self, "spectra", spectra)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.spectra.shape[1]

    def __len__(self) -> int:
        return self.spectra.shape[0]

    def label_array(self) -> np.ndarray:
        return np.array([int(g) for g in self.labels], dtype=np.intp)

    def grades(self) -> list[Grade]:
        return sorted(set(self.labels))

    def subset(self, grade: Grade) -> "LabeledDataset":
        mask = self.label_array() == int(grade)
        return LabeledDataset(self.spectra[mask], [grade] * int(mask.sum()),
                              self.provenance)

    def __eq__(self, other):
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (self.labels == other.labels
                and self.spectra.shape == other.spectra.shape
                and bool(np.array_equal(self.spectra, other.spectra)))

    __hash__ = None


def concat(datasets: Sequence[LabeledDataset], provenance=None) -> LabeledDataset:
    datasets = [d for d in datasets if len(d)]
    if not datasets:
        raise DatasetError("nothing to concatenate")
    if len({d.dim for d in datasets}) != 1:
        raise DatasetError("datasets disagree on dim")
    spectra = np.concatenate([d.spectra for d in datasets])
    labels = [g for d in datasets for g in d.labels]
    if provenance is None:
        provenance = "+".join(dict.fromkeys(d.provenance for d in datasets))
    return LabeledDataset(spectra, labels, provenance)


# ---------------------------------------------------------------------------
# CSV interchange


def format_float(x: float) -> str:
    # shortest repr round-trips exactly; integral values drop the ".0"
    s = repr(float(x))
    if s.endswith(".0"):
        s = s[:-2]
    return s


def format_rows(spectra: np.ndarray, labels: Iterable[Grade]) -> str:
    lines = []
    for row, grade in zip(spectra, labels):
        lines.append(",".join([format_float(v) for v in row] + [Grade(grade).token]))
    return "".join(line + "\n" for line in lines)


def save_dataset(dataset: LabeledDataset, path) -> None:
    if len(dataset) == 0:
        raise DatasetError("refusing to save an empty dataset")
    text = format_rows(dataset.spectra, dataset.labels)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def load_dataset(path, dim: int | None = None, provenance="real") -> LabeledDataset:
    """Parse the spectrum CSV: ``dim`` floats then a grade token per row.

    With ``dim=None`` the width is taken from the first row.
    """
    rows, labels = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if dim is None:
                dim = len(fields) - 1
                if dim < 1:
                    raise DatasetError(f"{path}:{lineno}: no amplitude fields")
            if len(fields) != dim + 1:
                raise DatasetError(
                    f"{path}:{lineno}: expected {dim + 1} fields, got {len(fields)}")
            try:
                values = [float(v) for v in fields[:-1]]
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
            try:
                grade = Grade.parse(fields[-1])
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
            if not all(np.isfinite(values)):
                raise DatasetError(f"{path}:{lineno}: non-finite amplitude")
            rows.append(values)
            labels.append(grade)
    if not rows:
        raise DatasetError(f"{path}: empty dataset file")
    return LabeledDataset(np.array(rows), labels, provenance)


# ---------------------------------------------------------------------------
# per-spectrum operations


def normalize_minmax(values, lo=-1.0, hi=1.0):
    """Affinely map ``[min, max]`` of ``values`` onto ``[lo, hi]``.

    Returns ``(normalized, scale, offset)`` with ``normalized = values*scale + offset``,
    so :func:`denormalize` inverts it.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    values = np.asarray(values, dtype=np.float64)
    vmin, vmax = float(values.min()), float(values.max())
    if vmax == vmin:
        raise ValueError("constant input: min-max scale undefined")
    scale = (hi - lo) / (vmax - vmin)
    offset = lo - vmin * scale
    out = values * scale + offset
    # pin the extremes exactly
    out[values == vmin] = lo
    out[values == vmax] = hi
    return out, scale, offset


def denormalize(values, scale: float, offset: float) -> np.ndarray:
    return (np.asarray(values, dtype=np.float64) - offset) / scale


def class_mean(dataset: LabeledDataset, grade: Grade) -> np.ndarray:
    mask = dataset.label_array() == int(grade)
    if not mask.any():
        raise DatasetError(f"no spectra of grade {Grade(grade).token}")
    return dataset.spectra[mask].mean(axis=0)


# ---------------------------------------------------------------------------
# phantom synthesizer


@dataclass(frozen=True)
class Peak:
    center: float
    width: float
    amplitude: float


# Sample counts from the clinical study: GIII and GIV merged into high grade.
DEFAULT_TRAIN_COUNTS = {Grade.HEALTHY: 70, Grade.LOW: 20, Grade.HIGH: 30}
DEFAULT_TEST_COUNTS = {Grade.HEALTHY: 9, Grade.LOW: 3, Grade.HIGH: 5}

# (center as a fraction of dim, width as a fraction of dim, peak height).
# Same three metabolite positions for every grade; higher grades shift the
# height ratios from the first peak towards the last.
_TEMPLATE_FRACTIONS = {
    Grade.HEALTHY: ((0.25, 0.02, 1.00), (0.50, 0.02, 0.60), (0.70, 0.02, 0.40)),
    Grade.LOW: ((0.25, 0.02, 0.65), (0.50, 0.02, 0.70), (0.70, 0.02, 0.75)),
    Grade.HIGH: ((0.25, 0.02, 0.30), (0.50, 0.02, 0.45), (0.70, 0.02, 1.20)),
}


def default_peaks(dim: int) -> dict:
    return {
        grade: tuple(Peak(c * dim, max(w * dim, 0.5), a) for c, w, a in fracs)
        for grade, fracs in _TEMPLATE_FRACTIONS.items()
    }


@dataclass(frozen=True)
class PhantomConfig:
    dim: int = 1024
    peaks: dict = None
    jitter: float = 0.1
    noise_std: float = 0.05
    train_counts: dict = field(default_factory=lambda: dict(DEFAULT_TRAIN_COUNTS))
    test_counts: dict = field(default_factory=lambda: dict(DEFAULT_TEST_COUNTS))
    seed: int = 42

    def __post_init__(self):
        if self.peaks is None:
            object.__setattr__(self, "peaks", default_peaks(self.dim))
        self.validate()

    def validate(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if not 0 <= self.jitter < 1:
            raise ValueError("jitter must lie in [0, 1)")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        for grade, peaks in self.peaks.items():
            for p in peaks:
                if not 0 <= p.center < self.dim:
                    raise ValueError(f"{Grade(grade).token}: peak center {p.center} outside [0, dim)")
                if p.width <= 0:
                    raise ValueError(f"{Grade(grade).token}: peak width must be > 0")
        for counts in (self.train_counts, self.test_counts):
            for grade, n in counts.items():
                if n <= 0:
                    raise ValueError(f"{Grade(grade).token}: counts must be > 0")
                if grade not in self.peaks:
                    raise ValueError(f"no peak template for {Grade(grade).token}")


def lorentzian(x, center, width, amplitude=1.0):
    """Lorentzian line of height ``amplitude`` and half-width ``width``."""
    return amplitude * width ** 2 / ((x - center) ** 2 + width ** 2)


def template(config: PhantomConfig, grade: Grade) -> np.ndarray:
    x = np.arange(config.dim, dtype=np.float64)
    out = np.zeros(config.dim)
    for p in config.peaks[grade]:
        out += lorentzian(x, p.center, p.width, p.amplitude)
    return out


def _draw(config: PhantomConfig, grade: Grade, n: int, rng) -> np.ndarray:
    x = np.arange(config.dim, dtype=np.float64)
    peaks = config.peaks[grade]
    out = np.zeros((n, config.dim))
    factors = 1.0 + config.jitter * rng.uniform(-1.0, 1.0, size=(n, len(peaks)))
    for j, p in enumerate(peaks):
        out += factors[:, j:j + 1] * lorentzian(x, p.center, p.width, p.amplitude)
    if config.noise_std > 0:
        out += rng.normal(0.0, config.noise_std, size=out.shape)
    return out


def generate_phantom(config: PhantomConfig) -> tuple[LabeledDataset, LabeledDataset]:
    """Seeded (train, test) phantom datasets; grades appear in Healthy/Low/High order."""
    config.validate()
    # one independent stream per (split, grade) so changing a count never
    # reshuffles the other cells
    streams = np.random.SeedSequence(config.seed).spawn(2 * len(GRADES))
    out = []
    for split, counts in enumerate((config.train_counts, config.test_counts)):
        spectra, labels = [], []
        for grade in GRADES:
            n = counts.get(grade, 0)
            if not n:
                continue
            rng = np.random.default_rng(streams[split * len(GRADES) + int(grade)])
            spectra.append(_draw(config, grade, n, rng))
            labels += [grade] * n
        out.append(LabeledDataset(np.concatenate(spectra), labels, "real"))
    return out[0], out[1]
