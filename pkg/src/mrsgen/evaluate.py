"""Benchmark metrics, SVG export and the end-to-end experiment runner."""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import adversarial, forest, pmm
from .spectra import (GRADES, Grade, LabeledDataset, PhantomConfig, class_mean, concat,
                      format_float, format_rows, generate_phantom, load_dataset,
                      save_dataset)

log = logging.getLogger(__name__)

GENERATORS = ("pmm", "gan", "dcgan")
GRADE_COLORS = {Grade.HEALTHY: "#2ca02c", Grade.LOW: "#1f77b4", Grade.HIGH: "#d62728"}


def mse_to_mean(generated, reference_mean) -> float:
    """Mean over samples and points of ``(g(t) - mu(t))**2``."""
    if isinstance(generated, LabeledDataset):
        generated = generated.spectra
    g = np.atleast_2d(np.asarray(generated, dtype=np.float64))
    mu = np.asarray(reference_mean, dtype=np.float64)
    if g.size == 0:
        raise ValueError("no generated spectra")
    if g.shape[1] != mu.shape[0]:
        raise ValueError(f"spectra of length {g.shape[1]} vs reference of length {mu.shape[0]}")
    return float(np.mean((g - mu) ** 2))


# ---------------------------------------------------------------------------
# plots


def _svg_path(values, x0, y0, width, height, lo, hi):
    n = len(values)
    xs = x0 + width * np.arange(n) / max(n - 1, 1)
    ys = y0 + height * (1.0 - (np.asarray(values) - lo) / (hi - lo))
    pts = [f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys)]
    return "M" + " L".join(pts)


def render_svg(spectra, grade: Grade, width=640, height=360) -> str:
    spectra = np.atleast_2d(np.asarray(spectra, dtype=np.float64))
    lo, hi = float(spectra.min()), float(spectra.max())
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0
    margin = 48
    pw, ph = width - 2 * margin, height - 2 * margin
    color = GRADE_COLORS[Grade(grade)]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{margin + ph}" x2="{margin + pw}" y2="{margin + ph}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{margin + ph}" stroke="black"/>',
        f'<text x="{margin + pw / 2:.0f}" y="{height - 12}" text-anchor="middle" '
        f'font-size="12">sample index</text>',
        f'<text x="14" y="{margin + ph / 2:.0f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {margin + ph / 2:.0f})">amplitude</text>',
        f'<text x="{margin - 4}" y="{margin + ph}" text-anchor="end" font-size="10">{lo:.3g}</text>',
        f'<text x="{margin - 4}" y="{margin + 8}" text-anchor="end" font-size="10">{hi:.3g}</text>',
        f'<text x="{margin + pw}" y="{margin + ph + 14}" text-anchor="end" '
        f'font-size="10">{spectra.shape[1] - 1}</text>',
        f'<text x="{margin + pw / 2:.0f}" y="24" text-anchor="middle" font-size="14">'
        f'{Grade(grade).token} ({len(spectra)} spectra)</text>',
    ]
    for row in spectra:
        out.append(f'<path d="{_svg_path(row, margin, margin, pw, ph, lo, hi)}" fill="none" '
                   f'stroke="{color}" stroke-width="1" stroke-opacity="0.6"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def export_plot(spectra, grade: Grade, path) -> str:
    """Write an SVG overlay of ``spectra`` plus a companion spectrum CSV.

    Returns the CSV path (``path`` with its suffix replaced by ``.csv``).
    """
    spectra = np.atleast_2d(np.asarray(spectra, dtype=np.float64))
    if spectra.size == 0:
        raise ValueError("nothing to plot")
    path = os.fspath(path)
    csv_path = os.path.splitext(path)[0] + ".csv"
    with open(path, "w", newline="\n") as fh:
        fh.write(render_svg(spectra, grade))
    with open(csv_path, "w", newline="\n") as fh:
        fh.write(format_rows(spectra, [grade] * len(spectra)))
    return csv_path


# ---------------------------------------------------------------------------
# experiment


@dataclass(frozen=True)
class PmmSettings:
    K: int = 3
    c: int = 10
    width: float = 2.0


@dataclass(frozen=True)
class ForestSettings:
    n_trees: int = 100
    max_depth: int | None = 4
    n_features_per_split: int | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    phantom: PhantomConfig = field(default_factory=lambda: PhantomConfig(dim=64))
    train_path: str | None = None
    test_path: str | None = None
    generators: tuple = GENERATORS
    pmm: PmmSettings = field(default_factory=PmmSettings)
    gan: adversarial.TrainConfig = field(
        default_factory=lambda: adversarial.TrainConfig(epochs=300, batch_size=32))
    gan_hidden: int = adversarial.HIDDEN
    dcgan: adversarial.TrainConfig = field(
        default_factory=lambda: adversarial.TrainConfig(epochs=1000, batch_size=None))
    forest: ForestSettings = field(default_factory=ForestSettings)
    samples_factor: int = 4
    seed: int = 42
    plots: bool = True
    workers: int = 1

    def __post_init__(self):
        unknown = set(self.generators) - set(GENERATORS)
        if unknown:
            raise ValueError(f"unknown generators: {sorted(unknown)}")
        if (self.train_path is None) != (self.test_path is None):
            raise ValueError("train_path and test_path go together")
        if self.samples_factor < 1:
            raise ValueError("samples_factor must be >= 1")


@dataclass
class Cell:
    generator: str
    grade: Grade
    accuracy: float | None = None
    mse_to_mean: float | None = None
    status: str = "ok"
    seed: int = 0


@dataclass
class ExperimentReport:
    cells: list
    metadata: dict = field(default_factory=dict)

    def cell(self, generator, grade) -> Cell:
        for c in self.cells:
            if c.generator == generator and c.grade == grade:
                return c
        raise KeyError((generator, grade))

    @property
    def accuracy_table(self) -> dict:
        return {(c.generator, c.grade): c.accuracy for c in self.cells}

    @property
    def delta_table(self) -> dict:
        return {(c.generator, c.grade): c.mse_to_mean for c in self.cells
                if c.generator != "gt"}

    def to_csv(self) -> str:
        rows = ["generator,grade,accuracy,mse_to_mean,status,seed"]
        for c in self.cells:
            acc = "" if c.accuracy is None else format_float(c.accuracy)
            mse = "" if c.mse_to_mean is None else format_float(c.mse_to_mean)
            status = c.status.replace(",", ";").replace("\n", " ")
            rows.append(f"{c.generator},{c.grade.token},{acc},{mse},{status},{c.seed}")
        return "\n".join(rows) + "\n"


def save_report(report: ExperimentReport, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(report.to_csv())


def load_report(path) -> ExperimentReport:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if lines[0] != "generator,grade,accuracy,mse_to_mean,status,seed":
        raise ValueError(f"{path}: unexpected report header")
    cells = []
    for line in lines[1:]:
        gen, grade, acc, mse, status, seed = line.split(",")
        cells.append(Cell(gen, Grade.parse(grade), float(acc) if acc else None,
                          float(mse) if mse else None, status, int(seed)))
    return ExperimentReport(cells)


def derive_seed(master: int, *keys) -> int:
    """Stable 32-bit seed for one (generator, grade) cell."""
    words = [master] + [abs(hash_key(k)) for k in keys]
    return int(np.random.SeedSequence(words).generate_state(1)[0])


def hash_key(key) -> int:
    if isinstance(key, Grade):
        return int(key)
    if isinstance(key, int):
        return key
    # str hashes are salted per process, so fold the bytes ourselves
    return int.from_bytes(str(key).encode(), "little") % (2 ** 63)


def _load_data(config: ExperimentConfig):
    if config.train_path is not None:
        return load_dataset(config.train_path), load_dataset(config.test_path)
    return generate_phantom(config.phantom)


def _generate_cell(name, grade, class_data, n, seed, config):
    if name == "pmm":
        model = pmm.fit_tissue_model(class_data, grade, config.pmm.K)
        grid = pmm.default_grid(model, config.pmm.c, config.pmm.width)
        return pmm.generate_pmm_dataset(model, grid, n, seed)
    if name == "gan":
        gan = adversarial.build_gan(class_data.dim, hidden=config.gan_hidden)
        train_cfg = config.gan
    else:
        gan = adversarial.build_dcgan(class_data.dim)
        train_cfg = config.dcgan
    train_cfg = adversarial.TrainConfig(
        epochs=train_cfg.epochs, batch_size=train_cfg.batch_size, lr=train_cfg.lr,
        beta1=train_cfg.beta1, beta2=train_cfg.beta2, seed=seed,
        snapshot_every=train_cfg.snapshot_every)
    adversarial.train(gan, class_data, train_cfg)
    return adversarial.generate(gan, n, derive_seed(seed, "sample"))


def run_experiment(config: ExperimentConfig, out_dir) -> ExperimentReport:
    """Generate per grade, fit one forest per generator plus ground truth, score."""
    out_dir = os.fspath(out_dir)
    gen_dir = os.path.join(out_dir, "generated")
    os.makedirs(gen_dir, exist_ok=True)
    train, test = _load_data(config)
    timings = {}

    jobs = [(name, grade) for name in config.generators for grade in GRADES
            if grade in set(train.labels)]

    def run_cell(job):
        name, grade = job
        cell = Cell(name, grade, seed=derive_seed(config.seed, name, grade))
        class_data = train.subset(grade)
        t0 = time.perf_counter()
        try:
            generated = _generate_cell(name, grade, class_data,
                                       config.samples_factor * len(class_data), cell.seed,
                                       config)
            cell.mse_to_mean = mse_to_mean(generated, class_mean(train, grade))
        except Exception as exc:  # one unstable cell must not void the report
            log.warning("%s/%s failed: %s", name, grade.token, exc)
            cell.status = f"failed: {type(exc).__name__}: {exc}"
            generated = None
        timings[f"{name}/{grade.token}"] = time.perf_counter() - t0
        return cell, generated

    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            results = list(pool.map(run_cell, jobs))
    else:
        results = [run_cell(job) for job in jobs]

    cells = []
    fs = config.forest
    for name in config.generators:
        produced = [(c, g) for c, g in results if c.generator == name]
        ok = [g for c, g in produced if g is not None]
        clf = None
        if len({lab for g in ok for lab in g.labels}) >= 2:
            data = concat(ok, provenance=name)
            try:
                clf = forest.fit_forest(data, fs.n_trees, fs.max_depth,
                                        fs.n_features_per_split,
                                        derive_seed(config.seed, name, "forest"))
                forest.save_forest(clf, os.path.join(out_dir, f"forest_{name}.sfrf"))
            except Exception as exc:
                log.warning("forest for %s failed: %s", name, exc)
                for c, _ in produced:
                    if c.status == "ok":
                        c.status = f"failed: forest: {exc}"
        for cell, generated in produced:
            if generated is not None:
                stem = os.path.join(gen_dir, f"{name}_{cell.grade.token}")
                save_dataset(generated, stem + ".csv")
                if config.plots:
                    export_plot(generated.spectra, cell.grade, stem + ".svg")
            if clf is not None and cell.status == "ok":
                cell.accuracy = _grade_accuracy(clf, test, cell.grade)
            elif cell.status == "ok":
                cell.status = "failed: fewer than two grades generated"
            cells.append(cell)

    gt_seed = derive_seed(config.seed, "gt", "forest")
    if train.provenance != "real":
        raise AssertionError("ground-truth forest must see only real data")
    gt = forest.fit_forest(train, fs.n_trees, fs.max_depth, fs.n_features_per_split, gt_seed)
    forest.save_forest(gt, os.path.join(out_dir, "forest_gt.sfrf"))
    for grade in GRADES:
        if grade in set(test.labels):
            cells.append(Cell("gt", grade, _grade_accuracy(gt, test, grade), None, "ok", gt_seed))
        if config.plots and grade in set(train.labels):
            export_plot(train.subset(grade).spectra, grade,
                        os.path.join(gen_dir, f"gt_{grade.token}.svg"))

    report = ExperimentReport(cells, {"seed": config.seed, "timings": timings,
                                      "n_train": len(train), "n_test": len(test),
                                      "dim": train.dim})
    save_report(report, os.path.join(out_dir, "report.csv"))
    with open(os.path.join(out_dir, "run_metadata.txt"), "w") as fh:
        for key, value in sorted(report.metadata.items()):
            fh.write(f"{key}={value}\n")
    return report


def _grade_accuracy(clf, test, grade) -> float | None:
    sub = test.subset(grade)
    if not len(sub):
        return None
    return float(np.mean([forest.predict(clf, x) == grade for x in sub.spectra]))
