"""``mrsgen`` command line.

Exit codes: 0 success, 1 usage error, 2 runtime error. Diagnostics go to
stderr; data goes to files (or stdout for ``classify``).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import adversarial, forest, pmm
from .config import ConfigError, load_config
from .evaluate import render_svg, run_experiment
from .linalg import kmeans, pca_fit, pca_project
from .spectra import (GRADES, Grade, format_float, generate_phantom, load_dataset,
                      save_dataset)

log = logging.getLogger("mrsgen")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _grade(token):
    try:
        return Grade.parse(token)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def cmd_phantom(args):
    config = load_config(args.config, args.seed)
    phantom = config.phantom if args.dim is None else replace(
        config.phantom, dim=args.dim, peaks=None)
    train, test = generate_phantom(phantom)
    os.makedirs(args.out, exist_ok=True)
    save_dataset(train, os.path.join(args.out, "train.csv"))
    save_dataset(test, os.path.join(args.out, "test.csv"))
    log.info("wrote %d train / %d test spectra (dim %d) to %s",
             len(train), len(test), train.dim, args.out)


def cmd_train(args):
    config = load_config(args.config, args.seed)
    data = load_dataset(args.data)
    class_data = data.subset(args.grade)
    if not len(class_data):
        raise ValueError(f"{args.data} holds no {args.grade.token} spectra")
    if args.model == "pmm":
        model = pmm.fit_tissue_model(data, args.grade, args.k or config.pmm.K)
        pmm.save_model(model, args.out)
    else:
        if args.model == "gan":
            gan = adversarial.build_gan(data.dim, hidden=config.gan_hidden)
            train_cfg = config.gan
        else:
            gan = adversarial.build_dcgan(data.dim)
            train_cfg = config.dcgan
        train_cfg = replace(train_cfg, seed=config.seed)
        if args.epochs is not None:
            train_cfg = replace(train_cfg, epochs=args.epochs)
        report = adversarial.train(gan, class_data, train_cfg)
        for epoch, d, g in zip(report.epochs, report.d_losses, report.g_losses):
            log.info("epoch %d d_loss=%.4f g_loss=%.4f", epoch, d, g)
        adversarial.save_gan(gan, args.out)
    log.info("saved %s model for %s to %s", args.model, args.grade.token, args.out)


def _is_gan_manifest(path):
    with open(path, "rb") as fh:
        return fh.read(len(adversarial.MANIFEST_MAGIC)) == adversarial.MANIFEST_MAGIC.encode()


def cmd_generate(args):
    seed = 42 if args.seed is None else args.seed
    if _is_gan_manifest(args.model_file):
        gan = adversarial.load_gan(args.model_file)
        data = adversarial.generate(gan, args.n, seed)
    else:
        model = pmm.load_model(args.model_file)
        grid = pmm.default_grid(model, args.c, args.width)
        data = pmm.generate_pmm_dataset(model, grid, args.n, seed)
        if len(data) < args.n:
            log.warning("grid holds only %d points; emitting %d spectra", len(data), len(data))
    save_dataset(data, args.out)
    svg = os.path.splitext(args.out)[0] + ".svg"
    # the plot's companion CSV would overwrite --out when the stems match
    _write_svg_only(data.spectra, data.labels[0], svg)
    log.info("wrote %d spectra to %s (+ %s)", len(data), args.out, svg)


def _write_svg_only(spectra, grade, svg):
    with open(svg, "w", newline="\n") as fh:
        fh.write(render_svg(spectra, grade))


def cmd_fit_forest(args):
    config = load_config(args.config, args.seed)
    data = load_dataset(args.data)
    fs = config.forest
    clf = forest.fit_forest(data, args.n_trees or fs.n_trees,
                            fs.max_depth if args.max_depth is None else args.max_depth,
                            fs.n_features_per_split, config.seed)
    forest.save_forest(clf, args.out)
    log.info("saved forest of %d trees to %s", len(clf.trees), args.out)


def cmd_classify(args):
    clf = forest.load_forest(args.forest)
    data = load_dataset(args.data)
    overall, per_grade = forest.accuracy(clf, data)
    print(f"overall,{format_float(overall)}")
    for g, acc in per_grade.items():
        print(f"{g.token},{format_float(acc)}")


def cmd_explore(args):
    data = load_dataset(args.data)
    model = pca_fit(data.spectra, 2)
    proj = pca_project(model, data.spectra)
    seed = 42 if args.seed is None else args.seed
    km = kmeans(proj, args.k, seed=seed, max_iters=300)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "pca.csv"), "w", newline="\n") as fh:
        fh.write("pc1,pc2,grade,cluster\n")
        for (a, b), g, c in zip(proj, data.labels, km.assignments):
            fh.write(f"{format_float(a)},{format_float(b)},{g.token},{c}\n")
    with open(os.path.join(args.out, "kmeans.csv"), "w", newline="\n") as fh:
        fh.write("cluster,pc1,pc2," + ",".join(g.token for g in GRADES) + "\n")
        labels = data.label_array()
        for j, (a, b) in enumerate(km.centroids):
            counts = np.bincount(labels[km.assignments == j], minlength=len(GRADES))
            fh.write(f"{j},{format_float(a)},{format_float(b)},"
                     + ",".join(str(c) for c in counts) + "\n")
    with open(os.path.join(args.out, "variance.csv"), "w", newline="\n") as fh:
        fh.write("component,eigenvalue\n")
        for i, v in enumerate(model.eigenvalues):
            fh.write(f"{i + 1},{format_float(v)}\n")
    log.info("k-means inertia %.6g after %d iterations", km.inertia, len(km.trace))


def cmd_evaluate(args):
    config = load_config(args.config, args.seed)
    if args.workers is not None:
        config = replace(config, workers=args.workers)
    report = run_experiment(config, args.out)
    failed = [c for c in report.cells if c.status != "ok"]
    for c in failed:
        log.warning("%s/%s: %s", c.generator, c.grade.token, c.status)
    log.info("report written to %s", os.path.join(args.out, "report.csv"))


def build_parser():
    parser = _Parser(prog="mrsgen", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")
    sub.required = True

    def add(name, func, help):
        p = sub.add_parser(name, help=help, description=help)
        p.set_defaults(func=func)
        p.add_argument("--seed", type=int, help="master seed; overrides the config")
        return p

    p = add("phantom", cmd_phantom, "write phantom train.csv / test.csv")
    p.add_argument("--config", help="config file")
    p.add_argument("--dim", type=int, help="spectrum length (default peaks rescaled)")
    p.add_argument("--out", required=True, help="output directory")

    p = add("train", cmd_train, "fit one generator on one grade and snapshot it")
    p.add_argument("--model", required=True, choices=["pmm", "gan", "dcgan"])
    p.add_argument("--grade", required=True, type=_grade, help="healthy, low or high")
    p.add_argument("--data", required=True, help="training CSV")
    p.add_argument("--out", required=True, help="model file (.pmm text or GAN manifest)")
    p.add_argument("--config", help="config file")
    p.add_argument("--k", type=int, help="PMM eigenvectors (default from config)")
    p.add_argument("--epochs", type=int, help="override training epochs")

    p = add("generate", cmd_generate, "sample spectra from a saved model (CSV + SVG)")
    p.add_argument("--model-file", required=True, help="model written by `train`")
    p.add_argument("--n", type=int, required=True, help="number of spectra")
    p.add_argument("--out", default="generated.csv", help="output CSV (default %(default)s)")
    p.add_argument("--c", type=int, default=10, help="PMM grid values per axis")
    p.add_argument("--width", type=float, default=2.0, help="PMM grid half-width in std devs")

    p = add("fit-forest", cmd_fit_forest, "fit a Random Forest on a spectrum CSV")
    p.add_argument("--data", required=True, help="training CSV")
    p.add_argument("--out", required=True, help="SFRF1 forest file")
    p.add_argument("--config", help="config file")
    p.add_argument("--n-trees", type=int, help="number of trees")
    p.add_argument("--max-depth", type=int, help="tree depth limit")

    p = add("classify", cmd_classify, "print accuracy of a saved forest on a CSV")
    p.add_argument("--forest", required=True, help="SFRF1 forest file")
    p.add_argument("--data", required=True, help="labelled CSV")

    p = add("explore", cmd_explore, "two-component PCA projection plus k-means")
    p.add_argument("--data", required=True, help="spectrum CSV")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--k", type=int, default=3, help="clusters (default %(default)s)")

    p = add("evaluate", cmd_evaluate, "run the full generate / classify / score experiment")
    p.add_argument("--config", help="config file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, help="concurrent (generator, grade) cells")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"mrsgen: config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"mrsgen: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
