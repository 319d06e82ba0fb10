"""Random Forest over raw spectrum amplitudes, Gini splits, majority vote."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .spectra import GRADES, Grade, LabeledDataset, format_float

N_CLASSES = len(GRADES)
# gains below this are round-off from a split that leaves impurity unchanged
_MIN_GAIN = 1e-12


def gini(labels) -> float:
    labels = np.asarray([int(g) for g in labels], dtype=np.intp)
    if labels.size == 0:
        raise ValueError("gini of an empty set")
    p = np.bincount(labels, minlength=N_CLASSES) / labels.size
    return float(1.0 - np.sum(p * p))


def best_split(data, labels, feature_subset=None, impl=None):
    """Best ``(feature, threshold, impurity_decrease)`` or ``None``.

    Thresholds are midpoints between consecutive distinct sorted values; ties go
    to the lower feature index, then the lower threshold.
    """
    X = np.asarray(data, dtype=np.float64)
    y = np.asarray([int(g) for g in labels], dtype=np.intp)
    n = len(y)
    if n < 2:
        return None
    if feature_subset is None:
        feature_subset = range(X.shape[1])
    features = np.sort(np.asarray(list(feature_subset), dtype=np.intp))
    counts = np.bincount(y, minlength=N_CLASSES)
    if np.count_nonzero(counts) < 2:
        return None
    f, t, score = kernels.split_scan(X, y, features, N_CLASSES, impl=impl)
    if f < 0:
        return None
    parent = float(np.sum(counts * counts)) / n
    gain = (score - parent) / n
    if gain <= _MIN_GAIN:
        return None
    return int(f), float(t), float(gain)


@dataclass(frozen=True)
class Node:
    feature: int = -1  # -1 marks a leaf
    threshold: float = 0.0
    counts: tuple = ()
    left: int = -1
    right: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0

    @property
    def grade(self) -> Grade:
        # argmax keeps the lowest grade on ties
        return Grade(int(np.argmax(self.counts)))


@dataclass(frozen=True)
class DecisionTree:
    nodes: tuple  # preorder; nodes[0] is the root
    max_depth: int | None

    def predict_one(self, x) -> Grade:
        node = self.nodes[0]
        while not node.is_leaf:
            node = self.nodes[node.left if x[node.feature] <= node.threshold else node.right]
        return node.grade


def fit_tree(X, y, rng, max_depth=None, n_features=None) -> DecisionTree:
    d = X.shape[1]
    n_features = d if n_features is None else n_features
    nodes = []

    def grow(idx, depth):
        counts = tuple(int(c) for c in np.bincount(y[idx], minlength=N_CLASSES))
        slot = len(nodes)
        nodes.append(None)
        split = None
        if (max_depth is None or depth < max_depth) and np.count_nonzero(counts) > 1:
            feats = rng.choice(d, size=n_features, replace=False) if n_features < d else np.arange(d)
            split = best_split(X[idx], y[idx], feats)
        if split is None:
            nodes[slot] = Node(counts=counts)
            return slot
        f, t, _ = split
        go_left = X[idx, f] <= t
        left = grow(idx[go_left], depth + 1)
        right = grow(idx[~go_left], depth + 1)
        nodes[slot] = Node(f, t, counts, left, right)
        return slot

    grow(np.arange(len(y)), 0)
    return DecisionTree(tuple(nodes), max_depth)


@dataclass(frozen=True)
class Forest:
    trees: tuple
    n_features_per_split: int
    seed: int
    dim: int

    def votes(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError(f"expected a spectrum of length {self.dim}, got {x.shape}")
        return np.bincount([int(t.predict_one(x)) for t in self.trees], minlength=N_CLASSES)


def default_n_features(dim: int) -> int:
    return math.ceil(math.sqrt(dim))


def fit_forest(train: LabeledDataset, n_trees=100, max_depth=4,
               n_features_per_split=None, seed=0) -> Forest:
    """Bagged trees; bootstraps are drawn up front so tree order never matters."""
    if len(train) == 0:
        raise ValueError("empty training set")
    if len(set(train.labels)) < 2:
        raise ValueError("training set needs at least two grades")
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    dim = train.dim
    if n_features_per_split is None:
        n_features_per_split = default_n_features(dim)
    if not 1 <= n_features_per_split <= dim:
        raise ValueError(f"n_features_per_split must lie in [1, {dim}]")
    X, y = train.spectra, train.label_array()
    n = len(y)
    boot_rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    bootstraps = [boot_rng.integers(0, n, size=n) for _ in range(n_trees)]
    tree_seeds = np.random.SeedSequence([seed, 1]).spawn(n_trees)
    trees = []
    for idx, ts in zip(bootstraps, tree_seeds):
        trees.append(fit_tree(X[idx], y[idx], np.random.default_rng(ts),
                              max_depth, n_features_per_split))
    return Forest(tuple(trees), n_features_per_split, seed, dim)


def predict(forest: Forest, spectrum) -> Grade:
    # argmax keeps the lowest grade on ties
    return Grade(int(np.argmax(forest.votes(spectrum))))


def vote(grades) -> Grade:
    counts = np.bincount([int(g) for g in grades], minlength=N_CLASSES)
    return Grade(int(np.argmax(counts)))


def accuracy(forest: Forest, test: LabeledDataset):
    """``(overall, {grade: accuracy})`` over the grades present in ``test``."""
    if len(test) == 0:
        raise ValueError("empty test set")
    preds = np.array([int(predict(forest, x)) for x in test.spectra])
    truth = test.label_array()
    per_grade = {}
    for g in GRADES:
        mask = truth == int(g)
        if mask.any():
            per_grade[g] = float(np.mean(preds[mask] == int(g)))
    return float(np.mean(preds == truth)), per_grade


# ---------------------------------------------------------------------------
# SFRF1 text format: header, then per tree a "tree <n_nodes>" line and one
# preorder line per node ("split f t c0 c1 c2" or "leaf c0 c1 c2").

MAGIC = "SFRF1"


def dumps_forest(forest: Forest) -> str:
    lines = [f"{MAGIC} dim={forest.dim} n_features={forest.n_features_per_split} "
             f"seed={forest.seed} trees={len(forest.trees)}"]
    for tree in forest.trees:
        depth = "none" if tree.max_depth is None else tree.max_depth
        lines.append(f"tree {len(tree.nodes)} max_depth={depth}")
        for node in _preorder(tree):
            counts = " ".join(str(c) for c in node.counts)
            if node.is_leaf:
                lines.append(f"leaf {counts}")
            else:
                lines.append(f"split {node.feature} {format_float(node.threshold)} {counts}")
    return "\n".join(lines) + "\n"


def _preorder(tree):
    stack = [0]
    while stack:
        node = tree.nodes[stack.pop()]
        yield node
        if not node.is_leaf:
            stack += [node.right, node.left]


def loads_forest(text: str) -> Forest:
    lines = text.splitlines()
    head = lines[0].split()
    if not head or head[0] != MAGIC:
        raise ValueError("not an SFRF1 forest")
    meta = dict(tok.split("=", 1) for tok in head[1:])
    pos = 1
    trees = []
    for _ in range(int(meta["trees"])):
        kw, count, depth = lines[pos].split()
        if kw != "tree":
            raise ValueError(f"line {pos + 1}: expected 'tree'")
        depth = depth.split("=", 1)[1]
        body = lines[pos + 1: pos + 1 + int(count)]
        pos += 1 + int(count)
        nodes = []

        def build(it):
            parts = next(it).split()
            slot = len(nodes)
            nodes.append(None)
            if parts[0] == "leaf":
                nodes[slot] = Node(counts=tuple(int(c) for c in parts[1:]))
            else:
                f, t = int(parts[1]), float(parts[2])
                counts = tuple(int(c) for c in parts[3:])
                left = build(it)
                right = build(it)
                nodes[slot] = Node(f, t, counts, left, right)
            return slot

        build(iter(body))
        if len(nodes) != int(count):
            raise ValueError("node count mismatch")
        trees.append(DecisionTree(tuple(nodes), None if depth == "none" else int(depth)))
    return Forest(tuple(trees), int(meta["n_features"]), int(meta["seed"]), int(meta["dim"]))


def save_forest(forest: Forest, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps_forest(forest))


def load_forest(path) -> Forest:
    with open(path) as fh:
        return loads_forest(fh.read())
