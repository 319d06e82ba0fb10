"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints best-of-N wall times per kernel and for two end-to-end workloads
(a DCGAN training epoch at dim 1024 and a 20-tree forest fit).
"""

import argparse
import timeit

import numpy as np

from mrsgen import _pykernels, adversarial, forest, kernels
from mrsgen.spectra import PhantomConfig, generate_phantom

try:
    from mrsgen import _ckernels
except ImportError:
    _ckernels = None


def kernel_cases(rng):
    x = rng.normal(size=(17, 16, 256))
    w = rng.normal(size=(32, 16, 4))
    y = _pykernels.correlate1d(x, w, 2, 1)
    g = rng.normal(size=y.shape)
    X = rng.normal(size=(120, 32))
    lab = rng.integers(0, 3, size=120).astype(np.intp)
    feats = np.arange(32, dtype=np.intp)
    return {
        "correlate1d": lambda m: m.correlate1d(x, w, 2, 1),
        "scatter1d": lambda m: m.scatter1d(g, w, 2, 1, 256),
        "weight_grad1d": lambda m: m.weight_grad1d(x, g, 2, 1, 4),
        "split_scan": lambda m: m.split_scan(X, lab, feats, 3),
    }


def workload_cases():
    train, _ = generate_phantom(PhantomConfig(dim=1024, seed=0))
    healthy = train.subset(train.labels[0])
    small, _ = generate_phantom(PhantomConfig(dim=64, seed=0))

    def dcgan_epoch():
        gan = adversarial.build_dcgan(1024)
        adversarial.train(gan, healthy, adversarial.TrainConfig(epochs=1, batch_size=None))

    def forest_fit():
        forest.fit_forest(small, n_trees=20, seed=0)

    return {"dcgan epoch (dim 1024)": dcgan_epoch, "forest fit (20 trees)": forest_fit}


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled extension not built; nothing to compare")
        return
    impls = {"python": _pykernels, "cython": _ckernels}
    print(f"{'case':28s} {'python':>10s} {'cython':>10s} {'speedup':>8s}")
    for name, fn in kernel_cases(np.random.default_rng(0)).items():
        t = {k: best(lambda: fn(m), args.repeat) for k, m in impls.items()}
        print(f"{name:28s} {t['python']:10.5f} {t['cython']:10.5f} {t['python'] / t['cython']:8.1f}x")
    saved = kernels._impl
    try:
        for name, fn in workload_cases().items():
            t = {}
            for k, m in impls.items():
                kernels._impl = m
                t[k] = best(fn, max(1, args.repeat // 2))
            print(f"{name:28s} {t['python']:10.5f} {t['cython']:10.5f} "
                  f"{t['python'] / t['cython']:8.1f}x")
    finally:
        kernels._impl = saved


if __name__ == "__main__":
    main()
