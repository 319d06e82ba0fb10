"""Hot-loop dispatch: the compiled extension when built, numpy otherwise.

Set ``MRSGEN_PURE_PYTHON=1`` to force the numpy fallback.
"""

import os

import numpy as np

from . import _pykernels

try:
    if os.environ.get("MRSGEN_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-python backend requested")
    from . import _ckernels as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"


def _c3(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def correlate1d(x, w, stride, pad, impl=None):
    return (impl or _impl).correlate1d(_c3(x), _c3(w), int(stride), int(pad))


def scatter1d(g, w, stride, pad, length, impl=None):
    return (impl or _impl).scatter1d(_c3(g), _c3(w), int(stride), int(pad), int(length))


def weight_grad1d(x, g, stride, pad, K, impl=None):
    return (impl or _impl).weight_grad1d(_c3(x), _c3(g), int(stride), int(pad), int(K))


def split_scan(X, y, features, n_classes=3, impl=None):
    return (impl or _impl).split_scan(
        np.asarray(X, dtype=np.float64),
        np.ascontiguousarray(y, dtype=np.intp),
        np.ascontiguousarray(features, dtype=np.intp),
        int(n_classes))
