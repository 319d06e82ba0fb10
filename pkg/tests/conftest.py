import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from mrsgen import _pykernels, kernels  # noqa: E402
from mrsgen.spectra import PhantomConfig, generate_phantom  # noqa: E402

BACKENDS = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run a test once per available kernel implementation."""
    if request.param == "python":
        monkeypatch.setattr(kernels, "_impl", _pykernels)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def phantom16():
    return generate_phantom(PhantomConfig(dim=16, seed=7))


@pytest.fixture(scope="session")
def phantom64():
    return generate_phantom(PhantomConfig(dim=64, seed=7))
