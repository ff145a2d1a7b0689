import os
import sys
from functools import lru_cache

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from ddrym.complex import build_complex  # noqa: E402
from ddrym.mesh import mesh_from_spec  # noqa: E402


@lru_cache(maxsize=None)
def mesh_of(spec: str):
    return mesh_from_spec(spec)


@lru_cache(maxsize=None)
def complex_of(spec: str, k: int):
    return build_complex(mesh_of(spec), k)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
