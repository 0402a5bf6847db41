import json

import numpy as np
import pytest

from epsctl.benchmarks import benchmark_plant, counterexample_plant, illustrative_system
from epsctl.sysmodel import LtiSystem


@pytest.fixture
def illustrative() -> LtiSystem:
    return illustrative_system()


@pytest.fixture
def scalar() -> LtiSystem:
    return LtiSystem([[-1.0]], [[1.0]], [[1.0]], name="scalar")


@pytest.fixture
def benchmark_stable():
    return benchmark_plant(-1.0)


@pytest.fixture
def benchmark_unstable():
    return benchmark_plant(1.0)


@pytest.fixture
def counterexample():
    return counterexample_plant()


def random_stable_system(rng: np.random.Generator, n: int, m: int = 1, k: int = 1) -> LtiSystem:
    """Random system with spectral abscissa in [-2, -0.2]; controllable and observable almost surely."""
    a = rng.standard_normal((n, n))
    shift = np.max(np.linalg.eigvals(a).real) + rng.uniform(0.2, 2.0)
    a -= shift * np.eye(n)
    return LtiSystem(a, rng.standard_normal((n, m)), rng.standard_normal((k, n)))


@pytest.fixture
def make_system():
    return random_stable_system


@pytest.fixture
def write_json(tmp_path):
    def write(name: str, data: dict) -> str:
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return str(path)

    return write
