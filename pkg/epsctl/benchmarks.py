"""Plants built in code: the beta-parameterized output-feedback benchmark and fixed examples."""

import numpy as np

from .errors import InvalidConfig
from .sysmodel import LtiSystem, OfPlant, SfPlant


def benchmark_plant(beta: float) -> OfPlant:
    """Double-integrator-like plant x1' = x2, x2' = beta x1 + u + w2 with noisy x1 measurement.

    Undamped oscillation for beta < 0, unstable for beta > 0.
    """
    if not -1.0 <= beta <= 1.0:
        raise InvalidConfig(f"benchmark beta must lie in [-1, 1], got {beta}")
    return OfPlant(
        a=np.array([[0.0, 1.0], [beta, 0.0]]),
        b1=np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
        b2=np.array([[0.0], [1.0]]),
        c1=np.array([[1.0, 0.0]]),
        c2=np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]),
        d1=np.array([[0.0, 0.0, 1.0]]),
        d2=np.array([[0.0], [0.0], [1.0]]),
        name=f"benchmark(beta={beta:g})",
    )


def illustrative_system() -> LtiSystem:
    """h(t) = 2 e^-t - 3 e^-2t; integral of |h| is 5/6 and |h(0)| = 1."""
    return LtiSystem(
        a=np.array([[0.0, 1.0], [-2.0, -3.0]]),
        b=np.array([[0.0], [1.0]]),
        c=np.array([[1.0, -1.0]]),
        name="illustrative",
    )


def counterexample_plant() -> SfPlant:
    """State-feedback plant whose optimal-value curve over alpha has two local minima."""
    return SfPlant(
        a=np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 1.0]]),
        b=np.array([[0.0], [1.0], [1.0]]),
        bw=np.array([[2.0], [1.0], [0.0]]),
        c=np.array([[1.0, 0.0, 10.0], [0.0, 0.0, 0.0]]),
        d=np.array([[0.0], [1.0]]),
        name="counterexample",
    )


BUILDERS = {
    "benchmark": benchmark_plant,
}
