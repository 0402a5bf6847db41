"""Preflight checks for the numerical stack."""

import importlib
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from rich.console import Console

from .config import Config
from .errors import EpsctlError
from .linmat import lyap_residual, lyap_solve
from .registry import build_registry
from .synth import solve_alpha_riccati

logger = logging.getLogger(__name__)

PASS = "[PASS]"
FAIL = "[FAIL]"
WARN = "[WARN]"


@dataclass
class Check:
    name: str
    status: str
    detail: str
    required: bool = True


def check_module(name: str, required: bool = True) -> Check:
    """Check that a package imports and report its version."""
    try:
        module = importlib.import_module(name)
    except ImportError:
        status = WARN
        if required:
            status = FAIL
        return Check(name, status, f"not installed -- run: uv add {name}", required=required)
    version = getattr(module, "__version__", "unknown")
    return Check(name, PASS, f"v{version}", required=required)


def check_lyapunov() -> Check:
    """Schur-based Lyapunov solve on a fixed stable matrix, checked by its residual."""

    rng = np.random.default_rng(7)
    a = rng.standard_normal((6, 6))
    a -= (np.max(np.linalg.eigvals(a).real) + 1.0) * np.eye(6)
    w = np.eye(6)
    try:
        x = lyap_solve(a, w)
    except EpsctlError as e:
        return Check("lyapunov", FAIL, f"solve failed: {e}")
    rel = lyap_residual(a, x, w)
    if rel > 1e-10:
        return Check("lyapunov", FAIL, f"relative residual {rel:.2e}")
    return Check("lyapunov", PASS, f"relative residual {rel:.2e}")


def check_riccati() -> Check:
    """Scalar Riccati solve with a known root (1 + sqrt 2) / 2."""

    try:
        sol = solve_alpha_riccati([[0.0]], [[1.0]], [[1.0], [0.0]], [[0.0], [1.0]], 2.0)
    except EpsctlError as e:
        return Check("riccati", FAIL, f"solve failed: {e}")
    expected = (1.0 + np.sqrt(2.0)) / 2.0
    err = abs(float(sol.x[0, 0]) - expected)
    if err > 1e-9:
        return Check("riccati", FAIL, f"scalar root off by {err:.2e}")
    return Check("riccati", PASS, f"{sol.iterations} Newton steps, residual {sol.residual:.2e}")


def check_registry(config: Config) -> Check:
    """Check the named plant registry (optional)."""

    try:
        presets = build_registry(config.plants_file)
    except EpsctlError as e:
        return Check("plants", WARN, str(e), required=False)
    return Check("plants", PASS, f"{len(presets)} presets in {config.plants_file}", required=False)


def run_preflight(config: Optional[Config] = None) -> list[Check]:
    """Run all preflight checks and return results."""
    config = config or Config.from_env()
    checks: list[Check] = []

    # Packages
    checks.append(check_module("numpy"))
    checks.append(check_module("scipy"))
    checks.append(check_module("pydantic"))
    checks.append(check_module("yaml"))

    # Solvers
    checks.append(check_lyapunov())
    checks.append(check_riccati())

    # Registry
    checks.append(check_registry(config))

    return checks


def print_preflight(checks: list[Check], console=None) -> bool:
    """Print preflight results and return True if all required checks pass."""

    console = console or Console(stderr=True, highlight=False)
    console.print("\n=== epsctl Preflight Checks ===\n", markup=False)

    max_name = max(len(c.name) for c in checks)
    failed_required = False

    for c in checks:
        padding = " " * (max_name - len(c.name) + 2)
        console.print(f"  {c.status} {c.name}{padding}{c.detail}", markup=False)
        if c.status == FAIL and c.required:
            failed_required = True

    passed = sum(1 for c in checks if c.status == PASS)
    warned = sum(1 for c in checks if c.status == WARN)
    failed = sum(1 for c in checks if c.status == FAIL)

    console.print(f"\n  {passed} passed, {warned} warnings, {failed} failed", markup=False)

    if failed_required:
        console.print("\n  Required checks failed. Fix the above issues before running.\n", markup=False)
        return False
    console.print("\n  All required checks passed.\n", markup=False)
    return True
