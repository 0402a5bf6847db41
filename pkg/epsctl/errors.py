"""Exception hierarchy for epsctl.

Every error carries the process exit code the CLI maps it to:
2 for invalid input or configuration, 3 for numerical failures.
"""


class EpsctlError(Exception):
    exit_code: int = 2


class InvalidModel(EpsctlError):
    """A system or plant violates a dimensional or structural assumption."""


class InvalidConfig(EpsctlError):
    """A solver or search configuration is out of range."""


class RegistryError(EpsctlError):
    """The named plant registry is missing or malformed."""


class AlphaOutOfRange(EpsctlError):
    """alpha lies outside the admissible window (0, -2r)."""


class InfeasibleLmi(EpsctlError):
    """No strictly feasible point exists for a Lyapunov-parameterized LMI."""


class NumericalFailure(EpsctlError):
    exit_code = 3


class SolverDegenerate(NumericalFailure):
    """A Lyapunov or Riccati solve hit a singular (unstable or marginal) operator."""
