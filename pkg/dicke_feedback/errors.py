"""Exception hierarchy shared by every module.

The ``exit_code`` class attribute is what the command line returns when the
exception escapes a run.
"""


class DickeFeedbackError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ParameterError(DickeFeedbackError, ValueError):
    """Invalid physical parameters."""

    exit_code = 2


class KernelError(ParameterError):
    """Invalid feedback kernel definition."""


class HilbertSpaceError(ParameterError):
    """Cutoffs too small or operator checks failed at build time."""


class ConfigError(DickeFeedbackError):
    """Experiment configuration does not match the schema."""

    exit_code = 2

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class NumericalError(DickeFeedbackError):
    """A computation could not produce a trustworthy number."""

    exit_code = 3


class SpectralPoleError(NumericalError):
    """delta^2 + (kappa + i omega)^2 vanished."""


class NoThresholdError(NumericalError):
    """No finite critical value exists for these parameters."""


class UnstableRegimeError(NumericalError):
    """Stationary quantity requested above threshold."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not reach the requested tolerance."""


class StepSizeError(NumericalError):
    """Integrator step too large for the requested accuracy."""


class NegativityError(StepSizeError):
    """Density matrix acquired a negative eigenvalue beyond tolerance."""


class NoBracketError(NumericalError):
    """Bisection interval does not contain a sign change."""
