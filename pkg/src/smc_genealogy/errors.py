"""Exception types raised across the package."""


class SMCGenealogyError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SMCGenealogyError, ValueError):
    """Invalid model or experiment configuration."""


class InputError(SMCGenealogyError, ValueError):
    """An argument violates the documented preconditions."""


class SizeGuardError(InputError):
    """A brute-force or partition-space routine was asked for a size it refuses to handle."""


class NumericError(SMCGenealogyError, ArithmeticError):
    """A potential or weight evaluated to a nonfinite value."""


class DegenerateWeightsError(SMCGenealogyError):
    """Every potential in a generation evaluated to zero."""

    def __init__(self, generation):
        self.generation = generation
        super().__init__(f"all potentials are zero at generation {generation}")


class HorizonExhaustedError(SMCGenealogyError):
    """The cumulative coalescence rate never reaches the requested time."""

    def __init__(self, target, achieved):
        self.target = target
        self.achieved = achieved
        super().__init__(
            f"cumulative coalescence {achieved!r} never reaches {target!r} "
            "within the recorded horizon"
        )


class InvariantViolation(SMCGenealogyError, AssertionError):
    """A per-path invariant failed during experiment collection."""
