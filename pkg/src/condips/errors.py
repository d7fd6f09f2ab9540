"""Exception hierarchy shared by the simulators, solvers and CLI."""


class CondipsError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(CondipsError, ValueError):
    exit_code = 2


class InvalidKernelError(ConfigError):
    pass


class InvalidLatticeError(ConfigError):
    pass


class InvalidDensityError(ConfigError):
    pass


class OutOfRangeError(CondipsError, IndexError):
    """A lookup fell outside a finite table (rate table, test function, time grid)."""

    exit_code = 3


class NumericalError(CondipsError, ArithmeticError):
    exit_code = 3


class StiffnessError(NumericalError):
    """Adaptive step size underflowed; ``state`` holds the last accepted point."""

    def __init__(self, message, t=None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state


class EnvelopeError(NumericalError):
    """Thinning bound was exceeded by the true rate at a candidate time."""


class MomentOverflowError(NumericalError, OverflowError):
    pass


class AbsorbingStateError(CondipsError):
    """Total jump rate is zero; there is no next event."""

    exit_code = 3


class InvariantViolation(CondipsError, AssertionError):
    exit_code = 4


class PathError(CondipsError):
    """A single trajectory of an ensemble failed; carries its seed for replay."""

    def __init__(self, index, seed, cause):
        super().__init__(f"path {index} (seed {seed}) failed: {cause!r}")
        self.index = index
        self.seed = seed
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)
