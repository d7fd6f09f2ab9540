"""Interacting particle systems on the complete graph and their mean-field limits.

Exact simulation of zero-range and inclusion type dynamics, the tagged-site
occupation process, the mean-field equations, the limiting birth-death chain
with long-range jumps, a dominating coupling and exact small-system laws.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CondipsError,
    ConfigError,
    InvariantViolation,
    NumericalError,
    OutOfRangeError,
    PathError,
)
from .kernels import RateKernel, certify_sublinearity  # noqa: E402
from .seeding import derive_seed  # noqa: E402
from .state import ClassConfig, InitScheme, TaggedSite, TaggedState  # noqa: E402

__all__ = [
    "__version__",
    "CondipsError",
    "ConfigError",
    "InvariantViolation",
    "NumericalError",
    "OutOfRangeError",
    "PathError",
    "RateKernel",
    "certify_sublinearity",
    "derive_seed",
    "ClassConfig",
    "InitScheme",
    "TaggedSite",
    "TaggedState",
]
