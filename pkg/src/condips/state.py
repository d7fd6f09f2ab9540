"""Exchangeable configurations on the complete graph.

On the complete graph the dynamics only sees how many sites hold ``k``
particles, so a configuration is stored as class counts ``n_k``. The tagged
particle's site is kept apart from the other ``L - 1`` sites.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvalidLatticeError, MomentOverflowError

__all__ = [
    "ClassConfig",
    "TaggedState",
    "EmpiricalMeasure",
    "Placement",
    "TaggedSite",
    "InitScheme",
    "sample_initial",
    "sample_config",
    "empirical_measure",
    "moment",
    "MAX_MOMENT_ORDER",
]

MAX_MOMENT_ORDER = 6


def _trim(counts: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(counts)
    top = nz[-1] + 1 if len(nz) else 1
    return counts[:top]


@dataclass(frozen=True, eq=False)
class ClassConfig:
    """Counts ``counts[k]`` = number of sites with exactly ``k`` particles."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 1:
            raise ValueError("counts must be one-dimensional")
        if c.size == 0:
            c = np.zeros(1, dtype=np.int64)
        if np.any(c < 0):
            raise ValueError("class counts must be nonnegative")
        if not np.issubdtype(c.dtype, np.integer):
            if np.any(c != np.round(c)):
                raise ValueError("class counts must be integers")
        c = _trim(c.astype(np.int64))
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @classmethod
    def from_dict(cls, mapping: dict[int, int]) -> "ClassConfig":
        if not mapping:
            return cls(np.zeros(1, dtype=np.int64))
        out = np.zeros(max(mapping) + 1, dtype=np.int64)
        for k, n in mapping.items():
            out[k] += n
        return cls(out)

    @classmethod
    def from_occupations(cls, eta) -> "ClassConfig":
        return cls(np.bincount(np.asarray(eta, dtype=np.int64)))

    @property
    def L(self) -> int:
        return int(self.counts.sum())

    @property
    def N(self) -> int:
        return int(np.dot(np.arange(self.counts.size), self.counts))

    @property
    def max_occupation(self) -> int:
        return self.counts.size - 1

    def n(self, k: int) -> int:
        return int(self.counts[k]) if 0 <= k < self.counts.size else 0

    def key(self) -> tuple[int, ...]:
        """Hashable identity, used for laws over configurations."""
        return tuple(int(x) for x in self.counts)

    def add_site(self, k: int) -> "ClassConfig":
        out = np.zeros(max(self.counts.size, k + 1), dtype=np.int64)
        out[: self.counts.size] = self.counts
        out[k] += 1
        return ClassConfig(out)

    def remove_site(self, k: int) -> "ClassConfig":
        if self.n(k) == 0:
            raise ValueError(f"no site with occupation {k} to remove")
        out = self.counts.copy()
        out[k] -= 1
        return ClassConfig(out)

    def to_dict(self) -> dict[int, int]:
        return {k: int(n) for k, n in enumerate(self.counts) if n}

    def __eq__(self, other):
        if not isinstance(other, ClassConfig):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"ClassConfig({self.to_dict()})"


@dataclass(frozen=True)
class TaggedState:
    """Non-tagged sites as class counts plus the tagged site's occupation ``W``."""

    env: ClassConfig
    W: int

    def __post_init__(self):
        if self.W < 1:
            raise ValueError(f"tagged-site occupation must be >= 1, got {self.W}")
        object.__setattr__(self, "W", int(self.W))

    @property
    def L(self) -> int:
        return self.env.L + 1

    @property
    def N(self) -> int:
        return self.env.N + self.W

    def full(self) -> ClassConfig:
        """The whole configuration with the tag forgotten."""
        return self.env.add_site(self.W)


@dataclass(frozen=True)
class EmpiricalMeasure:
    """``f[k]`` is the fraction of sites holding k particles, ``p[k]`` the
    fraction of particles sitting on such sites. ``p`` is None when N = 0,
    and ``p[0]`` is always 0."""

    f: np.ndarray
    p: np.ndarray | None
    L: int
    N: int


def empirical_measure(cfg: ClassConfig, exact: bool = False):
    """F_k = n_k / L and P_k = k n_k / N.

    With ``exact=True`` the two vectors are lists of ``Fraction``.
    """
    L, N = cfg.L, cfg.N
    if exact:
        f = [Fraction(int(n), L) for n in cfg.counts]
        p = None if N == 0 else [Fraction(k * int(n), N) for k, n in enumerate(cfg.counts)]
        return EmpiricalMeasure(f, p, L, N)
    counts = cfg.counts.astype(float)
    f = counts / L
    p = None
    if N > 0:
        p = np.arange(counts.size) * counts / N
    return EmpiricalMeasure(f, p, L, N)


def moment(cfg: ClassConfig, n: int) -> float:
    """(1/L) sum_k k**n n_k, accumulated exactly in integers.

    Orders above ``MAX_MOMENT_ORDER`` are refused.
    """
    if n < 0 or n > MAX_MOMENT_ORDER:
        raise ValueError(f"moment order must be in 0..{MAX_MOMENT_ORDER}, got {n}")
    total = sum(k**n * int(c) for k, c in enumerate(cfg.counts) if c)
    try:
        return float(Fraction(total, cfg.L))
    except OverflowError as exc:
        raise MomentOverflowError(f"moment of order {n} does not fit a double") from exc


class Placement(enum.Enum):
    UNIFORM_IID = "uniform"


class TaggedSite(enum.Enum):
    FIXED = "fixed"
    UNIFORM = "uniform"
    MAX = "max"


@dataclass(frozen=True)
class InitScheme:
    """How to draw the initial configuration.

    ``TaggedSite.MAX`` puts the tag on a most occupied site, which breaks the
    uniform second-moment bound on the tagged site; it is refused unless
    ``allow_max_site`` is set.
    """

    placement: Placement = Placement.UNIFORM_IID
    tagged: TaggedSite = TaggedSite.FIXED
    allow_max_site: bool = False

    def __post_init__(self):
        if self.tagged == TaggedSite.MAX and not self.allow_max_site:
            raise ValueError("MaxSite tagging needs allow_max_site=True")


def sample_initial(L: int, N: int, scheme: InitScheme, rng: np.random.Generator) -> TaggedState:
    """Place N - 1 particles uniformly and independently, then add the tagged one."""
    if L < 2:
        raise InvalidLatticeError(f"need at least two sites, got L = {L}")
    if N < 1:
        raise InvalidLatticeError(f"need at least the tagged particle, got N = {N}")
    eta = np.bincount(rng.integers(L, size=N - 1), minlength=L)
    if scheme.tagged == TaggedSite.FIXED:
        x = 0
    elif scheme.tagged == TaggedSite.UNIFORM:
        x = int(rng.integers(L))
    else:
        x = int(np.argmax(eta))
    W = int(eta[x]) + 1
    env = np.bincount(np.delete(eta, x), minlength=1)
    return TaggedState(ClassConfig(env), W)


def sample_config(L: int, N: int, rng: np.random.Generator) -> ClassConfig:
    """N particles placed independently and uniformly, no tag."""
    if L < 2:
        raise InvalidLatticeError(f"need at least two sites, got L = {L}")
    if N < 0:
        raise InvalidLatticeError(f"particle number must be >= 0, got N = {N}")
    return ClassConfig(np.bincount(np.bincount(rng.integers(L, size=N), minlength=L)))
