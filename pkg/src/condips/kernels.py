"""Jump-rate kernels c(k, l) for zero-range type dynamics on the complete graph.

A kernel gives the rate at which one particle leaves a site holding ``k``
particles for a site holding ``l`` particles. Every kernel shipped here
vanishes on empty departure sites and obeys the bilinear growth bound

    c(k, l) <= C * k * (1 + l)

with a stored constant ``C``. The coupling construction uses ``C`` directly,
so it is declared per family rather than recomputed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from os import PathLike
from typing import Mapping

import numba
import numpy as np

from .errors import InvalidKernelError, OutOfRangeError

__all__ = [
    "Family",
    "RateKernel",
    "SublinearityCertificate",
    "evaluate",
    "certify_sublinearity",
    "kernel_from_config",
    "load_table",
]


class Family(enum.IntEnum):
    INDEPENDENT = 0
    ZERO_RANGE = 1
    INCLUSION = 2
    TABLE = 3


_CONFIG_NAMES = {
    "independent": Family.INDEPENDENT,
    "zero-range": Family.ZERO_RANGE,
    "inclusion": Family.INCLUSION,
    "table": Family.TABLE,
}

_EMPTY_TABLE = np.zeros((1, 1))


@dataclass(frozen=True, eq=False)
class RateKernel:
    """Immutable rate kernel.

    Use the classmethod constructors rather than calling this directly.
    ``param`` is ``b`` for zero-range, ``d`` for inclusion and unused otherwise.
    """

    family: Family
    param: float = 0.0
    C: float = 1.0
    table: np.ndarray = field(default_factory=lambda: _EMPTY_TABLE, repr=False)

    @classmethod
    def independent(cls) -> "RateKernel":
        return cls(Family.INDEPENDENT, 0.0, 1.0)

    @classmethod
    def zero_range(cls, b: float) -> "RateKernel":
        if not b >= 0:
            raise InvalidKernelError(f"zero-range parameter b must be >= 0, got {b}")
        return cls(Family.ZERO_RANGE, float(b), 1.0 + float(b))

    @classmethod
    def inclusion(cls, d: float) -> "RateKernel":
        if not d > 0:
            raise InvalidKernelError(f"inclusion parameter d must be > 0, got {d}")
        return cls(Family.INCLUSION, float(d), max(float(d), 1.0))

    @classmethod
    def from_table(cls, table, C: float | None = None) -> "RateKernel":
        """Kernel given by a finite matrix ``table[k, l]``.

        If ``C`` is omitted the smallest admissible constant over the table is
        used. A declared ``C`` that the table exceeds is rejected.
        """
        tab = np.array(table, dtype=float, ndmin=2)
        if tab.ndim != 2 or tab.shape[0] < 2:
            raise InvalidKernelError("rate table needs at least rows k = 0 and k = 1")
        if np.any(~np.isfinite(tab)) or np.any(tab < 0):
            raise InvalidKernelError("rate table entries must be finite and nonnegative")
        if np.any(tab[0] != 0):
            raise InvalidKernelError("rate table row k = 0 must vanish")
        tab.setflags(write=False)
        c_min = _table_c_min(tab)
        if C is None:
            C = c_min if c_min > 0 else 1.0
        elif c_min > C * (1 + 1e-12):
            raise InvalidKernelError(
                f"table violates the bilinear bound with C = {C} (needs {c_min})"
            )
        return cls(Family.TABLE, 0.0, float(C), tab)

    @property
    def name(self) -> str:
        return {
            Family.INDEPENDENT: "independent",
            Family.ZERO_RANGE: "zero-range",
            Family.INCLUSION: "inclusion",
            Family.TABLE: "table",
        }[self.family]

    def describe(self) -> dict:
        out = {"model": self.name, "C": self.C}
        if self.family == Family.ZERO_RANGE:
            out["b"] = self.param
        elif self.family == Family.INCLUSION:
            out["d"] = self.param
        elif self.family == Family.TABLE:
            out["table_shape"] = list(self.table.shape)
        return out

    @property
    def jit_args(self) -> tuple[int, float, np.ndarray]:
        """``(family code, parameter, table)`` as consumed by the compiled loops."""
        return int(self.family), float(self.param), np.asarray(self.table, dtype=float)

    def __call__(self, k: int, l: int) -> float:
        return evaluate(self, k, l)

    def matrix(self, K: int, L: int | None = None) -> np.ndarray:
        """Dense array ``c[k, l]`` for ``0 <= k <= K`` and ``0 <= l <= L``."""
        L = K if L is None else L
        k = np.arange(K + 1, dtype=float)[:, None]
        l = np.arange(L + 1, dtype=float)[None, :]
        if self.family == Family.INDEPENDENT:
            out = np.broadcast_to(k, (K + 1, L + 1)).copy()
        elif self.family == Family.ZERO_RANGE:
            with np.errstate(divide="ignore"):
                out = np.broadcast_to(1.0 + self.param / k, (K + 1, L + 1)).copy()
        elif self.family == Family.INCLUSION:
            out = k * (self.param + l)
        else:
            if K >= self.table.shape[0] or L >= self.table.shape[1]:
                raise OutOfRangeError(
                    f"rate table of shape {self.table.shape} queried up to ({K}, {L})"
                )
            out = np.array(self.table[: K + 1, : L + 1], dtype=float)
        out[0, :] = 0.0
        return out


@numba.njit(cache=True)
def rate(fam, a, tab, k, l):
    """Compiled kernel evaluation shared by all simulation loops."""
    if k <= 0:
        return 0.0
    if fam == 0:
        return float(k)
    elif fam == 1:
        return 1.0 + a / k
    elif fam == 2:
        return k * (a + l)
    if k >= tab.shape[0] or l >= tab.shape[1]:
        raise IndexError("rate table queried outside its bounds")
    return tab[k, l]


def evaluate(kernel: RateKernel, k: int, l: int) -> float:
    if k < 0 or l < 0:
        raise OutOfRangeError(f"occupations must be nonnegative, got ({k}, {l})")
    if k == 0:
        return 0.0
    fam = kernel.family
    if fam == Family.INDEPENDENT:
        return float(k)
    if fam == Family.ZERO_RANGE:
        return 1.0 + kernel.param / k
    if fam == Family.INCLUSION:
        return k * (kernel.param + l)
    tab = kernel.table
    if k >= tab.shape[0] or l >= tab.shape[1]:
        raise OutOfRangeError(f"rate table of shape {tab.shape} has no entry ({k}, {l})")
    return float(tab[k, l])


@dataclass(frozen=True)
class SublinearityCertificate:
    C_min: float
    violation: tuple[int, int] | None = None

    @property
    def ok(self) -> bool:
        return self.violation is None


def _table_c_min(tab: np.ndarray) -> float:
    k = np.arange(tab.shape[0], dtype=float)[:, None]
    l = np.arange(tab.shape[1], dtype=float)[None, :]
    ratio = tab[1:] / (k[1:] * (1.0 + l))
    return float(ratio.max())


def certify_sublinearity(kernel: RateKernel, k_max: int, l_max: int) -> SublinearityCertificate:
    """Smallest C with c(k,l) <= C k (1+l) on ``1..k_max x 0..l_max``.

    If some grid point exceeds the kernel's declared ``C`` the first such pair
    (row-major order) is reported as ``violation``. Table kernels are checked
    only where the table is defined.
    """
    if k_max < 1 or l_max < 1:
        raise ValueError("k_max and l_max must be >= 1")
    if kernel.family == Family.TABLE:
        k_max = min(k_max, kernel.table.shape[0] - 1)
        l_max = min(l_max, kernel.table.shape[1] - 1)
    c = kernel.matrix(k_max, l_max)[1:]
    k = np.arange(1, k_max + 1, dtype=float)[:, None]
    l = np.arange(l_max + 1, dtype=float)[None, :]
    ratio = c / (k * (1.0 + l))
    bad = np.argwhere(ratio > kernel.C * (1 + 1e-12))
    violation = None
    if len(bad):
        violation = (int(bad[0, 0]) + 1, int(bad[0, 1]))
    return SublinearityCertificate(float(ratio.max()), violation)


def load_table(path: str | PathLike) -> np.ndarray:
    """Read a CSV matrix; row index is k from 0, column index is l from 0."""
    return np.loadtxt(path, delimiter=",", ndmin=2)


def kernel_from_config(section: Mapping[str, str]) -> RateKernel:
    """Build a kernel from the ``[model]`` section of an experiment config."""
    try:
        family = _CONFIG_NAMES[str(section.get("model", "")).strip().lower()]
    except KeyError:
        raise InvalidKernelError(
            f"unknown model {section.get('model')!r}; expected one of {sorted(_CONFIG_NAMES)}"
        ) from None
    try:
        if family == Family.INDEPENDENT:
            return RateKernel.independent()
        if family == Family.ZERO_RANGE:
            return RateKernel.zero_range(float(section["b"]))
        if family == Family.INCLUSION:
            return RateKernel.inclusion(float(section["d"]))
        C = section.get("C")
        return RateKernel.from_table(load_table(section["table"]), None if C is None else float(C))
    except KeyError as exc:
        raise InvalidKernelError(f"model {section.get('model')!r} requires key {exc}") from None
    except (OSError, ValueError) as exc:
        if isinstance(exc, InvalidKernelError):
            raise
        raise InvalidKernelError(str(exc)) from exc
