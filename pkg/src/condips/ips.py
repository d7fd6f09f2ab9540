"""Exact event-driven simulation of the particle system on the complete graph.

The state is the vector of class counts ``n``. A jump moves one particle from
a site of class ``k`` to a different site of class ``l`` at total rate

    r(k, l) = c(k, l) * n_k * (n_l - [k == l]) / (L - 1).

Row sums ``S[k] = sum_l c(k,l) n_k (n_l - [k == l])`` are cached and patched
after each event: only the touched rows are recomputed, every other row
gets a rank-one correction. Event selection is a two-level linear search
(row, then target), so one event costs O(K) with K the largest occupation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import AbsorbingStateError, OutOfRangeError
from .kernels import RateKernel, rate
from .state import ClassConfig, EmpiricalMeasure, empirical_measure

__all__ = ["EventTable", "total_rate", "step", "simulate", "Trajectory"]


@numba.njit(cache=True)
def _row_sum(fam, a, tab, n, K, r):
    nr = n[r]
    if r == 0 or nr == 0:
        return 0.0
    s = 0.0
    for l in range(K + 1):
        m = n[l] - 1 if l == r else n[l]
        if m > 0:
            s += rate(fam, a, tab, r, l) * m
    return s * nr


@numba.njit(cache=True)
def _rebuild(fam, a, tab, n, K, S):
    S[:] = 0.0
    for r in range(1, K + 1):
        S[r] = _row_sum(fam, a, tab, n, K, r)


@numba.njit(cache=True)
def _apply_changes(fam, a, tab, n, K, S, cls, dlt, m):
    """Add ``dlt[j]`` to ``n[cls[j]]`` for j < m and patch the row sums.

    Returns the new largest occupied class.
    """
    for j in range(m):
        n[cls[j]] += dlt[j]
    newK = K
    for j in range(m):
        if cls[j] > newK and n[cls[j]] > 0:
            newK = cls[j]
    while newK > 0 and n[newK] == 0:
        newK -= 1
    top = max(K, newK)
    for r in range(1, top + 1):
        touched = False
        for j in range(m):
            if cls[j] == r:
                touched = True
                break
        if touched:
            S[r] = _row_sum(fam, a, tab, n, newK, r)
        elif n[r] > 0:
            acc = 0.0
            for j in range(m):
                if dlt[j] != 0:
                    acc += rate(fam, a, tab, r, cls[j]) * dlt[j]
            S[r] += n[r] * acc
        else:
            S[r] = 0.0
    return newK


@numba.njit(cache=True)
def _kahan_sum(x, hi):
    s = 0.0
    comp = 0.0
    for i in range(hi + 1):
        y = x[i] - comp
        t = s + y
        comp = (t - s) - y
        s = t
    return s


@numba.njit(cache=True)
def _select_pair(fam, a, tab, n, K, S, target):
    acc = 0.0
    k = -1
    for r in range(1, K + 1):
        if S[r] > 0.0:
            k = r
            acc += S[r]
            if target < acc:
                break
    inner = (target - (acc - S[k])) / n[k]
    acc = 0.0
    l = -1
    for j in range(K + 1):
        m = n[j] - 1 if j == k else n[j]
        if m > 0:
            w = rate(fam, a, tab, k, j) * m
            if w > 0.0:
                l = j
                acc += w
                if inner < acc:
                    break
    return k, l


@numba.njit(cache=True)
def _move(fam, a, tab, n, K, S, cls, dlt, k, l):
    cls[0] = k
    dlt[0] = -1
    cls[1] = k - 1
    dlt[1] = 1
    cls[2] = l
    dlt[2] = -1
    cls[3] = l + 1
    dlt[3] = 1
    return _apply_changes(fam, a, tab, n, K, S, cls, dlt, 4)


@numba.njit(cache=True)
def _run(fam, a, tab, n, K, L, t_max, obs, rng, out, max_events):
    """Advance ``n`` in place until ``t_max`` or ``max_events`` events.

    ``out[i]`` receives the counts at ``obs[i]`` (state after all events at
    times <= obs[i]). Returns (K, time of last event, events, absorbed).
    """
    S = np.zeros(n.size)
    _rebuild(fam, a, tab, n, K, S)
    cls = np.empty(4, np.int64)
    dlt = np.empty(4, np.int64)
    t = 0.0
    i = 0
    nobs = obs.size
    events = 0
    absorbed = False
    while events < max_events:
        tot = _kahan_sum(S, K)
        if tot <= 0.0:
            absorbed = True
            break
        tn = t + rng.standard_exponential() * (L - 1) / tot
        while i < nobs and obs[i] < tn:
            out[i, :] = n
            i += 1
        if tn > t_max:
            break
        k, l = _select_pair(fam, a, tab, n, K, S, rng.random() * tot)
        K = _move(fam, a, tab, n, K, S, cls, dlt, k, l)
        t = tn
        events += 1
    while i < nobs and obs[i] <= t_max:
        out[i, :] = n
        i += 1
    return K, t, events, absorbed


def _work_array(cfg: ClassConfig) -> np.ndarray:
    n = np.zeros(cfg.N + 2, dtype=np.int64)
    n[: cfg.counts.size] = cfg.counts
    return n


class EventTable:
    """Incrementally maintained pair rates for one configuration.

    ``rows[k]`` equals ``(L-1) * sum_l r(k, l)``. Mostly useful for checking
    the incremental bookkeeping against :meth:`rebuilt`.
    """

    def __init__(self, cfg: ClassConfig, kernel: RateKernel):
        self.kernel = kernel
        self.L = cfg.L
        self.n = _work_array(cfg)
        self.K = cfg.max_occupation
        self.rows = np.zeros(self.n.size)
        _rebuild(*kernel.jit_args, self.n, self.K, self.rows)
        self._cls = np.empty(4, np.int64)
        self._dlt = np.empty(4, np.int64)

    @property
    def total(self) -> float:
        return float(_kahan_sum(self.rows, self.K)) / (self.L - 1)

    def pair_rates(self) -> np.ndarray:
        """Matrix ``r[k, l]`` for the current counts."""
        K = self.K
        c = self.kernel.matrix(K)
        n = self.n[: K + 1].astype(float)
        m = np.broadcast_to(n, (K + 1, K + 1)) - np.eye(K + 1)
        return c * n[:, None] * np.clip(m, 0, None) / (self.L - 1)

    def apply_move(self, k: int, l: int) -> None:
        if self.n[k] < 1 or k < 1 or self.n[l] - (k == l) < 1:
            raise ValueError(f"no move from class {k} to class {l}")
        if l + 1 >= self.n.size:
            raise OutOfRangeError("move exceeds particle number")
        self.K = int(_move(*self.kernel.jit_args, self.n, self.K, self.rows,
                           self._cls, self._dlt, k, l))

    def sample_move(self, rng: np.random.Generator) -> tuple[int, int]:
        tot = float(_kahan_sum(self.rows, self.K))
        if tot <= 0:
            raise AbsorbingStateError("total rate is zero")
        k, l = _select_pair(*self.kernel.jit_args, self.n, self.K, self.rows, rng.random() * tot)
        return int(k), int(l)

    def config(self) -> ClassConfig:
        return ClassConfig(self.n[: self.K + 1].copy())

    def rebuilt(self) -> "EventTable":
        return EventTable(self.config(), self.kernel)


def total_rate(cfg: ClassConfig, kernel: RateKernel) -> float:
    """(1/(L-1)) sum_{k>=1, l>=0} c(k,l) n_k (n_l - [k == l])."""
    if cfg.L < 2:
        return 0.0
    return EventTable(cfg, kernel).total


def step(cfg: ClassConfig, kernel: RateKernel, rng: np.random.Generator) -> tuple[ClassConfig, float]:
    """One Gillespie event: waiting time first, then the class pair."""
    n = _work_array(cfg)
    empty = np.zeros((0, n.size), dtype=np.int64)
    K, t, events, absorbed = _run(*kernel.jit_args, n, cfg.max_occupation, cfg.L, np.inf,
                                  np.zeros(0), rng, empty, 1)
    if absorbed:
        raise AbsorbingStateError("total rate is zero")
    return ClassConfig(n[: K + 1].copy()), float(t)


@dataclass(frozen=True)
class Trajectory:
    """Observed class counts; row ``i`` of ``counts`` is the state at ``times[i]``."""

    times: np.ndarray
    counts: np.ndarray
    final: ClassConfig
    n_events: int
    L: int
    N: int
    extra: dict = field(default_factory=dict)

    def configs(self) -> list[ClassConfig]:
        return [ClassConfig(row) for row in self.counts]

    def measures(self) -> list[EmpiricalMeasure]:
        return [empirical_measure(c) for c in self.configs()]

    def fk(self) -> np.ndarray:
        """Empirical measure F_k at every observation time, shape (times, k)."""
        return self.counts / self.L


def _check_grid(obs_grid, t_max) -> np.ndarray:
    obs = np.asarray(obs_grid, dtype=float).ravel()
    if obs.size and (np.any(np.diff(obs) < 0) or obs[0] < 0 or obs[-1] > t_max):
        raise ValueError("observation grid must be sorted and inside [0, t_max]")
    return obs


def run_counts(cfg0: ClassConfig, kernel: RateKernel, t_max: float, obs: np.ndarray, rng):
    """Array-level simulation used by the ensemble drivers.

    Returns ``(counts at obs, final work array, K, events, absorbed)``.
    """
    n = _work_array(cfg0)
    out = np.zeros((obs.size, n.size), dtype=np.int64)
    K, _, events, absorbed = _run(*kernel.jit_args, n, cfg0.max_occupation, cfg0.L,
                                  float(t_max), obs, rng, out, np.iinfo(np.int64).max)
    return out, n, int(K), int(events), bool(absorbed)


def simulate(cfg0: ClassConfig, kernel: RateKernel, t_max: float, obs_grid,
             rng: np.random.Generator) -> Trajectory:
    """Run one trajectory up to ``t_max`` and record it on ``obs_grid``."""
    if cfg0.L < 2:
        raise ValueError("need L >= 2")
    obs = _check_grid(obs_grid, t_max)
    out, n, K, events, absorbed = run_counts(cfg0, kernel, t_max, obs, rng)
    if absorbed and t_max > 0:
        raise AbsorbingStateError("configuration has no possible jumps")
    width = max(int(np.flatnonzero(out.any(axis=0))[-1]) + 1 if out.size and out.any() else 1, 1)
    return Trajectory(obs, out[:, :width], ClassConfig(n[: K + 1].copy()), events,
                      cfg0.L, cfg0.N)
