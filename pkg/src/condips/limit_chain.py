"""The time-inhomogeneous limit chain for the tagged site's occupation.

Given a mean-field solution f(t), the chain jumps from w to

    w + 1       at rate beta_w(t)
    w - 1       at rate (w - 1)/w * mu_w(t)
    k >= 1      at rate c(w, k - 1) f_{k-1}(t) / w      (the particle relocates)

Paths are simulated exactly (for the interpolated f) by thinning. On one
grid cell f is linear in t, so beta_w + mu_w is too, and its largest value
over the cell sits on an end node. The dominating rate is that value times a
safety factor; it is recomputed after every jump and at every node.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numba
import numpy as np

from .errors import EnvelopeError, OutOfRangeError
from .kernels import Family, RateKernel, rate
from .meanfield import MeanFieldSolution, birth_death_rates, size_bias
from .seeding import path_rng

__all__ = [
    "LimitRates",
    "LimitChainState",
    "LimitEnsemble",
    "limit_rates",
    "step_limit",
    "simulate_path",
    "ensemble_law",
    "grid_check",
]

SAFETY = 1.05

# status codes returned by the compiled loop
_OK = 0
_ENVELOPE = 1
_RANGE = 2


@dataclass(frozen=True)
class LimitRates:
    """Rates out of ``w`` at time ``t``; ``long_range[k]`` is the rate to land on k."""

    w: int
    t: float
    birth: float
    death: float
    long_range: np.ndarray

    @property
    def total(self) -> float:
        return self.birth + self.death + float(self.long_range.sum())


@dataclass(frozen=True)
class LimitChainState:
    w: int
    t: float
    solution: MeanFieldSolution

    def __post_init__(self):
        if self.w < 1:
            raise ValueError(f"limit chain lives on w >= 1, got {self.w}")


def limit_rates(w: int, t: float, solution: MeanFieldSolution,
                kernel: RateKernel | None = None) -> LimitRates:
    """Rate decomposition out of ``w`` with f interpolated at ``t``."""
    if w < 1:
        raise ValueError(f"w must be >= 1, got {w}")
    kernel = kernel or solution.kernel
    f = solution.f_at(t)
    K = f.size - 1
    r = birth_death_rates(np.pad(f, (0, max(0, w + 1 - f.size))), kernel)
    mu, beta = float(r.mu[w]), float(r.beta[w])
    c_row = kernel.matrix(w, K)[w]
    long_range = np.zeros(K + 2)
    long_range[1:] = c_row * f / w
    return LimitRates(w, float(t), beta, (w - 1) / w * mu, long_range)


@dataclass
class _Tables:
    times: np.ndarray
    F: np.ndarray
    MU: np.ndarray
    BE: np.ndarray
    w_cap: int


def _tables(solution: MeanFieldSolution, kernel: RateKernel, w_cap: int | None) -> _Tables:
    K = solution.K
    if w_cap is None:
        w_cap = max(2 * (K + 1), K + 64)
    if kernel.family == Family.TABLE:
        w_cap = min(w_cap, kernel.table.shape[0] - 1, kernel.table.shape[1] - 1)
    key = ("limit", id(kernel), w_cap)
    cached = solution._cache.get(key)
    if cached is not None:
        return cached
    F = np.ascontiguousarray(solution.f)
    MU = F @ kernel.matrix(w_cap, K).T
    BE = F @ kernel.matrix(K, w_cap)
    MU[:, 0] = 0.0
    tabs = _Tables(np.asarray(solution.times, dtype=float), F, np.ascontiguousarray(MU),
                   np.ascontiguousarray(BE), w_cap)
    solution._cache[key] = tabs
    return tabs


@numba.njit(cache=True)
def _relocate_target(fam, a, tab, F, i, s, w, K, u):
    tot = 0.0
    for l in range(K + 1):
        fl = (1.0 - s) * F[i, l] + s * F[i + 1, l]
        tot += rate(fam, a, tab, w, l) * fl
    target = u * tot
    acc = 0.0
    last = 0
    for l in range(K + 1):
        fl = (1.0 - s) * F[i, l] + s * F[i + 1, l]
        r = rate(fam, a, tab, w, l) * fl
        if r > 0.0:
            last = l
            acc += r
            if target < acc:
                return l + 1
    return last + 1


@numba.njit(cache=True)
def _run_limit(fam, a, tab, times, F, MU, BE, w, t, t_end, obs, out, rng,
               safety, lip_slope, lip_const, max_jumps):
    """Advance one path from (w, t). Returns (status, w, t, jumps, worst ratio).

    ``lip_slope > 0`` selects the global linear envelope instead of the
    per-cell one.
    """
    M = times.size - 1
    K = F.shape[1] - 1
    w_cap = MU.shape[1] - 1
    i = np.searchsorted(times, t, side="right") - 1
    if i >= M:
        i = M - 1
    j = 0
    nobs = obs.size
    while j < nobs and obs[j] < t:
        j += 1
    jumps = 0
    worst = 0.0
    status = 0
    while jumps < max_jumps:
        if w > w_cap:
            status = 2
            break
        ta = MU[i, w] + BE[i, w]
        tb = MU[i + 1, w] + BE[i + 1, w]
        if lip_slope > 0.0:
            rbar = lip_slope * w + lip_const
        else:
            rbar = safety * max(ta, tb)
        cell_end = min(times[i + 1], t_end)
        if rbar > 0.0:
            tc = t + rng.standard_exponential() / rbar
        else:
            tc = np.inf
        if tc >= cell_end:
            while j < nobs and obs[j] <= cell_end:
                out[j] = w
                j += 1
            t = cell_end
            if cell_end >= t_end or i + 1 >= M:
                break
            i += 1
            continue
        while j < nobs and obs[j] < tc:
            out[j] = w
            j += 1
        t = tc
        h = times[i + 1] - times[i]
        s = (tc - times[i]) / h
        mu = (1.0 - s) * MU[i, w] + s * MU[i + 1, w]
        be = (1.0 - s) * BE[i, w] + s * BE[i + 1, w]
        true = mu + be
        ratio = true / rbar
        if ratio > worst:
            worst = ratio
        if ratio > 1.0 + 1e-12:
            status = 1
            break
        u = rng.random() * rbar
        if u >= true:
            continue
        jumps += 1
        if u < be:
            w += 1
        elif u < be + mu * (w - 1) / w:
            w -= 1
        else:
            w = _relocate_target(fam, a, tab, F, i, s, w, K, rng.random())
    return status, w, t, jumps, worst


class _Runner:
    def __init__(self, solution: MeanFieldSolution, kernel: RateKernel | None,
                 w_cap: int | None = None, lipschitz: bool = False, safety: float = SAFETY):
        self.kernel = kernel or solution.kernel
        self.solution = solution
        self.tabs = _tables(solution, self.kernel, w_cap)
        if len(self.tabs.times) < 2:
            raise ValueError("the mean-field solution needs at least two grid points")
        C, rho = self.kernel.C, solution.rho
        self.lip = (2 * C * (1 + rho), C * (1 + rho)) if lipschitz else (0.0, 0.0)
        self.safety = safety
        self.worst = 0.0

    def run(self, w, t, t_end, obs, rng, max_jumps=np.iinfo(np.int64).max):
        tabs = self.tabs
        if t < tabs.times[0] or t_end > tabs.times[-1] + 1e-12:
            raise OutOfRangeError(
                f"time window [{t}, {t_end}] leaves the solution grid "
                f"[{tabs.times[0]}, {tabs.times[-1]}]")
        out = np.zeros(obs.size, dtype=np.int64)
        status, w, t, jumps, worst = _run_limit(
            *self.kernel.jit_args, tabs.times, tabs.F, tabs.MU, tabs.BE, int(w), float(t),
            float(min(t_end, tabs.times[-1])), obs, out, rng, self.safety,
            self.lip[0], self.lip[1], max_jumps)
        self.worst = max(self.worst, worst)
        if status == _ENVELOPE:
            raise EnvelopeError(
                f"rate exceeded the dominating rate at t = {t:.6g}, w = {w} "
                f"(ratio {worst:.6g}); refine the mean-field grid")
        if status == _RANGE:
            raise OutOfRangeError(f"w = {w} exceeds the tabulated range {tabs.w_cap}")
        return int(w), float(t), out, int(jumps)


def step_limit(state: LimitChainState, kernel: RateKernel | None = None,
               rng: np.random.Generator | None = None, lipschitz: bool = False) -> LimitChainState:
    """Advance to the next accepted jump (or to the end of the grid)."""
    rng = rng if rng is not None else np.random.default_rng()
    runner = _Runner(state.solution, kernel, lipschitz=lipschitz)
    w, t, _, _ = runner.run(state.w, state.t, state.solution.times[-1], np.zeros(0), rng, 1)
    return LimitChainState(w, t, state.solution)


def simulate_path(w0: int, solution: MeanFieldSolution, t_obs, rng: np.random.Generator,
                  kernel: RateKernel | None = None, lipschitz: bool = False) -> np.ndarray:
    """Values of one path at the sorted times ``t_obs``."""
    obs = np.asarray(t_obs, dtype=float)
    runner = _Runner(solution, kernel, lipschitz=lipschitz)
    return runner.run(w0, float(solution.times[0]), float(obs[-1]), obs, rng)[2]


@dataclass(frozen=True)
class LimitEnsemble:
    """Values ``samples[path, j]`` at ``times[j]`` with derived summaries."""

    times: np.ndarray
    samples: np.ndarray
    worst_ratio: float

    @property
    def n_paths(self) -> int:
        return self.samples.shape[0]

    def histogram(self, j: int, width: int | None = None) -> np.ndarray:
        col = self.samples[:, j]
        width = max(int(col.max()) + 1, width or 0)
        return np.bincount(col, minlength=width) / self.n_paths

    def histograms(self) -> np.ndarray:
        width = int(self.samples.max()) + 1
        return np.array([self.histogram(j, width) for j in range(len(self.times))])

    def stderr(self) -> np.ndarray:
        h = self.histograms()
        return np.sqrt(h * (1 - h) / self.n_paths)

    def moment(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """E[W^n] per time with its standard error."""
        x = self.samples.astype(float) ** n
        return x.mean(axis=0), x.std(axis=0, ddof=1) / np.sqrt(self.n_paths)


def _law_sampler(law) -> Callable[[np.random.Generator], int]:
    law = np.asarray(law, dtype=float)
    cdf = np.cumsum(law)
    cdf /= cdf[-1]

    def draw(rng):
        return int(np.searchsorted(cdf, rng.random(), side="right"))

    return draw


def ensemble_law(w0_sampler, solution: MeanFieldSolution, kernel: RateKernel | None, t_obs,
                 n_paths: int, master_seed: int, lipschitz: bool = False) -> LimitEnsemble:
    """Independent paths, path i seeded with ``derive_seed(master_seed, i)``.

    ``w0_sampler`` is a callable ``rng -> int``, a probability vector over w,
    or None for the size-biased initial profile.
    """
    if w0_sampler is None:
        w0_sampler = size_bias(solution.f[0], solution.rho)
    if not callable(w0_sampler):
        w0_sampler = _law_sampler(w0_sampler)
    obs = np.asarray(t_obs, dtype=float)
    if obs.size == 0 or np.any(np.diff(obs) < 0):
        raise ValueError("observation times must be a non-empty sorted list")
    runner = _Runner(solution, kernel, lipschitz=lipschitz)
    t0 = float(solution.times[0])
    t_end = float(obs[-1])
    samples = np.empty((n_paths, obs.size), dtype=np.int64)
    for p in range(n_paths):
        rng = path_rng(master_seed, p)
        w0 = w0_sampler(rng)
        if w0 < 1:
            raise ValueError(f"initial value {w0} is not a positive occupation")
        samples[p] = runner.run(w0, t0, t_end, obs, rng)[2]
    return LimitEnsemble(obs, samples, runner.worst)


def grid_check(solution: MeanFieldSolution, quantile: float = 0.999, tol: float = 0.01):
    """Largest relative change of beta_w + mu_w between adjacent grid nodes.

    Only w up to the ``quantile`` of the size-biased law (over all grid
    times) is inspected. Returns ``(ok, worst)``.
    """
    P = size_bias(solution.f, solution.rho)
    cdf = np.cumsum(P, axis=1)
    w_max = int(max(np.searchsorted(row, quantile) for row in cdf))
    w_max = max(w_max, 1)
    worst = solution.rate_variation(w_max)
    return worst < tol, worst
