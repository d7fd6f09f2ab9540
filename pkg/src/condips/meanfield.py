"""Mean-field equations for the occupation law f_k(t) and its size-biased p_k(t).

The law of a single site's occupation evolves as a nonlinear birth-death chain

    df_k/dt = mu_{k+1} f_{k+1} + beta_{k-1} f_{k-1} - (mu_k + beta_k) f_k

with mu_k = sum_l c(k,l) f_l and beta_k = sum_{l>=1} c(l,k) f_l. The
size-biased law p_k = k f_k / rho solves its own master equation, which is
integrated separately as a cross-check.

The hierarchy is truncated at K with every flux across K removed; K grows
during integration whenever f_{K-1} + f_K exceeds ``epsilon_tail``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import RK45
from scipy.stats import poisson

from .errors import InvalidDensityError, OutOfRangeError, StiffnessError
from .kernels import Family, RateKernel

__all__ = [
    "BirthDeathRates",
    "MeanFieldSolution",
    "birth_death_rates",
    "rhs_f",
    "rhs_p",
    "size_bias",
    "poisson_profile",
    "integrate",
    "integrate_size_biased",
    "load_profile",
]

MIN_STEP = 1e-12


@dataclass(frozen=True)
class BirthDeathRates:
    mu: np.ndarray
    beta: np.ndarray


def _matrix_rates(f: np.ndarray, kernel: RateKernel, cache: dict | None = None):
    K = f.size - 1
    if cache is not None and cache.get("K") == K:
        c = cache["c"]
    else:
        c = kernel.matrix(K)
        if cache is not None:
            cache["K"], cache["c"] = K, c
    return c @ f, c.T @ f


def birth_death_rates(f, kernel: RateKernel, _cache: dict | None = None,
                      generic: bool = False) -> BirthDeathRates:
    """mu_k = sum_l c(k,l) f_l and beta_k = sum_{l>=1} c(l,k) f_l for k <= K.

    Closed-form families use O(K) formulas; table kernels (or
    ``generic=True``) use the dense kernel matrix.
    """
    f = np.asarray(f, dtype=float)
    K = f.size - 1
    fam = kernel.family
    if generic or fam == Family.TABLE:
        mu, beta = _matrix_rates(f, kernel, _cache)
        return BirthDeathRates(mu, beta)
    k = np.arange(K + 1, dtype=float)
    mass = f.sum()
    m1 = np.dot(k, f)
    if fam == Family.INDEPENDENT:
        mu = k * mass
        beta = np.full(K + 1, m1)
    elif fam == Family.ZERO_RANGE:
        b = kernel.param
        mu = np.zeros(K + 1)
        mu[1:] = (1.0 + b / k[1:]) * mass
        beta = np.full(K + 1, np.dot(1.0 + b / k[1:], f[1:]))
    else:
        d = kernel.param
        mu = k * (d * mass + m1)
        beta = (d + k) * m1
    return BirthDeathRates(mu, beta)


def _rhs_from_rates(f, mu, beta):
    up = beta * f
    up[-1] = 0.0
    down = mu * f
    df = -(up + down)
    df[1:] += up[:-1]
    df[:-1] += down[1:]
    return df


def rhs_f(f, kernel: RateKernel, _cache: dict | None = None) -> np.ndarray:
    """Right-hand side of the mean-field equation, zero flux across K."""
    f = np.asarray(f, dtype=float)
    r = birth_death_rates(f, kernel, _cache)
    return _rhs_from_rates(f, r.mu, r.beta)


def _rhs_p_from_rates(p, f, mu, beta, rho):
    K = f.size - 1
    k = np.arange(K + 1, dtype=float)
    dp = np.zeros(K + 1)
    if K < 1:
        return dp
    # downward flux from k+1 into k carries the factor k/(k+1)
    down_in = np.zeros(K + 1)
    down_in[1:K] = k[1:K] / k[2:] * mu[2:] * p[2:]
    # upward flux from k-1 into k carries k/(k-1)
    up_in = np.zeros(K + 1)
    up_in[2:] = k[2:] / k[1:K] * beta[1:K] * p[1:K]
    up_in[1] = beta[0] * f[0] / rho
    loss = (mu + beta) * p
    loss[K] = mu[K] * p[K]
    dp[1:] = down_in[1:] + up_in[1:] - loss[1:]
    return dp


def rhs_p(p, f, kernel: RateKernel, rho: float, _cache: dict | None = None) -> np.ndarray:
    """Right-hand side of the size-biased master equation.

    ``p`` and ``f`` are indexed by k = 0..K; ``p[0]`` is ignored and its
    derivative is returned as 0.
    """
    if not rho > 0:
        raise InvalidDensityError(f"density must be positive, got {rho}")
    p = np.asarray(p, dtype=float)
    f = np.asarray(f, dtype=float)
    r = birth_death_rates(f, kernel, _cache)
    return _rhs_p_from_rates(p, f, r.mu, r.beta, rho)


def size_bias(f, rho: float) -> np.ndarray:
    """p_k = k f_k / rho, with p_0 = 0."""
    if not rho > 0:
        raise InvalidDensityError(f"density must be positive, got {rho}")
    f = np.asarray(f, dtype=float)
    return np.arange(f.shape[-1]) * f / rho


def poisson_profile(rho: float, tail: float = 1e-17) -> np.ndarray:
    """Poisson(rho) probabilities truncated where the remaining mass drops below ``tail``."""
    if not rho > 0:
        raise InvalidDensityError(f"density must be positive, got {rho}")
    log_tail = math.log(tail)
    K = int(rho) + 1
    while poisson.logsf(K, rho) > log_tail:
        K += max(1, K // 8)
    return poisson.pmf(np.arange(K + 1), rho)


def load_profile(path) -> np.ndarray:
    """Read an initial profile from CSV rows ``k,f_k`` (header optional)."""
    data = np.genfromtxt(path, delimiter=",", names=None, comments="#")
    if data.ndim == 1:
        data = data[None, :]
    data = data[~np.isnan(data).any(axis=1)]
    ks = data[:, 0].astype(int)
    out = np.zeros(ks.max() + 1)
    out[ks] = data[:, 1]
    return out


@dataclass
class MeanFieldSolution:
    """Solution sampled on ``times``; ``f[i]`` is the profile at ``times[i]``.

    Profiles are zero-padded to the final truncation and clamped at 0.
    Between grid points ``f`` is interpolated linearly.
    """

    times: np.ndarray
    f: np.ndarray
    rho: float
    kernel: RateKernel
    p: np.ndarray | None = None
    min_raw: float = 0.0
    K_history: list = field(default_factory=list)
    n_steps: int = 0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def K(self) -> int:
        return self.f.shape[1] - 1

    def _locate(self, t: float) -> tuple[int, float]:
        times = self.times
        if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
            raise OutOfRangeError(f"t = {t} outside solution grid [{times[0]}, {times[-1]}]")
        i = int(np.searchsorted(times, t, side="right")) - 1
        i = min(max(i, 0), len(times) - 2) if len(times) > 1 else 0
        if len(times) == 1:
            return 0, 0.0
        h = times[i + 1] - times[i]
        return i, float(np.clip((t - times[i]) / h, 0.0, 1.0))

    def f_at(self, t: float) -> np.ndarray:
        i, s = self._locate(t)
        if len(self.times) == 1:
            return self.f[0].copy()
        return (1 - s) * self.f[i] + s * self.f[i + 1]

    def p_at(self, t: float) -> np.ndarray:
        return size_bias(self.f_at(t), self.rho)

    def rates_at(self, t: float) -> BirthDeathRates:
        return birth_death_rates(self.f_at(t), self.kernel)

    def moment(self, n: int) -> np.ndarray:
        k = np.arange(self.K + 1, dtype=float)
        return self.f @ k**n

    def size_biased(self) -> np.ndarray:
        return size_bias(self.f, self.rho)

    def index_of(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9:
            raise OutOfRangeError(f"t = {t} is not a grid point")
        return i

    def rate_variation(self, w_max: int) -> float:
        """Largest relative change of beta_w + mu_w between adjacent grid nodes, w <= w_max."""
        worst = 0.0
        prev = None
        for row in self.f:
            r = birth_death_rates(_pad(row, w_max), self.kernel)
            tot = (r.mu + r.beta)[1: w_max + 1]
            if prev is not None:
                worst = max(worst, float(np.max(np.abs(tot - prev) / np.maximum(prev, 1e-300))))
            prev = tot
        return worst


def _pad(f: np.ndarray, K: int) -> np.ndarray:
    if f.size > K + 1:
        return f
    out = np.zeros(K + 1)
    out[: f.size] = f
    return out


def _initial_K(f0: np.ndarray, epsilon_tail: float) -> int:
    nz = np.flatnonzero(f0 > 0)
    K = max(int(nz[-1]) + 1 if nz.size else 1, 2)
    return K


class _System:
    """State layout for one or two stacked profiles of length K + 1."""

    def __init__(self, kernel: RateKernel, rho: float, blocks: int):
        self.kernel = kernel
        self.rho = rho
        self.blocks = blocks
        self.cache: dict = {}

    def __call__(self, t, y):
        K1 = y.size // self.blocks
        f = y[:K1]
        r = birth_death_rates(f, self.kernel, self.cache)
        df = _rhs_from_rates(f, r.mu, r.beta)
        if self.blocks == 1:
            return df
        dp = _rhs_p_from_rates(y[K1:], f, r.mu, r.beta, self.rho)
        return np.concatenate([df, dp])


def _grow(y: np.ndarray, blocks: int, K_new: int) -> np.ndarray:
    K1 = y.size // blocks
    out = np.zeros(blocks * (K_new + 1))
    for b in range(blocks):
        out[b * (K_new + 1): b * (K_new + 1) + K1] = y[b * K1:(b + 1) * K1]
    return out


def _solve(y0, blocks, kernel, rho, t_max, t_eval, tol, epsilon_tail, step):
    system = _System(kernel, rho, blocks)
    K = y0.size // blocks - 1
    t_eval = np.asarray(t_eval, dtype=float)
    rows: list[np.ndarray] = []
    j = 0
    while j < t_eval.size and t_eval[j] <= 0.0:
        rows.append(y0.copy())
        j += 1
    if step is None:
        opts = dict(rtol=tol, atol=tol * 1e-2)
    else:
        # error control switched off; every step has length ``step``
        opts = dict(rtol=1e6, atol=1e6, first_step=step, max_step=step)
    y = y0.copy()
    t = 0.0
    min_raw = float(y0.min())
    K_hist = [(0.0, K)]
    steps = 0
    while t < t_max:
        solver = RK45(system, t, y, t_max, **opts)
        grown = False
        while solver.status == "running":
            solver.step()
            steps += 1
            if solver.status == "failed" or (solver.status == "running" and solver.step_size < MIN_STEP):
                raise StiffnessError(
                    f"step size underflow at t = {solver.t:.6g}: {solver.status}",
                    t=solver.t, state=solver.y.copy())
            dense = None
            while j < t_eval.size and t_eval[j] <= solver.t:
                if t_eval[j] == solver.t:
                    rows.append(solver.y.copy())
                else:
                    dense = dense or solver.dense_output()
                    rows.append(dense(t_eval[j]))
                j += 1
            min_raw = min(min_raw, float(solver.y[: K + 1].min()))
            f = solver.y[: K + 1]
            if f[K - 1] + f[K] > epsilon_tail and solver.status == "running":
                K_new = K + max(8, K // 4)
                y = _grow(solver.y, blocks, K_new)
                t = solver.t
                K = K_new
                K_hist.append((t, K))
                grown = True
                break
        if not grown:
            t = t_max
    width = K + 1
    out = np.zeros((len(rows), blocks, width))
    for i, r in enumerate(rows):
        k1 = r.size // blocks
        for b in range(blocks):
            out[i, b, :k1] = r[b * k1:(b + 1) * k1]
    min_raw = min(min_raw, float(out[:, 0].min()))
    return out, min_raw, K_hist, steps


def _prepare(f0, epsilon_tail):
    f0 = np.asarray(f0, dtype=float)
    if f0.ndim != 1 or np.any(f0 < 0):
        raise ValueError("initial profile must be a nonnegative vector")
    if abs(f0.sum() - 1.0) > 1e-8:
        raise ValueError(f"initial profile sums to {f0.sum()}, not 1")
    K = _initial_K(f0, epsilon_tail)
    f = _pad(f0, K)
    while f[K - 1] + f[K] > epsilon_tail:
        K += max(8, K // 4)
        f = _pad(f, K)
    rho = float(np.dot(np.arange(f.size), f))
    if not rho > 0:
        raise InvalidDensityError("initial profile carries no mass")
    return f, rho


def _default_grid(t_max, grid_step):
    n = max(int(math.ceil(t_max / grid_step - 1e-9)), 1)
    return np.linspace(0.0, t_max, n + 1)


def integrate(f0, kernel: RateKernel, t_max: float, tol: float = 1e-10,
              epsilon_tail: float = 1e-12, t_eval=None, grid_step: float = 0.01,
              step: float | None = None) -> MeanFieldSolution:
    """Integrate the mean-field equation from ``f0`` up to ``t_max``.

    Dormand-Prince 5(4) steps with local error below ``tol``; the result is
    sampled on ``t_eval`` (default: uniform grid of spacing ``grid_step``).
    Passing ``step`` switches error control off and takes fixed steps.
    """
    f, rho = _prepare(f0, epsilon_tail)
    if t_eval is None:
        t_eval = _default_grid(t_max, grid_step)
    t_eval = np.asarray(t_eval, dtype=float)
    if t_eval.size == 0 or np.any(np.diff(t_eval) <= 0) or t_eval[0] < 0 or t_eval[-1] > t_max + 1e-12:
        raise ValueError("t_eval must be strictly increasing inside [0, t_max]")
    out, min_raw, K_hist, steps = _solve(f, 1, kernel, rho, t_max, t_eval, tol, epsilon_tail, step)
    return MeanFieldSolution(t_eval, np.clip(out[:, 0], 0.0, None), rho, kernel,
                             min_raw=min_raw, K_history=K_hist, n_steps=steps)


def integrate_size_biased(f0, kernel: RateKernel, t_max: float, tol: float = 1e-10,
                          epsilon_tail: float = 1e-12, t_eval=None,
                          grid_step: float = 0.01) -> MeanFieldSolution:
    """Integrate the size-biased equation alongside f, starting from size_bias(f0).

    The returned solution carries ``p`` from its own equation; compare it
    with ``size_bias`` applied to an independent :func:`integrate` run.
    """
    f, rho = _prepare(f0, epsilon_tail)
    p = size_bias(f, rho)
    if t_eval is None:
        t_eval = _default_grid(t_max, grid_step)
    t_eval = np.asarray(t_eval, dtype=float)
    out, min_raw, K_hist, steps = _solve(np.concatenate([f, p]), 2, kernel, rho, t_max,
                                         t_eval, tol, epsilon_tail, None)
    return MeanFieldSolution(t_eval, np.clip(out[:, 0], 0.0, None), rho, kernel,
                             p=np.clip(out[:, 1], 0.0, None), min_raw=min_raw,
                             K_history=K_hist, n_steps=steps)
