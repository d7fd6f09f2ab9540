"""A dominating process for the tagged-site occupation and its coupling to W.

The dominating process Wbar jumps from n to

    n + 1        at rate Cbar * n,                      Cbar = 2C(1 + 3 rho)
    2n + k       at rate 2C (1 + k) F_k   for each k,   F_k = n_k / L

so its exit rate is Cbar * n + 2C(1 + N/L). The coupling with the tagged
process works as follows.

* A birth or death of W is a mark on Wbar's +1 clock. The rest of that clock
  (rate Cbar * Wbar - birth - death) fires on its own.
* A "long" clock for class k runs at 2C(1 + k) F_k. Each firing doubles Wbar
  and adds k. With probability relocation rate / clock rate it also moves the
  tag to a site of class k.

Both marginals are preserved, and every jump of W comes with a Wbar jump at
least as large. The unpaired +1 events are far too frequent to simulate one
by one. Between two other events the unpaired part is a linear birth process
with rate Cbar * (n - a), so its increment over a gap is negative binomial
and is drawn in one go.

Wbar outgrows 64-bit integers within a few time units. It is carried
exactly as int64 up to 2**62 and as float64 above that; the ``saturated``
flag records the switch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import InvariantViolation, MomentOverflowError
from .ips import _apply_changes, _rebuild
from .kernels import RateKernel, rate
from .state import ClassConfig, TaggedState
from .tagged import _env_work, _group_rates, _tagged_event

__all__ = [
    "CoupledPair",
    "CoupledTrajectory",
    "MomentReport",
    "cbar",
    "wbar_event_rates",
    "exit_rate_bar",
    "step_coupled",
    "simulate_coupled",
    "simulate_wbar",
    "moment_monitor",
]

INT_LIMIT = 2**62
POISSON_EXACT = 1e15

_OK = 0
_ACCOUNTING = 1
_OVERFLOW = 2


def cbar(kernel: RateKernel, rho: float) -> float:
    """Cbar = 2C(1 + 3 rho)."""
    return 2.0 * kernel.C * (1.0 + 3.0 * rho)


@dataclass(frozen=True)
class CoupledPair:
    """Tagged state plus the dominating value. ``wbar`` is an int while exact."""

    tagged: TaggedState
    wbar: int | float
    Cbar: float

    def __post_init__(self):
        if self.wbar < self.tagged.W:
            raise InvariantViolation(f"Wbar = {self.wbar} below W = {self.tagged.W}")

    @classmethod
    def start(cls, st: TaggedState, kernel: RateKernel, rho: float | None = None) -> "CoupledPair":
        rho = st.N / st.L if rho is None else rho
        return cls(st, st.W, cbar(kernel, rho))

    @property
    def saturated(self) -> bool:
        return isinstance(self.wbar, float)


def wbar_event_rates(w, cfg: ClassConfig, kernel: RateKernel, rho: float | None = None):
    """Per-event rates of Wbar at value ``w``: (rate of n+1, array of rates of 2n+k).

    ``cfg`` is the whole configuration, tagged site included.
    """
    L, N = cfg.L, cfg.N
    rho = N / L if rho is None else rho
    F = cfg.counts / L
    k = np.arange(F.size)
    return cbar(kernel, rho) * w, 2.0 * kernel.C * (1.0 + k) * F


def exit_rate_bar(w, cfg: ClassConfig, kernel: RateKernel, rho: float | None = None) -> float:
    """Cbar * w + 2C(1 + N/L)."""
    L, N = cfg.L, cfg.N
    rho = N / L if rho is None else rho
    return cbar(kernel, rho) * w + 2.0 * kernel.C * (1.0 + N / L)


@numba.njit(cache=True)
def _yule(big, bi, bf, a, cb, tau, rng):
    """Advance a pure birth process with rate cb * (n - a) by time tau."""
    if tau <= 0.0:
        return big, bi, bf, 0
    n = bf if big else float(bi)
    m = n - a
    if m <= 0.0:
        return big, bi, bf, 0
    scale = math.expm1(cb * tau)
    lam = rng.standard_gamma(m) * scale
    if not math.isfinite(lam):
        return big, bi, bf, 2
    if big:
        bf = bf + lam
        if not math.isfinite(bf):
            return big, bi, bf, 2
        return big, bi, bf, 0
    if lam < 1e15:
        j = rng.poisson(lam)
    else:
        # Poisson noise is below one part in 3e7 here
        x = lam + math.sqrt(lam) * rng.standard_normal()
        if x >= 4.0e18:
            return True, bi, float(bi) + x, 0
        j = np.int64(x)
    if bi + j >= 4611686018427387904:
        return True, bi, float(bi) + float(j), 0
    return big, bi + j, float(bi + j), 0


@numba.njit(cache=True)
def _double(big, bi, bf, k):
    if not big:
        if bi <= (4611686018427387904 - k) // 2:
            bi = 2 * bi + k
            return big, bi, float(bi)
        big = True
        bf = float(bi)
    return big, bi, 2.0 * bf + k


@numba.njit(cache=True)
def _value(big, bi, bf):
    return bf if big else float(bi)


@numba.njit(cache=True)
def _run_coupled(fam, a, tab, n, K, W, L, C, cb, paired, big, bi, bf, t_max, obs, rng,
                 out_w, out_bi, out_bf, out_big, max_events):
    """Joint simulation; returns (K, W, big, bi, bf, t, events, violations, status)."""
    S = np.zeros(n.size)
    _rebuild(fam, a, tab, n, K, S)
    cls = np.empty(4, np.int64)
    dlt = np.empty(4, np.int64)
    N = W
    for k in range(K + 1):
        N += k * n[k]
    r_long = 2.0 * C * (1.0 + N / L)
    t = 0.0
    j = 0
    nobs = obs.size
    events = 0
    viol = 0
    status = 0
    while events < max_events:
        ra, rb, rc, rd = _group_rates(fam, a, tab, n, K, W, L, S)
        if paired:
            s = rb + rc
            tot = ra + rb + rc + r_long
            if cb * _value(big, bi, bf) < s * (1.0 - 1e-12):
                viol += 1
                status = 1
                break
        else:
            s = 0.0
            tot = ra + rb + rc + rd + r_long
        tn = t + rng.standard_exponential() / tot
        while j < nobs and obs[j] < tn and obs[j] <= t_max:
            big, bi, bf, st = _yule(big, bi, bf, s / cb, cb, obs[j] - t, rng)
            t = obs[j]
            if st != 0:
                status = st
                break
            out_w[j] = W
            out_bi[j] = bi
            out_bf[j] = _value(big, bi, bf)
            out_big[j] = big
            if W > _value(big, bi, bf):
                viol += 1
            j += 1
        if status != 0:
            break
        if tn > t_max:
            break
        big, bi, bf, st = _yule(big, bi, bf, s / cb, cb, tn - t, rng)
        if st != 0:
            status = st
            break
        t = tn
        W_old = W
        inc = 0.0
        x = rng.random() * tot
        if x < ra + rb + rc:
            K, W, grp = _tagged_event(fam, a, tab, n, K, W, L, S, cls, dlt,
                                      x / tot, tot, ra, rb, rc)
            if paired and grp > 0:
                inc = 1.0
                if big:
                    bf += 1.0
                elif bi + 1 >= 4611686018427387904:
                    big = True
                    bf = float(bi) + 1.0
                else:
                    bi += 1
                    bf = float(bi)
        elif not paired and x < ra + rb + rc + rd:
            K, W, grp = _tagged_event(fam, a, tab, n, K, W, L, S, cls, dlt,
                                      x / tot, tot, ra, rb, rc)
        else:
            # long clock: class l drawn with weight (1 + l) (n_l + [l == W])
            target = rng.random() * (L + N)
            acc = 0.0
            l = 0
            top = max(K, W)
            for q in range(top + 1):
                m = n[q] if q <= K else 0
                if q == W:
                    m += 1
                if m > 0:
                    l = q
                    acc += (1.0 + q) * m
                    if target < acc:
                        break
            if paired and l <= K and n[l] > 0:
                bound = 2.0 * C * (1.0 + l) * ((n[l] + (1 if l == W else 0)) / L)
                r_l = rate(fam, a, tab, W, l) * n[l] / (L - 1) / W
                if r_l > bound * (1.0 + 1e-12):
                    viol += 1
                    status = 1
                    break
                if rng.random() * bound < r_l:
                    cls[0] = l
                    dlt[0] = -1
                    cls[1] = W - 1
                    dlt[1] = 1
                    K = _apply_changes(fam, a, tab, n, K, S, cls, dlt, 2)
                    W = l + 1
            inc = _value(big, bi, bf) + l
            big, bi, bf = _double(big, bi, bf, l)
        # increments are taken from the jump itself: after saturation a +1
        # is below float resolution
        if paired and W != W_old and inc < abs(W - W_old):
            viol += 1
        if paired and W > _value(big, bi, bf):
            viol += 1
        events += 1
    return K, W, big, bi, bf, t, events, viol, status


@dataclass(frozen=True)
class CoupledTrajectory:
    """Observed W and Wbar. ``wbar`` is float64; ``wbar_exact`` holds Python
    ints where the value was still exact and None after saturation."""

    times: np.ndarray
    W: np.ndarray
    wbar: np.ndarray
    wbar_exact: list
    violations: int
    n_events: int
    saturated: bool


def _check_status(status, viol):
    if status == _ACCOUNTING:
        raise InvariantViolation("dominating rate fell below a paired rate")
    if status == _OVERFLOW:
        raise MomentOverflowError("dominating process overflowed double precision")


def _run(st0: TaggedState, kernel: RateKernel, t_max, obs, rng, paired, rho, max_events,
         wbar0=None):
    rho = st0.N / st0.L if rho is None else rho
    cb = cbar(kernel, rho)
    n = _env_work(st0)
    if wbar0 is None:
        wbar0 = st0.W
    big = isinstance(wbar0, float) or wbar0 >= INT_LIMIT
    bi = 0 if big else int(wbar0)
    bf = float(wbar0)
    m = obs.size
    out_w = np.zeros(m, np.int64)
    out_bi = np.zeros(m, np.int64)
    out_bf = np.zeros(m)
    out_big = np.zeros(m, np.bool_)
    res = _run_coupled(*kernel.jit_args, n, st0.env.max_occupation, st0.W, st0.L,
                       float(kernel.C), cb, paired, big, bi, bf, float(t_max), obs, rng,
                       out_w, out_bi, out_bf, out_big, max_events)
    K, W, big, bi, bf, t, events, viol, status = res
    _check_status(status, viol)
    return res, n, (out_w, out_bi, out_bf, out_big)


def _trajectory(obs, res, outs) -> CoupledTrajectory:
    out_w, out_bi, out_bf, out_big = outs
    exact = [None if b else int(v) for b, v in zip(out_big, out_bi)]
    return CoupledTrajectory(obs, out_w, out_bf, exact, int(res[7]), int(res[6]), bool(res[2]))


def simulate_coupled(st0: TaggedState, kernel: RateKernel, t_max: float, obs_grid,
                     rng: np.random.Generator, rho: float | None = None) -> CoupledTrajectory:
    """Coupled (W, Wbar) from Wbar(0) = W(0), observed on ``obs_grid``.

    Domination is checked after every event and at every observation; the
    number of failures is returned as ``violations`` (it should be 0).
    """
    from .ips import _check_grid

    obs = _check_grid(obs_grid, t_max)
    res, _, outs = _run(st0, kernel, t_max, obs, rng, True, rho, np.iinfo(np.int64).max)
    return _trajectory(obs, res, outs)


def simulate_wbar(st0: TaggedState, kernel: RateKernel, t_max: float, obs_grid,
                  rng: np.random.Generator, rho: float | None = None) -> CoupledTrajectory:
    """Wbar on its own, driven by the tagged configuration but not paired with W."""
    from .ips import _check_grid

    obs = _check_grid(obs_grid, t_max)
    res, _, outs = _run(st0, kernel, t_max, obs, rng, False, rho, np.iinfo(np.int64).max)
    return _trajectory(obs, res, outs)


def step_coupled(pair: CoupledPair, kernel: RateKernel, rng: np.random.Generator,
                 rho: float | None = None) -> tuple[CoupledPair, float]:
    """Advance to the next event other than an unpaired +1 of Wbar.

    The unpaired +1 jumps that happen during the waiting time are included
    in the returned ``wbar``. Returns the new pair and the waiting time.
    """
    st = pair.tagged
    res, n, _ = _run(st, kernel, np.inf, np.zeros(0), rng, True, rho, 1, wbar0=pair.wbar)
    K, W, big, bi, bf, t, events, viol, status = res
    if viol:
        raise InvariantViolation("coupled step broke domination")
    env = ClassConfig(n[: K + 1].copy())
    wbar = float(bf) if big else int(bi)
    return CoupledPair(TaggedState(env, int(W)), wbar, pair.Cbar), float(t)


@dataclass(frozen=True)
class MomentReport:
    times: np.ndarray
    m2_hat: np.ndarray
    se_hat: np.ndarray
    m2_bar: np.ndarray
    se_bar: np.ndarray
    ordered: bool
    finite: bool
    growth_rate: float | None
    """Slope of log m2_bar against t (fitted, not asserted)."""


def moment_monitor(W, wbar, times) -> MomentReport:
    """Second moments of W and Wbar from matched ensembles (rows are paths)."""
    W = np.asarray(W, dtype=float)
    wbar = np.asarray(wbar, dtype=float)
    times = np.asarray(times, dtype=float)
    n = W.shape[0]
    with np.errstate(over="ignore"):
        w2 = W**2
        b2 = wbar**2
    m2h, m2b = w2.mean(axis=0), b2.mean(axis=0)
    with np.errstate(over="ignore", invalid="ignore"):
        seh = w2.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(m2h)
        seb = b2.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(m2b)
    finite = bool(np.all(np.isfinite(m2b)) and np.all(np.isfinite(m2h)))
    ordered = bool(np.all(m2h <= m2b))
    growth = None
    if times.size >= 2 and finite and np.all(m2b > 0):
        growth = float(np.polyfit(times, np.log(m2b), 1)[0])
    return MomentReport(times, m2h, seh, m2b, seb, ordered, finite, growth)
