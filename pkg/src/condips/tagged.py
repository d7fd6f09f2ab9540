"""Tagged-particle dynamics and the occupation ``W`` of the tagged site.

The tagged site is held explicitly; the other ``L - 1`` sites form a class
count vector ``env``. Four kinds of events change the joint state:

(a) env -> env       rate c(k,l) n_k (n_l - [k == l]) / (L-1)
(b) env -> tagged    rate c(k,W) n_k / (L-1)            W -> W + 1
(c) tagged -> env,   rate c(W,l) n_l / (L-1) (W-1)/W    W -> W - 1
    tag stays
(d) tagged -> env,   rate c(W,l) n_l / (L-1) / W        W -> l + 1
    tag moves along

In (d) the old tagged site, now holding ``W - 1`` particles, joins the
environment and the receiving site (class ``l``) becomes the tagged site.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import OutOfRangeError
from .ips import _apply_changes, _kahan_sum, _move, _rebuild, _select_pair
from .kernels import RateKernel, rate
from .state import ClassConfig, TaggedState

__all__ = [
    "TaggedRates",
    "tagged_event_rates",
    "step_tagged",
    "apply_genN",
    "limit_generator_at",
    "simulate_tagged",
    "TaggedTrajectory",
    "sample_w_increments",
]


@numba.njit(cache=True)
def _tag_sums(fam, a, tab, n, K, W):
    into = 0.0
    out = 0.0
    for k in range(K + 1):
        if n[k] > 0:
            into += rate(fam, a, tab, k, W) * n[k]
            out += rate(fam, a, tab, W, k) * n[k]
    return into, out


@numba.njit(cache=True)
def _pick_class(fam, a, tab, n, K, W, target, incoming):
    # class drawn with weight c(k, W) n_k (incoming) or c(W, k) n_k (outgoing)
    acc = 0.0
    pick = -1
    for k in range(K + 1):
        if n[k] > 0:
            w = rate(fam, a, tab, k, W) if incoming else rate(fam, a, tab, W, k)
            w *= n[k]
            if w > 0.0:
                pick = k
                acc += w
                if target < acc:
                    break
    return pick


@numba.njit(cache=True)
def _tagged_event(fam, a, tab, n, K, W, L, S, cls, dlt, u, tot, ra, rb, rc):
    """Apply the event selected by ``u * tot``; returns (K, W, group)."""
    x = u * tot
    inv = 1.0 / (L - 1)
    if x < ra:
        k, l = _select_pair(fam, a, tab, n, K, S, x * (L - 1))
        K = _move(fam, a, tab, n, K, S, cls, dlt, k, l)
        return K, W, 0
    x -= ra
    if x < rb:
        k = _pick_class(fam, a, tab, n, K, W, x / inv, True)
        cls[0] = k
        dlt[0] = -1
        cls[1] = k - 1
        dlt[1] = 1
        K = _apply_changes(fam, a, tab, n, K, S, cls, dlt, 2)
        return K, W + 1, 1
    x -= rb
    if x < rc:
        l = _pick_class(fam, a, tab, n, K, W, x / (inv * (W - 1) / W), False)
        cls[0] = l
        dlt[0] = -1
        cls[1] = l + 1
        dlt[1] = 1
        K = _apply_changes(fam, a, tab, n, K, S, cls, dlt, 2)
        return K, W - 1, 2
    x -= rc
    l = _pick_class(fam, a, tab, n, K, W, x / (inv / W), False)
    cls[0] = l
    dlt[0] = -1
    cls[1] = W - 1
    dlt[1] = 1
    K = _apply_changes(fam, a, tab, n, K, S, cls, dlt, 2)
    return K, l + 1, 3


@numba.njit(cache=True)
def _group_rates(fam, a, tab, n, K, W, L, S):
    into, out = _tag_sums(fam, a, tab, n, K, W)
    inv = 1.0 / (L - 1)
    ra = _kahan_sum(S, K) * inv
    rb = into * inv
    rc = out * inv * (W - 1) / W
    rd = out * inv / W
    return ra, rb, rc, rd


@numba.njit(cache=True)
def _run_tagged(fam, a, tab, n, K, W, L, t_max, obs, rng, out_env, out_w, max_events):
    S = np.zeros(n.size)
    _rebuild(fam, a, tab, n, K, S)
    cls = np.empty(4, np.int64)
    dlt = np.empty(4, np.int64)
    t = 0.0
    i = 0
    nobs = obs.size
    events = 0
    while events < max_events:
        ra, rb, rc, rd = _group_rates(fam, a, tab, n, K, W, L, S)
        tot = ra + rb + rc + rd
        tn = t + rng.standard_exponential() / tot
        while i < nobs and obs[i] < tn:
            out_env[i, :] = n
            out_w[i] = W
            i += 1
        if tn > t_max:
            break
        K, W, _ = _tagged_event(fam, a, tab, n, K, W, L, S, cls, dlt,
                                rng.random(), tot, ra, rb, rc)
        t = tn
        events += 1
    while i < nobs and obs[i] <= t_max:
        out_env[i, :] = n
        out_w[i] = W
        i += 1
    return K, W, t, events


@numba.njit(cache=True)
def _w_increments(fam, a, tab, n0, K0, W0, L, rng, count, out):
    S0 = np.zeros(n0.size)
    _rebuild(fam, a, tab, n0, K0, S0)
    ra, rb, rc, rd = _group_rates(fam, a, tab, n0, K0, W0, L, S0)
    tot = ra + rb + rc + rd
    cls = np.empty(4, np.int64)
    dlt = np.empty(4, np.int64)
    for s in range(count):
        n = n0.copy()
        S = S0.copy()
        _, W, _ = _tagged_event(fam, a, tab, n, K0, W0, L, S, cls, dlt,
                                rng.random(), tot, ra, rb, rc)
        out[s] = W - W0
    return tot


def _env_work(st: TaggedState) -> np.ndarray:
    n = np.zeros(st.N + 2, dtype=np.int64)
    n[: st.env.counts.size] = st.env.counts
    return n


@dataclass(frozen=True)
class TaggedRates:
    """Rates of the four event groups.

    ``env_env[k, l]`` is the pair rate inside the environment; ``into[k]`` the
    rate of a jump from an env site of class k onto the tagged site;
    ``death[l]`` and ``relocate[l]`` the rates of the tagged-site departures
    to an env site of class l that keep or move the tag.
    """

    env_env: np.ndarray
    into: np.ndarray
    death: np.ndarray
    relocate: np.ndarray
    W: int

    @property
    def totals(self) -> tuple[float, float, float, float]:
        return (float(self.env_env.sum()), float(self.into.sum()),
                float(self.death.sum()), float(self.relocate.sum()))

    @property
    def total(self) -> float:
        return sum(self.totals)

    def w_drift(self) -> float:
        """Expected rate of change of W."""
        l = np.arange(self.relocate.size)
        return float(self.into.sum() - self.death.sum()
                     + np.dot(self.relocate, l + 1 - self.W))


def tagged_event_rates(st: TaggedState, kernel: RateKernel) -> TaggedRates:
    env = st.env.counts.astype(float)
    K = env.size - 1
    W, L = st.W, st.L
    top = max(K, W)
    c = kernel.matrix(top)
    m = np.broadcast_to(env, (K + 1, K + 1)) - np.eye(K + 1)
    env_env = c[: K + 1, : K + 1] * env[:, None] * np.clip(m, 0, None) / (L - 1)
    into = c[: K + 1, W] * env / (L - 1)
    out = c[W, : K + 1] * env / (L - 1)
    return TaggedRates(env_env, into, out * (W - 1) / W, out / W, W)


def step_tagged(st: TaggedState, kernel: RateKernel, rng: np.random.Generator) -> tuple[TaggedState, float]:
    n = _env_work(st)
    empty = np.zeros((0, n.size), dtype=np.int64)
    K, W, t, _ = _run_tagged(*kernel.jit_args, n, st.env.max_occupation, st.W, st.L,
                             np.inf, np.zeros(0), rng, empty, np.zeros(0, np.int64), 1)
    return TaggedState(ClassConfig(n[: K + 1].copy()), int(W)), float(t)


def sample_w_increments(st: TaggedState, kernel: RateKernel, rng: np.random.Generator,
                        count: int) -> tuple[np.ndarray, float]:
    """Jumps of W over ``count`` independent single events from ``st``.

    Returns the increments and the total event rate, so that
    ``rate * increments.mean()`` estimates the drift of W.
    """
    n = _env_work(st)
    out = np.empty(count, dtype=np.int64)
    tot = _w_increments(*kernel.jit_args, n, st.env.max_occupation, st.W, st.L, rng,
                        count, out)
    return out, float(tot)


def _full_fractions(st: TaggedState) -> np.ndarray:
    return st.full().counts / st.L


def _g_table(g, needed: int) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.ndim != 1 or g.size <= needed:
        raise OutOfRangeError(f"test function table needs entries up to n = {needed}")
    return g


def apply_genN(st: TaggedState, g, kernel: RateKernel) -> float:
    """Finite-L generator of W applied to ``g`` at n = W.

    ``g[n]`` is the test function on occupations; it must cover every value
    W can reach in one jump, i.e. up to max(W, max occupation) + 1.
    """
    F = _full_fractions(st)
    n, L = st.W, st.L
    K = F.size - 1
    g = _g_table(g, max(K, n) + 1)
    c = kernel.matrix(max(K, n))
    k = np.arange(K + 1)
    ratio = L / (L - 1)
    birth = ratio * np.dot(c[1: K + 1, n], F[1:]) * (g[n + 1] - g[n])
    out_rate = np.dot(c[n, : K + 1], F)
    death = ratio * (n - 1) / n * out_rate * (g[n - 1] - g[n])
    jump = ratio / n * np.dot(c[n, : K + 1] * F, g[k + 1] - g[n])
    corr = c[n, n] / (L - 1) * ((n + 1) / n * (g[n + 1] - g[n]) + (n - 1) / n * (g[n - 1] - g[n]))
    return float(birth + death + jump - corr)


def limit_generator_at(n: int, f, g, kernel: RateKernel) -> float:
    """The L -> infinity generator of W evaluated with a frozen profile ``f``."""
    f = np.asarray(f, dtype=float)
    K = f.size - 1
    g = _g_table(g, max(K, n) + 1)
    c = kernel.matrix(max(K, n))
    k = np.arange(K + 1)
    beta = np.dot(c[1: K + 1, n], f[1:])
    mu = np.dot(c[n, : K + 1], f)
    jump = np.dot(c[n, : K + 1] * f, g[k + 1] - g[n]) / n
    return float(beta * (g[n + 1] - g[n]) + (n - 1) / n * mu * (g[n - 1] - g[n]) + jump)


@dataclass(frozen=True)
class TaggedTrajectory:
    times: np.ndarray
    W: np.ndarray
    env_counts: np.ndarray
    final: TaggedState
    n_events: int
    L: int
    N: int

    def full_counts(self) -> np.ndarray:
        """Class counts of the whole lattice at each observation time."""
        width = max(self.env_counts.shape[1], int(self.W.max(initial=0)) + 1)
        out = np.zeros((self.times.size, width), dtype=np.int64)
        out[:, : self.env_counts.shape[1]] = self.env_counts
        out[np.arange(self.times.size), self.W] += 1
        return out


def run_tagged_arrays(st0: TaggedState, kernel: RateKernel, t_max: float, obs: np.ndarray, rng):
    n = _env_work(st0)
    out_env = np.zeros((obs.size, n.size), dtype=np.int64)
    out_w = np.zeros(obs.size, dtype=np.int64)
    K, W, _, events = _run_tagged(*kernel.jit_args, n, st0.env.max_occupation, st0.W, st0.L,
                                  float(t_max), obs, rng, out_env, out_w,
                                  np.iinfo(np.int64).max)
    return out_env, out_w, n, int(K), int(W), int(events)


def simulate_tagged(st0: TaggedState, kernel: RateKernel, t_max: float, obs_grid,
                    rng: np.random.Generator) -> TaggedTrajectory:
    from .ips import _check_grid

    obs = _check_grid(obs_grid, t_max)
    out_env, out_w, n, K, W, events = run_tagged_arrays(st0, kernel, t_max, obs, rng)
    final = TaggedState(ClassConfig(n[: K + 1].copy()), W)
    return TaggedTrajectory(obs, out_w, out_env, final, events, st0.L, st0.N)
