"""Exact transient laws for very small systems.

The generator is assembled over explicitly enumerated site configurations
(optionally together with the tagged particle's position) and transient
distributions are computed by uniformization.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .kernels import RateKernel
from .state import ClassConfig, TaggedSite

__all__ = [
    "ExactChain",
    "build_chain",
    "transient",
    "marginals",
    "Marginals",
    "initial_law",
    "multinomial_law",
    "total_variation",
]

MAX_STATES = 100_000


def _compositions(N: int, L: int):
    """All occupation vectors of N particles on L sites, lexicographically."""
    for bars in itertools.combinations(range(N + L - 1), L - 1):
        prev = -1
        eta = []
        for b in bars:
            eta.append(b - prev - 1)
            prev = b
        eta.append(N + L - 2 - prev)
        yield tuple(eta)


@dataclass(frozen=True)
class ExactChain:
    """Enumerated CTMC. ``states[i]`` is an occupation tuple, or
    ``(occupation tuple, tagged site)`` when ``tagged`` is set."""

    L: int
    N: int
    tagged: bool
    states: list
    Q: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "index", {s: i for i, s in enumerate(self.states)})

    def occupations(self, i: int) -> tuple[int, ...]:
        return self.states[i][0] if self.tagged else self.states[i]


def _state_count(L: int, N: int, tagged: bool) -> int:
    if tagged:
        return L * math.comb(N - 1 + L - 1, L - 1) if N >= 1 else 0
    return math.comb(N + L - 1, L - 1)


def _assemble(L: int, N: int, kernel: RateKernel, tagged: bool) -> tuple[list, np.ndarray]:
    q = 1.0 / (L - 1)
    if tagged:
        states = [(eta, x) for eta in _compositions(N, L) for x in range(L) if eta[x] >= 1]
    else:
        states = list(_compositions(N, L))
    index = {s: i for i, s in enumerate(states)}
    Q = np.zeros((len(states), len(states)))

    def moved(eta, y, z):
        e = list(eta)
        e[y] -= 1
        e[z] += 1
        return tuple(e)

    for i, s in enumerate(states):
        eta, x = (s if tagged else (s, None))
        for y in range(L):
            if eta[y] == 0:
                continue
            for z in range(L):
                if z == y:
                    continue
                r = kernel(eta[y], eta[z]) * q
                if r == 0:
                    continue
                new = moved(eta, y, z)
                if not tagged:
                    Q[i, index[new]] += r
                elif y != x:
                    Q[i, index[(new, x)]] += r
                else:
                    w = eta[x]
                    if w > 1:
                        Q[i, index[(new, x)]] += r * (w - 1) / w
                    Q[i, index[(new, z)]] += r / w
    np.fill_diagonal(Q, 0.0)
    Q[np.diag_indices_from(Q)] = -Q.sum(axis=1)
    return states, Q


def _cache_path(cache_dir, L, N, kernel, tagged) -> Path:
    desc = kernel.describe()
    if kernel.table is not None and desc["model"] == "table":
        desc["table_sha1"] = hashlib.sha1(np.ascontiguousarray(kernel.table).tobytes()).hexdigest()
    key = json.dumps({"L": L, "N": N, "kernel": desc, "tagged": tagged}, sort_keys=True)
    digest = hashlib.sha1(key.encode()).hexdigest()[:16]
    return Path(cache_dir) / f"chain_{digest}.npz"


def build_chain(L: int, N: int, kernel: RateKernel, tagged: bool = False,
                cache_dir=None) -> ExactChain:
    """Enumerate the state space and build the dense generator.

    Tagged chains only carry states where the tagged site is occupied; the
    others cannot be reached and have no well-defined tagged dynamics.
    """
    if L < 2 or N < 0 or (tagged and N < 1):
        raise ConfigError(f"cannot build a chain for L = {L}, N = {N}, tagged = {tagged}")
    count = _state_count(L, N, tagged)
    if count > MAX_STATES:
        raise ConfigError(f"{count} states exceed the guard of {MAX_STATES}")
    path = None
    if cache_dir is not None:
        path = _cache_path(cache_dir, L, N, kernel, tagged)
        if path.exists():
            with np.load(path, allow_pickle=False) as data:
                Q = data["Q"]
            if tagged:
                states = [(eta, x) for eta in _compositions(N, L) for x in range(L) if eta[x] >= 1]
            else:
                states = list(_compositions(N, L))
            return ExactChain(L, N, tagged, states, Q)
    states, Q = _assemble(L, N, kernel, tagged)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez(path, Q=Q)
    return ExactChain(L, N, tagged, states, Q)


def _uniformize(Q: np.ndarray, p0: np.ndarray, t: float, tol: float, min_terms: int = 0):
    lam = float(np.max(-np.diag(Q))) if Q.size else 0.0
    if t == 0 or lam == 0:
        return p0.copy(), 0
    P = np.eye(Q.shape[0]) + Q / lam
    lt = lam * t
    v = p0.copy()
    out = np.zeros_like(p0)
    cum = 0.0
    n = 0
    while True:
        w = math.exp(-lt + n * math.log(lt) - math.lgamma(n + 1))
        out += w * v
        cum += w
        n += 1
        if (1.0 - cum < tol and n > lt) and n >= min_terms:
            break
        if n > 10 * lt + 1000 and n >= min_terms:
            break
        v = v @ P
    return out, n


def transient(chain: ExactChain, p0, t: float, tol: float = 1e-12, min_terms: int = 0) -> np.ndarray:
    """Law at time t from the initial law ``p0`` (row vector over states)."""
    p0 = np.asarray(p0, dtype=float)
    if abs(p0.sum() - 1.0) > 1e-9:
        raise ValueError("initial distribution must sum to 1")
    return _uniformize(chain.Q, p0, float(t), tol, min_terms)[0]


def transient_terms(chain: ExactChain, p0, t: float, tol: float = 1e-12) -> int:
    """Number of series terms the uniformization used."""
    return _uniformize(chain.Q, np.asarray(p0, dtype=float), float(t), tol)[1]


@dataclass(frozen=True)
class Marginals:
    config_law: dict
    """Law of the class configuration, keyed by ``ClassConfig.key()``."""
    w_law: np.ndarray | None
    """``w_law[k] = P(W = k)`` for tagged chains."""
    fk_mean: np.ndarray
    """Expected empirical measure ``E[F_k]``."""


def marginals(chain: ExactChain, dist) -> Marginals:
    dist = np.asarray(dist, dtype=float)
    law: dict = {}
    w_law = np.zeros(chain.N + 1) if chain.tagged else None
    fk = np.zeros(chain.N + 1)
    for i, p in enumerate(dist):
        eta = chain.occupations(i)
        key = ClassConfig.from_occupations(eta).key()
        law[key] = law.get(key, 0.0) + p
        for v in eta:
            fk[v] += p / chain.L
        if chain.tagged:
            w_law[eta[chain.states[i][1]]] += p
    return Marginals(law, w_law, fk)


def multinomial_law(chain: ExactChain) -> np.ndarray:
    """Law of N independent uniformly placed particles (untagged chains)."""
    L, N = chain.L, chain.N
    out = np.array([
        math.factorial(N) / math.prod(math.factorial(v) for v in eta) / L**N
        for eta in (chain.occupations(i) for i in range(len(chain.states)))
    ])
    return out


def initial_law(chain: ExactChain, tagged_site: TaggedSite = TaggedSite.UNIFORM) -> np.ndarray:
    """Exact law of the uniform iid initial condition with one tagged particle.

    N - 1 particles are placed independently and uniformly; the tagged one
    joins site 0 (``FIXED``) or a uniform site (``UNIFORM``). For an
    untagged chain the tag is forgotten.
    """
    L, N = chain.L, chain.N
    if tagged_site == TaggedSite.MAX:
        raise ConfigError("the exact initial law is only available for fixed or uniform tagging")
    out = np.zeros(len(chain.states))
    norm = math.factorial(N - 1) / L ** (N - 1)
    for eta_bg in _compositions(N - 1, L):
        p = norm / math.prod(math.factorial(v) for v in eta_bg)
        sites = [0] if tagged_site == TaggedSite.FIXED else range(L)
        for x in sites:
            eta = list(eta_bg)
            eta[x] += 1
            eta = tuple(eta)
            key = (eta, x) if chain.tagged else eta
            out[chain.index[key]] += p / len(sites)
    return out


def total_variation(p: dict, q: dict) -> float:
    """Total variation distance between two laws given as dicts."""
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)
