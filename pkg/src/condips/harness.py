"""Experiment configuration, ensemble orchestration and the two reports.

Configs are INI files (see README for the schema). Ensembles are
embarrassingly parallel. Path ``i`` of a stream always uses
``derive_seed(stream_seed, i)``, and results are collected by index, so the
output does not depend on ``jobs``.
"""

from __future__ import annotations

import configparser
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .coupling import simulate_coupled, simulate_wbar
from .errors import ConfigError, InvariantViolation, PathError
from .ips import run_counts
from .kernels import RateKernel, kernel_from_config
from .limit_chain import ensemble_law, grid_check
from .meanfield import MeanFieldSolution, integrate, load_profile, poisson_profile, size_bias
from .seeding import derive_seed, path_rng
from .state import InitScheme, TaggedSite, sample_config, sample_initial
from .tagged import run_tagged_arrays

__all__ = [
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "particle_number",
    "stream_seed",
    "run_paths",
    "IpsWorker",
    "TaggedWorker",
    "CoupledWorker",
    "IpsEnsemble",
    "TaggedEnsemble",
    "CoupledEnsemble",
    "ips_ensemble",
    "tagged_ensemble",
    "coupled_ensemble",
    "solve_meanfield",
    "limit_ensemble",
    "ConvergenceReport",
    "CoarseningReport",
    "run_convergence",
    "run_coarsening",
    "loglog_slope",
]

# stream tags keep the seed families of different ensembles apart
STREAM_IPS = 1
STREAM_TAGGED = 2
STREAM_COUPLED = 3
STREAM_WBAR = 4
STREAM_LIMIT = 5
STREAM_BOOT = 6


def particle_number(rho: float, L: int) -> int:
    """N_L = floor(rho L), evaluated on the decimal value of rho so N/L <= rho."""
    return math.floor(Fraction(repr(float(rho))) * L)


def stream_seed(master_seed: int, kind: int, L: int = 0) -> int:
    return derive_seed(master_seed, (kind << 40) + L)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in str(text).replace(";", ",").split(",") if x.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in str(text).replace(";", ",").split(",") if x.strip())


@dataclass(frozen=True)
class ExperimentConfig:
    kernel: RateKernel
    rho: float
    L: tuple[int, ...] = (100,)
    t_max: float = 1.0
    obs: tuple[float, ...] = (1.0,)
    n_paths: int = 1000
    master_seed: int = 0
    tagged_site: TaggedSite = TaggedSite.FIXED
    allow_max_site: bool = False
    # mean-field
    tol: float = 1e-10
    epsilon_tail: float = 1e-12
    eps_mass: float = 1e-8
    grid_step: float = 0.01
    f0: str = "poisson"
    # limit chain
    limit_paths: int | None = None
    lipschitz: bool = False
    # oracle
    oracle_L: int = 3
    oracle_N: int = 3
    oracle_times: tuple[float, ...] = (1.0,)
    # coupling
    couple_L: int | None = None
    couple_paths: int | None = None
    couple_t_max: float | None = None
    couple_obs: tuple[float, ...] | None = None
    # convergence
    conv_times: tuple[float, ...] | None = None
    ips_paths: int | None = None
    tagged_paths: int | None = None
    # coarsening
    coarse_times: tuple[float, ...] = (1.0, 5.0, 10.0)
    coarse_t_max: float = 50.0
    coarse_paths: int | None = None
    sections: dict = field(default_factory=dict, compare=False, repr=False)
    base_dir: str = "."

    def __post_init__(self):
        if not self.rho > 0:
            raise ConfigError(f"rho must be positive, got {self.rho}")
        if not self.L or any(L < 2 for L in self.L):
            raise ConfigError(f"every L must be >= 2, got {self.L}")
        if list(self.L) != sorted(set(self.L)):
            raise ConfigError(f"L list must be strictly ascending, got {self.L}")
        if not self.t_max > 0:
            raise ConfigError("t_max must be positive")
        if any(t < 0 or t > self.t_max for t in self.obs) or list(self.obs) != sorted(self.obs):
            raise ConfigError("obs must be sorted and inside [0, t_max]")
        if self.n_paths < 1:
            raise ConfigError("n_paths must be >= 1")
        for name in ("tol", "epsilon_tail", "eps_mass", "grid_step"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.tagged_site == TaggedSite.MAX and not self.allow_max_site:
            raise ConfigError("tagged_site = max needs allow_max_site = true")
        for L in self.L:
            if particle_number(self.rho, L) < 1:
                raise ConfigError(f"rho * L < 1 for L = {L}; the tagged particle needs N >= 1")

    def N(self, L: int) -> int:
        return particle_number(self.rho, L)

    @property
    def scheme(self) -> InitScheme:
        return InitScheme(tagged=self.tagged_site, allow_max_site=self.allow_max_site)

    def initial_profile(self) -> np.ndarray:
        if self.f0.strip().lower() == "poisson":
            return poisson_profile(self.rho)
        path = Path(self.f0)
        if not path.is_absolute():
            path = Path(self.base_dir) / path
        f = load_profile(path)
        return f

    def describe(self) -> dict:
        return {s: dict(v) for s, v in self.sections.items()} or {
            "model": self.kernel.describe(), "rho": self.rho, "L": list(self.L)}


def _get(sec, key, conv, default):
    if sec is None or key not in sec:
        return default
    try:
        return conv(sec[key])
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {sec[key]!r} ({exc})") from None


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text}")


def _site(text):
    try:
        return TaggedSite(str(text).strip().lower())
    except ValueError:
        raise ValueError("tagged_site must be fixed, uniform or max") from None


def parse_config(text: str, base_dir: str = ".", seed: int | None = None) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from INI text."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    if "model" not in cp or "run" not in cp:
        raise ConfigError("config needs [model] and [run] sections")
    model = dict(cp["model"])
    if "table" in model and not Path(model["table"]).is_absolute():
        model["table"] = str(Path(base_dir) / model["table"])
    kernel = kernel_from_config(model)
    run = cp["run"]
    mf = cp["meanfield"] if "meanfield" in cp else None
    lim = cp["limit"] if "limit" in cp else None
    orc = cp["oracle"] if "oracle" in cp else None
    cpl = cp["coupling"] if "coupling" in cp else None
    cnv = cp["convergence"] if "convergence" in cp else None
    crs = cp["coarsening"] if "coarsening" in cp else None
    if "rho" not in run:
        raise ConfigError("[run] needs rho")
    t_max = _get(run, "t_max", float, 1.0)
    kw = dict(
        kernel=kernel,
        rho=_get(run, "rho", float, None),
        L=_get(run, "L", _ints, (100,)),
        t_max=t_max,
        obs=_get(run, "obs", _floats, (t_max,)),
        n_paths=_get(run, "n_paths", int, 1000),
        master_seed=_get(run, "seed", int, 0),
        tagged_site=_get(run, "tagged_site", _site, TaggedSite.FIXED),
        allow_max_site=_get(run, "allow_max_site", _bool, False),
        tol=_get(mf, "tol", float, 1e-10),
        epsilon_tail=_get(mf, "epsilon_tail", float, 1e-12),
        eps_mass=_get(mf, "eps_mass", float, 1e-8),
        grid_step=_get(mf, "grid_step", float, 0.01),
        f0=_get(mf, "f0", str, "poisson"),
        limit_paths=_get(lim, "n_paths", int, None),
        lipschitz=_get(lim, "lipschitz", _bool, False),
        oracle_L=_get(orc, "L", int, 3),
        oracle_N=_get(orc, "N", int, 3),
        oracle_times=_get(orc, "times", _floats, (1.0,)),
        couple_L=_get(cpl, "L", int, None),
        couple_paths=_get(cpl, "n_paths", int, None),
        couple_t_max=_get(cpl, "t_max", float, None),
        couple_obs=_get(cpl, "obs", _floats, None),
        conv_times=_get(cnv, "times", _floats, None),
        ips_paths=_get(cnv, "ips_paths", int, None),
        tagged_paths=_get(cnv, "tagged_paths", int, None),
        coarse_times=_get(crs, "times", _floats, (1.0, 5.0, 10.0)),
        coarse_t_max=_get(crs, "t_max", float, 50.0),
        coarse_paths=_get(crs, "n_paths", int, None),
        sections={s: dict(cp[s]) for s in cp.sections()},
        base_dir=str(base_dir),
    )
    if seed is not None:
        kw["master_seed"] = int(seed)
    try:
        return ExperimentConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, seed: int | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, base_dir=str(path.parent), seed=seed)


# ---------------------------------------------------------------- ensembles

def _chunk(worker, master_seed, start, stop):
    out = []
    for i in range(start, stop):
        try:
            out.append(worker(i, path_rng(master_seed, i)))
        except Exception as exc:
            raise PathError(i, derive_seed(master_seed, i), exc) from exc
    return out


def run_paths(worker, n_paths: int, master_seed: int, jobs: int = 1) -> list:
    """``[worker(i, rng_i) for i in range(n_paths)]``, optionally in processes.

    A failing path raises :class:`PathError` carrying its derived seed.
    """
    if jobs is None or jobs <= 0:
        jobs = os.cpu_count() or 1
    if jobs == 1 or n_paths < 2 * jobs:
        return _chunk(worker, master_seed, 0, n_paths)
    size = max(1, -(-n_paths // (4 * jobs)))
    bounds = [(s, min(s + size, n_paths)) for s in range(0, n_paths, size)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futs = [pool.submit(_chunk, worker, master_seed, a, b) for a, b in bounds]
        out = []
        for fut in futs:
            out.extend(fut.result())
    return out


def _check_mass(counts: np.ndarray, N: int, what: str):
    k = np.arange(counts.shape[-1])
    if np.any(counts @ k != N):
        raise InvariantViolation(f"{what}: particle number is not conserved")


@dataclass(frozen=True)
class IpsWorker:
    """One untagged path from N iid uniform particles; returns counts at ``obs``."""

    L: int
    N: int
    kernel: RateKernel
    t_max: float
    obs: tuple

    def __call__(self, i, rng):
        cfg = sample_config(self.L, self.N, rng)
        out, n, K, events, absorbed = run_counts(cfg, self.kernel, self.t_max,
                                                 np.asarray(self.obs, dtype=float), rng)
        _check_mass(out, self.N, "ips path")
        width = int(np.flatnonzero(out.any(axis=0))[-1]) + 1 if out.any() else 1
        return out[:, :width]


@dataclass(frozen=True)
class TaggedWorker:
    """One tagged path; returns (W at obs, whole-lattice counts at obs)."""

    L: int
    N: int
    kernel: RateKernel
    t_max: float
    obs: tuple
    scheme: InitScheme = InitScheme()

    def __call__(self, i, rng):
        st = sample_initial(self.L, self.N, self.scheme, rng)
        obs = np.asarray(self.obs, dtype=float)
        out_env, out_w, n, K, W, events = run_tagged_arrays(st, self.kernel, self.t_max, obs, rng)
        full = out_env.copy()
        if obs.size:
            if full.shape[1] <= out_w.max():
                full = np.pad(full, ((0, 0), (0, int(out_w.max()) + 1 - full.shape[1])))
            full[np.arange(obs.size), out_w] += 1
        _check_mass(full, self.N, "tagged path")
        width = int(np.flatnonzero(full.any(axis=0))[-1]) + 1 if full.any() else 1
        return out_w, full[:, :width]


@dataclass(frozen=True)
class CoupledWorker:
    """One coupled path (``paired``) or a standalone dominating path."""

    L: int
    N: int
    kernel: RateKernel
    t_max: float
    obs: tuple
    rho: float
    paired: bool = True
    scheme: InitScheme = InitScheme()

    def __call__(self, i, rng):
        st = sample_initial(self.L, self.N, self.scheme, rng)
        fn = simulate_coupled if self.paired else simulate_wbar
        tr = fn(st, self.kernel, self.t_max, self.obs, rng, rho=self.rho)
        if self.paired and tr.violations:
            raise InvariantViolation(f"{tr.violations} domination violations")
        return tr.W, tr.wbar, tr.violations, tr.saturated


def _stack(arrays: list[np.ndarray]) -> np.ndarray:
    width = max(a.shape[-1] for a in arrays)
    out = np.zeros((len(arrays),) + arrays[0].shape[:-1] + (width,), dtype=arrays[0].dtype)
    for i, a in enumerate(arrays):
        out[i, ..., : a.shape[-1]] = a
    return out


@dataclass(frozen=True)
class IpsEnsemble:
    """``counts[path, j, k]`` at ``times[j]``."""

    times: np.ndarray
    counts: np.ndarray
    L: int
    N: int

    @property
    def n_paths(self) -> int:
        return self.counts.shape[0]

    def fk(self) -> np.ndarray:
        return self.counts / self.L

    def mean_fk(self) -> np.ndarray:
        return self.fk().mean(axis=0)

    def stderr_fk(self) -> np.ndarray:
        if self.n_paths < 2:
            return np.zeros(self.counts.shape[1:])
        return self.fk().std(axis=0, ddof=1) / math.sqrt(self.n_paths)

    def moments(self) -> np.ndarray:
        """Ensemble mean of (1/L) sum_k k^n n_k, n = 1, 2, 3, per time."""
        k = np.arange(self.counts.shape[-1], dtype=float)
        return np.stack([(self.fk() @ k**n).mean(axis=0) for n in (1, 2, 3)], axis=1)

    def config_law(self, j: int) -> dict:
        law: dict = {}
        inc = 1.0 / self.n_paths
        for row in self.counts[:, j]:
            nz = np.flatnonzero(row)
            key = tuple(int(x) for x in row[: nz[-1] + 1]) if nz.size else (0,)
            law[key] = law.get(key, 0.0) + inc
        return law


@dataclass(frozen=True)
class TaggedEnsemble:
    times: np.ndarray
    W: np.ndarray
    counts: np.ndarray
    L: int
    N: int

    @property
    def n_paths(self) -> int:
        return self.W.shape[0]

    def w_law(self, j: int, width: int | None = None) -> np.ndarray:
        width = max(int(self.W.max()) + 1, width or 0)
        return np.bincount(self.W[:, j], minlength=width) / self.n_paths

    def w_hist(self) -> np.ndarray:
        width = int(self.W.max()) + 1
        return np.array([self.w_law(j, width) for j in range(self.times.size)])

    def w_moments(self) -> np.ndarray:
        W = self.W.astype(float)
        return np.stack([W.mean(axis=0), (W**2).mean(axis=0)], axis=1)


@dataclass(frozen=True)
class CoupledEnsemble:
    times: np.ndarray
    W: np.ndarray
    wbar: np.ndarray
    violations: np.ndarray
    saturated: np.ndarray


def ips_ensemble(kernel, L, N, t_max, obs, n_paths, seed, jobs=1) -> IpsEnsemble:
    worker = IpsWorker(L, N, kernel, float(t_max), tuple(obs))
    res = run_paths(worker, n_paths, seed, jobs)
    return IpsEnsemble(np.asarray(obs, dtype=float), _stack(res), L, N)


def tagged_ensemble(kernel, L, N, t_max, obs, n_paths, seed, jobs=1,
                    scheme: InitScheme = InitScheme()) -> TaggedEnsemble:
    worker = TaggedWorker(L, N, kernel, float(t_max), tuple(obs), scheme)
    res = run_paths(worker, n_paths, seed, jobs)
    W = np.array([r[0] for r in res], dtype=np.int64)
    return TaggedEnsemble(np.asarray(obs, dtype=float), W, _stack([r[1] for r in res]), L, N)


def coupled_ensemble(kernel, L, N, t_max, obs, n_paths, seed, rho=None, paired=True,
                     jobs=1, scheme: InitScheme = InitScheme()) -> CoupledEnsemble:
    rho = N / L if rho is None else rho
    worker = CoupledWorker(L, N, kernel, float(t_max), tuple(obs), rho, paired, scheme)
    res = run_paths(worker, n_paths, seed, jobs)
    return CoupledEnsemble(np.asarray(obs, dtype=float),
                           np.array([r[0] for r in res], dtype=np.int64),
                           np.array([r[1] for r in res], dtype=float),
                           np.array([r[2] for r in res], dtype=np.int64),
                           np.array([r[3] for r in res], dtype=bool))


def solve_meanfield(cfg: ExperimentConfig, t_max: float | None = None,
                    tol: float | None = None) -> MeanFieldSolution:
    """Mean-field solution on a uniform grid of spacing ``cfg.grid_step``."""
    t_max = cfg.t_max if t_max is None else t_max
    return integrate(cfg.initial_profile(), cfg.kernel, t_max, tol=tol or cfg.tol,
                     epsilon_tail=cfg.epsilon_tail, grid_step=cfg.grid_step)


def limit_ensemble(cfg: ExperimentConfig, solution: MeanFieldSolution, t_obs,
                   n_paths: int | None = None, refine: bool = True):
    """Limit-chain ensemble; the grid is halved until rates vary < 1% per cell.

    Returns the ensemble and the solution actually used.
    """
    sol = solution
    if refine:
        step = float(np.diff(sol.times).max()) if sol.times.size > 1 else cfg.grid_step
        for _ in range(4):
            ok, _ = grid_check(sol)
            if ok:
                break
            step /= 2
            sol = integrate(sol.f[0], cfg.kernel, float(sol.times[-1]), tol=cfg.tol,
                            epsilon_tail=cfg.epsilon_tail, grid_step=step)
    n = n_paths or cfg.limit_paths or cfg.n_paths
    ens = ensemble_law(None, sol, cfg.kernel, t_obs, n,
                       stream_seed(cfg.master_seed, STREAM_LIMIT), lipschitz=cfg.lipschitz)
    return ens, sol


# ------------------------------------------------------------------ reports

def loglog_slope(xs, ys) -> float | None:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 2 or np.any(ys <= 0):
        return None
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def _l1(a, b) -> float:
    n = max(a.size, b.size)
    return float(np.abs(np.pad(a, (0, n - a.size)) - np.pad(b, (0, n - b.size))).sum())


def _err1(fk_paths: np.ndarray, f: np.ndarray) -> float:
    return _l1(fk_paths.mean(axis=0), f)


def _errw(w: np.ndarray, p: np.ndarray) -> float:
    return 0.5 * _l1(np.bincount(w) / w.size, p)


def _bootstrap(stat, data, rng, reps=200) -> float:
    n = data.shape[0]
    vals = [stat(data[rng.integers(n, size=n)]) for _ in range(reps)]
    return float(np.std(vals, ddof=1))


@dataclass(frozen=True)
class ConvergenceReport:
    """Errors per L (rows) and time (columns) with bootstrap standard errors."""

    L: tuple
    times: tuple
    err1: np.ndarray
    err1_se: np.ndarray
    errW: np.ndarray
    errW_se: np.ndarray
    slope1: list
    slopeW: list

    def decreasing(self, which: str = "err1", slack: float = 1.0) -> list[bool]:
        """Per time: err(L_{i+1}) < err(L_i) + slack * se(L_{i+1}) for all i."""
        err = getattr(self, which)
        se = getattr(self, which + "_se")
        out = []
        for j in range(len(self.times)):
            e, s = err[:, j], se[:, j]
            out.append(bool(np.all(e[1:] < e[:-1] + slack * s[1:])))
        return out

    def rows(self):
        for i, L in enumerate(self.L):
            for j, t in enumerate(self.times):
                yield (L, t, self.err1[i, j], self.err1_se[i, j], self.errW[i, j], self.errW_se[i, j])


def run_convergence(cfg: ExperimentConfig, jobs: int = 1, which=("err1", "errW"),
                    solution: MeanFieldSolution | None = None) -> ConvergenceReport:
    """Empirical-measure and tagged-law errors against the mean-field solution."""
    times = tuple(cfg.conv_times or tuple(t for t in cfg.obs if t > 0) or (cfg.t_max,))
    t_end = max(times)
    sol = solution or solve_meanfield(cfg, t_max=t_end, tol=min(cfg.tol, 1e-11))
    boot = np.random.default_rng(stream_seed(cfg.master_seed, STREAM_BOOT))
    nL, nt = len(cfg.L), len(times)
    e1, s1, ew, sw = (np.full((nL, nt), np.nan) for _ in range(4))
    for i, L in enumerate(cfg.L):
        N = cfg.N(L)
        if "err1" in which:
            ens = ips_ensemble(cfg.kernel, L, N, t_end, times, cfg.ips_paths or cfg.n_paths,
                               stream_seed(cfg.master_seed, STREAM_IPS, L), jobs)
            fk = ens.fk()
            for j, t in enumerate(times):
                f = sol.f_at(t)
                e1[i, j] = _err1(fk[:, j], f)
                s1[i, j] = _bootstrap(lambda d, f=f: _err1(d, f), fk[:, j], boot)
        if "errW" in which:
            ens = tagged_ensemble(cfg.kernel, L, N, t_end, times,
                                  cfg.tagged_paths or cfg.n_paths,
                                  stream_seed(cfg.master_seed, STREAM_TAGGED, L), jobs,
                                  cfg.scheme)
            for j, t in enumerate(times):
                p = size_bias(sol.f_at(t), sol.rho)
                w = ens.W[:, j]
                ew[i, j] = _errw(w, p)
                sw[i, j] = _bootstrap(lambda d, p=p: _errw(d, p), w, boot)
    slope1 = [loglog_slope(cfg.L, e1[:, j]) if "err1" in which else None for j in range(nt)]
    slopeW = [loglog_slope(cfg.L, ew[:, j]) if "errW" in which else None for j in range(nt)]
    return ConvergenceReport(tuple(cfg.L), times, e1, s1, ew, sw, slope1, slopeW)


@dataclass(frozen=True)
class CoarseningReport:
    times: tuple
    mean_w: np.ndarray
    mean_w_se: np.ndarray
    m2_over_rho: np.ndarray
    gap_sigma: np.ndarray
    """|E[W] - m2/rho| in units of the Monte Carlo standard error."""
    exponent: float | None
    """Fitted d log m2 / d log t over the report times, or None for one time."""
    m2_increasing: bool
    """m2 strictly increasing on [1, t_max] of the ODE grid."""
    ode_times: np.ndarray
    ode_m2: np.ndarray


def run_coarsening(cfg: ExperimentConfig, n_paths: int | None = None) -> CoarseningReport:
    times = tuple(cfg.coarse_times)
    t_end = max(max(times), cfg.coarse_t_max)
    sol = integrate(cfg.initial_profile(), cfg.kernel, t_end, tol=cfg.tol,
                    epsilon_tail=cfg.epsilon_tail, grid_step=cfg.grid_step)
    m2 = sol.moment(2)
    ens, _ = limit_ensemble(cfg, _truncate(sol, max(times), cfg), times,
                            n_paths or cfg.coarse_paths or cfg.limit_paths or cfg.n_paths)
    mean, se = ens.moment(1)
    target = np.array([np.interp(t, sol.times, m2) for t in times]) / sol.rho
    with np.errstate(divide="ignore", invalid="ignore"):
        gap = np.abs(mean - target) / se
    sel = sol.times >= 1.0
    increasing = bool(np.all(np.diff(m2[sel]) > 0)) if sel.sum() > 1 else True
    exponent = loglog_slope(times, target * sol.rho) if len(times) > 1 and min(times) > 0 else None
    return CoarseningReport(times, mean, se, target, gap, exponent, increasing, sol.times, m2)


def _truncate(sol: MeanFieldSolution, t_end: float, cfg) -> MeanFieldSolution:
    keep = sol.times <= t_end + 1e-12
    return MeanFieldSolution(sol.times[keep], sol.f[keep], sol.rho, sol.kernel,
                             min_raw=sol.min_raw, K_history=sol.K_history, n_steps=sol.n_steps)


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **kw)
