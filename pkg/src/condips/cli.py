"""Command-line front end.

Every subcommand reads an INI config (``--config``) and writes CSV files plus
``meta.json`` into ``--out``. Exit codes: 0 success, 2 configuration error,
3 numerical failure, 4 invariant violation.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .coupling import moment_monitor
from .errors import CondipsError, ConfigError, PathError
from .harness import (
    STREAM_COUPLED,
    STREAM_IPS,
    STREAM_TAGGED,
    CoupledWorker,
    IpsWorker,
    TaggedWorker,
    coupled_ensemble,
    ips_ensemble,
    limit_ensemble,
    load_config,
    run_coarsening,
    run_convergence,
    solve_meanfield,
    stream_seed,
    tagged_ensemble,
)
from .io import read_csv, write_csv, write_meta, write_snapshot
from .meanfield import MeanFieldSolution, birth_death_rates
from .oracle import build_chain, initial_law, marginals, transient
from .seeding import derive_seed

COMMANDS = ("simulate-ips", "simulate-tagged", "solve-meanfield", "simulate-limit", "couple",
            "oracle", "convergence", "coarsening", "replay-seed")


def _out_dirs(out: Path, Ls) -> list[tuple[int, Path]]:
    if len(Ls) == 1:
        return [(Ls[0], out)]
    return [(L, out / f"L_{L}") for L in Ls]


def _meta(cfg, args, started, **extra):
    payload = {"command": args.command, "version": __version__, "config": cfg.describe(),
               "master_seed": cfg.master_seed, "jobs": args.jobs}
    payload.update(extra)
    write_meta(Path(args.out) / "meta.json", payload, started)


def cmd_simulate_ips(cfg, args):
    for L, d in _out_dirs(Path(args.out), cfg.L):
        ens = ips_ensemble(cfg.kernel, L, cfg.N(L), cfg.t_max, cfg.obs, cfg.n_paths,
                           stream_seed(cfg.master_seed, STREAM_IPS, L), args.jobs)
        mean, se = ens.mean_fk(), ens.stderr_fk()
        write_csv(d / "fk.csv", ["t", "k", "mean_Fk", "stderr_Fk"],
                  ((t, k, mean[j, k], se[j, k]) for j, t in enumerate(ens.times)
                   for k in range(mean.shape[1])))
        mom = ens.moments()
        write_csv(d / "moments.csv", ["t", "m1", "m2", "m3"],
                  ((t, *mom[j]) for j, t in enumerate(ens.times)))


def cmd_simulate_tagged(cfg, args):
    for L, d in _out_dirs(Path(args.out), cfg.L):
        ens = tagged_ensemble(cfg.kernel, L, cfg.N(L), cfg.t_max, cfg.obs, cfg.n_paths,
                              stream_seed(cfg.master_seed, STREAM_TAGGED, L), args.jobs,
                              cfg.scheme)
        h = ens.w_hist()
        se = np.sqrt(h * (1 - h) / ens.n_paths)
        write_csv(d / "w_hist.csv", ["t", "k", "P_W", "stderr"],
                  ((t, k, h[j, k], se[j, k]) for j, t in enumerate(ens.times)
                   for k in range(1, h.shape[1])))
        mom = ens.w_moments()
        write_csv(d / "w_moments.csv", ["t", "E_W", "E_W2"],
                  ((t, *mom[j]) for j, t in enumerate(ens.times)))


def write_solution(sol: MeanFieldSolution, out: Path):
    K = sol.K
    write_csv(out / "f.csv", ["t", "k", "f_k"],
              ((t, k, sol.f[i, k]) for i, t in enumerate(sol.times) for k in range(K + 1)))
    P = sol.size_biased()
    write_csv(out / "p.csv", ["t", "k", "p_k"],
              ((t, k, P[i, k]) for i, t in enumerate(sol.times) for k in range(1, K + 1)))

    def rate_rows():
        for i, t in enumerate(sol.times):
            r = birth_death_rates(sol.f[i], sol.kernel)
            for k in range(K + 1):
                yield t, k, r.mu[k], r.beta[k]

    write_csv(out / "rates.csv", ["t", "k", "mu_k", "beta_k"], rate_rows())
    m = np.stack([sol.moment(n) for n in (1, 2, 3)], axis=1)
    write_csv(out / "moments.csv", ["t", "m1", "m2", "m3"],
              ((t, *m[i]) for i, t in enumerate(sol.times)))


def read_solution(directory, kernel) -> MeanFieldSolution:
    """Rebuild a solution from the ``f.csv`` written by ``solve-meanfield``."""
    cols = read_csv(Path(directory) / "f.csv")
    times = np.unique(cols["t"].astype(float))
    K = int(cols["k"].max())
    f = np.zeros((times.size, K + 1))
    f[np.searchsorted(times, cols["t"]), cols["k"]] = cols["f_k"]
    rho = float(np.dot(np.arange(K + 1), f[0]))
    return MeanFieldSolution(times, f, rho, kernel)


def cmd_solve_meanfield(cfg, args):
    sol = solve_meanfield(cfg)
    write_solution(sol, Path(args.out))
    return {"K_final": sol.K, "min_raw": sol.min_raw, "steps": sol.n_steps}


def cmd_simulate_limit(cfg, args):
    if args.meanfield:
        sol = read_solution(args.meanfield, cfg.kernel)
    else:
        sol = solve_meanfield(cfg)
    ens, _ = limit_ensemble(cfg, sol, cfg.obs, refine=not args.meanfield)
    h = ens.histograms()
    se = ens.stderr()
    write_csv(Path(args.out) / "what_hist.csv", ["t", "k", "P_W", "stderr"],
              ((t, k, h[j, k], se[j, k]) for j, t in enumerate(ens.times)
               for k in range(1, h.shape[1])))
    m1, s1 = ens.moment(1)
    m2, s2 = ens.moment(2)
    write_csv(Path(args.out) / "what_moments.csv", ["t", "E_W", "E_W_se", "E_W2", "E_W2_se"],
              ((t, m1[j], s1[j], m2[j], s2[j]) for j, t in enumerate(ens.times)))
    return {"worst_acceptance_ratio": ens.worst_ratio}


def cmd_couple(cfg, args):
    L = cfg.couple_L or cfg.L[0]
    t_max = cfg.couple_t_max or cfg.t_max
    obs = cfg.couple_obs or tuple(t for t in cfg.obs if t <= t_max)
    n = cfg.couple_paths or cfg.n_paths
    ens = coupled_ensemble(cfg.kernel, L, cfg.N(L), t_max, obs, n,
                           stream_seed(cfg.master_seed, STREAM_COUPLED, L), rho=cfg.rho,
                           jobs=args.jobs, scheme=cfg.scheme)
    out = Path(args.out)
    write_csv(out / "domination.csv", ["path_id", "violations"],
              ((i, v) for i, v in enumerate(ens.violations)))
    rep = moment_monitor(ens.W, ens.wbar, ens.times)
    write_csv(out / "coupled_moments.csv", ["t", "m2_hat", "m2_hat_se", "m2_bar", "m2_bar_se"],
              ((t, rep.m2_hat[j], rep.se_hat[j], rep.m2_bar[j], rep.se_bar[j])
               for j, t in enumerate(rep.times)))
    return {"L": L, "ordered": rep.ordered, "finite": rep.finite,
            "fitted_log_growth": rep.growth_rate, "saturated_paths": int(ens.saturated.sum())}


def cmd_oracle(cfg, args):
    times = _parse_times(args.t) if args.t else cfg.oracle_times
    chain = build_chain(cfg.oracle_L, cfg.oracle_N, cfg.kernel, tagged=True,
                        cache_dir=args.cache)
    p0 = initial_law(chain, cfg.tagged_site)
    rows_f, rows_w = [], []
    for t in times:
        m = marginals(chain, transient(chain, p0, t))
        rows_f += [(t, k, m.fk_mean[k]) for k in range(m.fk_mean.size)]
        rows_w += [(t, k, m.w_law[k]) for k in range(1, m.w_law.size)]
    out = Path(args.out)
    write_csv(out / "exact_fk.csv", ["t", "k", "E_Fk"], rows_f)
    write_csv(out / "exact_w.csv", ["t", "k", "P_W"], rows_w)
    return {"L": cfg.oracle_L, "N": cfg.oracle_N, "states": len(chain.states)}


def cmd_convergence(cfg, args):
    rep = run_convergence(cfg, jobs=args.jobs)
    out = Path(args.out)
    write_csv(out / "convergence.csv", ["L", "t", "err1", "err1_se", "errW", "errW_se"], rep.rows())
    write_csv(out / "slopes.csv", ["t", "slope_err1", "slope_errW"],
              ((t, "" if rep.slope1[j] is None else rep.slope1[j],
                "" if rep.slopeW[j] is None else rep.slopeW[j])
               for j, t in enumerate(rep.times)))
    return {"err1_decreasing": rep.decreasing("err1"), "errW_decreasing": rep.decreasing("errW")}


def cmd_coarsening(cfg, args):
    rep = run_coarsening(cfg)
    out = Path(args.out)
    write_csv(out / "coarsening.csv", ["t", "E_W", "E_W_se", "m2_over_rho", "gap_sigma"],
              ((t, rep.mean_w[j], rep.mean_w_se[j], rep.m2_over_rho[j], rep.gap_sigma[j])
               for j, t in enumerate(rep.times)))
    write_csv(out / "m2.csv", ["t", "m2"], zip(rep.ode_times, rep.ode_m2))
    return {"exponent": rep.exponent, "m2_increasing": rep.m2_increasing}


def cmd_replay_seed(cfg, args):
    kinds = {"ips": STREAM_IPS, "tagged": STREAM_TAGGED, "couple": STREAM_COUPLED}
    L = args.L or (cfg.couple_L if args.kind == "couple" and cfg.couple_L else cfg.L[0])
    if args.path_seed is not None:
        seed = int(args.path_seed, 0)
    elif args.index is not None:
        seed = derive_seed(stream_seed(cfg.master_seed, kinds[args.kind], L), args.index)
    else:
        raise ConfigError("replay-seed needs --path-seed or --index")
    rng = np.random.Generator(np.random.PCG64(seed))
    N = cfg.N(L)
    out = Path(args.out)
    if args.kind == "ips":
        counts = IpsWorker(L, N, cfg.kernel, cfg.t_max, cfg.obs)(0, rng)
        write_snapshot(out / "replay.csv", cfg.obs, counts,
                       {"L": L, "N": N, "seed": seed, "model": cfg.kernel.describe()})
    elif args.kind == "tagged":
        W, counts = TaggedWorker(L, N, cfg.kernel, cfg.t_max, cfg.obs, cfg.scheme)(0, rng)
        write_csv(out / "replay.csv", ["t", "W"], zip(cfg.obs, W))
    else:
        t_max = cfg.couple_t_max or cfg.t_max
        obs = cfg.couple_obs or tuple(t for t in cfg.obs if t <= t_max)
        W, wbar, viol, _ = CoupledWorker(L, N, cfg.kernel, t_max, obs, cfg.rho,
                                         scheme=cfg.scheme)(0, rng)
        write_csv(out / "replay.csv", ["t", "W", "Wbar"], zip(obs, W, wbar))
    print(f"replayed {args.kind} path with seed {seed:#018x} (L = {L})")
    return {"path_seed": seed, "kind": args.kind, "L": L}


HANDLERS = {
    "simulate-ips": cmd_simulate_ips,
    "simulate-tagged": cmd_simulate_tagged,
    "solve-meanfield": cmd_solve_meanfield,
    "simulate-limit": cmd_simulate_limit,
    "couple": cmd_couple,
    "oracle": cmd_oracle,
    "convergence": cmd_convergence,
    "coarsening": cmd_coarsening,
    "replay-seed": cmd_replay_seed,
}


def _parse_times(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"bad time list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="INI experiment config")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--jobs", type=int, default=0,
                        help="worker processes (default: all cores)")
    common.add_argument("--seed", type=int, default=None, help="override the master seed")
    parser = argparse.ArgumentParser(prog="condips", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "simulate-limit":
            p.add_argument("--meanfield", help="directory written by solve-meanfield")
        if name == "oracle":
            p.add_argument("--t", help="comma-separated observation times")
            p.add_argument("--cache", help="directory for cached generators")
        if name == "replay-seed":
            p.add_argument("--kind", choices=("ips", "tagged", "couple"), required=True)
            p.add_argument("--path-seed", help="64-bit path seed as printed by a failed run")
            p.add_argument("--index", type=int, help="path index within the configured stream")
            p.add_argument("--L", type=int, help="system size (default: first configured)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = time.time()
    try:
        cfg = load_config(args.config, seed=args.seed)
        Path(args.out).mkdir(parents=True, exist_ok=True)
        extra = HANDLERS[args.command](cfg, args) or {}
        _meta(cfg, args, started, **extra)
    except PathError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(f"replay with: condips replay-seed --config {args.config} --out <dir> "
              f"--kind <ips|tagged|couple> --path-seed {exc.seed:#x}", file=sys.stderr)
        return exc.exit_code
    except CondipsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
