"""Command-line front end.

Subcommands: simulate, hedge, converge, gamma-table, quantile, superhedge,
selftest.  Model and experiment parameters come from a JSON config (see
docs/config.md); without --config the built-in jump-diffusion
stochastic-volatility example is used.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import harness
from .asymptotics import LimitContext, quantile_price, superhedge_rho
from .hedging import make_revision_grid
from .models import SimConfig, simulate_ensemble


def _common_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", type=str, default=None, help="JSON config file")
    p.add_argument("--seed", type=int, default=None, help="master seed override")
    p.add_argument("--paths", type=int, default=None, help="path count override")
    p.add_argument("--out", type=str, default=None, help="output directory")
    p.add_argument("--workers", type=int, default=None, help="worker processes")
    p.add_argument("--format", choices=("csv", "json"), default=None,
                   help="restrict output to one format (default: both)")


def _load(args) -> harness.ExperimentConfig:
    if args.config:
        cfg = harness.load_config(args.config)
    else:
        cfg = harness.config_from_dict(harness.default_config_dict())
    repl = {}
    if args.seed is not None:
        repl["master_seed"] = args.seed
    if args.paths is not None:
        repl["n_paths"] = args.paths
    if args.workers is not None:
        repl["workers"] = args.workers
    if args.out is not None:
        repl["out_dir"] = args.out
    return dataclasses.replace(cfg, **repl) if repl else cfg


def _formats(args):
    return (args.format,) if args.format else ("csv", "json")


def _sim_config(cfg: harness.ExperimentConfig, n: int) -> SimConfig:
    return SimConfig(
        n_paths=cfg.n_paths,
        master_seed=cfg.master_seed,
        workers=cfg.workers,
        substeps_per_interval=cfg.substeps_per_interval,
        ensemble_tag=n,
    )


def _ensemble_paths(cfg: harness.ExperimentConfig, n: int):
    grid = make_revision_grid(n, cfg.mu)
    return simulate_ensemble(cfg.model, grid.dates, _sim_config(cfg, n))


def cmd_simulate(args) -> int:
    cfg = _load(args)
    n = cfg.n_values[0]
    paths = _ensemble_paths(cfg, n)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["path,s1,y1,price_jumps,vol_jumps,resamples"]
    for k, p in enumerate(paths):
        pj = sum(1 for jm in p.jump_marks if jm.applies_to in ("price", "both"))
        vj = sum(1 for jm in p.jump_marks if jm.applies_to in ("volatility", "both"))
        lines.append(f"{k},{p.s1!r},{p.y1!r},{pj},{vj},{p.resamples}")
    (out / "paths_summary.csv").write_text("\n".join(lines) + "\n")
    if args.dump_paths:
        harness.emit_paths_csv(out / "paths_dump.csv", paths[: args.dump_paths])
    print(f"simulated {len(paths)} paths (n={n}) -> {out/'paths_summary.csv'}")
    return 0


def cmd_hedge(args) -> int:
    cfg = _load(args)
    n = args.n if args.n is not None else cfg.n_values[0]
    cfg = dataclasses.replace(cfg, n_values=(n,))
    result = harness.run_experiment(cfg)
    files = harness.emit_results(result, cfg.out_dir, _formats(args), stem="hedge")
    r = result.rows[0]
    print(f"n={r.n}: mean_corrected={r.mean_corrected:.6g} "
          f"std_corrected={r.std_corrected:.6g} mean_gamma_n={r.mean_gamma_n:.6g}")
    for f in files:
        print(f"wrote {f}")
    return 0


def cmd_converge(args) -> int:
    cfg = _load(args)
    result = harness.run_experiment(cfg)
    slope, ci = harness.convergence_slope(result)
    files = harness.emit_results(result, cfg.out_dir, _formats(args), stem="converge")
    print(f"slope of log std(corrected) vs log n: {slope:.4f}  95% CI [{ci[0]:.4f}, {ci[1]:.4f}]")
    for f in files:
        print(f"wrote {f}")
    return 0


def cmd_gamma_table(args) -> int:
    cfg = _load(args)
    sigma_val = args.sigma if args.sigma is not None else float(
        cfg.model.sigma_fn(cfg.model.y0_init)
    )
    from .models import ConstantVol

    ctx = LimitContext(
        strike=args.strike, kappa=cfg.kappa, rho=cfg.rho,
        sigma_fn=ConstantVol(sigma_val),
    )
    xs = np.linspace(args.x_min, args.x_max, args.points)
    from .asymptotics import gamma_table

    rows = gamma_table(xs, 0.0, ctx)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dest = out / "gamma_table.csv"
    harness.emit_gamma_table_csv(dest, rows[:, 0], rows[:, 1], rows[:, 2])
    print(f"wrote {dest}")
    return 0


def cmd_quantile(args) -> int:
    cfg = _load(args)
    n = cfg.n_values[0]
    paths = _ensemble_paths(cfg, n)
    s1 = [p.s1 for p in paths]
    ctx = LimitContext(strike=cfg.strike, kappa=cfg.kappa, rho=cfg.rho,
                       sigma_fn=cfg.model.sigma_fn)
    eps_grid = args.eps or [0.01, 0.02, 0.05, 0.1, 0.2, 0.5]
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["epsilon,delta_eps"]
    for eps in eps_grid:
        d = quantile_price(s1, ctx, eps, s0=cfg.model.s0)
        lines.append(f"{eps!r},{d!r}")
        print(f"eps={eps}: delta={d:.6f}")
    (out / "quantile.csv").write_text("\n".join(lines) + "\n")
    return 0


def cmd_superhedge(args) -> int:
    cfg = _load(args)
    n = cfg.n_values[0]
    paths = _ensemble_paths(cfg, n)
    samples = [(p.s1, p.y1) for p in paths]
    ctx = LimitContext(strike=cfg.strike, kappa=cfg.kappa, rho=cfg.rho,
                       sigma_fn=cfg.model.sigma_fn)
    rho_star = superhedge_rho(ctx, samples)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "superhedge.json").write_text(
        json.dumps({"rho_star": rho_star, "samples": len(samples),
                    "kappa": cfg.kappa, "strike": cfg.strike}, indent=2) + "\n"
    )
    print(f"rho* = {rho_star:.6g} over {len(samples)} terminal samples")
    return 0


def cmd_selftest(args) -> int:
    return harness.selftest(verbose=True)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lelandjump",
        description="Monte Carlo replication under transaction costs in jump models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate an ensemble, emit path summaries")
    _common_flags(p)
    p.add_argument("--dump-paths", type=int, default=0,
                   help="also dump full (t, s, y) series for the first k paths")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("hedge", help="hedge one ensemble at a single n")
    _common_flags(p)
    p.add_argument("--n", type=int, default=None, help="revision count")
    p.set_defaults(fn=cmd_hedge)

    p = sub.add_parser("converge", help="n sweep with convergence slope")
    _common_flags(p)
    p.set_defaults(fn=cmd_converge)

    p = sub.add_parser("gamma-table", help="limit trading volume vs spot (figure data)")
    _common_flags(p)
    p.add_argument("--strike", type=float, default=5.0)
    p.add_argument("--sigma", type=float, default=None,
                   help="spot volatility level (default sigma(y0) of the model)")
    p.add_argument("--x-min", type=float, default=0.1)
    p.add_argument("--x-max", type=float, default=15.0)
    p.add_argument("--points", type=int, default=60)
    p.set_defaults(fn=cmd_gamma_table)

    p = sub.add_parser("quantile", help="quantile price table")
    _common_flags(p)
    p.add_argument("--eps", type=float, nargs="*", default=None)
    p.set_defaults(fn=cmd_quantile)

    p = sub.add_parser("superhedge", help="smallest super-hedging enlargement")
    _common_flags(p)
    p.set_defaults(fn=cmd_superhedge)

    p = sub.add_parser("selftest", help="run the quick invariant suite")
    _common_flags(p)
    p.set_defaults(fn=cmd_selftest)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
