"""End-to-end Monte Carlo experiments: config -> simulate -> hedge -> stats.

A run sweeps revision counts, hedges an independent path ensemble per n
(substreams keyed by (master_seed, n, path)), and reports per-n statistics
of raw and corrected errors plus an OLS estimate of the convergence slope
with a path-level bootstrap confidence interval.
"""

from __future__ import annotations

import dataclasses
import json
import math
import subprocess
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from scipy.stats import skew as _skew

from .asymptotics import eta, gamma_limit
from .hedging import HedgeConfig, corrected_error, make_revision_grid, run_hedge
from .models import (
    CirSde,
    ConstantVol,
    ExponentialVol,
    JumpChannel,
    LogNormalFactor,
    ModelSpec,
    Normal,
    OuSde,
    PointMass,
    SimConfig,
    SqrtVol,
    Uniform,
    simulate_ensemble,
)
from .pricing import SQRT_8_OVER_PI, VolSchedule

__all__ = [
    "ExperimentConfig",
    "ExperimentRow",
    "ExperimentResult",
    "run_experiment",
    "convergence_slope",
    "fit_power_law",
    "emit_results",
    "load_config",
    "config_from_dict",
    "default_config_dict",
    "selftest",
    "CSV_HEADER",
]

CSV_HEADER = (
    "n,paths,mean_raw,std_raw,mean_corrected,std_corrected,"
    "stderr_corrected,skew_corrected,mean_gamma_n,mean_corrector,seed"
)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec
    strategy: str = "leland"
    schedule_form: str = "simple"
    mu: float = 1.0
    rho: float = SQRT_8_OVER_PI
    base_sigma: float = 0.0
    kappa: float = 0.001
    strike: float = 1.0
    theorem: str = "svjp"
    n_values: tuple = (50, 100, 200, 400, 800)
    n_paths: int = 500
    master_seed: int = 20260808
    substeps_per_interval: int = 2
    workers: int = 1
    include_initial_cost: bool = False
    out_dir: str = "out"

    def __post_init__(self):
        if len(self.n_values) == 0:
            raise ValueError("n_values must be nonempty")
        if list(self.n_values) != sorted(set(self.n_values)):
            raise ValueError("n_values must be strictly increasing")

    def schedule(self, n: int) -> VolSchedule:
        return VolSchedule(self.schedule_form, n, self.mu, self.rho, self.base_sigma)

    def hedge_config(self, n: int) -> HedgeConfig:
        return HedgeConfig(
            strategy=self.strategy,
            schedule=self.schedule(n),
            kappa=self.kappa,
            strike=self.strike,
            sigma_fn=self.model.sigma_fn,
            include_initial_cost=self.include_initial_cost,
        )


@dataclass
class ExperimentRow:
    n: int
    paths: int
    mean_raw: float
    std_raw: float
    mean_corrected: float
    std_corrected: float
    stderr_corrected: float
    skew_corrected: float
    mean_gamma_n: float
    mean_corrector: float
    seed: int


@dataclass
class ExperimentResult:
    rows: list
    corrected_by_n: dict
    config: ExperimentConfig
    slope: float | None = None
    slope_ci: tuple | None = None

    def ns(self):
        return [r.n for r in self.rows]


# ---------------------------------------------------------------------------
# Per-path fold: hedge + theorem corrections (module-level for pickling)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _HedgeFold:
    hedge: HedgeConfig
    theorem: str

    def __call__(self, path):
        out = run_hedge(path, self.hedge)
        d = corrected_error(out, path.s1, path.y1, self.hedge, self.theorem)
        ctx = self.hedge.limit_context()
        base = min(path.s1, self.hedge.strike)
        if self.theorem == "lepinette" or (
            self.theorem == "const_vol" and self.hedge.strategy == "lepinette"
        ):
            corrector_val = eta(path.y1, ctx) * base
        elif self.hedge.kappa != 0.0:
            corrector_val = base - self.hedge.kappa * gamma_limit(path.s1, path.y1, ctx)
        else:
            corrector_val = base
        return (out.raw_error, d, out.gamma_n, corrector_val)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Hedge an independent ensemble per n and collect the statistics."""
    rows = []
    corrected_by_n = {}
    for n in config.n_values:
        grid = make_revision_grid(n, config.mu)
        fold = _HedgeFold(config.hedge_config(n), config.theorem)
        sim = SimConfig(
            n_paths=config.n_paths,
            master_seed=config.master_seed,
            workers=config.workers,
            substeps_per_interval=config.substeps_per_interval,
            ensemble_tag=n,
        )
        vals = np.array(simulate_ensemble(config.model, grid.dates, sim, fold=fold))
        raw, corr, gam, corrector = vals.T
        corrected_by_n[n] = corr
        rows.append(
            ExperimentRow(
                n=n,
                paths=config.n_paths,
                mean_raw=float(raw.mean()),
                std_raw=float(raw.std(ddof=1)),
                mean_corrected=float(corr.mean()),
                std_corrected=float(corr.std(ddof=1)),
                stderr_corrected=float(corr.std(ddof=1) / math.sqrt(len(corr))),
                skew_corrected=float(_skew(corr)),
                mean_gamma_n=float(gam.mean()),
                mean_corrector=float(corrector.mean()),
                seed=config.master_seed,
            )
        )
    return ExperimentResult(rows=rows, corrected_by_n=corrected_by_n, config=config)


def fit_power_law(ns, stds) -> float:
    """OLS slope of log std against log n."""
    ln = np.log(np.asarray(ns, dtype=float))
    ls = np.log(np.asarray(stds, dtype=float))
    return float(np.polyfit(ln, ls, 1)[0])


def convergence_slope(result: ExperimentResult, n_boot: int = 200):
    """Slope of log std(corrected error) vs log n with a bootstrap 95% CI.

    Path-level resampling within each n ensemble; points with nonpositive
    std are dropped, at least 4 must remain and span a decade.
    """
    ns, stds = [], []
    for r in result.rows:
        if r.std_corrected > 0.0:
            ns.append(r.n)
            stds.append(r.std_corrected)
    if len(ns) < 4:
        raise ValueError("need at least 4 n values with positive std")
    if max(ns) / min(ns) < 10.0:
        raise ValueError("n values must span at least one decade")
    slope = fit_power_law(ns, stds)

    rng = np.random.default_rng(result.config.master_seed ^ 0x5B00757374726170)
    boot = np.empty(n_boot)
    samples = [result.corrected_by_n[n] for n in ns]
    for b in range(n_boot):
        res_stds = []
        for arr in samples:
            idx = rng.integers(0, len(arr), len(arr))
            res_stds.append(arr[idx].std(ddof=1))
        boot[b] = fit_power_law(ns, res_stds)
    lo, hi = np.percentile(boot, [2.5, 97.5])
    result.slope = slope
    result.slope_ci = (float(lo), float(hi))
    return slope, (float(lo), float(hi))


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------

def _git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5,
        )
        return out.stdout.strip() or "unknown"
    except OSError:
        return "unknown"


def _config_echo(config: ExperimentConfig) -> dict:
    def enc(obj):
        if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
            d = {"kind": type(obj).__name__}
            d.update({f.name: enc(getattr(obj, f.name)) for f in dataclasses.fields(obj)})
            return d
        if isinstance(obj, (tuple, list)):
            return [enc(v) for v in obj]
        return obj

    return enc(config)


def rows_to_csv(rows) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r.n},{r.paths},{r.mean_raw!r},{r.std_raw!r},{r.mean_corrected!r},"
            f"{r.std_corrected!r},{r.stderr_corrected!r},{r.skew_corrected!r},"
            f"{r.mean_gamma_n!r},{r.mean_corrector!r},{r.seed}"
        )
    return "\n".join(lines) + "\n"


def emit_results(result: ExperimentResult, out_dir, formats=("csv", "json"),
                 stem: str = "result"):
    """Write result.csv / result.json under out_dir; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        p = out_dir / f"{stem}.csv"
        p.write_text(rows_to_csv(result.rows))
        written.append(p)
    if "json" in formats:
        payload = {
            "meta": {
                "config": _config_echo(result.config),
                "git": _git_describe(),
                "timestamp": datetime.now(timezone.utc).isoformat(),
            },
            "rows": [dataclasses.asdict(r) for r in result.rows],
            "slope": result.slope,
            "slope_ci": list(result.slope_ci) if result.slope_ci else None,
        }
        p = out_dir / f"{stem}.json"
        p.write_text(json.dumps(payload, indent=2) + "\n")
        written.append(p)
    return written


# ---------------------------------------------------------------------------
# JSON config ingestion (unknown keys are hard errors)
# ---------------------------------------------------------------------------

def default_config_dict() -> dict:
    """Built-in example: Hull-White dynamics with Gaussian price jumps."""
    return {
        "model": {
            "s0": 1.0,
            "y0": 0.0,
            "sigma": {"kind": "exponential", "scale": 2.0, "sigma_min": 1.0},
            "vol_sde": {"kind": "ou", "a": -1.0, "b": 0.2},
            "brownian_corr": 0.0,
            "jumps": [
                {"intensity": 3.0,
                 "size": {"kind": "normal", "mean": 0.0, "sd": 0.2},
                 "applies_to": "price"}
            ],
        },
        "hedge": {
            "strategy": "leland",
            "schedule": {"form": "simple", "mu": 1.0,
                         "rho": SQRT_8_OVER_PI, "base_sigma": 0.0},
            "kappa": 0.001,
            "strike": 1.0,
            "include_initial_cost": False,
        },
        "theorem": "svjp",
        "n_values": [50, 100, 200, 400, 800],
        "n_paths": 500,
        "substeps_per_interval": 2,
        "master_seed": 20260808,
        "workers": 1,
        "out_dir": "out",
    }


def _require_keys(d: dict, allowed, where: str):
    unknown = set(d) - set(allowed)
    if unknown:
        raise ValueError(f"unknown config keys {sorted(unknown)} in {where}")


_SIGMA_KINDS = {
    "exponential": (ExponentialVol, ("scale", "sigma_min")),
    "sqrt": (SqrtVol, ("floor",)),
    "constant": (ConstantVol, ("value",)),
}
_SDE_KINDS = {
    "ou": (OuSde, ("a", "b")),
    "cir": (CirSde, ("a", "m", "b")),
}
_SIZE_KINDS = {
    "normal": (Normal, ("mean", "sd")),
    "lognormal_factor": (LogNormalFactor, ("mean", "sd")),
    "point_mass": (PointMass, ("value",)),
    "uniform": (Uniform, ("low", "high")),
}


def _build_tagged(d: dict, table: dict, where: str):
    if "kind" not in d:
        raise ValueError(f"missing 'kind' in {where}")
    kind = d["kind"]
    if kind not in table:
        raise ValueError(f"unknown kind {kind!r} in {where}")
    cls, fields = table[kind]
    _require_keys(d, ("kind", *fields), where)
    missing = [f for f in fields if f not in d]
    if missing:
        raise ValueError(f"missing {missing} in {where}")
    return cls(**{f: d[f] for f in fields})


def model_from_dict(d: dict) -> ModelSpec:
    _require_keys(d, ("s0", "y0", "sigma", "vol_sde", "brownian_corr", "jumps"),
                  "model")
    sigma_fn = _build_tagged(d["sigma"], _SIGMA_KINDS, "model.sigma")
    sde_spec = d.get("vol_sde", {"kind": "none"})
    if sde_spec.get("kind") == "none":
        _require_keys(sde_spec, ("kind",), "model.vol_sde")
        vol_sde = None
    else:
        vol_sde = _build_tagged(sde_spec, _SDE_KINDS, "model.vol_sde")
    channels = []
    for i, j in enumerate(d.get("jumps", [])):
        _require_keys(j, ("intensity", "size", "applies_to"), f"model.jumps[{i}]")
        channels.append(
            JumpChannel(
                intensity=j["intensity"],
                size_dist=_build_tagged(j["size"], _SIZE_KINDS, f"model.jumps[{i}].size"),
                applies_to=j.get("applies_to", "price"),
            )
        )
    return ModelSpec(
        s0=d.get("s0", 1.0),
        sigma_fn=sigma_fn,
        vol_sde=vol_sde,
        jump_channels=tuple(channels),
        brownian_corr=d.get("brownian_corr", 0.0),
        y0_init=d.get("y0", 0.0),
    )


def config_from_dict(d: dict) -> ExperimentConfig:
    _require_keys(
        d,
        ("model", "hedge", "theorem", "n_values", "n_paths",
         "substeps_per_interval", "master_seed", "workers", "out_dir"),
        "config",
    )
    model = model_from_dict(d["model"])
    h = d["hedge"]
    _require_keys(h, ("strategy", "schedule", "kappa", "strike",
                      "include_initial_cost"), "hedge")
    s = h["schedule"]
    _require_keys(s, ("form", "mu", "rho", "base_sigma"), "hedge.schedule")
    return ExperimentConfig(
        model=model,
        strategy=h.get("strategy", "leland"),
        schedule_form=s.get("form", "simple"),
        mu=s.get("mu", 1.0),
        rho=s.get("rho", SQRT_8_OVER_PI),
        base_sigma=s.get("base_sigma", 0.0),
        kappa=h.get("kappa", 0.001),
        strike=h.get("strike", 1.0),
        theorem=d.get("theorem", "svjp"),
        n_values=tuple(d.get("n_values", (50, 100, 200, 400, 800))),
        n_paths=d.get("n_paths", 500),
        master_seed=d.get("master_seed", 20260808),
        substeps_per_interval=d.get("substeps_per_interval", 2),
        workers=d.get("workers", 1),
        include_initial_cost=h.get("include_initial_cost", False),
        out_dir=d.get("out_dir", "out"),
    )


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Golden-figure emitters (consumed by the report component)
# ---------------------------------------------------------------------------

def emit_gamma_table_csv(path, xs, gammas, correctors):
    lines = ["x,gamma_limit,corrector"]
    for x, g, c in zip(xs, gammas, correctors):
        lines.append(f"{float(x)!r},{float(g)!r},{float(c)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def emit_revision_times_csv(path, mus, n):
    lines = ["mu,i,t_i"]
    for mu in mus:
        grid = make_revision_grid(n, mu)
        for i, t in enumerate(grid.dates):
            lines.append(f"{float(mu)!r},{i},{float(t)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def emit_lambda_schedule_csv(path, n, mu, rho):
    from .asymptotics import grid_diagnostics

    diag = grid_diagnostics(n, mu, rho)
    lines = ["j,t_j,lambda_j"]
    for j, (t, lam) in enumerate(zip(diag.t, diag.lam)):
        lines.append(f"{j},{float(t)!r},{float(lam)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def emit_paths_csv(path, paths):
    lines = ["path,t,s,y"]
    for k, p in enumerate(paths):
        for t, s, y in zip(p.times, p.s_post, p.y_post):
            lines.append(f"{k},{float(t)!r},{float(s)!r},{float(y)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Self-test: quick invariant sweep for the CLI
# ---------------------------------------------------------------------------

def selftest(verbose: bool = True) -> int:
    """Run the fast invariants; returns the number of failures."""
    from . import pricing
    from .asymptotics import g_fn, lambda_fn

    checks = []

    def check(name, ok):
        checks.append((name, bool(ok)))
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name}")

    check("G(0) = sqrt(2/pi)", abs(g_fn(0.0) - math.sqrt(2 / math.pi)) < 1e-12)
    check("Lambda(0) = 1 - 2/pi", abs(lambda_fn(0.0) - (1 - 2 / math.pi)) < 1e-12)
    check("G evenness", all(abs(g_fn(a) - g_fn(-a)) < 1e-12 for a in (0.3, 1.7, 4.0)))

    sched = VolSchedule("simple", 100, 1.0, 1.0)
    check("lambda0 mu=1 n=100", abs(sched.lambda0 - 10.0) < 1e-12)
    check(
        "price bounds",
        all(
            max(x - 1.0, 0.0) <= pricing.call_price(lam, x, 1.0) <= x
            for lam in (0.1, 1.0, 10.0)
            for x in (0.5, 1.0, 2.0)
        ),
    )

    model = ModelSpec(1.0, ConstantVol(0.3), None,
                      (JumpChannel(1.0, LogNormalFactor(0.0, 0.1), "price"),))
    grid = make_revision_grid(16, 1.0)
    sim = SimConfig(n_paths=2000, master_seed=99)
    s1 = np.array(simulate_ensemble(model, grid.dates, sim, fold=lambda p: p.s1))
    err = abs(s1.mean() - 1.0)
    check("martingale (2e3 paths)", err <= 3 * s1.std(ddof=1) / math.sqrt(len(s1)))

    a = [p.s1 for p in simulate_ensemble(model, grid.dates, SimConfig(10, 5, workers=1))]
    b = [p.s1 for p in simulate_ensemble(model, grid.dates, SimConfig(10, 5, workers=2))]
    check("worker-count determinism", a == b)

    failures = sum(1 for _, ok in checks if not ok)
    if verbose:
        print(f"{len(checks) - failures}/{len(checks)} selftest checks passed")
    return failures
