"""Discrete replication engine with proportional transaction costs.

Runs the self-financing portfolio

    V_1 = C_hat(0, S_0) + sum_i gamma_{i-1} (S_{t_i} - S_{t_{i-1}})
          - kappa * sum_i S_{t_i} |gamma_i - gamma_{i-1}|

over the revision grid t_i = 1 - (1 - i/n)^mu, with positions read off the
pre-jump left limits S_{t_i^-}.  gamma_n is the payoff hedge 1_{S_1 > K}
(identical for all strategies), and the initial acquisition cost is
excluded unless include_initial_cost is set, matching the trading-volume
sum that starts at i=1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import pricing
from .asymptotics import LimitContext, eta, gamma_limit
from .models import ConstantVol, SigmaFn, SimulatedPath
from .pricing import VolSchedule, call_delta, call_price, lambda_at

__all__ = [
    "RevisionGrid",
    "HedgeConfig",
    "HedgeOutcome",
    "make_revision_grid",
    "leland_position",
    "lepinette_position",
    "lepinette_corrections",
    "run_hedge",
    "corrected_error",
    "error_decomposition",
    "jump_term",
]

STRATEGIES = ("leland", "lepinette", "plain_delta")
THEOREMS = ("svjp", "lepinette", "const_vol")


@dataclass(frozen=True)
class RevisionGrid:
    n: int
    mu: float
    dates: np.ndarray


def make_revision_grid(n: int, mu: float) -> RevisionGrid:
    """Rebalancing dates t_i = 1 - (1 - i/n)^mu, i = 0..n."""
    if n < 1:
        raise ValueError("need n >= 1")
    if not 1.0 <= mu <= 2.0:
        raise ValueError(f"mu must lie in [1, 2], got {mu}")
    i = np.arange(n + 1)
    dates = 1.0 - (1.0 - i / n) ** mu
    dates[0] = 0.0
    dates[-1] = 1.0
    return RevisionGrid(n=n, mu=mu, dates=dates)


@dataclass(frozen=True)
class HedgeConfig:
    """Strategy, schedule and cost parameters for one hedge run.

    sigma_fn is required by the plain-delta baseline (it rebalances on the
    model's true spot volatility) and by the corrected-error functionals.
    """

    strategy: str
    schedule: VolSchedule
    kappa: float
    strike: float
    sigma_fn: Optional[SigmaFn] = None
    include_initial_cost: bool = False

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if not 0.0 <= self.kappa < 1.0:
            raise ValueError("kappa must lie in [0, 1)")
        if self.strike <= 0.0:
            raise ValueError("strike must be positive")
        if self.strategy == "plain_delta" and self.sigma_fn is None:
            raise ValueError("plain_delta needs sigma_fn")

    def limit_context(self) -> LimitContext:
        if self.sigma_fn is None:
            raise ValueError("corrected errors need sigma_fn on the HedgeConfig")
        return LimitContext(
            strike=self.strike,
            kappa=self.kappa,
            rho=self.schedule.rho,
            sigma_fn=self.sigma_fn,
        )


@dataclass
class HedgeOutcome:
    v0: float               # initial capital C_hat(0, S_0)
    v1: float               # terminal portfolio value
    payoff: float           # (S_1 - K)+
    gamma_n: float          # cumulative traded dollar volume
    n_trades: int
    raw_error: float        # v1 - payoff
    corrected_error: Optional[float] = None


def leland_position(schedule: VolSchedule, t_prev: float, x: float, strike: float):
    """Enlarged-volatility delta C_hat_x(t_prev, S_{t_prev^-})."""
    if t_prev >= 1.0:
        raise ValueError("positions are taken at revision dates before expiry")
    return call_delta(lambda_at(schedule, t_prev), x, strike)


def lepinette_position(schedule, t_prev, x, accumulated_correction, strike):
    """Leland delta minus the accumulated time-decay of delta."""
    return leland_position(schedule, t_prev, x, strike) - accumulated_correction


def lepinette_corrections(path: SimulatedPath, schedule: VolSchedule, strike: float,
                          rev_idx: np.ndarray) -> np.ndarray:
    """Running integral of C_hat_xt(t, S_{t^-}) at each revision date < 1.

    Midpoint rule in t on the simulation substeps, path value frozen at the
    left endpoint.  Only accumulates up to t_{n-1}: the integrand is
    rejected past the last revision date and positions never need it there.
    """
    last_idx = rev_idx[-2]  # grid index of t_{n-1}
    t = path.times[: last_idx + 1]
    if len(t) < 2:
        return np.zeros(len(rev_idx) - 1)
    tmid = 0.5 * (t[:-1] + t[1:])
    dt = np.diff(t)
    x = path.s_post[:last_idx]
    inc = pricing.theta_cross(schedule, tmid, x, strike) * dt
    cum = np.concatenate(([0.0], np.cumsum(inc)))
    return cum[rev_idx[:-1]]


def _revision_indices(path: SimulatedPath, dates: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(path.times, dates)
    idx = np.clip(idx, 0, len(path.times) - 1)
    if not np.allclose(path.times[idx], dates, rtol=0.0, atol=1e-12):
        raise ValueError("path grid does not contain all revision dates")
    return idx


def _positions(path: SimulatedPath, config: HedgeConfig, rev_idx: np.ndarray):
    """gamma_i for i = 0..n: strategy deltas at left limits, payoff hedge at t_n."""
    schedule = config.schedule
    dates = path.times[rev_idx]
    x_pre = path.s_pre[rev_idx]
    gammas = np.empty(len(rev_idx))
    gammas[-1] = 1.0 if x_pre[-1] > config.strike else 0.0
    if config.strategy in ("leland", "lepinette"):
        lam = lambda_at(schedule, dates[:-1])
        gammas[:-1] = call_delta(lam, x_pre[:-1], config.strike)
        if config.strategy == "lepinette":
            corr = lepinette_corrections(path, schedule, config.strike, rev_idx)
            gammas[:-1] -= corr
            # the strategy's own terminal position carries the correction
            # accumulated through t_{n-1}; without it the final rebalancing
            # pays an n-independent kappa*S_1*|corr| that never vanishes
            gammas[-1] -= corr[-1]
    else:  # plain_delta: true spot volatility in a standard BS delta
        sig = np.asarray(config.sigma_fn(path.y_pre[rev_idx[:-1]]), dtype=float)
        lam_plain = sig * sig * (1.0 - dates[:-1])
        gammas[:-1] = call_delta(lam_plain, x_pre[:-1], config.strike)
    return gammas


def run_hedge(path: SimulatedPath, config: HedgeConfig) -> HedgeOutcome:
    """Replicate one path; see module docstring for the accounting."""
    grid = make_revision_grid(config.schedule.n, config.schedule.mu)
    rev_idx = _revision_indices(path, grid.dates)
    s_rev = path.s_post[rev_idx]
    s0 = float(s_rev[0])

    gammas = _positions(path, config, rev_idx)
    if config.strategy == "plain_delta":
        sig0 = float(config.sigma_fn(path.y_post[0]))
        v0 = call_price(sig0 * sig0, s0, config.strike)
    else:
        v0 = call_price(config.schedule.lambda0, s0, config.strike)

    gains = float(np.sum(gammas[:-1] * np.diff(s_rev)))
    trades = np.abs(np.diff(gammas))
    gamma_n = float(np.sum(s_rev[1:] * trades))
    n_trades = int(np.count_nonzero(trades))
    if config.include_initial_cost:
        gamma_n += s0 * abs(gammas[0])
        n_trades += 1 if gammas[0] != 0.0 else 0

    v1 = v0 + gains - config.kappa * gamma_n
    payoff = max(float(s_rev[-1]) - config.strike, 0.0)
    return HedgeOutcome(
        v0=v0,
        v1=v1,
        payoff=payoff,
        gamma_n=gamma_n,
        n_trades=n_trades,
        raw_error=v1 - payoff,
    )


def corrected_error(outcome: HedgeOutcome, s1: float, y1: float,
                    config: HedgeConfig, theorem: str) -> float:
    """Theorem-specific corrected replication error.

    svjp      (Leland):    D = raw - min(S1,K) + kappa*Gamma(S1,y1,rho)
    lepinette (Lepinette): D = raw - eta(y1)*min(S1,K)
    const_vol:             either of the above, requiring constant sigma
    """
    if theorem not in THEOREMS:
        raise ValueError(f"unknown theorem {theorem!r}")
    ctx = config.limit_context()
    if theorem == "const_vol":
        if not isinstance(config.sigma_fn, ConstantVol):
            raise ValueError("const_vol theorem requires a constant volatility model")
        strategy = config.strategy
    elif theorem == "svjp":
        strategy = "leland"
    else:
        strategy = "lepinette"
    if config.strategy != strategy:
        raise ValueError(
            f"theorem {theorem!r} does not apply to strategy {config.strategy!r}"
        )

    base = min(s1, config.strike)
    if config.strategy == "leland":
        gam = gamma_limit(s1, y1, ctx) if config.kappa != 0.0 else 0.0
        return outcome.raw_error - base + config.kappa * gam
    return outcome.raw_error - eta(y1, ctx) * base


def jump_term(lam: float, x: float, z: float, strike: float) -> float:
    """Jump cost B = C(lam, x(1+z)) - C(lam, x) - z x C_x(lam, x), >= 0 by convexity."""
    return (
        call_price(lam, x * (1.0 + z), strike)
        - call_price(lam, x, strike)
        - z * x * call_delta(lam, x, strike)
    )


def error_decomposition(path: SimulatedPath, config: HedgeConfig, fine_factor: int):
    """Diagnostic split of the raw error into (I1, I2, I3, gamma_n).

    raw = I1/2 + I2 - I3 - kappa*gamma_n holds exactly in continuous time;
    here I1 uses the composite midpoint rule on substeps (the enlarged part
    integrated exactly in the lambda clock) and I2 sums the left-evaluated
    integrand against discrete increments of S, jumps included.  The path
    must carry at least fine_factor substeps per revision interval.
    """
    if fine_factor < 4:
        raise ValueError("need fine_factor >= 4 substeps per revision interval")
    schedule = config.schedule
    grid = make_revision_grid(schedule.n, schedule.mu)
    rev_idx = _revision_indices(path, grid.dates)
    if np.min(np.diff(rev_idx)) < fine_factor:
        raise ValueError("path grid is coarser than fine_factor")

    times = path.times
    t_left = times[:-1]
    tmid = 0.5 * (times[:-1] + times[1:])
    dt = np.diff(times)
    x = path.s_post[:-1]
    if config.sigma_fn is None:
        raise ValueError("error decomposition needs sigma_fn")
    sig2 = np.asarray(config.sigma_fn(path.y_post[:-1]), dtype=float) ** 2

    # I1 = int (sigma_hat^2 - sigma^2(y)) S^2 C_xx dt; the sigma_hat part is
    # integrated exactly in lambda (d lambda = -sigma_hat^2 dt)
    lam_mid = lambda_at(schedule, tmid)
    s2cxx = x * pricing._phi_tilde(lam_mid, x, config.strike) / np.sqrt(lam_mid)
    dlam = lambda_at(schedule, times[:-1]) - lambda_at(schedule, times[1:])
    i1 = float(np.sum(s2cxx * dlam) - np.sum(sig2 * s2cxx * dt))

    # I2 = sum (gamma_{t^-} - C_x(t, S_{t^-})) dS over substeps
    gammas = _positions(path, config, rev_idx)
    interval = np.searchsorted(rev_idx, np.arange(len(times) - 1), side="right") - 1
    gamma_t = gammas[interval]
    delta_t = call_delta(lambda_at(schedule, t_left), x, config.strike)
    ds = np.diff(path.s_post)
    i2 = float(np.sum((gamma_t - delta_t) * ds))

    # I3 = sum of jump costs B(t, S_{t^-}, xi) over price jumps
    i3 = 0.0
    for jm in path.jump_marks:
        if jm.applies_to in ("price", "both"):
            lam_j = lambda_at(schedule, float(times[jm.index]))
            i3 += jump_term(lam_j, float(path.s_pre[jm.index]), jm.size, config.strike)

    gamma_n = run_hedge(path, config).gamma_n
    return i1, i2, float(i3), gamma_n
