"""Limit objects of the hedging-error theory.

Everything here is a closed form or a one-dimensional quadrature:
the absolute-normal moment functions G and Lambda, the limit trading
volume Gamma(x, y, rho), the corrector min(x,K) - kappa*Gamma, the
Lepinette factor eta, the quantile price, the super-hedging enlargement
search, and the lambda-grid diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import quad

from .models import SigmaFn
from .pricing import SQRT_8_OVER_PI, VolSchedule, norm_cdf, norm_pdf

__all__ = [
    "LimitContext",
    "GridDiagnostics",
    "g_fn",
    "lambda_fn",
    "q_fn",
    "p_fn",
    "gamma_limit",
    "corrector",
    "gamma_table",
    "eta",
    "quantile_price",
    "superhedge_rho",
    "grid_diagnostics",
    "QuadratureError",
]


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested accuracy."""


@dataclass(frozen=True)
class LimitContext:
    """Inputs shared by the limit functionals."""

    strike: float
    kappa: float
    rho: float
    sigma_fn: SigmaFn

    def __post_init__(self):
        if self.strike <= 0.0:
            raise ValueError("strike must be positive")
        if not 0.0 <= self.kappa < 1.0:
            raise ValueError("kappa must lie in [0, 1)")
        if self.rho <= 0.0:
            raise ValueError("rho must be positive")


def g_fn(a):
    """Mean of |Z + a| for standard normal Z: 2*phi(a) + a*(2*Phi(a) - 1)."""
    return 2.0 * norm_pdf(a) + a * (2.0 * norm_cdf(a) - 1.0)


def lambda_fn(a):
    """Variance of |Z + a|: 1 + a^2 - G(a)^2."""
    g = g_fn(a)
    return 1.0 + a * a - g * g


def q_fn(lam, x, strike):
    """Drift ratio ln(x/K)/(2*lambda) - 1/4 of the delta increments."""
    return np.log(x / strike) / (2.0 * lam) - 0.25


def p_fn(lam, x, y, context: LimitContext):
    """Normalized drift (rho/sigma(y)) * q(lambda, x)."""
    if np.any(np.asarray(lam) <= 0.0):
        raise ValueError("p requires lambda > 0")
    return context.rho / context.sigma_fn(y) * q_fn(lam, x, context.strike)


def _phi_tilde(lam, x, strike):
    v = np.log(x / strike) / np.sqrt(lam) + np.sqrt(lam) / 2.0
    return norm_pdf(v)


def gamma_limit(x: float, y: float, context: LimitContext) -> float:
    """Limit trading volume Gamma(x, y, rho).

    Gamma = x * integral_0^inf lambda^{-1/2} phi_tilde(lambda, x)
                 * E|sigma(y)/rho * Z + q(lambda, x)| dlambda,
    computed with E|cZ + q| = c*G(q/c) on a log-lambda grid: the
    substitution resolves both the lambda^{-1/2} endpoint and the
    O(ln^2(x/K))-scale spike that q produces near the money.  The upper
    truncation keeps the tail below 1e-10 of the result.
    """
    if x <= 0.0:
        raise ValueError("x must be positive")
    strike = context.strike
    c = float(context.sigma_fn(y)) / context.rho
    log_m = abs(math.log(x / strike))

    def integrand(w):
        lam = math.exp(w)
        return x * math.sqrt(lam) * _phi_tilde(lam, x, strike) * c * g_fn(
            q_fn(lam, x, strike) / c
        )

    upper_lam = max(400.0, 16.0 * log_m)
    # below lam_lo either phi_tilde underflows (off the money) or the
    # sqrt(lambda) weight does (at the money)
    lam_lo = max(log_m * log_m / 1490.0, 1e-36)
    w_lo, w_hi = math.log(lam_lo), math.log(upper_lam)
    points = None
    if log_m > 0.0:
        # |q| ~ log_m/(2 lambda) peaks the integrand near lambda ~ log_m^2
        points = [
            p
            for p in (2.0 * math.log(log_m) + s for s in (-2.0, 0.0, 2.0))
            if w_lo < p < w_hi
        ]
    val, abserr = quad(
        integrand, w_lo, w_hi, epsabs=1e-12, epsrel=1e-9, limit=300, points=points
    )
    if abserr > max(1e-9, 1e-6 * abs(val)):
        raise QuadratureError(
            f"gamma_limit quadrature error estimate {abserr:.3g} for value {val:.6g} "
            f"at x={x}, y={y}, rho={context.rho}"
        )

    # tail envelope: phi_tilde <= sqrt(K/x) * exp(-lam/8) / sqrt(2 pi) and
    # G(a) <= sqrt(2/pi) + |a| with |q| <= log_m/(2*U) + 1/4 for lam >= U
    g_cap = c * math.sqrt(2.0 / math.pi) + log_m / (2.0 * upper_lam) + 0.25
    tail = (
        x
        * math.sqrt(strike / x)
        / math.sqrt(2.0 * math.pi)
        * g_cap
        * 8.0
        * math.exp(-upper_lam / 8.0)
        / math.sqrt(upper_lam)
    )
    if val > 0.0 and tail > 1e-10 * val:
        raise QuadratureError(
            f"gamma_limit tail bound {tail:.3g} exceeds 1e-10 of value {val:.6g}"
        )
    return val


def corrector(x: float, y: float, context: LimitContext) -> float:
    """Almost-sure excess min(x, K) - kappa * Gamma(x, y, rho)."""
    base = min(x, context.strike)
    if context.kappa == 0.0:
        return base
    return base - context.kappa * gamma_limit(x, y, context)


def gamma_table(xs, y: float, context: LimitContext) -> np.ndarray:
    """Rows (x, gamma_limit, corrector) for a strike sweep (Figure-1 data)."""
    rows = np.empty((len(xs), 3))
    for i, x in enumerate(xs):
        g = gamma_limit(float(x), y, context)
        rows[i] = (x, g, min(x, context.strike) - context.kappa * g)
    return rows


def eta(y: float, context: LimitContext) -> float:
    """Lepinette residual factor 1 - kappa * sigma(y) * sqrt(8/pi) / rho."""
    return 1.0 - context.kappa * float(context.sigma_fn(y)) * SQRT_8_OVER_PI / context.rho


def quantile_price(terminal_samples, context: LimitContext, epsilon: float,
                   s0: float = 1.0) -> float:
    """Empirical quantile price delta_eps.

    delta_eps = inf{a > 0 : P((1-kappa) min(S1, K) > (1-a) s0) >= 1-eps},
    inverted exactly on the empirical step function: with W the sorted
    scaled covered payoffs and m = floor(eps*N), the infimum is 1 - W[m],
    clipped at 0 (the value 0 stands for the one-sided limit 0+).
    """
    s1 = np.asarray(terminal_samples, dtype=float)
    n = len(s1)
    if n < 1000:
        raise ValueError("quantile price needs at least 1e3 samples")
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if epsilon < 1.0 / n:
        raise ValueError(
            f"epsilon={epsilon} below the 1/{n} resolution of the sample"
        )
    w = np.sort((1.0 - context.kappa) * np.minimum(s1, context.strike) / s0)
    m = int(math.floor(epsilon * n))
    return max(0.0, 1.0 - float(w[m]))


def superhedge_rho(
    context: LimitContext,
    state_samples,
    rho_grid=None,
    rel_tol: float = 1e-3,
) -> float:
    """Smallest enlargement rho making the corrector >= 0 on all samples.

    Gamma is decreasing in rho, so feasibility is monotone along the grid;
    the first feasible grid point is bisection-refined to rel_tol.
    """
    samples = [(float(x), float(y)) for x, y in state_samples]
    if rho_grid is None:
        rho_grid = np.geomspace(0.01, 100.0, 64) * SQRT_8_OVER_PI
    rho_grid = np.sort(np.asarray(rho_grid, dtype=float))

    def worst(rho):
        ctx = replace(context, rho=float(rho))
        vals = [corrector(x, y, ctx) for x, y in samples]
        k = int(np.argmin(vals))
        return vals[k], samples[k]

    if context.kappa == 0.0:
        return float(rho_grid[0])  # corrector = min(x, K) >= 0 for any rho

    w_top, sample_top = worst(rho_grid[-1])
    if w_top < 0.0:
        raise ValueError(
            f"no grid rho super-hedges: corrector {w_top:.4g} < 0 at "
            f"(x, y) = {sample_top} for rho = {rho_grid[-1]:.4g}"
        )

    lo, hi = 0, len(rho_grid) - 1
    if worst(rho_grid[0])[0] >= 0.0:
        hi = 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if worst(rho_grid[mid])[0] >= 0.0:
            hi = mid
        else:
            lo = mid
    if hi == 0:
        return float(rho_grid[0])

    a, b = rho_grid[hi - 1], rho_grid[hi]
    while (b - a) > rel_tol * b:
        mid = 0.5 * (a + b)
        if worst(mid)[0] >= 0.0:
            b = mid
        else:
            a = mid
    return float(b)


@dataclass(frozen=True)
class GridDiagnostics:
    """Remaining-variance sequence along the revision grid."""

    n: int
    mu: float
    rho: float
    t: np.ndarray               # t_j, j = 0..n
    lam: np.ndarray             # lambda_j = lambda0 (1-t_j)^{(mu+1)/(2mu)}
    delta_lam: np.ndarray       # lambda_{j-1} - lambda_j, j = 1..n
    m1: int
    m2: int
    l_star: float               # ln^{-3} n
    l_star_upper: float         # ln^3 n


def grid_diagnostics(n: int, mu: float, rho: float) -> GridDiagnostics:
    """lambda_j sequence plus the truncation indices m1 <= m2.

    m1/m2 are meaningful only for very large n (ln^3 n can exceed lambda0
    at desk scale); they are clamped to [1, n] and flagged asymptotic-only.
    """
    if n < 16:
        raise ValueError("grid diagnostics need n >= 16")
    sched = VolSchedule("simple", n, mu, rho)
    j = np.arange(n + 1)
    t = 1.0 - (1.0 - j / n) ** mu
    lam = sched.lambda0 * (1.0 - t) ** ((mu + 1.0) / (2.0 * mu))
    delta_lam = lam[:-1] - lam[1:]

    ln = math.log(n)
    l_star = ln**-3
    l_star_upper = ln**3
    p = 2.0 / (mu + 1.0)
    m1 = n - math.floor(n * (l_star_upper / sched.lambda0) ** p)
    m2 = n - math.floor(n * (l_star / sched.lambda0) ** p)
    m1 = min(max(m1, 1), n)
    m2 = min(max(m2, 1), n)
    return GridDiagnostics(
        n=n, mu=mu, rho=rho, t=t, lam=lam, delta_lam=delta_lam,
        m1=m1, m2=m2, l_star=l_star, l_star_upper=l_star_upper,
    )
