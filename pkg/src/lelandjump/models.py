"""Jump-diffusion stochastic-volatility market simulator.

Price and volatility state follow

    dS_t = S_{t-} (b dt + sigma(y_t) dW1 + d(price jumps)),
    dy_t = alpha1(t, y) dt + alpha2(t, y) dW2 + d(volatility jumps),

with compound-Poisson jumps, relative jump rule S -> S*(1+xi), xi > -1,
and the martingale drift b = -sum theta * E xi over price channels.

Discretization: Euler-Maruyama for y, log-Euler for S with sigma frozen at
the left endpoint of each subinterval (exact conditionally, so S stays
positive); jump times are drawn exactly and inserted into the grid.

Every path owns a counter-based Philox substream keyed by
(master_seed, ensemble_tag, path_index, retry), so ensembles are
bit-identical for any worker count.
"""

from __future__ import annotations

import concurrent.futures
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .pricing import norm_cdf, norm_pdf

__all__ = [
    "Normal",
    "LogNormalFactor",
    "PointMass",
    "Uniform",
    "ExponentialVol",
    "SqrtVol",
    "ConstantVol",
    "OuSde",
    "CirSde",
    "JumpChannel",
    "ModelSpec",
    "SimulatedPath",
    "SimConfig",
    "InvalidPathError",
    "drift_compensator",
    "sample_jump_times",
    "simulate_path",
    "simulate_ensemble",
    "build_time_grid",
    "path_rng",
    "check_c1",
]

MAX_REJECTION_PROB = 1e-3


# ---------------------------------------------------------------------------
# Jump-size distributions (relative price jumps xi, constrained to xi > -1)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Normal:
    """xi ~ N(mean, sd^2), rejection-resampled onto xi > -1."""

    mean: float
    sd: float

    def rejection_prob(self) -> float:
        return norm_cdf((-1.0 - self.mean) / self.sd)

    def mean_xi(self) -> float:
        # mean of the resampled (truncated) law; the correction is
        # sd*phi(alpha)/(1-Phi(alpha)) with alpha = (-1-mean)/sd
        a = (-1.0 - self.mean) / self.sd
        return self.mean + self.sd * norm_pdf(a) / (1.0 - norm_cdf(a))

    def sample(self, rng, size):
        out = self.mean + self.sd * rng.standard_normal(size)
        n_rej = 0
        bad = out <= -1.0
        while np.any(bad):
            n_rej += int(bad.sum())
            out[bad] = self.mean + self.sd * rng.standard_normal(int(bad.sum()))
            bad = out <= -1.0
        return out, n_rej


@dataclass(frozen=True)
class LogNormalFactor:
    """1 + xi = e^Z with Z ~ N(mean, sd^2); xi > -1 automatically."""

    mean: float
    sd: float

    def rejection_prob(self) -> float:
        return 0.0

    def mean_xi(self) -> float:
        return math.exp(self.mean + 0.5 * self.sd**2) - 1.0

    def sample(self, rng, size):
        return np.expm1(self.mean + self.sd * rng.standard_normal(size)), 0


@dataclass(frozen=True)
class PointMass:
    """Deterministic jump size."""

    value: float

    def __post_init__(self):
        if self.value <= -1.0:
            raise ValueError("point-mass jump size must exceed -1")

    def rejection_prob(self) -> float:
        return 0.0

    def mean_xi(self) -> float:
        return self.value

    def sample(self, rng, size):
        return np.full(size, self.value), 0


@dataclass(frozen=True)
class Uniform:
    """xi ~ U(low, high) with low > -1."""

    low: float
    high: float

    def __post_init__(self):
        if self.low <= -1.0:
            raise ValueError("uniform jump support must lie in (-1, inf)")
        if self.high <= self.low:
            raise ValueError("need high > low")

    def rejection_prob(self) -> float:
        return 0.0

    def mean_xi(self) -> float:
        return 0.5 * (self.low + self.high)

    def sample(self, rng, size):
        return rng.uniform(self.low, self.high, size), 0


JumpSizeDist = Union[Normal, LogNormalFactor, PointMass, Uniform]


def check_c1(dist: JumpSizeDist) -> dict:
    """Jump-size integrability report: E xi^2 and E (1+xi)^{-1}.

    All supported laws have finite second moment.  The inverse moment is
    closed-form for the laws with support bounded away from -1; for the
    resampled Normal it is controlled through the rejection probability,
    which must stay below 1e-3 for a config to be accepted.
    """
    second = None
    inverse = None
    if isinstance(dist, Normal):
        second = dist.sd**2 + dist.mean**2  # untruncated; truncation only shrinks it
    elif isinstance(dist, LogNormalFactor):
        m, s = dist.mean, dist.sd
        second = math.exp(2 * m + 2 * s * s) - 2 * math.exp(m + 0.5 * s * s) + 1.0
        inverse = math.exp(-m + 0.5 * s * s)
    elif isinstance(dist, PointMass):
        second = dist.value**2
        inverse = 1.0 / (1.0 + dist.value)
    elif isinstance(dist, Uniform):
        a, b = dist.low, dist.high
        second = (a * a + a * b + b * b) / 3.0
        inverse = math.log((1.0 + b) / (1.0 + a)) / (b - a)
    rej = dist.rejection_prob()
    return {
        "second_moment": second,
        "inverse_moment": inverse,
        "rejection_prob": rej,
        "accepted": rej < MAX_REJECTION_PROB,
    }


# ---------------------------------------------------------------------------
# Volatility functions sigma(y) and volatility-state SDEs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExponentialVol:
    """sigma(y) = scale * e^y + sigma_min."""

    scale: float
    sigma_min: float

    def __post_init__(self):
        if self.sigma_min <= 0.0 or self.scale < 0.0:
            raise ValueError("need sigma_min > 0 and scale >= 0")

    def __call__(self, y):
        return self.scale * np.exp(y) + self.sigma_min


@dataclass(frozen=True)
class SqrtVol:
    """sigma(y) = sqrt(max(y, floor)), floor > 0."""

    floor: float

    def __post_init__(self):
        if self.floor <= 0.0:
            raise ValueError("floor must be positive so sigma >= sqrt(floor) > 0")

    def __call__(self, y):
        return np.sqrt(np.maximum(y, self.floor))


@dataclass(frozen=True)
class ConstantVol:
    """sigma(y) = value."""

    value: float

    def __post_init__(self):
        if self.value <= 0.0:
            raise ValueError("volatility must be positive")

    def __call__(self, y):
        if np.isscalar(y):
            return self.value
        return np.full(np.shape(y), self.value)


SigmaFn = Union[ExponentialVol, SqrtVol, ConstantVol]


@dataclass(frozen=True)
class OuSde:
    """dy = (a - y) dt + b dW2."""

    a: float
    b: float


@dataclass(frozen=True)
class CirSde:
    """dy = a (m - y) dt + b sqrt(max(y, 0)) dW2 (full truncation)."""

    a: float
    m: float
    b: float


VolSde = Union[OuSde, CirSde]


# ---------------------------------------------------------------------------
# Model specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JumpChannel:
    """One compound-Poisson jump source.

    applies_to selects what the drawn size hits: "price" multiplies S by
    (1+xi), "volatility" adds xi to y, "both" does both with one draw.
    """

    intensity: float
    size_dist: JumpSizeDist
    applies_to: str = "price"

    def __post_init__(self):
        if self.intensity < 0.0:
            raise ValueError("intensity must be >= 0")
        if self.applies_to not in ("price", "volatility", "both"):
            raise ValueError(f"unknown applies_to {self.applies_to!r}")
        if self.applies_to in ("price", "both"):
            rej = self.size_dist.rejection_prob()
            if not rej < MAX_REJECTION_PROB:
                raise ValueError(
                    f"price-jump size distribution crosses -1 with probability "
                    f"{rej:.3g} >= {MAX_REJECTION_PROB}; config rejected"
                )

    def hits_price(self) -> bool:
        return self.applies_to in ("price", "both")

    def hits_vol(self) -> bool:
        return self.applies_to in ("volatility", "both")


def drift_compensator(channel: JumpChannel) -> float:
    """Martingale drift contribution b = -theta * E xi of one price channel.

    Uses the mean of the distribution actually sampled (truncated for
    Normal), so compensation is exact for the simulated process.
    """
    if not channel.hits_price():
        raise ValueError("drift compensation applies to price jump channels")
    return -channel.intensity * channel.size_dist.mean_xi()


@dataclass(frozen=True)
class ModelSpec:
    """Full (S, y) dynamics description."""

    s0: float
    sigma_fn: SigmaFn
    vol_sde: Optional[VolSde]
    jump_channels: tuple = ()
    brownian_corr: float = 0.0
    y0_init: float = 0.0

    def __post_init__(self):
        if self.s0 <= 0.0:
            raise ValueError("s0 must be positive")
        if not -1.0 <= self.brownian_corr <= 1.0:
            raise ValueError("brownian_corr must lie in [-1, 1]")
        object.__setattr__(self, "jump_channels", tuple(self.jump_channels))

    @property
    def drift(self) -> float:
        """Compensator b = -sum theta * E xi over price channels; never user-set."""
        return sum(
            drift_compensator(ch) for ch in self.jump_channels if ch.hits_price()
        )

    def has_vol_diffusion(self) -> bool:
        return self.vol_sde is not None

    def is_constant_vol(self) -> bool:
        return isinstance(self.sigma_fn, ConstantVol)


# ---------------------------------------------------------------------------
# Paths
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JumpMark:
    index: int          # grid index of the jump time
    channel: int        # index into model.jump_channels
    applies_to: str
    size: float


@dataclass
class SimulatedPath:
    """Simulated (S, y) trajectory on a merged grid.

    The grid holds every revision date, substep, and drawn jump time.
    s_pre/y_pre are left limits: they differ from s_post/y_post exactly at
    jump marks, where s_post = s_pre * (1 + xi).
    """

    times: np.ndarray
    s_pre: np.ndarray
    s_post: np.ndarray
    y_pre: np.ndarray
    y_post: np.ndarray
    jump_marks: list
    resamples: int = 0

    @property
    def s1(self) -> float:
        return float(self.s_post[-1])

    @property
    def y1(self) -> float:
        return float(self.y_post[-1])


class InvalidPathError(RuntimeError):
    """Non-finite state reached during simulation (overflow)."""


def sample_jump_times(intensity: float, horizon: float, rng) -> np.ndarray:
    """Homogeneous-Poisson arrival times in (0, horizon), sorted."""
    if intensity < 0.0 or horizon <= 0.0:
        raise ValueError("need intensity >= 0 and horizon > 0")
    if intensity == 0.0:
        return np.empty(0)
    count = rng.poisson(intensity * horizon)
    return np.sort(rng.uniform(0.0, horizon, count))


def build_time_grid(revision_dates, substeps_per_interval: int, refine_last: int = 4):
    """Revision dates with uniform substeps per interval.

    The final revision interval is refined refine_last-fold because the
    enlarged variance rate blows up like (1-t)^{(1-mu)/(2mu)} there.
    """
    dates = np.asarray(revision_dates, dtype=float)
    if substeps_per_interval < 1:
        raise ValueError("substeps_per_interval must be >= 1")
    pieces = []
    n_int = len(dates) - 1
    for i in range(n_int):
        m = substeps_per_interval * (refine_last if i == n_int - 1 else 1)
        pieces.append(np.linspace(dates[i], dates[i + 1], m, endpoint=False))
    pieces.append(dates[-1:])
    return np.concatenate(pieces)


def _advance_y(model: ModelSpec, times, dw2, y_jump_sizes):
    """Euler-Maruyama for y on the merged grid, jumps applied additively.

    Returns (y_pre, y_post) with y_post = y_pre + jump and the Euler step
    out of index k starting from y_post[k].  OU is affine in y, so each
    inter-jump segment is solved with a vectorized cumprod recursion; CIR
    falls back to a sequential loop with full truncation inside the sqrt.
    """
    m = len(times)
    sde = model.vol_sde
    if sde is None:
        y_post = model.y0_init + np.cumsum(y_jump_sizes)
        return y_post - y_jump_sizes, y_post

    dts = np.diff(times)
    y_pre = np.empty(m)
    y_pre[0] = model.y0_init
    cur = model.y0_init + y_jump_sizes[0]  # post value at index 0

    if isinstance(sde, OuSde):
        jump_idx = np.nonzero(y_jump_sizes)[0]
        bounds = np.unique(np.concatenate((jump_idx, [0, m - 1])))
        for pos, nxt in zip(bounds[:-1], bounds[1:]):
            # w_i = w_{i-1}(1 - dt_i) + (a dt_i + b dW_i), solved by cumprod
            d = dts[pos:nxt]
            u = sde.a * d + sde.b * dw2[pos:nxt]
            p = np.cumprod(1.0 - d)
            y_pre[pos + 1 : nxt + 1] = p * (cur + np.cumsum(u / p))
            cur = y_pre[nxt] + y_jump_sizes[nxt]
    elif isinstance(sde, CirSde):
        y = cur
        for k in range(1, m):
            yp = max(y, 0.0)
            y = y + sde.a * (sde.m - y) * dts[k - 1] + sde.b * math.sqrt(yp) * dw2[k - 1]
            y_pre[k] = y
            y = y + y_jump_sizes[k]
    else:
        raise TypeError(f"unsupported vol_sde {type(sde).__name__}")

    return y_pre, y_pre + y_jump_sizes


def simulate_path(
    model: ModelSpec,
    revision_dates,
    substeps_per_interval: int,
    rng,
    refine_last: int = 4,
) -> SimulatedPath:
    """Simulate one path on revision dates + substeps + drawn jump times."""
    base_grid = build_time_grid(revision_dates, substeps_per_interval, refine_last)

    # draw jump times and sizes channel by channel (fixed order)
    channel_times = []
    channel_sizes = []
    for ch in model.jump_channels:
        times = sample_jump_times(ch.intensity, 1.0, rng)
        sizes, _ = ch.size_dist.sample(rng, len(times))
        channel_times.append(times)
        channel_sizes.append(sizes)

    all_jump_times = (
        np.concatenate(channel_times) if channel_times else np.empty(0)
    )
    grid = np.unique(np.concatenate((base_grid, all_jump_times)))
    m = len(grid)

    # per-grid-index jump effects
    price_log_left = None
    price_factor = np.ones(m)
    y_jump_sizes = np.zeros(m)
    jump_marks = []
    for c, (times, sizes) in enumerate(zip(channel_times, channel_sizes)):
        ch = model.jump_channels[c]
        idx = np.searchsorted(grid, times)
        for i, z in zip(idx, sizes):
            jump_marks.append(JumpMark(int(i), c, ch.applies_to, float(z)))
            if ch.hits_price():
                price_factor[i] *= 1.0 + z
            if ch.hits_vol():
                y_jump_sizes[i] += z
    jump_marks.sort(key=lambda jm: jm.index)

    dts = np.diff(grid)
    sdt = np.sqrt(dts)
    dw1 = sdt * rng.standard_normal(m - 1)
    if model.has_vol_diffusion():
        dw2 = sdt * rng.standard_normal(m - 1)
        rho = model.brownian_corr
        if rho != 0.0:
            dw2 = rho * dw1 + math.sqrt(1.0 - rho * rho) * dw2
    else:
        dw2 = np.zeros(m - 1)

    s_pre, s_post, y_pre, y_post = _advance(
        model, grid, dw1, dw2, price_factor, y_jump_sizes
    )
    return SimulatedPath(
        times=grid,
        s_pre=s_pre,
        s_post=s_post,
        y_pre=y_pre,
        y_post=y_post,
        jump_marks=jump_marks,
    )


def _advance(model: ModelSpec, grid, dw1, dw2, price_factor, y_jump_sizes):
    """Advance (S, y) over the merged grid given Brownian increments."""
    dts = np.diff(grid)
    y_pre, y_post = _advance_y(model, grid, dw2, y_jump_sizes)

    sig = np.asarray(model.sigma_fn(y_post[:-1]), dtype=float)
    dlog = (model.drift - 0.5 * sig * sig) * dts + sig * dw1

    log_diff = np.concatenate(([0.0], np.cumsum(dlog)))
    cum_prev = np.concatenate(([1.0], np.cumprod(price_factor)[:-1]))
    s_pre = model.s0 * np.exp(log_diff) * cum_prev
    s_post = s_pre * price_factor

    if not (np.all(np.isfinite(s_post)) and np.all(np.isfinite(y_post))):
        raise InvalidPathError("non-finite state in simulated path")
    return s_pre, s_post, y_pre, y_post


# ---------------------------------------------------------------------------
# Ensembles with counter-based substreams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    n_paths: int
    master_seed: int
    workers: int = 1
    substeps_per_interval: int = 1
    refine_last: int = 4
    ensemble_tag: int = 0
    max_resamples: int = 8

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


def path_rng(master_seed: int, ensemble_tag: int, path_index: int, retry: int = 0):
    """Philox generator keyed by (seed, tag, path, retry); scheduling-free."""
    if not (0 <= path_index < 2**32 and 0 <= ensemble_tag < 2**24 and retry < 2**8):
        raise ValueError("stream key component out of range")
    key = np.array(
        [master_seed & 0xFFFFFFFFFFFFFFFF,
         (ensemble_tag << 40) | (path_index << 8) | retry],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


def _one_path(model, revision_dates, config: SimConfig, k: int):
    for retry in range(config.max_resamples):
        rng = path_rng(config.master_seed, config.ensemble_tag, k, retry)
        try:
            path = simulate_path(
                model,
                revision_dates,
                config.substeps_per_interval,
                rng,
                config.refine_last,
            )
            path.resamples = retry
            return path
        except InvalidPathError:
            continue
    raise InvalidPathError(
        f"path {k} stayed non-finite after {config.max_resamples} substreams"
    )


def _chunk_worker(args):
    model, revision_dates, config, indices, fold = args
    out = []
    for k in indices:
        path = _one_path(model, revision_dates, config, k)
        out.append(fold(path) if fold is not None else path)
    return out


def simulate_ensemble(
    model: ModelSpec,
    revision_dates,
    config: SimConfig,
    fold: Optional[Callable] = None,
) -> list:
    """Simulate config.n_paths paths; returns paths or fold(path) values.

    Results are ordered by path index and bit-identical for any worker
    count, because path k depends only on (master_seed, ensemble_tag, k).
    """
    revision_dates = np.asarray(revision_dates, dtype=float)
    indices = list(range(config.n_paths))
    if config.workers == 1:
        return _chunk_worker((model, revision_dates, config, indices, fold))

    chunks = [
        indices[i :: config.workers] for i in range(config.workers)
    ]
    results: dict[int, object] = {}
    with concurrent.futures.ProcessPoolExecutor(max_workers=config.workers) as ex:
        futures = {}
        for chunk in chunks:
            if not chunk:
                continue
            fut = ex.submit(
                _chunk_worker, (model, revision_dates, config, chunk, fold)
            )
            futures[fut] = chunk
        for fut in concurrent.futures.as_completed(futures):
            for k, value in zip(futures[fut], fut.result()):
                results[k] = value
    return [results[k] for k in indices]
