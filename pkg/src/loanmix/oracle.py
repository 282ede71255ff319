"""Brute-force cross-checks: grid search over shares and Monte-Carlo sampling.

Draws come from a counter-based SplitMix64 stream keyed by ``(seed, index)``,
so any sample can be regenerated on its own and results do not depend on how
the work is chunked.  Sums use ``math.fsum``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from loanmix import kernels
from loanmix.choice import ChoiceContext, optimal_share, optimal_share_quadratic
from loanmix.economy import CRRA, GAUSS_HERMITE, Quadratic
from loanmix.errors import ValidationError

RNG_NAMES = ("splitmix64",)
DEFAULT_SEED = 20_240_601
CHUNK = 1 << 18

# each sample consumes up to three uniforms: node pick, noise, Box-Muller partner
_STRIDE = 4


@dataclass(frozen=True)
class OracleConfig:
    grid_points: int = 10_001
    samples: int = 1_000_000
    seed: int = DEFAULT_SEED
    rng: str = "splitmix64"

    def __post_init__(self):
        if self.grid_points < 3:
            raise ValidationError("grid_points must be at least 3")
        if self.samples < 1000:
            raise ValidationError("samples must be at least 1000")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        if self.rng not in RNG_NAMES:
            raise ValidationError(f"unknown rng {self.rng!r}; expected one of {RNG_NAMES}")


def uniforms(seed: int, start: int, n: int, offset: int) -> np.ndarray:
    """Uniform doubles in [0, 1) for samples ``start .. start+n-1`` on one stream."""
    return kernels.backend.uniforms(seed, start, n, _STRIDE, offset)


def _noise_draws(noise, seed, start, n):
    if noise.sigma == 0.0:
        return np.zeros(n)
    u1 = uniforms(seed, start, n, 1)
    if noise.kind == GAUSS_HERMITE:
        u2 = uniforms(seed, start, n, 2)
        # 1 - u1 lies in (0, 1] so the log is finite
        return noise.sigma * np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * math.pi * u2)
    return np.where(u1 < 0.5, -noise.sigma, noise.sigma)


def _chunks(total):
    start = 0
    while start < total:
        n = min(CHUNK, total - start)
        yield start, n
        start += n


def _mean_stderr(parts: list[np.ndarray]) -> tuple[float, float]:
    x = np.concatenate(parts)
    n = x.size
    pivot = float(x[0])
    dev = x - pivot
    mean = pivot + math.fsum(dev) / n
    resid = x - mean
    var = math.fsum(resid * resid) / (n - 1) if n > 1 else 0.0
    return mean, math.sqrt(var / n)


def grid_search_share(y: float, ctx: ChoiceContext, cfg: OracleConfig = OracleConfig()) -> float:
    """Share maximising expected utility over a uniform grid on [0, 1]; ties go to the smaller."""
    c0, d = ctx.affine(y)
    return kernels.backend.grid_argmax(*ctx.utility.kernel_args(), c0, d, ctx.noise_weights,
                                       cfg.grid_points)


def monte_carlo_break_even(eq, cfg: OracleConfig = OracleConfig()) -> tuple[float, float]:
    """Sampled mean repayment per unit loan and its standard error."""
    params = eq.params
    grid = params.signal_grid
    R = params.interest_rate
    cum = np.cumsum(grid.w)
    cum[-1] = 1.0
    theta = eq.theta
    parts = []
    for start, n in _chunks(cfg.samples):
        idx = np.searchsorted(cum, uniforms(cfg.seed, start, n, 0), side="right")
        idx = np.minimum(idx, len(grid) - 1)
        a = grid.y[idx] + _noise_draws(params.noise, cfg.seed, start, n)
        t = theta[idx]
        parts.append(t * R + (1.0 - t) * R * a / eq.abar)
    return _mean_stderr(parts)


def monte_carlo_expected_utility(y: float, theta: float, ctx: ChoiceContext,
                                 cfg: OracleConfig = OracleConfig()):
    """Sampled expected utility at share ``theta``.

    Returns ``(mean, stderr, violations)``.  Samples outside the utility
    domain are counted in ``violations`` and left out of the mean.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValidationError(f"CML share must lie in [0, 1], got {theta!r}")
    p = ctx.params
    u = ctx.utility
    R = p.interest_rate
    parts, bad = [], 0
    for start, n in _chunks(cfg.samples):
        a = y + _noise_draws(p.noise, cfg.seed, start, n)
        c = (p.basic_capital + a) * ctx.omega - theta * R - (1.0 - theta) * R * a / ctx.abar
        if isinstance(u, CRRA):
            ok = c > 0
        elif isinstance(u, Quadratic) and u.enforce_bliss:
            ok = c < u.bliss
        else:
            ok = np.ones(n, dtype=bool)
        bad += int(n - np.count_nonzero(ok))
        if ok.any():
            parts.append(u.u(c[ok]))
    if not parts:
        return float("nan"), float("nan"), bad
    mean, err = _mean_stderr(parts)
    return mean, err, bad


@dataclass(frozen=True)
class TriangleReport:
    """Largest node-wise disagreement between the three share solvers."""

    closed_vs_foc: float | None
    foc_vs_grid: float
    worst_node_closed: int | None
    worst_node_grid: int
    grid_spacing: float


def oracle_triangle(ctx: ChoiceContext, cfg: OracleConfig = OracleConfig()) -> TriangleReport:
    ys = ctx.params.signal_grid.values
    foc = np.array([optimal_share(y, ctx).theta for y in ys])
    grid = np.array([grid_search_share(y, ctx, cfg) for y in ys])
    g_gap = np.abs(foc - grid)
    closed_gap = worst_closed = None
    if isinstance(ctx.utility, Quadratic):
        closed = np.array([optimal_share_quadratic(y, ctx).theta for y in ys])
        c_gap = np.abs(closed - foc)
        worst_closed = int(np.argmax(c_gap))
        closed_gap = float(c_gap[worst_closed])
    worst = int(np.argmax(g_gap))
    return TriangleReport(closed_gap, float(g_gap[worst]), worst_closed, worst,
                          1.0 / (cfg.grid_points - 1))
