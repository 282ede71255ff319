"""Loan-mix choice of a single signal group, given the pool mean ``abar``.

A group with signal ``y`` picks the credit-market share ``theta`` in [0, 1]
maximising expected utility.  Consumption is affine in ``theta``::

    c(theta) = c0 + theta * d,   c0 = (A + a) w - R a / abar,   d = R (a / abar - 1)

with realised ability ``a = y + eps``, so expected utility is concave in
``theta`` and its derivative has at most one sign change.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

from loanmix import kernels
from loanmix.economy import CRRA, EconomyParams, Quadratic, noise_nodes
from loanmix.errors import AssumptionViolation, ConsistencyError, ValidationError

FOC_RTOL = 1e-12
FOC_MAX_ITER = 200
ROOT_SCAN_INTERVALS = 512
SET_TOL = 1e-9


class Share(NamedTuple):
    theta: float
    raw: float | None


@dataclass(frozen=True)
class ChoiceContext:
    """Everything a signal group takes as given: pool mean, wage, scenario."""

    abar: float
    omega: float
    params: EconomyParams
    rtol: float = FOC_RTOL
    max_iter: int = FOC_MAX_ITER

    def __post_init__(self):
        if not (self.abar > 0 and math.isfinite(self.abar)):
            raise ValidationError(f"pool mean abar must be positive, got {self.abar!r}")
        if not self.omega > 0:
            raise ValidationError(f"wage must be positive, got {self.omega!r}")

    @cached_property
    def _noise(self):
        eps, w = noise_nodes(self.params.noise)
        return np.ascontiguousarray(eps), np.ascontiguousarray(w)

    @property
    def eps(self) -> np.ndarray:
        return self._noise[0]

    @property
    def noise_weights(self) -> np.ndarray:
        return self._noise[1]

    @property
    def utility(self):
        return self.params.utility

    def affine(self, y: float) -> tuple[np.ndarray, np.ndarray]:
        """Intercept and slope of consumption in ``theta`` at each noise node."""
        p = self.params
        a = y + self.eps
        c0 = (p.basic_capital + a) * self.omega - p.interest_rate * a / self.abar
        d = p.interest_rate * (a / self.abar - 1.0)
        return np.ascontiguousarray(c0), np.ascontiguousarray(d)

    # quadratic-utility constants
    @property
    def k(self) -> float:
        u = self._quadratic()
        p = self.params
        return u.alpha / u.beta - ((p.basic_capital + self.abar) * self.omega - p.interest_rate)

    @property
    def a_prime(self) -> float:
        return self.k * self.abar / self.params.interest_rate

    @property
    def c_const(self) -> float:
        R = self.params.interest_rate
        return (self.abar * self.omega - R) / R

    def _quadratic(self) -> Quadratic:
        if not isinstance(self.params.utility, Quadratic):
            raise ValidationError("this quantity is only defined for quadratic utility")
        return self.params.utility


def _kargs(ctx: ChoiceContext):
    return ctx.utility.kernel_args()


def _check_segment(ctx: ChoiceContext, c0, d):
    # CRRA must be finite over the whole search segment; consumption is affine in theta
    if isinstance(ctx.utility, CRRA):
        ctx.utility.check_domain(np.concatenate([c0, c0 + d]))


def expected_utility(y: float, theta: float, ctx: ChoiceContext) -> float:
    if not 0.0 <= theta <= 1.0:
        raise ValidationError(f"CML share must lie in [0, 1], got {theta!r}")
    c0, d = ctx.affine(y)
    ctx.utility.check_domain(c0 + theta * d)
    return kernels.backend.eu_theta(*_kargs(ctx), c0, d, ctx.noise_weights, float(theta))


def foc_derivative(y: float, theta: float, ctx: ChoiceContext) -> float:
    """Derivative of expected utility with respect to the CML share.

    Equals ``(R/abar) * ((y - abar) E[u'] + cov(a, u'))`` with ``a`` the
    realised ability.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValidationError(f"CML share must lie in [0, 1], got {theta!r}")
    c0, d = ctx.affine(y)
    ctx.utility.check_domain(c0 + theta * d)
    return kernels.backend.foc_theta(*_kargs(ctx), c0, d, ctx.noise_weights, float(theta))


def optimal_share(y: float, ctx: ChoiceContext) -> Share:
    """Expected-utility maximising CML share, by bisection on the FOC.

    For quadratic utility ``raw`` carries the unclamped closed-form share; for
    other families it is ``None``.
    """
    c0, d = ctx.affine(y)
    _check_segment(ctx, c0, d)
    theta, status = kernels.backend.optimal_share(
        *_kargs(ctx), c0, d, ctx.noise_weights, ctx.rtol, ctx.max_iter)
    if status < 0:
        raise ConsistencyError(f"FOC sign anomaly at y={y!r} (non-finite derivative)")
    ctx.utility.check_domain(c0 + theta * d)
    raw = None
    if isinstance(ctx.utility, Quadratic):
        raw = _raw_quadratic(np.array([y]), ctx)[0]
    return Share(float(theta), raw)


def _raw_quadratic(y: np.ndarray, ctx: ChoiceContext) -> np.ndarray:
    var = ctx.params.noise.variance
    x = np.asarray(y, dtype=float) - ctx.abar
    denom = ctx.params.interest_rate * (x * x + var)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(denom > 0, ctx.k * ctx.abar * x / np.where(denom > 0, denom, 1.0), 0.0)
    return ratio - ctx.c_const


def optimal_share_quadratic(y: float, ctx: ChoiceContext) -> Share:
    """Closed-form CML share under quadratic utility.

    ``raw = k abar (y - abar) / (R ((y - abar)^2 + sigma^2)) - (abar w - R) / R``
    and ``theta`` is ``raw`` clamped to [0, 1].  With zero noise at ``y == abar``
    every share gives the same consumption and ``raw`` reduces to the constant
    term.
    """
    ctx._quadratic()
    if y > ctx.abar and not ctx.k > 0:
        raise AssumptionViolation(
            f"k = {ctx.k!r} <= 0 with y={y!r} > abar={ctx.abar!r}: expected "
            "consumption reaches the bliss point (needs k > 0 whenever y > abar)")
    raw = float(_raw_quadratic(np.array([y]), ctx)[0])
    return Share(min(max(raw, 0.0), 1.0), raw)


def binary_choice(y: float, ctx: ChoiceContext) -> int:
    """Either-or funding: 1 (CML-only) only if strictly better than ICL-only."""
    return 1 if expected_utility(y, 1.0, ctx) > expected_utility(y, 0.0, ctx) else 0


# --------------------------------------------------------------------------
# Cutoff signals
# --------------------------------------------------------------------------


def _scan_roots(g, lo: float, hi: float, intervals: int = ROOT_SCAN_INTERVALS) -> list[float]:
    """All sign changes of ``g`` on a uniform scan of [lo, hi], refined by bisection."""
    if hi <= lo:
        return []
    xs = np.linspace(lo, hi, intervals + 1)
    gs = np.array([g(x) for x in xs])
    roots = []
    for i in range(intervals):
        a, b, ga, gb = xs[i], xs[i + 1], gs[i], gs[i + 1]
        if not (np.isfinite(ga) and np.isfinite(gb)):
            continue
        if ga == 0.0:
            if not roots or roots[-1] != a:
                roots.append(float(a))
            continue
        if i == intervals - 1 and gb == 0.0:
            roots.append(float(b))
            continue
        if ga * gb < 0:
            while True:
                m = 0.5 * (a + b)
                if m <= a or m >= b:
                    break
                gm = g(m)
                if gm == 0.0:
                    a = b = m
                    break
                if (gm < 0) == (ga < 0):
                    a, ga = m, gm
                else:
                    b = m
            roots.append(float(0.5 * (a + b)))
    return roots


def indifference_gap(y: float, ctx: ChoiceContext) -> float:
    """``E u(ICL-only) - E u(CML-only)`` for signal ``y`` (no bliss check)."""
    c0, d = ctx.affine(y)
    kb, args, w = kernels.backend, _kargs(ctx), ctx.noise_weights
    return kb.eu_theta(*args, c0, d, w, 0.0) - kb.eu_theta(*args, c0, d, w, 1.0)


def indifference_signal(ctx: ChoiceContext) -> list[float]:
    """Signals indifferent between ICL-only and CML-only inside the signal bounds."""
    grid = ctx.params.signal_grid
    return _scan_roots(lambda y: indifference_gap(y, ctx), grid.lower, grid.upper)


def portfolio_boundaries(ctx: ChoiceContext) -> tuple[list[float], list[float]]:
    """Numerical portfolio cutoffs for any utility family.

    ``y'`` solves ``dEU/dtheta(y, 0) = 0`` (portfolio versus ICL-only) and
    ``y''`` solves ``dEU/dtheta(y, 1) = 0`` (portfolio versus CML-only).
    """
    grid = ctx.params.signal_grid
    kb, args, w = kernels.backend, _kargs(ctx), ctx.noise_weights

    def at(theta):
        def g(y):
            c0, d = ctx.affine(y)
            return kb.foc_theta(*args, c0, d, w, theta)
        return g

    return (_scan_roots(at(0.0), grid.lower, grid.upper),
            _scan_roots(at(1.0), grid.lower, grid.upper))


@dataclass(frozen=True)
class CutoffReport:
    y_hat: tuple[float, ...] = ()
    y_prime: tuple[float, ...] = ()
    y_dprime: tuple[float, ...] = ()
    peak: float | None = None
    notes: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "y_hat": list(self.y_hat),
            "y_prime": list(self.y_prime),
            "y_dprime": list(self.y_dprime),
            "peak": self.peak,
            "notes": list(self.notes),
        }


def _quadratic_roots(center: float, half_gap: float, sigma2: float):
    disc = half_gap * half_gap - sigma2
    if disc < 0:
        return ()
    r = math.sqrt(disc)
    return (center + half_gap - r, center + half_gap + r)


def cutoff_signals_quadratic(ctx: ChoiceContext) -> CutoffReport:
    """Closed-form cutoffs of the quadratic-utility share.

    ``y'`` roots solve ``raw == 0`` and ``y''`` roots solve ``raw == 1``:
    ``y - abar = A'/(2C) +- sqrt((A'/(2C))^2 - sigma^2)`` with ``C`` replaced
    by ``C + 1`` for ``y''``.  Missing roots are reported in ``notes``.
    """
    ctx._quadratic()
    notes = []
    a_p, c, s2 = ctx.a_prime, ctx.c_const, ctx.params.noise.variance
    if not c > 0:
        notes.append("abar*omega <= R: investment unprofitable, portfolio cutoffs undefined")
        y1 = y2 = ()
    else:
        y1 = _quadratic_roots(ctx.abar, a_p / (2 * c), s2)
        if not y1:
            notes.append("no portfolio region: (A'/2C)^2 < sigma^2")
        y2 = _quadratic_roots(ctx.abar, a_p / (2 * (c + 1)), s2)
        if not y2:
            notes.append("no CML-only region: (A'/(2(C+1)))^2 < sigma^2")
    peak = ctx.abar + math.sqrt(s2) if ctx.k > 0 else None
    return CutoffReport(tuple(indifference_signal(ctx)), tuple(y1), tuple(y2), peak, tuple(notes))


def cutoff_report(ctx: ChoiceContext) -> CutoffReport:
    if isinstance(ctx.utility, Quadratic):
        return cutoff_signals_quadratic(ctx)
    yp, ypp = portfolio_boundaries(ctx)
    return CutoffReport(tuple(indifference_signal(ctx)), tuple(yp), tuple(ypp), None, ())


# --------------------------------------------------------------------------
# Whole-grid profiles
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ThetaProfile:
    """CML share per grid node; ``raw`` holds unclamped quadratic shares."""

    theta: np.ndarray
    raw: np.ndarray | None = field(default=None)

    def __len__(self):
        return len(self.theta)


class SetPartition(NamedTuple):
    icl_only: np.ndarray
    portfolio: np.ndarray
    cml_only: np.ndarray

    def counts(self) -> dict:
        return {"icl_only": int(self.icl_only.size), "portfolio": int(self.portfolio.size),
                "cml_only": int(self.cml_only.size)}

    def labels(self, n: int) -> list[str]:
        out = [""] * n
        for name, idx in zip(self._fields, self):
            for i in idx:
                out[int(i)] = name
        return out


def classify_sets(profile: ThetaProfile | np.ndarray, grid=None, tol: float = SET_TOL) -> SetPartition:
    """Split nodes into ICL-only, portfolio and CML-only by their share."""
    theta = np.asarray(profile.theta if isinstance(profile, ThetaProfile) else profile, dtype=float)
    if grid is not None and len(grid) != theta.size:
        raise ValidationError("profile and grid lengths differ")
    icl = theta <= tol
    cml = theta >= 1.0 - tol
    mid = ~(icl | cml)
    return SetPartition(np.flatnonzero(icl), np.flatnonzero(mid), np.flatnonzero(cml))


def share_profile(ctx: ChoiceContext, binary: bool = False) -> ThetaProfile:
    """Optimal (or either-or, with ``binary``) shares over the whole signal grid."""
    p = ctx.params
    y = np.ascontiguousarray(p.signal_grid.y)
    u = ctx.utility
    if isinstance(u, CRRA):
        a = y[:, None] + ctx.eps[None, :]
        earned = (p.basic_capital + a) * ctx.omega
        # consumption is affine in theta, so both endpoints bound it
        c0 = earned - p.interest_rate * a / ctx.abar
        u.check_domain(np.concatenate([c0.ravel(), (earned - p.interest_rate).ravel()]))
    theta, status = kernels.backend.share_profile(
        *_kargs(ctx), y, ctx.eps, ctx.noise_weights, float(p.basic_capital),
        float(ctx.omega), float(p.interest_rate), float(ctx.abar), bool(binary),
        ctx.rtol, ctx.max_iter)
    if np.any(status < 0):
        bad = int(np.flatnonzero(status < 0)[0])
        raise ConsistencyError(f"FOC sign anomaly at y={y[bad]!r} (non-finite derivative)")
    theta = np.asarray(theta, dtype=float)
    if isinstance(u, Quadratic) and u.enforce_bliss:
        c = held_consumption(ctx, theta)
        u.check_domain(c)
    raw = _raw_quadratic(y, ctx) if isinstance(u, Quadratic) else None
    return ThetaProfile(theta, raw)


def held_consumption(ctx: ChoiceContext, theta: np.ndarray) -> np.ndarray:
    """Realised consumption, shape (nodes, noise), at the given shares."""
    p = ctx.params
    a = p.signal_grid.y[:, None] + ctx.eps[None, :]
    t = np.asarray(theta, dtype=float)[:, None]
    R = p.interest_rate
    return (p.basic_capital + a) * ctx.omega - (t * R + (1.0 - t) * R * a / ctx.abar)
