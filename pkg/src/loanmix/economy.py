"""Scenario data: signal grid, ability noise, utility families, production side.

Every quantity in the model economy is owned by one of the immutable value
types below.  Signals ``y`` are also the expected ability of their group, so
a student in group ``y`` realises ability ``y + eps`` with ``eps`` drawn from
the :class:`NoiseSpec`.  Education costs one unit, financed by a mix of
credit-market loans (fixed gross repayment ``R``) and income-contingent loans
(repayment ``R * a / abar``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import ClassVar, Union

import numpy as np

from loanmix.errors import DomainError, SaturationError, ValidationError

EDUCATION_COST = 1.0

FAMILY_CRRA = 0
FAMILY_CARA = 1
FAMILY_QUADRATIC = 2


# --------------------------------------------------------------------------
# Signal grid
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SignalGrid:
    """Discrete signal groups with probability weights.

    ``values`` must be strictly increasing and lie inside ``[lower, upper]``.
    ``uniform_nodes`` is bookkeeping only: it records that the grid was built
    by :meth:`uniform` so it can be written back compactly.
    """

    values: tuple[float, ...]
    weights: tuple[float, ...]
    lower: float
    upper: float
    uniform_nodes: int | None = None

    def __post_init__(self):
        y = np.asarray(self.values, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if y.ndim != 1 or y.size == 0:
            raise ValidationError("signal grid needs at least one node")
        if w.shape != y.shape:
            raise ValidationError(
                f"signal grid has {y.size} values but {w.size} weights")
        if not np.all(np.isfinite(y)) or not np.all(np.isfinite(w)):
            raise ValidationError("signal grid values and weights must be finite")
        if np.any(np.diff(y) <= 0):
            raise ValidationError("signal values must be strictly increasing")
        if np.any(w <= 0):
            raise ValidationError("signal weights must be strictly positive")
        if abs(math.fsum(self.weights) - 1.0) > 1e-12:
            raise ValidationError(
                f"signal weights sum to {math.fsum(self.weights)!r}, expected 1")
        if not self.lower <= y[0] or not y[-1] <= self.upper:
            raise ValidationError(
                f"signal values must lie in [{self.lower}, {self.upper}]")

    @classmethod
    def uniform(cls, lower: float, upper: float, nodes: int = 41) -> "SignalGrid":
        """Equally weighted nodes spanning ``[lower, upper]`` inclusive."""
        if nodes < 1:
            raise ValidationError("signal grid needs at least one node")
        if nodes == 1:
            if lower != upper:
                raise ValidationError("a one-node uniform grid needs lower == upper")
            return cls((float(lower),), (1.0,), float(lower), float(upper), 1)
        if not lower < upper:
            raise ValidationError("uniform grid needs lower < upper")
        y = np.linspace(lower, upper, nodes)
        w = np.full(nodes, 1.0 / nodes)
        # absorb rounding so the weights sum to one under fsum
        w[-1] = 1.0 - math.fsum(w[:-1])
        return cls(tuple(map(float, y)), tuple(map(float, w)),
                   float(lower), float(upper), nodes)

    @classmethod
    def explicit(cls, values, weights=None, lower=None, upper=None) -> "SignalGrid":
        values = tuple(float(v) for v in values)
        if weights is None:
            weights = [1.0 / len(values)] * len(values)
        weights = tuple(float(v) for v in weights)
        lower = values[0] if lower is None else float(lower)
        upper = values[-1] if upper is None else float(upper)
        return cls(values, weights, lower, upper)

    @property
    def y(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    @property
    def w(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    def __len__(self):
        return len(self.values)

    def mean(self) -> float:
        return math.fsum(w * y for w, y in zip(self.weights, self.values))


# --------------------------------------------------------------------------
# Ability noise
# --------------------------------------------------------------------------

TWO_POINT = "two_point"
GAUSS_HERMITE = "gauss_hermite"


@dataclass(frozen=True)
class NoiseSpec:
    """Zero-mean ability noise with standard deviation ``sigma``.

    ``two_point`` puts mass 1/2 on each of ``-sigma`` and ``+sigma`` which makes
    every expectation an exact two-term sum.  ``gauss_hermite`` discretises a
    Gaussian with ``gh_nodes`` Gauss-Hermite points.
    """

    kind: str = TWO_POINT
    sigma: float = 0.0
    gh_nodes: int = 7

    def __post_init__(self):
        if self.kind not in (TWO_POINT, GAUSS_HERMITE):
            raise ValidationError(f"unknown noise kind {self.kind!r}")
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise ValidationError(f"noise sigma must be >= 0, got {self.sigma!r}")
        if self.kind == GAUSS_HERMITE and self.gh_nodes < 2:
            raise ValidationError("Gauss-Hermite noise needs at least 2 nodes")

    @property
    def variance(self) -> float:
        return self.sigma * self.sigma

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        return noise_nodes(self)


def noise_nodes(noise: NoiseSpec) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(eps, weights)`` discretising the noise law.

    The weights sum to one, the weighted mean is zero and the weighted second
    moment is ``sigma**2``.
    """
    if noise.sigma == 0.0:
        return np.zeros(1), np.ones(1)
    if noise.kind == TWO_POINT:
        s = noise.sigma
        return np.array([-s, s]), np.array([0.5, 0.5])
    x, w = np.polynomial.hermite_e.hermegauss(noise.gh_nodes)
    w = w / math.fsum(w)
    # hermegauss nodes are symmetric up to rounding; enforce exact symmetry
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    return noise.sigma * x, w


# --------------------------------------------------------------------------
# Utility families
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class UtilitySpec:
    """Common interface of the three utility families.

    ``scale`` multiplies the utility by a positive constant; optimal choices
    must not depend on it.
    """

    family: ClassVar[str] = ""
    code: ClassVar[int] = -1

    def kernel_args(self) -> tuple[int, float, float, float]:
        raise NotImplementedError

    def check_domain(self, c) -> None:
        pass

    def u(self, c):
        raise NotImplementedError

    def du(self, c):
        raise NotImplementedError

    def ara(self, c):
        raise NotImplementedError


@dataclass(frozen=True)
class CRRA(UtilitySpec):
    gamma: float = 2.0
    scale: float = 1.0

    family: ClassVar[str] = "crra"
    code: ClassVar[int] = FAMILY_CRRA

    def __post_init__(self):
        if not self.gamma > 0 or self.gamma == 1.0:
            raise ValidationError("CRRA needs gamma > 0 and gamma != 1")
        if not self.scale > 0:
            raise ValidationError("utility scale must be positive")

    def kernel_args(self):
        return self.code, float(self.gamma), 0.0, float(self.scale)

    def check_domain(self, c):
        c = np.asarray(c, dtype=float)
        if np.any(c <= 0):
            raise DomainError(
                f"CRRA utility needs positive consumption, got min {float(np.min(c))!r}")

    def u(self, c):
        self.check_domain(c)
        return self.scale * np.power(c, 1.0 - self.gamma) / (1.0 - self.gamma)

    def du(self, c):
        self.check_domain(c)
        return self.scale * np.power(c, -self.gamma)

    def ara(self, c):
        self.check_domain(c)
        return self.gamma / np.asarray(c, dtype=float)


@dataclass(frozen=True)
class CARA(UtilitySpec):
    lam: float = 0.5
    scale: float = 1.0

    family: ClassVar[str] = "cara"
    code: ClassVar[int] = FAMILY_CARA

    def __post_init__(self):
        if not self.lam > 0:
            raise ValidationError("CARA needs lambda > 0")
        if not self.scale > 0:
            raise ValidationError("utility scale must be positive")

    def kernel_args(self):
        return self.code, float(self.lam), 0.0, float(self.scale)

    def u(self, c):
        return self.scale * (1.0 - np.exp(-self.lam * np.asarray(c, dtype=float)))

    def du(self, c):
        return self.scale * self.lam * np.exp(-self.lam * np.asarray(c, dtype=float))

    def ara(self, c):
        return np.full_like(np.asarray(c, dtype=float), self.lam)


@dataclass(frozen=True)
class Quadratic(UtilitySpec):
    """``u(c) = alpha*c - beta*c**2/2``, increasing only below ``alpha/beta``.

    With ``enforce_bliss`` (the default) evaluating at or beyond the bliss
    point raises :class:`SaturationError`.  Switching it off evaluates the
    polynomial everywhere; equilibrium reports still carry the margin.
    """

    alpha: float = 10.0
    beta: float = 0.5
    scale: float = 1.0
    enforce_bliss: bool = True

    family: ClassVar[str] = "quadratic"
    code: ClassVar[int] = FAMILY_QUADRATIC

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValidationError("quadratic utility needs alpha > 0 and beta > 0")
        if not self.scale > 0:
            raise ValidationError("utility scale must be positive")

    @property
    def bliss(self) -> float:
        return self.alpha / self.beta

    def kernel_args(self):
        return self.code, float(self.alpha), float(self.beta), float(self.scale)

    def check_domain(self, c):
        if not self.enforce_bliss:
            return
        c = np.asarray(c, dtype=float)
        if np.any(c >= self.bliss):
            raise SaturationError(
                f"consumption {float(np.max(c))!r} reaches the quadratic bliss "
                f"point alpha/beta = {self.bliss!r}")

    def u(self, c):
        self.check_domain(c)
        c = np.asarray(c, dtype=float)
        return self.scale * (self.alpha * c - 0.5 * self.beta * c * c)

    def du(self, c):
        self.check_domain(c)
        return self.scale * (self.alpha - self.beta * np.asarray(c, dtype=float))

    def ara(self, c):
        self.check_domain(c)
        return self.beta / (self.alpha - self.beta * np.asarray(c, dtype=float))


def utility(u: UtilitySpec, c):
    return u.u(c)


def marginal_utility(u: UtilitySpec, c):
    return u.du(c)


def ara(u: UtilitySpec, c):
    """Absolute risk aversion ``-u''(c)/u'(c)``."""
    return u.ara(c)


# --------------------------------------------------------------------------
# Production
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DirectWage:
    """Exogenous wage per effective unit of human capital."""

    wage: float = 1.5

    def __post_init__(self):
        if not self.wage > 0:
            raise ValidationError("wage must be positive")


@dataclass(frozen=True)
class CobbDouglas:
    """``F(K, H) = K**delta * H**(1 - delta)``."""

    delta: float = 0.3

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValidationError("Cobb-Douglas share delta must lie in (0, 1)")

    def marginal_products(self, capital_ratio: float) -> tuple[float, float]:
        """Return ``(F_K, F_L)`` at capital per unit of human capital."""
        d = self.delta
        return d * capital_ratio ** (d - 1.0), (1.0 - d) * capital_ratio ** d


ProductionSpec = Union[DirectWage, CobbDouglas]


def solve_production(prod: ProductionSpec, R: float, H: float) -> tuple[float, float]:
    """Firm optimality: capital and wage given the gross rate and human capital.

    Returns ``(K, omega)``.  For :class:`DirectWage` the capital stock is not
    modelled and ``K`` is returned as ``0.0``.
    """
    if not R > 0:
        raise ValidationError("interest rate must be positive")
    if not H > 0:
        raise ValidationError("human capital stock must be positive")
    if isinstance(prod, DirectWage):
        return 0.0, float(prod.wage)
    d = prod.delta
    ratio = (d / R) ** (1.0 / (1.0 - d))
    return ratio * H, (1.0 - d) * ratio ** d


# --------------------------------------------------------------------------
# Full scenario
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EconomyParams:
    interest_rate: float
    basic_capital: float
    signal_grid: SignalGrid
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    utility: UtilitySpec = field(default_factory=CRRA)
    production: ProductionSpec = field(default_factory=DirectWage)

    education_cost: ClassVar[float] = EDUCATION_COST

    def __post_init__(self):
        if not (self.interest_rate > 0 and math.isfinite(self.interest_rate)):
            raise ValidationError(f"interest rate R must be > 0, got {self.interest_rate!r}",
                                  field="economy.R")
        if not (self.basic_capital >= 0 and math.isfinite(self.basic_capital)):
            raise ValidationError(f"basic capital A must be >= 0, got {self.basic_capital!r}",
                                  field="economy.A")
        eps, _ = noise_nodes(self.noise)
        lowest = self.signal_grid.lower + float(eps.min())
        if lowest < 0:
            raise ValidationError(
                f"ability support reaches {lowest!r} < 0: lowest signal "
                f"{self.signal_grid.lower!r} with noise {self.noise.kind} "
                f"sigma={self.noise.sigma!r}", field="noise.sigma")

    @property
    def R(self) -> float:
        return self.interest_rate

    @property
    def A(self) -> float:
        return self.basic_capital

    def replace(self, **changes) -> "EconomyParams":
        return replace(self, **changes)


def human_capital_stock(params: EconomyParams) -> float:
    """``H = A + E[y]`` assuming every signal group invests."""
    return params.basic_capital + params.signal_grid.mean()


def consumption(y, eps, theta, abar, omega, params: EconomyParams, invest: bool = True):
    """Adult consumption for signal ``y``, ability shock ``eps`` and CML share ``theta``.

    Without higher education (``invest=False``) consumption is ``A * omega``.
    """
    A, R = params.basic_capital, params.interest_rate
    if not invest:
        return A * omega
    a = np.asarray(y, dtype=float) + np.asarray(eps, dtype=float)
    c = (A + a) * omega - (theta * R + (1.0 - theta) * R * a / abar)
    if isinstance(params.utility, CRRA) and np.any(c <= 0):
        bad = np.argwhere(np.atleast_1d(c) <= 0)[0][0]
        yb = np.broadcast_to(y, np.shape(c)) if np.ndim(c) else y
        eb = np.broadcast_to(eps, np.shape(c)) if np.ndim(c) else eps
        yv = float(np.atleast_1d(yb)[bad])
        ev = float(np.atleast_1d(eb)[bad])
        raise DomainError(
            f"non-positive consumption {float(np.atleast_1d(c)[bad])!r} under CRRA "
            f"utility at y={yv!r}, eps={ev!r}")
    return c
