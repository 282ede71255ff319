"""Break-even pool mean, regime comparison and comparative statics.

The loan program breaks even when the pool mean ``abar`` equals the weighted
mean ability of income-contingent participants::

    abar = E[(1 - theta_y) y] / E[1 - theta_y]

with ``theta_y`` chosen by each group given ``abar``.  The portfolio regime
(PR) lets groups pick any share; the funding-diversity equilibrium (FDE)
restricts them to 0 or 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from loanmix.choice import (
    ChoiceContext,
    CutoffReport,
    ThetaProfile,
    classify_sets,
    cutoff_report,
    cutoff_signals_quadratic,
    held_consumption,
    indifference_signal,
    share_profile,
)
from loanmix.economy import (
    CARA,
    CRRA,
    EconomyParams,
    NoiseSpec,
    Quadratic,
    human_capital_stock,
    solve_production,
)
from loanmix.errors import (
    ConvergenceError,
    DegeneratePoolError,
    LoanMixError,
    ValidationError,
)

PR = "PR"
FDE = "FDE"
REGIMES = (PR, FDE)

POOL_EPS = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    damping: float = 0.5
    tol: float = 1e-12
    max_iter: int = 10_000

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise ValidationError("damping must lie in (0, 1]")
        if not self.tol > 0:
            raise ValidationError("solver tolerance must be positive")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be at least 1")


@dataclass(frozen=True)
class Equilibrium:
    regime: str
    abar: float
    omega: float
    K: float
    H: float
    profile: ThetaProfile
    cutoffs: CutoffReport | None
    fixed_point_residual: float
    break_even_residual: float
    iterations: int
    trace: tuple[float, ...]
    params: EconomyParams = field(repr=False)
    start: float = 0.0

    @property
    def theta(self) -> np.ndarray:
        return self.profile.theta

    def context(self) -> ChoiceContext:
        return ChoiceContext(self.abar, self.omega, self.params)

    def partition(self):
        return classify_sets(self.profile, self.params.signal_grid)


def pool_mean(profile: ThetaProfile | np.ndarray, grid) -> float:
    """Weighted mean signal of income-contingent participants."""
    theta = profile.theta if isinstance(profile, ThetaProfile) else np.asarray(profile, dtype=float)
    share = [w * (1.0 - t) for w, t in zip(grid.weights, theta)]
    mass = math.fsum(share)
    if mass <= POOL_EPS:
        raise DegeneratePoolError(
            f"income-contingent pool is empty (participation mass {mass!r})")
    return math.fsum(s * y for s, y in zip(share, grid.values)) / mass


def break_even_residual(eq: Equilibrium) -> float:
    """Expected repayment across all groups minus the gross rate ``R``."""
    R = eq.params.interest_rate
    grid = eq.params.signal_grid
    terms = [w * (t * R + (1.0 - t) * R * y / eq.abar)
             for w, t, y in zip(grid.weights, eq.theta, grid.values)]
    return math.fsum(terms) - R


def _profile(regime: str, abar: float, omega: float, params: EconomyParams) -> ThetaProfile:
    return share_profile(ChoiceContext(abar, omega, params), binary=(regime == FDE))


def solve_fixed_point(regime: str, params: EconomyParams, solver: SolverConfig = SolverConfig(),
                      start: float | None = None, cutoffs: bool = True) -> Equilibrium:
    """Damped iteration on the break-even map.

    ``abar <- abar + lam * (T(abar) - abar)`` starting from the unconditional
    mean signal.  The damping is halved whenever the step changes sign three
    times in a row.  The returned equilibrium carries the last undamped image
    when it is at least as good a fixed point as the last iterate.
    """
    if regime not in REGIMES:
        raise ValidationError(f"unknown regime {regime!r}")
    grid = params.signal_grid
    H = human_capital_stock(params)
    K, omega = solve_production(params.production, params.interest_rate, H)

    a0 = grid.mean() if start is None else float(start)
    abar = a0
    lam = solver.damping
    trace = [abar]
    last_sign = 0
    flips = 0
    converged = False
    it = 0
    for it in range(1, solver.max_iter + 1):
        image = pool_mean(_profile(regime, abar, omega, params), grid)
        step = image - abar
        sign = (step > 0) - (step < 0)
        if sign and last_sign and sign != last_sign:
            flips += 1
            if flips >= 3:
                lam *= 0.5
                flips = 0
        else:
            flips = 0
        last_sign = sign or last_sign
        new = abar + lam * step
        trace.append(new)
        if abs(new - abar) <= solver.tol * a0:
            abar = new
            converged = True
            break
        abar = new
    if not converged:
        raise ConvergenceError(
            f"{regime} fixed point did not converge in {solver.max_iter} iterations "
            f"(last abar={abar!r})", trace)

    prof = _profile(regime, abar, omega, params)
    image = pool_mean(prof, grid)
    residual = abs(image - abar)
    try:
        prof_img = _profile(regime, image, omega, params)
        image2 = pool_mean(prof_img, grid)
        if abs(image2 - image) <= residual:
            abar, prof, residual = image, prof_img, abs(image2 - image)
    except LoanMixError:
        pass

    ctx = ChoiceContext(abar, omega, params)
    report = cutoff_report(ctx) if cutoffs else None
    eq = Equilibrium(regime, abar, omega, K, H, prof, report, residual, 0.0, it,
                     tuple(trace), params, a0)
    return _with_break_even(eq)


def _with_break_even(eq: Equilibrium) -> Equilibrium:
    from dataclasses import replace

    return replace(eq, break_even_residual=break_even_residual(eq))


def probe_fixed_points(regime: str, params: EconomyParams, starts: int = 5,
                       solver: SolverConfig = SolverConfig(), tol: float = 1e-9):
    """Solve from ``starts`` points spanning the signal bounds.

    Returns ``(distinct, results)`` where ``distinct`` lists the different
    fixed points found and ``results`` pairs each start with its outcome.
    """
    grid = params.signal_grid
    points = np.linspace(grid.lower, grid.upper, starts) if starts > 1 else [grid.mean()]
    results, distinct = [], []
    for s in points:
        try:
            eq = solve_fixed_point(regime, params, solver, start=float(s), cutoffs=False)
        except LoanMixError as exc:
            results.append((float(s), exc))
            continue
        results.append((float(s), eq))
        if not any(abs(eq.abar - d) <= tol for d in distinct):
            distinct.append(eq.abar)
    return sorted(distinct), results


# --------------------------------------------------------------------------
# Welfare comparison
# --------------------------------------------------------------------------


def node_expected_utility(eq: Equilibrium) -> np.ndarray:
    """Expected utility of every signal group at its equilibrium share."""
    ctx = eq.context()
    c = held_consumption(ctx, eq.theta)
    u = eq.params.utility.u(c)
    w = ctx.noise_weights
    acc = w[0] * u[:, 0]
    for j in range(1, u.shape[1]):
        acc = acc + w[j] * u[:, j]
    return acc


@dataclass(frozen=True)
class WelfareReport:
    y: np.ndarray
    eu_pr: np.ndarray
    eu_fde: np.ndarray
    verdicts: tuple[str, ...]
    delta_abar: float
    pareto: bool
    scale: float
    in_scope: bool
    warnings: tuple[str, ...]
    delta_abar_bound: float
    pr: Equilibrium = field(repr=False)
    fde: Equilibrium = field(repr=False)

    @property
    def strict_icl_gain(self) -> bool:
        """Some node that is ICL-only in both regimes is strictly better off."""
        icl = (self.pr.theta <= 1e-9) & (self.fde.theta <= 1e-9)
        return bool(np.any(icl & (np.asarray(self.verdicts) == "better")))


def compare_regimes(params: EconomyParams, solver: SolverConfig = SolverConfig()) -> WelfareReport:
    """Solve both regimes and compare expected utility node by node."""
    pr = solve_fixed_point(PR, params, solver)
    fde = solve_fixed_point(FDE, params, solver)
    eu_pr = node_expected_utility(pr)
    eu_fde = node_expected_utility(fde)
    scale = float(max(np.max(np.abs(eu_pr)), np.max(np.abs(eu_fde))))
    tol = 1e-12 * scale
    diff = eu_pr - eu_fde
    verdicts = tuple("better" if d > tol else "worse" if d < -tol else "equal" for d in diff)
    pareto = "worse" not in verdicts and "better" in verdicts

    grid = params.signal_grid
    warnings = []
    in_scope = True
    u = params.utility
    fde_ctx = fde.context()
    roots = indifference_signal(fde_ctx)
    interior = [r for r in roots if grid.lower < r < grid.upper]
    if not interior:
        in_scope = False
        warnings.append("no interior ICL/CML indifference signal at the FDE pool mean")
    if isinstance(u, Quadratic):
        if len(roots) >= 2 and grid.upper > roots[1]:
            in_scope = False
            warnings.append(
                f"quadratic utility with y2={grid.upper!r} above the upper indifference "
                f"signal {roots[1]!r}")
    elif not isinstance(u, (CRRA, CARA)):
        in_scope = False
        warnings.append(f"utility family {u.family!r} outside the dominance result")
    if np.all(fde.theta <= 1e-9):
        in_scope = False
        warnings.append("every group is ICL-only under FDE")

    w = grid.w
    pr_mass = math.fsum(w * (1.0 - pr.theta) * grid.y)
    icl = fde.theta <= 1e-9
    fde_mean = math.fsum(w[icl] * grid.y[icl]) / math.fsum(w[icl]) if icl.any() else float("nan")
    bound = pr_mass - fde_mean

    return WelfareReport(grid.y, eu_pr, eu_fde, verdicts, pr.abar - fde.abar, pareto, scale,
                         in_scope, tuple(warnings), bound, pr, fde)


# --------------------------------------------------------------------------
# Comparative statics
# --------------------------------------------------------------------------

SWEEP_PARAMS = ("beta_over_alpha", "A", "sigma2")


def with_parameter(params: EconomyParams, name: str, value: float) -> EconomyParams:
    """Copy of ``params`` with one swept parameter replaced."""
    from dataclasses import replace

    if name == "A":
        return params.replace(basic_capital=float(value))
    if name == "sigma2":
        if value < 0:
            raise ValidationError("sigma2 must be non-negative")
        return params.replace(noise=replace(params.noise, sigma=math.sqrt(value)))
    if name == "beta_over_alpha":
        u = params.utility
        if not isinstance(u, Quadratic):
            raise ValidationError("beta_over_alpha sweeps need quadratic utility")
        return params.replace(utility=replace(u, beta=float(value) * u.alpha))
    raise ValidationError(f"unknown sweep parameter {name!r}; expected one of {SWEEP_PARAMS}")


@dataclass(frozen=True)
class SweepPoint:
    value: float
    equilibrium: Equilibrium | None
    error: str | None = None


@dataclass(frozen=True)
class SweepResult:
    param: str
    points: tuple[SweepPoint, ...]
    nonincreasing: np.ndarray  # per node, across consecutive solved points
    max_increase: float

    def solved(self):
        return [p for p in self.points if p.equilibrium is not None]


def comparative_static_sweep(param: str, values, params: EconomyParams,
                             solver: SolverConfig = SolverConfig(),
                             tol: float = 1e-10) -> SweepResult:
    """Solve the PR equilibrium at each value and track node-wise monotonicity."""
    if param not in SWEEP_PARAMS:
        raise ValidationError(f"unknown sweep parameter {param!r}; expected one of {SWEEP_PARAMS}")
    values = [float(v) for v in values]
    if not values:
        raise ValidationError("sweep needs at least one value")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValidationError("sweep values must be strictly increasing")
    if param == "beta_over_alpha" and not isinstance(params.utility, Quadratic):
        raise ValidationError("beta_over_alpha sweeps need quadratic utility")

    points = []
    for v in values:
        try:
            eq = solve_fixed_point(PR, with_parameter(params, param, v), solver, cutoffs=False)
            points.append(SweepPoint(v, eq))
        except LoanMixError as exc:
            points.append(SweepPoint(v, None, f"{type(exc).__name__}: {exc}"))

    n = len(params.signal_grid)
    ok = np.ones(n, dtype=bool)
    worst = 0.0
    solved = [p.equilibrium for p in points if p.equilibrium is not None]
    for prev, nxt in zip(solved, solved[1:]):
        inc = nxt.theta - prev.theta
        ok &= inc <= tol
        worst = max(worst, float(np.max(inc)))
    return SweepResult(param, tuple(points), ok, worst)


# --------------------------------------------------------------------------
# Assumption report
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AssumptionReport:
    interior_indifference: bool
    interior_margin: float | None
    profitable: bool
    profitable_margin: float
    lemma1_k: float | None = None
    assumption3: bool | None = None
    assumption3_margin: float | None = None
    assumption3_discriminant: float | None = None
    assumption4: bool | None = None
    assumption4_margin: float | None = None
    assumption4_discriminant: float | None = None
    upper_covers_cml_cutoff: bool | None = None
    bliss_margin: float | None = None
    unsupported: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        from dataclasses import asdict

        d = asdict(self)
        d["unsupported"] = list(self.unsupported)
        return d


def assumption_checks(eq: Equilibrium, params: EconomyParams | None = None) -> AssumptionReport:
    """Evaluate every modelling assumption at the equilibrium pool mean.

    Never raises; failing conditions are reported with signed margins.
    """
    params = eq.params if params is None else params
    grid = params.signal_grid
    ctx = ChoiceContext(eq.abar, eq.omega, params)
    R = params.interest_rate
    roots = list(eq.cutoffs.y_hat) if eq.cutoffs is not None else indifference_signal(ctx)
    interior = [r for r in roots if grid.lower < r < grid.upper]
    margin = max((min(r - grid.lower, grid.upper - r) for r in interior), default=None)
    prof_margin = eq.abar * eq.omega - R
    unsupported = []
    if not interior:
        unsupported.append("portfolio-set existence (no interior indifference signal)")
    if not prof_margin > 0:
        unsupported.append("results needing profitable investment (abar*omega <= R)")

    fields = {}
    u = params.utility
    if isinstance(u, Quadratic):
        s2 = params.noise.variance
        k = ctx.k
        a_p, c = ctx.a_prime, ctx.c_const
        with np.errstate(divide="ignore"):
            m3 = (k * eq.abar / (2 * prof_margin)) ** 2 - s2 if prof_margin != 0 else float("-inf")
        m4 = (k / (2 * eq.omega)) ** 2 - s2
        d3 = a_p * a_p - 4 * s2 * c * c
        d4 = a_p * a_p - 4 * s2 * (c + 1) ** 2
        ypp = cutoff_signals_quadratic(ctx).y_dprime
        covers = bool(ypp) and grid.upper >= ypp[0]
        c_held = held_consumption(ctx, eq.theta)
        fields = dict(
            lemma1_k=k,
            assumption3=bool(m3 > 0 and prof_margin > 0),
            assumption3_margin=m3,
            assumption3_discriminant=d3,
            assumption4=bool(m4 >= 0 and covers and prof_margin > 0),
            assumption4_margin=m4,
            assumption4_discriminant=d4,
            upper_covers_cml_cutoff=covers,
            bliss_margin=float(u.bliss - np.max(c_held)),
        )
        if not k > 0:
            unsupported.append("closed-form shares (k <= 0)")
        if fields["bliss_margin"] <= 0:
            unsupported.append("monotone utility (consumption at or above alpha/beta)")
    return AssumptionReport(bool(interior), margin, bool(prof_margin > 0), prof_margin,
                            unsupported=tuple(unsupported), **fields)
