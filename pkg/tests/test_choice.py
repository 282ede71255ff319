import numpy as np
import pytest

from helpers import equilibrium, reference, small_params
from loanmix.choice import (
    ChoiceContext,
    ThetaProfile,
    binary_choice,
    classify_sets,
    cutoff_signals_quadratic,
    expected_utility,
    foc_derivative,
    indifference_gap,
    indifference_signal,
    optimal_share,
    optimal_share_quadratic,
    portfolio_boundaries,
    share_profile,
)
from loanmix.economy import (
    CARA,
    CRRA,
    EconomyParams,
    NoiseSpec,
    Quadratic,
    SignalGrid,
    consumption,
    utility,
)
from loanmix.equilibrium import PR
from loanmix.errors import AssumptionViolation, DomainError, SaturationError, ValidationError
from loanmix.oracle import grid_search_share


def ctx_for(name):
    return equilibrium(name, PR).context()


def quad_ctx(abar=1.6, sigma=0.3, **kw):
    return ChoiceContext(abar, 1.5, small_params(Quadratic(10.0, 0.5, **kw), sigma=sigma))


def test_context_validation():
    with pytest.raises(ValidationError):
        ChoiceContext(0.0, 1.5, small_params())
    with pytest.raises(ValidationError):
        ChoiceContext(1.5, 1.5, small_params()).k


def test_quadratic_constants():
    ctx = quad_ctx()
    assert ctx.k == pytest.approx(20.0 - ((2.0 + 1.6) * 1.5 - 1.2))
    assert ctx.a_prime == pytest.approx(ctx.k * 1.6 / 1.2)
    assert ctx.c_const == pytest.approx((1.6 * 1.5 - 1.2) / 1.2)


def test_expected_utility_without_noise():
    p = small_params(CARA(0.5), sigma=0.0)
    ctx = ChoiceContext(1.7, 1.5, p)
    c = consumption(2.2, 0.0, 0.4, 1.7, 1.5, p)
    assert expected_utility(2.2, 0.4, ctx) == float(utility(p.utility, c))


def test_expected_utility_rejects_share_outside_unit_interval():
    with pytest.raises(ValidationError):
        expected_utility(2.0, 1.5, quad_ctx())


def test_expected_utility_propagates_domain_errors():
    ctx = ChoiceContext(3.0, 0.1, small_params(CRRA(2.0), A=0.0))
    with pytest.raises(DomainError):
        expected_utility(1.0, 0.0, ctx)
    with pytest.raises(SaturationError):
        expected_utility(2.0, 0.5, ChoiceContext(1.6, 1.5, small_params(Quadratic(10.0, 0.5), A=13.0)))


@pytest.mark.parametrize("name", ["crra", "cara", "quadratic"])
def test_mixing_beats_either_corner_at_indifference(name):
    ctx = ctx_for(name)
    y_hat = indifference_signal(ctx)[0]
    e0, e1 = expected_utility(y_hat, 0.0, ctx), expected_utility(y_hat, 1.0, ctx)
    for t in (0.25, 0.5, 0.75):
        assert expected_utility(y_hat, t, ctx) > t * e1 + (1 - t) * e0


@pytest.mark.parametrize("name", ["crra", "cara", "quadratic"])
def test_foc_negative_below_pool_mean(name):
    ctx = ctx_for(name)
    for y in (1.0, 0.5 * (1.0 + ctx.abar), ctx.abar):
        for t in np.linspace(0, 1, 11):
            assert foc_derivative(y, t, ctx) < 0


def test_foc_positive_without_noise_above_pool_mean():
    ctx = ChoiceContext(1.7, 1.5, small_params(CRRA(2.0), sigma=0.0))
    for y in (1.8, 2.5, 3.0):
        for t in np.linspace(0, 1, 11):
            assert foc_derivative(y, t, ctx) > 0


@pytest.mark.parametrize("name", ["crra", "cara", "quadratic"])
def test_foc_matches_finite_difference(name):
    ctx = ctx_for(name)
    h = 1e-6
    fd = (expected_utility(2.6, 0.5 + h, ctx) - expected_utility(2.6, 0.5 - h, ctx)) / (2 * h)
    assert foc_derivative(2.6, 0.5, ctx) == pytest.approx(fd, rel=1e-6)


def test_foc_equals_price_plus_insurance_terms():
    ctx = ctx_for("crra")
    y, t = 1.2, 0.3
    c0, d = ctx.affine(y)
    up = ctx.utility.du(c0 + t * d)
    a = y + ctx.eps
    w = ctx.noise_weights
    e_up = np.sum(w * up)
    cov = np.sum(w * (a - y) * (up - e_up))
    R = ctx.params.interest_rate
    expected = R / ctx.abar * ((y - ctx.abar) * e_up + cov)
    assert foc_derivative(y, t, ctx) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("name", ["crra", "cara", "quadratic"])
def test_optimal_share_zero_at_or_below_pool_mean(name):
    ctx = ctx_for(name)
    for y in reference(name).params.signal_grid.values:
        if y <= ctx.abar:
            assert optimal_share(y, ctx).theta == 0.0


@pytest.mark.parametrize("name", ["crra", "cara", "quadratic"])
def test_optimal_share_interior_at_indifference_signal(name):
    ctx = ctx_for(name)
    for y_hat in indifference_signal(ctx):
        assert 0.0 < optimal_share(y_hat, ctx).theta < 1.0


@pytest.mark.parametrize("name", ["crra", "cara", "quadratic"])
def test_optimal_share_matches_grid_search(name):
    ctx = ctx_for(name)
    for y in (1.02, 1.05, 1.3, 2.6):
        assert abs(optimal_share(y, ctx).theta - grid_search_share(y, ctx)) <= 1e-4


def test_optimal_share_raw_only_for_quadratic():
    assert optimal_share(2.0, ctx_for("crra")).raw is None
    assert optimal_share(2.0, ctx_for("quadratic")).raw is not None


def test_quadratic_closed_form_at_pool_mean():
    ctx = quad_ctx()
    s = optimal_share_quadratic(ctx.abar, ctx)
    assert s.raw == pytest.approx(-ctx.c_const)
    assert s.theta == 0.0


def test_quadratic_closed_form_peak():
    ctx = quad_ctx()
    y_peak = ctx.abar + 0.3
    top = optimal_share_quadratic(y_peak, ctx).raw
    expected = ctx.k * ctx.abar / (2 * 1.2 * 0.3) - ctx.c_const
    assert top == pytest.approx(expected, rel=1e-12)
    for dy in (-0.05, -0.01, 0.01, 0.05):
        assert optimal_share_quadratic(y_peak + dy, ctx).raw < top


def test_quadratic_closed_form_matches_bisection_on_reference_grid():
    ctx = ctx_for("quadratic")
    for y in reference("quadratic").params.signal_grid.values:
        assert abs(optimal_share_quadratic(y, ctx).theta - optimal_share(y, ctx).theta) <= 1e-8


def test_quadratic_closed_form_needs_positive_k():
    p = small_params(Quadratic(1.0, 0.5, enforce_bliss=False))
    ctx = ChoiceContext(1.6, 1.5, p)
    assert ctx.k < 0
    with pytest.raises(AssumptionViolation):
        optimal_share_quadratic(2.0, ctx)
    # below the pool mean the formula is still defined
    assert 0.0 <= optimal_share_quadratic(1.2, ctx).theta <= 1.0


def test_quadratic_closed_form_rejects_other_families():
    with pytest.raises(ValidationError):
        optimal_share_quadratic(2.0, ctx_for("crra"))


@pytest.mark.parametrize("name", ["crra", "cara", "quadratic"])
def test_binary_choice_icl_below_pool_mean(name):
    ctx = ctx_for(name)
    assert binary_choice(1.0, ctx) == 0
    assert binary_choice(ctx.abar, ctx) == 0


def test_binary_choice_without_noise():
    ctx = ChoiceContext(1.7, 1.5, small_params(CRRA(2.0), sigma=0.0))
    assert binary_choice(2.0, ctx) == 1
    # identical consumption either way: the tie goes to ICL
    assert expected_utility(1.7, 0.0, ctx) == expected_utility(1.7, 1.0, ctx)
    assert binary_choice(1.7, ctx) == 0


def test_indifference_signal_crra_single_root():
    ctx = ctx_for("crra")
    roots = indifference_signal(ctx)
    assert len(roots) == 1
    assert abs(indifference_gap(roots[0], ctx)) <= 1e-10


def test_indifference_signal_two_roots_when_top_signals_return_to_icl():
    sc = reference("fig2")
    ctx = equilibrium("fig2", PR).context()
    roots = indifference_signal(ctx)
    assert len(roots) == 2 and roots[0] < roots[1]
    g = sc.params.signal_grid
    assert g.lower < roots[0] < roots[1] < g.upper
    for r in roots:
        assert abs(indifference_gap(r, ctx)) <= 1e-10


def test_indifference_signal_empty_when_no_crossing():
    # pool mean below every signal and no noise: CML-only wins everywhere
    ctx = ChoiceContext(0.5, 1.5, small_params(CRRA(2.0), sigma=0.0))
    assert indifference_signal(ctx) == []


def test_portfolio_boundaries_bracket_portfolio_set():
    ctx = ctx_for("crra")
    lower, upper = portfolio_boundaries(ctx)
    assert len(lower) == 1 and len(upper) == 1
    assert lower[0] < indifference_signal(ctx)[0] < upper[0]
    assert foc_derivative(lower[0], 0.0, ctx) == pytest.approx(0.0, abs=1e-10)
    assert foc_derivative(upper[0], 1.0, ctx) == pytest.approx(0.0, abs=1e-10)


def test_cutoffs_lower_root_collapses_to_pool_mean_as_noise_vanishes():
    gaps = [cutoff_signals_quadratic(quad_ctx(sigma=s)).y_prime[0] - 1.6
            for s in (0.1, 0.01, 0.001)]
    assert gaps[0] > gaps[1] > gaps[2] > 0
    assert gaps[2] < 1e-5


def test_cutoffs_repeated_upper_root():
    base = ChoiceContext(1.6, 1.5, EconomyParams(
        1.2, 2.0, SignalGrid.uniform(6.0, 12.0, 41), NoiseSpec("two_point", 0.3),
        Quadratic(10.0, 0.5), small_params().production))
    half = base.a_prime / (2 * (base.c_const + 1))
    ctx = ChoiceContext(1.6, 1.5, base.params.replace(noise=NoiseSpec("two_point", half)))
    rep = cutoff_signals_quadratic(ctx)
    assert rep.y_dprime[0] == rep.y_dprime[1] == pytest.approx(1.6 + half)


def test_cutoffs_missing_portfolio_region_is_reported():
    ctx = quad_ctx(sigma=0.99)
    ctx = ChoiceContext(1.02, 1.5, ctx.params.replace(basic_capital=0.0,
                                                       utility=Quadratic(0.2, 0.5)))
    rep = cutoff_signals_quadratic(ctx)
    assert rep.y_prime == ()
    assert any("no portfolio region" in n for n in rep.notes)


def test_cutoffs_match_profile_switches_on_fine_grid():
    ctx = ctx_for("quadratic")
    rep = cutoff_signals_quadratic(ctx)
    ys = np.linspace(1.0, 1.05, 50_001)
    theta = np.array([optimal_share_quadratic(y, ctx).theta for y in ys])
    step = ys[1] - ys[0]
    first_mix = ys[np.argmax(theta > 0)]
    first_full = ys[np.argmax(theta >= 1)]
    assert abs(first_mix - rep.y_prime[0]) <= step
    assert abs(first_full - rep.y_dprime[0]) <= step


def test_classify_sets_basic():
    part = classify_sets(ThetaProfile(np.zeros(5)))
    assert part.counts() == {"icl_only": 5, "portfolio": 0, "cml_only": 0}
    part = classify_sets(np.array([0.0, 1e-10, 0.5, 1 - 1e-10, 1.0]))
    assert part.counts() == {"icl_only": 2, "portfolio": 1, "cml_only": 2}
    assert part.labels(5)[2] == "portfolio"


def test_classify_sets_length_mismatch():
    with pytest.raises(ValidationError):
        classify_sets(np.zeros(3), SignalGrid.uniform(1, 2, 4))


def test_reference_quadratic_has_three_sets():
    counts = equilibrium("quadratic", PR).partition().counts()
    assert all(v > 0 for v in counts.values())


def test_crra_sets_ordered_in_signal():
    part = equilibrium("crra", PR).partition()
    assert part.icl_only.max() < part.portfolio.min()
    assert part.portfolio.max() < part.cml_only.min()


@pytest.mark.parametrize("name", ["crra", "cara", "quadratic"])
def test_expected_utility_concave_in_share(name):
    ctx = ctx_for(name)
    t = np.linspace(0, 1, 101)
    for y in reference(name).params.signal_grid.values[::40]:
        eu = np.array([expected_utility(y, s, ctx) for s in t])
        assert np.max(np.diff(eu, 2)) <= 1e-9


def test_crra_scale_invariance():
    p = small_params(CRRA(2.0))
    ctx1 = ChoiceContext(1.5, 1.5, p)
    ctx2 = ChoiceContext(1.5, 1.5, p.replace(utility=CRRA(2.0, scale=37.0)))
    for y in p.signal_grid.values:
        assert abs(optimal_share(y, ctx1).theta - optimal_share(y, ctx2).theta) <= 1e-10


def test_share_profile_matches_pointwise():
    ctx = ctx_for("cara")
    prof = share_profile(ctx)
    ys = reference("cara").params.signal_grid.values
    for i in range(0, len(ys), 50):
        assert prof.theta[i] == optimal_share(ys[i], ctx).theta
    binary = share_profile(ctx, binary=True)
    for i in range(0, len(ys), 50):
        assert binary.theta[i] == binary_choice(ys[i], ctx)


def test_share_profile_checks_bliss_at_held_consumption():
    p = small_params(Quadratic(10.0, 0.5), A=12.0)
    with pytest.raises(SaturationError):
        share_profile(ChoiceContext(1.6, 1.5, p))
    loose = p.replace(utility=Quadratic(10.0, 0.5, enforce_bliss=False))
    assert len(share_profile(ChoiceContext(1.6, 1.5, loose))) == 41


def test_unclamped_quadratic_share_shape():
    # concave only on [abar, abar + sqrt(3) sigma]; convex tails either side
    eq = equilibrium("quadratic", PR)
    y, raw, sigma = eq.params.signal_grid.y, eq.profile.raw, eq.params.noise.sigma
    x = y - eq.abar
    second = raw[:-2] - 2 * raw[1:-1] + raw[2:]
    mid = x[1:-1]
    inner = (mid > 0.01) & (mid < np.sqrt(3) * sigma - 0.01)
    outer = mid > np.sqrt(3) * sigma + 0.01
    assert np.all(second[inner] <= 1e-12)
    assert np.all(second[outer] > 0)
    assert abs(y[np.argmax(raw)] - (eq.abar + sigma)) <= eq.params.signal_grid.y[1] - y[0]


def test_positive_share_set_is_an_interval():
    eq = equilibrium("fig2", PR)
    idx = np.flatnonzero(eq.theta > 0)
    assert idx.size and np.all(np.diff(idx) == 1)
