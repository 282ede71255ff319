"""Randomised invariants over the parameter space."""

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from loanmix.choice import (
    ChoiceContext,
    ThetaProfile,
    expected_utility,
    foc_derivative,
    optimal_share,
    optimal_share_quadratic,
)
from loanmix.economy import (
    CARA,
    CRRA,
    DirectWage,
    EconomyParams,
    NoiseSpec,
    Quadratic,
    SignalGrid,
    consumption,
    noise_nodes,
)
from loanmix.equilibrium import PR, break_even_residual, pool_mean, solve_fixed_point
from loanmix.oracle import OracleConfig, grid_search_share

settings.register_profile("loanmix", deadline=None, max_examples=60)
settings.load_profile("loanmix")

sigmas = st.floats(0.0, 0.9)
abars = st.floats(1.05, 2.9)
shares = st.floats(0.0, 1.0)
utilities = st.one_of(
    st.builds(CRRA, st.floats(0.3, 6.0).filter(lambda g: abs(g - 1) > 1e-3)),
    st.builds(CARA, st.floats(0.05, 3.0)),
    st.builds(Quadratic, st.just(10.0), st.floats(0.05, 0.4)),
)


def params(utility, sigma, kind="two_point", A=2.0):
    return EconomyParams(1.2, A, SignalGrid.uniform(1.0, 3.0, 21), NoiseSpec(kind, sigma),
                         utility, DirectWage(1.5))


@given(st.floats(0.0, 2.0), st.integers(2, 30))
def test_gauss_hermite_moments(sigma, n):
    eps, w = noise_nodes(NoiseSpec("gauss_hermite", sigma, n))
    assert math.fsum(w) == pytest.approx(1.0, abs=1e-13)
    assert abs(math.fsum(w * eps)) <= 1e-12
    assert math.fsum(w * eps * eps) == pytest.approx(sigma * sigma, abs=1e-12)


@given(st.floats(1.0, 3.0), st.floats(-0.9, 0.9), abars, st.floats(0.0, 0.9))
def test_consumption_affine(y, eps, abar, t):
    p = params(CARA(0.5), 0.9)
    c0 = consumption(y, eps, 0.0, abar, 1.5, p)
    c1 = consumption(y, eps, 1.0, abar, 1.5, p)
    assert consumption(y, eps, t, abar, 1.5, p) == pytest.approx(c0 + t * (c1 - c0), abs=1e-12)


@given(utilities, sigmas, abars, st.floats(1.0, 3.0))
def test_share_beats_grid(u, sigma, abar, y):
    ctx = ChoiceContext(abar, 1.5, params(u, sigma))
    theta = optimal_share(y, ctx).theta
    grid = grid_search_share(y, ctx, OracleConfig(grid_points=201))
    assert abs(theta - grid) <= 1 / 200 + 1e-9
    assert expected_utility(y, theta, ctx) >= expected_utility(y, grid, ctx) - 1e-12 * (
        1 + abs(expected_utility(y, grid, ctx)))


@given(utilities, sigmas, abars, st.floats(0.0, 1.0))
def test_no_cml_at_or_below_pool_mean(u, sigma, abar, frac):
    ctx = ChoiceContext(abar, 1.5, params(u, sigma))
    y = 1.0 + frac * (abar - 1.0)
    assert optimal_share(y, ctx).theta == 0.0


@given(st.floats(0.05, 0.4), sigmas, abars, st.floats(1.0, 3.0))
def test_closed_form_matches_bisection(beta, sigma, abar, y):
    ctx = ChoiceContext(abar, 1.5, params(Quadratic(10.0, beta, enforce_bliss=False), sigma))
    assume(ctx.k > 0)
    assert optimal_share_quadratic(y, ctx).theta == pytest.approx(optimal_share(y, ctx).theta,
                                                                   abs=1e-8)


@given(utilities, sigmas, abars, st.floats(1.0, 3.0), st.floats(0.05, 0.95))
def test_foc_matches_finite_difference(u, sigma, abar, y, t):
    ctx = ChoiceContext(abar, 1.5, params(u, sigma))
    h = 1e-6
    fd = (expected_utility(y, t + h, ctx) - expected_utility(y, t - h, ctx)) / (2 * h)
    g = foc_derivative(y, t, ctx)
    assert g == pytest.approx(fd, rel=1e-5, abs=1e-8)


@given(st.lists(shares, min_size=21, max_size=21))
def test_break_even_identity_for_any_profile(theta):
    theta = np.array(theta)
    assume(np.any(theta < 0.99))
    p = params(CARA(0.5), 0.3)
    eq = solve_fixed_point(PR, p, cutoffs=False)
    prof = ThetaProfile(theta)
    abar = pool_mean(prof, p.signal_grid)
    assert 1.0 <= abar <= 3.0
    assert abs(break_even_residual(replace(eq, profile=prof, abar=abar))) <= 1e-12


@settings(max_examples=15)
@given(st.sampled_from([CRRA(2.0), CARA(0.5), CARA(1.5), CRRA(4.0)]), st.floats(0.1, 0.9))
def test_equilibrium_properties(u, sigma):
    eq = solve_fixed_point(PR, params(u, sigma))
    y = eq.params.signal_grid.y
    assert np.all(eq.theta[y <= eq.abar] == 0.0)
    interior = (eq.theta > 0) & (eq.theta < 1)
    assert np.all(y[interior] > eq.abar)
    assert np.all(np.diff(eq.theta) >= -1e-10)
    assert abs(eq.break_even_residual) <= 1e-10
