"""Shared builders and cached reference solutions for the test suite."""

import functools

from loanmix.economy import CRRA, DirectWage, EconomyParams, NoiseSpec, SignalGrid
from loanmix.equilibrium import solve_fixed_point
from loanmix.scenario import load_scenario

REFERENCE = ("quadratic", "crra", "cara")


def small_params(utility=None, nodes=41, sigma=0.3, A=2.0, kind="two_point"):
    return EconomyParams(1.2, A, SignalGrid.uniform(1.0, 3.0, nodes), NoiseSpec(kind, sigma),
                         utility or CRRA(2.0), DirectWage(1.5))


@functools.lru_cache(maxsize=None)
def reference(name):
    return load_scenario(name)


@functools.lru_cache(maxsize=None)
def equilibrium(name, regime):
    sc = reference(name)
    return solve_fixed_point(regime, sc.params, sc.solver)
