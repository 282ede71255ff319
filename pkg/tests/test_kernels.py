import os
import subprocess
import sys

import numpy as np
import pytest

from helpers import reference
from loanmix import _pykernels, kernels
from loanmix.equilibrium import FDE, PR, solve_fixed_point

compiled = pytest.mark.skipif(kernels.compiled_backend is None, reason="extension not built")

FAMILIES = [(0, 2.0, 0.0, 1.0), (1, 0.5, 0.0, 1.0), (2, 10.0, 0.5, 1.0), (0, 0.5, 0.0, 3.0)]


@pytest.fixture
def python_backend():
    prev = kernels.BACKEND
    kernels.use("python")
    yield
    kernels.use(prev)


def _case(rng, m):
    c0 = rng.uniform(2.0, 6.0, m)
    d = rng.uniform(-1.0, 1.0, m)
    w = rng.uniform(0.1, 1.0, m)
    return c0, d, w / w.sum()


@compiled
@pytest.mark.parametrize("fam", FAMILIES)
def test_pointwise_kernels_agree(fam):
    ck = kernels.compiled_backend
    rng = np.random.default_rng(1)
    for m in (1, 2, 7):
        c0, d, w = _case(rng, m)
        for t in (0.0, 0.3, 1.0):
            assert ck.eu_theta(*fam, c0, d, w, t) == pytest.approx(
                _pykernels.eu_theta(*fam, c0, d, w, t), rel=1e-14)
            assert ck.foc_theta(*fam, c0, d, w, t) == pytest.approx(
                _pykernels.foc_theta(*fam, c0, d, w, t), rel=1e-13, abs=1e-15)
        a = ck.optimal_share(*fam, c0, d, w, 1e-12, 200)
        b = _pykernels.optimal_share(*fam, c0, d, w, 1e-12, 200)
        assert a[1] == b[1] and a[0] == pytest.approx(b[0], abs=1e-12)
        assert ck.grid_argmax(*fam, c0, d, w, 1001) == _pykernels.grid_argmax(*fam, c0, d, w, 1001)


@compiled
def test_uniforms_bit_identical():
    a = kernels.compiled_backend.uniforms(2**63 + 11, 5, 10_000, 4, 2)
    b = _pykernels.uniforms(2**63 + 11, 5, 10_000, 4, 2)
    assert np.array_equal(a, b)


@compiled
@pytest.mark.parametrize("name", ["crra", "cara", "quadratic"])
def test_equilibria_agree_across_backends(name, python_backend):
    sc = reference(name)
    for regime in (PR, FDE):
        py = solve_fixed_point(regime, sc.params, sc.solver, cutoffs=False)
        kernels.use("cython")
        cy = solve_fixed_point(regime, sc.params, sc.solver, cutoffs=False)
        kernels.use("python")
        assert py.abar == pytest.approx(cy.abar, abs=1e-12)
        assert np.max(np.abs(py.theta - cy.theta)) <= 1e-10


def test_python_backend_solves_reference(python_backend):
    eq = solve_fixed_point(PR, reference("crra").params)
    assert kernels.BACKEND == "python"
    assert abs(eq.break_even_residual) <= 1e-10


def test_use_rejects_unknown_backend():
    with pytest.raises(ValueError):
        kernels.use("fortran")


def test_environment_forces_fallback():
    env = dict(os.environ, LOANMIX_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from loanmix import kernels; print(kernels.BACKEND)"],
                         capture_output=True, text=True, env=env)
    assert out.stdout.strip() == "python"
