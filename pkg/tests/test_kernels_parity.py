import numpy as np
import pytest

from bilevel_mi import kernels, scalar, solver

try:
    compiled = kernels.get_backend("cython")
except ImportError:  # extension not built
    compiled = None

needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled kernels not built")
python = kernels.get_backend("python")


def test_backend_is_reported():
    assert kernels.BACKEND in ("python", "cython")
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


@needs_compiled
@pytest.mark.parametrize("gamma,y", [(0.0, 1.0), (0.3, 0.0), (2.0, 1.0), (50.0, 1.0), (1e4, 0.0)])
def test_prox_backends_agree(gamma, y):
    v = np.random.default_rng(3).normal(0, 30, 2000)
    a = python.prox_logistic_array(gamma, y, v)
    b = compiled.prox_logistic_array(gamma, y, v)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-12)


@needs_compiled
@pytest.mark.parametrize("tau", [0.0, 0.5, 1.0, 3.0, 50.0])
@pytest.mark.parametrize("order", [1, 2])
def test_logistic_normal_backends_agree(tau, order):
    mu = np.linspace(-40, 40, 81)
    gh = scalar._GH64
    args = (gh.nodes, gh.weights, *scalar._LOGISTIC)
    np.testing.assert_allclose(python.logistic_normal(mu, tau, order, *args),
                               compiled.logistic_normal(mu, tau, order, *args),
                               rtol=1e-12, atol=1e-15)


@needs_compiled
def test_tail_moments_backends_agree(fig2_spec):
    state = solver.FixedPointState(0.013, 1.37, 103.9, 5.3e-4, 104.0, 0.031)
    outer, sd, mu_scale, tau = solver.tail_rule(fig2_spec, state)
    gh = scalar._GH64
    args = (outer.nodes, outer.weights, sd, mu_scale, tau, state.gamma,
            gh.nodes, gh.weights, *scalar._LOGISTIC)
    np.testing.assert_allclose(python.tail_moments(*args), compiled.tail_moments(*args),
                               rtol=1e-12)


def test_prox_array_keeps_shape():
    v = np.zeros((3, 4))
    assert python.prox_logistic_array(1.0, 1.0, v).shape == (3, 4)
    assert kernels.prox_logistic_array(1.0, 1.0, v).shape == (3, 4)
