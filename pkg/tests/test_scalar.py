import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bilevel_mi import scalar
from bilevel_mi.errors import InvalidArgumentError, NumericDomainError

import oracles


def test_logistic_values_at_zero():
    assert scalar.rho(0.0) == pytest.approx(math.log(2), abs=1e-15)
    assert scalar.rho_prime(0.0) == 0.5
    assert scalar.rho_second(0.0) == 0.25


def test_rho_no_overflow():
    assert scalar.rho(800.0) == 800.0
    assert scalar.rho(-800.0) == 0.0
    assert scalar.rho_second(800.0) == 0.0


def test_rho_array_matches_log1p_form():
    z = np.linspace(-30, 30, 101)
    np.testing.assert_allclose(scalar.rho(z), np.log1p(np.exp(z)), rtol=1e-14)


def test_logistic_loss_and_label_map():
    assert scalar.logistic_loss(1, 0.0) == pytest.approx(math.log(2))
    # loss with y=1 falls as the output grows
    z = np.linspace(-5, 5, 11)
    assert np.all(np.diff(scalar.logistic_loss(1, z)) < 0)
    assert scalar.label_map(2.0, 1, 0.0) == -1.0


def test_prox_trivial_cases():
    assert scalar.prox_logistic(0.0, 1, 1.7) == 1.7
    assert scalar.prox_logistic(2.0, 1, -1.0) == pytest.approx(0.0, abs=1e-14)


def test_prox_bisection_fixture():
    # value from oracles.prox_bisect(2, 1, 0)
    w = scalar.prox_logistic(2.0, 1, 0.0)
    assert w == pytest.approx(oracles.PROX_2_1_0, abs=1e-10)
    assert abs(w + 2 * (scalar.rho_prime(w) - 1)) < 1e-12


def test_prox_cycling_case_converges():
    # plain bracketed Newton used to bounce between the bracket ends here
    w = scalar.prox_logistic(50.0, 1, -2.74)
    assert abs(scalar.label_map(50.0, 1, w) + 2.74) < 1e-10


@pytest.mark.parametrize("gamma,y", [(-1.0, 1), (math.nan, 0), (1.0, 2), (1.0, 0.5)])
def test_prox_rejects_bad_arguments(gamma, y):
    with pytest.raises(InvalidArgumentError):
        scalar.prox_logistic(gamma, y, 0.0)


def test_prox_ridge_scalar():
    assert scalar.prox_ridge_scalar(1, 1, 2) == 1
    assert scalar.prox_ridge_scalar(0, 5, 3) == 3
    assert scalar.prox_ridge_scalar(2, 3, 9) == pytest.approx(9 / 19)


def test_gaussian_values():
    assert scalar.gaussian_cdf(0.0) == 0.5
    assert scalar.gaussian_pdf(0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)
    assert scalar.gaussian_cdf(1.959964) == pytest.approx(0.975, abs=1e-6)
    assert scalar.gaussian_cdf(1.959964) == pytest.approx(oracles.PHI_1_959964, abs=1e-14)


def test_expect_2d_moments():
    rule = scalar.gauss_hermite_2d()
    assert scalar.expect_2d(rule, lambda a, b: a ** 2) == pytest.approx(1.0, abs=1e-10)
    assert scalar.expect_2d(rule, lambda a, b: scalar.rho_prime(a)) == pytest.approx(0.5, abs=1e-10)


def _prox_integrand(a, b):
    return scalar.rho_prime(-3 * a) * scalar.prox_logistic(1.3, 0, 2 * a + b) ** 2


def test_expect_2d_against_sampling_oracle():
    value = scalar.expect_2d(scalar.gauss_hermite_2d(), _prox_integrand)
    assert value == pytest.approx(oracles.QMC_EXPECT_2D, abs=1e-4)
    mc, se = oracles.MC_EXPECT_2D
    assert abs(value - mc) < 4 * se


def test_expect_2d_reports_bad_node():
    rule = scalar.gauss_hermite_2d(4)
    with pytest.raises(NumericDomainError) as info, np.errstate(invalid="ignore"):
        scalar.expect_2d(rule, lambda a, b: np.log(a))
    assert len(info.value.node) == 2


def test_quadrature_rule_validation():
    with pytest.raises(InvalidArgumentError):
        scalar.QuadratureRule(np.array([0.0]), np.array([-1.0]), "adaptive-1d")
    with pytest.raises(InvalidArgumentError):
        scalar.QuadratureRule(np.array([0.0]), np.array([1.0]), "simpson")


@pytest.mark.parametrize("rule", [scalar.gauss_hermite(64), scalar.gauss_hermite(10),
                                  scalar.clustered_gaussian_rule([(0.3, 0.01)])])
def test_rule_normalisation_and_symmetry(rule):
    assert np.all(rule.weights > 0)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-12)
    if rule.kind == "gauss-hermite-1d":
        assert scalar.expect_1d(rule, lambda z: z) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("n", [5, 10, 20])
def test_gauss_hermite_polynomial_exactness(n):
    rule = scalar.gauss_hermite(n)
    for k in range(2 * n):
        # E[Z^k] = (k-1)!! for even k
        exact = 0.0 if k % 2 else float(math.prod(range(k - 1, 0, -2)))
        got = scalar.expect_1d(rule, lambda z: z ** k)
        scale = scalar.expect_1d(rule, lambda z: np.abs(z) ** k)
        assert abs(got - exact) <= 1e-12 * scale


def test_logistic_normal_branches_agree_near_switch():
    # tau <= 1 uses Hermite nodes, tau > 1 the logistic-variable rule
    for order in (1, 2):
        a = scalar.logistic_normal(0.7, 1.0, order)
        b = scalar.logistic_normal(0.7, 1.0 + 1e-12, order)
        assert a == pytest.approx(b, abs=1e-10)


gammas = st.floats(min_value=1e-6, max_value=50.0)
labels = st.sampled_from([0, 1])
args = st.floats(min_value=-50.0, max_value=50.0)


@settings(max_examples=300, deadline=None)
@given(gammas, labels, args)
def test_prox_optimality(gamma, y, v):
    w = scalar.prox_logistic(gamma, y, v)
    assert abs(scalar.label_map(gamma, y, w) - v) <= 1e-10


def test_prox_optimality_bulk():
    rng = np.random.default_rng(1)
    g = rng.uniform(0, 50, 10_000)
    y = rng.integers(0, 2, 10_000)
    v = rng.uniform(-50, 50, 10_000)
    w = np.array([scalar.prox_logistic(*t) for t in zip(g, y, v)])
    assert np.max(np.abs(w + g * (scalar.rho_prime(w) - y) - v)) <= 1e-10


@settings(max_examples=200, deadline=None)
@given(gammas, args)
def test_prox_label_symmetry(gamma, v):
    assert scalar.prox_logistic(gamma, 0, v) == pytest.approx(
        -scalar.prox_logistic(gamma, 1, -v), abs=1e-10)


@settings(max_examples=200, deadline=None)
@given(gammas, labels, args, st.floats(min_value=1e-3, max_value=10.0))
def test_prox_monotone(gamma, y, v, dv):
    assert scalar.prox_logistic(gamma, y, v) < scalar.prox_logistic(gamma, y, v + dv)


@pytest.mark.parametrize("y", [0, 1])
@pytest.mark.parametrize("v", [-3.0, -1.0, 0.0, 1.5, 3.0])
def test_prox_escapes_as_gamma_grows(y, v):
    # the prox moves toward the label's side and diverges, but only like log(gamma):
    # at gamma=1e4 it sits near 6-9, so the size check is made at 1e6
    sign = 1 if y == 1 else -1
    path = [sign * scalar.prox_logistic(g, y, v) for g in (1, 10, 1e2, 1e3, 1e4, 1e6)]
    assert all(b >= a for a, b in zip(path, path[1:]))
    assert path[-1] > 10
    assert path[-2] == pytest.approx(math.log(1e4), abs=3.5)
