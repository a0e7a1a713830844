from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from rateforge_core.errors import DomainError, QuadratureError, SpecialFunctionError
from rateforge_core.specfun import (
    QuadratureSpec,
    bessel_k,
    bessel_k_integral,
    bs_integral,
    gaussian_quadratic_integral,
    integrate,
    integrate_vec,
    _log_bessel_k_debye,
    log_bessel_k,
    std_normal_cdf,
    std_normal_pdf,
)


def _normal_density(y: float, m: float, v: float) -> float:
    return math.exp(-((y - m) ** 2) / (2.0 * v)) / math.sqrt(2.0 * math.pi * v)


@given(st.floats(min_value=-40.0, max_value=40.0, allow_nan=False))
@settings(max_examples=100)
def test_normal_cdf_symmetry(x: float) -> None:
    assert math.isclose(std_normal_cdf(x) + std_normal_cdf(-x), 1.0, rel_tol=0.0, abs_tol=1e-15)


def test_normal_cdf_known_values() -> None:
    assert std_normal_cdf(0.0) == 0.5
    assert math.isclose(std_normal_cdf(1.959963984540054), 0.975, rel_tol=1e-12)
    # deepest tail still inside double range; Φ(-40) underflows to 0
    assert math.isclose(std_normal_cdf(-37.0), std_normal_pdf(37.0) / 37.0 * (1.0 - 1.0 / 37.0**2), rel_tol=1e-5)
    assert math.isclose(std_normal_pdf(0.0), 1.0 / math.sqrt(2.0 * math.pi), rel_tol=1e-15)
    values = std_normal_cdf(np.array([-1.0, 0.0, 1.0]))
    assert values.shape == (3,)


def test_bs_integral_matches_quadrature() -> None:
    a, b, c, d = 1.3, 1.1, 0.4, -0.05

    def integrand(z: float) -> float:
        return max(a * math.exp(c * z + d) - b, 0.0) * std_normal_pdf(z)

    strike_z = (math.log(b / a) - d) / c
    numeric = integrate(integrand, (strike_z, math.inf)).value
    assert math.isclose(bs_integral(a, b, c, d), numeric, rel_tol=1e-9)


def test_bs_integral_edge_cases() -> None:
    assert bs_integral(0.0, 1.0, 0.3, 0.0) == 0.0
    assert math.isclose(bs_integral(2.0, 0.0, 0.5, 0.1), 2.0 * math.exp(0.1 + 0.125), rel_tol=1e-15)
    assert bs_integral(1.0, 2.0, 0.0, 0.0) == 0.0
    assert math.isclose(bs_integral(3.0, 1.0, 0.0, 0.0), 2.0)
    # the sign of c does not matter for a symmetric Z
    assert math.isclose(bs_integral(1.0, 1.0, -0.3, 0.0), bs_integral(1.0, 1.0, 0.3, 0.0), rel_tol=1e-14)
    with pytest.raises(DomainError):
        bs_integral(-1.0, 1.0, 0.3, 0.0)


@given(
    st.floats(min_value=0.1, max_value=5.0),
    st.floats(min_value=0.1, max_value=5.0),
    st.floats(min_value=0.05, max_value=2.0),
    st.floats(min_value=-1.0, max_value=1.0),
)
@settings(max_examples=60)
def test_bs_integral_monotone(a: float, b: float, c: float, d: float) -> None:
    base = bs_integral(a, b, c, d)
    assert base >= 0.0
    assert bs_integral(a * 1.1, b, c, d) >= base - 1e-10
    assert bs_integral(a, b * 1.1, c, d) <= base + 1e-10
    # a call is worth at least its forward intrinsic value
    assert base >= a * math.exp(d + 0.5 * c * c) - b - 1e-10


@given(
    st.floats(min_value=-2.0, max_value=2.0),
    st.floats(min_value=0.05, max_value=3.0),
    st.floats(min_value=-2.0, max_value=0.0),
    st.floats(min_value=-3.0, max_value=3.0),
    st.floats(min_value=0.0, max_value=3.0),
)
@settings(max_examples=60, deadline=None)
def test_gaussian_quadratic_integral_matches_quadrature(m: float, v: float, mu: float, a: float, width: float) -> None:
    b = a + width
    closed = gaussian_quadratic_integral(m, v, mu, a, b)
    numeric = integrate(lambda y: math.exp(mu * y * y) * _normal_density(y, m, v), (a, b)).value
    assert abs(closed - numeric) <= 1e-10


@given(
    st.floats(min_value=-2.0, max_value=2.0),
    st.floats(min_value=0.05, max_value=3.0),
    st.floats(min_value=-2.0, max_value=0.0),
    st.floats(min_value=-3.0, max_value=0.0),
    st.floats(min_value=0.0, max_value=3.0),
)
@settings(max_examples=60)
def test_gaussian_quadratic_integral_additive(m: float, v: float, mu: float, a: float, b: float) -> None:
    whole = gaussian_quadratic_integral(m, v, mu, a, b + 1.0)
    split = gaussian_quadratic_integral(m, v, mu, a, b) + gaussian_quadratic_integral(m, v, mu, b, b + 1.0)
    assert math.isclose(whole, split, rel_tol=1e-12, abs_tol=1e-13)


def test_gaussian_quadratic_integral_whole_line_and_limits() -> None:
    m, v, mu = 0.4, 0.8, -0.7
    shrink = 1.0 - 2.0 * mu * v
    expected = math.exp(mu * m * m / shrink) / math.sqrt(shrink)
    assert math.isclose(gaussian_quadratic_integral(m, v, mu), expected, rel_tol=1e-14)
    # mu = 0 is the probability of the interval
    prob = std_normal_cdf((1.0 - m) / math.sqrt(v)) - std_normal_cdf((-1.0 - m) / math.sqrt(v))
    assert math.isclose(gaussian_quadratic_integral(m, v, 0.0, -1.0, 1.0), prob, rel_tol=1e-14)
    assert gaussian_quadratic_integral(m, v, mu, 0.5, 0.5) == 0.0
    with pytest.raises(DomainError):
        gaussian_quadratic_integral(m, 0.0, mu)
    with pytest.raises(DomainError):
        gaussian_quadratic_integral(m, v, 0.1)
    with pytest.raises(DomainError):
        gaussian_quadratic_integral(m, v, mu, 1.0, 0.0)


@pytest.mark.parametrize("p", [0.0, 0.5, 1.0, 2.5])
@pytest.mark.parametrize("x", [0.05, 0.7, 3.0, 25.0])
def test_bessel_k_matches_scipy(p: float, x: float) -> None:
    assert math.isclose(bessel_k(p, x), float(special.kv(p, x)), rel_tol=1e-12)


@pytest.mark.parametrize("p", [0.0, 0.5, 1.5])
@pytest.mark.parametrize("x", [0.7, 3.0, 25.0])
def test_bessel_k_matches_integral_representation(p: float, x: float) -> None:
    assert math.isclose(bessel_k(p, x), bessel_k_integral(p, x), rel_tol=1e-8)


def test_log_bessel_k_survives_where_bessel_k_underflows() -> None:
    x = 1e4
    expected = 0.5 * math.log(math.pi / (2.0 * x)) - x
    assert math.isclose(log_bessel_k(0.5, x), expected, rel_tol=1e-12)
    with pytest.raises(SpecialFunctionError):
        bessel_k(0.5, x)
    with pytest.raises(DomainError):
        log_bessel_k(1.0, 0.0)
    with pytest.raises(DomainError):
        bessel_k_integral(1.0, -1.0)


@pytest.mark.parametrize("p", [0.5, 2.5, 40.0])
@pytest.mark.parametrize("x", [0.1, 3.0])
def test_bessel_k_is_even_in_the_order(p: float, x: float) -> None:
    assert log_bessel_k(-p, x) == log_bessel_k(p, x)
    assert math.isclose(bessel_k(-p, x), float(special.kv(-p, x)), rel_tol=1e-12)


@pytest.mark.parametrize("p", [100.0, 300.0])
@pytest.mark.parametrize("x", [100.0, 400.0])
def test_large_order_expansion_agrees_with_scipy_in_range(p: float, x: float) -> None:
    exact = math.log(float(special.kve(p, x))) - x
    assert math.isclose(_log_bessel_k_debye(p, np.array(x)), exact, rel_tol=0.0, abs_tol=1e-8)


def test_log_bessel_k_at_large_order_and_small_argument() -> None:
    p, x = 360.1, 0.87
    assert not math.isfinite(float(special.kv(p, x)))
    logs = [log_bessel_k(q, x) for q in (p - 1.0, p, p + 1.0)]
    assert all(math.isfinite(v) for v in logs)
    assert log_bessel_k(-p, x) == logs[1]
    # K_{p+1}(x) = K_{p-1}(x) + (2p/x) K_p(x)
    recurrence = np.logaddexp(logs[0], math.log(2.0 * p / x) + logs[1])
    assert math.isclose(logs[2], recurrence, rel_tol=0.0, abs_tol=1e-8)
    # leading small-argument behaviour: K_p(x) ~ ½ Γ(p) (2/x)^p
    leading = math.log(0.5) + special.gammaln(p) + p * math.log(2.0 / x)
    assert math.isclose(logs[1], leading, rel_tol=0.0, abs_tol=1e-2)
    with pytest.raises(SpecialFunctionError):
        bessel_k(p, x)


def test_integrate_semi_infinite_and_whole_line() -> None:
    exp_tail = integrate(lambda x: math.exp(-x), (0.0, math.inf))
    assert math.isclose(exp_tail.value, 1.0, rel_tol=1e-10)
    assert exp_tail.upper_bound is not None and exp_tail.upper_bound >= 50.0
    assert math.isclose(integrate(std_normal_pdf, (-math.inf, math.inf)).value, 1.0, rel_tol=1e-10)
    assert math.isclose(integrate(std_normal_pdf, (-math.inf, 0.0)).value, 0.5, rel_tol=1e-10)
    assert integrate(math.exp, (1.0, 1.0)).value == 0.0


def test_integrate_rejects_bad_domains_and_slow_tails() -> None:
    with pytest.raises(DomainError):
        integrate(math.exp, (1.0, 0.0))
    with pytest.raises(QuadratureError):
        integrate(lambda x: 1.0 / (1.0 + x), (0.0, math.inf))


def test_integrate_vec_componentwise() -> None:
    result = integrate_vec(lambda x: np.array([math.exp(-x), 2.0 * math.exp(-2.0 * x)]), (0.0, math.inf))
    assert np.allclose(result.value, [1.0, 1.0], rtol=1e-9)


def test_quadrature_spec_validation() -> None:
    with pytest.raises(DomainError):
        QuadratureSpec(rule="simpson")
    with pytest.raises(DomainError):
        QuadratureSpec(abs_tol=0.0)
    with pytest.raises(DomainError):
        QuadratureSpec(max_subdivisions=0)
