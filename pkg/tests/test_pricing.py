from __future__ import annotations

import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rateforge_core.errors import DomainError, UnsupportedError
from rateforge_core.kernels import (
    CallableEigen,
    EigenKernel,
    ExpectationKernel,
    ExponentialLinearEigen,
    GaussHeat,
    GaussianH,
    GaussianQuadraticEigen,
    KilledKernel,
    LinearRate,
    Model,
    TraceKernel,
)
from rateforge_core.pricing import (
    DiscountCurve,
    SwaptionSpec,
    TenorStructure,
    bond_option_eigen_closed,
    bond_option_price_mc,
    bond_price,
    derivative_price,
    forward_swap_annuity,
    initial_curve,
    short_rate,
    swap_rate,
    swaption_eigen_closed,
    swaption_price_mc,
)
from rateforge_core.processes import CIR, OU, BrownianDrift, cir_zero_coupon

SPEC = SwaptionSpec(TenorStructure((1.0, 2.0, 3.0)), strike=0.1)


def test_tenor_structure() -> None:
    tenor = TenorStructure((0.5, 1.0, 2.0))
    assert tenor.start == 0.5 and tenor.end == 2.0
    assert tenor.payment_dates == (1.0, 2.0)
    assert tenor.accruals == (0.5, 1.0)
    assert TenorStructure.regular(1.0, 3.0, 0.5).dates == (1.0, 1.5, 2.0, 2.5, 3.0)
    for dates in [(1.0,), (-0.5, 1.0), (1.0, 1.0, 2.0)]:
        with pytest.raises(DomainError):
            TenorStructure(dates)
    with pytest.raises(DomainError):
        SwaptionSpec(tenor, strike=-0.01)


def test_discount_curve_validation() -> None:
    curve = DiscountCurve((0.0, 1.0, 2.0), (1.0, 0.97, 0.93))
    assert curve.zero_yields()[0] == 0.0
    assert curve.zero_yields()[1] == pytest.approx(-math.log(0.97))
    assert curve.rows()[2] == {"T": 2.0, "discount": 0.93, "yield": pytest.approx(-math.log(0.93) / 2.0)}
    with pytest.raises(DomainError):
        DiscountCurve((1.0, 0.5), (0.9, 0.95))
    with pytest.raises(DomainError):
        DiscountCurve((1.0,), (0.0,))
    with pytest.raises(DomainError):
        DiscountCurve((0.0, 1.0), (0.99, 0.95))
    with pytest.raises(DomainError):
        DiscountCurve((1.0, 2.0), (0.95,))


def test_constant_model_discounts_nothing(preset_model) -> None:
    curve = initial_curve(preset_model("constant"), (0.5, 1.0, 5.0))
    assert curve.discounts == (1.0, 1.0, 1.0)


def test_trace_curve_is_decreasing(preset_model) -> None:
    model = preset_model("trace_gauss_heat")
    curve = initial_curve(model, (0.25, 0.5, 1.0, 2.0, 5.0, 10.0))
    assert curve.discounts[2] == pytest.approx((math.sqrt(1.0 / 3.0) + 3.0 * math.sqrt(0.5)) / 4.0, rel=1e-14)
    assert all(b < a for a, b in zip(curve.discounts, curve.discounts[1:]))
    assert bond_price(model, 1.0, 1.0, [0.3]) == 1.0
    with pytest.raises(DomainError):
        bond_price(model, 2.0, 1.0, [0.0])
    with pytest.raises(DomainError):
        bond_price(model, -1.0, 1.0, [0.0])


def test_trace_short_rate_closed_form(preset_model) -> None:
    model = preset_model("trace_gauss_heat")
    lam, c, t = 1.0, 3.0, 0.5
    expected = (1.0 + c / 2.0) / ((1.0 + c) * (lam + t))
    assert short_rate(model, t, [0.0]) == pytest.approx(expected, rel=1e-7)


def test_eigen_short_rate_closed_form(preset_model) -> None:
    model = preset_model("eigen_bm")
    mu, t, x = -0.5, 0.8, 0.4
    weight = math.exp(mu * t) * math.exp(x)
    expected = -2.0 * mu * weight / (1.0 + weight)
    assert short_rate(model, t, [x]) == pytest.approx(expected, rel=1e-7)
    assert short_rate(model, 0.0, [0.0]) == pytest.approx(0.5, rel=1e-7)


def test_killed_short_rate_is_twice_the_killing_rate_at_zero(preset_model) -> None:
    model = preset_model("killed_cir")
    assert short_rate(model, 0.0, [0.03]) == pytest.approx(0.06, rel=1e-6)
    process = CIR(kappa_rev=0.5, theta_mean=0.04, sigma=0.1)
    sim = Model(KilledKernel(rate=LinearRate(), process=process, n=1000), process, (0.03,))
    assert short_rate(sim, 0.0, [0.03]) == pytest.approx(0.06, rel=1e-15)
    with pytest.raises(DomainError):
        short_rate(model, -0.1, [0.03])


def test_simulated_expectation_has_no_short_rate() -> None:
    kernel = ExpectationKernel(h=GaussianH(), process=BrownianDrift(), estimator="mc", n=1000)
    model = Model(kernel, BrownianDrift(), (0.0,))
    with pytest.raises(UnsupportedError):
        short_rate(model, 0.5, [0.0])


def test_killed_mc_bond_matches_closed_form() -> None:
    process = CIR(kappa_rev=0.5, theta_mean=0.04, sigma=0.1)
    kernel = KilledKernel(rate=LinearRate(), process=process, n=40_000, seed=4, grid_step=2.0**-6)
    model = Model(kernel, process, (0.03,))
    price = bond_price(model, 0.0, 1.0, model.state)
    assert price == pytest.approx(cir_zero_coupon(process, 2.0, 0.03), abs=8e-4)
    with pytest.raises(UnsupportedError):
        swaption_price_mc(model, SPEC, 0.0, model.state, n=100)


def test_swap_rate_zeroes_the_payer_leg(preset_model) -> None:
    model = preset_model("eigen_bm")
    tenor = SPEC.tenor
    k = swap_rate(model, 0.0, model.state, tenor)
    leg = bond_price(model, 0.0, 1.0, model.state) - bond_price(model, 0.0, 3.0, model.state)
    annuity = sum(bond_price(model, 0.0, d, model.state) for d in (2.0, 3.0))
    assert forward_swap_annuity(model, 0.0, model.state, tenor) == pytest.approx(annuity, rel=1e-14)
    assert leg - k * annuity == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(DomainError):
        swap_rate(model, 1.5, model.state, tenor)


@pytest.mark.parametrize("name", ["eigen_bm", "eigen_ou"])
def test_zero_strike_swaption_parity_is_exact(preset_model, name: str) -> None:
    model = preset_model(name)
    spec = SwaptionSpec(SPEC.tenor, strike=0.0)
    parity = bond_price(model, 0.0, 1.0, model.state) - bond_price(model, 0.0, 3.0, model.state)
    assert swaption_eigen_closed(model, spec, 0.0, model.state) == pytest.approx(parity, rel=1e-12)


@pytest.mark.parametrize("name", ["eigen_bm", "eigen_ou"])
@pytest.mark.parametrize("strike", [0.05, 0.1, 0.3])
def test_eigen_swaption_closed_form_matches_simulation(preset_model, name: str, strike: float) -> None:
    model = preset_model(name)
    spec = SwaptionSpec(SPEC.tenor, strike=strike)
    closed = swaption_eigen_closed(model, spec, 0.0, model.state)
    est = swaption_price_mc(model, spec, 0.0, model.state, n=200_000, seed=17)
    assert closed >= 0.0
    assert abs(est.z_score(closed)) <= 4.0


def test_swaption_mc_does_not_depend_on_workers(preset_model) -> None:
    model = preset_model("trace_cauchy")
    serial = swaption_price_mc(model, SPEC, 0.0, model.state, n=40_000, seed=2, workers=1)
    threaded = swaption_price_mc(model, SPEC, 0.0, model.state, n=40_000, seed=2, workers=3)
    assert serial == threaded


def test_swaption_guards(preset_model) -> None:
    trace = preset_model("trace_gauss_heat")
    with pytest.raises(UnsupportedError):
        swaption_eigen_closed(trace, SPEC, 0.0, trace.state)
    eigen = preset_model("eigen_bm")
    with pytest.raises(DomainError):
        swaption_eigen_closed(eigen, SPEC, 1.5, eigen.state)
    with pytest.raises(DomainError):
        swaption_price_mc(eigen, SPEC, 1.5, eigen.state, n=100)


def test_eigen_swaption_without_closed_form_falls_back_to_simulation(caplog) -> None:
    drift = BrownianDrift(kappa=(1.0,))
    g = CallableEigen(fn=lambda y: np.exp(y[:, 0]))
    model = Model(EigenKernel(mu=-0.5, g=g), drift, (0.0,), check_seed=1)
    with caplog.at_level(logging.WARNING, logger="rateforge_core.pricing"):
        price = swaption_eigen_closed(model, SPEC, 0.0, model.state, n=20_000, seed=6)
    assert price == swaption_price_mc(model, SPEC, 0.0, model.state, n=20_000, seed=6).mean
    assert "Monte Carlo" in caplog.text


@pytest.mark.parametrize("name", ["eigen_bm", "eigen_ou"])
@pytest.mark.parametrize("strike", [0.5, 0.9])
def test_bond_option_closed_form_matches_simulation(preset_model, name: str, strike: float) -> None:
    model = preset_model(name)
    closed = bond_option_eigen_closed(model, 1.0, 2.0, strike)
    est = bond_option_price_mc(model, 1.0, 2.0, strike, n=200_000, seed=23)
    assert closed >= 0.0
    assert abs(est.z_score(closed)) <= 4.0


def test_bond_option_guards(preset_model) -> None:
    model = preset_model("eigen_bm")
    with pytest.raises(DomainError):
        bond_option_eigen_closed(model, 1.0, 2.0, -0.1)
    with pytest.raises(DomainError):
        bond_option_price_mc(model, 1.0, 2.0, -0.1, n=100)
    with pytest.raises(UnsupportedError):
        bond_option_eigen_closed(preset_model("affine_cir"), 1.0, 2.0, 0.5)


@pytest.mark.parametrize("name", ["affine_cir", "trace_quad_gauss", "weighted_exp"])
def test_linear_claim_reprices_the_bond(preset_model, name: str) -> None:
    model = preset_model(name)
    est = derivative_price(model, lambda bonds: bonds, 1.0, 3.0, n=40_000, seed=31)
    assert abs(est.z_score(bond_price(model, 0.0, 3.0, model.state))) <= 4.0


@given(
    st.floats(min_value=0.1, max_value=5.0),
    st.floats(min_value=2.01, max_value=20.0),
    st.floats(min_value=0.01, max_value=30.0),
    st.floats(min_value=-2.0, max_value=2.0),
)
@settings(max_examples=60, deadline=None)
def test_trace_bond_prices_are_discount_factors(lam: float, c: float, T: float, x: float) -> None:
    model = Model(TraceKernel(GaussHeat(), lam, c), BrownianDrift(), (x,))
    near = bond_price(model, 0.0, T, model.state)
    far = bond_price(model, 0.0, 1.5 * T, model.state)
    assert 0.0 < far <= near <= 1.0


def _random_eigen_models(count: int, seed: int) -> list[Model]:
    rng = np.random.default_rng(seed)
    models = []
    for _ in range(count):
        c = float(rng.uniform(0.3, 1.2))
        drift = BrownianDrift(kappa=(c * float(rng.uniform(0.7, 1.5)),))
        g = ExponentialLinearEigen(c=(c,))
        models.append(Model(EigenKernel(mu=g.eigenvalue(drift), g=g), drift, (float(rng.uniform(-0.5, 0.5)),)))
        speed = float(rng.uniform(-1.5, -0.2))
        models.append(Model(EigenKernel(mu=speed, g=GaussianQuadraticEigen(coefficient=speed)), OU(mu_speed=speed), (float(rng.uniform(-1.0, 1.0)),)))
    return models


@pytest.mark.parametrize("model", _random_eigen_models(3, seed=101))
def test_eigen_closed_forms_match_simulation_off_preset(model: Model) -> None:
    rng = np.random.default_rng(7)
    spec = SwaptionSpec(SPEC.tenor, strike=float(rng.uniform(0.0, 0.3)))
    closed = swaption_eigen_closed(model, spec, 0.0, model.state)
    est = swaption_price_mc(model, spec, 0.0, model.state, n=100_000, seed=41)
    assert abs(est.z_score(closed)) <= 4.5
    strike = float(rng.uniform(0.3, 0.95))
    closed = bond_option_eigen_closed(model, 1.0, 2.0, strike)
    est = bond_option_price_mc(model, 1.0, 2.0, strike, n=100_000, seed=43)
    assert abs(est.z_score(closed)) <= 4.5


@pytest.mark.parametrize("name", ["eigen_bm", "eigen_ou"])
def test_closed_swaption_price_is_nonincreasing_in_strike(preset_model, name: str) -> None:
    model = preset_model(name)
    strikes = np.linspace(0.0, 0.5, 11)
    prices = [swaption_eigen_closed(model, SwaptionSpec(SPEC.tenor, strike=float(k)), 0.0, model.state) for k in strikes]
    assert all(b <= a + 1e-14 for a, b in zip(prices, prices[1:]))
    assert prices[-1] < prices[0]


@pytest.mark.parametrize("name", ["eigen_bm", "trace_cauchy", "trace_vg"])
def test_simulated_swaption_price_is_nonincreasing_in_strike(preset_model, name: str) -> None:
    model = preset_model(name)
    means = [
        swaption_price_mc(model, SwaptionSpec(SPEC.tenor, strike=k), 0.0, model.state, n=20_000, seed=3).mean
        for k in (0.0, 0.05, 0.1, 0.2, 0.4)
    ]
    # common draws, so the payoff is pointwise nonincreasing in the strike
    assert all(b <= a + 1e-12 for a, b in zip(means, means[1:]))
    assert means[-1] < means[0]
