from __future__ import annotations

import math

from rateforge_core.config import build_model, load_preset
from rateforge_core.pricing import SwaptionSpec, TenorStructure, bond_price, initial_curve, short_rate, swaption_eigen_closed
from rateforge_core.specfun import gaussian_quadratic_integral, integrate, std_normal_cdf


def run_smoke_tests() -> None:
    assert round(std_normal_cdf(0.0), 12) == 0.5

    # closed-form Gaussian integral against plain quadrature
    closed = gaussian_quadratic_integral(0.3, 0.7, -0.4, -1.0, 2.0)
    numeric = integrate(
        lambda y: math.exp(-0.4 * y * y) * math.exp(-((y - 0.3) ** 2) / 1.4) / math.sqrt(1.4 * math.pi), (-1.0, 2.0)
    ).value
    assert abs(closed - numeric) < 1e-10

    flat = build_model(load_preset("constant"))
    assert all(p == 1.0 for p in initial_curve(flat, (0.5, 1.0, 5.0)).discounts)

    trace = build_model(load_preset("trace_gauss_heat"))
    expected = (math.sqrt(1.0 / 3.0) + 3.0 * math.sqrt(0.5)) / 4.0
    assert abs(bond_price(trace, 0.0, 1.0, trace.state) - expected) < 1e-14
    assert short_rate(trace, 0.5, trace.state) >= -1e-8

    eigen = build_model(load_preset("eigen_bm"))
    spec = SwaptionSpec(TenorStructure((1.0, 2.0, 3.0)), strike=0.0)
    parity = bond_price(eigen, 0.0, 1.0, eigen.state) - bond_price(eigen, 0.0, 3.0, eigen.state)
    assert abs(swaption_eigen_closed(eigen, spec, 0.0, eigen.state) - parity) < 1e-12


if __name__ == "__main__":
    run_smoke_tests()
    print("rateforge smoke tests passed")
