"""Bond, short-rate, swap and swaption pricing on top of a kernel model.

All prices are ratios E[π_T · payoff | X_t] / π_t; the conditional state price
density comes from ``Kernel.conditional`` so trace, weighted and killed models
need no special casing beyond path factors.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from . import mc
from .errors import DomainError, UnsupportedError
from .kernels import (
    DEFAULT_MC_PATHS,
    EigenKernel,
    ExpectationKernel,
    ExponentialLinearEigen,
    GaussianQuadraticEigen,
    KilledKernel,
    Model,
)
from .mc import MCEstimate
from .processes import OU, BrownianDrift, conditional_moments, sample_transition, simulate_grid
from .specfun import bs_integral, gaussian_quadratic_integral

logger = logging.getLogger(__name__)

DERIVATIVE_STEP = 1e-5


@dataclass(frozen=True)
class TenorStructure:
    """Swap dates T_alpha < ... < T_beta; payments fall on every date after T_alpha."""

    dates: tuple[float, ...]

    def __post_init__(self) -> None:
        dates = tuple(float(d) for d in self.dates)
        object.__setattr__(self, "dates", dates)
        if len(dates) < 2:
            raise DomainError(f"a tenor structure needs at least two dates (got {len(dates)})")
        if dates[0] < 0:
            raise DomainError(f"tenor dates must be non-negative (got {dates[0]})")
        if any(b <= a for a, b in zip(dates, dates[1:])):
            raise DomainError(f"tenor dates must be strictly increasing (got {dates})")

    @property
    def start(self) -> float:
        return self.dates[0]

    @property
    def end(self) -> float:
        return self.dates[-1]

    @property
    def payment_dates(self) -> tuple[float, ...]:
        return self.dates[1:]

    @property
    def accruals(self) -> tuple[float, ...]:
        return tuple(b - a for a, b in zip(self.dates, self.dates[1:]))

    @classmethod
    def regular(cls, start: float, end: float, step: float) -> TenorStructure:
        count = max(1, round((end - start) / step))
        return cls(tuple(float(v) for v in np.linspace(start, end, count + 1)))


@dataclass(frozen=True)
class SwaptionSpec:
    tenor: TenorStructure
    strike: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.strike) and self.strike >= 0):
            raise DomainError(f"swaption strike must be non-negative (got {self.strike})")


@dataclass(frozen=True)
class DiscountCurve:
    maturities: tuple[float, ...]
    discounts: tuple[float, ...]

    def __post_init__(self) -> None:
        mats = tuple(float(m) for m in self.maturities)
        disc = tuple(float(p) for p in self.discounts)
        object.__setattr__(self, "maturities", mats)
        object.__setattr__(self, "discounts", disc)
        if len(mats) != len(disc) or not mats:
            raise DomainError(f"discount curve needs matching non-empty columns (got {len(mats)} and {len(disc)})")
        if any(m < 0 for m in mats) or any(b <= a for a, b in zip(mats, mats[1:])):
            raise DomainError("discount curve maturities must be non-negative and strictly increasing")
        if any(not (math.isfinite(p) and p > 0) for p in disc):
            raise DomainError("discount factors must be finite and positive")
        if mats[0] == 0.0 and not math.isclose(disc[0], 1.0, rel_tol=0, abs_tol=1e-12):
            raise DomainError(f"P(0) must equal 1 (got {disc[0]})")

    def zero_yields(self) -> tuple[float, ...]:
        return tuple(0.0 if m == 0 else -math.log(p) / m for m, p in zip(self.maturities, self.discounts))

    def rows(self) -> list[dict[str, float]]:
        return [
            {"T": m, "discount": p, "yield": y}
            for m, p, y in zip(self.maturities, self.discounts, self.zero_yields())
        ]


def _check_times(t: float, T: float) -> None:
    if t < 0:
        raise DomainError(f"t must be non-negative (got {t})")
    if T < t:
        raise DomainError(f"maturity must not precede valuation time (t={t}, T={T})")


def _mc_kernel(model: Model) -> bool:
    return not model.kernel.exact


def bond_price(
    model: Model, t: float, T: float, x_t: Any, n: int | None = None, seed: int | None = None, workers: int = 1
) -> float:
    """P(t, T) = E[π_T | X_t = x_t] / π_t."""
    _check_times(t, T)
    if T == t:
        return 1.0
    kernel = model.kernel
    if _mc_kernel(model):
        # common paths for numerator and denominator
        num, den = kernel.joint(x_t, (2.0 * T - t, t), n=n, seed=seed, workers=workers)
        return num.mean / den.mean
    price = float(kernel.conditional(t, T, x_t)) / float(kernel.value(t, x_t))
    if not (math.isfinite(price) and price > 0):
        raise DomainError(f"bond price is not positive at t={t}, T={T}: {price}")
    return price


def initial_curve(model: Model, maturities: Any, n: int | None = None, seed: int | None = None, workers: int = 1) -> DiscountCurve:
    mats = tuple(float(m) for m in maturities)
    discounts = tuple(bond_price(model, 0.0, m, model.state, n=n, seed=seed, workers=workers) for m in mats)
    return DiscountCurve(maturities=mats, discounts=discounts)


def _richardson(derivative: Callable[[float], float], h: float, order: int) -> float:
    coarse = derivative(h)
    fine = derivative(h / 2.0)
    return (2**order * fine - coarse) / (2**order - 1)


def short_rate(model: Model, t: float, x_t: Any, n: int | None = None, seed: int | None = None, workers: int = 1) -> float:
    """r_t = -∂_T log E[π_T | X_t = x_t] at T = t."""
    if t < 0:
        raise DomainError(f"t must be non-negative (got {t})")
    kernel = model.kernel
    if isinstance(kernel, KilledKernel) and not kernel.exact:
        # ∂_T q(2T - t) at T = t is -2·E[V(X_t) e^{-∫V}]
        if t == 0:
            return 2.0 * float(kernel.rate_at(x_t))
        mass, flow = kernel.joint(x_t, (t,), n=n, seed=seed, workers=workers, with_rate=True)
        return 2.0 * flow.mean / mass.mean
    if isinstance(kernel, ExpectationKernel) and not kernel.exact:
        raise UnsupportedError("short rates need an exactly evaluable kernel; use a closed or quadrature estimator")

    def log_cond(T: float) -> float:
        value = float(kernel.conditional(t, T, x_t))
        if not value > 0:
            raise DomainError(f"conditional state price density is not positive at T={T}")
        return math.log(value)

    base = log_cond(t)
    h = DERIVATIVE_STEP
    try:
        slope = _richardson(lambda step: (log_cond(t + step) - log_cond(t - step)) / (2.0 * step), h, 2)
    except (DomainError, ValueError):
        logger.debug("central difference left the kernel domain at t=%s; using one-sided", t)
        slope = _richardson(lambda step: (log_cond(t + step) - base) / step, h, 1)
    if not math.isfinite(slope):
        raise DomainError(f"short rate derivative is not finite at t={t}")
    return -slope


def forward_swap_annuity(model: Model, t: float, x_t: Any, tenor: TenorStructure) -> float:
    """Σ tau_i P(t, T_i) over the payment dates."""
    if t > tenor.start:
        raise DomainError(f"swap must start at or after t (t={t}, T_alpha={tenor.start})")
    return sum(tau * bond_price(model, t, d, x_t) for tau, d in zip(tenor.accruals, tenor.payment_dates))


def swap_rate(model: Model, t: float, x_t: Any, tenor: TenorStructure) -> float:
    """Forward swap rate (P(t,T_alpha) - P(t,T_beta)) / Σ tau_i P(t,T_i)."""
    annuity = forward_swap_annuity(model, t, x_t, tenor)
    return (bond_price(model, t, tenor.start, x_t) - bond_price(model, t, tenor.end, x_t)) / annuity


def _swaption_payoff(model: Model, spec: SwaptionSpec, states: np.ndarray) -> np.ndarray:
    """π_{T_alpha}·(1 - P(T_alpha,T_beta) - K Σ tau_i P(T_alpha,T_i))^+ up to the path factor."""
    kernel = model.kernel
    ta = spec.tenor.start
    leg = np.asarray(kernel.conditional(ta, ta, states), dtype=float) - np.asarray(
        kernel.conditional(ta, spec.tenor.end, states), dtype=float
    )
    for tau, d in zip(spec.tenor.accruals, spec.tenor.payment_dates):
        leg = leg - spec.strike * tau * np.asarray(kernel.conditional(ta, d, states), dtype=float)
    return np.maximum(leg, 0.0)


def _forward_draws(model: Model, x_t: Any, t: float, horizon: float, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
    """States at ``horizon`` given X_t = x_t plus the path factor exp(-∫_t^horizon V)."""
    kernel = model.kernel
    start = np.atleast_1d(np.asarray(x_t, dtype=float))
    if horizon == t:
        return np.broadcast_to(start, (size, start.size)).copy(), np.ones(size)
    if isinstance(kernel, KilledKernel):
        grid = kernel.time_grid(horizon - t)
        paths = simulate_grid(model.process, start, grid, rng, size)
        return paths[:, -1, :], kernel.discount_samples(paths, grid)[:, -1]
    return sample_transition(model.process, start, horizon - t, rng, size=size), np.ones(size)


def _require_exact(model: Model, what: str) -> None:
    if _mc_kernel(model):
        raise UnsupportedError(f"{what} needs an exactly evaluable kernel, {model.kernel.tag} uses Monte Carlo")


def swaption_price_mc(
    model: Model, spec: SwaptionSpec, t: float, x_t: Any, n: int = DEFAULT_MC_PATHS, seed: int = 0, workers: int = 1
) -> MCEstimate:
    _require_exact(model, "swaption pricing")
    if t > spec.tenor.start:
        raise DomainError(f"swaption expiry {spec.tenor.start} precedes valuation time {t}")
    pi_t = float(model.kernel.value(t, x_t))

    def sampler(rng: np.random.Generator, size: int) -> np.ndarray:
        states, factor = _forward_draws(model, x_t, t, spec.tenor.start, rng, size)
        return factor * _swaption_payoff(model, spec, states) / pi_t

    return mc.run_chunks(sampler, n, seed, workers=workers)


def _positive_call(model: Model, a: float, b: float, x: np.ndarray, tau: float) -> float | None:
    """E[(a·g(Y) - b)^+] for a > 0, b > 0, tau > 0."""
    g = model.kernel.g
    process = model.process
    if isinstance(process, BrownianDrift) and isinstance(g, ExponentialLinearEigen):
        c = np.asarray(g.c)
        return bs_integral(
            a * math.exp(float(c @ x)),
            b,
            math.sqrt(float(c @ c) * tau),
            -float(c @ np.asarray(process.kappa)) * tau,
        )
    if isinstance(process, OU) and isinstance(g, GaussianQuadraticEigen) and process.dim == 1:
        mean, var = conditional_moments(process, x, tau)
        m, v, mu = float(mean[0]), float(var[0]), g.coefficient
        if b >= a:
            return 0.0  # g <= 1
        r = math.sqrt(math.log(b / a) / mu)
        return a * gaussian_quadratic_integral(m, v, mu, -r, r) - b * gaussian_quadratic_integral(m, v, 0.0, -r, r)
    return None


def _eigen_call(model: Model, a: float, b: float, t: float, horizon: float, x_t: Any) -> float | None:
    """E[(a·g(Y) - b)^+] with Y = X_horizon given X_t = x_t, or None without a closed form."""
    kernel = model.kernel
    x = np.atleast_1d(np.asarray(x_t, dtype=float))
    g_x = float(kernel.g(x.reshape(1, -1))[0])
    tau = horizon - t
    if tau == 0:
        return max(a * g_x - b, 0.0)
    mean_g = math.exp(kernel.mu * tau) * g_x
    if a >= 0 and b <= 0:
        return a * mean_g - b
    if a <= 0 and b >= 0:
        return 0.0
    if a < 0:
        # (|b| - |a| g)^+ by put-call parity
        call = _positive_call(model, -a, -b, x, tau)
        return None if call is None else max(call + a * mean_g - b, 0.0)
    return _positive_call(model, a, b, x, tau)


def swaption_eigen_closed(
    model: Model, spec: SwaptionSpec, t: float, x_t: Any, n: int = DEFAULT_MC_PATHS, seed: int = 0
) -> float:
    """Eigenfunction-model swaption (1 + e^{mu t} g(x))^{-1} E[(A g(Y) - B)^+].

    Pairings without a closed form fall back to ``swaption_price_mc``.
    """
    kernel = model.kernel
    if not isinstance(kernel, EigenKernel):
        raise UnsupportedError(f"eigen closed form needs an eigen kernel, not {kernel.tag}")
    if t > spec.tenor.start:
        raise DomainError(f"swaption expiry {spec.tenor.start} precedes valuation time {t}")
    mu = kernel.mu
    ta, tb, strike = spec.tenor.start, spec.tenor.end, spec.strike
    a = math.exp(mu * ta) - math.exp(mu * (2.0 * tb - ta))
    a -= strike * sum(tau * math.exp(mu * (2.0 * d - ta)) for tau, d in zip(spec.tenor.accruals, spec.tenor.payment_dates))
    b = strike * (tb - ta)
    expectation = _eigen_call(model, a, b, t, ta, x_t)
    if expectation is None:
        logger.warning(
            "no closed form for %s eigenfunction under %s; pricing the swaption by Monte Carlo",
            kernel.g.tag,
            model.process.tag,
        )
        return swaption_price_mc(model, spec, t, x_t, n=n, seed=seed).mean
    return expectation / float(kernel.value(t, x_t))


def bond_option_eigen_closed(model: Model, t: float, T: float, strike: float) -> float:
    """Time-0 price of the call (P(t,T) - K)^+ paid at t in an eigenfunction model."""
    kernel = model.kernel
    if not isinstance(kernel, EigenKernel):
        raise UnsupportedError(f"eigen closed form needs an eigen kernel, not {kernel.tag}")
    _check_times(t, T)
    if strike < 0:
        raise DomainError(f"strike must be non-negative (got {strike})")
    # π_t·(P - K) = (1 - K) + (e^{mu(2T-t)} - K e^{mu t})·g(X_t)
    mu = kernel.mu
    a = math.exp(mu * (2.0 * T - t)) - strike * math.exp(mu * t)
    expectation = _eigen_call(model, a, strike - 1.0, 0.0, t, model.state)
    if expectation is None:
        raise UnsupportedError(f"no closed form for {kernel.g.tag} under {model.process.tag}")
    return expectation / float(kernel.value(0.0, model.state))


def derivative_price(
    model: Model,
    payoff: Callable[[np.ndarray], Any],
    t: float,
    T: float,
    n: int = DEFAULT_MC_PATHS,
    seed: int = 0,
    workers: int = 1,
) -> MCEstimate:
    """Time-0 price (1/π_0)·E[π_t·G(P(t,T))] of a claim paid at t on the T-bond."""
    _require_exact(model, "derivative pricing")
    _check_times(t, T)
    kernel = model.kernel
    pi_0 = float(kernel.value(0.0, model.state))

    def sampler(rng: np.random.Generator, size: int) -> np.ndarray:
        states, factor = _forward_draws(model, model.state, 0.0, t, rng, size)
        pi_t = np.asarray(kernel.value(t, states), dtype=float)
        bonds = np.asarray(kernel.conditional(t, T, states), dtype=float) / pi_t
        claim = np.broadcast_to(np.asarray(payoff(bonds), dtype=float), (size,))
        return factor * pi_t * claim / pi_0

    return mc.run_chunks(sampler, n, seed, workers=workers)


def bond_option_price_mc(
    model: Model, t: float, T: float, strike: float, n: int = DEFAULT_MC_PATHS, seed: int = 0, workers: int = 1
) -> MCEstimate:
    if strike < 0:
        raise DomainError(f"strike must be non-negative (got {strike})")
    return derivative_price(model, lambda bonds: np.maximum(bonds - strike, 0.0), t, T, n=n, seed=seed, workers=workers)
