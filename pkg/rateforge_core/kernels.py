"""Propagation-property kernels p(t, x) and the state price densities built on them.

Every kernel exposes

* ``value(t, x)``: p(t, x) for one state ``(d,)`` or a batch ``(n, d)``;
  Monte Carlo backed kernels return an ``MCEstimate`` for a single state;
* ``conditional(t, T, x)``: E[π_T | X_t = x] with any path factor
  accumulated before t divided out. Bonds, swaptions and the no-arbitrage
  checks are all written in terms of this one primitive.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, ClassVar

import numpy as np
from scipy import special

from . import mc
from .errors import DomainError, UnsupportedError
from .mc import MCEstimate
from .processes import (
    CIR,
    OU,
    BrownianDrift,
    Cauchy,
    GammaSubordinator,
    IGSubordinator,
    NIGWiener,
    ProcessSpec,
    VGWiener,
    cir_exp_transform,
    cir_zero_coupon,
    conditional_moments,
    is_driftless_symmetric,
    simulate_grid,
    transition_density,
)
from .specfun import DEFAULT_QUADRATURE, QuadratureResult, QuadratureSpec, integrate, integrate_vec, log_bessel_k

logger = logging.getLogger(__name__)

DEFAULT_GRID_STEP = 2.0**-8
DEFAULT_MC_PATHS = 100_000
EIGEN_SPOT_CHECKS = 5
EIGEN_SPOT_PATHS = 20_000
WEIGHT_SAMPLES = 256


def _rows(x: Any, dim: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim <= 1
    rows = arr.reshape(-1, dim)
    return rows, single


def _out(values: np.ndarray, single: bool) -> Any:
    return float(values[0]) if single else values


def _need_single(x: Any, dim: int, what: str) -> np.ndarray:
    rows, single = _rows(x, dim)
    if not single:
        raise UnsupportedError(f"{what} evaluates one state at a time")
    return rows[0]


# ---------------------------------------------------------------------------
# function families carried by the kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantH:
    tag: ClassVar[str] = "constant"
    level: float = 1.0

    def __post_init__(self) -> None:
        if not self.level > 0:
            raise DomainError(f"constant h must be positive (got {self.level})")

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return np.full(len(y), self.level)

    def expectation(self, process: ProcessSpec, t: float, xs: np.ndarray) -> np.ndarray | None:
        return np.full(len(xs), self.level)


@dataclass(frozen=True)
class GaussianH:
    """h(y) = exp(-a·|y|²)."""

    tag: ClassVar[str] = "gaussian"
    a: float = 1.0

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise DomainError(f"gaussian h needs a > 0 (got {self.a})")

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return np.exp(-self.a * np.sum(y * y, axis=1))

    def expectation(self, process: ProcessSpec, t: float, xs: np.ndarray) -> np.ndarray | None:
        if not isinstance(process, (BrownianDrift, OU)):
            return None
        if t == 0:
            return self(xs)
        mean, var = conditional_moments(process, xs, t)
        v = float(var[0])
        shrink = 1.0 + 2.0 * self.a * v
        return shrink ** (-process.dim / 2.0) * np.exp(-self.a * np.sum(mean * mean, axis=1) / shrink)


@dataclass(frozen=True)
class ExponentialH:
    """h(y) = exp(u·y) with u <= 0, bounded on the CIR state space."""

    tag: ClassVar[str] = "exponential"
    u: float = -1.0

    def __post_init__(self) -> None:
        if self.u > 0:
            raise DomainError(f"exponential h needs u <= 0 (got {self.u})")

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return np.exp(self.u * y[:, 0])

    def expectation(self, process: ProcessSpec, t: float, xs: np.ndarray) -> np.ndarray | None:
        if not isinstance(process, CIR):
            return None
        return np.asarray(cir_exp_transform(process, self.u, t, xs[:, 0]), dtype=float).reshape(-1)


@dataclass(frozen=True)
class CallableH:
    tag: ClassVar[str] = "callable"
    fn: Callable[[np.ndarray], np.ndarray] = field(compare=False, default=lambda y: np.ones(len(y)))

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(y), dtype=float).reshape(-1)

    def expectation(self, process: ProcessSpec, t: float, xs: np.ndarray) -> np.ndarray | None:
        return None


HFunction = ConstantH | GaussianH | ExponentialH | CallableH


@dataclass(frozen=True)
class ConstantEigen:
    """g ≡ level; eigenvalue 0 for every driver. Only meaningful inside an EigenSum."""

    tag: ClassVar[str] = "constant"
    level: float = 1.0

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return np.full(len(y), self.level)

    def eigenvalue(self, process: ProcessSpec) -> float | None:
        return 0.0


@dataclass(frozen=True)
class ExponentialLinearEigen:
    """g(x) = exp(<c, x>)."""

    tag: ClassVar[str] = "exponential_linear"
    c: tuple[float, ...] = (1.0,)

    def __post_init__(self) -> None:
        object.__setattr__(self, "c", tuple(float(v) for v in np.atleast_1d(self.c)))

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return np.exp(y @ np.asarray(self.c))

    def eigenvalue(self, process: ProcessSpec) -> float | None:
        if isinstance(process, BrownianDrift) and process.dim == len(self.c):
            c = np.asarray(self.c)
            return float(0.5 * c @ c - np.asarray(process.kappa) @ c)
        return None


@dataclass(frozen=True)
class GaussianQuadraticEigen:
    """g(x) = exp(coefficient·|x|²); an eigenfunction of the OU driver with mu_speed = coefficient."""

    tag: ClassVar[str] = "gaussian_quadratic"
    coefficient: float = -0.5

    def __post_init__(self) -> None:
        if not self.coefficient < 0:
            raise DomainError(f"gaussian_quadratic eigenfunction needs a negative coefficient (got {self.coefficient})")

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return np.exp(self.coefficient * np.sum(y * y, axis=1))

    def eigenvalue(self, process: ProcessSpec) -> float | None:
        if isinstance(process, OU) and math.isclose(process.mu_speed, self.coefficient, rel_tol=1e-12):
            return self.coefficient * process.dim
        return None


@dataclass(frozen=True)
class CallableEigen:
    tag: ClassVar[str] = "callable"
    fn: Callable[[np.ndarray], np.ndarray] = field(compare=False, default=lambda y: np.ones(len(y)))

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(y), dtype=float).reshape(-1)

    def eigenvalue(self, process: ProcessSpec) -> float | None:
        return None


Eigenfunction = ConstantEigen | ExponentialLinearEigen | GaussianQuadraticEigen | CallableEigen


@dataclass(frozen=True)
class ExponentialWeight:
    """f(t, s) = exp(-alpha·(t + s))."""

    tag: ClassVar[str] = "exponential"
    alpha: float = 0.05

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise DomainError(f"exponential weight needs alpha > 0 (got {self.alpha})")

    def __call__(self, t: float, s: Any) -> Any:
        return np.exp(-self.alpha * (t + np.asarray(s, dtype=float)))


@dataclass(frozen=True)
class CallableWeight:
    tag: ClassVar[str] = "callable"
    fn: Callable[[float, Any], Any] = field(compare=False, default=lambda t, s: np.exp(-(t + np.asarray(s))))

    def __call__(self, t: float, s: Any) -> Any:
        return self.fn(t, s)


WeightFunction = ExponentialWeight | CallableWeight


def check_weight_inequality(weight: WeightFunction, seed: int = 0, samples: int = WEIGHT_SAMPLES, horizon: float = 10.0) -> None:
    """Spot-checks f(t, u - s) <= f(t - s, u) for random 0 <= s <= min(t, u)."""
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        t, u = rng.uniform(0.0, horizon, size=2)
        s = rng.uniform(0.0, min(t, u))
        left = float(weight(t, u - s))
        right = float(weight(t - s, u))
        if not (left >= 0 and right >= 0):
            raise DomainError(f"weight must be non-negative (f={left}, {right} at t={t}, u={u}, s={s})")
        if left > right * (1.0 + 1e-12) + 1e-300:
            raise DomainError(f"weight violates f(t,u-s) <= f(t-s,u) at t={t:.4f}, u={u:.4f}, s={s:.4f}")


@dataclass(frozen=True)
class ConstantRate:
    tag: ClassVar[str] = "constant"
    rate: float = 0.02

    def __post_init__(self) -> None:
        if self.rate < 0:
            raise DomainError(f"killing rate must be non-negative (got {self.rate})")

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return np.full(len(y), self.rate)


@dataclass(frozen=True)
class LinearRate:
    """V(x) = scale·x + shift on a non-negative one-dimensional state."""

    tag: ClassVar[str] = "linear"
    scale: float = 1.0
    shift: float = 0.0

    def __post_init__(self) -> None:
        if self.scale < 0 or self.shift < 0:
            raise DomainError(f"linear rate needs scale >= 0 and shift >= 0 (got {self.scale}, {self.shift})")

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return np.maximum(self.scale * y[:, 0] + self.shift, 0.0)


@dataclass(frozen=True)
class QuadraticRate:
    """V(x) = scale·|x|² + shift."""

    tag: ClassVar[str] = "quadratic"
    scale: float = 1.0
    shift: float = 0.0

    def __post_init__(self) -> None:
        if self.scale < 0 or self.shift < 0:
            raise DomainError(f"quadratic rate needs scale >= 0 and shift >= 0 (got {self.scale}, {self.shift})")

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return self.scale * np.sum(y * y, axis=1) + self.shift


@dataclass(frozen=True)
class CallableRate:
    tag: ClassVar[str] = "callable"
    fn: Callable[[np.ndarray], np.ndarray] = field(compare=False, default=lambda y: np.zeros(len(y)))

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(y), dtype=float).reshape(-1)


KillingRate = ConstantRate | LinearRate | QuadraticRate | CallableRate


# ---------------------------------------------------------------------------
# trace heat kernels u(t, x)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussHeat:
    tag: ClassVar[str] = "gauss_heat"

    def u(self, t: float, xs: np.ndarray) -> np.ndarray:
        d = xs.shape[1]
        return np.exp(-np.sum(xs * xs, axis=1) / (2.0 * t)) / (2.0 * math.pi * t) ** (d / 2.0)

    def driver_matches(self, process: ProcessSpec) -> bool:
        return isinstance(process, BrownianDrift) and is_driftless_symmetric(process)

    def describe_driver(self) -> str:
        return "a driftless brownian_drift driver"


@dataclass(frozen=True)
class QuadGauss:
    tag: ClassVar[str] = "quad_gauss"
    alpha: float = 1.0

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise DomainError(f"quad_gauss needs alpha > 0 (got {self.alpha})")

    def u(self, t: float, xs: np.ndarray) -> np.ndarray:
        a2 = self.alpha**2
        spread = t * a2 + 1.0
        d = xs.shape[1]
        return spread ** (-d / 2.0) * np.exp(-a2 * np.sum(xs * xs, axis=1) / (2.0 * spread))

    def driver_matches(self, process: ProcessSpec) -> bool:
        return isinstance(process, BrownianDrift) and is_driftless_symmetric(process)

    def describe_driver(self) -> str:
        return "a driftless brownian_drift driver"


@dataclass(frozen=True)
class CauchySym:
    tag: ClassVar[str] = "cauchy"
    theta: float = 1.0

    def __post_init__(self) -> None:
        if not self.theta > 0:
            raise DomainError(f"cauchy trace needs theta > 0 (got {self.theta})")

    def u(self, t: float, xs: np.ndarray) -> np.ndarray:
        d = xs.shape[1]
        scale = self.theta * t
        log_norm = special.gammaln(0.5 * (d + 1)) + math.log(scale) - 0.5 * (d + 1) * math.log(math.pi)
        return np.exp(log_norm - 0.5 * (d + 1) * np.log(scale * scale + np.sum(xs * xs, axis=1)))

    def driver_matches(self, process: ProcessSpec) -> bool:
        return isinstance(process, Cauchy) and is_driftless_symmetric(process) and math.isclose(process.theta, self.theta)

    def describe_driver(self) -> str:
        return f"a cauchy driver with gamma_drift = 0 and theta = {self.theta}"


@dataclass(frozen=True)
class VGHeat:
    """Variance-gamma heat kernel via the Bessel form; u(t, 0) needs eta·t > 1/2."""

    tag: ClassVar[str] = "vg"
    eta: float = 1.0
    gamma_rate: float = 1.0

    def __post_init__(self) -> None:
        if not (self.eta > 0 and self.gamma_rate > 0):
            raise DomainError(f"vg trace needs eta > 0 and gamma_rate > 0 (got {self.eta}, {self.gamma_rate})")

    def u(self, t: float, xs: np.ndarray) -> np.ndarray:
        a = self.eta * t
        g = self.gamma_rate
        r = np.abs(xs[:, 0])
        out = np.empty(len(r))
        at_origin = r == 0.0
        if np.any(at_origin):
            if not a > 0.5:
                raise DomainError(f"vg heat kernel at x = 0 needs eta·t > 1/2 (got {a})")
            out[at_origin] = math.exp(
                0.5 * math.log(g / (2.0 * math.pi)) + special.gammaln(a - 0.5) - special.gammaln(a)
            )
        off = ~at_origin
        if np.any(off):
            ro = r[off]
            root = math.sqrt(2.0 * g)
            logs = (
                0.5 * math.log(2.0 / math.pi)
                + a * math.log(g)
                - special.gammaln(a)
                + (a - 0.5) * (np.log(ro) - math.log(root))
                + np.asarray(log_bessel_k(a - 0.5, ro * root))
            )
            out[off] = np.exp(logs)
        return out

    def driver_matches(self, process: ProcessSpec) -> bool:
        return isinstance(process, VGWiener) and math.isclose(process.eta, self.eta) and math.isclose(process.gamma_rate, self.gamma_rate)

    def describe_driver(self) -> str:
        return f"a vg driver with eta = {self.eta} and gamma_rate = {self.gamma_rate}"


@dataclass(frozen=True)
class NIGHeat:
    tag: ClassVar[str] = "nig"
    eta: float = 1.0
    gamma_rate: float = 1.0

    def __post_init__(self) -> None:
        if not (self.eta > 0 and self.gamma_rate > 0):
            raise DomainError(f"nig trace needs eta > 0 and gamma_rate > 0 (got {self.eta}, {self.gamma_rate})")

    def u(self, t: float, xs: np.ndarray) -> np.ndarray:
        a = self.eta * t
        g = self.gamma_rate
        delta = 0.5 * xs[:, 0] ** 2 + math.pi * a * a
        logs = (
            math.log(a)
            + 0.5 * math.log(2.0 / math.pi)
            + 2.0 * a * math.sqrt(math.pi * g)
            + 0.5 * (math.log(g) - np.log(delta))
            + np.asarray(log_bessel_k(1.0, 2.0 * np.sqrt(g * delta)))
        )
        return np.exp(logs)

    def driver_matches(self, process: ProcessSpec) -> bool:
        return isinstance(process, NIGWiener) and math.isclose(process.eta, self.eta) and math.isclose(process.gamma_rate, self.gamma_rate)

    def describe_driver(self) -> str:
        return f"a nig driver with eta = {self.eta} and gamma_rate = {self.gamma_rate}"


TraceFamily = GaussHeat | QuadGauss | CauchySym | VGHeat | NIGHeat

TRACE_FAMILIES: dict[str, type] = {cls.tag: cls for cls in (GaussHeat, QuadGauss, CauchySym, VGHeat, NIGHeat)}


def vg_density_quadrature(eta: float, gamma_rate: float, t: float, x: float, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Variance-gamma density as the subordination integral over the Gamma clock."""
    clock = GammaSubordinator(eta=eta, gamma_rate=gamma_rate)
    return _subordinated_density(clock, t, x, spec)


def nig_density_quadrature(eta: float, gamma_rate: float, t: float, x: float, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    clock = IGSubordinator(eta=eta, gamma_rate=gamma_rate)
    return _subordinated_density(clock, t, x, spec)


def _subordinated_density(clock: GammaSubordinator | IGSubordinator, t: float, x: float, spec: QuadratureSpec) -> float:
    if x == 0.0:
        raise DomainError("subordination quadrature is only used away from the origin")

    def integrand(s: float) -> float:
        if s <= 0.0:
            return 0.0
        gauss = math.exp(-x * x / (2.0 * s)) / math.sqrt(2.0 * math.pi * s)
        return gauss * transition_density(clock, t, [0.0], [s])

    # split at the clock mean so the peak is resolved on both sides
    mean = float(conditional_moments(clock, [0.0], t)[0][0])
    head = integrate(integrand, (0.0, mean), spec).value
    tail = integrate(integrand, (mean, math.inf), spec).value
    return head + tail


# ---------------------------------------------------------------------------
# kernel families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LevyDensityKernel:
    """p(t, x) = density of the driver from x to the origin at time t + shift."""

    tag: ClassVar[str] = "levy_density"
    process: ProcessSpec
    shift: float = 0.0
    exact: ClassVar[bool] = True
    path_dependent: ClassVar[bool] = False
    positive_rates: ClassVar[bool] = False

    def __post_init__(self) -> None:
        if not isinstance(self.process, (BrownianDrift, OU, Cauchy)):
            raise UnsupportedError(f"levy_density needs a driver with a transition density, not {self.process.tag}")
        if self.shift < 0:
            raise DomainError(f"levy_density shift must be non-negative (got {self.shift})")

    def value(self, t: float, x: Any) -> Any:
        horizon = t + self.shift
        if not horizon > 0:
            raise DomainError(f"levy_density is singular at t + shift = 0 (t={t}, shift={self.shift})")
        rows, single = _rows(x, self.process.dim)
        values = np.atleast_1d(transition_density(self.process, horizon, rows, np.zeros(self.process.dim)))
        return _out(values, single)

    def conditional(self, t: float, T: float, x: Any) -> Any:
        return self.value(2.0 * T - t, x)


@dataclass(frozen=True)
class ExpectationKernel:
    """p(t, x) = E[h(X_t) | X_0 = x] for a non-negative bounded h."""

    tag: ClassVar[str] = "expectation"
    h: HFunction
    process: ProcessSpec
    estimator: str = "closed"
    n: int = DEFAULT_MC_PATHS
    seed: int = 0
    quadrature: QuadratureSpec = DEFAULT_QUADRATURE
    path_dependent: ClassVar[bool] = False
    positive_rates: ClassVar[bool] = False

    def __post_init__(self) -> None:
        if self.estimator not in ("closed", "quadrature", "mc"):
            raise DomainError(f"Unknown estimator: {self.estimator}")
        if self.estimator == "closed" and self.h.expectation(self.process, 1.0, np.zeros((1, self.process.dim))) is None:
            raise UnsupportedError(f"no closed form for h={self.h.tag} under {self.process.tag}; use quadrature or mc")
        if self.estimator == "quadrature" and (self.process.dim != 1 or isinstance(self.process, (CIR, VGWiener, NIGWiener))):
            raise UnsupportedError(f"quadrature estimator needs a one-dimensional driver with a density, not {self.process.tag}")

    @property
    def exact(self) -> bool:
        return self.estimator != "mc"

    def value(self, t: float, x: Any) -> Any:
        if t < 0:
            raise DomainError(f"t must be non-negative (got {t})")
        if self.estimator == "mc":
            start = _need_single(x, self.process.dim, "an mc expectation kernel")
            return mc.estimate(self.h, self.process, start, t, self.n, self.seed)
        rows, single = _rows(x, self.process.dim)
        if t == 0:
            return _out(self.h(rows), single)
        if self.estimator == "closed":
            return _out(np.asarray(self.h.expectation(self.process, t, rows), dtype=float), single)
        values = np.array([self._quadrature_value(t, row) for row in rows])
        return _out(values, single)

    def _quadrature_value(self, t: float, start: np.ndarray) -> float:
        def integrand(y: float) -> float:
            point = np.array([[y]])
            return float(self.h(point)[0]) * transition_density(self.process, t, start, [y])

        lower = float(start[0]) if isinstance(self.process, (GammaSubordinator, IGSubordinator)) else -math.inf
        return integrate(integrand, (lower, math.inf), self.quadrature).value

    def joint(self, x: Any, horizons: tuple[float, ...], n: int | None = None, seed: int | None = None, workers: int = 1) -> list[MCEstimate]:
        """Common-path estimates of p(h, x) for several horizons."""
        start = _need_single(x, self.process.dim, "an mc expectation kernel")
        grid, index = _grid_for(horizons)

        def sampler(rng: np.random.Generator, size: int) -> np.ndarray:
            paths = simulate_grid(self.process, start, grid, rng, size)
            return np.column_stack([self.h(paths[:, k, :]) for k in index])

        return mc.run_chunks_joint(sampler, n or self.n, self.seed if seed is None else seed, workers=workers)

    def conditional(self, t: float, T: float, x: Any) -> Any:
        return self.value(2.0 * T - t, x)


@dataclass(frozen=True)
class AffineExpSumKernel:
    """p(t, x) = Σ a_i E[exp(mu_i·X_t) | X_0 = x] under a CIR driver."""

    tag: ClassVar[str] = "affine_cir"
    a: tuple[float, ...]
    mu: tuple[float, ...]
    process: CIR
    exact: ClassVar[bool] = True
    path_dependent: ClassVar[bool] = False
    positive_rates: ClassVar[bool] = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        object.__setattr__(self, "mu", tuple(float(v) for v in self.mu))
        if not isinstance(self.process, CIR):
            raise UnsupportedError(f"affine_cir needs a cir driver, not {self.process.tag}")
        if len(self.a) != len(self.mu) or not self.a:
            raise DomainError(f"affine_cir needs matching non-empty a and mu (got {len(self.a)} and {len(self.mu)})")
        if any(v <= 0 for v in self.a):
            raise DomainError(f"affine_cir weights a_i must be positive (got {self.a})")
        if any(v > 0 for v in self.mu):
            raise DomainError(f"affine_cir exponents mu_i must be non-positive (got {self.mu})")

    def value(self, t: float, x: Any) -> Any:
        rows, single = _rows(x, 1)
        total = np.zeros(len(rows))
        for weight, exponent in zip(self.a, self.mu):
            total += weight * np.asarray(cir_exp_transform(self.process, exponent, t, rows[:, 0]), dtype=float)
        return _out(total, single)

    def conditional(self, t: float, T: float, x: Any) -> Any:
        return self.value(2.0 * T - t, x)


@dataclass(frozen=True)
class EigenKernel:
    """p(t, x) = 1 + exp(mu·t)·g(x) for an eigenfunction g with eigenvalue mu < 0."""

    tag: ClassVar[str] = "eigen"
    mu: float
    g: Eigenfunction
    exact: ClassVar[bool] = True
    path_dependent: ClassVar[bool] = False
    positive_rates: ClassVar[bool] = True

    def __post_init__(self) -> None:
        if not self.mu < 0:
            raise DomainError(f"eigen kernel needs mu < 0 (got {self.mu})")
        if isinstance(self.g, ConstantEigen):
            raise DomainError("a constant eigenfunction has eigenvalue 0; use it inside eigen_sum")

    def value(self, t: float, x: Any) -> Any:
        rows, single = _rows(x, _dim_of(x))
        return _out(1.0 + math.exp(self.mu * t) * self.g(rows), single)

    def conditional(self, t: float, T: float, x: Any) -> Any:
        return self.value(2.0 * T - t, x)


@dataclass(frozen=True)
class EigenTerm:
    """One summand A(t)·g(x) with A(t) = a·exp(-beta·t)."""

    a: float
    beta: float
    g: Eigenfunction
    mu: float

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise DomainError(f"eigen_sum amplitude must be positive (got {self.a})")
        if self.beta < 0:
            raise DomainError(f"eigen_sum decay beta must be non-negative (got {self.beta})")
        if self.mu > 0 or (self.mu == 0 and not isinstance(self.g, ConstantEigen)):
            raise DomainError(f"eigen_sum eigenvalues must be negative (got {self.mu})")

    def amplitude(self, t: float) -> float:
        return self.a * math.exp(-self.beta * t)


@dataclass(frozen=True)
class EigenSumKernel:
    """v(t, x) = Σ A_i(t)·g_i(x) with positive decreasing amplitudes."""

    tag: ClassVar[str] = "eigen_sum"
    terms: tuple[EigenTerm, ...]
    exact: ClassVar[bool] = True
    path_dependent: ClassVar[bool] = False
    positive_rates: ClassVar[bool] = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise DomainError("eigen_sum needs at least one term")

    def value(self, t: float, x: Any) -> Any:
        rows, single = _rows(x, _dim_of(x))
        total = sum(term.amplitude(t) * term.g(rows) for term in self.terms)
        return _out(np.asarray(total, dtype=float), single)

    def conditional(self, t: float, T: float, x: Any) -> Any:
        rows, single = _rows(x, _dim_of(x))
        total = sum(term.amplitude(T) * math.exp(term.mu * (T - t)) * term.g(rows) for term in self.terms)
        return _out(np.asarray(total, dtype=float), single)


@dataclass(frozen=True)
class WeightedKernel:
    """q(t, x) = ∫_0^∞ p(s, x)·f(t, s) ds over an exact base kernel."""

    tag: ClassVar[str] = "weighted"
    base: Any
    weight: WeightFunction
    quadrature: QuadratureSpec = DEFAULT_QUADRATURE
    exact: ClassVar[bool] = True
    path_dependent: ClassVar[bool] = False
    positive_rates: ClassVar[bool] = True

    def __post_init__(self) -> None:
        if not getattr(self.base, "exact", False) or self.base.tag in ("weighted", "killed", "trace", "eigen_sum"):
            raise UnsupportedError(f"weighted kernels need an exact propagation kernel as base, not {self.base.tag}")
        check_weight_inequality(self.weight)

    @property
    def process(self) -> ProcessSpec | None:
        return getattr(self.base, "process", None)

    def integral(self, offset: float, t_weight: float, x: Any) -> QuadratureResult:
        """∫_0^∞ p(s + offset, x)·f(t_weight, s) ds with its quadrature error estimate."""
        rows, _ = _rows(x, _dim_of(x))

        def integrand(s: float) -> np.ndarray:
            # a heat-kernel base is singular at total time 0; the singularity is integrable
            if s + offset + getattr(self.base, "shift", 0.0) <= 0.0:
                return np.zeros(len(rows))
            return np.asarray(self.base.value(s + offset, rows), dtype=float) * float(self.weight(t_weight, s))

        return integrate_vec(integrand, (0.0, math.inf), self.quadrature)

    def value(self, t: float, x: Any) -> Any:
        result = self.integral(0.0, t, x)
        _, single = _rows(x, _dim_of(x))
        return _out(np.atleast_1d(result.value), single)

    def conditional(self, t: float, T: float, x: Any) -> Any:
        if T < t:
            raise DomainError(f"weighted conditional needs T >= t (got t={t}, T={T})")
        result = self.integral(T - t, T, x)
        _, single = _rows(x, _dim_of(x))
        return _out(np.atleast_1d(result.value), single)


@dataclass(frozen=True)
class KilledKernel:
    """q(t, x) = E[exp(-∫_0^t V(X_s) ds) | X_0 = x]; π_t carries the path factor."""

    tag: ClassVar[str] = "killed"
    rate: KillingRate
    process: ProcessSpec
    estimator: str = "mc"
    n: int = DEFAULT_MC_PATHS
    seed: int = 0
    grid_step: float = DEFAULT_GRID_STEP
    path_dependent: ClassVar[bool] = True
    positive_rates: ClassVar[bool] = True

    def __post_init__(self) -> None:
        if self.estimator not in ("closed", "mc"):
            raise DomainError(f"Unknown estimator: {self.estimator}")
        if not self.grid_step > 0:
            raise DomainError(f"grid_step must be positive (got {self.grid_step})")
        if self.estimator == "closed" and not self.has_closed_form:
            raise UnsupportedError(f"no closed form for V={self.rate.tag} under {self.process.tag}; use mc")

    @property
    def has_closed_form(self) -> bool:
        return isinstance(self.rate, ConstantRate) or (isinstance(self.rate, LinearRate) and isinstance(self.process, CIR))

    @property
    def exact(self) -> bool:
        return self.estimator == "closed"

    def value(self, t: float, x: Any) -> Any:
        if t < 0:
            raise DomainError(f"t must be non-negative (got {t})")
        if self.estimator == "closed":
            rows, single = _rows(x, self.process.dim)
            if isinstance(self.rate, ConstantRate):
                return _out(np.full(len(rows), math.exp(-self.rate.rate * t)), single)
            values = np.asarray(cir_zero_coupon(self.process, t, rows[:, 0], self.rate.scale, self.rate.shift), dtype=float)
            return _out(values.reshape(-1), single)
        start = _need_single(x, self.process.dim, "an mc killed kernel")
        if t == 0:
            return MCEstimate(mean=1.0, stderr=0.0, n=self.n, seed=self.seed)
        return self.joint(start, (t,))[0]

    def rate_at(self, x: Any) -> Any:
        rows, single = _rows(x, self.process.dim)
        return _out(np.asarray(self.rate(rows), dtype=float), single)

    def discount_samples(self, paths: np.ndarray, grid: np.ndarray) -> np.ndarray:
        """exp(-∫V) along each path at every grid time (trapezoidal rule)."""
        n, steps, d = paths.shape
        rates = self.rate(paths.reshape(-1, d)).reshape(n, steps)
        increments = 0.5 * (rates[:, 1:] + rates[:, :-1]) * np.diff(grid)
        integral = np.concatenate([np.zeros((n, 1)), np.cumsum(increments, axis=1)], axis=1)
        return np.exp(-integral)

    def time_grid(self, horizon: float, marks: tuple[float, ...] = ()) -> np.ndarray:
        steps = max(1, math.ceil(horizon / self.grid_step - 1e-9))
        grid = np.linspace(0.0, horizon, steps + 1)
        if marks:
            grid = np.unique(np.concatenate([grid, [m for m in marks if 0 < m < horizon]]))
        return grid

    def joint(
        self,
        x: Any,
        horizons: tuple[float, ...],
        n: int | None = None,
        seed: int | None = None,
        workers: int = 1,
        with_rate: bool = False,
    ) -> list[MCEstimate]:
        """Common-path estimates of q(h, x) for each horizon.

        With ``with_rate`` the estimates of E[V(X_h)·exp(-∫_0^h V)] follow, in the same order.
        """
        start = _need_single(x, self.process.dim, "an mc killed kernel")
        horizon = max(horizons)
        if not horizon > 0:
            return [MCEstimate(1.0, 0.0, n or self.n, self.seed if seed is None else seed) for _ in horizons]
        grid = self.time_grid(horizon, tuple(horizons))
        index = [int(np.argmin(np.abs(grid - h))) for h in horizons]

        def sampler(rng: np.random.Generator, size: int) -> np.ndarray:
            paths = simulate_grid(self.process, start, grid, rng, size)
            discount = self.discount_samples(paths, grid)
            columns = [discount[:, k] for k in index]
            if with_rate:
                columns += [self.rate(paths[:, k, :]) * discount[:, k] for k in index]
            return np.column_stack(columns)

        return mc.run_chunks_joint(sampler, n or self.n, self.seed if seed is None else seed, workers=workers)

    def conditional(self, t: float, T: float, x: Any) -> Any:
        return self.value(2.0 * T - t, x)


@dataclass(frozen=True)
class HeatComponent:
    """u(lam + t, x): the part of a trace kernel that carries the propagation property."""

    family: TraceFamily
    lam: float
    exact: ClassVar[bool] = True

    def value(self, t: float, x: Any) -> Any:
        rows, single = _rows(x, _dim_of(x))
        return _out(self.family.u(self.lam + t, rows), single)


@dataclass(frozen=True)
class TraceKernel:
    """π-kernel u(lam + t, x) + c·u(lam + t, 0) for a symmetric Lévy heat kernel u."""

    tag: ClassVar[str] = "trace"
    family: TraceFamily
    lam: float = 1.0
    c: float = 3.0
    exact: ClassVar[bool] = True
    path_dependent: ClassVar[bool] = False
    positive_rates: ClassVar[bool] = True

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise DomainError(f"trace kernel needs lambda > 0 (got {self.lam})")
        if not self.c > 2:
            raise DomainError(f"trace kernel needs c > 2 (got {self.c})")
        if isinstance(self.family, VGHeat) and not self.family.eta * self.lam > 0.5:
            raise DomainError(f"vg trace kernel needs eta·lambda > 1/2 (got {self.family.eta * self.lam})")

    def u(self, t: float, x: Any) -> Any:
        rows, single = _rows(x, _dim_of(x))
        return _out(self.family.u(t, rows), single)

    def value(self, t: float, x: Any) -> Any:
        rows, single = _rows(x, _dim_of(x))
        origin = self.family.u(self.lam + t, np.zeros((1, rows.shape[1])))[0]
        return _out(self.family.u(self.lam + t, rows) + self.c * origin, single)

    def conditional(self, t: float, T: float, x: Any) -> Any:
        rows, single = _rows(x, _dim_of(x))
        origin = self.family.u(self.lam + T, np.zeros((1, rows.shape[1])))[0]
        return _out(self.family.u(self.lam + 2.0 * T - t, rows) + self.c * origin, single)

    def conditional_late_constant(self, t: float, T: float, x: Any) -> Any:
        """Variant with the constant term evolved to c·u(lam + 2T - t, 0)."""
        rows, single = _rows(x, _dim_of(x))
        horizon = self.lam + 2.0 * T - t
        origin = self.family.u(horizon, np.zeros((1, rows.shape[1])))[0]
        return _out(self.family.u(horizon, rows) + self.c * origin, single)


KernelSpec = (
    LevyDensityKernel
    | ExpectationKernel
    | AffineExpSumKernel
    | EigenKernel
    | EigenSumKernel
    | WeightedKernel
    | KilledKernel
    | TraceKernel
)

KERNEL_TAGS = ("levy_density", "expectation", "affine_cir", "eigen", "eigen_sum", "weighted", "killed", "trace")


def _dim_of(x: Any) -> int:
    arr = np.asarray(x, dtype=float)
    return 1 if arr.ndim == 0 else int(arr.shape[-1])


def _grid_for(horizons: tuple[float, ...]) -> tuple[np.ndarray, list[int]]:
    marks = sorted({float(h) for h in horizons if h > 0})
    grid = np.array([0.0, *marks])
    index = [int(np.searchsorted(grid, float(h))) if h > 0 else 0 for h in horizons]
    return grid, index


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Model:
    kernel: KernelSpec
    process: ProcessSpec
    x0: tuple[float, ...]
    check_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "x0", tuple(float(v) for v in np.atleast_1d(np.asarray(self.x0, dtype=float))))
        if len(self.x0) != self.process.dim:
            raise DomainError(f"x0 has dimension {len(self.x0)}, the {self.process.tag} driver has {self.process.dim}")
        check_driver(self.kernel, self.process, seed=self.check_seed)
        if isinstance(self.process, CIR) and self.x0[0] < 0:
            raise DomainError(f"CIR initial state must be non-negative (got {self.x0[0]})")

    @property
    def trace_mode(self) -> bool:
        return isinstance(self.kernel, TraceKernel)

    @property
    def state(self) -> np.ndarray:
        return np.asarray(self.x0)


def _kernel_process(kernel: KernelSpec) -> ProcessSpec | None:
    if isinstance(kernel, WeightedKernel):
        return kernel.process
    return getattr(kernel, "process", None)


def check_driver(kernel: KernelSpec, process: ProcessSpec, seed: int = 0) -> None:
    """Raises DomainError when ``kernel`` does not propagate under ``process``."""
    own = _kernel_process(kernel)
    if own is not None and own != process:
        raise DomainError(f"{kernel.tag} kernel is defined for a {own.tag} driver, the model uses {process.tag}")
    if isinstance(kernel, TraceKernel):
        if not kernel.family.driver_matches(process):
            raise DomainError(f"trace/{kernel.family.tag} requires {kernel.family.describe_driver()}")
    elif isinstance(kernel, EigenKernel):
        _check_eigen(kernel.g, kernel.mu, process, seed)
    elif isinstance(kernel, EigenSumKernel):
        for k, term in enumerate(kernel.terms):
            _check_eigen(term.g, term.mu, process, seed + k)
    elif isinstance(kernel, WeightedKernel) and own is None:
        check_driver(kernel.base, process, seed)


def _check_eigen(g: Eigenfunction, mu: float, process: ProcessSpec, seed: int) -> None:
    known = g.eigenvalue(process)
    if known is not None:
        if not math.isclose(known, mu, rel_tol=1e-9, abs_tol=1e-12):
            raise DomainError(f"{g.tag} eigenfunction has eigenvalue {known:.6g} under {process.tag}, kernel declares {mu}")
        return
    # unknown pairing: spot-check E[g(X_t)] = exp(mu·t)·g(x) by simulation
    rng = np.random.default_rng(seed)
    threshold = mc.suite_threshold(EIGEN_SPOT_CHECKS)
    for k in range(EIGEN_SPOT_CHECKS):
        t = float(rng.uniform(0.1, 2.0))
        x = rng.normal(size=process.dim)
        if isinstance(process, (CIR, GammaSubordinator, IGSubordinator)):
            x = np.abs(x)
        lhs = mc.estimate(g, process, x, t, EIGEN_SPOT_PATHS, seed * 1000 + k)
        rhs = math.exp(mu * t) * float(g(x.reshape(1, -1))[0])
        z = lhs.z_score(rhs)
        if abs(z) > threshold:
            raise DomainError(f"{g.tag} is not an eigenfunction with eigenvalue {mu} under {process.tag} (t={t:.3f}, z={z:.2f})")
    logger.debug("eigenfunction %s passed %d spot checks under %s", g.tag, EIGEN_SPOT_CHECKS, process.tag)


def propagator(kernel: KernelSpec) -> Any:
    """The component of ``kernel`` that has the propagation property."""
    if isinstance(kernel, (LevyDensityKernel, ExpectationKernel, AffineExpSumKernel, EigenKernel)):
        return kernel
    if isinstance(kernel, WeightedKernel):
        return kernel.base
    if isinstance(kernel, TraceKernel):
        return HeatComponent(kernel.family, kernel.lam)
    if isinstance(kernel, KilledKernel) and isinstance(kernel.rate, ConstantRate) and kernel.rate.rate == 0.0:
        return ExpectationKernel(h=ConstantH(1.0), process=kernel.process)
    raise UnsupportedError(f"{kernel.tag} kernels do not carry a propagating component")


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def eval_kernel(kernel: KernelSpec, t: float, x: Any) -> Any:
    """p(t, x); an ``MCEstimate`` for simulation-backed kernels."""
    value = kernel.value(t, x)
    if isinstance(value, MCEstimate):
        return value
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if not np.all(arr > 0):
        raise DomainError(f"{kernel.tag} kernel is not positive at t={t}")
    return value


def conditional_spd(kernel: KernelSpec, t: float, T: float, x: Any) -> Any:
    """E[π_T | X_t = x] with the path factor accumulated up to t divided out."""
    if T < t:
        raise DomainError(f"need T >= t (got t={t}, T={T})")
    return kernel.conditional(t, T, x)


def spd(model: Model, t: float, x_t: Any, path_functional: float | None = None) -> float:
    """State price density π_t at state x_t.

    Killed kernels need ``path_functional`` = ∫_0^t V(X_s) ds along the path.
    """
    kernel = model.kernel
    if kernel.path_dependent:
        if path_functional is None:
            raise DomainError("killed kernels need the accumulated ∫V ds to evaluate the state price density")
        base = kernel.value(t, x_t)
        mean = base.mean if isinstance(base, MCEstimate) else float(base)
        return mean * math.exp(-float(path_functional))
    value = kernel.value(t, x_t)
    if isinstance(value, MCEstimate):
        return value.mean
    return float(value)


def weighted_eval(
    base: KernelSpec, f: WeightFunction, t: float, x: Any, quadrature: QuadratureSpec = DEFAULT_QUADRATURE
) -> QuadratureResult:
    kernel = WeightedKernel(base=base, weight=f, quadrature=quadrature)
    return kernel.integral(0.0, t, x)


def killed_eval(
    V: KillingRate,
    process: ProcessSpec,
    t: float,
    x: Any,
    estimator: str = "mc",
    n: int = DEFAULT_MC_PATHS,
    seed: int = 0,
    grid_step: float = DEFAULT_GRID_STEP,
) -> MCEstimate | float:
    kernel = KilledKernel(rate=V, process=process, estimator=estimator, n=n, seed=seed, grid_step=grid_step)
    return kernel.value(t, x)


@dataclass(frozen=True)
class PropagationReport:
    lhs: MCEstimate
    rhs: float
    z_score: float
    t: float
    s: float
    x: tuple[float, ...]


def check_propagation(
    kernel: KernelSpec, process: ProcessSpec, t: float, s: float, x: Any, n: int, seed: int, workers: int = 1
) -> PropagationReport:
    """Compares E[p(t, X_s) | X_0 = x] against p(t + s, x)."""
    if not (t > 0 and s > 0):
        raise DomainError(f"check_propagation needs t > 0 and s > 0 (got t={t}, s={s})")
    part = propagator(kernel)
    if not getattr(part, "exact", False):
        raise UnsupportedError(f"{kernel.tag} kernel is not exactly evaluable")
    start = np.atleast_1d(np.asarray(x, dtype=float))
    lhs = mc.estimate(lambda states: part.value(t, states), process, start, s, n, seed, workers=workers)
    rhs = float(part.value(t + s, start))
    return PropagationReport(lhs=lhs, rhs=rhs, z_score=lhs.z_score(rhs), t=t, s=s, x=tuple(float(v) for v in start))
