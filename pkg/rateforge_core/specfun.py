"""Special functions and quadrature shared by the kernels and the closed-form pricers.

Everything here is pure: no module state, safe to call from worker threads.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np
from scipy import integrate as sp_integrate
from scipy import special

from .errors import DomainError, QuadratureError, SpecialFunctionError

logger = logging.getLogger(__name__)

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_MAX_WINDOW_DOUBLINGS = 12


@dataclass(frozen=True)
class QuadratureSpec:
    rule: str = "gauss-kronrod"
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_subdivisions: int = 200
    truncation_bound: float = 50.0

    def __post_init__(self) -> None:
        if self.rule != "gauss-kronrod":
            raise DomainError(f"Unknown quadrature rule: {self.rule}")
        if not self.abs_tol > 0:
            raise DomainError(f"abs_tol must be positive (got {self.abs_tol})")
        if not self.rel_tol > 0:
            raise DomainError(f"rel_tol must be positive (got {self.rel_tol})")
        if self.max_subdivisions < 1:
            raise DomainError(f"max_subdivisions must be at least 1 (got {self.max_subdivisions})")
        if not self.truncation_bound > 0:
            raise DomainError(f"truncation_bound must be positive (got {self.truncation_bound})")


DEFAULT_QUADRATURE = QuadratureSpec()


@dataclass(frozen=True)
class QuadratureResult:
    value: Any
    error: Any
    upper_bound: float | None = None


def std_normal_cdf(x: Any) -> Any:
    """Φ(x). Accurate in both tails, so Φ(x) + Φ(-x) = 1 to rounding."""
    values = special.ndtr(np.asarray(x, dtype=float))
    return float(values) if np.ndim(values) == 0 else values


def std_normal_pdf(x: Any) -> Any:
    arr = np.asarray(x, dtype=float)
    values = np.exp(-0.5 * arr * arr) / _SQRT_2PI
    return float(values) if np.ndim(values) == 0 else values


def _normal_interval(lo: float, hi: float) -> float:
    # Φ(hi) - Φ(lo) evaluated on the side where the two tails do not cancel.
    if lo > 0.0:
        return float(special.ndtr(-lo) - special.ndtr(-hi))
    return float(special.ndtr(hi) - special.ndtr(lo))


def bs_integral(a: float, b: float, c: float, d: float) -> float:
    """E[(a·exp(cZ + d) - b)^+] for a standard normal Z."""
    if a < 0 or b < 0:
        raise DomainError(f"bs_integral needs a >= 0 and b >= 0 (got a={a}, b={b})")
    if a == 0.0:
        return 0.0
    if b == 0.0:
        return a * math.exp(d + 0.5 * c * c)
    if c == 0.0:
        return max(a * math.exp(d) - b, 0.0)
    scale = abs(c)
    z = (math.log(b / a) - d) / scale
    value = a * math.exp(d + 0.5 * scale * scale) * float(special.ndtr(scale - z)) - b * float(special.ndtr(-z))
    return max(value, 0.0)


# Debye polynomials u_k(t) of the uniform large-order expansion, highest power first.
_DEBYE_U = (
    np.poly1d([1.0]),
    np.poly1d([-5.0, 0.0, 3.0, 0.0]) / 24.0,
    np.poly1d([385.0, 0.0, -462.0, 0.0, 81.0, 0.0, 0.0]) / 1152.0,
    np.poly1d([-425425.0, 0.0, 765765.0, 0.0, -369603.0, 0.0, 30375.0, 0.0, 0.0, 0.0]) / 414720.0,
)
_DEBYE_MIN_ORDER = 1.0


def _log_bessel_k_debye(nu: float, x: np.ndarray) -> np.ndarray:
    z = x / nu
    root = np.sqrt(1.0 + z * z)
    t = 1.0 / root
    eta = root + np.log(z / (1.0 + root))
    series = sum(((-1.0) ** k) * poly(t) / nu**k for k, poly in enumerate(_DEBYE_U))
    return 0.5 * math.log(math.pi / (2.0 * nu)) - 0.5 * np.log(root) - nu * eta + np.log(series)


def log_bessel_k(p: float, x: Any) -> Any:
    """log K_p(x) from the exponentially scaled Bessel function.

    Where K_p itself leaves double range (large order, small argument) the
    uniform large-order expansion takes over; K_p = K_{-p}.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
        raise DomainError("log_bessel_k needs finite x > 0")
    nu = abs(float(p))
    with np.errstate(divide="ignore", over="ignore"):
        scaled = special.kve(nu, arr)
        out = np.log(scaled) - arr
    bad = ~np.isfinite(out)
    if np.any(bad) and nu >= _DEBYE_MIN_ORDER:
        logger.debug("K_%s out of double range at %d points; using the large-order expansion", nu, int(np.count_nonzero(bad)))
        out = np.where(bad, _log_bessel_k_debye(nu, arr), out)
    if not np.all(np.isfinite(out)):
        raise SpecialFunctionError(f"K_{p} is outside double range for some x in [{arr.min()}, {arr.max()}]")
    return float(out) if out.ndim == 0 else out


def bessel_k(p: float, x: Any) -> Any:
    """Modified Bessel function of the second kind K_p(x), x > 0.

    The result must be a finite positive double; values that overflow or
    underflow raise SpecialFunctionError instead of returning inf or 0.
    Use ``log_bessel_k`` when only the logarithm is needed.
    """
    logs = np.asarray(log_bessel_k(p, x))
    with np.errstate(over="ignore", under="ignore"):
        values = np.exp(logs)
    if np.any(values == 0.0) or not np.all(np.isfinite(values)):
        raise SpecialFunctionError(f"K_{p}(x) overflows or underflows double precision (log values {logs.min()}..{logs.max()})")
    return float(values) if values.ndim == 0 else values


def _quad(f: Callable[[float], float], a: float, b: float, spec: QuadratureSpec) -> tuple[float, float]:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", sp_integrate.IntegrationWarning)
        value, error = sp_integrate.quad(
            f, a, b, epsabs=spec.abs_tol, epsrel=spec.rel_tol, limit=spec.max_subdivisions
        )
    problems = [w for w in caught if issubclass(w.category, sp_integrate.IntegrationWarning)]
    if problems:
        raise QuadratureError(f"quadrature on [{a}, {b}] did not converge: {problems[0].message}")
    return value, error


def _quad_vec(f: Callable[[float], np.ndarray], a: float, b: float, spec: QuadratureSpec) -> tuple[np.ndarray, float]:
    value, error, info = sp_integrate.quad_vec(
        f,
        a,
        b,
        epsabs=spec.abs_tol,
        epsrel=spec.rel_tol,
        limit=spec.max_subdivisions * 50,
        norm="max",
        full_output=True,
    )
    if not info.success:
        raise QuadratureError(f"vector quadrature on [{a}, {b}] did not converge: {info.message}")
    return np.asarray(value), float(error)


def _tail_bound(f: Callable[[float], Any], lower: float, spec: QuadratureSpec) -> float:
    span = spec.truncation_bound
    threshold = spec.abs_tol / 10.0
    for _ in range(_MAX_WINDOW_DOUBLINGS):
        if float(np.max(np.abs(f(lower + span)))) < threshold:
            return lower + span
        span *= 2.0
        logger.debug("quadrature tail window doubled to %s", span)
    raise QuadratureError(
        f"integrand does not decay below {threshold:g} within {span:g} of {lower}; raise truncation_bound"
    )


def _integrate_with(
    f: Callable[[float], Any],
    domain: tuple[float, float],
    spec: QuadratureSpec,
    engine: Callable[[Callable[[float], Any], float, float, QuadratureSpec], tuple[Any, Any]],
) -> QuadratureResult:
    a, b = float(domain[0]), float(domain[1])
    if math.isnan(a) or math.isnan(b) or a > b:
        raise DomainError(f"integration domain must satisfy a <= b (got [{a}, {b}])")
    if a == b:
        zero = np.zeros_like(np.asarray(f(a), dtype=float))
        return QuadratureResult(value=zero if zero.ndim else 0.0, error=0.0)

    if math.isinf(a) and math.isinf(b):
        left = _integrate_with(lambda x: f(-x), (0.0, math.inf), spec, engine)
        right = _integrate_with(f, (0.0, math.inf), spec, engine)
        return QuadratureResult(value=left.value + right.value, error=left.error + right.error)
    if math.isinf(a):
        return _integrate_with(lambda x: f(-x), (-b, math.inf), spec, engine)
    if not math.isinf(b):
        value, error = engine(f, a, b, spec)
        return QuadratureResult(value=value, error=error)

    # [a, inf): x = a + s/(1-s) on s in [0, s_max], s_max from the truncation window.
    upper = _tail_bound(f, a, spec)
    length = upper - a
    s_max = length / (1.0 + length)

    def mapped(s: float) -> Any:
        one_minus = 1.0 - s
        return f(a + s / one_minus) / (one_minus * one_minus)

    value, error = engine(mapped, 0.0, s_max, spec)
    return QuadratureResult(value=value, error=error, upper_bound=upper)


def integrate(f: Callable[[float], float], domain: tuple[float, float], spec: QuadratureSpec = DEFAULT_QUADRATURE) -> QuadratureResult:
    """Adaptive Gauss–Kronrod integral of a scalar function.

    Semi-infinite ranges are mapped to a finite one by x = a + s/(1-s) and
    truncated where |f| falls below abs_tol/10, doubling the window until it
    does. Non-convergence raises QuadratureError.
    """
    result = _integrate_with(lambda x: float(f(x)), domain, spec, _quad)
    return QuadratureResult(value=float(result.value), error=float(result.error), upper_bound=result.upper_bound)


def integrate_vec(
    f: Callable[[float], np.ndarray], domain: tuple[float, float], spec: QuadratureSpec = DEFAULT_QUADRATURE
) -> QuadratureResult:
    """Vector-valued counterpart of ``integrate`` (one integral per output component)."""
    return _integrate_with(lambda x: np.asarray(f(x), dtype=float), domain, spec, _quad_vec)


def bessel_k_integral(p: float, x: float, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """K_p(x) = ½ (x/2)^p ∫_0^∞ exp(-t - x²/(4t)) t^(-p-1) dt, evaluated in log space."""
    if not x > 0:
        raise DomainError(f"bessel_k_integral needs x > 0 (got {x})")
    quarter_x2 = 0.25 * x * x

    def log_integrand(t: float) -> float:
        return -t - quarter_x2 / t - (p + 1.0) * math.log(t)

    peak = 0.5 * (-(p + 1.0) + math.sqrt((p + 1.0) ** 2 + x * x))
    log_peak = log_integrand(peak)

    def scaled(t: float) -> float:
        if t <= 0.0:
            return 0.0
        return math.exp(log_integrand(t) - log_peak)

    tight = QuadratureSpec(
        abs_tol=spec.abs_tol, rel_tol=spec.rel_tol, max_subdivisions=spec.max_subdivisions, truncation_bound=max(spec.truncation_bound, 10.0 * peak)
    )
    head = integrate(scaled, (0.0, peak), tight).value
    tail = integrate(scaled, (peak, math.inf), tight).value
    log_value = math.log(0.5) + p * math.log(0.5 * x) + log_peak + math.log(head + tail)
    if log_value > 709.0 or log_value < -745.0:
        raise SpecialFunctionError(f"K_{p}({x}) is outside double range (log value {log_value})")
    return math.exp(log_value)


def gaussian_quadratic_integral(m: float, v: float, mu: float, a: float = -math.inf, b: float = math.inf) -> float:
    """∫_a^b exp(mu·x²) N(m, v)(dx) for v > 0 and mu <= 0.

    mu = 0 reduces to the Gaussian probability of [a, b].
    """
    if not v > 0:
        raise DomainError(f"variance v must be positive (got {v})")
    if mu > 0:
        raise DomainError(f"mu must be non-positive (got {mu})")
    if a > b:
        raise DomainError(f"need a <= b (got a={a}, b={b})")
    if mu == 0.0:
        sd = math.sqrt(v)
        return _normal_interval((a - m) / sd, (b - m) / sd)
    shrink = 1.0 - 2.0 * mu * v
    m_tilde = m / shrink
    v_tilde = v / shrink
    sd_tilde = math.sqrt(v_tilde)
    prefactor = math.sqrt(v_tilde / v) * math.exp(mu * m * m / shrink)
    return prefactor * _normal_interval((a - m_tilde) / sd_tilde, (b - m_tilde) / sd_tilde)
