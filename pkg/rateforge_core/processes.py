"""Markov drivers: exact transition sampling, path grids and closed-form transition laws.

States are float arrays of shape ``(d,)`` for one state or ``(n, d)`` for a
batch. Every sampler draws from an explicit ``numpy.random.Generator``; no
function here touches global random state.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, ClassVar

import numpy as np
from scipy import special

from .errors import DomainError, UnsupportedError

PATH_BLOCK = 512


def _check_positive(name: str, value: float) -> None:
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be a finite positive number (got {value})")


def _as_vector(name: str, values: Any) -> tuple[float, ...]:
    vec = tuple(float(v) for v in np.atleast_1d(np.asarray(values, dtype=float)))
    if not vec:
        raise DomainError(f"{name} must have at least one component")
    if not all(math.isfinite(v) for v in vec):
        raise DomainError(f"{name} must be finite (got {vec})")
    return vec


@dataclass(frozen=True)
class BrownianDrift:
    """Standard Brownian motion with constant drift -kappa (generator Δ/2 - κ·∇)."""

    tag: ClassVar[str] = "brownian_drift"
    kappa: tuple[float, ...] = (0.0,)

    def __post_init__(self) -> None:
        object.__setattr__(self, "kappa", _as_vector("kappa", self.kappa))

    @property
    def dim(self) -> int:
        return len(self.kappa)


@dataclass(frozen=True)
class OU:
    """Ornstein–Uhlenbeck driver with generator -μx∇ + ½Δ and μ < 0."""

    tag: ClassVar[str] = "ou"
    mu_speed: float = -0.5
    dimension: int = 1

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mu_speed) and self.mu_speed < 0):
            raise DomainError(f"OU mu_speed must be negative (got {self.mu_speed})")
        if int(self.dimension) < 1:
            raise DomainError(f"OU dimension must be at least 1 (got {self.dimension})")

    @property
    def dim(self) -> int:
        return int(self.dimension)


@dataclass(frozen=True)
class CIR:
    tag: ClassVar[str] = "cir"
    kappa_rev: float = 0.5
    theta_mean: float = 0.04
    sigma: float = 0.1

    def __post_init__(self) -> None:
        _check_positive("kappa_rev", self.kappa_rev)
        _check_positive("theta_mean", self.theta_mean)
        _check_positive("sigma", self.sigma)

    @property
    def dim(self) -> int:
        return 1


@dataclass(frozen=True)
class Cauchy:
    """Strictly 1-stable Cauchy process with scale theta and drift gamma_drift."""

    tag: ClassVar[str] = "cauchy"
    theta: float = 1.0
    gamma_drift: tuple[float, ...] = (0.0,)

    def __post_init__(self) -> None:
        _check_positive("theta", self.theta)
        object.__setattr__(self, "gamma_drift", _as_vector("gamma_drift", self.gamma_drift))

    @property
    def dim(self) -> int:
        return len(self.gamma_drift)


@dataclass(frozen=True)
class GammaSubordinator:
    """Increments over dt are Gamma(shape=eta·dt, rate=gamma_rate)."""

    tag: ClassVar[str] = "gamma_subordinator"
    eta: float = 1.0
    gamma_rate: float = 1.0

    def __post_init__(self) -> None:
        _check_positive("eta", self.eta)
        _check_positive("gamma_rate", self.gamma_rate)

    @property
    def dim(self) -> int:
        return 1


@dataclass(frozen=True)
class IGSubordinator:
    """Increments over dt have density ηdt·e^{2ηdt√(πγ)} s^{-3/2} e^{-πη²dt²/s - γs}."""

    tag: ClassVar[str] = "ig_subordinator"
    eta: float = 1.0
    gamma_rate: float = 1.0

    def __post_init__(self) -> None:
        _check_positive("eta", self.eta)
        _check_positive("gamma_rate", self.gamma_rate)

    @property
    def dim(self) -> int:
        return 1


@dataclass(frozen=True)
class VGWiener:
    """Driftless Wiener process time-changed by a GammaSubordinator."""

    tag: ClassVar[str] = "vg"
    eta: float = 1.0
    gamma_rate: float = 1.0

    def __post_init__(self) -> None:
        _check_positive("eta", self.eta)
        _check_positive("gamma_rate", self.gamma_rate)

    @property
    def dim(self) -> int:
        return 1

    @property
    def subordinator(self) -> GammaSubordinator:
        return GammaSubordinator(eta=self.eta, gamma_rate=self.gamma_rate)


@dataclass(frozen=True)
class NIGWiener:
    """Driftless Wiener process time-changed by an IGSubordinator."""

    tag: ClassVar[str] = "nig"
    eta: float = 1.0
    gamma_rate: float = 1.0

    def __post_init__(self) -> None:
        _check_positive("eta", self.eta)
        _check_positive("gamma_rate", self.gamma_rate)

    @property
    def dim(self) -> int:
        return 1

    @property
    def subordinator(self) -> IGSubordinator:
        return IGSubordinator(eta=self.eta, gamma_rate=self.gamma_rate)


ProcessSpec = BrownianDrift | OU | CIR | Cauchy | GammaSubordinator | IGSubordinator | VGWiener | NIGWiener

PROCESS_TYPES: dict[str, type] = {
    cls.tag: cls
    for cls in (BrownianDrift, OU, CIR, Cauchy, GammaSubordinator, IGSubordinator, VGWiener, NIGWiener)
}

SYMMETRIC_LEVY = (BrownianDrift, Cauchy, VGWiener, NIGWiener)


def get_process_type(tag: str) -> type:
    if tag not in PROCESS_TYPES:
        raise KeyError(f"Unknown process type: {tag}")
    return PROCESS_TYPES[tag]


def is_driftless_symmetric(spec: ProcessSpec) -> bool:
    """True when X_t and -X_t have the same law started from 0."""
    if isinstance(spec, BrownianDrift):
        return all(k == 0.0 for k in spec.kappa)
    if isinstance(spec, Cauchy):
        return all(g == 0.0 for g in spec.gamma_drift)
    return isinstance(spec, (VGWiener, NIGWiener))


@dataclass(frozen=True)
class PathGrid:
    times: tuple[float, ...]
    states: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        _check_grid(self.times)
        if len(self.states) != len(self.times):
            raise DomainError(f"PathGrid has {len(self.times)} times but {len(self.states)} states")

    @property
    def terminal(self) -> np.ndarray:
        return self.states[-1]


def _check_grid(times: tuple[float, ...] | np.ndarray) -> np.ndarray:
    grid = np.asarray(times, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("time grid must be a non-empty 1-D sequence")
    if grid[0] != 0.0:
        raise DomainError(f"time grid must start at 0 (got {grid[0]})")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("time grid must be strictly increasing")
    return grid


def _as_states(spec: ProcessSpec, x: Any, size: int | None) -> tuple[np.ndarray, bool]:
    states = np.asarray(x, dtype=float)
    if states.ndim == 0:
        states = states.reshape(1)
    single = states.ndim == 1
    if states.shape[-1] != spec.dim:
        raise DomainError(f"state has dimension {states.shape[-1]}, {spec.tag} driver has {spec.dim}")
    if single:
        states = np.broadcast_to(states, (1 if size is None else int(size), spec.dim))
    elif size is not None and states.shape[0] != size:
        raise DomainError(f"batch of {states.shape[0]} states does not match size={size}")
    return states, single and size is None


def _ou_variance(mu: float, t: float) -> float:
    v = -math.expm1(-2.0 * mu * t) / (2.0 * mu)
    if not v > 0:
        raise DomainError(f"OU conditional variance is not positive (mu={mu}, t={t}, v={v})")
    return v


def _ig_mean_shape(spec: IGSubordinator, dt: float) -> tuple[float, float]:
    mean = spec.eta * dt * math.sqrt(math.pi / spec.gamma_rate)
    shape = 2.0 * math.pi * (spec.eta * dt) ** 2
    return mean, shape


def sample_inverse_gaussian(mean: float, shape: float, rng: np.random.Generator, size: int) -> np.ndarray:
    """Michael–Schucany–Haas two-root transform."""
    nu = rng.standard_normal(size)
    y = nu * nu
    root = mean + mean * mean * y / (2.0 * shape) - (mean / (2.0 * shape)) * np.sqrt(4.0 * mean * shape * y + (mean * y) ** 2)
    root = np.maximum(root, np.finfo(float).tiny)
    z = rng.uniform(0.0, 1.0, size)
    return np.where(z <= mean / (mean + root), root, mean * mean / root)


def _increments(spec: ProcessSpec, states: np.ndarray, dt: float, rng: np.random.Generator) -> np.ndarray:
    n, d = states.shape
    if isinstance(spec, BrownianDrift):
        return states - np.asarray(spec.kappa) * dt + math.sqrt(dt) * rng.standard_normal((n, d))
    if isinstance(spec, OU):
        sd = math.sqrt(_ou_variance(spec.mu_speed, dt))
        return states * math.exp(-spec.mu_speed * dt) + sd * rng.standard_normal((n, d))
    if isinstance(spec, CIR):
        if np.any(states < 0):
            raise DomainError("CIR state must be non-negative")
        decay = math.exp(-spec.kappa_rev * dt)
        c = spec.sigma**2 * (1.0 - decay) / (4.0 * spec.kappa_rev)
        df = 4.0 * spec.kappa_rev * spec.theta_mean / spec.sigma**2
        nonc = states[:, 0] * decay / c
        return (c * rng.noncentral_chisquare(df, nonc, size=n)).reshape(n, 1)
    if isinstance(spec, Cauchy):
        gauss = rng.standard_normal((n, d))
        chi = np.abs(rng.standard_normal((n, 1)))
        return states + np.asarray(spec.gamma_drift) * dt + spec.theta * dt * gauss / chi
    if isinstance(spec, GammaSubordinator):
        return states + rng.gamma(spec.eta * dt, 1.0 / spec.gamma_rate, size=(n, 1))
    if isinstance(spec, IGSubordinator):
        mean, shape = _ig_mean_shape(spec, dt)
        return states + sample_inverse_gaussian(mean, shape, rng, n).reshape(n, 1)
    if isinstance(spec, (VGWiener, NIGWiener)):
        clock = _increments(spec.subordinator, np.zeros((n, 1)), dt, rng)
        return states + np.sqrt(clock) * rng.standard_normal((n, 1))
    raise UnsupportedError(f"no sampler for process {type(spec).__name__}")


def sample_transition(
    spec: ProcessSpec, x: Any, dt: float, rng: np.random.Generator, size: int | None = None
) -> np.ndarray:
    """Exact draw of X_{t+dt} given X_t = x.

    ``x`` may be one state (returns shape ``(d,)``, or ``(size, d)`` when
    ``size`` is given) or a batch ``(n, d)`` advanced row by row.
    """
    if not (math.isfinite(dt) and dt > 0):
        raise DomainError(f"dt must be positive (got {dt})")
    states, single = _as_states(spec, x, size)
    out = _increments(spec, states, float(dt), rng)
    return out[0] if single else out


def simulate_grid(spec: ProcessSpec, x: Any, times: Any, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` independent paths on ``times``; shape ``(size, len(times), d)``."""
    grid = _check_grid(times)
    states, _ = _as_states(spec, x, size)
    out = np.empty((size, grid.size, spec.dim))
    out[:, 0, :] = states
    current = np.array(states)
    for k, dt in enumerate(np.diff(grid), start=1):
        current = _increments(spec, current, float(dt), rng)
        out[:, k, :] = current
    return out


def sample_path(spec: ProcessSpec, x: Any, times: Any, seed: int) -> PathGrid:
    rng = np.random.default_rng(seed)
    states = simulate_grid(spec, x, times, rng, 1)[0]
    return PathGrid(times=tuple(float(t) for t in times), states=states, seed=int(seed))


def sample_paths(spec: ProcessSpec, x: Any, times: Any, seed: int, n_paths: int, workers: int = 1) -> np.ndarray:
    """Paths in fixed blocks of PATH_BLOCK, one spawned seed per block.

    The block layout depends only on ``n_paths``, so the result is identical
    for every ``workers`` value.
    """
    if n_paths < 1:
        raise DomainError(f"n_paths must be at least 1 (got {n_paths})")
    _check_grid(times)
    sizes = [min(PATH_BLOCK, n_paths - start) for start in range(0, n_paths, PATH_BLOCK)]
    seeds = np.random.SeedSequence(int(seed)).spawn(len(sizes))

    def block(args: tuple[np.random.SeedSequence, int]) -> np.ndarray:
        child, size = args
        return simulate_grid(spec, x, times, np.random.default_rng(child), size)

    if workers <= 1:
        blocks = [block(a) for a in zip(seeds, sizes)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(block, zip(seeds, sizes)))
    return np.concatenate(blocks, axis=0)


def transition_density(spec: ProcessSpec, t: float, x: Any, y: Any) -> Any:
    """Density of X_t at y given X_0 = x.

    ``x`` and ``y`` are single states or batches of rows; a single state is
    broadcast against the other argument's rows.
    """
    if not (math.isfinite(t) and t > 0):
        raise DomainError(f"t must be positive (got {t})")
    x_in = np.asarray(x, dtype=float)
    y_in = np.asarray(y, dtype=float)
    scalar = x_in.ndim <= 1 and y_in.ndim <= 1
    x_arr = x_in.reshape(-1, spec.dim)
    y_arr = y_in.reshape(-1, spec.dim)

    if isinstance(spec, (BrownianDrift, OU)):
        if isinstance(spec, BrownianDrift):
            mean, var = x_arr - np.asarray(spec.kappa) * t, t
        else:
            mean, var = x_arr * math.exp(-spec.mu_speed * t), _ou_variance(spec.mu_speed, t)
        sq = np.sum((y_arr - mean) ** 2, axis=1)
        values = np.exp(-0.5 * sq / var) / (2.0 * math.pi * var) ** (spec.dim / 2.0)
    elif isinstance(spec, Cauchy):
        d = spec.dim
        scale = spec.theta * t
        sq = np.sum((y_arr - x_arr - np.asarray(spec.gamma_drift) * t) ** 2, axis=1)
        log_norm = special.gammaln(0.5 * (d + 1)) + math.log(scale) - 0.5 * (d + 1) * math.log(math.pi)
        values = np.exp(log_norm - 0.5 * (d + 1) * np.log(scale * scale + sq))
    elif isinstance(spec, (GammaSubordinator, IGSubordinator)):
        s = y_arr[:, 0] - x_arr[:, 0]
        safe = np.where(s > 0, s, 1.0)
        a = spec.eta * t
        if isinstance(spec, GammaSubordinator):
            logs = a * math.log(spec.gamma_rate) + (a - 1.0) * np.log(safe) - spec.gamma_rate * safe - special.gammaln(a)
        else:
            logs = (
                math.log(a)
                + 2.0 * a * math.sqrt(math.pi * spec.gamma_rate)
                - 1.5 * np.log(safe)
                - math.pi * a * a / safe
                - spec.gamma_rate * safe
            )
        values = np.where(s > 0, np.exp(logs), 0.0)
    else:
        raise UnsupportedError(f"transition density is not exposed for {spec.tag}; use transforms or Monte Carlo")
    return float(values[0]) if scalar else values


def cir_exp_transform(spec: CIR, u: float, t: float, x: Any) -> Any:
    """E[exp(u·X_t) | X_0 = x] for u <= 0 (Riccati closed form)."""
    if u > 0:
        raise DomainError(f"cir_exp_transform needs u <= 0 (got {u})")
    if t < 0:
        raise DomainError(f"t must be non-negative (got {t})")
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0):
        raise DomainError("CIR state must be non-negative")
    decay = math.exp(-spec.kappa_rev * t)
    denom = 1.0 - u * spec.sigma**2 * (1.0 - decay) / (2.0 * spec.kappa_rev)
    power = 2.0 * spec.kappa_rev * spec.theta_mean / spec.sigma**2
    values = np.exp(u * x_arr * decay / denom - power * math.log(denom))
    return float(values) if values.ndim == 0 else values


def cir_zero_coupon(spec: CIR, t: float, x: Any, scale: float = 1.0, shift: float = 0.0) -> Any:
    """E[exp(-∫_0^t (scale·X_s + shift) ds) | X_0 = x]."""
    if scale < 0 or shift < 0:
        raise DomainError(f"killing rate must be non-negative (scale={scale}, shift={shift})")
    if t < 0:
        raise DomainError(f"t must be non-negative (got {t})")
    x_arr = np.asarray(x, dtype=float)
    discount = math.exp(-shift * t)
    if scale == 0.0 or t == 0.0:
        values = np.full_like(x_arr, discount)
        return float(values) if values.ndim == 0 else values
    # scale·X is again CIR with mean scale·θ and volatility √scale·σ.
    kappa = spec.kappa_rev
    theta = scale * spec.theta_mean
    sigma2 = scale * spec.sigma**2
    gamma = math.sqrt(kappa * kappa + 2.0 * sigma2)
    growth = math.expm1(gamma * t)
    denom = (gamma + kappa) * growth + 2.0 * gamma
    b = 2.0 * growth / denom
    log_a = (2.0 * kappa * theta / sigma2) * (math.log(2.0 * gamma) + 0.5 * (kappa + gamma) * t - math.log(denom))
    values = discount * np.exp(log_a - b * scale * x_arr)
    return float(values) if values.ndim == 0 else values


def conditional_moments(spec: ProcessSpec, x: Any, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-coordinate mean and variance of X_t given X_0 = x."""
    if t < 0:
        raise DomainError(f"t must be non-negative (got {t})")
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    if isinstance(spec, BrownianDrift):
        return x_arr - np.asarray(spec.kappa) * t, np.full(spec.dim, float(t))
    if isinstance(spec, OU):
        var = _ou_variance(spec.mu_speed, t) if t > 0 else 0.0
        return x_arr * math.exp(-spec.mu_speed * t), np.full(spec.dim, var)
    if isinstance(spec, CIR):
        k, th, s2 = spec.kappa_rev, spec.theta_mean, spec.sigma**2
        decay = math.exp(-k * t)
        mean = th + (x_arr - th) * decay
        var = x_arr * s2 * decay * (1.0 - decay) / k + th * s2 * (1.0 - decay) ** 2 / (2.0 * k)
        return mean, var
    if isinstance(spec, GammaSubordinator):
        a = spec.eta * t
        return x_arr + a / spec.gamma_rate, np.array([a / spec.gamma_rate**2])
    if isinstance(spec, IGSubordinator):
        mean, shape = _ig_mean_shape(spec, t) if t > 0 else (0.0, 1.0)
        return x_arr + mean, np.array([mean**3 / shape])
    if isinstance(spec, (VGWiener, NIGWiener)):
        clock_mean, _ = conditional_moments(spec.subordinator, [0.0], t)
        return x_arr, clock_mean
    raise UnsupportedError(f"conditional moments are not finite for {spec.tag}")


@dataclass(frozen=True)
class TransitionSampler:
    """Callable (rng, size) -> terminal states, the shape the MC engine consumes."""

    spec: ProcessSpec
    x: tuple[float, ...]
    t: float
    transform: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __call__(self, rng: np.random.Generator, size: int) -> np.ndarray:
        states = sample_transition(self.spec, self.x, self.t, rng, size=size)
        return states if self.transform is None else self.transform(states)
