"""Fit kernel-family parameters to a target initial discount curve.

The loss is the sum of squared log-discount residuals on the target's own
maturities. Parameters move through smooth transforms (``c = 2 + e^s`` and
friends) so every trial point satisfies the family's constraints.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from scipy import optimize, special

from .config import build_model, load_preset, with_values
from .errors import DomainError, RateForgeError, UnsupportedError
from .pricing import DiscountCurve, initial_curve

logger = logging.getLogger(__name__)

TRANSFORMS = ("positive", "above_two", "negative", "identity", "bounded")
FAMILIES = ("trace", "affine_cir", "eigen", "killed")
BASE_PRESETS = {"trace": "trace_gauss_heat", "affine_cir": "affine_cir", "eigen": "eigen_bm", "killed": "killed_cir"}
PENALTY_RESIDUAL = 1e3
DEFAULT_RESTARTS = 3


@dataclass(frozen=True)
class FreeParameter:
    name: str
    path: tuple[Any, ...]
    transform: str = "positive"
    lower: float | None = None
    upper: float | None = None

    def __post_init__(self) -> None:
        if self.transform not in TRANSFORMS:
            raise KeyError(f"Unknown transform: {self.transform}")
        if self.transform == "bounded" and not (
            self.lower is not None and self.upper is not None and self.lower < self.upper
        ):
            raise DomainError(f"bounded parameter {self.name} needs lower < upper (got {self.lower}, {self.upper})")

    @property
    def bounds(self) -> tuple[float, float]:
        if self.transform == "positive":
            return (0.0, math.inf)
        if self.transform == "above_two":
            return (2.0, math.inf)
        if self.transform == "negative":
            return (-math.inf, 0.0)
        if self.transform == "bounded":
            return (float(self.lower), float(self.upper))
        return (-math.inf, math.inf)

    def to_value(self, raw: float) -> float:
        if self.transform == "positive":
            return math.exp(raw)
        if self.transform == "above_two":
            return 2.0 + math.exp(raw)
        if self.transform == "negative":
            return -math.exp(raw)
        if self.transform == "bounded":
            return float(self.lower + (self.upper - self.lower) * special.expit(raw))
        return float(raw)

    def to_raw(self, value: float) -> float:
        lo, hi = self.bounds
        if not lo < value < hi:
            raise DomainError(f"{self.name} = {value} lies outside ({lo}, {hi})")
        if self.transform == "positive":
            return math.log(value)
        if self.transform == "above_two":
            return math.log(value - 2.0)
        if self.transform == "negative":
            return math.log(-value)
        if self.transform == "bounded":
            return float(special.logit((value - lo) / (hi - lo)))
        return float(value)


@dataclass(frozen=True)
class CalibrationProblem:
    family: str
    target: DiscountCurve
    base_config: dict[str, Any] = field(compare=False)
    parameters: tuple[FreeParameter, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "parameters", tuple(self.parameters))
        if not self.parameters:
            raise DomainError("calibration needs at least one free parameter")
        if not self.maturities:
            raise DomainError("target curve has no positive maturities to fit")

    @property
    def maturities(self) -> tuple[float, ...]:
        return tuple(m for m in self.target.maturities if m > 0)

    @property
    def target_logs(self) -> np.ndarray:
        return np.log([p for m, p in zip(self.target.maturities, self.target.discounts) if m > 0])

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.parameters)

    def config_for(self, values: Sequence[float]) -> dict[str, Any]:
        return with_values(self.base_config, {p.path: float(v) for p, v in zip(self.parameters, values)})

    def initial_values(self) -> tuple[float, ...]:
        """The free parameters as they stand in the base config."""
        values = []
        for param in self.parameters:
            node: Any = self.base_config
            for key in param.path:
                node = node[key]
            values.append(float(node))
        return tuple(values)


@dataclass(frozen=True)
class FitResult:
    params: dict[str, float]
    residual_norm: float
    iterations: int
    converged: bool
    config: dict[str, Any] = field(compare=False)
    history: tuple[float, ...] = ()
    message: str = ""


def _base_for(family: str, base: Mapping[str, Any] | None) -> dict[str, Any]:
    if family not in FAMILIES:
        raise KeyError(f"Unknown calibration family: {family}")
    doc = dict(base) if base is not None else load_preset(BASE_PRESETS[family])
    expected = {"trace": "trace", "affine_cir": "affine_cir", "eigen": "eigen", "killed": "killed"}[family]
    if doc["kernel"]["type"] != expected:
        raise DomainError(f"{family} calibration needs a {expected} kernel config, not {doc['kernel']['type']}")
    return doc


def family_parameters(family: str, base: Mapping[str, Any]) -> tuple[FreeParameter, ...]:
    kernel = ("kernel", "params")
    process = ("process", "params")
    if family == "trace":
        params = [FreeParameter("lambda", kernel + ("lambda",), "positive"), FreeParameter("c", kernel + ("c",), "above_two")]
        if base["kernel"]["params"].get("family") == "quad_gauss":
            params.append(FreeParameter("alpha", kernel + ("alpha",), "positive"))
        return tuple(params)
    if family == "affine_cir":
        exponents = base["kernel"]["params"]["mu"]
        params = [FreeParameter(f"mu{i}", kernel + ("mu", i), "negative") for i in range(len(exponents))]
        params += [FreeParameter(name, process + (name,), "positive") for name in ("kappa_rev", "theta_mean", "sigma")]
        return tuple(params)
    if family == "eigen":
        if base["process"]["type"] != "brownian_drift":
            raise UnsupportedError(f"eigen calibration runs under brownian_drift, not {base['process']['type']}")
        # the curve sees the eigenvalue through kappa and the level g(x0) through x0
        return (FreeParameter("kappa", process + ("kappa", 0), "identity"), FreeParameter("x0", ("x0", 0), "identity"))
    if family == "killed":
        if base["process"]["type"] != "cir":
            raise UnsupportedError(f"killed calibration runs under cir, not {base['process']['type']}")
        names = ("kappa_rev", "theta_mean", "sigma")
        return tuple(FreeParameter(name, process + (name,), "positive") for name in names) + (
            FreeParameter("x0", ("x0", 0), "positive"),
        )
    raise KeyError(f"Unknown calibration family: {family}")


def calibration_problem(family: str, target: DiscountCurve, base: Mapping[str, Any] | None = None) -> CalibrationProblem:
    doc = _base_for(family, base)
    return CalibrationProblem(family=family, target=target, base_config=doc, parameters=family_parameters(family, doc))


def model_logs(problem: CalibrationProblem, values: Sequence[float]) -> np.ndarray:
    model = build_model(problem.config_for(values))
    if not model.kernel.exact:
        raise UnsupportedError(f"calibration needs closed-form kernel values, {model.kernel.tag} is estimated by simulation")
    curve = initial_curve(model, problem.maturities)
    return np.log(curve.discounts)


def residuals(problem: CalibrationProblem, values: Sequence[float]) -> np.ndarray:
    return model_logs(problem, values) - problem.target_logs


def residual_norm(problem: CalibrationProblem, values: Sequence[float]) -> float:
    return float(np.linalg.norm(residuals(problem, values)))


class _Tracker:
    """Evaluates raw parameter vectors and remembers the best point seen."""

    def __init__(self, problem: CalibrationProblem) -> None:
        self.problem = problem
        self.best_raw: np.ndarray | None = None
        self.best_norm = math.inf
        self.history: list[float] = []
        self.evaluations = 0
        self.failures = 0

    def values(self, raw: np.ndarray) -> list[float]:
        return [p.to_value(float(s)) for p, s in zip(self.problem.parameters, raw)]

    def residuals(self, raw: np.ndarray) -> np.ndarray:
        self.evaluations += 1
        try:
            res = residuals(self.problem, self.values(raw))
        except (RateForgeError, ValueError, ArithmeticError) as exc:
            self.failures += 1
            logger.debug("calibration point rejected: %s", exc)
            return np.full(len(self.problem.maturities), PENALTY_RESIDUAL)
        if not np.all(np.isfinite(res)):
            self.failures += 1
            return np.full(len(self.problem.maturities), PENALTY_RESIDUAL)
        norm = float(np.linalg.norm(res))
        if norm < self.best_norm:
            self.best_norm = norm
            self.best_raw = np.array(raw, dtype=float)
            self.history.append(norm)
        return res

    def loss(self, raw: np.ndarray) -> float:
        res = self.residuals(raw)
        return float(res @ res)


def fit(
    problem: CalibrationProblem,
    init: Sequence[float] | Mapping[str, float] | None = None,
    max_iters: int = 2000,
    tol: float = 1e-12,
    residual_tol: float = 1e-3,
    restarts: int = DEFAULT_RESTARTS,
) -> FitResult:
    """Nelder-Mead with restarts, then a finite-difference least-squares polish."""
    if init is None:
        init_values = problem.initial_values()
    elif isinstance(init, Mapping):
        missing = [name for name in problem.names if name not in init]
        if missing:
            raise DomainError(f"init is missing parameters: {', '.join(missing)}")
        init_values = tuple(float(init[name]) for name in problem.names)
    else:
        init_values = tuple(float(v) for v in init)
    if len(init_values) != len(problem.parameters):
        raise DomainError(f"init has {len(init_values)} values, the {problem.family} family has {len(problem.parameters)}")
    raw0 = np.array([p.to_raw(v) for p, v in zip(problem.parameters, init_values)])

    tracker = _Tracker(problem)
    start_norm = float(np.linalg.norm(tracker.residuals(raw0)))
    logger.info("Calibrating %s to %d maturities (initial residual %.3e)", problem.family, len(problem.maturities), start_norm)

    iterations = 0
    success = False
    point = raw0
    for attempt in range(restarts + 1):
        before = tracker.best_norm
        result = optimize.minimize(
            tracker.loss,
            point,
            method="Nelder-Mead",
            options={"maxiter": max_iters, "xatol": 1e-10, "fatol": tol, "adaptive": len(point) > 2},
        )
        iterations += int(result.nit)
        success = bool(result.success)
        point = tracker.best_raw if tracker.best_raw is not None else point
        if attempt > 0:
            logger.info("restart %d: residual %.3e", attempt, tracker.best_norm)
        if before - tracker.best_norm <= tol * max(1.0, before):
            break

    if tracker.best_raw is not None and tracker.best_norm < PENALTY_RESIDUAL:
        before = tracker.best_norm
        polish = optimize.least_squares(tracker.residuals, tracker.best_raw, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_iters)
        iterations += int(polish.nfev)
        if tracker.best_norm < before:
            success = success or bool(polish.success)
            logger.debug("least-squares polish lowered the residual from %.3e to %.3e", before, tracker.best_norm)

    best_raw = tracker.best_raw if tracker.best_raw is not None else raw0
    values = tracker.values(best_raw)
    norm = tracker.best_norm
    converged = success and norm <= residual_tol
    params = dict(zip(problem.names, values))
    if converged:
        message = "converged"
        logger.info("Calibration of %s converged: residual %.3e after %d iterations", problem.family, norm, iterations)
    else:
        message = (
            f"residual {norm:.3e} above tolerance {residual_tol:.1e}"
            if success
            else f"optimizer stopped without success at residual {norm:.3e}"
        )
        logger.warning(
            "Calibration of %s did not converge (%s); best parameters %s, %d rejected points",
            problem.family,
            message,
            params,
            tracker.failures,
        )
    return FitResult(
        params=params,
        residual_norm=norm,
        iterations=iterations,
        converged=converged,
        config=problem.config_for(values),
        history=tuple(tracker.history),
        message=message,
    )
