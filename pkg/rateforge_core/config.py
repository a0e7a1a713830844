"""JSON model configuration: presets, validation and model construction.

A model document looks like::

    {"schema_version": 1,
     "process": {"type": "brownian_drift", "params": {"kappa": [0.0]}},
     "kernel": {"type": "trace", "params": {"family": "gauss_heat", "lambda": 1.0, "c": 3.0}},
     "x0": [0.0], "seed": 7}
"""

from __future__ import annotations

import copy
import json
import math
import os
from functools import lru_cache
from pathlib import Path
from typing import Any

from .errors import ConfigError, RateForgeError
from .kernels import (
    AffineExpSumKernel,
    CauchySym,
    ConstantEigen,
    ConstantH,
    ConstantRate,
    EigenKernel,
    EigenSumKernel,
    EigenTerm,
    ExpectationKernel,
    ExponentialH,
    ExponentialLinearEigen,
    ExponentialWeight,
    GaussHeat,
    GaussianH,
    GaussianQuadraticEigen,
    KernelSpec,
    KilledKernel,
    LevyDensityKernel,
    LinearRate,
    Model,
    NIGHeat,
    QuadGauss,
    QuadraticRate,
    TraceKernel,
    VGHeat,
    WeightedKernel,
)
from .processes import CIR, Cauchy, NIGWiener, ProcessSpec, VGWiener, get_process_type

SCHEMA_VERSION = 1
SEED_ENV = "HKA_SEED"
PRESET_DIR = Path(__file__).resolve().with_name("presets")
PRESET_PREFIX = "preset:"

TOP_LEVEL_KEYS = {
    "schema_version",
    "name",
    "description",
    "process",
    "kernel",
    "x0",
    "horizon",
    "grid_step",
    "seed",
    "maturities",
    "tenors",
    "n_paths",
    "n",
    "swaption",
}
REQUIRED_KEYS = {"schema_version", "process", "kernel", "x0"}

KERNEL_PARAM_KEYS: dict[str, set[str]] = {
    "levy_density": {"shift"},
    "expectation": {"h", "estimator", "n", "seed"},
    "affine_cir": {"a", "mu"},
    "eigen": {"mu", "g"},
    "eigen_sum": {"terms"},
    "weighted": {"base", "weight"},
    "killed": {"rate", "estimator", "n", "seed", "grid_step"},
    "trace": {"family", "lambda", "c", "alpha"},
}

_H_TYPES = {"constant": (ConstantH, {"level"}), "gaussian": (GaussianH, {"a"}), "exponential": (ExponentialH, {"u"})}
_EIGEN_TYPES = {
    "constant": (ConstantEigen, {"level"}),
    "exponential_linear": (ExponentialLinearEigen, {"c"}),
    "gaussian_quadratic": (GaussianQuadraticEigen, {"coefficient"}),
}
_RATE_TYPES = {
    "constant": (ConstantRate, {"rate"}),
    "linear": (LinearRate, {"scale", "shift"}),
    "quadratic": (QuadraticRate, {"scale", "shift"}),
}
_WEIGHT_TYPES = {"exponential": (ExponentialWeight, {"alpha"})}


@lru_cache(maxsize=16)
def _read_preset(name: str) -> str:
    path = PRESET_DIR / f"{name}.json"
    if not path.is_file():
        raise KeyError(f"Unknown preset: {name}")
    return path.read_text(encoding="utf-8")


def load_preset(name: str) -> dict[str, Any]:
    return json.loads(_read_preset(name))


def list_presets() -> list[dict[str, str]]:
    rows = []
    for path in sorted(PRESET_DIR.glob("*.json")):
        doc = load_preset(path.stem)
        rows.append({"name": path.stem, "kernel": doc["kernel"]["type"], "process": doc["process"]["type"], "description": doc.get("description", "")})
    return rows


def load_config(source: str | Path) -> dict[str, Any]:
    """Reads a config file, or a packaged preset given as ``preset:NAME``."""
    text = str(source)
    if text.startswith(PRESET_PREFIX):
        return load_preset(text[len(PRESET_PREFIX):])
    path = Path(source)
    try:
        with path.open("r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path} is not valid JSON: {exc}"]) from exc
    except OSError as exc:
        raise ConfigError([f"cannot read config {path}: {exc}"]) from exc


def _typed(spec: dict[str, Any], table: dict[str, tuple[type, set[str]]], what: str) -> Any:
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError([f"{what} must be an object with a 'type'"])
    kind = spec["type"]
    if kind not in table:
        raise ConfigError([f"Unknown {what} type: {kind} (expected one of {', '.join(sorted(table))})"])
    cls, allowed = table[kind]
    extra = set(spec) - allowed - {"type"}
    if extra:
        raise ConfigError([f"{what} '{kind}' has unknown keys: {sorted(extra)}"])
    params = {k: (tuple(v) if isinstance(v, list) else v) for k, v in spec.items() if k != "type"}
    return cls(**params)


def build_process(section: dict[str, Any]) -> ProcessSpec:
    if not isinstance(section, dict) or "type" not in section:
        raise ConfigError(["process must be an object with a 'type'"])
    extra = set(section) - {"type", "params"}
    if extra:
        raise ConfigError([f"process has unknown keys: {sorted(extra)}"])
    cls = get_process_type(section["type"])
    params = {k: (tuple(v) if isinstance(v, list) else v) for k, v in section.get("params", {}).items()}
    try:
        return cls(**params)
    except TypeError as exc:
        raise ConfigError([f"process '{section['type']}' parameters: {exc}"]) from exc


def _trace_family(params: dict[str, Any], process: ProcessSpec) -> Any:
    family = params.get("family")
    if family == "gauss_heat":
        return GaussHeat()
    if family == "quad_gauss":
        return QuadGauss(alpha=float(params.get("alpha", 1.0)))
    # the remaining heat kernels take their parameters from the driver
    if family == "cauchy":
        theta = process.theta if isinstance(process, Cauchy) else float(params.get("theta", 1.0))
        return CauchySym(theta=theta)
    if family in ("vg", "nig"):
        if not isinstance(process, (VGWiener, NIGWiener)):
            raise ConfigError([f"trace family '{family}' needs a {family} process, not {process.tag}"])
        cls = VGHeat if family == "vg" else NIGHeat
        return cls(eta=process.eta, gamma_rate=process.gamma_rate)
    raise ConfigError([f"Unknown trace family: {family} (expected gauss_heat, quad_gauss, cauchy, vg or nig)"])


def _eigenvalue(g: Any, process: ProcessSpec, declared: Any) -> float:
    if declared is not None:
        return float(declared)
    derived = g.eigenvalue(process)
    if derived is None:
        raise ConfigError([f"eigenvalue 'mu' must be given for a {g.tag} eigenfunction under {process.tag}"])
    return derived


def build_kernel(section: dict[str, Any], process: ProcessSpec) -> KernelSpec:
    if not isinstance(section, dict) or "type" not in section:
        raise ConfigError(["kernel must be an object with a 'type'"])
    extra = set(section) - {"type", "params"}
    if extra:
        raise ConfigError([f"kernel has unknown keys: {sorted(extra)}"])
    kind = section["type"]
    if kind not in KERNEL_PARAM_KEYS:
        raise KeyError(f"Unknown kernel type: {kind}")
    params = dict(section.get("params", {}))
    unknown = set(params) - KERNEL_PARAM_KEYS[kind]
    if unknown:
        raise ConfigError([f"kernel '{kind}' has unknown params: {sorted(unknown)}"])

    if kind == "levy_density":
        return LevyDensityKernel(process=process, shift=float(params.get("shift", 0.0)))
    if kind == "expectation":
        return ExpectationKernel(
            h=_typed(params.get("h", {"type": "constant"}), _H_TYPES, "h"),
            process=process,
            estimator=params.get("estimator", "closed"),
            n=int(params.get("n", 100_000)),
            seed=int(params.get("seed", 0)),
        )
    if kind == "affine_cir":
        if not isinstance(process, CIR):
            raise ConfigError([f"affine_cir needs a cir process, not {process.tag}"])
        return AffineExpSumKernel(a=tuple(params.get("a", (1.0,))), mu=tuple(params.get("mu", (-1.0,))), process=process)
    if kind == "eigen":
        g = _typed(params.get("g", {}), _EIGEN_TYPES, "eigenfunction")
        return EigenKernel(mu=_eigenvalue(g, process, params.get("mu")), g=g)
    if kind == "eigen_sum":
        terms = []
        for term in params.get("terms", []):
            g = _typed(term.get("g", {}), _EIGEN_TYPES, "eigenfunction")
            terms.append(
                EigenTerm(a=float(term.get("a", 1.0)), beta=float(term.get("beta", 0.0)), g=g, mu=_eigenvalue(g, process, term.get("mu")))
            )
        return EigenSumKernel(terms=tuple(terms))
    if kind == "weighted":
        base = build_kernel(params.get("base", {"type": "expectation"}), process)
        return WeightedKernel(base=base, weight=_typed(params.get("weight", {"type": "exponential"}), _WEIGHT_TYPES, "weight"))
    if kind == "killed":
        return KilledKernel(
            rate=_typed(params.get("rate", {"type": "constant"}), _RATE_TYPES, "killing rate"),
            process=process,
            estimator=params.get("estimator", "mc"),
            n=int(params.get("n", 100_000)),
            seed=int(params.get("seed", 0)),
            grid_step=float(params.get("grid_step", 2.0**-8)),
        )
    return TraceKernel(family=_trace_family(params, process), lam=float(params.get("lambda", 1.0)), c=float(params.get("c", 3.0)))


def build_model(doc: dict[str, Any]) -> Model:
    problems = validate_config(doc)
    if problems:
        raise ConfigError(problems)
    return _construct(doc)


def _construct(doc: dict[str, Any]) -> Model:
    process = build_process(doc["process"])
    kernel = build_kernel(doc["kernel"], process)
    return Model(kernel=kernel, process=process, x0=tuple(doc["x0"]), check_seed=int(doc.get("seed", 0) or 0))


def _family_problems(doc: dict[str, Any]) -> list[str]:
    kernel = doc.get("kernel", {})
    params = kernel.get("params", {}) if isinstance(kernel, dict) else {}
    kind = kernel.get("type") if isinstance(kernel, dict) else None
    problems = []
    if kind == "trace":
        lam = params.get("lambda", 1.0)
        c = params.get("c", 3.0)
        if not (isinstance(lam, (int, float)) and lam > 0):
            problems.append(f"kernel.params.lambda must be > 0 (got {lam}); try 1.0")
        if not (isinstance(c, (int, float)) and c > 2):
            problems.append(f"kernel.params.c must be > 2 (got {c}); the trace construction needs c > 2, try 3.0")
        proc = doc.get("process", {})
        eta = proc.get("params", {}).get("eta") if isinstance(proc, dict) else None
        if params.get("family") == "vg" and isinstance(eta, (int, float)) and isinstance(lam, (int, float)):
            if not eta * lam > 0.5:
                problems.append(
                    f"vg trace needs eta·lambda > 1/2 (got {eta}·{lam} = {eta * lam:g}); raise lambda above {0.5 / eta:g}"
                )
    if kind == "eigen" and "mu" in params:
        mu = params["mu"]
        if not (isinstance(mu, (int, float)) and mu < 0):
            problems.append(f"kernel.params.mu must be < 0 for eigen kernels (got {mu})")
    return problems


def validate_config(doc: Any) -> list[str]:
    """Every problem with a model document; an empty list means it builds."""
    if not isinstance(doc, dict):
        return ["config must be a JSON object"]
    problems: list[str] = []
    missing = REQUIRED_KEYS - set(doc)
    if missing:
        problems.append(f"config is missing keys: {sorted(missing)}")
    unknown = set(doc) - TOP_LEVEL_KEYS
    if unknown:
        problems.append(f"config has unknown keys: {sorted(unknown)}")
    if "schema_version" in doc and doc["schema_version"] != SCHEMA_VERSION:
        problems.append(f"schema_version must be {SCHEMA_VERSION} (got {doc['schema_version']})")
    if "x0" in doc and not (isinstance(doc["x0"], list) and doc["x0"] and all(isinstance(v, (int, float)) for v in doc["x0"])):
        problems.append("x0 must be a non-empty list of numbers")
    seed = doc.get("seed")
    if seed is not None and not (isinstance(seed, int) and 0 <= seed < 2**64):
        problems.append(f"seed must be an unsigned 64-bit integer (got {seed})")
    for key in ("horizon", "grid_step"):
        value = doc.get(key)
        if value is not None and not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            problems.append(f"{key} must be a positive number (got {value})")
    problems.extend(_family_problems(doc))
    if problems:
        return problems
    try:
        _construct(doc)
    except ConfigError as exc:
        problems.extend(exc.problems)
    except (RateForgeError, KeyError, TypeError, ValueError) as exc:
        problems.append(str(exc).strip("'\""))
    return problems


def resolve_seed(flag: int | None, doc: dict[str, Any] | None = None) -> int:
    """--seed flag, then the config's seed, then $HKA_SEED, then 0."""
    if flag is not None:
        return int(flag)
    if doc and doc.get("seed") is not None:
        return int(doc["seed"])
    env = os.getenv(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError([f"{SEED_ENV} must be an integer (got {env!r})"]) from exc
    return 0


def with_values(doc: dict[str, Any], values: dict[tuple[Any, ...], Any]) -> dict[str, Any]:
    """Copy of ``doc`` with each path (tuple of keys and list indices) set to its value."""
    out = copy.deepcopy(doc)
    for path, value in values.items():
        node = out
        for key in path[:-1]:
            node = node[key]
        node[path[-1]] = value
    return out
