"""The command bodies. Each takes a validated model document and returns data;
``__main__`` owns argument parsing and output."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from rateforge_core.calib import FitResult, calibration_problem, fit
from rateforge_core.config import build_model
from rateforge_core.csv_io import PATH_FIELDS, read_discount_curve
from rateforge_core.errors import ConfigError, DomainError, UnsupportedError
from rateforge_core.kernels import DEFAULT_MC_PATHS, Model
from rateforge_core.pricing import (
    DiscountCurve,
    SwaptionSpec,
    TenorStructure,
    bond_option_eigen_closed,
    bond_option_price_mc,
    bond_price,
    initial_curve,
    swaption_eigen_closed,
    swaption_price_mc,
)
from rateforge_core.processes import sample_paths
from rateforge_core.verification import SUITES, VerificationReport, verify_model

from .config_validator import validate_document

logger = logging.getLogger(__name__)

DEFAULT_MATURITIES = (0.25, 0.5, 1.0, 2.0, 5.0, 10.0)
DEFAULT_TENORS = (1.0, 5.0, 10.0)
DEFAULT_HORIZON = 5.0
DEFAULT_GRID_STEP = 1.0 / 16.0
DEFAULT_PATHS = 10
INSTRUMENTS = ("bond", "swaption", "bond_option")
METHODS = ("closed", "mc")


@dataclass(frozen=True)
class PriceResult:
    instrument: str
    method: str
    price: float
    stderr: float | None = None
    n: int | None = None

    def as_row(self) -> dict[str, Any]:
        return {"instrument": self.instrument, "method": self.method, "price": self.price, "stderr": self.stderr, "n": self.n}


PRICE_FIELDS = ["instrument", "method", "price", "stderr", "n"]


def model_from(doc: dict[str, Any]) -> Model:
    problems = validate_document(doc)
    if problems:
        raise ConfigError(problems)
    return build_model(doc)


def cmd_curve(
    doc: dict[str, Any],
    maturities: tuple[float, ...] | None = None,
    n: int | None = None,
    seed: int = 0,
    workers: int = 1,
) -> DiscountCurve:
    model = model_from(doc)
    mats = maturities or tuple(doc.get("maturities", DEFAULT_MATURITIES))
    return initial_curve(model, mats, n=n or doc.get("n"), seed=seed, workers=workers)


def _bond_batch(model: Model, t: float, T: float, states: np.ndarray) -> np.ndarray:
    kernel = model.kernel
    if T == t:
        return np.ones(len(states))
    return np.asarray(kernel.conditional(t, T, states), dtype=float) / np.asarray(kernel.value(t, states), dtype=float)


def cmd_simulate(
    doc: dict[str, Any],
    n_paths: int | None = None,
    tenors: tuple[float, ...] | None = None,
    horizon: float | None = None,
    grid_step: float | None = None,
    seed: int = 0,
    workers: int = 1,
) -> pd.DataFrame:
    """Zero yields -log P(t, t + tenor) / tenor along simulated driver paths (long format)."""
    model = model_from(doc)
    if not model.kernel.exact:
        raise UnsupportedError(f"simulate needs closed-form bond prices; the {model.kernel.tag} kernel is estimated by Monte Carlo")
    n_paths = n_paths or int(doc.get("n_paths", DEFAULT_PATHS))
    tenors = tenors or tuple(doc.get("tenors", DEFAULT_TENORS))
    horizon = horizon or float(doc.get("horizon", DEFAULT_HORIZON))
    grid_step = grid_step or float(doc.get("grid_step", DEFAULT_GRID_STEP))
    if not (horizon > 0 and grid_step > 0):
        raise DomainError(f"horizon and grid_step must be positive (got {horizon}, {grid_step})")
    steps = max(1, math.ceil(horizon / grid_step - 1e-9))
    times = np.linspace(0.0, horizon, steps + 1)
    paths = sample_paths(model.process, model.state, times, seed, n_paths, workers=workers)
    logger.info("simulated %d paths of %s on %d dates", n_paths, model.process.tag, len(times))

    frames = []
    for k, t in enumerate(times):
        states = paths[:, k, :]
        for tenor in tenors:
            yields = -np.log(_bond_batch(model, float(t), float(t) + tenor, states)) / tenor
            frames.append(pd.DataFrame({"path_id": np.arange(n_paths), "t": float(t), "tenor": float(tenor), "yield": yields}))
    table = pd.concat(frames, ignore_index=True)
    table = table.sort_values(["path_id", "t", "tenor"], kind="mergesort").reset_index(drop=True)
    if not np.all(np.isfinite(table["yield"])):
        raise DomainError("simulated yields contain non-finite values")
    return table[PATH_FIELDS]


def _swaption_spec(doc: dict[str, Any], dates: tuple[float, ...] | None, strike: float | None) -> SwaptionSpec:
    section = doc.get("swaption", {})
    dates = dates or tuple(section.get("dates", ()))
    if not dates:
        raise ConfigError(["swaption dates are needed: pass --dates or add a swaption section"])
    return SwaptionSpec(TenorStructure(tuple(dates)), strike=float(strike if strike is not None else section.get("strike", 0.0)))


def cmd_price(
    doc: dict[str, Any],
    instrument: str = "bond",
    method: str = "closed",
    maturity: float | None = None,
    expiry: float | None = None,
    strike: float | None = None,
    dates: tuple[float, ...] | None = None,
    n: int | None = None,
    seed: int = 0,
    workers: int = 1,
) -> PriceResult:
    if instrument not in INSTRUMENTS:
        raise KeyError(f"Unknown instrument: {instrument}")
    if method not in METHODS:
        raise KeyError(f"Unknown pricing method: {method}")
    model = model_from(doc)
    budget = n or int(doc.get("n", DEFAULT_MC_PATHS))
    state = model.state

    if instrument == "bond":
        if maturity is None:
            raise ConfigError(["bond pricing needs --T"])
        kernel = model.kernel
        if kernel.exact:
            return PriceResult("bond", "closed", bond_price(model, 0.0, maturity, state))
        if maturity == 0:
            return PriceResult("bond", "mc", 1.0, 0.0, budget)
        num, den = kernel.joint(state, (2.0 * maturity, 0.0), n=budget, seed=seed, workers=workers)
        return PriceResult("bond", "mc", num.mean / den.mean, num.stderr / den.mean, budget)

    if instrument == "swaption":
        spec = _swaption_spec(doc, dates, strike)
        if method == "closed":
            return PriceResult("swaption", "closed", swaption_eigen_closed(model, spec, 0.0, state, n=budget, seed=seed))
        est = swaption_price_mc(model, spec, 0.0, state, n=budget, seed=seed, workers=workers)
        return PriceResult("swaption", "mc", est.mean, est.stderr, est.n)

    if maturity is None or expiry is None:
        raise ConfigError(["bond_option pricing needs --expiry and --T"])
    k = float(strike if strike is not None else 0.0)
    if method == "closed":
        return PriceResult("bond_option", "closed", bond_option_eigen_closed(model, expiry, maturity, k))
    est = bond_option_price_mc(model, expiry, maturity, k, n=budget, seed=seed, workers=workers)
    return PriceResult("bond_option", "mc", est.mean, est.stderr, est.n)


def cmd_verify(
    doc: dict[str, Any],
    suites: tuple[str, ...] = SUITES,
    n: int | None = None,
    seed: int = 0,
    checks: int = 5,
    workers: int = 1,
) -> list[VerificationReport]:
    model = model_from(doc)
    budget = n or int(doc.get("n", DEFAULT_MC_PATHS))
    return verify_model(model, suites=suites, n=budget, seed=seed, checks=checks, workers=workers)


def cmd_calibrate(
    family: str,
    curve_path: str | Path,
    base: dict[str, Any] | None = None,
    max_iters: int = 2000,
    residual_tol: float = 1e-3,
) -> FitResult:
    target = read_discount_curve(curve_path)
    if base is not None:
        problems = validate_document(base)
        if problems:
            raise ConfigError(problems)
    problem = calibration_problem(family, target, base)
    return fit(problem, max_iters=max_iters, residual_tol=residual_tol)
