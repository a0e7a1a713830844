from .calib import CalibrationProblem, FitResult, FreeParameter, calibration_problem, fit
from .config import build_model, list_presets, load_config, load_preset, resolve_seed, validate_config
from .csv_io import export_rows_to_csv, read_discount_curve, write_discount_curve
from .errors import (
    ConfigError,
    DomainError,
    QuadratureError,
    RateForgeError,
    SimulationError,
    SpecialFunctionError,
    UnsupportedError,
)
from .kernels import Model, check_propagation, conditional_spd, eval_kernel, killed_eval, spd, weighted_eval
from .mc import MCEstimate, estimate, run_chunks
from .pricing import (
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
from .processes import sample_path, sample_paths, sample_transition, transition_density
from .specfun import bessel_k, bs_integral, gaussian_quadratic_integral, integrate, std_normal_cdf
from .verification import SUITES, VerificationReport, cauchy_erratum_report, verify_model

__all__ = [
    "std_normal_cdf",
    "bs_integral",
    "bessel_k",
    "integrate",
    "gaussian_quadratic_integral",
    "sample_transition",
    "sample_path",
    "sample_paths",
    "transition_density",
    "MCEstimate",
    "estimate",
    "run_chunks",
    "Model",
    "eval_kernel",
    "conditional_spd",
    "spd",
    "weighted_eval",
    "killed_eval",
    "check_propagation",
    "TenorStructure",
    "SwaptionSpec",
    "DiscountCurve",
    "bond_price",
    "initial_curve",
    "short_rate",
    "swap_rate",
    "swaption_price_mc",
    "swaption_eigen_closed",
    "bond_option_eigen_closed",
    "bond_option_price_mc",
    "derivative_price",
    "forward_swap_annuity",
    "SUITES",
    "VerificationReport",
    "verify_model",
    "cauchy_erratum_report",
    "CalibrationProblem",
    "FreeParameter",
    "FitResult",
    "calibration_problem",
    "fit",
    "load_preset",
    "list_presets",
    "load_config",
    "validate_config",
    "build_model",
    "resolve_seed",
    "export_rows_to_csv",
    "read_discount_curve",
    "write_discount_curve",
    "RateForgeError",
    "DomainError",
    "UnsupportedError",
    "QuadratureError",
    "SpecialFunctionError",
    "SimulationError",
    "ConfigError",
]
