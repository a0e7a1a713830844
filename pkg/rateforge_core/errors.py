from __future__ import annotations


class RateForgeError(Exception):
    """Root of every error raised by rateforge_core."""


class DomainError(RateForgeError, ValueError):
    """An argument or parameter lies outside the domain of an operation."""


class UnsupportedError(RateForgeError, NotImplementedError):
    """No density, transform or closed form exists for the requested pairing."""


class QuadratureError(RateForgeError, RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""


class SpecialFunctionError(RateForgeError, ArithmeticError):
    """A special function value is not representable in double precision."""


class SimulationError(RateForgeError, RuntimeError):
    """Monte-Carlo sampling produced unusable values."""


class ConfigError(RateForgeError, ValueError):
    def __init__(self, problems: list[str]) -> None:
        self.problems = list(problems)
        joined = "; ".join(self.problems) if self.problems else "invalid configuration"
        super().__init__(joined)
