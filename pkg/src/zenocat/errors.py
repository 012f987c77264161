"""Exception and warning types shared across the package."""

from __future__ import annotations


class ZenocatError(Exception):
    """Base class for all errors raised by zenocat."""


class InvalidDimensionError(ZenocatError, ValueError):
    """A Fock truncation or mode dimension is unusable (e.g. dim < 2)."""


class TruncationError(ZenocatError, ValueError):
    """An amplitude is too large for the requested Fock truncation.

    The guard is |alpha|^2 <= dim / 4.  ``required_dim`` is the smallest
    truncation that would accept the amplitude.
    """

    def __init__(self, message: str, required_dim: int):
        super().__init__(message)
        self.required_dim = required_dim


class SpaceMismatchError(ZenocatError, ValueError):
    """Two objects living on different Hilbert spaces were combined."""


class InvalidParameterError(ZenocatError, ValueError):
    """A physical parameter is out of its allowed range."""


class CalibrationError(ZenocatError, RuntimeError):
    """Numerical calibration did not converge.  Carries diagnostics."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class StiffnessError(ZenocatError, RuntimeError):
    """The adaptive integrator underflowed its step size.

    Usually means the model has rates far above what explicit stepping can
    resolve; reduce the system, loosen tolerances, or soften envelopes.
    """


class DegenerateSteadyStateError(ZenocatError, RuntimeError):
    """The Liouvillian kernel has dimension > 1; carries an orthonormal basis."""

    def __init__(self, message: str, basis: list):
        super().__init__(message)
        self.basis = basis


class UndefinedLeakageError(ZenocatError, ValueError):
    """Both Wigner lobes are non-positive; the leakage ratio is undefined."""


class ConfigError(ZenocatError, ValueError):
    """A configuration file or override is invalid."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        super().__init__(message)
        self.line = line
        self.column = column


class UnknownKeyError(ConfigError):
    """An unrecognized configuration key, with a best-guess suggestion."""

    def __init__(self, key: str, suggestion: str | None = None):
        msg = f"unknown configuration key {key!r}"
        if suggestion:
            msg += f" (did you mean {suggestion!r}?)"
        super().__init__(msg)
        self.key = key
        self.suggestion = suggestion


class UnitMissingError(ConfigError):
    """A key omitted its unit suffix (e.g. ``kappa2`` instead of ``kappa2_MHz``)."""

    def __init__(self, key: str, expected: str):
        super().__init__(
            f"key {key!r} is missing its unit suffix; use {expected!r}"
        )
        self.key = key
        self.expected = expected


class AdiabaticityWarning(UserWarning):
    """Adiabatic-elimination formulas used outside their validity regime."""
