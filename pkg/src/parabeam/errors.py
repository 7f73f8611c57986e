"""Exception types raised across the toolkit.

Configuration and physical-setup problems derive from :class:`SetupError`
(a ``ValueError``); failures occurring while a propagation is running derive
from :class:`NumericalError` (a ``RuntimeError``).  The service layer maps the
former to HTTP 422 and the latter to HTTP 500 so that the CLI can translate
them into its documented exit codes.
"""

from __future__ import annotations


class SetupError(ValueError):
    """Invalid configuration, specification, or operation preconditions."""


class ConfigError(SetupError):
    """Run-configuration file failed to parse or validate."""


class InvalidSpecError(SetupError):
    """A beam/medium specification violates its invariants."""


class ParameterError(SetupError):
    """An operation argument is out of its admissible range."""


class GridError(SetupError):
    """Grid too coarse or too small for the requested beam."""


class NormalizationError(SetupError):
    """Field is not normalized to unity within tolerance."""


class TurningPointError(SetupError):
    """Classical turning point (E <= U) inside the requested span."""


class WKBValidityError(SetupError):
    """WKB validity margin too small; quantum reflections likely."""

    def __init__(self, message: str, margin: float):
        super().__init__(message)
        self.margin = margin


class DegenerateBeamError(SetupError):
    """Beam has no usable transverse structure (e.g. zero kinetic moment)."""


class NotAttractiveError(SetupError):
    """Operation requires attractive interactions (a_s < 0)."""


class CollapseRegimeError(SetupError):
    """Quality factor is non-positive; the q-parameter is undefined."""


class SingularPropagationError(SetupError):
    """Degenerate denominator in the q-parameter transport law."""


class ThinElementError(SetupError):
    """Kernel undefined for B = 0 (delta-distribution limit)."""


class NumericalError(RuntimeError):
    """Base class for failures during a numerical run."""


class InstabilityError(NumericalError):
    """Non-finite values appeared during propagation."""

    def __init__(self, message: str, u: float):
        super().__init__(message)
        self.u = u


class DomainOverflowError(NumericalError):
    """Field reached the grid boundary beyond the anti-wraparound guard."""

    def __init__(self, message: str, u: float):
        super().__init__(message)
        self.u = u
