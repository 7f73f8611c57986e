"""Scalar coefficient profiles along the propagation coordinate.

Profiles represent quantities such as the trap frequency, the graded-index
coefficient, or a longitudinal potential as functions of the propagation
coordinate u.  Built-in closed forms carry analytic derivatives; tabulated
samples are interpolated linearly and differentiated by central differences.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

from .errors import ParameterError

_DEFAULT_FD_STEP = 1e-6


@dataclass(frozen=True)
class Profile:
    """Base class: a real-valued function of the propagation coordinate."""

    def value(self, u: float) -> float:
        raise NotImplementedError

    def derivative(self, u: float, step: float = _DEFAULT_FD_STEP) -> float:
        """d(value)/du; `step` is only used by finite-difference kinds."""
        raise NotImplementedError

    def squared_derivative(self, u: float, step: float = _DEFAULT_FD_STEP) -> float:
        """d(value^2)/du, analytic for closed forms."""
        return 2.0 * self.value(u) * self.derivative(u, step)

    def breakpoints(self, lo: float, hi: float) -> tuple[float, ...]:
        """Discontinuity locations strictly inside (lo, hi)."""
        return ()

    def __call__(self, u: float) -> float:
        return self.value(u)


@dataclass(frozen=True)
class ConstantProfile(Profile):
    c: float

    def value(self, u: float) -> float:
        return self.c

    def derivative(self, u: float, step: float = _DEFAULT_FD_STEP) -> float:
        return 0.0

    def squared_derivative(self, u: float, step: float = _DEFAULT_FD_STEP) -> float:
        return 0.0


@dataclass(frozen=True)
class LinearProfile(Profile):
    intercept: float
    slope: float

    def value(self, u: float) -> float:
        return self.intercept + self.slope * u

    def derivative(self, u: float, step: float = _DEFAULT_FD_STEP) -> float:
        return self.slope


@dataclass(frozen=True)
class SinusoidalProfile(Profile):
    """offset + amplitude * sin(omega * u + phase)."""

    offset: float
    amplitude: float
    omega: float
    phase: float = 0.0

    def value(self, u: float) -> float:
        return self.offset + self.amplitude * math.sin(self.omega * u + self.phase)

    def derivative(self, u: float, step: float = _DEFAULT_FD_STEP) -> float:
        return self.amplitude * self.omega * math.cos(self.omega * u + self.phase)


@dataclass(frozen=True)
class SinusoidalSquaredProfile(Profile):
    """value(u) = sqrt(base^2 * (1 + depth * sin(omega*u + phase))).

    The square of the profile is exactly sinusoidal, which is the natural
    parameterization for a periodically modulated quadratic confinement.
    Requires |depth| <= 1 so the square stays non-negative.
    """

    base: float
    depth: float
    omega: float
    phase: float = 0.0

    def __post_init__(self):
        if abs(self.depth) > 1.0:
            raise ParameterError("sinusoidal_squared profile needs |depth| <= 1")

    def _sq(self, u: float) -> float:
        return self.base**2 * (1.0 + self.depth * math.sin(self.omega * u + self.phase))

    def value(self, u: float) -> float:
        return math.sqrt(max(self._sq(u), 0.0))

    def derivative(self, u: float, step: float = _DEFAULT_FD_STEP) -> float:
        v = self.value(u)
        if v == 0.0:
            raise ParameterError("derivative undefined where the profile vanishes")
        return self.squared_derivative(u, step) / (2.0 * v)

    def squared_derivative(self, u: float, step: float = _DEFAULT_FD_STEP) -> float:
        return self.base**2 * self.depth * self.omega * math.cos(self.omega * u + self.phase)


@dataclass(frozen=True)
class PiecewiseConstantProfile(Profile):
    """Right-continuous step function: values[i] on [edges[i-1], edges[i])."""

    edges: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(self.edges) + 1:
            raise ParameterError("piecewise profile needs len(values) == len(edges) + 1")
        if any(b <= a for a, b in zip(self.edges[:-1], self.edges[1:])):
            raise ParameterError("piecewise profile edges must be strictly increasing")

    def value(self, u: float) -> float:
        return self.values[bisect.bisect_right(self.edges, u)]

    def derivative(self, u: float, step: float = _DEFAULT_FD_STEP) -> float:
        return 0.0

    def squared_derivative(self, u: float, step: float = _DEFAULT_FD_STEP) -> float:
        return 0.0

    def breakpoints(self, lo: float, hi: float) -> tuple[float, ...]:
        return tuple(e for e in self.edges if lo < e < hi)


@dataclass(frozen=True)
class TabulatedProfile(Profile):
    """Linear interpolation through (u, value) samples; no extrapolation."""

    us: tuple[float, ...]
    samples: tuple[float, ...]

    def __post_init__(self):
        if len(self.us) != len(self.samples) or len(self.us) < 2:
            raise ParameterError("tabulated profile needs >= 2 matching samples")
        if any(b <= a for a, b in zip(self.us[:-1], self.us[1:])):
            raise ParameterError("tabulated profile abscissae must be strictly increasing")

    def _segment(self, u: float) -> int:
        if u < self.us[0] - 1e-12 or u > self.us[-1] + 1e-12:
            raise ParameterError(
                f"tabulated profile queried at u={u!r} outside [{self.us[0]!r}, {self.us[-1]!r}]"
            )
        i = bisect.bisect_right(self.us, u) - 1
        return min(max(i, 0), len(self.us) - 2)

    def value(self, u: float) -> float:
        i = self._segment(u)
        t = (u - self.us[i]) / (self.us[i + 1] - self.us[i])
        return self.samples[i] + t * (self.samples[i + 1] - self.samples[i])

    def derivative(self, u: float, step: float = _DEFAULT_FD_STEP) -> float:
        i = self._segment(u)
        return (self.samples[i + 1] - self.samples[i]) / (self.us[i + 1] - self.us[i])

    def squared_derivative(self, u: float, step: float = _DEFAULT_FD_STEP) -> float:
        # Central difference with the caller's step, clipped to the table range.
        lo, hi = max(u - step, self.us[0]), min(u + step, self.us[-1])
        if hi <= lo:
            raise ParameterError("table too narrow for finite-difference step")
        return (self.value(hi) ** 2 - self.value(lo) ** 2) / (hi - lo)

    def breakpoints(self, lo: float, hi: float) -> tuple[float, ...]:
        # Interpolation kinks; segment-splitting integrators get full order.
        return tuple(u for u in self.us[1:-1] if lo < u < hi)


_KINDS = {
    "constant": (ConstantProfile, ("value",)),
    "linear": (LinearProfile, ("intercept", "slope")),
    "sinusoidal": (SinusoidalProfile, ("offset", "amplitude", "omega", "phase")),
    "sinusoidal_squared": (SinusoidalSquaredProfile, ("base", "depth", "omega", "phase")),
    "piecewise": (PiecewiseConstantProfile, ("edges", "values")),
    "tabulated": (TabulatedProfile, ("us", "values")),
}

_OPTIONAL = {"phase"}

_FIELD_NAMES = {
    "constant": {"value": "c"},
    "piecewise": {"edges": "edges", "values": "values"},
    "tabulated": {"us": "us", "values": "samples"},
}


def profile_from_spec(spec: dict) -> Profile:
    """Build a profile from a config mapping like {"kind": "constant", "value": 1.0}."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ParameterError(f"profile spec must be a mapping with a 'kind' key, got {spec!r}")
    kind = spec["kind"]
    if kind not in _KINDS:
        raise ParameterError(f"unknown profile kind {kind!r}; valid: {sorted(_KINDS)}")
    cls, keys = _KINDS[kind]
    unknown = set(spec) - set(keys) - {"kind"}
    if unknown:
        raise ParameterError(f"unknown keys {sorted(unknown)} in {kind!r} profile spec")
    missing = [k for k in keys if k not in spec and k not in _OPTIONAL]
    if missing:
        raise ParameterError(f"missing keys {missing} in {kind!r} profile spec")
    rename = _FIELD_NAMES.get(kind, {})
    kwargs = {}
    for key in keys:
        if key not in spec:
            continue
        val = spec[key]
        kwargs[rename.get(key, key)] = tuple(float(v) for v in val) if isinstance(
            val, (list, tuple)
        ) else float(val)
    return cls(**kwargs)


def profile_to_spec(profile: Profile) -> dict:
    """Inverse of :func:`profile_from_spec` for config echoing."""
    if isinstance(profile, ConstantProfile):
        return {"kind": "constant", "value": profile.c}
    if isinstance(profile, LinearProfile):
        return {"kind": "linear", "intercept": profile.intercept, "slope": profile.slope}
    if isinstance(profile, SinusoidalProfile):
        return {
            "kind": "sinusoidal",
            "offset": profile.offset,
            "amplitude": profile.amplitude,
            "omega": profile.omega,
            "phase": profile.phase,
        }
    if isinstance(profile, SinusoidalSquaredProfile):
        return {
            "kind": "sinusoidal_squared",
            "base": profile.base,
            "depth": profile.depth,
            "omega": profile.omega,
            "phase": profile.phase,
        }
    if isinstance(profile, PiecewiseConstantProfile):
        return {"kind": "piecewise", "edges": list(profile.edges), "values": list(profile.values)}
    if isinstance(profile, TabulatedProfile):
        return {"kind": "tabulated", "us": list(profile.us), "values": list(profile.samples)}
    raise ParameterError(f"cannot serialize profile {profile!r}")
