"""Generic-equation parameterization and physical-to-generic mappings.

The transverse evolution solved by this toolkit is the unified equation

    2 i k dpsi/du = -eps * Lap_T psi + gamma |psi|^2 psi + eps k^2 alpha(u)^2 r^2 psi

covering Kerr optics (eps = -1, u = z) and interacting atomic beams
(eps = +1, u = tau, the classical time-of-flight coordinate).  This module
maps concrete optical and atomic specifications onto the generic
coefficients, handles the longitudinal WKB treatment and the z -> tau
transform, and the gravitational sag offset.

Units are SI throughout; natural units (hbar = m = c = 1) are just the
corresponding field values, which is what the tests use.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

from .errors import InvalidSpecError, NumericalError, ParameterError, TurningPointError, WKBValidityError
from .profiles import ConstantProfile, Profile

HBAR_SI = 1.054571817e-34  # J s (CODATA 2018)
C_SI = 299792458.0  # m/s


class Axis(str, enum.Enum):
    """Which coordinate the generic u represents."""

    Z = "z"
    TAU = "tau"


@dataclass(frozen=True)
class ParaxialParams:
    """Coefficients (k, eps, gamma, alpha) of the generic transverse equation."""

    k: float
    epsilon: int
    gamma: float
    alpha: Profile
    u_label: Axis = Axis.Z

    def __post_init__(self):
        if not (self.k > 0.0 and math.isfinite(self.k)):
            raise InvalidSpecError(f"k must be positive and finite, got {self.k!r}")
        if self.epsilon not in (1, -1):
            raise InvalidSpecError(f"epsilon must be +1 or -1, got {self.epsilon!r}")
        if not math.isfinite(self.gamma):
            raise InvalidSpecError("gamma must be finite")

    def alpha_sq(self, u: float) -> float:
        a = self.alpha.value(u)
        if not math.isfinite(a):
            raise InvalidSpecError(f"alpha({u!r}) is not finite")
        return a * a


@dataclass(frozen=True)
class OpticalBeamSpec:
    """Monochromatic light beam in a graded-index Kerr medium."""

    epsilon_r0: float
    omega: float
    chi3: float = 0.0
    beta: Profile = ConstantProfile(0.0)
    c: float = C_SI

    def __post_init__(self):
        if self.epsilon_r0 <= 0.0:
            raise InvalidSpecError("relative permittivity must be positive")
        if self.omega <= 0.0:
            raise InvalidSpecError("optical angular frequency must be positive")
        if self.c <= 0.0:
            raise InvalidSpecError("speed of light must be positive")


@dataclass(frozen=True)
class AtomicBeamSpec:
    """Guided atom-laser beam with mean-field contact interactions."""

    mass: float
    n1d: float
    a_s: float
    omega_perp: Profile = ConstantProfile(0.0)
    hbar: float = HBAR_SI
    flux: float | None = None
    energy: float | None = None

    def __post_init__(self):
        if self.mass <= 0.0:
            raise InvalidSpecError("atomic mass must be positive")
        if self.n1d < 0.0:
            raise InvalidSpecError("linear density must be non-negative")
        if self.hbar <= 0.0:
            raise InvalidSpecError("hbar must be positive")


@dataclass(frozen=True)
class LongitudinalPotential:
    """Potential along the beam axis, with the reference coordinate z0."""

    u_par: Profile
    z0: float = 0.0


def map_optical(spec: OpticalBeamSpec) -> ParaxialParams:
    """Generic coefficients of a Kerr/GRIN optical beam.

    k = sqrt(eps_r0) * omega / c, eps = -1, gamma = chi3 * k^2 / eps_r0,
    alpha = beta, and u runs along the optical axis z.
    """
    k = math.sqrt(spec.epsilon_r0) * spec.omega / spec.c
    gamma = spec.chi3 * k * k / spec.epsilon_r0
    return ParaxialParams(k=k, epsilon=-1, gamma=gamma, alpha=spec.beta, u_label=Axis.Z)


def map_atomic(spec: AtomicBeamSpec) -> ParaxialParams:
    """Generic coefficients of an interacting atomic beam.

    k = m/hbar, eps = +1, gamma = 8 pi n1d a_s (dimensionless), alpha is the
    transverse trap frequency, and u is the classical flight time tau.  The
    caller asserts a constant linear density (no longitudinal potential);
    otherwise gamma would acquire a tau dependence this toolkit excludes.
    """
    gamma = 8.0 * math.pi * spec.n1d * spec.a_s
    return ParaxialParams(
        k=spec.mass / spec.hbar, epsilon=1, gamma=gamma, alpha=spec.omega_perp, u_label=Axis.TAU
    )


def with_unit_wavenumber(params: ParaxialParams) -> ParaxialParams:
    """Rescale to k = 1 units.

    The transverse coordinate absorbs the rescaling (r -> sqrt(k) r for
    fields); gamma, alpha, and therefore the product alpha * u are untouched.
    """
    return replace(params, k=1.0)


def longitudinal_momentum(pot: LongitudinalPotential, spec: AtomicBeamSpec, z: float) -> float:
    """Classical momentum p(z) = sqrt(2 m (E - U(z))); E <= U is a turning point."""
    if spec.energy is None:
        raise InvalidSpecError("atomic spec needs `energy` for longitudinal analysis")
    gap = spec.energy - pot.u_par.value(z)
    if gap <= 0.0:
        raise TurningPointError(f"E <= U_par at z={z!r}: classically forbidden")
    return math.sqrt(2.0 * spec.mass * gap)


def _adaptive_simpson(f, a: float, b: float, tol: float, max_depth: int = 40) -> float:
    """Classic adaptive Simpson quadrature with absolute tolerance `tol`."""

    def simpson(x0, x2, f0, f1, f2):
        return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)

    def recurse(x0, x2, f0, f1, f2, whole, tol, depth):
        xm = 0.5 * (x0 + x2)
        xl, xr = 0.5 * (x0 + xm), 0.5 * (xm + x2)
        fl, fr = f(xl), f(xr)
        left = simpson(x0, xm, f0, fl, f1)
        right = simpson(xm, x2, f1, fr, f2)
        if depth <= 0:
            raise NumericalError("adaptive quadrature failed to converge")
        if abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return recurse(x0, xm, f0, fl, f1, left, 0.5 * tol, depth - 1) + recurse(
            xm, x2, f1, fr, f2, right, 0.5 * tol, depth - 1
        )

    if a == b:
        return 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    return recurse(a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol, max_depth)


def tau_of_z(
    pot: LongitudinalPotential, spec: AtomicBeamSpec, z: float, tol: float = 1e-10
) -> float:
    """Classical flight time from z0 to z: integral of m / p(z') dz'.

    Strictly increasing in z and additive over adjacent intervals.  Raises
    TurningPointError if the quadrature meets a classically forbidden point.
    """
    sign = 1.0 if z >= pot.z0 else -1.0
    lo, hi = (pot.z0, z) if z >= pot.z0 else (z, pot.z0)
    return sign * _adaptive_simpson(
        lambda x: spec.mass / longitudinal_momentum(pot, spec, x), lo, hi, tol
    )


def wkb_validity(pot: LongitudinalPotential, spec: AtomicBeamSpec, z: float) -> float:
    """Ratio sqrt(8m) (E - U)^{3/2} / (hbar |dU/dz|); >> 1 means WKB is safe.

    Returns +inf where the potential is locally flat.  The margin scales as
    (E - U)^{3/2}, so slow beams near a barrier are flagged first.
    """
    if spec.energy is None:
        raise InvalidSpecError("atomic spec needs `energy` for longitudinal analysis")
    gap = spec.energy - pot.u_par.value(z)
    if gap <= 0.0:
        raise TurningPointError(f"E <= U_par at z={z!r}: classically forbidden")
    slope = abs(pot.u_par.derivative(z))
    if slope == 0.0:
        return math.inf
    return math.sqrt(8.0 * spec.mass) * gap**1.5 / (spec.hbar * slope)


def wkb_longitudinal(
    pot: LongitudinalPotential, spec: AtomicBeamSpec, z: float, tol: float = 1e-10
) -> tuple[float, float]:
    """WKB amplitude and phase of the longitudinal wave at z.

    amplitude = sqrt(m F / p(z)) so that the linear density is
    n1D(z) = amplitude^2 = m F / p(z) and flux is conserved exactly;
    phase = (1/hbar) * integral of p from z0 to z.
    """
    if spec.flux is None:
        raise InvalidSpecError("atomic spec needs `flux` for the WKB amplitude")
    if spec.flux < 0.0:
        raise InvalidSpecError("flux must be non-negative")
    margin = wkb_validity(pot, spec, z)
    if margin <= 1.0:
        raise WKBValidityError(
            f"WKB margin {margin:.3g} <= 1 at z={z!r}; quantum reflections likely", margin
        )
    p = longitudinal_momentum(pot, spec, z)
    amplitude = math.sqrt(spec.mass * spec.flux / p)
    sign = 1.0 if z >= pot.z0 else -1.0
    lo, hi = (pot.z0, z) if z >= pot.z0 else (z, pot.z0)
    phase = sign * _adaptive_simpson(
        lambda x: longitudinal_momentum(pot, spec, x), lo, hi, tol
    ) / spec.hbar
    return amplitude, phase


def linear_density(pot: LongitudinalPotential, spec: AtomicBeamSpec, z: float) -> float:
    """WKB linear density n1D(z) = m F / p(z)."""
    if spec.flux is None:
        raise InvalidSpecError("atomic spec needs `flux` for the linear density")
    return spec.mass * spec.flux / longitudinal_momentum(pot, spec, z)


def n1d_relative_variation(
    pot: LongitudinalPotential,
    spec: AtomicBeamSpec,
    z_lo: float,
    z_hi: float,
    samples: int = 257,
) -> float:
    """Relative spread (max - min) / value-at-z0 of n1D over [z_lo, z_hi].

    Diagnostic for the constant-density assumption behind the nonlinear
    transport laws; the accept/reject threshold is left to the caller.
    """
    if samples < 2:
        raise ParameterError("need at least 2 samples")
    ref = linear_density(pot, spec, pot.z0)
    vals = [
        linear_density(pot, spec, z_lo + (z_hi - z_lo) * i / (samples - 1))
        for i in range(samples)
    ]
    return (max(vals) - min(vals)) / ref


def gravitational_sag(g: float, omega_perp: float) -> float:
    """Equilibrium displacement g / omega_perp^2 of a trapped beam under gravity.

    Consumers shift the vertical coordinate by this offset before taking
    moments (the `origin` argument of compute_moments); with omega_perp = 0
    there is no sag and the linear-potential moment route applies instead.
    """
    if omega_perp <= 0.0:
        raise ParameterError("gravitational sag needs omega_perp > 0")
    return g / omega_perp**2
