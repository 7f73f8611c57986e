"""Second-moment machinery: Ehrenfest laws, quality factor, moment ODE.

Everything here follows from the commutation algebra of the three effective
potentials (kinetic, contact, quadratic) of the generic transverse equation:
the width obeys a closed third-order ODE, expands parabolically with the
quadratic coefficient off, and carries an interaction-aware propagation
invariant (the quality factor) that survives any u-dependent quadratic
confinement as long as the nonlinear coefficient stays constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np
from scipy import fft as sp_fft

from .core import ParaxialParams
from .errors import (
    DegenerateBeamError,
    NormalizationError,
    NotAttractiveError,
    ParameterError,
)

if TYPE_CHECKING:  # pragma: no cover
    from .solver import TransverseField

_NORM_TOL = 1e-9


@dataclass(frozen=True)
class MomentSet:
    """Transverse-field moments at one propagation coordinate.

    r2 is the second moment about the chosen origin, w2 the centered width
    <x^2> - <x>^2 + <y^2> - <y>^2, Q the dilatation-generator expectation,
    Kexp/Vexp/Uexp the kinetic, contact, and quadratic effective potentials,
    and H0 = eps*Kexp + Vexp the free effective energy (stored redundantly).
    Kexp and Vexp may be NaN for samples reconstructed from the moment ODE,
    where only their H0 combination is determined.
    """

    r2: float
    Q: float
    Kexp: float
    Vexp: float
    Uexp: float
    H0: float
    w2: float
    centroid: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.r2 < -1e-12:
            raise ParameterError("r2 must be non-negative")
        if math.isfinite(self.Kexp) and self.Kexp < -1e-12:
            raise ParameterError("Kexp must be non-negative")
        scale = 1e-9 * max(1.0, abs(self.r2))
        if self.w2 > self.r2 + scale:
            raise ParameterError("centered width cannot exceed the second moment")
        if math.isfinite(self.Kexp) and math.isfinite(self.Vexp):
            tol = 1e-9 * max(1.0, abs(self.Kexp), abs(self.Vexp))
            if not (
                abs(self.H0 - (self.Kexp + self.Vexp)) <= tol
                or abs(self.H0 - (-self.Kexp + self.Vexp)) <= tol
            ):
                raise ParameterError("H0 must equal eps*Kexp + Vexp")


@dataclass(frozen=True)
class MomentSample:
    u: float
    moments: MomentSet
    mi4: float


@dataclass(frozen=True)
class MomentTrajectory:
    """Ordered (u, MomentSet, M_I^4) samples along a propagation."""

    samples: tuple[MomentSample, ...]

    def __post_init__(self):
        us = [s.u for s in self.samples]
        if any(b <= a for a, b in zip(us[:-1], us[1:])):
            raise ParameterError("trajectory samples must be strictly increasing in u")

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def u(self) -> np.ndarray:
        return np.array([s.u for s in self.samples])

    def column(self, name: str) -> np.ndarray:
        if name == "mi4":
            return np.array([s.mi4 for s in self.samples])
        return np.array([getattr(s.moments, name) for s in self.samples])


def grid_moments(
    values: np.ndarray,
    extent: float,
    params: ParaxialParams,
    u: float,
    origin: tuple[float, float] = (0.0, 0.0),
) -> MomentSet:
    """Moments of a gridded field by midpoint quadrature, spectral gradients.

    The dilatation moment is evaluated as Im of the overlap of psi* with
    (r . grad) psi, which equals the symmetrized-operator expectation for a
    unit-normalized field (integration by parts; checked in the tests).
    `origin` shifts the coordinates entering r2, Q and Uexp, e.g. by the
    gravitational sag offset.
    """
    n = values.shape[0]
    h = extent / n
    cell = h * h
    prob = (values.real**2 + values.imag**2) * cell
    norm = float(prob.sum())
    if abs(norm - 1.0) > _NORM_TOL:
        raise NormalizationError(f"field norm {norm!r} deviates from unity beyond {_NORM_TOL}")

    ax = (np.arange(n) - n // 2) * h
    x = ax[None, :] - origin[0]
    y = ax[:, None] - origin[1]

    px = float((x * prob).sum())
    py = float((y * prob).sum())
    r2 = float(((x * x + y * y) * prob).sum())
    w2 = r2 - px * px - py * py

    kax = 2.0 * np.pi * sp_fft.fftfreq(n, d=h)
    spec = sp_fft.fft2(values)
    dx = sp_fft.ifft2(1j * kax[None, :] * spec)
    dy = sp_fft.ifft2(1j * kax[:, None] * spec)
    kexp = float(((dx.real**2 + dx.imag**2 + dy.real**2 + dy.imag**2) * cell).sum())
    q = float((np.conj(values) * (x * dx + y * dy)).imag.sum() * cell)
    vexp = 0.5 * params.gamma * float((((values.real**2 + values.imag**2) ** 2) * cell).sum())
    uexp = params.k**2 * params.alpha_sq(u) * r2
    h0 = params.epsilon * kexp + vexp
    return MomentSet(
        r2=r2,
        Q=q,
        Kexp=kexp,
        Vexp=vexp,
        Uexp=uexp,
        H0=h0,
        w2=w2,
        centroid=(px + origin[0], py + origin[1]),
    )


def compute_moments(
    field: "TransverseField",
    params: ParaxialParams,
    u: float,
    origin: tuple[float, float] = (0.0, 0.0),
) -> MomentSet:
    """Moments of a TransverseField (see :func:`grid_moments`)."""
    return grid_moments(field.values, field.extent, params, u, origin)


def gaussian_moment_set(
    sigma: float,
    gamma: float,
    k: float,
    curvature_radius: float = math.inf,
    alpha0: float = 0.0,
    epsilon: int = 1,
) -> MomentSet:
    """Closed-form moments of a centered Gaussian exp(-r^2/2 sigma^2 + i k r^2/2R).

    Used by the analytic (no-PDE) workflows; tests check the gridded moments
    against the same integrals computed independently.
    """
    if sigma <= 0.0:
        raise ParameterError("sigma must be positive")
    r2 = sigma * sigma
    kexp = 1.0 / r2
    q = 0.0
    if math.isfinite(curvature_radius):
        kexp = 1.0 / r2 + (k / curvature_radius) ** 2 * r2
        q = k * r2 / curvature_radius
    vexp = gamma / (4.0 * math.pi * r2)
    uexp = k * k * alpha0 * alpha0 * r2
    h0 = epsilon * kexp + vexp
    return MomentSet(r2=r2, Q=q, Kexp=kexp, Vexp=vexp, Uexp=uexp, H0=h0, w2=r2)


def ehrenfest_derivatives(
    m: MomentSet, params: ParaxialParams, u: float
) -> tuple[float, float]:
    """First and second u-derivatives of <r^2> from the moment equations.

    d<r^2>/du = (2 eps / k) <Q>;
    d2<r^2>/du2 = (2 eps / k^2) (<H0> - eps <U>), with <U> re-evaluated at u.
    """
    eps, k = params.epsilon, params.k
    uexp = k * k * params.alpha_sq(u) * m.r2
    return 2.0 * eps / k * m.Q, 2.0 * eps / k**2 * (m.H0 - eps * uexp)


def free_expansion_r2(m0: MomentSet, params: ParaxialParams, u: float) -> float:
    """Parabolic width law with the quadratic coefficient off (alpha = 0).

    u is the propagation distance from the plane where m0 was taken.  Exact
    for any field and any constant nonlinearity: the quadratic coefficient is
    (eps/k^2) <H0>_0, the scale-invariant effective energy.
    """
    eps, k = params.epsilon, params.k
    return eps / k**2 * m0.H0 * u * u + 2.0 * eps / k * m0.Q * u + m0.r2


def tof_width(m0: MomentSet, k: float, tau: float) -> float:
    """Time-of-flight width law w^2(tau) = (2/k^2)(<K>_0 + <V>_0) tau^2 + w^2(0).

    Valid for a centered atomic beam with <Q>_0 = 0 (asserted); a linear
    gravitational potential is allowed since the law governs the centered
    width.  The mean-field term <V>_0 is the part dropped by naive
    kinetic-only analyses.
    """
    if not (math.isfinite(m0.Kexp) and math.isfinite(m0.Vexp)):
        raise ParameterError("tof_width needs explicit Kexp and Vexp")
    if abs(m0.Q) > 1e-8 * max(1.0, k * m0.w2):
        raise ParameterError(f"tof_width requires a waist start (Q0 = {m0.Q!r} != 0)")
    return 2.0 / k**2 * (m0.Kexp + m0.Vexp) * tau * tau + m0.w2


def velocity_dispersion_error(m0: MomentSet) -> float:
    """Relative error <V>_0/<K>_0 of the interaction-blind velocity estimate."""
    if not (math.isfinite(m0.Kexp) and math.isfinite(m0.Vexp)):
        raise ParameterError("velocity_dispersion_error needs explicit Kexp and Vexp")
    if m0.Kexp <= 0.0:
        raise DegenerateBeamError("beam has no transverse kinetic moment")
    return m0.Vexp / m0.Kexp


def quality_factor(m: MomentSet, epsilon: int) -> float:
    """Propagation invariant M_I^4 = eps <r^2> <H0> - <Q>^2.

    Constant along any trajectory with constant gamma and arbitrary alpha(u).
    Negative values flag the attractive collapse regime.
    """
    return epsilon * m.r2 * m.H0 - m.Q * m.Q


def quality_factor_centered(m: MomentSet, epsilon: int) -> float:
    """Quality factor with the centered width w^2 in place of <r^2>.

    The variant that stays invariant for non-centered beams in linear
    potentials; coincides with :func:`quality_factor` for centered beams.
    """
    return epsilon * m.w2 * m.H0 - m.Q * m.Q


def self_trapping_threshold(a_s: float) -> float:
    """Critical linear density 1/(2|a_s|) where the Gaussian M_I vanishes."""
    if a_s >= 0.0:
        raise NotAttractiveError("self-trapping needs attractive interactions (a_s < 0)")
    return 1.0 / (2.0 * abs(a_s))


def _ode_sample(y: tuple[float, float, float], params: ParaxialParams, u: float) -> MomentSample:
    """Rebuild (MomentSet, M_I^4) from the ODE state (r2, r2', r2'')."""
    eps, k = params.epsilon, params.k
    r2, d1, d2 = y
    q = eps * k * d1 / 2.0
    h0_minus_eps_u = eps * k * k * d2 / 2.0
    uexp = k * k * params.alpha_sq(u) * r2
    h0 = h0_minus_eps_u + eps * uexp
    m = MomentSet(
        r2=r2, Q=q, Kexp=math.nan, Vexp=math.nan, Uexp=uexp, H0=h0, w2=r2
    )
    return MomentSample(u=u, moments=m, mi4=quality_factor(m, eps))


def _rk4_step(y, u, h, rhs):
    k1 = rhs(u, y)
    k2 = rhs(u + 0.5 * h, tuple(a + 0.5 * h * b for a, b in zip(y, k1)))
    k3 = rhs(u + 0.5 * h, tuple(a + 0.5 * h * b for a, b in zip(y, k2)))
    k4 = rhs(u + h, tuple(a + h * b for a, b in zip(y, k3)))
    return tuple(
        a + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)
    )


def _advance(y, u_from: float, u_to: float, step: float, params: ParaxialParams):
    """Integrate between two sample points, splitting at alpha breakpoints.

    At a discontinuity of alpha^2 the second derivative of <r^2> jumps by
    -2 * Delta(alpha^2) * <r^2> (H0 and the first derivative are continuous);
    the jump is applied explicitly so RK4 keeps full order inside segments.
    """
    edges = [u_from, *params.alpha.breakpoints(u_from, u_to), u_to]
    for lo, hi in zip(edges[:-1], edges[1:]):
        span = hi - lo
        if span <= 0.0:
            continue
        nsub = max(1, math.ceil(span / step - 1e-12))
        h = span / nsub
        # Clamp stage coordinates below hi: step profiles are right-continuous,
        # so evaluating exactly at the breakpoint would read the next segment.
        hi_in = float(np.nextafter(hi, lo))

        def rhs(uu, yy, _hi=hi_in, _h=h):
            uc = min(uu, _hi)
            a2 = params.alpha_sq(uc)
            da2 = params.alpha.squared_derivative(uc, _h)
            return (yy[1], yy[2], -4.0 * a2 * yy[1] - 2.0 * da2 * yy[0])

        u = lo
        for _ in range(nsub):
            y = _rk4_step(y, u, h, rhs)
            u += h
        # Probe for a genuine alpha^2 discontinuity at the segment end (the
        # step convention is right-continuous, so the landed sample belongs
        # to the next segment).  Smooth profiles see an O(delta) difference
        # that falls below the threshold.
        du_eps = 1e-9 * max(1.0, abs(hi))
        try:
            a2_plus = params.alpha_sq(hi + du_eps)
            a2_minus = params.alpha_sq(hi - du_eps)
        except ParameterError:
            continue  # probing past a tabulated range: no jump
        jump = a2_plus - a2_minus
        if abs(jump) > 1e-6 * (1.0 + abs(a2_plus) + abs(a2_minus)):
            y = (y[0], y[1], y[2] - 2.0 * jump * y[0])
    return y


def moment_ode_samples(
    m0: MomentSet,
    params: ParaxialParams,
    us: Sequence[float],
    step: float,
) -> MomentTrajectory:
    """Integrate the third-order width ODE, sampling exactly at `us`.

    The state is (<r^2>, d<r^2>/du, d2<r^2>/du2) seeded from m0 via the
    Ehrenfest relations; Q and H0 - eps*U are reconstructed at each sample.
    For a non-centered beam in a linear potential seed m0 with its centered
    moments instead.
    """
    if step <= 0.0:
        raise ParameterError("integrator step must be positive")
    us = list(us)
    if len(us) < 1:
        raise ParameterError("need at least one sample point")
    u0 = us[0]
    d1, d2 = ehrenfest_derivatives(m0, params, u0)
    y = (m0.r2, d1, d2)
    samples = [_ode_sample(y, params, u0)]
    for u_prev, u_next in zip(us[:-1], us[1:]):
        if u_next <= u_prev:
            raise ParameterError("sample points must be strictly increasing")
        y = _advance(y, u_prev, u_next, step, params)
        samples.append(_ode_sample(y, params, u_next))
    return MomentTrajectory(tuple(samples))


def moment_ode_solve(
    m0: MomentSet,
    params: ParaxialParams,
    span: tuple[float, float],
    step: float,
) -> MomentTrajectory:
    """Integrate the width ODE over `span`, recording every `step`.

    For constant alpha the solution oscillates at angular frequency
    2*alpha regardless of gamma; with alpha = 0 it reduces to the
    free-expansion parabola.
    """
    u0, u1 = span
    if step <= 0.0:
        raise ParameterError("integrator step must be positive")
    if u1 <= u0:
        raise ParameterError("span must be increasing")
    n = max(1, math.ceil((u1 - u0) / step - 1e-12))
    us = [u0 + (u1 - u0) * i / n for i in range(n + 1)]
    return moment_ode_samples(m0, params, us, step)


def oscillation_frequency(traj: MomentTrajectory, params: ParaxialParams) -> float:
    """Angular frequency of the <r^2> oscillation from zero crossings.

    Uses d<r^2>/du = (2 eps/k) <Q>, locating sign changes of Q by linear
    interpolation and averaging successive half-periods; requires at least
    three full periods in the trajectory.
    """
    us = traj.u()
    d1 = 2.0 * params.epsilon / params.k * traj.column("Q")
    crossings = []
    for i in range(len(us) - 1):
        a, b = d1[i], d1[i + 1]
        if a == 0.0:
            crossings.append(us[i])
        elif a * b < 0.0:
            crossings.append(us[i] + (us[i + 1] - us[i]) * a / (a - b))
    if len(crossings) < 7:
        raise ParameterError(
            f"found {len(crossings)} width-derivative zero crossings; need >= 7 (3 periods)"
        )
    halves = np.diff(np.array(crossings))
    return math.pi / float(halves.mean())
