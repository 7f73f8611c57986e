"""Ray-transfer matrices and the generalized complex-curvature transport law.

The 2x2 unit-determinant matrix of linear paraxial optics solves
dM/du = [[0, 1], [-alpha^2(u), 0]] M, and the same matrices transport the
interacting beam's complex curvature 1/q = 1/R + i M_I^2/(k w^2) by a Moebius
map: the quality factor M_I soaks up the whole nonlinear correction.  The
linear Gaussian machinery (propagator kernels, amplitude law) lives here too.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    CollapseRegimeError,
    ParameterError,
    SingularPropagationError,
    ThinElementError,
)
from .moments import MomentSet
from .profiles import Profile

_DET_TOL = 1e-9


@dataclass(frozen=True)
class RayMatrix:
    """Unit-determinant ABCD matrix; b carries units of u, c of 1/u."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if abs(det - 1.0) > _DET_TOL:
            raise ParameterError(f"ray matrix determinant {det!r} deviates from 1")

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])


def identity_matrix() -> RayMatrix:
    return RayMatrix(1.0, 0.0, 0.0, 1.0)


def free_matrix(u: float) -> RayMatrix:
    """[[1, u], [0, 1]]: uniform medium / free flight over u."""
    return RayMatrix(1.0, u, 0.0, 1.0)


def harmonic_matrix(alpha0: float, u: float) -> RayMatrix:
    """Quadratic-index duct or cylindrical trap of constant strength alpha0.

    [[cos(a u), sin(a u)/a], [-a sin(a u), cos(a u)]]; use free_matrix for
    alpha0 = 0.
    """
    if alpha0 <= 0.0:
        raise ParameterError("harmonic_matrix needs alpha0 > 0; use free_matrix for alpha0 = 0")
    s, c = math.sin(alpha0 * u), math.cos(alpha0 * u)
    return RayMatrix(c, s / alpha0, -alpha0 * s, c)


def compose(m2: RayMatrix, m1: RayMatrix) -> RayMatrix:
    """Matrix product m2 . m1 (apply m1 first)."""
    return RayMatrix(
        m2.a * m1.a + m2.b * m1.c,
        m2.a * m1.b + m2.b * m1.d,
        m2.c * m1.a + m2.d * m1.c,
        m2.c * m1.b + m2.d * m1.d,
    )


def _ode_rhs(a2: float, m: np.ndarray) -> np.ndarray:
    return np.array([[m[1, 0], m[1, 1]], [-a2 * m[0, 0], -a2 * m[0, 1]]])


def _matrix_rk4(m: np.ndarray, u: float, h: float, alpha_sq) -> np.ndarray:
    k1 = _ode_rhs(alpha_sq(u), m)
    k2 = _ode_rhs(alpha_sq(u + 0.5 * h), m + 0.5 * h * k1)
    k3 = _ode_rhs(alpha_sq(u + 0.5 * h), m + 0.5 * h * k2)
    k4 = _ode_rhs(alpha_sq(u + h), m + h * k3)
    return m + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _integrate_matrix(m: np.ndarray, u_from: float, u_to: float, step: float, alpha: Profile):
    """Advance M by RK4, splitting at profile breakpoints; renormalize det.

    The determinant is pinned back to 1 each step by scaling all entries by
    det^(-1/2), which preserves the integration direction while enforcing the
    symplectic constraint.
    """
    edges = [u_from, *alpha.breakpoints(u_from, u_to), u_to]
    for lo, hi in zip(edges[:-1], edges[1:]):
        span = hi - lo
        if span <= 0.0:
            continue
        nsub = max(1, math.ceil(span / step - 1e-12))
        h = span / nsub
        hi_in = float(np.nextafter(hi, lo))  # keep stages inside the segment

        def a2(uu, _hi=hi_in):
            v = alpha.value(min(uu, _hi))
            return v * v

        u = lo
        for _ in range(nsub):
            m = _matrix_rk4(m, u, h, a2)
            det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
            m = m / math.sqrt(det)
            u += h
    return m


def matrix_ode(alpha: Profile, span: tuple[float, float], step: float) -> RayMatrix:
    """Integrate dM/du = [[0,1],[-alpha^2(u),0]] M from the identity over span."""
    if step <= 0.0:
        raise ParameterError("step must be positive")
    u0, u1 = span
    if u1 < u0:
        raise ParameterError("span must be non-decreasing")
    m = _integrate_matrix(np.eye(2), u0, u1, step, alpha)
    return RayMatrix(m[0, 0], m[0, 1], m[1, 0], m[1, 1])


def matrix_ode_samples(alpha: Profile, us: Sequence[float], step: float) -> list[RayMatrix]:
    """Cumulative matrices from us[0] to each sample point (identity first)."""
    if step <= 0.0:
        raise ParameterError("step must be positive")
    us = list(us)
    m = np.eye(2)
    out = [identity_matrix()]
    for u_prev, u_next in zip(us[:-1], us[1:]):
        if u_next <= u_prev:
            raise ParameterError("sample points must be strictly increasing")
        m = _integrate_matrix(m, u_prev, u_next, step, alpha)
        out.append(RayMatrix(m[0, 0], m[0, 1], m[1, 0], m[1, 1]))
    return out


@dataclass(frozen=True)
class InverseCurvature:
    """The pair 1/q = 1/R + i M_I^2/(k w^2).

    The imaginary part is strictly positive for any physical beam (finite
    width, positive quality factor); the plane-wave limit imag -> 0 is
    rejected at construction.
    """

    inv_R: float
    imag: float

    def __post_init__(self):
        if not (self.imag > 0.0 and math.isfinite(self.imag)):
            raise ParameterError(
                f"Im(1/q) must be positive and finite, got {self.imag!r} (plane-wave limit rejected)"
            )

    @property
    def cplx(self) -> complex:
        return complex(self.inv_R, self.imag)

    @classmethod
    def from_complex(cls, z: complex) -> "InverseCurvature":
        return cls(z.real, z.imag)


def propagate_q(q1: InverseCurvature, m: RayMatrix) -> InverseCurvature:
    """Moebius transport q2 = (A q1 + B)/(C q1 + D), acting on the stored 1/q.

    Equivalent to the two input-output relations for w^2 and w^2/R; the map
    composes with matrix composition, and Im(1/q) stays positive because the
    coefficients are real with unit determinant.
    """
    z = q1.cplx
    denom = m.a + m.b * z
    if abs(denom) < 1e-150:
        raise SingularPropagationError("q transport hit a degenerate denominator")
    out = (m.c + m.d * z) / denom
    if not (out.imag > 0.0):
        raise SingularPropagationError(f"transported Im(1/q) = {out.imag!r} not positive")
    return InverseCurvature.from_complex(out)


def q_from_moments(m: MomentSet, mi4: float, k: float, epsilon: int) -> InverseCurvature:
    """Build 1/q from a centered beam's moments and its quality factor.

    1/R = eps <Q> / (k w^2) (first Ehrenfest relation) and
    Im(1/q) = sqrt(M_I^4) / (k w^2).
    """
    if mi4 <= 0.0:
        raise CollapseRegimeError(f"M_I^4 = {mi4!r} <= 0: q undefined in the collapse regime")
    if not (m.w2 > 0.0):
        raise ParameterError("q_from_moments needs w^2 > 0")
    return InverseCurvature(
        inv_R=epsilon * m.Q / (k * m.w2), imag=math.sqrt(mi4) / (k * m.w2)
    )


def width_curvature_from_q(q: InverseCurvature, mi4: float, k: float) -> tuple[float, float]:
    """Recover (w^2, R) from 1/q given the invariant M_I^4; R = inf at a waist."""
    if mi4 <= 0.0:
        raise CollapseRegimeError("M_I^4 must be positive")
    w2 = math.sqrt(mi4) / (k * q.imag)
    radius = math.inf if q.inv_R == 0.0 else 1.0 / q.inv_R
    return w2, radius


def linear_gaussian_propagate(
    q1: InverseCurvature,
    w1_sq: float,
    m: RayMatrix,
    k: float,
    epsilon: int,
) -> tuple[InverseCurvature, float, complex]:
    """Propagate a fundamental (gamma = 0) Gaussian: q-law plus amplitude.

    Returns (q2, w2_sq, amplitude_factor) with w2_sq = 1/(k Im(1/q2)),
    i.e. M_I = 1, and amplitude_factor = (A + B/q1)^(-1/2) on the principal
    branch (conjugated for the optical sign convention, epsilon = -1).  The
    branch only affects the overall phase; widths and curvatures are
    branch-free.  w1_sq must match Im(1/q1) and serves as a consistency check.
    """
    if epsilon not in (1, -1):
        raise ParameterError("epsilon must be +1 or -1")
    expected = 1.0 / (k * q1.imag)
    if not math.isclose(w1_sq, expected, rel_tol=1e-6):
        raise ParameterError(
            f"w1_sq = {w1_sq!r} inconsistent with Im(1/q1) (expected {expected!r} for M_I = 1)"
        )
    q2 = propagate_q(q1, m)
    amp = 1.0 / cmath.sqrt(m.a + m.b * q1.cplx)
    if epsilon == -1:
        amp = amp.conjugate()
    return q2, 1.0 / (k * q2.imag), amp


def propagator_kernel(x, x_in, m: RayMatrix, k: float, flavor: str):
    """Quadratic-phase propagator K(x, x_in) for a 1D linear system.

    K = sqrt(i k / (2 pi B)) * exp(-+ (i k / 2B) (A x_in^2 - 2 x_in x + D x^2))
    with the minus sign for the "optical" flavor and plus for "atomic"; the
    output field is psi2(x) = integral K(x, x_in) psi1(x_in) dx_in.  The
    atomic amplitude root as written carries a global phase i relative to a
    unit delta-function limit; magnitudes and transported widths are
    unaffected.  B = 0 has no kernel representation (thin element).
    """
    if flavor not in ("optical", "atomic"):
        raise ParameterError(f"flavor must be 'optical' or 'atomic', got {flavor!r}")
    if m.b == 0.0:
        raise ThinElementError("B = 0: kernel degenerates to a delta distribution")
    x = np.asarray(x, dtype=float)
    x_in = np.asarray(x_in, dtype=float)
    sign = -1.0 if flavor == "optical" else 1.0
    amp = np.sqrt(1j * k / (2.0 * np.pi * m.b))
    phase = (1j * k / (2.0 * m.b)) * (m.a * x_in**2 - 2.0 * x_in * x + m.d * x**2)
    return amp * np.exp(sign * phase)
