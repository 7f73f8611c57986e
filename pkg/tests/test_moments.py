"""Moment laws: Ehrenfest relations, expansion laws, quality factor, width ODE.

Expected values for Gaussian fields are frozen from the closed-form
integrals of exp(-r^2/2 sigma^2) profiles, computed independently here:
    <r^2> = sigma^2,  <K> = 1/sigma^2 (+ k^2 sigma^2/R^2 with curvature),
    <V> = gamma/(4 pi sigma^2),  <Q> = k sigma^2 / R.
"""

import math

import numpy as np
import pytest

from parabeam.core import ParaxialParams
from parabeam.errors import (
    DegenerateBeamError,
    NotAttractiveError,
    ParameterError,
)
from parabeam.moments import (
    MomentSet,
    compute_moments,
    ehrenfest_derivatives,
    free_expansion_r2,
    gaussian_moment_set,
    grid_moments,
    moment_ode_samples,
    moment_ode_solve,
    oscillation_frequency,
    quality_factor,
    quality_factor_centered,
    self_trapping_threshold,
    tof_width,
    velocity_dispersion_error,
)
from parabeam.profiles import (
    ConstantProfile,
    PiecewiseConstantProfile,
    SinusoidalSquaredProfile,
)
from parabeam.solver import GridSpec, make_gaussian
from parabeam.abcd import compose, harmonic_matrix, propagate_q, q_from_moments


def params_with(gamma=0.0, alpha=0.0, k=1.0, epsilon=1):
    prof = alpha if hasattr(alpha, "value") else ConstantProfile(alpha)
    return ParaxialParams(k=k, epsilon=epsilon, gamma=gamma, alpha=prof)


def gaussian_oracle(sigma, gamma, k=1.0, radius=math.inf, epsilon=1):
    """Independent closed-form Gaussian moments (duplicated on purpose)."""
    r2 = sigma**2
    kexp = 1.0 / sigma**2
    q = 0.0
    if math.isfinite(radius):
        kexp += (k / radius) ** 2 * sigma**2
        q = k * sigma**2 / radius
    vexp = gamma / (4.0 * math.pi * sigma**2)
    return r2, q, kexp, vexp, epsilon * kexp + vexp


# ------------------------------------------------------------- grid moments

def test_grid_moments_match_gaussian_integrals():
    grid = GridSpec(n=128, extent=16.0, du=1e-3)
    p = params_with(gamma=4.0 * math.pi)
    f = make_gaussian(1.0, grid, k=1.0)
    m = compute_moments(f, p, 0.0)
    r2, q, kexp, vexp, h0 = gaussian_oracle(1.0, 4.0 * math.pi)
    assert m.r2 == pytest.approx(r2, abs=1e-6)
    assert m.Kexp == pytest.approx(kexp, abs=1e-6)
    assert m.Vexp == pytest.approx(vexp, abs=1e-6)
    assert m.Q == pytest.approx(q, abs=1e-8)
    assert m.H0 == pytest.approx(h0, abs=2e-6)
    assert m.w2 == pytest.approx(m.r2, abs=1e-9)
    assert m.centroid == pytest.approx((0.0, 0.0), abs=1e-12)


def test_grid_moments_global_phase_invariance():
    grid = GridSpec(n=64, extent=14.0, du=1e-3)
    p = params_with(gamma=2.0)
    f = make_gaussian(1.2, grid, k=1.0)
    m1 = compute_moments(f, p, 0.0)
    from parabeam.solver import TransverseField

    f2 = TransverseField(values=f.values * np.exp(1j * 0.8), extent=f.extent)
    m2 = compute_moments(f2, p, 0.0)
    for name in ("r2", "Q", "Kexp", "Vexp", "H0", "w2"):
        assert getattr(m1, name) == pytest.approx(getattr(m2, name), abs=1e-12)


def test_grid_moments_curvature_shifts_Q_only():
    grid = GridSpec(n=128, extent=16.0, du=1e-3)
    p = params_with()
    k, radius = 1.0, 5.0
    flat = compute_moments(make_gaussian(1.0, grid, k=k), p, 0.0)
    curved = compute_moments(
        make_gaussian(1.0, grid, k=k, curvature_radius=radius), p, 0.0
    )
    assert curved.Q == pytest.approx(k * curved.r2 / radius, abs=1e-6)
    assert curved.r2 == pytest.approx(flat.r2, abs=1e-9)
    assert curved.Vexp == pytest.approx(flat.Vexp, abs=1e-12)


def test_grid_moments_hermitized_Q_equivalence():
    # Im <psi| r.grad |psi> equals the symmetrized-operator expectation
    # Re <psi| -i (1 + r.grad) |psi> for unit-normalized fields.
    grid = GridSpec(n=128, extent=18.0, du=1e-3)
    f = make_gaussian(1.3, grid, k=1.0, curvature_radius=4.0, tilt=(0.2, -0.1))
    m = compute_moments(f, params_with(), 0.0)

    n, h = grid.n, grid.spacing
    ax = (np.arange(n) - n // 2) * h
    x, y = ax[None, :], ax[:, None]
    kax = 2 * np.pi * np.fft.fftfreq(n, d=h)
    spec = np.fft.fft2(f.values)
    dx = np.fft.ifft2(1j * kax[None, :] * spec)
    dy = np.fft.ifft2(1j * kax[:, None] * spec)
    rgrad = x * dx + y * dy
    q_sym = float(
        (np.conj(f.values) * (-1j) * (f.values + rgrad)).real.sum() * h * h
    )
    assert m.Q == pytest.approx(q_sym, abs=1e-9)


def test_grid_moments_scale_probe():
    # psi -> lambda^-1 psi(r/lambda): K, V scale as 1/lambda^2; r2 as lambda^2
    lam = 1.7
    p = params_with(gamma=3.0)
    g1 = GridSpec(n=128, extent=16.0, du=1e-3)
    g2 = GridSpec(n=128, extent=16.0 * lam, du=1e-3)
    m1 = compute_moments(make_gaussian(1.0, g1, k=1.0), p, 0.0)
    m2 = compute_moments(make_gaussian(lam, g2, k=1.0), p, 0.0)
    assert m2.r2 == pytest.approx(lam**2 * m1.r2, rel=1e-6)
    assert m2.Kexp == pytest.approx(m1.Kexp / lam**2, rel=1e-6)
    assert m2.Vexp == pytest.approx(m1.Vexp / lam**2, rel=1e-6)


def test_grid_moments_origin_shift_recovers_centered_values():
    grid = GridSpec(n=128, extent=20.0, du=1e-3)
    p = params_with()
    off = (0.8, -0.4)
    f = make_gaussian(1.0, grid, k=1.0, centroid=off)
    m_origin = compute_moments(f, p, 0.0)
    m_shift = compute_moments(f, p, 0.0, origin=off)
    assert m_origin.r2 == pytest.approx(1.0 + off[0] ** 2 + off[1] ** 2, abs=1e-6)
    assert m_shift.r2 == pytest.approx(1.0, abs=1e-6)
    assert m_origin.w2 == pytest.approx(m_shift.w2, abs=1e-9)
    assert m_shift.centroid == pytest.approx(off, abs=1e-9)


def test_gaussian_moment_set_matches_oracle():
    for sigma, gamma, k, radius in [(1.0, 0.0, 1.0, math.inf), (1.4, 2.5, 2.0, 3.0)]:
        m = gaussian_moment_set(sigma, gamma, k, curvature_radius=radius)
        r2, q, kexp, vexp, h0 = gaussian_oracle(sigma, gamma, k, radius)
        assert (m.r2, m.Q, m.Kexp, m.Vexp, m.H0) == pytest.approx((r2, q, kexp, vexp, h0))


def test_moment_set_invariants():
    with pytest.raises(ParameterError):
        MomentSet(r2=1.0, Q=0.0, Kexp=1.0, Vexp=0.0, Uexp=0.0, H0=1.0, w2=1.5)
    with pytest.raises(ParameterError):
        MomentSet(r2=1.0, Q=0.0, Kexp=1.0, Vexp=0.5, Uexp=0.0, H0=2.0, w2=1.0)


# ------------------------------------------------------------ closed laws

def test_ehrenfest_derivatives():
    p = params_with()
    m = gaussian_moment_set(1.0, 0.0, 1.0)
    d1, d2 = ehrenfest_derivatives(m, p, 0.0)
    assert d1 == 0.0  # waist: stationary width point
    assert d2 == pytest.approx(2.0)  # 2 eps/k^2 * H0 with K = 1

    # balance point: U = eps*H0 -> zero curvature of r2
    alpha0 = 1.0
    m_eq = gaussian_moment_set(1.0, 0.0, 1.0, alpha0=alpha0)
    _, d2_eq = ehrenfest_derivatives(m_eq, params_with(alpha=alpha0), 0.0)
    assert d2_eq == pytest.approx(0.0, abs=1e-14)


def test_free_expansion_parabola():
    p = params_with(gamma=4.0 * math.pi)
    m0 = gaussian_moment_set(1.0, 4.0 * math.pi, 1.0)
    assert free_expansion_r2(m0, p, 0.0) == m0.r2
    # H0 = K + V = 1 + 1 = 2 -> r2(u) = 1 + 2 u^2
    for u in (0.5, 1.0, 3.0):
        assert free_expansion_r2(m0, p, u) == pytest.approx(1.0 + 2.0 * u * u)
    # Q0 = 0 -> even in u
    assert free_expansion_r2(m0, p, -1.3) == pytest.approx(free_expansion_r2(m0, p, 1.3))


def test_tof_width_law():
    # n1d a_s = 0.09 -> gamma = 8 pi 0.09, V/K = 0.18 -> w2 = 1 + 2.36 tau^2
    gamma = 8.0 * math.pi * 0.09
    m0 = gaussian_moment_set(1.0, gamma, 1.0)
    assert tof_width(m0, 1.0, 0.0) == m0.w2
    for tau in (0.5, 2.0):
        assert tof_width(m0, 1.0, tau) == pytest.approx(1.0 + 2.36 * tau * tau, rel=1e-12)
    # dilute limit: slope is 2<K>/k^2
    m_dilute = gaussian_moment_set(1.0, 0.0, 1.0)
    assert tof_width(m_dilute, 1.0, 1.0) - m_dilute.w2 == pytest.approx(2.0 * m_dilute.Kexp)
    # requires a waist start
    curved = gaussian_moment_set(1.0, 0.0, 1.0, curvature_radius=2.0)
    with pytest.raises(ParameterError):
        tof_width(curved, 1.0, 1.0)


def test_velocity_dispersion_error():
    assert velocity_dispersion_error(gaussian_moment_set(1.0, 0.0, 1.0)) == 0.0
    gamma = 8.0 * math.pi * 0.09
    assert velocity_dispersion_error(gaussian_moment_set(1.0, gamma, 1.0)) == pytest.approx(0.18)
    # independent of sigma
    for sigma in (0.5, 1.0, 2.7):
        assert velocity_dispersion_error(gaussian_moment_set(sigma, gamma, 1.0)) == pytest.approx(
            0.18, rel=1e-12
        )
    degenerate = MomentSet(r2=1.0, Q=0.0, Kexp=0.0, Vexp=0.0, Uexp=0.0, H0=0.0, w2=1.0)
    with pytest.raises(DegenerateBeamError):
        velocity_dispersion_error(degenerate)


def test_quality_factor_values():
    # dilute fundamental Gaussian: M_I^4 = 1
    assert quality_factor(gaussian_moment_set(1.0, 0.0, 1.0), 1) == pytest.approx(1.0)
    # interacting Gaussian: 1 + 2 n1d a_s
    for na in (0.01, 0.09, 0.3):
        m = gaussian_moment_set(1.3, 8.0 * math.pi * na, 1.0)
        assert quality_factor(m, 1) == pytest.approx(1.0 + 2.0 * na, rel=1e-12)
    # curvature does not change the invariant
    m = gaussian_moment_set(1.0, 8.0 * math.pi * 0.09, 2.0, curvature_radius=3.0)
    assert quality_factor(m, 1) == pytest.approx(1.18, rel=1e-12)
    # attractive threshold: n1d = 1/(2|a_s|) -> M_I^4 = 0
    a_s = -0.5
    n_crit = self_trapping_threshold(a_s)
    assert n_crit == pytest.approx(1.0)
    m0 = gaussian_moment_set(1.0, 8.0 * math.pi * n_crit * a_s, 1.0)
    assert quality_factor(m0, 1) == pytest.approx(0.0, abs=1e-12)


def test_quality_factor_centered_variant():
    m = gaussian_moment_set(1.0, 0.0, 1.0)
    assert quality_factor_centered(m, 1) == quality_factor(m, 1)
    # off-center beam: centered variant uses w2 < r2
    off = MomentSet(r2=2.0, Q=0.0, Kexp=1.0, Vexp=0.0, Uexp=0.0, H0=1.0, w2=1.0, centroid=(1.0, 0.0))
    assert quality_factor_centered(off, 1) == pytest.approx(1.0)
    assert quality_factor(off, 1) == pytest.approx(2.0)


def test_self_trapping_threshold():
    assert self_trapping_threshold(-0.5) == pytest.approx(1.0)
    assert self_trapping_threshold(-1.0) == pytest.approx(0.5)
    with pytest.raises(NotAttractiveError):
        self_trapping_threshold(0.5)


# ------------------------------------------------------------- moment ODE

def test_moment_ode_reduces_to_free_expansion():
    p = params_with(gamma=2.0)
    m0 = gaussian_moment_set(1.0, 2.0, 1.0)
    traj = moment_ode_solve(m0, p, (0.0, 3.0), step=1e-3)
    for s in traj:
        assert s.moments.r2 == pytest.approx(free_expansion_r2(m0, p, s.u), rel=1e-9)
        assert s.mi4 == pytest.approx(quality_factor(m0, 1), rel=1e-9)


def test_moment_ode_constant_alpha_frequency_independent_of_gamma():
    alpha0 = 0.9
    for gamma in (0.0, 1.0, 5.0):
        p = params_with(gamma=gamma, alpha=alpha0)
        m0 = gaussian_moment_set(1.4, gamma, 1.0)  # off equilibrium
        traj = moment_ode_solve(m0, p, (0.0, 14.0), step=2e-3)
        freq = oscillation_frequency(traj, p)
        assert freq == pytest.approx(2.0 * alpha0, rel=1e-3)


def test_moment_ode_self_convergence_sinusoidal_alpha_sq():
    alpha = SinusoidalSquaredProfile(base=0.8, depth=0.5, omega=1.3)
    p = params_with(gamma=1.5, alpha=alpha)
    m0 = gaussian_moment_set(1.0, 1.5, 1.0)
    us = [0.0, 1.0, 2.5, 5.0]
    coarse = moment_ode_samples(m0, p, us, step=2e-3)
    fine = moment_ode_samples(m0, p, us, step=2e-4)
    for a, b in zip(coarse, fine):
        assert a.moments.r2 == pytest.approx(b.moments.r2, rel=1e-6)


def test_moment_ode_mi4_invariant_along_modulated_trap():
    alpha = SinusoidalSquaredProfile(base=0.7, depth=0.4, omega=0.9)
    p = params_with(gamma=3.0, alpha=alpha)
    m0 = gaussian_moment_set(1.0, 3.0, 1.0)
    traj = moment_ode_solve(m0, p, (0.0, 6.0), step=1e-3)
    mi4 = traj.column("mi4")
    assert np.max(np.abs(mi4 - mi4[0])) / abs(mi4[0]) < 1e-8


def test_moment_ode_piecewise_matches_composed_matrices():
    # analytic cross-check: widths from the q-law through composed closed-form
    # segment matrices vs the width ODE with the jump handling
    alpha = PiecewiseConstantProfile(edges=(2.0,), values=(0.9, 0.4))
    p = params_with(gamma=2.0, alpha=alpha)
    m0 = gaussian_moment_set(1.0, 2.0, 1.0)
    mi4 = quality_factor(m0, p.epsilon)
    q0 = q_from_moments(m0, mi4, p.k, p.epsilon)

    us = [0.0, 1.0, 2.0, 2.7, 3.5]
    traj = moment_ode_samples(m0, p, us, step=1e-3)
    for u, s in zip(us, traj):
        if u <= 2.0:
            m = harmonic_matrix(0.9, u)
        else:
            m = compose(harmonic_matrix(0.4, u - 2.0), harmonic_matrix(0.9, 2.0))
        q_u = propagate_q(q0, m)
        w2 = math.sqrt(mi4) / (p.k * q_u.imag)
        assert s.moments.r2 == pytest.approx(w2, rel=1e-8)


def test_oscillation_frequency_needs_enough_periods():
    p = params_with(alpha=1.0)
    m0 = gaussian_moment_set(1.3, 0.0, 1.0)
    traj = moment_ode_solve(m0, p, (0.0, 2.0), step=1e-2)  # < 1 period
    with pytest.raises(ParameterError):
        oscillation_frequency(traj, p)
