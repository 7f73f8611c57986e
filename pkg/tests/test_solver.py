"""Split-step solver: construction guards, conservation, closed-form checks."""

import math

import numpy as np
import pytest

from parabeam.abcd import InverseCurvature, free_matrix, linear_gaussian_propagate
from parabeam.core import ParaxialParams
from parabeam.errors import (
    DomainOverflowError,
    GridError,
    InstabilityError,
    NormalizationError,
    ParameterError,
)
from parabeam.moments import compute_moments, free_expansion_r2, quality_factor
from parabeam.profiles import ConstantProfile, PiecewiseConstantProfile
from parabeam.solver import (
    GridSpec,
    TransverseField,
    default_du,
    effective_energy,
    make_gaussian,
    split_step_propagate,
)


def params_with(gamma=0.0, alpha=0.0, k=1.0, epsilon=1):
    prof = alpha if hasattr(alpha, "value") else ConstantProfile(alpha)
    return ParaxialParams(k=k, epsilon=epsilon, gamma=gamma, alpha=prof)


# ------------------------------------------------------------ construction

def test_grid_spec_invariants():
    with pytest.raises(ParameterError):
        GridSpec(n=100, extent=10.0, du=1e-3)  # not a power of two
    with pytest.raises(ParameterError):
        GridSpec(n=32, extent=10.0, du=1e-3)  # below 64
    with pytest.raises(ParameterError):
        GridSpec(n=64, extent=10.0, du=0.0)


def test_make_gaussian_waist_moments():
    grid = GridSpec(n=128, extent=16.0, du=1e-3)
    f = make_gaussian(1.0, grid, k=1.0)
    assert f.norm() == pytest.approx(1.0, abs=1e-12)
    m = compute_moments(f, params_with(), 0.0)
    assert m.r2 == pytest.approx(1.0, abs=1e-6)
    assert m.Q == pytest.approx(0.0, abs=1e-9)
    assert m.centroid == pytest.approx((0.0, 0.0), abs=1e-12)


def test_make_gaussian_curvature_Q():
    grid = GridSpec(n=128, extent=16.0, du=1e-3)
    k, radius = 1.0, 3.0
    f = make_gaussian(1.0, grid, k=k, curvature_radius=radius)
    m = compute_moments(f, params_with(k=k), 0.0)
    assert m.Q == pytest.approx(k * m.r2 / radius, abs=1e-6)


def test_make_gaussian_tilt_adds_kinetic_term():
    grid = GridSpec(n=128, extent=16.0, du=1e-3)
    p = (0.4, -0.3)
    f = make_gaussian(1.0, grid, k=1.0, tilt=p)
    m = compute_moments(f, params_with(), 0.0)
    assert m.Kexp == pytest.approx(1.0 + p[0] ** 2 + p[1] ** 2, abs=1e-6)


def test_make_gaussian_guards():
    grid = GridSpec(n=64, extent=16.0, du=1e-3)
    with pytest.raises(GridError):
        make_gaussian(0.5, grid, k=1.0)  # sigma < 4 cells
    with pytest.raises(GridError):
        make_gaussian(2.5, grid, k=1.0)  # extent < 8 sigma
    # extent between 8 and ~10.5 sigma passes the size guard but trips the
    # boundary-amplitude invariant of the field itself
    grid2 = GridSpec(n=128, extent=16.0, du=1e-3)
    with pytest.raises(GridError):
        make_gaussian(1.9, grid2, k=1.0)


def test_transverse_field_normalization_guard():
    grid = GridSpec(n=64, extent=16.0, du=1e-3)
    f = make_gaussian(1.0, grid, k=1.0)
    with pytest.raises(NormalizationError):
        TransverseField(values=1.0001 * f.values, extent=grid.extent)


# ------------------------------------------------------------- propagation

def test_norm_conserved_per_step():
    grid = GridSpec(n=64, extent=14.0, du=5e-3, record_stride=1)
    p = params_with(gamma=3.0, alpha=0.5)
    f = make_gaussian(1.2, grid, k=1.0)
    rec = split_step_propagate(f, p, grid, (0.0, 0.5))
    assert rec.diagnostics.max_norm_drift < 1e-12


def test_free_run_matches_linear_gaussian_widths():
    # gamma = 0, alpha = 0: kinetic factor alone is exact, so the recorded
    # widths must track the q-law to quadrature accuracy
    grid = GridSpec(n=128, extent=28.0, du=0.01, record_stride=10)
    k = 1.0
    p = params_with(k=k)
    f = make_gaussian(1.0, grid, k=k)
    rec = split_step_propagate(f, p, grid, (0.0, 2.0))
    m0 = rec.trajectory.samples[0].moments
    q1 = InverseCurvature(inv_R=0.0, imag=1.0 / (k * m0.w2))
    for s in rec.trajectory:
        _, w2_sq, _ = linear_gaussian_propagate(q1, m0.w2, free_matrix(s.u), k, 1)
        assert s.moments.w2 == pytest.approx(w2_sq, rel=1e-4)


def test_free_expansion_parabola_any_gamma():
    # defocusing tails are fatter than Gaussian; the box reflects that
    grid = GridSpec(n=256, extent=36.0, du=2e-3, record_stride=50)
    p = params_with(gamma=2.0)
    f = make_gaussian(1.0, grid, k=1.0)
    rec = split_step_propagate(f, p, grid, (0.0, 2.0))
    m0 = rec.trajectory.samples[0].moments
    for s in rec.trajectory:
        assert s.moments.r2 == pytest.approx(
            free_expansion_r2(m0, p, s.u), rel=1e-3
        )


def test_equilibrium_width_is_stationary():
    # gamma = 0, constant alpha, sigma = 1/sqrt(alpha): K and U balance
    alpha0 = 1.0
    grid = GridSpec(n=128, extent=16.0, du=1e-3, record_stride=20)
    p = params_with(alpha=alpha0)
    f = make_gaussian(1.0, grid, k=1.0)
    rec = split_step_propagate(f, p, grid, (0.0, 2.0 * math.pi / (2.0 * alpha0)))
    r2 = rec.trajectory.column("r2")
    assert np.max(np.abs(r2 - r2[0])) / r2[0] < 1e-3


def test_mi4_invariant_and_h_conserved():
    grid = GridSpec(n=128, extent=18.0, du=1e-3, record_stride=20)
    p = params_with(gamma=3.0, alpha=0.8)
    f = make_gaussian(1.3, grid, k=1.0)
    rec = split_step_propagate(f, p, grid, (0.0, 2.0))
    assert rec.diagnostics.max_mi4_rel_drift < 1e-3
    assert rec.diagnostics.max_h_rel_drift < 1e-5


def test_second_order_convergence_in_du():
    # halving du reduces the final-field error by ~4 against a fine reference
    k, span = 1.0, 0.5
    p = params_with(gamma=3.0, alpha=0.8, k=k)

    def run(du):
        grid = GridSpec(n=64, extent=12.0, du=du, record_stride=10**9)
        f = make_gaussian(1.0, grid, k=k)
        rec = split_step_propagate(f, p, grid, (0.0, span), snapshot_us=[span])
        return rec.snapshots[0][1].values

    ref = run(6.25e-5)
    errs = [np.max(np.abs(run(du) - ref)) for du in (2e-3, 1e-3, 5e-4)]
    for e1, e2 in zip(errs[:-1], errs[1:]):
        assert 3.5 < e1 / e2 < 4.5


def test_dilatation_covariance():
    # lambda-dilated input propagated for lambda^2-scaled u reproduces the
    # dilated output exactly on index-matched grids (gamma = 0, alpha = 0)
    lam = 1.5
    k, u1 = 1.0, 0.8
    p = params_with(k=k)
    grid_a = GridSpec(n=128, extent=18.0, du=2e-3, record_stride=10**9)
    grid_b = GridSpec(n=128, extent=18.0 * lam, du=2e-3 * lam**2, record_stride=10**9)
    fa = make_gaussian(1.0, grid_a, k=k)
    fb = make_gaussian(lam, grid_b, k=k)
    rec_a = split_step_propagate(fa, p, grid_a, (0.0, u1), snapshot_us=[u1])
    rec_b = split_step_propagate(fb, p, grid_b, (0.0, lam**2 * u1), snapshot_us=[lam**2 * u1])
    psi_a = rec_a.snapshots[0][1].values
    psi_b = rec_b.snapshots[0][1].values
    assert np.max(np.abs(psi_b - psi_a / lam)) < 1e-12


def test_ehrenfest_consistency_of_recorded_trajectory():
    grid = GridSpec(n=128, extent=22.0, du=1e-3, record_stride=10)
    p = params_with(gamma=2.0, alpha=0.7)
    f = make_gaussian(1.2, grid, k=1.0)
    rec = split_step_propagate(f, p, grid, (0.0, 2.0))
    us = rec.trajectory.u()
    r2 = rec.trajectory.column("r2")
    q = rec.trajectory.column("Q")
    # centered differences vs (2 eps / k) <Q> at interior samples
    d_num = (r2[2:] - r2[:-2]) / (us[2:] - us[:-2])
    d_law = 2.0 * p.epsilon / p.k * q[1:-1]
    assert np.max(np.abs(d_num - d_law)) / np.max(np.abs(d_law)) < 1e-3


def test_piecewise_alpha_run_records_moments():
    alpha = PiecewiseConstantProfile(edges=(0.5,), values=(0.9, 0.3))
    grid = GridSpec(n=128, extent=18.0, du=1e-3, record_stride=100)
    p = params_with(gamma=1.0, alpha=alpha)
    f = make_gaussian(1.0, grid, k=1.0)
    rec = split_step_propagate(f, p, grid, (0.0, 1.0))
    assert rec.diagnostics.max_mi4_rel_drift < 1e-3
    assert math.isnan(rec.diagnostics.max_h_rel_drift)  # alpha not constant


def test_effective_energy_values():
    grid = GridSpec(n=128, extent=16.0, du=1e-3)
    f = make_gaussian(1.0, grid, k=1.0)
    # gamma = 0, alpha = 0, plane-phase Gaussian sigma = 1 -> <H> = eps * 1
    assert effective_energy(f, params_with(), 0.0) == pytest.approx(1.0, abs=1e-6)
    assert effective_energy(f, params_with(epsilon=-1), 0.0) == pytest.approx(-1.0, abs=1e-6)
    # global phase leaves <H> unchanged
    f2 = TransverseField(values=f.values * np.exp(0.7j), extent=f.extent)
    assert effective_energy(f2, params_with(), 0.0) == pytest.approx(1.0, abs=1e-6)


def test_domain_overflow_guard_triggers():
    # free expansion in a deliberately small box: the guard must name the u
    grid = GridSpec(n=64, extent=12.0, du=5e-3, record_stride=5)
    p = params_with(gamma=4.0 * math.pi)
    f = make_gaussian(1.0, grid, k=1.0)
    with pytest.raises(DomainOverflowError) as err:
        split_step_propagate(f, p, grid, (0.0, 6.0))
    assert 0.0 < err.value.u <= 6.0


def test_attractive_collapse_aborts_with_numerical_error():
    # deep in the collapse regime (M_I^4 < 0) the run must abort loudly with
    # a numerical failure (boundary guard or non-finite detection), never
    # return silently corrupted moments
    from parabeam.errors import NumericalError

    grid = GridSpec(n=64, extent=14.0, du=5e-3, record_stride=5)
    p = params_with(gamma=-200.0)
    f = make_gaussian(1.2, grid, k=1.0)
    m0 = compute_moments(f, p, 0.0)
    assert quality_factor(m0, 1) < 0.0
    with pytest.raises(NumericalError):
        split_step_propagate(f, p, grid, (0.0, 2.0))


def test_snapshots_at_requested_coordinates():
    grid = GridSpec(n=128, extent=20.0, du=1e-2, record_stride=7)
    p = params_with()
    f = make_gaussian(1.0, grid, k=1.0)
    rec = split_step_propagate(f, p, grid, (0.0, 1.0), snapshot_us=[0.0, 0.55, 1.0])
    assert len(rec.snapshots) == 3
    us = [u for u, _ in rec.snapshots]
    assert us[0] == 0.0 and us[-1] == pytest.approx(1.0)
    assert us[1] == pytest.approx(0.55, abs=grid.du)
    for _, fld in rec.snapshots:
        assert fld.norm() == pytest.approx(1.0, abs=1e-9)


def test_default_du_heuristic():
    grid = GridSpec(n=128, extent=16.0, du=1.0)
    p = params_with(gamma=4.0 * math.pi, alpha=1.0)
    du = default_du(p, grid, sigma=1.0, u_span=(0.0, 3.0))
    assert 0.0 < du <= 3.0 / 100.0
    # linear case: capped by the resolution floor
    p0 = params_with()
    assert default_du(p0, grid, sigma=1.0, u_span=(0.0, 3.0)) == pytest.approx(0.03)
