"""Workflow orchestration: propagate, predict, compare, analyze-tof, sweep.

Each workflow consumes a validated RunConfig and returns a JSON-able payload
(the wire format of the service and the material the CLI writes to disk).
Unavailable numbers (e.g. <K> along an analytic trajectory) travel as None.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np

from . import __version__
from .abcd import matrix_ode_samples, propagate_q, q_from_moments
from .config import RunConfig, from_dict, set_by_path
from .core import ParaxialParams
from .errors import ConfigError, GridError, ParameterError
from .moments import (
    MomentSet,
    MomentTrajectory,
    compute_moments,
    gaussian_moment_set,
    moment_ode_samples,
    quality_factor,
    velocity_dispersion_error,
)
from .outputs import read_field_file, snapshot_to_b64
from .solver import GridSpec, TransverseField, make_gaussian, split_step_propagate

_NORM_CHECK = 1e-9


def _clean(x: float) -> float | None:
    return None if (x is None or not math.isfinite(x)) else float(x)


def build_initial_field(cfg: RunConfig) -> TransverseField:
    grid = GridSpec(
        n=cfg.grid.n, extent=cfg.grid.extent, du=cfg.grid.du, record_stride=cfg.grid.record_stride
    )
    if cfg.beam.field_file is not None:
        values, extent, _ = read_field_file(cfg.beam.field_file)
        if values.shape[0] != grid.n or not math.isclose(extent, grid.extent, rel_tol=1e-12):
            raise ConfigError(
                f"field file grid ({values.shape[0]}, extent {extent}) does not match "
                f"[grid] ({grid.n}, extent {grid.extent})"
            )
        try:
            return TransverseField(values=values, extent=extent)
        except (ParameterError, GridError) as exc:
            raise ConfigError(f"field file rejected: {exc}") from exc
    params = cfg.params()
    radius = cfg.beam.curvature_radius if cfg.beam.curvature_radius is not None else math.inf
    return make_gaussian(
        cfg.beam.sigma,
        grid,
        k=params.k,
        centroid=cfg.beam.centroid,
        tilt=cfg.beam.tilt,
        curvature_radius=radius,
    )


def trajectory_columns(traj: MomentTrajectory, params: ParaxialParams) -> dict:
    """Flatten a trajectory into the fixed CSV column schema."""
    cols = {k: [] for k in ("u", "r2", "w2", "Q", "K", "V", "U", "H0", "MI4", "invR")}
    for s in traj:
        m = s.moments
        inv_r = params.epsilon * m.Q / (params.k * m.w2) if m.w2 > 0.0 else math.nan
        cols["u"].append(_clean(s.u))
        cols["r2"].append(_clean(m.r2))
        cols["w2"].append(_clean(m.w2))
        cols["Q"].append(_clean(m.Q))
        cols["K"].append(_clean(m.Kexp))
        cols["V"].append(_clean(m.Vexp))
        cols["U"].append(_clean(m.Uexp))
        cols["H0"].append(_clean(m.H0))
        cols["MI4"].append(_clean(s.mi4))
        cols["invR"].append(_clean(inv_r))
    return cols


def _check(name: str, value: float, threshold: float) -> dict:
    return {
        "name": name,
        "value": _clean(value),
        "threshold": threshold,
        "passed": bool(value <= threshold),
    }


def _mi4_drift(traj: MomentTrajectory) -> float:
    mi4 = traj.column("mi4")
    ref = abs(mi4[0]) if abs(mi4[0]) > 1e-12 else 1.0
    return float(np.max(np.abs(mi4 - mi4[0])) / ref)


def run_propagate(cfg: RunConfig) -> dict:
    """Direct numerical propagation; trajectory, diagnostics, snapshots."""
    params = cfg.params()
    field0 = build_initial_field(cfg)
    grid = GridSpec(
        n=cfg.grid.n, extent=cfg.grid.extent, du=cfg.grid.du, record_stride=cfg.grid.record_stride
    )
    rec = split_step_propagate(field0, params, grid, cfg.run.u_span, cfg.run.snapshots)
    diag = rec.diagnostics
    checks = [
        _check("norm-conservation", diag.max_norm_drift, _NORM_CHECK),
        _check("quality-factor-invariance", diag.max_mi4_rel_drift, cfg.run.tolerance_mi4),
    ]
    last = rec.trajectory.samples[-1]
    return {
        "workflow": "propagate",
        "version": __version__,
        "config_toml": cfg.to_toml(),
        "trajectory": trajectory_columns(rec.trajectory, params),
        "diagnostics": {
            "n_steps": diag.n_steps,
            "du": diag.du,
            "max_norm_drift": _clean(diag.max_norm_drift),
            "max_mi4_rel_drift": _clean(diag.max_mi4_rel_drift),
            "max_h_rel_drift": _clean(diag.max_h_rel_drift),
        },
        "checks": checks,
        "summary": {
            "u_final": _clean(last.u),
            "r2_final": _clean(last.moments.r2),
            "w2_final": _clean(last.moments.w2),
            "mi4_initial": _clean(rec.trajectory.samples[0].mi4),
            "mi4_final": _clean(last.mi4),
        },
        "snapshots": [
            {
                "index": i,
                "u": u,
                "n": fld.n,
                "extent": fld.extent,
                "data_b64": snapshot_to_b64(fld.values, fld.extent, u),
            }
            for i, (u, fld) in enumerate(rec.snapshots)
        ],
    }


def _initial_moments(cfg: RunConfig, params: ParaxialParams) -> MomentSet:
    """Initial moments for the analytic workflows, without running the PDE.

    Gaussian beams use the closed-form moments; field files are measured on
    their grid once.
    """
    u0 = cfg.run.u_span[0]
    if cfg.beam.field_file is None and cfg.beam.centroid == (0.0, 0.0) and cfg.beam.tilt == (0.0, 0.0):
        radius = cfg.beam.curvature_radius if cfg.beam.curvature_radius is not None else math.inf
        return gaussian_moment_set(
            cfg.beam.sigma,
            params.gamma,
            params.k,
            curvature_radius=radius,
            alpha0=params.alpha.value(u0),
            epsilon=params.epsilon,
        )
    field0 = build_initial_field(cfg)
    return compute_moments(field0, params, u0)


def _record_us(cfg: RunConfig) -> list[float]:
    u0, u1 = cfg.run.u_span
    n_steps = max(1, math.ceil((u1 - u0) / cfg.grid.du - 1e-12))
    du = (u1 - u0) / n_steps
    idx = sorted({0, n_steps, *range(0, n_steps + 1, cfg.grid.record_stride)})
    return [u0 + i * du for i in idx]


def run_predict(cfg: RunConfig) -> dict:
    """Analytic prediction from the moment ODE; no PDE run."""
    params = cfg.params()
    m0 = _initial_moments(cfg, params)
    step = cfg.run.ode_step if cfg.run.ode_step is not None else cfg.grid.du
    traj = moment_ode_samples(m0, params, _record_us(cfg), step)
    checks = [_check("quality-factor-invariance", _mi4_drift(traj), cfg.run.tolerance_mi4)]
    last = traj.samples[-1]
    return {
        "workflow": "predict",
        "version": __version__,
        "config_toml": cfg.to_toml(),
        "trajectory": trajectory_columns(traj, params),
        "checks": checks,
        "summary": {
            "u_final": _clean(last.u),
            "r2_final": _clean(last.moments.r2),
            "w2_final": _clean(last.moments.w2),
            "mi4_initial": _clean(traj.samples[0].mi4),
            "mi4_final": _clean(last.mi4),
        },
        "snapshots": [],
    }


def run_compare(cfg: RunConfig) -> dict:
    """Numeric propagation vs the q-law transported by ABCD matrices.

    The analytic route seeds M_I^4 and q from the initial field's measured
    moments, integrates the matrix ODE along the recorded coordinates, and
    transports q by the Moebius law; the comparison is on w^2(u).
    """
    params = cfg.params()
    payload = run_propagate(cfg)
    payload["workflow"] = "compare"

    cols = payload["trajectory"]
    us = cols["u"]
    m0_field = build_initial_field(cfg)
    m0 = compute_moments(m0_field, params, us[0])
    mi4 = quality_factor(m0, params.epsilon)
    q0 = q_from_moments(m0, mi4, params.k, params.epsilon)
    step = cfg.run.ode_step if cfg.run.ode_step is not None else cfg.grid.du
    mats = matrix_ode_samples(params.alpha, us, step)

    w2_analytic = []
    for mat in mats:
        q_u = propagate_q(q0, mat)
        w2_analytic.append(math.sqrt(mi4) / (params.k * q_u.imag))

    w2_numeric = cols["w2"]
    rel = [
        abs(num - ana) / abs(ana) for num, ana in zip(w2_numeric, w2_analytic)
    ]
    max_rel = max(rel)
    payload["comparison"] = {
        "u": us,
        "w2_numeric": w2_numeric,
        "w2_analytic": [_clean(v) for v in w2_analytic],
        "mi4_numeric": cols["MI4"],
        "rel_error_w2": [_clean(v) for v in rel],
        "mi4_seed": _clean(mi4),
    }
    payload["checks"].append(_check("abcd-width-agreement", max_rel, cfg.run.tolerance_w2))
    payload["summary"]["max_rel_error_w2"] = _clean(max_rel)
    return payload


def run_tof(cfg: RunConfig) -> dict:
    """Time-of-flight analysis of width samples with the mean-field correction.

    The naive estimate attributes all width growth to kinetic energy; the
    corrected one divides out (1 + <V>_0/<K>_0), the Gaussian-model ratio
    derived from the configured beam and medium.
    """
    if cfg.tof is None:
        raise ConfigError("workflow 'analyze-tof' needs a [tof] section")
    params = cfg.params()
    samples = sorted(cfg.tof.samples)
    tau0, w2_0 = samples[0]
    if any(b[0] <= a[0] for a, b in zip(samples[:-1], samples[1:])):
        raise ConfigError("tof.samples must have strictly increasing tau")
    rest = [(t - tau0, w2) for t, w2 in samples[1:]]
    if rest[-1][0] <= 0.0:
        raise ConfigError("tof needs a sample at tau > 0")

    # least-squares slope of w2 against tau^2 through the tau = 0 intercept
    t2 = np.array([t * t for t, _ in rest])
    dw2 = np.array([w2 - w2_0 for _, w2 in rest])
    slope = float((t2 * dw2).sum() / (t2 * t2).sum())

    m0 = _initial_moments(cfg, params)
    ratio = velocity_dispersion_error(m0)
    dispersion_free = slope / 2.0
    dispersion_corrected = dispersion_free / (1.0 + ratio)
    return {
        "workflow": "analyze-tof",
        "version": __version__,
        "config_toml": cfg.to_toml(),
        "tof": {
            "w2_initial": _clean(w2_0),
            "slope_w2_vs_tau_sq": _clean(slope),
            "dispersion_free": _clean(dispersion_free),
            "dispersion_corrected": _clean(dispersion_corrected),
            "interaction_ratio": _clean(ratio),
            "overestimation_factor": _clean(1.0 + ratio),
            "n_samples": len(samples),
        },
        "checks": [],
        "summary": {
            "dispersion_free": _clean(dispersion_free),
            "dispersion_corrected": _clean(dispersion_corrected),
            "overestimation_factor": _clean(1.0 + ratio),
        },
    }


_POINT_RUNNERS = {"propagate": run_propagate, "predict": run_predict, "compare": run_compare}


def run_sweep(cfg: RunConfig, threads: int | None = None) -> dict:
    """Fan independent runs over a 1-D parameter grid.

    Each grid point re-validates the derived config; points run concurrently
    (they share no mutable state) and report independently.
    """
    if cfg.sweep is None:
        raise ConfigError("workflow 'sweep' needs a [sweep] section")
    base = cfg.as_dict()
    base["run"]["workflow"] = cfg.sweep.workflow
    base.pop("sweep", None)
    runner = _POINT_RUNNERS[cfg.sweep.workflow]

    configs = []
    for value in cfg.sweep.values:
        raw = set_by_path(base, cfg.sweep.parameter, value)
        configs.append(from_dict(raw, cfg.sweep.workflow))

    def one(point_cfg: RunConfig) -> dict:
        return runner(point_cfg)

    workers = max(1, threads if threads is not None else 1)
    if workers == 1:
        results = [one(c) for c in configs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, configs))

    points = []
    for i, (value, res) in enumerate(zip(cfg.sweep.values, results)):
        points.append(
            {
                "index": i,
                "value": value,
                "workflow": res["workflow"],
                "trajectory": res.get("trajectory"),
                "summary": res.get("summary", {}),
                "checks": res.get("checks", []),
            }
        )
    return {
        "workflow": "sweep",
        "version": __version__,
        "config_toml": cfg.to_toml(),
        "parameter": cfg.sweep.parameter,
        "values": list(cfg.sweep.values),
        "point_workflow": cfg.sweep.workflow,
        "points": points,
        "checks": [c for p in points for c in p["checks"]],
        "summary": {"n_points": len(points)},
    }
