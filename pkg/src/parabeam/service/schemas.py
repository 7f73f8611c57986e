"""Pydantic request/response models for the propagation service."""

from __future__ import annotations

from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ProfileModel(StrictModel):
    kind: Literal[
        "constant", "linear", "sinusoidal", "sinusoidal_squared", "piecewise", "tabulated"
    ]
    value: Optional[float] = None
    intercept: Optional[float] = None
    slope: Optional[float] = None
    offset: Optional[float] = None
    amplitude: Optional[float] = None
    omega: Optional[float] = None
    phase: Optional[float] = None
    base: Optional[float] = None
    depth: Optional[float] = None
    edges: Optional[list[float]] = None
    values: Optional[list[float]] = None
    us: Optional[list[float]] = None

    def as_spec(self) -> dict:
        return {k: v for k, v in self.model_dump().items() if v is not None}


class BeamModel(StrictModel):
    sigma: Optional[float] = None
    centroid: tuple[float, float] = (0.0, 0.0)
    tilt: tuple[float, float] = (0.0, 0.0)
    curvature_radius: Optional[float] = None
    field_file: Optional[str] = None


class OpticalMediumModel(StrictModel):
    epsilon_r0: float
    omega: float
    chi3: float = 0.0
    c: float = 299792458.0
    beta: Optional[ProfileModel] = None


class AtomicMediumModel(StrictModel):
    mass: float
    hbar: float = 1.054571817e-34
    n1d: float
    a_s: float
    omega_perp: Optional[ProfileModel] = None
    flux: Optional[float] = None
    energy: Optional[float] = None


class GenericMediumModel(StrictModel):
    k: float
    epsilon: int
    gamma: float
    alpha: Optional[ProfileModel] = None


class MediumModel(StrictModel):
    optical: Optional[OpticalMediumModel] = None
    atomic: Optional[AtomicMediumModel] = None
    generic: Optional[GenericMediumModel] = None


class GridModel(StrictModel):
    n: int
    extent: float
    du: Optional[float] = None
    record_stride: int = 10


class RunModel(StrictModel):
    workflow: Optional[str] = None
    u_span: tuple[float, float]
    snapshots: list[float] = Field(default_factory=list)
    outputs: list[str] = Field(default_factory=lambda: ["trajectory", "report"])
    tolerance_w2: float = 1e-2
    tolerance_mi4: float = 1e-3
    ode_step: Optional[float] = None


class TofModel(StrictModel):
    samples: list[tuple[float, float]]


class SweepModel(StrictModel):
    parameter: str
    values: list[float]
    workflow: Literal["propagate", "predict", "compare"] = "propagate"


class RunConfigModel(StrictModel):
    beam: BeamModel
    medium: MediumModel
    grid: GridModel
    run: RunModel
    tof: Optional[TofModel] = None
    sweep: Optional[SweepModel] = None

    def as_config_dict(self) -> dict:
        """Canonical nested dict consumed by config.from_dict (drop Nones)."""

        def prune(node):
            if isinstance(node, dict):
                return {k: prune(v) for k, v in node.items() if v is not None}
            if isinstance(node, (list, tuple)):
                return [prune(v) for v in node]
            return node

        return prune(self.model_dump())


class RunRequest(StrictModel):
    config: RunConfigModel
    threads: Optional[int] = None
    seed: Optional[int] = None


# ------------------------------------------------------------- responses

class CheckModel(StrictModel):
    name: str
    value: Optional[float] = None
    threshold: float
    passed: bool


class TrajectoryModel(StrictModel):
    u: list[Optional[float]]
    r2: list[Optional[float]]
    w2: list[Optional[float]]
    Q: list[Optional[float]]
    K: list[Optional[float]]
    V: list[Optional[float]]
    U: list[Optional[float]]
    H0: list[Optional[float]]
    MI4: list[Optional[float]]
    invR: list[Optional[float]]


class SnapshotModel(StrictModel):
    index: int
    u: float
    n: int
    extent: float
    data_b64: str


class DiagnosticsModel(StrictModel):
    n_steps: int
    du: float
    max_norm_drift: Optional[float] = None
    max_mi4_rel_drift: Optional[float] = None
    max_h_rel_drift: Optional[float] = None


class ComparisonModel(StrictModel):
    u: list[Optional[float]]
    w2_numeric: list[Optional[float]]
    w2_analytic: list[Optional[float]]
    mi4_numeric: list[Optional[float]]
    rel_error_w2: list[Optional[float]]
    mi4_seed: Optional[float] = None


class TofRecordModel(StrictModel):
    w2_initial: Optional[float]
    slope_w2_vs_tau_sq: Optional[float]
    dispersion_free: Optional[float]
    dispersion_corrected: Optional[float]
    interaction_ratio: Optional[float]
    overestimation_factor: Optional[float]
    n_samples: int


class RunResponse(StrictModel):
    workflow: str
    version: str
    config_toml: str
    trajectory: Optional[TrajectoryModel] = None
    diagnostics: Optional[DiagnosticsModel] = None
    comparison: Optional[ComparisonModel] = None
    tof: Optional[TofRecordModel] = None
    checks: list[CheckModel]
    summary: dict
    snapshots: list[SnapshotModel] = Field(default_factory=list)
    seed: Optional[int] = None


class SweepPointModel(StrictModel):
    index: int
    value: float
    workflow: str
    trajectory: Optional[TrajectoryModel] = None
    summary: dict
    checks: list[CheckModel]


class SweepResponse(StrictModel):
    workflow: Literal["sweep"]
    version: str
    config_toml: str
    parameter: str
    values: list[float]
    point_workflow: str
    points: list[SweepPointModel]
    checks: list[CheckModel]
    summary: dict
    seed: Optional[int] = None


class HealthResponse(StrictModel):
    status: Literal["ok"]
    version: str


class ErrorDetail(StrictModel):
    kind: Literal["config-error", "numerical-failure", "internal-error"]
    message: str
