"""Run configuration: TOML parsing, strict validation, defaulting, echoing.

The canonical representation is a plain nested dict (the same shape travels
as JSON to the service), with profile coefficients as small mappings like
{"kind": "constant", "value": 1.0}.  Unknown keys anywhere are hard errors
listing their dotted paths; exactly one medium flavor must be present.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Any

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .core import (
    AtomicBeamSpec,
    OpticalBeamSpec,
    ParaxialParams,
    map_atomic,
    map_optical,
)
from .errors import ConfigError
from .profiles import ConstantProfile, Profile, profile_from_spec

WORKFLOWS = ("propagate", "predict", "compare", "analyze-tof", "sweep")
OUTPUT_KINDS = ("trajectory", "report", "fields")

_DEFAULT_TOL_W2 = 1e-2
_DEFAULT_TOL_MI4 = 1e-3


def _require(section: dict, path: str, key: str):
    if key not in section:
        raise ConfigError(f"missing required key '{path}.{key}'")
    return section[key]


def _reject_unknown(section: dict, path: str, allowed: set[str]) -> None:
    unknown = sorted(set(section) - allowed)
    if unknown:
        listed = ", ".join(f"{path}.{k}" for k in unknown)
        raise ConfigError(f"unknown keys: {listed}")


def _as_float(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{path}' must be a number, got {value!r}")
    return float(value)


def _as_pair(value, path: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"'{path}' must be a pair of numbers")
    return (_as_float(value[0], path), _as_float(value[1], path))


def _profile(value, path: str) -> Profile:
    if not isinstance(value, dict):
        raise ConfigError(f"'{path}' must be a profile table with a 'kind' key")
    try:
        return profile_from_spec(value)
    except Exception as exc:
        raise ConfigError(f"'{path}': {exc}") from exc


@dataclass(frozen=True)
class BeamConfig:
    sigma: float | None = None
    centroid: tuple[float, float] = (0.0, 0.0)
    tilt: tuple[float, float] = (0.0, 0.0)
    curvature_radius: float | None = None  # None = flat wavefront (waist)
    field_file: str | None = None


@dataclass(frozen=True)
class OpticalMedium:
    epsilon_r0: float
    omega: float
    chi3: float
    c: float
    beta: Profile


@dataclass(frozen=True)
class AtomicMedium:
    mass: float
    hbar: float
    n1d: float
    a_s: float
    omega_perp: Profile
    flux: float | None = None
    energy: float | None = None


@dataclass(frozen=True)
class GenericMedium:
    k: float
    epsilon: int
    gamma: float
    alpha: Profile


@dataclass(frozen=True)
class GridConfig:
    n: int
    extent: float
    du: float
    record_stride: int


@dataclass(frozen=True)
class RunSettings:
    workflow: str
    u_span: tuple[float, float]
    snapshots: tuple[float, ...] = ()
    outputs: tuple[str, ...] = ("trajectory", "report")
    tolerance_w2: float = _DEFAULT_TOL_W2
    tolerance_mi4: float = _DEFAULT_TOL_MI4
    ode_step: float | None = None


@dataclass(frozen=True)
class TofConfig:
    samples: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class SweepConfig:
    parameter: str
    values: tuple[float, ...]
    workflow: str = "propagate"


@dataclass(frozen=True)
class RunConfig:
    beam: BeamConfig
    medium: OpticalMedium | AtomicMedium | GenericMedium
    grid: GridConfig
    run: RunSettings
    tof: TofConfig | None = None
    sweep: SweepConfig | None = None

    def params(self) -> ParaxialParams:
        m = self.medium
        if isinstance(m, OpticalMedium):
            return map_optical(
                OpticalBeamSpec(
                    epsilon_r0=m.epsilon_r0, omega=m.omega, chi3=m.chi3, beta=m.beta, c=m.c
                )
            )
        if isinstance(m, AtomicMedium):
            return map_atomic(
                AtomicBeamSpec(
                    mass=m.mass,
                    hbar=m.hbar,
                    n1d=m.n1d,
                    a_s=m.a_s,
                    omega_perp=m.omega_perp,
                    flux=m.flux,
                    energy=m.energy,
                )
            )
        return ParaxialParams(k=m.k, epsilon=m.epsilon, gamma=m.gamma, alpha=m.alpha)

    def as_dict(self) -> dict:
        from .profiles import profile_to_spec

        beam: dict[str, Any] = {
            "centroid": list(self.beam.centroid),
            "tilt": list(self.beam.tilt),
        }
        if self.beam.sigma is not None:
            beam["sigma"] = self.beam.sigma
        if self.beam.curvature_radius is not None:
            beam["curvature_radius"] = self.beam.curvature_radius
        if self.beam.field_file is not None:
            beam["field_file"] = self.beam.field_file

        m = self.medium
        if isinstance(m, OpticalMedium):
            medium = {
                "optical": {
                    "epsilon_r0": m.epsilon_r0,
                    "omega": m.omega,
                    "chi3": m.chi3,
                    "c": m.c,
                    "beta": profile_to_spec(m.beta),
                }
            }
        elif isinstance(m, AtomicMedium):
            section = {
                "mass": m.mass,
                "hbar": m.hbar,
                "n1d": m.n1d,
                "a_s": m.a_s,
                "omega_perp": profile_to_spec(m.omega_perp),
            }
            if m.flux is not None:
                section["flux"] = m.flux
            if m.energy is not None:
                section["energy"] = m.energy
            medium = {"atomic": section}
        else:
            medium = {
                "generic": {
                    "k": m.k,
                    "epsilon": m.epsilon,
                    "gamma": m.gamma,
                    "alpha": profile_to_spec(m.alpha),
                }
            }

        run: dict[str, Any] = {
            "workflow": self.run.workflow,
            "u_span": list(self.run.u_span),
            "snapshots": list(self.run.snapshots),
            "outputs": list(self.run.outputs),
            "tolerance_w2": self.run.tolerance_w2,
            "tolerance_mi4": self.run.tolerance_mi4,
        }
        if self.run.ode_step is not None:
            run["ode_step"] = self.run.ode_step

        out: dict[str, Any] = {
            "beam": beam,
            "medium": medium,
            "grid": {
                "n": self.grid.n,
                "extent": self.grid.extent,
                "du": self.grid.du,
                "record_stride": self.grid.record_stride,
            },
            "run": run,
        }
        if self.tof is not None:
            out["tof"] = {"samples": [list(s) for s in self.tof.samples]}
        if self.sweep is not None:
            out["sweep"] = {
                "parameter": self.sweep.parameter,
                "values": list(self.sweep.values),
                "workflow": self.sweep.workflow,
            }
        return out

    def to_toml(self) -> str:
        return _emit_toml(self.as_dict())


def _parse_beam(raw: dict) -> BeamConfig:
    _reject_unknown(
        raw, "beam", {"sigma", "centroid", "tilt", "curvature_radius", "field_file"}
    )
    sigma = raw.get("sigma")
    field_file = raw.get("field_file")
    if (sigma is None) == (field_file is None):
        raise ConfigError("beam needs exactly one of 'sigma' (gaussian) or 'field_file'")
    curvature = raw.get("curvature_radius")
    if curvature is not None:
        curvature = _as_float(curvature, "beam.curvature_radius")
        if math.isinf(curvature):
            curvature = None  # flat wavefront
        elif curvature == 0.0:
            raise ConfigError("beam.curvature_radius must be non-zero")
    return BeamConfig(
        sigma=None if sigma is None else _as_float(sigma, "beam.sigma"),
        centroid=_as_pair(raw.get("centroid", [0.0, 0.0]), "beam.centroid"),
        tilt=_as_pair(raw.get("tilt", [0.0, 0.0]), "beam.tilt"),
        curvature_radius=curvature,
        field_file=None if field_file is None else str(field_file),
    )


def _parse_medium(raw: dict):
    _reject_unknown(raw, "medium", {"optical", "atomic", "generic"})
    present = [k for k in ("optical", "atomic", "generic") if k in raw]
    if len(present) != 1:
        raise ConfigError(
            f"medium needs exactly one flavor of optical/atomic/generic, got {present or 'none'}"
        )
    flavor = present[0]
    sec = raw[flavor]
    if not isinstance(sec, dict):
        raise ConfigError(f"medium.{flavor} must be a table")
    path = f"medium.{flavor}"
    if flavor == "optical":
        _reject_unknown(sec, path, {"epsilon_r0", "omega", "chi3", "c", "beta"})
        return OpticalMedium(
            epsilon_r0=_as_float(_require(sec, path, "epsilon_r0"), f"{path}.epsilon_r0"),
            omega=_as_float(_require(sec, path, "omega"), f"{path}.omega"),
            chi3=_as_float(sec.get("chi3", 0.0), f"{path}.chi3"),
            c=_as_float(sec.get("c", 299792458.0), f"{path}.c"),
            beta=_profile(sec.get("beta", {"kind": "constant", "value": 0.0}), f"{path}.beta"),
        )
    if flavor == "atomic":
        _reject_unknown(
            sec, path, {"mass", "hbar", "n1d", "a_s", "omega_perp", "flux", "energy"}
        )
        return AtomicMedium(
            mass=_as_float(_require(sec, path, "mass"), f"{path}.mass"),
            hbar=_as_float(sec.get("hbar", 1.054571817e-34), f"{path}.hbar"),
            n1d=_as_float(_require(sec, path, "n1d"), f"{path}.n1d"),
            a_s=_as_float(_require(sec, path, "a_s"), f"{path}.a_s"),
            omega_perp=_profile(
                sec.get("omega_perp", {"kind": "constant", "value": 0.0}), f"{path}.omega_perp"
            ),
            flux=None if "flux" not in sec else _as_float(sec["flux"], f"{path}.flux"),
            energy=None if "energy" not in sec else _as_float(sec["energy"], f"{path}.energy"),
        )
    _reject_unknown(sec, path, {"k", "epsilon", "gamma", "alpha"})
    eps = _require(sec, path, "epsilon")
    if eps not in (1, -1):
        raise ConfigError(f"'{path}.epsilon' must be 1 or -1")
    return GenericMedium(
        k=_as_float(_require(sec, path, "k"), f"{path}.k"),
        epsilon=int(eps),
        gamma=_as_float(_require(sec, path, "gamma"), f"{path}.gamma"),
        alpha=_profile(sec.get("alpha", {"kind": "constant", "value": 0.0}), f"{path}.alpha"),
    )


def _parse_grid(raw: dict, beam: BeamConfig, medium, run: RunSettings) -> GridConfig:
    _reject_unknown(raw, "grid", {"n", "extent", "du", "record_stride"})
    n = _require(raw, "grid", "n")
    if isinstance(n, bool) or not isinstance(n, int):
        raise ConfigError("'grid.n' must be an integer")
    extent = _as_float(_require(raw, "grid", "extent"), "grid.extent")
    stride = raw.get("record_stride", 10)
    if isinstance(stride, bool) or not isinstance(stride, int):
        raise ConfigError("'grid.record_stride' must be an integer")
    if "du" in raw:
        du = _as_float(raw["du"], "grid.du")
    else:
        if beam.sigma is None:
            raise ConfigError("'grid.du' is required when the beam comes from a field file")
        from .solver import GridSpec, default_du

        cfg = RunConfig(
            beam=beam, medium=medium, grid=GridConfig(n, extent, 1.0, stride), run=run
        )
        du = default_du(cfg.params(), GridSpec(n=n, extent=extent, du=1.0), beam.sigma, run.u_span)
    return GridConfig(n=n, extent=extent, du=du, record_stride=stride)


def _parse_run(raw: dict, workflow_hint: str | None) -> RunSettings:
    _reject_unknown(
        raw,
        "run",
        {"workflow", "u_span", "snapshots", "outputs", "tolerance_w2", "tolerance_mi4", "ode_step"},
    )
    workflow = raw.get("workflow", workflow_hint)
    if workflow is None:
        raise ConfigError("missing required key 'run.workflow'")
    if workflow not in WORKFLOWS:
        raise ConfigError(f"'run.workflow' must be one of {WORKFLOWS}, got {workflow!r}")
    if workflow_hint is not None and workflow != workflow_hint:
        raise ConfigError(
            f"config sets run.workflow = {workflow!r} but the requested workflow is {workflow_hint!r}"
        )
    span = _as_pair(_require(raw, "run", "u_span"), "run.u_span")
    if span[1] <= span[0]:
        raise ConfigError("'run.u_span' must be increasing")
    snaps = raw.get("snapshots", [])
    if not isinstance(snaps, (list, tuple)):
        raise ConfigError("'run.snapshots' must be a list of coordinates")
    outputs = tuple(raw.get("outputs", ["trajectory", "report"]))
    for kind in outputs:
        if kind not in OUTPUT_KINDS:
            raise ConfigError(f"'run.outputs' entries must be in {OUTPUT_KINDS}, got {kind!r}")
    ode_step = raw.get("ode_step")
    return RunSettings(
        workflow=workflow,
        u_span=span,
        snapshots=tuple(_as_float(s, "run.snapshots") for s in snaps),
        outputs=outputs,
        tolerance_w2=_as_float(raw.get("tolerance_w2", _DEFAULT_TOL_W2), "run.tolerance_w2"),
        tolerance_mi4=_as_float(raw.get("tolerance_mi4", _DEFAULT_TOL_MI4), "run.tolerance_mi4"),
        ode_step=None if ode_step is None else _as_float(ode_step, "run.ode_step"),
    )


def _parse_tof(raw: dict) -> TofConfig:
    _reject_unknown(raw, "tof", {"samples"})
    samples = _require(raw, "tof", "samples")
    if not isinstance(samples, (list, tuple)) or len(samples) < 2:
        raise ConfigError("'tof.samples' must list >= 2 [tau, w2] pairs")
    parsed = tuple(_as_pair(s, "tof.samples") for s in samples)
    return TofConfig(samples=parsed)


def _parse_sweep(raw: dict) -> SweepConfig:
    _reject_unknown(raw, "sweep", {"parameter", "values", "workflow"})
    parameter = str(_require(raw, "sweep", "parameter"))
    values = _require(raw, "sweep", "values")
    if not isinstance(values, (list, tuple)) or not values:
        raise ConfigError("'sweep.values' must be a non-empty list")
    workflow = raw.get("workflow", "propagate")
    if workflow not in ("propagate", "predict", "compare"):
        raise ConfigError("'sweep.workflow' must be propagate, predict, or compare")
    return SweepConfig(
        parameter=parameter,
        values=tuple(_as_float(v, "sweep.values") for v in values),
        workflow=workflow,
    )


def from_dict(raw: dict, workflow_hint: str | None = None, base_dir: str | None = None) -> RunConfig:
    """Build a validated RunConfig from the canonical nested-dict form.

    `workflow_hint` is the CLI subcommand / endpoint name; a conflicting
    run.workflow is a hard error.  `base_dir` resolves relative field files.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a table")
    _reject_unknown(raw, "config", {"beam", "medium", "grid", "run", "tof", "sweep"})
    for key in ("beam", "medium", "grid", "run"):
        if key not in raw:
            raise ConfigError(f"missing required section [{key}]")
        if not isinstance(raw[key], dict):
            raise ConfigError(f"[{key}] must be a table")

    beam = _parse_beam(raw["beam"])
    if beam.field_file is not None:
        path = beam.field_file
        if base_dir is not None and not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        if not os.path.exists(path):
            raise ConfigError(f"beam.field_file does not exist: {path}")
        beam = BeamConfig(
            sigma=beam.sigma,
            centroid=beam.centroid,
            tilt=beam.tilt,
            curvature_radius=beam.curvature_radius,
            field_file=path,
        )
    medium = _parse_medium(raw["medium"])
    run = _parse_run(raw["run"], workflow_hint)
    grid = _parse_grid(raw["grid"], beam, medium, run)

    tof = _parse_tof(raw["tof"]) if "tof" in raw else None
    sweep = _parse_sweep(raw["sweep"]) if "sweep" in raw else None
    if run.workflow == "analyze-tof" and tof is None:
        raise ConfigError("workflow 'analyze-tof' needs a [tof] section")
    if run.workflow == "sweep" and sweep is None:
        raise ConfigError("workflow 'sweep' needs a [sweep] section")

    cfg = RunConfig(beam=beam, medium=medium, grid=grid, run=run, tof=tof, sweep=sweep)
    cfg.params()  # surface medium errors now, as config errors
    return cfg


def parse_config(path: str, workflow_hint: str | None = None) -> RunConfig:
    """Parse and validate a TOML run configuration file."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}") from exc
    try:
        return from_dict(raw, workflow_hint, base_dir=os.path.dirname(os.path.abspath(path)))
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"config file {path}: {exc}") from exc


def parse_config_text(text: str, workflow_hint: str | None = None) -> RunConfig:
    return from_dict(tomllib.loads(text), workflow_hint)


def set_by_path(raw: dict, dotted: str, value) -> dict:
    """Return a copy of the canonical dict with `dotted` replaced by `value`."""
    import copy

    out = copy.deepcopy(raw)
    keys = dotted.split(".")
    node = out
    for key in keys[:-1]:
        if not isinstance(node, dict) or key not in node:
            raise ConfigError(f"sweep parameter path not found: {dotted!r}")
        node = node[key]
    if not isinstance(node, dict) or keys[-1] not in node:
        raise ConfigError(f"sweep parameter path not found: {dotted!r}")
    node[keys[-1]] = value
    return out


# ------------------------------------------------------------ TOML emitter

def _toml_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return repr(v)
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return repr(v)
    if isinstance(v, str):
        escaped = v.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    raise ConfigError(f"cannot serialize {v!r} to TOML")


def _toml_value(v) -> str:
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, dict):
        inner = ", ".join(f"{k} = {_toml_value(x)}" for k, x in v.items())
        return "{" + inner + "}"
    return _toml_scalar(v)


def _emit_toml(tree: dict) -> str:
    """Emit the canonical config dict as TOML (closed schema, two levels).

    Nested tables become dotted [section.sub] headers; profile mappings stay
    inline so they read as single values.
    """
    lines: list[str] = []

    def emit_table(path: str, table: dict):
        scalar_keys = [
            k for k, v in table.items() if not (isinstance(v, dict) and not _is_profile(v))
        ]
        sub_keys = [k for k in table if k not in scalar_keys]
        if scalar_keys:
            lines.append(f"[{path}]")
            for k in scalar_keys:
                lines.append(f"{k} = {_toml_value(table[k])}")
            lines.append("")
        for k in sub_keys:
            emit_table(f"{path}.{k}", table[k])

    def _is_profile(v: dict) -> bool:
        return "kind" in v

    for section, table in tree.items():
        emit_table(section, table)
    return "\n".join(lines)
