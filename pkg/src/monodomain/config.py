"""Run configuration: a YAML file validated against a pydantic schema.

Units throughout: lengths in cm, times in ms, diffusion in cm^2/ms,
stimulus amplitudes in mV/ms. ``schema()`` returns the JSON schema.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .fem import DiffusionField, build_diffusion_field
from .ionic import available_models, load_model
from .ionic.base import CellModel
from .mesh import (Mesh, RegionSelector, assign_fibrosis, build_regular_sheet, build_truncated_sheet,
                   nearest_node, select_nodes)
from .splitting import GATE_INTEGRATIONS, SCHEMES, SchemeConfig
from .stimulus import Protocol, Stimulus

SCHEMA_VERSION = 1
RECIPE_DIR = Path(__file__).with_name("recipes")


class ConfigError(ValueError):
    """Every problem found in a config, reported together."""

    def __init__(self, source: str, problems: list[str]):
        self.source = source
        self.problems = problems
        super().__init__(f"{source}: {len(problems)} problem(s)\n" + "\n".join(f"  - {p}" for p in problems))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Region(_Strict):
    kind: Literal["half_plane_x", "half_plane_y", "rectangle", "nodes", "disc"]
    value: Optional[float] = None
    side: Literal["le", "ge"] = "le"
    xmin: Optional[float] = None
    xmax: Optional[float] = None
    ymin: Optional[float] = None
    ymax: Optional[float] = None
    indices: Optional[list[int]] = None
    center: Optional[tuple[float, float]] = None
    radius: Optional[float] = None

    @model_validator(mode="after")
    def _required(self) -> "Region":
        need = {"half_plane_x": ("value",), "half_plane_y": ("value",),
                "rectangle": ("xmin", "xmax", "ymin", "ymax"), "nodes": ("indices",),
                "disc": ("center", "radius")}[self.kind]
        missing = [k for k in need if getattr(self, k) is None]
        if missing:
            raise ValueError(f"region kind {self.kind!r} needs {', '.join(missing)}")
        return self

    def selector(self) -> RegionSelector:
        params = {k: v for k, v in self.model_dump().items() if k != "kind" and v is not None}
        return RegionSelector(self.kind, params)


class MeshSpec(_Strict):
    Lx: float = Field(gt=0)
    Ly: float = Field(gt=0)
    h: float = Field(gt=0)
    fiber_angle: float = 0.0  # radians
    truncate: bool = False  # floor(L/h) whole cells instead of requiring divisibility


class TagRegion(_Strict):
    tag: str
    region: Region


class FibrosisSpec(_Strict):
    fraction: float = Field(ge=0, le=1)
    seed: int = 0


class DiffusionSpec(_Strict):
    d0_myocyte: float = Field(gt=0)
    d0_fibrotic: Optional[float] = Field(default=None, gt=0)
    rho: float = Field(default=0.25, gt=0, le=1)


class SchemeSpec(_Strict):
    scheme: str = "DAETI"
    dt: Optional[float] = Field(default=None, gt=0)  # default 0.01 for OST, 0.1 otherwise
    T: float = Field(default=500.0, gt=0)
    dt0: Optional[float] = Field(default=None, gt=0)
    k0_up: int = Field(default=5, ge=1)
    k0_down: int = Field(default=1, ge=1)
    strict_substeps: bool = False
    record_interval: float = Field(default=0.1, gt=0)
    gate_integration: str = "forward_euler"
    progress_every: int = Field(default=0, ge=0)

    @field_validator("scheme")
    @classmethod
    def _scheme(cls, v: str) -> str:
        if v not in SCHEMES:
            raise ValueError(f"unknown scheme {v!r}; expected one of {SCHEMES}")
        return v

    @field_validator("gate_integration")
    @classmethod
    def _gates(cls, v: str) -> str:
        if v not in GATE_INTEGRATIONS:
            raise ValueError(f"unknown gate integration {v!r}; expected one of {GATE_INTEGRATIONS}")
        return v

    @model_validator(mode="after")
    def _k0(self) -> "SchemeSpec":
        if self.k0_up < self.k0_down:
            raise ValueError("k0_up must be at least k0_down")
        return self


class StimulusSpec(_Strict):
    label: str = ""
    region: Region
    t_start: float = Field(ge=0)
    duration: float = Field(default=1.0, gt=0)
    amplitude: Optional[float] = None
    threshold_factor: Optional[float] = Field(default=None, gt=0)  # amplitude = factor x diastolic threshold
    period: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _amplitude(self) -> "StimulusSpec":
        if (self.amplitude is None) == (self.threshold_factor is None):
            raise ValueError("give exactly one of amplitude or threshold_factor")
        return self


class GroupSpec(_Strict):
    label: str = ""
    region: Region
    delay: float = Field(ge=0)


class GroupedSpec(_Strict):
    period: float = Field(gt=0)
    duration: float = Field(default=1.0, gt=0)
    amplitude: float
    t0: float = 0.0
    groups: list[GroupSpec] = []


class ProbeSpec(_Strict):
    name: str
    point: tuple[float, float]


class ThresholdSpec(_Strict):
    probe: str
    initial_amplitude: float = Field(default=50.0, gt=0)
    window: float = Field(default=50.0, gt=0)
    scheme: str = "DAETI"
    dt: float = Field(default=0.1, gt=0)
    rtol: float = Field(default=0.05, gt=0, lt=1)
    gate_integration: str = "forward_euler"


class CompareSpec(_Strict):
    schemes: list[str] = ["OST", "OSTAR", "DAETI"]
    dts: dict[str, float] = {}
    reference: str = "OST"

    @field_validator("schemes")
    @classmethod
    def _schemes(cls, v: list[str]) -> list[str]:
        bad = [s for s in v if s not in SCHEMES]
        if bad:
            raise ValueError(f"unknown scheme(s) {bad}; expected entries of {SCHEMES}")
        if len(v) < 2:
            raise ValueError("compare needs at least two schemes")
        return v


class DtsSpec(_Strict):
    spacings_um: list[float] = Field(min_length=1)
    spectral: bool = False


class OutputSpec(_Strict):
    dir: Optional[str] = None
    snapshot_interval: Optional[float] = Field(default=None, gt=0)
    vtk: bool = True
    maps: bool = True


class RunConfig(_Strict):
    schema_version: int = SCHEMA_VERSION
    name: str
    description: str = ""
    mesh: MeshSpec
    tag_regions: list[TagRegion] = []
    fibrosis: Optional[FibrosisSpec] = None
    diffusion: DiffusionSpec
    models: dict[str, str] = {"myocyte-epi": "ohara_rudy_epi"}
    scheme: SchemeSpec = SchemeSpec()
    stimuli: list[StimulusSpec] = []
    grouped: Optional[GroupedSpec] = None
    probes: list[ProbeSpec] = []
    cv_probes: Optional[tuple[str, str]] = None
    apd_probe: Optional[str] = None
    threshold: Optional[ThresholdSpec] = None
    compare: Optional[CompareSpec] = None
    dts: Optional[DtsSpec] = None
    output: OutputSpec = OutputSpec()

    @field_validator("schema_version")
    @classmethod
    def _version(cls, v: int) -> int:
        if v != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {v}; this build reads {SCHEMA_VERSION}")
        return v

    @field_validator("models")
    @classmethod
    def _models(cls, v: dict[str, str]) -> dict[str, str]:
        known = available_models()
        bad = {tag: name for tag, name in v.items() if name not in known}
        if bad:
            raise ValueError("unregistered model(s) "
                             + ", ".join(f"{tag}: {name!r}" for tag, name in bad.items())
                             + f"; registered: {', '.join(known)}")
        return v

    @model_validator(mode="after")
    def _cross_refs(self) -> "RunConfig":
        problems = []
        names = [p.name for p in self.probes]
        if len(set(names)) != len(names):
            problems.append("probe names must be unique")
        refs = list(self.cv_probes or ()) + ([self.apd_probe] if self.apd_probe else [])
        if self.threshold:
            refs.append(self.threshold.probe)
        problems += [f"unknown probe {r!r}" for r in refs if r not in names]
        tags = {"myocyte-epi"} | {t.tag for t in self.tag_regions}
        if self.fibrosis and self.fibrosis.fraction > 0:
            tags.add("fibroblast")
        problems += [f"node tag {t!r} has no model in 'models'" for t in sorted(tags - set(self.models))]
        if any(s.threshold_factor is not None for s in self.stimuli) and self.threshold is None:
            problems.append("threshold_factor needs a 'threshold' section")
        if problems:
            raise ValueError("; ".join(problems))
        return self


def _format_error(err: dict) -> str:
    loc = ".".join(str(x) for x in err["loc"]) or "<root>"
    msg = err["msg"].removeprefix("Value error, ")
    return f"{loc}: {msg}"


def parse_config(data: Any, source: str = "<config>") -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError(source, ["top level must be a mapping"])
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(source, [_format_error(e) for e in exc.errors()]) from None


def available_recipes() -> list[str]:
    return sorted(p.stem for p in RECIPE_DIR.glob("*.yaml"))


def resolve_config_path(ref: str | Path) -> Path:
    """A file path, or the name of a shipped recipe."""
    path = Path(ref)
    if not path.exists() and (RECIPE_DIR / f"{ref}.yaml").exists():
        return RECIPE_DIR / f"{ref}.yaml"
    return path


def load_config(path: str | Path) -> RunConfig:
    path = resolve_config_path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), [f"YAML syntax: {exc}"]) from None
    return parse_config(data, str(path))


def schema() -> dict:
    return RunConfig.model_json_schema()


# -- builders -------------------------------------------------------------------

def build_mesh(cfg: RunConfig, seed_override: int | None = None) -> Mesh:
    m = cfg.mesh
    builder = build_truncated_sheet if m.truncate else build_regular_sheet
    mesh = builder(m.Lx, m.Ly, m.h, m.fiber_angle)
    if cfg.tag_regions:
        tags = mesh.node_tags.copy()
        for tr in cfg.tag_regions:
            tags[select_nodes(mesh, tr.region.selector())] = tr.tag
        mesh = mesh.with_tags(tags)
    if cfg.fibrosis:
        seed = cfg.fibrosis.seed if seed_override is None else seed_override
        mesh = assign_fibrosis(mesh, cfg.fibrosis.fraction, seed)
    return mesh


def build_field(cfg: RunConfig, mesh: Mesh) -> DiffusionField:
    d = cfg.diffusion
    return build_diffusion_field(mesh, d.d0_myocyte, d.d0_fibrotic, d.rho)


def build_models(cfg: RunConfig, mesh: Mesh | None = None) -> dict[str, CellModel]:
    """tag -> CellModel, restricted to tags present on ``mesh`` when given."""
    tags = set(cfg.models) if mesh is None else set(np.unique(mesh.node_tags).astype(str))
    cache: dict[str, CellModel] = {}
    out = {}
    for tag in sorted(tags):
        name = cfg.models[tag]
        out[tag] = cache.setdefault(name, load_model(name))
    return out


def probe_nodes(cfg: RunConfig, mesh: Mesh) -> dict[str, int]:
    return {p.name: nearest_node(mesh, p.point) for p in cfg.probes}


def scheme_config(cfg: RunConfig, scheme: str | None = None, dt: float | None = None,
                  strict_substeps: bool | None = None, T: float | None = None) -> SchemeConfig:
    s = cfg.scheme
    scheme = scheme or s.scheme
    if dt is None:
        dt = (cfg.compare.dts.get(scheme) if cfg.compare else None) or (
            s.dt if scheme == s.scheme and s.dt else default_dt(scheme))
    return SchemeConfig(scheme=scheme, dt=dt, T=T or s.T, dt0=s.dt0, k0_up=s.k0_up, k0_down=s.k0_down,
                        strict_substeps=s.strict_substeps if strict_substeps is None else strict_substeps,
                        record_interval=s.record_interval,
                        snapshot_interval=cfg.output.snapshot_interval,
                        progress_every=s.progress_every, gate_integration=s.gate_integration)


def default_dt(scheme: str) -> float:
    return 0.01 if scheme == "OST" else 0.1


def build_protocol(cfg: RunConfig, mesh: Mesh, threshold: float | None = None) -> Protocol:
    """Stimuli from the config; ``threshold`` resolves any ``threshold_factor`` entries."""
    stimuli = []
    for i, s in enumerate(cfg.stimuli):
        nodes = select_nodes(mesh, s.region.selector())
        if s.amplitude is not None:
            amp = s.amplitude
        else:
            if threshold is None:
                raise ValueError(f"stimulus {s.label or i} needs the diastolic threshold")
            amp = s.threshold_factor * threshold
        stimuli.append(Stimulus(nodes, s.t_start, s.duration, amp, s.period, s.label or f"stim{i}"))
    if cfg.grouped:
        g = cfg.grouped
        for j, grp in enumerate(g.groups):
            nodes = select_nodes(mesh, grp.region.selector())
            stimuli.append(Stimulus(nodes, g.t0 + grp.delay, g.duration, g.amplitude, g.period,
                                    grp.label or f"group{j}"))
    return Protocol(tuple(stimuli))


def needs_threshold(cfg: RunConfig) -> bool:
    return any(s.threshold_factor is not None for s in cfg.stimuli)


def threshold_template(cfg: RunConfig, mesh: Mesh) -> Stimulus:
    """Single-shot template from the first threshold-scaled stimulus (or the first stimulus)."""
    if not cfg.stimuli:
        raise ValueError("threshold search needs at least one stimulus")
    spec = next((s for s in cfg.stimuli if s.threshold_factor is not None), cfg.stimuli[0])
    t = cfg.threshold
    return Stimulus(select_nodes(mesh, spec.region.selector()), spec.t_start, spec.duration,
                    t.initial_amplitude if t else 50.0, None, spec.label or "template")


def dump(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False)
