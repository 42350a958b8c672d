"""Experiment orchestration behind the CLI: run, compare, dts and threshold."""

from __future__ import annotations

import json
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np
import scipy

from . import __version__
from .config import (RunConfig, build_field, build_mesh, build_models, build_protocol, dump,
                     needs_threshold, probe_nodes, scheme_config, threshold_template)
from .fem import assemble, build_diffusion_field
from .mesh import Mesh, assign_fibrosis, build_truncated_sheet
from .postprocess import align_and_diff, compute_apd90, compute_cv, nrmse
from .splitting import SimulationResult, run_simulation
from .stimulus import diastolic_threshold
from .vtk import write_scalar_map_vtk, write_vtk_snapshot

OUTPUT_ENV = "MONODOMAIN_OUTPUT_DIR"
DEFAULT_OUTPUT = "runs"


def output_dir(cfg: RunConfig, override: str | None = None) -> Path:
    if override:
        return Path(override)
    if cfg.output.dir:
        return Path(cfg.output.dir)
    return Path(os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT)) / cfg.name


def environment() -> dict:
    return {"monodomain": __version__, "python": sys.version.split()[0], "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__, "platform": platform.platform(),
            "threading_layer_threads": numba.config.NUMBA_NUM_THREADS}


@dataclass
class Problem:
    """Everything a run needs, built once from a config."""

    cfg: RunConfig
    mesh: Mesh
    field: object
    op: object
    models: dict
    probes: dict[str, int]
    threshold: float | None = None
    timings: dict = field(default_factory=dict)

    @classmethod
    def build(cls, cfg: RunConfig, seed_override: int | None = None) -> "Problem":
        t0 = time.perf_counter()
        mesh = build_mesh(cfg, seed_override)
        fld = build_field(cfg, mesh)
        op = assemble(mesh, fld)
        t_asm = time.perf_counter() - t0
        return cls(cfg, mesh, fld, op, build_models(cfg, mesh), probe_nodes(cfg, mesh),
                   timings={"assembly_s": t_asm})

    def find_threshold(self) -> float:
        t = self.cfg.threshold
        if t is None:
            raise ValueError("config has no 'threshold' section")
        template = threshold_template(self.cfg, self.mesh)
        self.threshold = diastolic_threshold(self.mesh, self.field, self.models, template,
                                             self.probes[t.probe], scheme=t.scheme, dt=t.dt,
                                             window=t.window, rtol=t.rtol,
                                             gate_integration=t.gate_integration)
        return self.threshold

    def protocol(self):
        if needs_threshold(self.cfg) and self.threshold is None:
            self.find_threshold()
        return build_protocol(self.cfg, self.mesh, self.threshold)

    def run(self, scheme: str | None = None, dt: float | None = None, strict: bool | None = None,
            workers: int | None = None) -> SimulationResult:
        sc = scheme_config(self.cfg, scheme, dt, strict)
        return run_simulation(self.mesh, self.field, self.models, self.protocol(), sc,
                              probes=sorted(set(self.probes.values())), workers=workers, op=self.op)


def markers(problem: Problem, result: SimulationResult) -> dict:
    """CV and APD90 at the configured probes, NaN where unavailable."""
    cfg = problem.cfg
    out: dict = {}
    if cfg.cv_probes:
        a, b = (problem.probes[n] for n in cfg.cv_probes)
        try:
            out["cv_cm_per_ms"] = compute_cv(result.lat, problem.mesh.node_coords, a, b)
        except ValueError:
            out["cv_cm_per_ms"] = float("nan")
    if cfg.apd_probe:
        node = problem.probes[cfg.apd_probe]
        out["apd90_ms"] = compute_apd90(result.traces[node])
        out["apd90_streamed_ms"] = float(result.apd90.values[node])
    return out


def report(problem: Problem, result: SimulationResult, extra: dict | None = None) -> dict:
    timing = result.timing.as_dict()
    timing["assembly_s"] = problem.timings.get("assembly_s", 0.0)
    return {
        "name": problem.cfg.name,
        "n_nodes": problem.mesh.n_nodes,
        "n_elements": problem.mesh.n_elements,
        "workers": result.extra.get("workers"),
        "threshold_mV_per_ms": problem.threshold,
        "fibrosis": problem.mesh.metadata.get("fibrosis"),
        **result.summary(),
        "timing": timing,
        "markers": markers(problem, result),
        **(extra or {}),
        "environment": environment(),
        "config": problem.cfg.model_dump(mode="json"),
    }


def write_run_artifacts(problem: Problem, result: SimulationResult, out: Path, prefix: str = "") -> dict:
    """Traces and maps as CSV, snapshots and maps as VTK. Returns output timing."""
    t0 = time.perf_counter()
    out.mkdir(parents=True, exist_ok=True)
    for name, node in problem.probes.items():
        result.traces[node].to_csv(out / f"{prefix}trace_{name}.csv")
    coords = problem.mesh.node_coords
    if problem.cfg.output.maps:
        result.lat.to_csv(out / f"{prefix}lat.csv", coords)
        result.apd90.to_csv(out / f"{prefix}apd90.csv", coords)
    if problem.cfg.output.vtk:
        for i, (t, V) in enumerate(result.snapshots):
            write_vtk_snapshot(problem.mesh, V, t, out / f"{prefix}snapshot_{i:04d}.vtk")
        if problem.cfg.output.maps:
            write_scalar_map_vtk(problem.mesh, result.lat.values, result.lat.valid, "LAT",
                                 out / f"{prefix}lat.vtk")
            write_scalar_map_vtk(problem.mesh, result.apd90.values, result.apd90.valid, "APD90",
                                 out / f"{prefix}apd90.vtk")
    return {"output_s": time.perf_counter() - t0}


def write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=False, default=_json_default) + "\n")


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def run_experiment(cfg: RunConfig, out: Path, seed_override: int | None = None,
                   workers: int | None = None, strict: bool | None = None) -> dict:
    problem = Problem.build(cfg, seed_override)
    result = problem.run(strict=strict, workers=workers)
    io = write_run_artifacts(problem, result, out)
    rep = report(problem, result)
    rep["timing"].update(io)
    write_json(out / "report.json", rep)
    (out / "config.yaml").write_text(dump(cfg))
    return rep


@dataclass
class Comparison:
    results: dict[str, SimulationResult]
    report: dict


def compare_experiment(cfg: RunConfig, out: Path | None, schemes: list[str] | None = None,
                       seed_override: int | None = None, workers: int | None = None,
                       strict: bool | None = None) -> Comparison:
    """Run each scheme on one problem and compare against the reference scheme."""
    problem = Problem.build(cfg, seed_override)
    spec = cfg.compare
    schemes = schemes or (spec.schemes if spec else ["OST", "OSTAR", "DAETI"])
    reference = spec.reference if spec and spec.reference in schemes else schemes[0]
    results: dict[str, SimulationResult] = {}
    labels = []
    for s in schemes:
        seen = sum(1 for x in labels if x.split("#")[0] == s)
        label = s if seen == 0 else f"{s}#{seen + 1}"
        labels.append(label)
        results[label] = problem.run(scheme=s, strict=strict, workers=workers)
        if out is not None:
            write_run_artifacts(problem, results[label], out / label)
    ref = results[reference]
    rows = {}
    for label, r in results.items():
        row = {**r.summary(), "markers": markers(problem, r)}
        row["max_abs_dV_mV"] = {}
        for name, node in problem.probes.items():
            try:
                row["max_abs_dV_mV"][name] = align_and_diff(ref.traces[node], r.traces[node])
            except ValueError:
                row["max_abs_dV_mV"][name] = None
        for key, attr in (("nrmse_lat", "lat"), ("nrmse_apd90", "apd90")):
            a, b = getattr(ref, attr), getattr(r, attr)
            try:
                row[key] = nrmse(a, b)
            except ValueError:
                row[key] = None
        row["wall_time_ratio_vs_reference"] = ref.timing.total / r.timing.total
        rows[label] = row
    rep = {"name": cfg.name, "reference": reference, "threshold_mV_per_ms": problem.threshold,
           "n_nodes": problem.mesh.n_nodes, "schemes": rows,
           "assembly_s": problem.timings["assembly_s"], "environment": environment(),
           "config": cfg.model_dump(mode="json")}
    if out is not None:
        write_json(out / "compare_report.json", rep)
    return Comparison(results, rep)


def dts_table(cfg: RunConfig, seed_override: int | None = None, spectral: bool | None = None) -> list[dict]:
    """dt_s (and optionally the power-iteration limit) for each configured spacing."""
    from .oracles import spectral_bound

    if cfg.dts is None:
        raise ValueError("config has no 'dts' section")
    spectral = cfg.dts.spectral if spectral is None else spectral
    rows = []
    for h_um in cfg.dts.spacings_um:
        h = h_um * 1e-4
        mesh = build_truncated_sheet(cfg.mesh.Lx, cfg.mesh.Ly, h, cfg.mesh.fiber_angle)
        if cfg.fibrosis:
            seed = cfg.fibrosis.seed if seed_override is None else seed_override
            mesh = assign_fibrosis(mesh, cfg.fibrosis.fraction, seed)
        d = cfg.diffusion
        op = assemble(mesh, build_diffusion_field(mesh, d.d0_myocyte, d.d0_fibrotic, d.rho))
        row = {"h_um": h_um, "nodes": mesh.n_nodes, "elements": mesh.n_elements, "dt_s_ms": op.dt_s}
        if spectral:
            sb = spectral_bound(op)
            row["critical_step_ms"] = sb.critical_step
            row["power_iterations"] = sb.iterations
        rows.append(row)
    return rows


def format_table(rows: list[dict]) -> str:
    if not rows:
        return ""
    keys = list(rows[0])
    cells = [[_cell(r[k]) for k in keys] for r in rows]
    widths = [max(len(k), *(len(c[i]) for c in cells)) for i, k in enumerate(keys)]
    lines = ["  ".join(k.rjust(w) for k, w in zip(keys, widths))]
    lines += ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def _cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


__all__ = ["OUTPUT_ENV", "Comparison", "Problem", "compare_experiment", "dts_table",
           "format_table", "output_dir", "report", "run_experiment", "write_json"]
