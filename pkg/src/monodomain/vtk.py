"""Legacy ASCII VTK output of nodal fields on the quad mesh."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

import numpy as np

from .mesh import Mesh

VTK_QUAD = 9


class VTKWriteError(OSError):
    pass


def _fmt(values: np.ndarray) -> str:
    return "\n".join(repr(float(x)) for x in values)


def write_vtk_snapshot(mesh: Mesh, V: np.ndarray, t: float, path: str | Path,
                       extra: Mapping[str, np.ndarray] | None = None) -> Path:
    """Write ``V`` (and any ``extra`` nodal arrays) as point data; the time goes in the header."""
    V = np.asarray(V, dtype=np.float64)
    if V.shape != (mesh.n_nodes,):
        raise ValueError(f"field has {V.shape[0] if V.ndim else 0} values for {mesh.n_nodes} nodes")
    fields = {"V": V}
    for name, arr in (extra or {}).items():
        arr = np.asarray(arr, dtype=np.float64)
        if arr.shape != (mesh.n_nodes,):
            raise ValueError(f"point field {name!r} does not match the node count")
        fields[name] = arr
    n, e = mesh.n_nodes, mesh.n_elements
    lines = ["# vtk DataFile Version 3.0", f"monodomain t={float(t)!r} ms", "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {n} double"]
    lines += [f"{x!r} {y!r} 0.0" for x, y in mesh.node_coords.tolist()]
    lines.append(f"CELLS {e} {5 * e}")
    lines += ["4 " + " ".join(map(str, quad)) for quad in mesh.elements.tolist()]
    lines.append(f"CELL_TYPES {e}")
    lines += [str(VTK_QUAD)] * e
    lines.append(f"POINT_DATA {n}")
    for name, arr in fields.items():
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default", _fmt(arr)]
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise VTKWriteError(f"cannot write VTK snapshot {path}: {exc}") from exc
    return path


def write_scalar_map_vtk(mesh: Mesh, values: np.ndarray, valid: np.ndarray, name: str,
                         path: str | Path) -> Path:
    """A ScalarMap as point data; invalid nodes are written as NaN."""
    arr = np.where(valid, values, np.nan)
    V = np.zeros(mesh.n_nodes)
    return write_vtk_snapshot(mesh, V, 0.0, path, {name: arr})


def snapshot_times(T: float, interval: float) -> np.ndarray:
    """Snapshot instants 0, interval, ... up to and including T."""
    n = int(np.floor(T / interval + 1e-9))
    return np.arange(n + 1) * interval
