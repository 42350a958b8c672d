"""Regular quadrilateral sheets, tissue tags and region selection.

Nodes are numbered row-major, y outer and x inner, so node ``(ix, iy)`` has
index ``iy * (nx + 1) + ix``. Elements list their four corners
counterclockwise starting at the lower-left node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MYOCYTE_EPI = "myocyte-epi"
MYOCYTE_MID = "myocyte-mid"
MYOCYTE_ENDO = "myocyte-endo"
FIBROBLAST = "fibroblast"

FIBROSIS_RNG = "numpy.random.Generator(PCG64)"

_FORMAT_HEADER = "# monodomain-mesh v1"


@dataclass(frozen=True, eq=False)
class Mesh:
    node_coords: np.ndarray  # (n_nodes, 2), cm
    elements: np.ndarray  # (n_elements, 4), counterclockwise
    spacing_h: float
    node_tags: np.ndarray  # (n_nodes,), str
    element_fibers: np.ndarray  # (n_elements, 2), unit vectors
    metadata: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return int(self.node_coords.shape[0])

    @property
    def n_elements(self) -> int:
        return int(self.elements.shape[0])

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        xy = self.node_coords
        return float(xy[:, 0].min()), float(xy[:, 0].max()), float(xy[:, 1].min()), float(xy[:, 1].max())

    def validate(self) -> None:
        if self.elements.size and self.elements.max() >= self.n_nodes:
            raise ValueError("element references a node index beyond the node count")
        if self.elements.size and self.elements.min() < 0:
            raise ValueError("negative node index in connectivity")
        if self.node_tags.shape != (self.n_nodes,):
            raise ValueError("node_tags must have one entry per node")
        norms = np.linalg.norm(self.element_fibers, axis=1)
        if not np.allclose(norms, 1.0, rtol=0.0, atol=1e-12):
            raise ValueError("element fibers must be unit vectors")
        if np.any(signed_areas(self) <= 0.0):
            raise ValueError("elements must be counterclockwise with positive area")

    def with_tags(self, node_tags: np.ndarray, **metadata) -> "Mesh":
        meta = dict(self.metadata)
        meta.update(metadata)
        return Mesh(self.node_coords, self.elements, self.spacing_h,
                    np.asarray(node_tags, dtype=object), self.element_fibers, meta)

    def tag_counts(self) -> dict[str, int]:
        labels, counts = np.unique(self.node_tags.astype(str), return_counts=True)
        return {str(k): int(c) for k, c in zip(labels, counts)}


def signed_areas(mesh: Mesh) -> np.ndarray:
    """Shoelace area of every quadrilateral; positive means counterclockwise."""
    xy = mesh.node_coords[mesh.elements]
    x, y = xy[..., 0], xy[..., 1]
    return 0.5 * np.sum(x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y, axis=1)


def _cells_along(length: float, h: float, name: str) -> int:
    if length <= 0.0 or h <= 0.0:
        raise ValueError(f"{name} and h must be positive (got {name}={length}, h={h})")
    n = round(length / h)
    if n < 1 or abs(n * h - length) > 1e-9 * max(length, h):
        raise ValueError(f"{name}={length} cm is not an exact multiple of h={h} cm")
    return int(n)


def build_regular_sheet(Lx: float, Ly: float, h: float, fiber_angle: float = 0.0) -> Mesh:
    """Build an ``Lx`` x ``Ly`` cm sheet of square bilinear elements of side ``h``.

    All nodes start tagged ``myocyte-epi`` and every element carries the fiber
    direction ``(cos fiber_angle, sin fiber_angle)``.
    """
    nx = _cells_along(Lx, h, "Lx")
    ny = _cells_along(Ly, h, "Ly")
    mesh = build_regular_grid(nx, ny, h, fiber_angle)
    mesh.metadata.update(Lx=Lx, Ly=Ly)
    return mesh


def build_truncated_sheet(Lx: float, Ly: float, h: float, fiber_angle: float = 0.0) -> Mesh:
    """Like :func:`build_regular_sheet` but keeps ``floor(L / h)`` whole cells per side.

    Used when ``h`` does not divide the nominal dimensions (for example a
    180 um spacing on a 5 cm sheet gives 277 x 277 elements).
    """
    if Lx <= 0.0 or Ly <= 0.0 or h <= 0.0:
        raise ValueError("Lx, Ly and h must be positive")
    nx = max(1, int(math.floor(Lx / h + 1e-9)))
    ny = max(1, int(math.floor(Ly / h + 1e-9)))
    mesh = build_regular_grid(nx, ny, h, fiber_angle)
    mesh.metadata.update(Lx=nx * h, Ly=ny * h, nominal=(Lx, Ly))
    return mesh


def build_regular_grid(nx: int, ny: int, h: float, fiber_angle: float = 0.0) -> Mesh:
    """``nx`` x ``ny`` square elements of side ``h`` with the origin at the lower-left corner."""
    if nx < 1 or ny < 1 or h <= 0.0:
        raise ValueError(f"need nx, ny >= 1 and h > 0 (got {nx}, {ny}, {h})")
    xs = np.arange(nx + 1) * h
    ys = np.arange(ny + 1) * h
    X, Y = np.meshgrid(xs, ys)
    coords = np.column_stack([X.ravel(), Y.ravel()])

    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny))
    ll = (iy * (nx + 1) + ix).ravel()
    elements = np.column_stack([ll, ll + 1, ll + nx + 2, ll + nx + 1]).astype(np.int64)

    fiber = np.array([math.cos(fiber_angle), math.sin(fiber_angle)])
    fiber = fiber / np.linalg.norm(fiber)
    fibers = np.tile(fiber, (elements.shape[0], 1))
    tags = np.full(coords.shape[0], MYOCYTE_EPI, dtype=object)
    meta = {"kind": "regular_sheet", "h": h, "nx": nx, "ny": ny, "fiber_angle": fiber_angle}
    return Mesh(coords, elements, float(h), tags, fibers, meta)


def assign_fibrosis(mesh: Mesh, fraction: float, seed: int) -> Mesh:
    """Retag exactly ``round(fraction * N)`` uniformly chosen nodes as fibroblasts."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fibrosis fraction must lie in [0, 1], got {fraction}")
    n = mesh.n_nodes
    count = int(round(fraction * n))
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(n, size=count, replace=False))
    tags = mesh.node_tags.copy()
    tags[chosen] = FIBROBLAST
    return mesh.with_tags(tags, fibrosis={"fraction": fraction, "seed": seed,
                                          "count": count, "rng": FIBROSIS_RNG})


@dataclass(frozen=True)
class RegionSelector:
    """Node region description; all lengths in cm.

    kinds and their parameters:
      ``half_plane_x`` / ``half_plane_y``: ``value`` and ``side`` ("le" or "ge")
      ``rectangle``: ``xmin, xmax, ymin, ymax``
      ``nodes``: ``indices``
      ``disc``: ``center`` (x, y) and ``radius``
    """

    kind: str
    params: dict

    KINDS = ("half_plane_x", "half_plane_y", "rectangle", "nodes", "disc")

    @classmethod
    def from_dict(cls, data: dict) -> "RegionSelector":
        data = dict(data)
        kind = data.pop("kind", None)
        return cls(kind, data)


def select_nodes(mesh: Mesh, sel: RegionSelector, tol: float | None = None) -> np.ndarray:
    """Sorted node indices inside the region (boundaries inclusive up to ``tol``)."""
    if tol is None:
        tol = 1e-9 * max(mesh.spacing_h, 1.0)
    x = mesh.node_coords[:, 0]
    y = mesh.node_coords[:, 1]
    p = sel.params
    try:
        if sel.kind in ("half_plane_x", "half_plane_y"):
            coord = x if sel.kind == "half_plane_x" else y
            value = float(p["value"])
            side = p.get("side", "le")
            if side == "le":
                mask = coord <= value + tol
            elif side == "ge":
                mask = coord >= value - tol
            else:
                raise ValueError(f"half-plane side must be 'le' or 'ge', got {side!r}")
        elif sel.kind == "rectangle":
            xmin, xmax = float(p["xmin"]), float(p["xmax"])
            ymin, ymax = float(p["ymin"]), float(p["ymax"])
            if xmin > xmax or ymin > ymax:
                return np.empty(0, dtype=np.int64)
            mask = (x >= xmin - tol) & (x <= xmax + tol) & (y >= ymin - tol) & (y <= ymax + tol)
        elif sel.kind == "nodes":
            idx = np.unique(np.asarray(p["indices"], dtype=np.int64))
            if idx.size and (idx.min() < 0 or idx.max() >= mesh.n_nodes):
                raise ValueError("node index out of range")
            return idx
        elif sel.kind == "disc":
            cx, cy = (float(c) for c in p["center"])
            radius = float(p["radius"])
            if radius < 0.0:
                raise ValueError("disc radius must be non-negative")
            mask = (x - cx) ** 2 + (y - cy) ** 2 <= (radius + tol) ** 2
        else:
            raise ValueError(f"unknown selector kind {sel.kind!r}; expected one of {RegionSelector.KINDS}")
    except KeyError as exc:
        raise ValueError(f"selector {sel.kind!r} is missing parameter {exc.args[0]!r}") from None
    return np.flatnonzero(mask).astype(np.int64)


def nearest_node(mesh: Mesh, point: Sequence[float]) -> int:
    """Index of the node closest to ``point``; ties go to the lowest index."""
    d2 = np.sum((mesh.node_coords - np.asarray(point, dtype=float)) ** 2, axis=1)
    return int(np.argmin(d2))


def save_mesh(mesh: Mesh, path: str | Path) -> None:
    """Write the plain-text mesh format (see README, "Mesh file format")."""
    path = Path(path)
    lines = [_FORMAT_HEADER, f"spacing {float(mesh.spacing_h)!r}", f"nodes {mesh.n_nodes}"]
    for (x, y), tag in zip(mesh.node_coords, mesh.node_tags):
        lines.append(f"{float(x)!r} {float(y)!r} {tag}")
    lines.append(f"elements {mesh.n_elements}")
    for conn, (fx, fy) in zip(mesh.elements, mesh.element_fibers):
        lines.append(f"{conn[0]} {conn[1]} {conn[2]} {conn[3]} {float(fx)!r} {float(fy)!r}")
    path.write_text("\n".join(lines) + "\n")


def load_mesh(path: str | Path) -> Mesh:
    it: Iterable[str] = iter(Path(path).read_text().splitlines())
    header = next(it)
    if header.strip() != _FORMAT_HEADER:
        raise ValueError(f"{path}: not a monodomain mesh file")
    h = float(next(it).split()[1])
    n_nodes = int(next(it).split()[1])
    coords = np.empty((n_nodes, 2))
    tags = np.empty(n_nodes, dtype=object)
    for i in range(n_nodes):
        x, y, tag = next(it).split()
        coords[i] = float(x), float(y)
        tags[i] = tag
    n_el = int(next(it).split()[1])
    elements = np.empty((n_el, 4), dtype=np.int64)
    fibers = np.empty((n_el, 2))
    for e in range(n_el):
        parts = next(it).split()
        elements[e] = [int(v) for v in parts[:4]]
        fibers[e] = float(parts[4]), float(parts[5])
    mesh = Mesh(coords, elements, h, tags, fibers, {"kind": "file", "path": str(path)})
    mesh.validate()
    return mesh
