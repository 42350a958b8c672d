"""Finite element diffusion operator on 4-node bilinear quadrilaterals.

The diffusion step is integrated explicitly, so the mass matrix is lumped
(row sums) and every sub-step is a single sparse matrix-vector product.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from numba import njit, prange

from .mesh import FIBROBLAST, Mesh

SAFETY_FACTOR = 0.9

_GAUSS = 1.0 / np.sqrt(3.0)
_GAUSS_POINTS = [(-_GAUSS, -_GAUSS), (_GAUSS, -_GAUSS), (_GAUSS, _GAUSS), (-_GAUSS, _GAUSS)]
_REF_CORNERS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


@dataclass(frozen=True, eq=False)
class DiffusionField:
    d_long: np.ndarray  # (n_elements,), cm^2/ms along the fiber
    d_trans: np.ndarray  # (n_elements,), cm^2/ms across the fiber
    fibers: np.ndarray  # (n_elements, 2)
    rule: str = "element fibrotic if any node is fibroblast"

    @property
    def tensors(self) -> np.ndarray:
        """Per-element ``d_l f f^T + d_t (I - f f^T)``, shape (n_elements, 2, 2)."""
        ff = np.einsum("ei,ej->eij", self.fibers, self.fibers)
        eye = np.eye(2)[None, :, :]
        return self.d_long[:, None, None] * ff + self.d_trans[:, None, None] * (eye - ff)

    def scaled(self, alpha: float) -> "DiffusionField":
        return DiffusionField(self.d_long * alpha, self.d_trans * alpha, self.fibers, self.rule)


@dataclass(frozen=True, eq=False)
class AssembledOperator:
    K: sp.csr_matrix
    m: np.ndarray
    dt_s: float

    @property
    def n(self) -> int:
        return int(self.m.shape[0])

    def apply(self, V: np.ndarray) -> np.ndarray:
        return _csr_matvec(self.K.indptr, self.K.indices, self.K.data, np.ascontiguousarray(V, dtype=np.float64))


def build_diffusion_field(mesh: Mesh, d0_myocyte: float, d0_fibrotic: float | None = None,
                          rho: float = 0.25) -> DiffusionField:
    """Per-element diffusion tensor coefficients.

    An element touching at least one fibroblast node diffuses with
    ``d0_fibrotic``; all other elements use ``d0_myocyte``.
    """
    if d0_myocyte <= 0.0:
        raise ValueError("d0_myocyte must be positive")
    if d0_fibrotic is None:
        d0_fibrotic = d0_myocyte
    if d0_fibrotic <= 0.0:
        raise ValueError("d0_fibrotic must be positive")
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    fib_node = mesh.node_tags == FIBROBLAST
    fib_elem = fib_node[mesh.elements].any(axis=1)
    d_long = np.where(fib_elem, d0_fibrotic, d0_myocyte).astype(np.float64)
    return DiffusionField(d_long, rho * d_long, np.asarray(mesh.element_fibers, dtype=np.float64))


def _shape_derivatives(xi: float, eta: float) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear shape values (4,) and reference derivatives (2, 4) at (xi, eta)."""
    cx, cy = _REF_CORNERS[:, 0], _REF_CORNERS[:, 1]
    N = 0.25 * (1.0 + cx * xi) * (1.0 + cy * eta)
    dN = np.vstack([0.25 * cx * (1.0 + cy * eta), 0.25 * cy * (1.0 + cx * xi)])
    return N, dN


def element_matrices(coords: np.ndarray, tensors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Element stiffness (E, 4, 4) and lumped mass (E, 4) by 2x2 Gauss quadrature.

    ``coords`` has shape (E, 4, 2) with counterclockwise corners.
    """
    n_el = coords.shape[0]
    Ke = np.zeros((n_el, 4, 4))
    Me = np.zeros((n_el, 4))
    for xi, eta in _GAUSS_POINTS:
        N, dN = _shape_derivatives(xi, eta)
        J = np.einsum("ia,eaj->eij", dN, coords)
        detJ = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        if np.any(detJ <= 0.0):
            bad = int(np.flatnonzero(detJ <= 0.0)[0])
            raise ValueError(f"element {bad} is degenerate or clockwise (det J = {detJ[bad]:.3e})")
        invJ = np.empty_like(J)
        invJ[:, 0, 0] = J[:, 1, 1] / detJ
        invJ[:, 1, 1] = J[:, 0, 0] / detJ
        invJ[:, 0, 1] = -J[:, 0, 1] / detJ
        invJ[:, 1, 0] = -J[:, 1, 0] / detJ
        B = np.einsum("eij,ja->eia", invJ, dN)
        Ke += np.einsum("eia,eij,ejb->eab", B, tensors, B) * detJ[:, None, None]
        Me += N[None, :] * detJ[:, None]
    return Ke, Me


def assemble(mesh: Mesh, field: DiffusionField) -> AssembledOperator:
    """Assemble the stiffness matrix and lumped mass vector, then compute dt_s."""
    if field.d_long.shape != (mesh.n_elements,):
        raise ValueError("diffusion field must define one tensor per element")
    coords = mesh.node_coords[mesh.elements]
    Ke, Me = element_matrices(coords, field.tensors)

    rows = np.repeat(mesh.elements, 4, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, 4)).ravel()
    K = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes)).tocsr()
    K.sum_duplicates()
    K.sort_indices()
    m = np.bincount(mesh.elements.ravel(), weights=Me.ravel(), minlength=mesh.n_nodes)

    _check_operator(K, m)
    return AssembledOperator(K, m, gershgorin_bound(K, m))


def _check_operator(K: sp.csr_matrix, m: np.ndarray) -> None:
    if np.any(m <= 0.0):
        raise ValueError("lumped mass must be positive at every node")
    scale = np.abs(K.data).max() if K.nnz else 0.0
    asym = abs(K - K.T)
    if asym.nnz and asym.max() > 1e-12 * scale:
        raise AssertionError("stiffness matrix is not symmetric")
    row_sums = np.asarray(K.sum(axis=1)).ravel()
    if np.any(np.abs(row_sums) > 1e-10 * scale):
        raise AssertionError("stiffness rows do not sum to zero")


def gershgorin_bound(K: sp.csr_matrix, m: np.ndarray, safety: float = SAFETY_FACTOR) -> float:
    """``safety * min_i m_i / (k_ii + sum_{j != i} |k_ij|)``."""
    diag = K.diagonal()
    abs_rows = np.asarray(abs(K).sum(axis=1)).ravel()
    radius = diag + (abs_rows - np.abs(diag))
    if np.any(radius <= 0.0):
        bad = int(np.flatnonzero(radius <= 0.0)[0])
        raise ValueError(f"row {bad} has non-positive Gershgorin radius; operator is not diffusive")
    return float(safety * np.min(m / radius))


def gershgorin_step(op: AssembledOperator) -> float:
    return gershgorin_bound(op.K, op.m)


@njit(parallel=True, cache=True)
def _csr_matvec(indptr, indices, data, x):
    n = indptr.size - 1
    y = np.empty(n)
    for i in prange(n):
        acc = 0.0
        for q in range(indptr[i], indptr[i + 1]):
            acc += data[q] * x[indices[q]]
        y[i] = acc
    return y


@njit(parallel=True, cache=True)
def _diffuse(indptr, indices, data, m, V, dt_sub, nsub):
    n = indptr.size - 1
    a = V.copy()
    b = np.empty(n)
    for _ in range(nsub):
        for i in prange(n):
            acc = 0.0
            for q in range(indptr[i], indptr[i + 1]):
                acc += data[q] * a[indices[q]]
            b[i] = a[i] - (dt_sub / m[i]) * acc
        a, b = b, a
    return a


def diffuse(op: AssembledOperator, V: np.ndarray, dt_sub: float, nsub: int = 1) -> np.ndarray:
    """``nsub`` forward Euler diffusion sub-steps of length ``dt_sub``."""
    if dt_sub <= 0.0:
        raise ValueError("diffusion sub-step must be positive")
    return _diffuse(op.K.indptr, op.K.indices, op.K.data, op.m,
                    np.ascontiguousarray(V, dtype=np.float64), float(dt_sub), int(nsub))


def diffusion_substep(op: AssembledOperator, V: np.ndarray, dt_sub: float) -> np.ndarray:
    """``V_i - (dt_sub / m_i) * sum_j k_ij V_j``."""
    return diffuse(op, V, dt_sub, 1)


def weighted_mean(op: AssembledOperator, V: np.ndarray) -> float:
    return float(np.dot(op.m, V) / op.m.sum())


def dump_coo(op: AssembledOperator, path: str | Path) -> None:
    """Write ``i j value`` lines (0-based), followed by ``m i value`` lines."""
    coo = op.K.tocoo()
    with open(path, "w") as fh:
        fh.write(f"# n={op.n} nnz={coo.nnz} dt_s={float(op.dt_s)!r}\n")
        for i, j, v in zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()):
            fh.write(f"{i} {j} {v!r}\n")
        for i, v in enumerate(op.m.tolist()):
            fh.write(f"m {i} {v!r}\n")
