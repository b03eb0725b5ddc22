"""Lagrange P1/P2 elements on triangles: quadrature, basis, dof maps.

Reference triangle has vertices (0, 0), (1, 0), (0, 1); barycentric
coordinates are ``(1 - x - y, x, y)``.  P2 local numbering is the three
vertices followed by the edge midpoints of (0, 1), (1, 2), (2, 0).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .mesh import Mesh

MAX_QUADRATURE_DEGREE = 30
LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))
N_LOCAL = {"P1": 3, "P2": 6}

# d(lambda_i)/d(x, y) on the reference triangle.
_BARY_GRAD = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (nq, 3) barycentric
    weights: np.ndarray  # (nq,), sum to 1/2
    degree: int

    @property
    def xy(self) -> np.ndarray:
        return self.points[:, 1:]


@lru_cache(maxsize=None)
def quadrature_rule(degree: int = 6) -> QuadratureRule:
    """Collapsed Gauss product rule, exact for polynomials of total ``degree``.

    Gauss-Jacobi (weight ``1 - x``) along x and Gauss-Legendre along the
    collapsed direction; ``ceil((degree + 1) / 2)`` points each.
    """
    if not isinstance(degree, (int, np.integer)) or degree < 0:
        raise ValueError(f"quadrature degree must be a non-negative integer, got {degree!r}")
    if degree > MAX_QUADRATURE_DEGREE:
        raise ValueError(f"quadrature degree {degree} exceeds supported maximum "
                         f"{MAX_QUADRATURE_DEGREE}")
    n = max(1, (degree + 2) // 2)
    t, wt = roots_jacobi(n, 1.0, 0.0)
    s, ws = roots_legendre(n)
    u = 0.5 * (1.0 + t)
    v = 0.5 * (1.0 + s)
    U, V = np.meshgrid(u, v, indexing="ij")
    x = U.ravel()
    y = (V * (1.0 - U)).ravel()
    w = (0.25 * wt[:, None] * 0.5 * ws[None, :]).ravel()
    pts = np.column_stack([1.0 - x - y, x, y])
    return QuadratureRule(pts, w, int(degree))


def eval_basis(kind: str, bary) -> tuple[np.ndarray, np.ndarray]:
    """Basis values and reference-coordinate gradients at barycentric points.

    ``bary`` has shape ``(..., 3)``; returns arrays of shape ``(..., nb)``
    and ``(..., nb, 2)``.
    """
    lam = np.asarray(bary, dtype=float)
    if kind == "P1":
        vals = lam.copy()
        grads = np.broadcast_to(_BARY_GRAD, lam.shape[:-1] + (3, 2)).copy()
        return vals, grads
    if kind != "P2":
        raise ValueError(f"unknown element kind {kind!r}")

    vals = np.empty(lam.shape[:-1] + (6,))
    grads = np.empty(lam.shape[:-1] + (6, 2))
    for i in range(3):
        vals[..., i] = lam[..., i] * (2.0 * lam[..., i] - 1.0)
        grads[..., i, :] = (4.0 * lam[..., i] - 1.0)[..., None] * _BARY_GRAD[i]
    for e, (i, j) in enumerate(LOCAL_EDGES):
        vals[..., 3 + e] = 4.0 * lam[..., i] * lam[..., j]
        grads[..., 3 + e, :] = 4.0 * (lam[..., j, None] * _BARY_GRAD[i]
                                      + lam[..., i, None] * _BARY_GRAD[j])
    return vals, grads


# Barycentric coordinates of the local nodes.
NODES = {
    "P1": np.eye(3),
    "P2": np.vstack([np.eye(3)] + [0.5 * (np.eye(3)[i] + np.eye(3)[j]) for i, j in LOCAL_EDGES]),
}


@dataclass(frozen=True)
class DofMap:
    kind: str
    n_dofs: int
    element_dofs: np.ndarray  # (nt, nb)
    dof_coords: np.ndarray  # (n_dofs, 2)
    boundary_dofs: np.ndarray  # sorted unique indices

    @property
    def n_local(self) -> int:
        return self.element_dofs.shape[1]

    def interpolate(self, func) -> np.ndarray:
        """Nodal interpolant of ``func(x, y)``."""
        x, y = self.dof_coords.T
        return np.asarray(func(x, y), dtype=float) * np.ones(self.n_dofs)


def mesh_edges(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Unique edges sorted lexicographically by (min, max) vertex index.

    Returns ``(edges, tri_edges)`` where ``tri_edges[t, e]`` is the global
    edge number of local edge ``e`` of triangle ``t``.
    """
    tri = mesh.triangles
    local = np.stack([np.sort(tri[:, list(e)], axis=1) for e in LOCAL_EDGES], axis=1)
    flat = local.reshape(-1, 2)
    edges, inverse = np.unique(flat, axis=0, return_inverse=True)
    return edges, inverse.reshape(len(tri), 3)


def build_dofmap(mesh: Mesh, kind: str) -> DofMap:
    """Vertices first (mesh numbering), then P2 edge dofs in sorted edge order."""
    nv = mesh.n_vertices
    bverts = np.unique(mesh.boundary_edges)
    if kind == "P1":
        return DofMap("P1", nv, mesh.triangles.copy(), mesh.vertices.copy(), bverts)
    if kind != "P2":
        raise ValueError(f"unknown element kind {kind!r}")
    edges, tri_edges = mesh_edges(mesh)
    element_dofs = np.hstack([mesh.triangles, nv + tri_edges])
    mid = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    coords = np.vstack([mesh.vertices, mid])
    bsorted = np.sort(mesh.boundary_edges, axis=1)
    # Row lookup of boundary edges in the sorted edge table.
    key = edges[:, 0] * (nv + 1) + edges[:, 1]
    bkey = bsorted[:, 0] * (nv + 1) + bsorted[:, 1]
    bedge = np.searchsorted(key, bkey)
    bdofs = np.union1d(bverts, nv + bedge)
    return DofMap("P2", nv + len(edges), element_dofs, coords, bdofs)


@dataclass(frozen=True)
class ElementData:
    """Per-element geometry and basis tabulation at quadrature points."""

    quad: QuadratureRule
    det: np.ndarray  # (nt,)
    jw: np.ndarray  # (nt, nq) physical quadrature weights
    xq: np.ndarray  # (nt, nq, 2) physical quadrature points
    values: dict  # kind -> (nq, nb)
    grads: dict  # kind -> (nt, nq, nb, 2) physical gradients
    grads_flat: dict  # kind -> (nt, nb, nq * 2), for batched products

    @property
    def n_elements(self) -> int:
        return len(self.det)


def tabulate(mesh: Mesh, degree: int = 6) -> ElementData:
    quad = quadrature_rule(degree)
    p = mesh.vertices[mesh.triangles]
    J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # columns
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    invJ = np.linalg.inv(J)
    jw = np.abs(det)[:, None] * quad.weights[None, :]
    xq = np.einsum("qk,tkd->tqd", quad.points, p)
    values, grads, flat = {}, {}, {}
    for kind in ("P1", "P2"):
        v, g = eval_basis(kind, quad.points)
        values[kind] = v
        # grad_phys = J^{-T} grad_ref
        grads[kind] = np.einsum("tkd,qbk->tqbd", invJ, g)
        flat[kind] = np.ascontiguousarray(np.moveaxis(grads[kind], 2, 1)).reshape(len(det), g.shape[1], -1)
    return ElementData(quad, det, jw, xq, values, grads, flat)


def evaluate(data: ElementData, dofmap: DofMap, coeffs: np.ndarray):
    """Field values (nt, nq) and gradients (nt, nq, 2) at quadrature points."""
    local = coeffs[dofmap.element_dofs]  # (nt, nb)
    vals = local @ data.values[dofmap.kind].T
    grads = (local[:, None, :] @ data.grads_flat[dofmap.kind]).reshape(len(local), -1, 2)
    return vals, grads
