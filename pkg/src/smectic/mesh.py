"""Structured triangulations of rectangles with tagged boundary edges."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

# Side markers: bottom, right, top, left.
BOTTOM, RIGHT, TOP, LEFT = 1, 2, 3, 4


@dataclass(frozen=True)
class Mesh:
    """Conforming triangle mesh of a rectangle.

    Attributes
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, counter-clockwise
    boundary_edges : (nb, 2) int array of vertex pairs
    boundary_markers : (nb,) int array, one of BOTTOM/RIGHT/TOP/LEFT
    bounds : (x_min, x_max, y_min, y_max)
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_markers: np.ndarray
    bounds: tuple[float, float, float, float]

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def h(self) -> float:
        """Cell width along x."""
        n_bottom = int(np.count_nonzero(self.boundary_markers == BOTTOM))
        return (self.bounds[1] - self.bounds[0]) / n_bottom

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def area(self) -> float:
        x0, x1, y0, y1 = self.bounds
        return (x1 - x0) * (y1 - y0)


def build_structured_rect(nx: int, bounds=(-1.0, 1.0, -1.0, 1.0)) -> Mesh:
    """Uniform ``nx`` x ``nx`` grid, each cell split along its SW-NE diagonal.

    Vertices are numbered row by row from the bottom-left corner.
    """
    if not isinstance(nx, (int, np.integer)) or nx < 1:
        raise ValueError(f"nx must be a positive integer, got {nx!r}")
    x0, x1, y0, y1 = (float(b) for b in bounds)
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate or inverted bounds {bounds!r}")

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, nx + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    i, j = np.meshgrid(np.arange(nx), np.arange(nx))
    i, j = i.ravel(), j.ravel()
    sw, se, nw, ne = vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1)
    lower = np.column_stack([sw, se, ne])
    upper = np.column_stack([sw, ne, nw])
    triangles = np.empty((2 * nx * nx, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    k = np.arange(nx)
    edges = [
        (np.column_stack([vid(k, 0), vid(k + 1, 0)]), BOTTOM),
        (np.column_stack([vid(nx, k), vid(nx, k + 1)]), RIGHT),
        (np.column_stack([vid(k + 1, nx), vid(k, nx)]), TOP),
        (np.column_stack([vid(0, k + 1), vid(0, k)]), LEFT),
    ]
    boundary_edges = np.vstack([e for e, _ in edges]).astype(np.int64)
    markers = np.concatenate([np.full(nx, m) for _, m in edges])
    return Mesh(vertices, triangles, boundary_edges, markers, (x0, x1, y0, y1))


def edge_counts(triangles: np.ndarray) -> Counter:
    """Number of triangles sharing each undirected edge."""
    local = triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    local = np.sort(local, axis=1)
    return Counter(map(tuple, local.tolist()))


def validate(mesh: Mesh, rtol: float = 1e-13) -> list[str]:
    """Return a list of human-readable invariant violations (empty if valid)."""
    problems = []
    areas = mesh.signed_areas()
    for t in np.flatnonzero(areas <= 0.0):
        problems.append(f"triangle {t} has non-positive signed area {areas[t]:.3e}")

    counts = edge_counts(mesh.triangles)
    bnd = {tuple(sorted(e)) for e in mesh.boundary_edges.tolist()}
    for e, c in sorted(counts.items()):
        if c > 2:
            problems.append(f"edge {e} shared by {c} triangles")
        elif c == 1 and e not in bnd:
            problems.append(f"edge {e} belongs to one triangle but is not a boundary edge")
        elif c == 2 and e in bnd:
            problems.append(f"boundary edge {e} is shared by two triangles")
    for e in sorted(bnd - set(counts)):
        problems.append(f"boundary edge {e} is not an edge of any triangle")

    if problems:
        # Global checks below only restate local failures.
        return problems

    # Closed loops: every boundary vertex has even boundary degree.
    deg = Counter(mesh.boundary_edges.ravel().tolist())
    for v, d in sorted(deg.items()):
        if d % 2:
            problems.append(f"boundary loop open at vertex {v}")

    # Boundary edges must lie on the rectangle and cover its perimeter.
    x0, x1, y0, y1 = mesh.bounds
    pts = mesh.vertices[mesh.boundary_edges]
    on_side = (
        np.all(np.isclose(pts[..., 0], x0), axis=1) | np.all(np.isclose(pts[..., 0], x1), axis=1)
        | np.all(np.isclose(pts[..., 1], y0), axis=1) | np.all(np.isclose(pts[..., 1], y1), axis=1)
    )
    for b in np.flatnonzero(~on_side):
        problems.append(f"boundary edge {tuple(mesh.boundary_edges[b])} is off the rectangle")
    length = np.linalg.norm(pts[:, 1] - pts[:, 0], axis=1).sum()
    perimeter = 2 * ((x1 - x0) + (y1 - y0))
    if abs(length - perimeter) > 1e-12 * perimeter:
        problems.append(f"boundary length {length!r} differs from perimeter {perimeter!r}")

    total = areas.sum()
    if abs(total - mesh.area) > rtol * mesh.area:
        problems.append(f"total area {total!r} differs from domain area {mesh.area!r}")
    return problems
