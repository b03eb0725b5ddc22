import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smectic.mesh import BOTTOM, LEFT, RIGHT, TOP, Mesh, build_structured_rect, validate


def test_smallest_split():
    m = build_structured_rect(1)
    assert (m.n_vertices, m.n_triangles, len(m.boundary_edges)) == (4, 2, 4)
    assert validate(m) == []


def test_paper_resolution_counts():
    m = build_structured_rect(32)
    assert (m.n_vertices, m.n_triangles) == (1089, 2048)
    assert m.h == pytest.approx(1 / 16, rel=0, abs=1e-15)


def test_unit_square_area():
    m = build_structured_rect(2, (0.0, 1.0, 0.0, 1.0))
    assert abs(m.signed_areas().sum() - 1.0) <= 1e-14


def test_markers_cover_each_side():
    m = build_structured_rect(3)
    for mark in (BOTTOM, RIGHT, TOP, LEFT):
        assert np.count_nonzero(m.boundary_markers == mark) == 3


@pytest.mark.parametrize("nx, bounds", [(0, (-1, 1, -1, 1)), (-2, (-1, 1, -1, 1)),
                                        (2, (1, -1, -1, 1)), (2, (-1, 1, 0, 0))])
def test_invalid_arguments(nx, bounds):
    with pytest.raises(ValueError):
        build_structured_rect(nx, bounds)


def _with(m, **kw):
    d = dict(vertices=m.vertices, triangles=m.triangles, boundary_edges=m.boundary_edges,
             boundary_markers=m.boundary_markers, bounds=m.bounds)
    d.update(kw)
    return Mesh(**d)


def test_flipped_triangle_detected():
    m = build_structured_rect(2)
    tri = m.triangles.copy()
    tri[3] = tri[3, [0, 2, 1]]
    problems = validate(_with(m, triangles=tri))
    assert len(problems) == 1
    assert "area" in problems[0]


def test_dangling_edge_detected():
    m = build_structured_rect(2)
    # Boundary entry joining two opposite corners: not an edge of any triangle.
    be = np.vstack([m.boundary_edges, [[0, 8]]])
    bm = np.append(m.boundary_markers, BOTTOM)
    problems = validate(_with(m, boundary_edges=be, boundary_markers=bm))
    assert problems == ["boundary edge (0, 8) is not an edge of any triangle"]


def test_missing_triangle_leaves_free_edges():
    m = build_structured_rect(2)
    problems = validate(_with(m, triangles=m.triangles[1:]))
    assert sum("not a boundary edge" in p for p in problems) == 2


def test_extra_boundary_edge_detected():
    m = build_structured_rect(2)
    be = np.vstack([m.boundary_edges, [[0, 4]]])
    bm = np.append(m.boundary_markers, BOTTOM)
    assert len(validate(_with(m, boundary_edges=be, boundary_markers=bm))) == 1


@settings(max_examples=25, deadline=None)
@given(nx=st.integers(1, 12),
       x0=st.floats(-5, 5), w=st.floats(0.1, 10), y0=st.floats(-5, 5), hgt=st.floats(0.1, 10))
def test_structured_meshes_are_valid(nx, x0, w, y0, hgt):
    m = build_structured_rect(nx, (x0, x0 + w, y0, y0 + hgt))
    assert validate(m, rtol=1e-12) == []
    assert np.all(m.signed_areas() > 0)
    # Euler characteristic of a disc.
    n_edges = (3 * m.n_triangles + len(m.boundary_edges)) // 2
    assert m.n_vertices - n_edges + m.n_triangles == 1
