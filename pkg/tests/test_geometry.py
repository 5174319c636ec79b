import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracsurf import geometry as g
from fracsurf.geometry import GeometryError, MeshFormatError


def test_circle_closed_with_outward_normal():
    c = g.make_circle([0, 0], 1)
    assert c.closed
    assert len(c.boundary) == 0
    np.testing.assert_allclose(c.normal_at([1, 0]), [1, 0], atol=1e-15)


def test_circle_rejects_zero_radius():
    with pytest.raises(GeometryError):
        g.make_circle([0, 0], 0)


def test_arc_boundary_and_length():
    a = g.make_arc([0, 0], 1, 0, math.pi)
    b = sorted(map(tuple, np.round(a.boundary, 12)))
    assert b == [(-1.0, 0.0), (1.0, 0.0)]
    assert a.classical_measure() == pytest.approx(math.pi, rel=1e-14)
    assert g.make_arc([0, 0], 2, 0, math.pi).classical_measure() == pytest.approx(2 * math.pi)
    with pytest.raises(GeometryError):
        g.make_arc([0, 0], 1, 0, 2 * math.pi)


def test_arc_normal_is_the_circle_normal():
    a = g.make_arc([0, 0], 1, 0, math.pi)
    z = np.array([math.cos(1.0), math.sin(1.0)])
    np.testing.assert_allclose(a.normal_at(z), z, atol=1e-14)


@pytest.mark.parametrize("level", [0, 1, 2, 3])
def test_sphere_mesh_combinatorics(level):
    m = g.make_sphere_mesh([0, 0, 0], 1, level)
    assert len(m.triangles) == 20 * 4 ** level
    if level == 0:
        assert len(m.vertices) == 12
    assert m.closed


def test_sphere_measure_converges_and_level4_within_half_percent():
    dev = [abs(g.make_sphere_mesh([0, 0, 0], 1, L).classical_measure() - 4 * math.pi)
           for L in range(5)]
    assert all(b < a for a, b in zip(dev, dev[1:]))
    assert dev[4] / (4 * math.pi) < 5e-3


def test_load_single_triangle():
    m = g.load_mesh(io.StringIO("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"))
    assert len(m.triangles) == 1
    np.testing.assert_allclose(m.normal_at([0.2, 0.2, 0.0]), [0, 0, 1], atol=1e-15)


def test_load_rejects_quads_with_line_number():
    with pytest.raises(MeshFormatError) as exc:
        g.load_mesh(io.StringIO("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n"))
    assert exc.value.line == 5


def test_load_rejects_inconsistent_winding():
    src = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3\nf 2 3 4\n"
    with pytest.raises(GeometryError):
        g.load_mesh(io.StringIO(src))


def test_load_polyline():
    P = g.load_polyline(io.StringIO("closed\n0 0\n1 0\n1 1\n0 1\n"))
    assert P.classical_measure() == pytest.approx(4.0)
    with pytest.raises(MeshFormatError):
        g.load_polyline(io.StringIO("shut\n0 0\n"))


def test_classical_measures():
    assert g.classical_measure(g.make_circle([0, 0], 1)) == pytest.approx(2 * math.pi)
    sq = g.make_polyline([[0, 0], [1, 0], [1, 1], [0, 1]], closed=True)
    assert g.classical_measure(sq) == pytest.approx(4.0)


def test_circle_frame_at_top():
    c = g.make_circle([0, 0], 1)
    np.testing.assert_allclose(c.normal_at([0, 1]), [0, 1], atol=1e-15)
    (t,) = c.tangent_basis_at([0, 1])
    assert abs(abs(t[0]) - 1) < 1e-14 and abs(t[1]) < 1e-14


def test_mesh_facet_normal_is_cross_product():
    m = g.make_sphere_mesh([0, 0, 0], 1, 1)
    A, B, C = m.vertices[m.triangles[7]]
    n = np.cross(B - A, C - A)
    n /= np.linalg.norm(n)
    np.testing.assert_allclose(m.normal_at((A + B + C) / 3), n, atol=1e-12)


def test_off_surface_point_rejected():
    c = g.make_circle([0, 0], 1)
    with pytest.raises(GeometryError):
        c.normal_at([1 + 10 * c.tol_hit, 0])


def test_enclosing_radius():
    c = g.make_circle([0, 0], 1)
    assert c.enclosing_radius([0, 0]) == pytest.approx(1 + 1e-9, rel=1e-15)
    assert c.enclosing_radius([1, 0]) == pytest.approx(2 * (1 + 1e-9), rel=1e-15)
    m = g.load_mesh(io.StringIO("v 0 0 0\nv 3 0 0\nv 0 1 0\nf 1 2 3\n"))
    assert m.enclosing_radius([0, 0, 0]) == pytest.approx(3 * (1 + 1e-9), rel=1e-12)


def _primitives():
    return [g.make_circle([0.3, -0.2], 1.7), g.make_arc([0, 0], 1, 0.2, 2.5),
            g.make_polyline([[0, 0], [2, 0], [2, 1], [0, 1.5]], closed=True),
            g.make_sphere_mesh([0, 0, 0], 1, 2)]


@pytest.mark.parametrize("S", _primitives(), ids=repr)
def test_frames_orthonormal_at_random_points(S):
    pts, _ = S.sample(np.random.default_rng(0), 1000)
    for z in pts:
        nz = S.normal_at(z)
        F = np.vstack([nz, *S.tangent_basis_at(z)])
        np.testing.assert_allclose(F @ F.T, np.eye(S.dim), atol=1e-10)


@pytest.mark.parametrize("S", _primitives(), ids=repr)
def test_flip_negates_normals(S):
    z = S.sample(np.random.default_rng(1), 1)[0][0]
    np.testing.assert_array_equal(S.flipped().normal_at(z), -S.normal_at(z))


@settings(max_examples=40, deadline=None)
@given(cx=st.floats(-5, 5), cy=st.floats(-5, 5), r=st.floats(0.1, 10),
       t=st.floats(0, 2 * math.pi))
def test_circle_point_is_on_surface_with_radial_normal(cx, cy, r, t):
    c = g.make_circle([cx, cy], r)
    z = np.array([cx + r * math.cos(t), cy + r * math.sin(t)])
    np.testing.assert_allclose(c.normal_at(z), [math.cos(t), math.sin(t)], atol=1e-9)
    assert c.enclosing_radius(z) >= 2 * r * (1 - 1e-9)
