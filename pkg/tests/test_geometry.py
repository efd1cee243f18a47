import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from expanderlab.expanders import make_fixture
from expanderlab.geometry import (
    DegenerateEdgeError,
    PolylineCurve,
    compute_vertex_geometry,
    default_defect_tolerance,
    discrete_laplacian,
    expander_defect,
    field_on,
    growth_condition_estimate,
    is_expander_type,
)

from conftest import expander


def circle(n, r=1.0):
    return make_fixture("circle", n=n, r=r)


def test_polygon_curvature_matches_unit_circle():
    g = compute_vertex_geometry(circle(360))
    assert np.abs(g.H + circle(360).vertices).max() <= 5e-4


def graded_circle(n):
    # on a regular polygon the discrete H is exactly -x, so grade the spacing
    t = 2 * np.pi * np.arange(n) / n
    p = t + 0.3 * np.sin(t)
    return PolylineCurve(np.column_stack([np.cos(p), np.sin(p)]), closed=True)


def test_circle_curvature_converges_second_order():
    errs = []
    for n in (90, 180, 360):
        c = graded_circle(n)
        errs.append(np.abs(compute_vertex_geometry(c).H + c.vertices).max())
    assert errs[0] / errs[1] >= 3 and errs[1] / errs[2] >= 3


def test_straight_line_has_zero_curvature():
    c = PolylineCurve(np.column_stack([np.linspace(-1, 1, 11), np.zeros(11)]))
    g = compute_vertex_geometry(c)
    assert np.all(g.H[1:-1] == 0.0)


def test_position_split_on_horizontal_line():
    c = PolylineCurve([[-1.0, 1.0], [0.0, 1.0], [1.0, 1.0]])
    g = compute_vertex_geometry(c)
    np.testing.assert_array_equal(g.x_perp[1], [0.0, 1.0])
    np.testing.assert_array_equal(g.x_tan[1], [0.0, 0.0])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=4, max_size=30),
       st.tuples(st.floats(-2, 2), st.floats(-2, 2)))
def test_tangent_normal_split_is_exact(points, p0):
    v = np.array(points)
    try:
        c = PolylineCurve(v, p0=p0)
    except (DegenerateEdgeError, ValueError):
        return
    g = compute_vertex_geometry(c)
    rel = c.vertices - c.p0
    r = np.linalg.norm(rel, axis=1)
    ok = np.linalg.norm(g.tangent, axis=1) > 0.5
    assert np.all(np.abs(np.linalg.norm(g.tangent[ok], axis=1) - 1) <= 1e-12)
    assert np.all(np.linalg.norm(g.x_tan + g.x_perp - rel, axis=1) <= 1e-12 * (1 + r))
    dots = np.abs(np.einsum("ij,ij->i", g.x_perp, g.tangent))
    assert np.all(dots[ok] <= 1e-12 * (1 + r[ok]))


def test_degenerate_edge_reports_index():
    with pytest.raises(DegenerateEdgeError) as info:
        PolylineCurve([[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [2.0, 1.0]])
    assert info.value.index == 1


def test_constructor_rejects_bad_input():
    with pytest.raises(ValueError):
        PolylineCurve([[0.0, 0.0], [1.0, 0.0]])
    with pytest.raises(ValueError):
        PolylineCurve([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], mu=-1.0)


def test_unit_circle_defect_is_minus_one():
    c = circle(2000)
    d = expander_defect(c)
    assert np.abs(d + 1).max() < 1e-5
    assert not is_expander_type(c)


@pytest.mark.parametrize("mu", [0.0, 1.0, 3.0])
def test_line_through_origin_is_equality_case(mu):
    c = make_fixture("line_through_origin", n=101, angle=0.3, mu=mu)
    assert np.abs(expander_defect(c)[1:-1]).max() < 1e-14
    assert is_expander_type(c)


def test_expander_defect_second_order(expander_curve):
    errs = [np.nanmax(np.abs(expander_defect(expander(ds=ds)))) for ds in (4e-3, 2e-3, 1e-3)]
    assert errs[-1] <= 1e-3
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(np.abs(orders - 2) < 0.2)


def test_corner_vertices_are_excluded():
    c = make_fixture("two_ray_cone", n=101)
    d = expander_defect(c)
    assert math.isnan(d[50])
    assert np.nanmax(np.abs(d)) < 1e-14


def test_defect_is_dilation_and_rotation_invariant(expander_curve):
    c = expander(ds=4e-3)
    lam, phi = 1.7, 0.4
    Q = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
    moved = c.with_vertices(lam * c.vertices @ Q.T, mu=c.mu / lam**2)
    np.testing.assert_allclose(expander_defect(moved), expander_defect(c), atol=1e-10)


def test_default_defect_tolerance_scale():
    c = make_fixture("offset_line", n=11, extent=3.0, mu=2.0)
    assert default_defect_tolerance(c) == pytest.approx(1e-6 * (1 + 2.0 * c.diameter**2))


def test_laplacian_examples():
    u = np.linspace(0, 1, 21)
    c = PolylineCurve(np.column_stack([u, np.zeros_like(u)]))
    assert np.all(discrete_laplacian(c, np.full(21, 3.0)) == 0)
    assert np.abs(discrete_laplacian(c, u)).max() < 1e-12
    lap = discrete_laplacian(c, u**2)
    np.testing.assert_allclose(lap[1:-1], 2.0, rtol=1e-10)


def test_laplacian_size_mismatch():
    c = make_fixture("offset_line", n=11)
    with pytest.raises(ValueError):
        discrete_laplacian(c, np.ones(10))


def test_field_rejects_negative_values():
    c = make_fixture("offset_line", n=11)
    with pytest.raises(ValueError):
        field_on(c, -np.ones(11))
    assert field_on(c, 2.0).shape == (11,)


def test_growth_condition_examples(expander_curve):
    assert growth_condition_estimate(make_fixture("line_through_origin", n=51, angle=1.0), 0.3) < 1e-28
    c = PolylineCurve([[-1.0, 1.0], [0.0, 1.0], [1.0, 1.0]])
    assert growth_condition_estimate(c, 1.0) == pytest.approx(1.0)
    val = growth_condition_estimate(expander(ds=4e-3), 0.5)
    assert math.isfinite(val) and val > 0


def test_convex_ccw_curvature_points_inward():
    c = make_fixture("circle", n=64, r=2.0, center=(1.0, -3.0))
    g = compute_vertex_geometry(c)
    centroid = c.vertices.mean(axis=0)
    assert np.all(np.einsum("ij,ij->i", g.H, c.vertices - centroid) < 0)
