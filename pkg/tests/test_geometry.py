import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import circle
from starcert.errors import (CenterMismatchError, DimensionMismatchError, EmptyOperandsError,
                             PointOutsideError, ValidationError)
from starcert.geometry import (boundary_distances, boxes_disjoint, contains_points, iou_mask,
                               iou_mask_dense, iou_radial_same_center, on_boundary, pixel_window,
                               polygon_area, radial_area, rasterize, ray_distance_to_boundary,
                               vertices)
from starcert.models import BitMask, RadialPolygon, RayConfig


def _inside_scalar(px, py, verts):
    """Plain crossing-number test, one point at a time."""
    inside = False
    n = len(verts)
    for i in range(n):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % n]
        if (ay > py) != (by > py):
            x_cross = ax + (py - ay) * (bx - ax) / (by - ay)
            if px < x_cross:
                inside = not inside
    return inside


def test_ray_zero_points_along_x_and_y_grows_down():
    verts = vertices(circle(10.0, 10.0, 2.0, n=4))
    assert verts[0] == pytest.approx([12.0, 10.0])
    assert verts[1] == pytest.approx([10.0, 12.0])
    assert verts[2] == pytest.approx([8.0, 10.0])
    assert verts[3] == pytest.approx([10.0, 8.0])


def test_ray_config_rejects_fewer_than_three_rays():
    with pytest.raises(ValidationError):
        RayConfig(2)


def test_radial_area_of_diamond():
    assert radial_area([1.0, 1.0, 1.0, 1.0]) == pytest.approx(2.0)
    assert polygon_area(circle(0.0, 0.0, 3.0, n=4)) == pytest.approx(18.0)


def test_polygon_rejects_non_positive_radius():
    with pytest.raises(ValidationError):
        RadialPolygon(5.0, 5.0, [1.0, 0.0, 1.0, 1.0])


def test_boundary_points_count_as_inside():
    verts = vertices(circle(0.0, 0.0, 1.0, n=4))
    points = np.array([[0.5, 0.5], [0.0, 0.0], [2.0, 2.0]])
    assert on_boundary(points, verts).tolist() == [True, False, False]
    assert contains_points(points, verts).tolist() == [True, True, False]
    assert contains_points(points, verts, include_boundary=False).tolist()[2] is False


def test_rasterize_clips_to_image():
    mask = rasterize(circle(1.5, 1.5, 6.0), 8, 8)
    assert mask.dims == (8, 8)
    assert mask.x0 == 0 and mask.y0 == 0
    assert mask.bits[0, 0]
    assert pixel_window(circle(-20.5, -20.5, 3.0), 8, 8) is None
    assert rasterize(circle(-20.5, -20.5, 3.0), 8, 8).is_empty


@settings(deadline=None, max_examples=100)
@given(cx=st.floats(8.0, 24.0), cy=st.floats(8.0, 24.0),
       radii=st.lists(st.floats(0.5, 10.0), min_size=5, max_size=12))
def test_rasterize_matches_brute_force_point_in_polygon(cx, cy, radii):
    poly = RadialPolygon(cx, cy, radii)
    verts = vertices(poly)
    mask = rasterize(poly, 32, 32).bits
    for y in range(32):
        for x in range(32):
            point = np.array([[x + 0.5, y + 0.5]])
            if on_boundary(point, verts)[0]:
                assert mask[y, x]
                continue
            assert mask[y, x] == _inside_scalar(x + 0.5, y + 0.5, verts)


def test_iou_identical_and_disjoint():
    a = rasterize(circle(8.5, 8.5, 4.0), 32, 32)
    b = rasterize(circle(24.5, 24.5, 4.0), 32, 32)
    assert iou_mask(a, a) == 1.0
    assert iou_mask(a, b) == 0.0
    assert boxes_disjoint(a, b)


def test_iou_matches_full_array_reference():
    a = rasterize(circle(14.5, 15.5, 6.0), 32, 32)
    b = rasterize(circle(17.5, 15.5, 5.0), 32, 32)
    assert iou_mask(a, b) == pytest.approx(iou_mask_dense(a.bits, b.bits), abs=1e-12)


def test_iou_errors():
    with pytest.raises(DimensionMismatchError):
        iou_mask(rasterize(circle(4.5, 4.5, 2.0), 16, 16), rasterize(circle(4.5, 4.5, 2.0), 16, 17))
    with pytest.raises(EmptyOperandsError):
        iou_mask(BitMask(16, 16), BitMask(16, 16))


def test_radial_iou_of_scaled_polygon():
    a = circle(10.5, 10.5, 2.0)
    assert iou_radial_same_center(a, a) == 1.0
    assert iou_radial_same_center(a, circle(10.5, 10.5, 4.0)) == pytest.approx(0.25)
    with pytest.raises(CenterMismatchError):
        iou_radial_same_center(a, circle(11.5, 10.5, 2.0))


def test_radial_iou_tracks_rasterized_iou_on_smooth_pairs():
    rays = RayConfig(16)
    for seed in range(100):
        rng = np.random.default_rng(seed)
        base = rng.uniform(20.0, 40.0)
        phase = rng.uniform(0.0, 2.0 * np.pi, size=2)
        r1 = base * (1.0 + 0.1 * np.cos(2 * rays.angles + phase[0]))
        r2 = r1 * rng.uniform(0.8, 1.2) * (1.0 + 0.05 * np.cos(3 * rays.angles + phase[1]))
        a, b = RadialPolygon(64.5, 64.5, r1), RadialPolygon(64.5, 64.5, r2)
        exact = iou_mask(rasterize(a, 128, 128), rasterize(b, 128, 128))
        assert abs(iou_radial_same_center(a, b) - exact) <= 0.05


def test_ray_distance_to_boundary_from_center_hits_vertex():
    poly = RadialPolygon(20.0, 20.0, [3.0, 4.0, 5.0, 6.0, 7.0, 6.0, 5.0, 4.0])
    for i, r in enumerate(poly.radii):
        angle = 2.0 * math.pi * i / poly.n_rays
        assert ray_distance_to_boundary((20.0, 20.0), angle, poly) == pytest.approx(r, abs=1e-9)


def test_ray_distance_to_boundary_rejects_outside_points():
    with pytest.raises(PointOutsideError):
        ray_distance_to_boundary((40.0, 40.0), 0.0, circle(20.0, 20.0, 3.0))


def test_regular_sixteen_gon_vertices():
    verts = vertices(circle(0.0, 0.0, 1.0, n=16))
    angles = 2.0 * np.pi * np.arange(16) / 16
    assert np.allclose(verts, np.column_stack([np.cos(angles), np.sin(angles)]), atol=1e-12)
    assert polygon_area(circle(0.0, 0.0, 5.0, n=16)) == pytest.approx(8 * 25.0 * math.sin(math.pi / 8))


def test_iou_of_crossing_bars_is_one_third():
    a = np.zeros((4, 4), dtype=bool)
    a[0:2, 0:4] = True
    b = np.zeros((4, 4), dtype=bool)
    b[0:4, 0:2] = True
    assert iou_mask(BitMask.from_array(a), BitMask.from_array(b)) == pytest.approx(1.0 / 3.0)
    assert iou_mask(BitMask.from_array(b), BitMask.from_array(a)) == pytest.approx(1.0 / 3.0)


def test_ray_distance_across_a_diamond_edge():
    diamond = circle(0.0, 0.0, 1.0, n=4)
    assert ray_distance_to_boundary((0.0, 0.0), math.pi / 4, diamond) == pytest.approx(math.sqrt(2.0) / 2.0,
                                                                                       abs=1e-12)


def _edge_distance(radii, angle):
    # distance from the center to the edge between the two rays around angle
    n = len(radii)
    step = 2.0 * math.pi / n
    i = min(int(angle // step), n - 1)
    r0, r1 = radii[i], radii[(i + 1) % n]
    a = angle - i * step
    return r0 * r1 * math.sin(step) / (r0 * math.sin(a) + r1 * math.sin(step - a))


@settings(deadline=None, max_examples=100)
@given(radii=st.lists(st.floats(1.0, 10.0), min_size=3, max_size=16),
       angle=st.floats(0.0, 2.0 * math.pi, exclude_max=True))
def test_ray_distance_from_center_interpolates_along_the_edge(radii, angle):
    poly = RadialPolygon(20.0, 20.0, radii)
    d = ray_distance_to_boundary((20.0, 20.0), angle, poly)
    assert abs(d - _edge_distance(radii, angle)) < 1e-9


@settings(deadline=None, max_examples=100)
@given(radii=st.lists(st.floats(1.0, 10.0), min_size=5, max_size=16),
       frac=st.floats(0.0, 0.9), offset=st.floats(0.0, 2.0 * math.pi),
       angle=st.floats(0.0, 2.0 * math.pi))
def test_ray_distance_lands_on_the_boundary(radii, frac, offset, angle):
    poly = RadialPolygon(20.0, 20.0, radii)
    reach = frac * boundary_distances([poly.center], poly)[0]
    point = (20.0 + reach * math.cos(offset), 20.0 + reach * math.sin(offset))
    d = ray_distance_to_boundary(point, angle, poly)
    hit = np.array([[point[0] + d * math.cos(angle), point[1] + d * math.sin(angle)]])
    assert on_boundary(hit, vertices(poly))[0]


@settings(deadline=None, max_examples=50)
@given(cx=st.floats(50.0, 78.0), cy=st.floats(50.0, 78.0), base=st.floats(16.0, 40.0),
       jitter=st.lists(st.floats(0.9, 1.1), min_size=16, max_size=16))
def test_polygon_area_matches_pixel_count(cx, cy, base, jitter):
    poly = RadialPolygon(cx, cy, base * np.array(jitter))
    count = rasterize(poly, 128, 128).count
    assert abs(count - polygon_area(poly)) <= 0.02 * polygon_area(poly)


@settings(deadline=None, max_examples=100)
@given(kx=st.integers(80, 120), ky=st.integers(80, 120),
       radii=st.lists(st.floats(2.0, 10.0), min_size=3, max_size=16),
       dx=st.integers(-8, 8), dy=st.integers(-8, 8))
def test_rasterize_follows_integer_translation(kx, ky, radii, dx, dy):
    poly = RadialPolygon(kx / 4.0, ky / 4.0, radii)
    moved = RadialPolygon(kx / 4.0 + dx, ky / 4.0 + dy, radii)
    a, b = rasterize(poly, 64, 64), rasterize(moved, 64, 64)
    assert b.count == a.count
    assert np.array_equal(b.bits, np.roll(a.bits, (dy, dx), axis=(0, 1)))
