# Filename    : geometry.py
# Description : Star-convex polygon vertices, areas, rasterization and IoU
#
# Conventions used everywhere: ray i points at angle 2*pi*i/n measured from +x,
# image y grows downward, pixel (x, y) is sampled at its center (x + 0.5, y + 0.5)
# and a center lying exactly on an edge counts as inside.

import logging

import numpy as np

from starcert.errors import (CenterMismatchError, DimensionMismatchError,
                             EmptyOperandsError, PointOutsideError, ValidationError)
from starcert.models import BitMask, RadialPolygon, RayConfig

logger = logging.getLogger(__name__)

# tolerance for "on the boundary" and ray/segment parameter checks
EPS = 1e-9


def vertices(poly: RadialPolygon, rays: RayConfig = None):
    """
    Vertex i sits at (cx + r_i cos(phi_i), cy + r_i sin(phi_i)).

    Returns:
        (n, 2) float array of x, y coordinates in ray order
    """
    rays = rays or poly.rays
    if rays.n != poly.n_rays:
        raise ValidationError(f'polygon has {poly.n_rays} radii but RayConfig has n={rays.n}')
    dirs = rays.directions
    return np.column_stack([poly.cx + poly.radii * dirs[:, 0], poly.cy + poly.radii * dirs[:, 1]])


def radial_area(radii):
    """Area of the star polygon with these radii (shared by area and same-center IoU)."""
    radii = np.asarray(radii, dtype=np.float64)
    n = radii.size
    return 0.5 * float(np.sum(radii * np.roll(radii, -1))) * np.sin(2.0 * np.pi / n)


def polygon_area(poly: RadialPolygon):
    return radial_area(poly.radii)


def polygon_bbox(poly: RadialPolygon):
    """Float bounding box (xmin, ymin, xmax, ymax) of the vertex polygon."""
    verts = vertices(poly)
    return (float(verts[:, 0].min()), float(verts[:, 1].min()),
            float(verts[:, 0].max()), float(verts[:, 1].max()))


def pixel_window(poly: RadialPolygon, width, height):
    """
    Integer window [x0, x1) x [y0, y1) of the pixels whose centers can lie inside
    the polygon, clipped to the image. Returns None when nothing is left.
    """
    xmin, ymin, xmax, ymax = polygon_bbox(poly)
    x0 = max(int(np.ceil(xmin - 0.5 - EPS)), 0)
    y0 = max(int(np.ceil(ymin - 0.5 - EPS)), 0)
    x1 = min(int(np.floor(xmax - 0.5 + EPS)) + 1, width)
    y1 = min(int(np.floor(ymax - 0.5 + EPS)) + 1, height)
    if x0 >= x1 or y0 >= y1:
        return None
    return x0, y0, x1, y1


def _edges(verts):
    return verts, np.roll(verts, -1, axis=0)


def on_boundary(points, verts):
    """Boolean per point: lies on some polygon edge (within EPS)."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    a, b = _edges(verts)
    px, py = points[:, 0:1], points[:, 1:2]
    ex, ey = (b - a)[:, 0], (b - a)[:, 1]
    dx, dy = px - a[:, 0], py - a[:, 1]
    cross = ex * dy - ey * dx
    dot = ex * dx + ey * dy
    length2 = ex * ex + ey * ey
    hit = (np.abs(cross) <= EPS * np.sqrt(length2)) & (dot >= -EPS) & (dot <= length2 + EPS)
    return hit.any(axis=1)


def contains_points(points, verts, include_boundary=True):
    """Even-odd point-in-polygon test, vectorized over points."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    a, b = _edges(verts)
    px, py = points[:, 0:1], points[:, 1:2]
    ax, ay, bx, by = a[:, 0], a[:, 1], b[:, 0], b[:, 1]
    straddles = (ay > py) != (by > py)
    with np.errstate(divide='ignore', invalid='ignore'):
        x_cross = ax + (py - ay) * (bx - ax) / (by - ay)
    crossings = np.count_nonzero(straddles & (px < x_cross), axis=1)
    inside = (crossings % 2) == 1
    if include_boundary:
        inside |= on_boundary(points, verts)
    return inside


def rasterize(poly: RadialPolygon, width, height):
    """BitMask of the pixels whose centers fall inside the polygon, clipped to the image."""
    if width <= 0 or height <= 0:
        raise ValidationError(f'raster dimensions must be positive, got {width}x{height}')
    window = pixel_window(poly, width, height)
    if window is None:
        return BitMask(width, height)
    x0, y0, x1, y1 = window
    xs, ys = np.meshgrid(np.arange(x0, x1) + 0.5, np.arange(y0, y1) + 0.5)
    points = np.column_stack([xs.ravel(), ys.ravel()])
    inside = contains_points(points, vertices(poly)).reshape(y1 - y0, x1 - x0)
    return BitMask(width, height, x0, y0, inside)


def intersection_count(a: BitMask, b: BitMask):
    """Pixels set in both masks, computed over the overlap of their stored windows only."""
    if a.is_empty or b.is_empty:
        return 0
    ax0, ay0, ax1, ay1 = a.bbox
    bx0, by0, bx1, by1 = b.bbox
    x0, y0, x1, y1 = max(ax0, bx0), max(ay0, by0), min(ax1, bx1), min(ay1, by1)
    if x0 >= x1 or y0 >= y1:
        return 0
    wa = a.crop[y0 - a.y0:y1 - a.y0, x0 - a.x0:x1 - a.x0]
    wb = b.crop[y0 - b.y0:y1 - b.y0, x0 - b.x0:x1 - b.x0]
    return int(np.count_nonzero(wa & wb))


def boxes_disjoint(a: BitMask, b: BitMask):
    if a.is_empty or b.is_empty:
        return True
    ax0, ay0, ax1, ay1 = a.bbox
    bx0, by0, bx1, by1 = b.bbox
    return ax1 <= bx0 or bx1 <= ax0 or ay1 <= by0 or by1 <= ay0


def iou_mask(a: BitMask, b: BitMask):
    """|a & b| / |a | b| by pixel counting."""
    if a.dims != b.dims:
        raise DimensionMismatchError(f'mask dimensions differ: {a.dims} vs {b.dims}')
    if a.is_empty and b.is_empty:
        raise EmptyOperandsError('IoU is undefined for two empty masks (empty operands)')
    inter = intersection_count(a, b)
    return inter / float(a.count + b.count - inter)


def iou_mask_dense(a, b):
    """Reference IoU on full boolean arrays, without any window bookkeeping."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise DimensionMismatchError(f'mask shapes differ: {a.shape} vs {b.shape}')
    union = np.count_nonzero(a | b)
    if union == 0:
        raise EmptyOperandsError('IoU is undefined for two empty masks (empty operands)')
    return np.count_nonzero(a & b) / float(union)


def iou_radial_same_center(a: RadialPolygon, b: RadialPolygon):
    """
    Area of the per-ray minimum polygon over area of the per-ray maximum polygon.

    Exact only at the sampled rays; an approximation of mask IoU in between.
    """
    if a.cx != b.cx or a.cy != b.cy:
        raise CenterMismatchError(f'centers differ: {a.center} vs {b.center}')
    if a.n_rays != b.n_rays:
        raise ValidationError(f'ray counts differ: {a.n_rays} vs {b.n_rays}')
    return radial_area(np.minimum(a.radii, b.radii)) / radial_area(np.maximum(a.radii, b.radii))


def ray_distances(points, angles, poly: RadialPolygon):
    """
    Distance from each point along each direction to the first boundary crossing.

    Args:
        points: (k, 2) array of points inside the polygon
        angles: (m,) array of directions in radians

    Returns:
        (k, m) float array; inf where a ray misses every edge (only for outside points)
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    angles = np.asarray(angles, dtype=np.float64).ravel()
    verts = vertices(poly)
    a, b = _edges(verts)
    e = b - a                                        # (E, 2)
    d = np.stack([np.cos(angles), np.sin(angles)], axis=1)  # (m, 2)
    ap = a[None, :, :] - points[:, None, :]          # (k, E, 2)
    denom = d[:, 0:1] * e[:, 1] - d[:, 1:2] * e[:, 0]  # (m, E)
    cross_ap_e = ap[..., 0] * e[:, 1] - ap[..., 1] * e[:, 0]  # (k, E)
    cross_ap_d = (ap[:, None, :, 0] * d[None, :, 1, None]
                  - ap[:, None, :, 1] * d[None, :, 0, None])  # (k, m, E)
    with np.errstate(divide='ignore', invalid='ignore'):
        t = cross_ap_e[:, None, :] / denom[None, :, :]
        u = cross_ap_d / denom[None, :, :]
    valid = (np.abs(denom)[None, :, :] > EPS) & (t > EPS) & (u >= -EPS) & (u <= 1.0 + EPS)
    t = np.where(valid, t, np.inf)
    return t.min(axis=2)


def ray_distance_to_boundary(point, direction_angle, poly: RadialPolygon):
    """Distance from an interior point along a direction to the polygon boundary."""
    verts = vertices(poly)
    point = np.asarray(point, dtype=np.float64).reshape(1, 2)
    if not contains_points(point, verts, include_boundary=False)[0] or on_boundary(point, verts)[0]:
        raise PointOutsideError(f'point {tuple(point[0])} is not strictly inside the polygon')
    return float(ray_distances(point, [direction_angle], poly)[0, 0])


def boundary_distances(points, poly: RadialPolygon):
    """Euclidean distance from each point to the nearest polygon edge."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    a, b = _edges(vertices(poly))
    e = b - a
    length2 = np.sum(e * e, axis=1)
    ap = points[:, None, :] - a[None, :, :]
    t = np.clip(np.sum(ap * e[None, :, :], axis=2) / length2, 0.0, 1.0)
    nearest = a[None, :, :] + t[..., None] * e[None, :, :]
    return np.sqrt(np.min(np.sum((points[:, None, :] - nearest) ** 2, axis=2), axis=1))
