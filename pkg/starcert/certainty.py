# Filename    : certainty.py
# Description : Median cluster predictions, certainty scores and uncertainty bands

import logging

import numpy as np
from skimage import measure

from starcert.errors import EmptyClusterError, ValidationError
from starcert.geometry import iou_mask, iou_radial_same_center, rasterize
from starcert.models import BitMask, CertaintyScores, PixelStats, RadialPolygon, UncertaintyBand

logger = logging.getLogger(__name__)

BAND_LO = 2.5
BAND_HI = 97.5
# mean-map levels of the pixel-mode uncertainty contours
CONTOUR_INNER = 0.975
CONTOUR_OUTER = 0.025


def _require_members(cluster):
    if cluster.size < 1:
        raise EmptyClusterError(f'cluster {cluster.id} has no members')
    return cluster.predictions


def _masks(cluster):
    masks = _require_members(cluster)
    if not all(isinstance(m, BitMask) for m in masks):
        raise ValidationError(f'cluster {cluster.id}: pixel statistics need BitMask members')
    dims = masks[0].dims
    if any(m.dims != dims for m in masks):
        raise ValidationError(f'cluster {cluster.id}: member masks differ in dimensions')
    return masks


def _radii(cluster):
    polys = _require_members(cluster)
    if not all(isinstance(p, RadialPolygon) for p in polys):
        raise ValidationError(f'cluster {cluster.id}: radial statistics need RadialPolygon members')
    first = polys[0]
    if any(p.cx != first.cx or p.cy != first.cy or p.n_rays != first.n_rays for p in polys):
        raise ValidationError(f'cluster {cluster.id}: members do not share a center and ray count')
    return first, np.stack([p.radii for p in polys])


def _union_window(masks, pad=0):
    boxes = [m.bbox for m in masks if not m.is_empty]
    if not boxes:
        return None
    return (min(b[0] for b in boxes) - pad, min(b[1] for b in boxes) - pad,
            max(b[2] for b in boxes) + pad, max(b[3] for b in boxes) + pad)


def _member_counts(masks, window):
    x0, y0, x1, y1 = window
    counts = np.zeros((y1 - y0, x1 - x0), dtype=np.int32)
    for m in masks:
        counts += m.window(x0, y0, x1, y1)
    return counts


def median_prediction_pixel(cluster):
    """Per-pixel median of binary membership; a pixel set in exactly half the members is set."""
    masks = _masks(cluster)
    width, height = masks[0].dims
    window = _union_window(masks)
    if window is None:
        return BitMask(width, height)
    x0, y0, _, _ = window
    counts = _member_counts(masks, window)
    return BitMask(width, height, x0, y0, 2 * counts >= len(masks))


def median_prediction_radial(cluster):
    """Per-ray median radius (mean of the two middle values for an even count)."""
    first, radii = _radii(cluster)
    return RadialPolygon(first.cx, first.cy, np.median(radii, axis=0))


def median_prediction(cluster):
    if cluster.size and isinstance(cluster.predictions[0], RadialPolygon):
        return median_prediction_radial(cluster)
    return median_prediction_pixel(cluster)


def _pair_iou(member, median, exact_iou, width, height):
    if isinstance(median, RadialPolygon):
        if not exact_iou:
            return iou_radial_same_center(member, median)
        if width is None or height is None:
            raise ValidationError('exact IoU on polygons needs the image width and height')
        member, median = rasterize(member, width, height), rasterize(median, width, height)
    if member.is_empty and median.is_empty:
        # identical (empty) predictions
        return 1.0
    return iou_mask(member, median)


def spatial_certainty(cluster, median_pred, exact_iou=False, width=None, height=None):
    """Mean IoU between each member and the median prediction."""
    members = _require_members(cluster)
    ious = [_pair_iou(member, median_pred, exact_iou, width, height) for member in members]
    return float(sum(ious) / len(ious))


def fractional_certainty(cluster, passes):
    """Fraction of the forward passes that detected the instance."""
    if passes < 1:
        raise ValidationError(f'number of passes must be >= 1, got {passes}')
    if cluster.size > passes:
        raise ValidationError(f'cluster {cluster.id} has {cluster.size} members but only {passes} passes')
    return cluster.size / float(passes)


def hybrid_certainty(c_spl, c_frac):
    for name, value in (('c_spl', c_spl), ('c_frac', c_frac)):
        if not 0.0 <= value <= 1.0:
            raise ValidationError(f'{name} must lie in [0, 1], got {value}')
    return float(c_spl) * float(c_frac)


def certainty_scores(cluster, median_pred, passes, exact_iou=False, width=None, height=None):
    c_spl = spatial_certainty(cluster, median_pred, exact_iou, width, height)
    c_frac = fractional_certainty(cluster, passes)
    return CertaintyScores(c_spl, c_frac, hybrid_certainty(c_spl, c_frac))


def percentile_band_radial(cluster, lo=BAND_LO, hi=BAND_HI):
    """Inner/outer polygons from per-ray percentiles (linear interpolation between ranks)."""
    if not 0.0 <= lo < hi <= 100.0:
        raise ValidationError(f'percentiles must satisfy 0 <= lo < hi <= 100, got {lo}, {hi}')
    first, radii = _radii(cluster)
    inner, outer = np.percentile(radii, [lo, hi], axis=0, method='linear')
    return UncertaintyBand(RadialPolygon(first.cx, first.cy, inner),
                           RadialPolygon(first.cx, first.cy, outer), lo, hi)


def _contours(mean, level, x0, y0):
    out = []
    for contour in measure.find_contours(mean, level):
        # (row, col) -> image (x, y) at pixel centers
        out.append(np.column_stack([contour[:, 1] + x0 + 0.5, contour[:, 0] + y0 + 0.5]))
    return out


def pixel_stats(cluster):
    """
    Mean and population standard deviation of membership per pixel, and the
    marching-squares contours of the mean at CONTOUR_INNER / CONTOUR_OUTER.

    The maps cover the members' union bounding box padded by one pixel so
    that every contour closes.
    """
    masks = _masks(cluster)
    window = _union_window(masks, pad=1)
    if window is None:
        return PixelStats(np.zeros((0, 0)), np.zeros((0, 0)), [], [])
    x0, y0, _, _ = window
    mean = _member_counts(masks, window) / float(len(masks))
    std = np.sqrt(mean * (1.0 - mean))
    return PixelStats(mean, std,
                      _contours(mean, CONTOUR_INNER, x0, y0),
                      _contours(mean, CONTOUR_OUTER, x0, y0), x0, y0)
