# Filename    : figures.py
# Description : SVG reliability diagrams and prediction overlays

import logging

import numpy as np
from skimage import measure

from starcert.geometry import vertices
from starcert.models import BitMask, RadialPolygon
from starcert.sharedlib.jinja2 import render

logger = logging.getLogger(__name__)

PLOT_SIZE = 300
PLOT_MARGIN = 50
OVERLAY_TARGET = 512


def _closed(points):
    points = np.asarray(points, dtype=np.float64)
    if len(points) and not np.array_equal(points[0], points[-1]):
        points = np.vstack([points, points[:1]])
    return points


def polygon_outline(poly: RadialPolygon):
    return _closed(vertices(poly))


def mask_outlines(mask: BitMask):
    """Marching-squares outlines of a mask at level 0.5, in image coordinates."""
    if mask.is_empty:
        return []
    padded = np.pad(mask.crop.astype(np.float64), 1)
    return [np.column_stack([c[:, 1] + mask.x0 - 0.5, c[:, 0] + mask.y0 - 0.5])
            for c in measure.find_contours(padded, 0.5)]


def prediction_outlines(prediction):
    if isinstance(prediction, RadialPolygon):
        return [polygon_outline(prediction)]
    return mask_outlines(prediction)


def band_outlines(band):
    """(inner, outer) outline lists of an encoded band as stored in report.json."""
    if not band:
        return [], []
    if band.get('type') == 'radial':
        return ([polygon_outline(RadialPolygon.from_dict(band['inner']))],
                [polygon_outline(RadialPolygon.from_dict(band['outer']))])
    return ([_closed(c) for c in band.get('inner', []) if c],
            [_closed(c) for c in band.get('outer', []) if c])


def reliability_figure(report, title, size=PLOT_SIZE, margin=PLOT_MARGIN):
    """Bars of per-bin accuracy with the confidence gap shaded, against the identity diagonal."""
    bars = []
    for b in report.bins:
        if not b.count:
            continue
        bars.append({
            'x': b.lo * size,
            'width': (b.hi - b.lo) * size,
            'y': size - b.accuracy * size,
            'height': b.accuracy * size,
            'gap_y': size - max(b.accuracy, b.mean_confidence) * size,
            'gap_height': abs(b.accuracy - b.mean_confidence) * size
        })
    ticks = [{'pos': t * size, 'label': f'{t:.1f}'} for t in np.linspace(0.0, 1.0, 6)]
    return render('reliability.svg.j2', title=title, score=report.score, size=size, margin=margin,
                  bars=bars, ticks=ticks, pearson_r=report.pearson_r, ece=report.ece, mce=report.mce,
                  matched=report.matched, false_positives=report.false_positives,
                  false_negatives=report.false_negatives)


def overlay_figure(entries, tp_flags, width, height, gt=None, title=''):
    """
    Median outline of every cluster (green for TP, red for FP) with its inner
    and outer uncertainty band, over the ground-truth outlines.
    """
    instances = []
    for entry, tp in zip(entries, tp_flags):
        inner, outer = band_outlines(entry.band)
        median = prediction_outlines(entry.median) if entry.median is not None else []
        label_at = None
        if isinstance(entry.median, RadialPolygon):
            label_at = entry.median.center
        elif entry.median is not None and not entry.median.is_empty:
            x0, y0, x1, y1 = entry.median.bbox
            label_at = ((x0 + x1) / 2.0, (y0 + y1) / 2.0)
        instances.append({'id': entry.id, 'tp': tp, 'c_hyb': entry.scores.c_hyb, 'median': median,
                          'inner': inner, 'outer': outer, 'label_at': label_at})
    ground_truth = []
    if gt is not None:
        for mask in gt.split().values():
            ground_truth.extend(mask_outlines(mask))
    scale = max(1, OVERLAY_TARGET // max(width, height))
    return render('overlay.svg.j2', title=title, width=width, height=height, scale=scale,
                  instances=instances, ground_truth=ground_truth)
