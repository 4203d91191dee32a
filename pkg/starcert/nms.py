# Filename    : nms.py
# Description : Polygon candidate extraction and greedy non-maximum suppression

import logging
from collections import defaultdict

import numpy as np

from starcert.geometry import boxes_disjoint, iou_mask, rasterize
from starcert.models import Candidate, PredictionSet, require_open_unit

logger = logging.getLogger(__name__)

DEFAULT_THETA_PROB = 0.5
DEFAULT_THETA_NMS = 0.5
GRID_CELL = 32


def extract_candidates(g, theta_prob=DEFAULT_THETA_PROB):
    """
    One candidate per pixel whose object probability reaches theta_prob.

    Candidates are sorted by descending probability, ties by (y, x) ascending.
    Pixels whose radial distances are not all positive cannot form a polygon
    and are skipped.
    """
    theta_prob = require_open_unit('theta_prob', theta_prob)
    ys, xs = np.nonzero(g.prob >= theta_prob)
    if ys.size == 0:
        return []
    valid = np.all(g.radial[ys, xs] > 0, axis=1)
    if not valid.all():
        logger.debug(f'Skipping {int((~valid).sum())} candidate pixel(s) with non-positive radii')
        ys, xs = ys[valid], xs[valid]
    probs = g.prob[ys, xs].astype(np.float64)
    order = np.lexsort((xs, ys, -probs))
    return [Candidate(int(xs[i]), int(ys[i]), float(probs[i]), g.polygon_at(int(xs[i]), int(ys[i])))
            for i in order]


def _iou_or_zero(a, b):
    # an empty raster cannot overlap anything
    if a.is_empty or b.is_empty:
        return 0.0
    return iou_mask(a, b)


def nms_naive(candidates, theta_nms, width, height):
    """Reference sweep: every candidate is compared with every accepted one, no pruning."""
    theta_nms = require_open_unit('theta_nms', theta_nms)
    accepted, masks = [], []
    for cand in candidates:
        mask = rasterize(cand.polygon, width, height)
        if all(_iou_or_zero(mask, other) < theta_nms for other in masks):
            accepted.append(cand)
            masks.append(mask)
    return accepted


def _cells(bbox):
    x0, y0, x1, y1 = bbox
    for cy in range(y0 // GRID_CELL, (y1 - 1) // GRID_CELL + 1):
        for cx in range(x0 // GRID_CELL, (x1 - 1) // GRID_CELL + 1):
            yield cx, cy


def nms(candidates, theta_nms=DEFAULT_THETA_NMS, exact_iou=False, *, width, height):
    """
    Greedy suppression in candidate order.

    A candidate is accepted iff its mask IoU with every accepted candidate is
    below theta_nms. By default accepted masks are indexed in a uniform grid by
    bounding box and only those sharing a cell are compared; with exact_iou the
    unpruned all-pairs sweep is used. Both return the same accepted set.
    """
    if exact_iou:
        return nms_naive(candidates, theta_nms, width, height)
    theta_nms = require_open_unit('theta_nms', theta_nms)

    grid = defaultdict(list)
    accepted, masks = [], []
    comparisons = 0
    for cand in candidates:
        mask = rasterize(cand.polygon, width, height)
        if mask.is_empty:
            # overlaps nothing, so it is always accepted
            accepted.append(cand)
            masks.append(mask)
            continue
        neighbours = set()
        for cell in _cells(mask.bbox):
            neighbours.update(grid.get(cell, ()))
        suppressed = False
        for index in sorted(neighbours):
            other = masks[index]
            if boxes_disjoint(mask, other):
                continue
            comparisons += 1
            if iou_mask(mask, other) >= theta_nms:
                suppressed = True
                break
        if suppressed:
            continue
        index = len(masks)
        accepted.append(cand)
        masks.append(mask)
        for cell in _cells(mask.bbox):
            grid[cell].append(index)

    logger.debug(f'NMS kept {len(accepted)} of {len(candidates)} candidate(s) after {comparisons} IoU comparison(s)')
    return accepted


def decode_instances(g, pass_id, theta_prob=DEFAULT_THETA_PROB, theta_nms=DEFAULT_THETA_NMS, exact_iou=False):
    """Final instance polygons of one dense output, as StarDist decodes them."""
    candidates = extract_candidates(g, theta_prob)
    survivors = nms(candidates, theta_nms, exact_iou, width=g.width, height=g.height)
    return PredictionSet(pass_id, [cand.polygon for cand in survivors])
