# Filename    : calibration.py
# Description : Ground-truth matching, reliability diagrams, Pearson R, ECE and MCE

import logging

import numpy as np
from scipy import stats

from starcert.errors import (DimensionMismatchError, EmptyBinsError,
                             UndefinedCorrelationError, ValidationError)
from starcert.geometry import boxes_disjoint, iou_mask, rasterize
from starcert.models import (BitMask, CalibrationReport, RadialPolygon, ReliabilityBin,
                             require_open_unit)

logger = logging.getLogger(__name__)

DEFAULT_BINS = 10
DEFAULT_THETA_MATCH = 0.5


def _as_mask(prediction, width, height, index):
    if isinstance(prediction, RadialPolygon):
        return rasterize(prediction, width, height)
    if not isinstance(prediction, BitMask):
        raise ValidationError(f'prediction {index}: unsupported type {type(prediction).__name__}')
    if prediction.dims != (width, height):
        raise DimensionMismatchError(
            f'prediction {index} is {prediction.dims[0]}x{prediction.dims[1]}, ground truth is {width}x{height}')
    return prediction


def match_predictions(predictions, gt, theta_match=DEFAULT_THETA_MATCH):
    """
    Greedy one-to-one matching by descending IoU.

    Args:
        predictions: list of (mask-or-polygon, score)
        gt: LabelMask

    Returns:
        ([(score, is_tp), ...] in prediction order, number of unmatched ground-truth instances)
    """
    theta_match = require_open_unit('theta_match', theta_match)
    masks = [_as_mask(p, gt.width, gt.height, i) for i, (p, _) in enumerate(predictions)]
    truth = gt.split()

    pairs = []
    for i, mask in enumerate(masks):
        for label, gt_mask in truth.items():
            if mask.is_empty or boxes_disjoint(mask, gt_mask):
                continue
            iou = iou_mask(mask, gt_mask)
            if iou >= theta_match:
                pairs.append((-iou, i, label))
    pairs.sort()

    matched_pred, matched_gt = set(), set()
    for _, i, label in pairs:
        if i in matched_pred or label in matched_gt:
            continue
        matched_pred.add(i)
        matched_gt.add(label)

    scored = [(float(score), i in matched_pred) for i, (_, score) in enumerate(predictions)]
    false_negatives = len(truth) - len(matched_gt)
    logger.debug(f'Matched {len(matched_pred)} of {len(predictions)} prediction(s) '
                 f'to {len(truth)} ground-truth instance(s)')
    return scored, false_negatives


def match_ground_truth(predictions, gt, theta_match=DEFAULT_THETA_MATCH):
    """List of (score, is_tp) per prediction; see match_predictions."""
    scored, _ = match_predictions(predictions, gt, theta_match)
    return scored


def bin_edges(bins):
    return [b / bins for b in range(bins + 1)]


def reliability_diagram(scored, bins=DEFAULT_BINS):
    """
    Bin b (1-based) covers ((b-1)/B, b/B]; the first bin also takes 0.

    Empty bins carry count 0 and None for confidence and accuracy.
    """
    if int(bins) != bins or bins < 2:
        raise ValidationError(f'number of bins must be an integer >= 2, got {bins!r}')
    edges = bin_edges(bins)
    scores = np.array([s for s, _ in scored], dtype=np.float64)
    hits = np.array([bool(t) for _, t in scored], dtype=bool)
    if scores.size and (np.any(~np.isfinite(scores)) or scores.min() < 0 or scores.max() > 1):
        raise ValidationError('scores must lie in [0, 1]')
    index = np.searchsorted(np.array(edges[1:]), scores, side='left')

    out = []
    for b in range(bins):
        selected = index == b
        count = int(selected.sum())
        if count:
            out.append(ReliabilityBin(edges[b], edges[b + 1], count,
                                      float(scores[selected].mean()), float(hits[selected].mean())))
        else:
            out.append(ReliabilityBin(edges[b], edges[b + 1], 0, None, None))
    return out


def _populated(bins):
    filled = [b for b in bins if b.count > 0]
    if not filled:
        raise EmptyBinsError('every reliability bin is empty')
    return filled


def ece(bins):
    """Count-weighted mean absolute gap between accuracy and confidence."""
    filled = _populated(bins)
    total = float(sum(b.count for b in filled))
    return float(sum((b.count / total) * abs(b.accuracy - b.mean_confidence) for b in filled))


def mce(bins):
    """Largest absolute gap between accuracy and confidence over populated bins."""
    return float(max(abs(b.accuracy - b.mean_confidence) for b in _populated(bins)))


def pearson_r(bins):
    """Pearson correlation of per-bin confidence and accuracy over populated bins."""
    filled = [b for b in bins if b.count > 0]
    if len(filled) < 2:
        raise UndefinedCorrelationError(f'undefined correlation: {len(filled)} populated bin(s), need 2')
    conf = np.array([b.mean_confidence for b in filled])
    acc = np.array([b.accuracy for b in filled])
    if np.ptp(conf) == 0 or np.ptp(acc) == 0:
        raise UndefinedCorrelationError('undefined correlation: zero variance in confidence or accuracy')
    r, _ = stats.pearsonr(conf, acc)
    return float(r)


def calibration_report(scored, bins=DEFAULT_BINS, score='c_hyb', false_negatives=0):
    """Reliability bins plus Pearson R (None when undefined), ECE and MCE for one score."""
    diagram = reliability_diagram(scored, bins)
    try:
        r = pearson_r(diagram)
    except UndefinedCorrelationError as e:
        logger.warning(f'{score}: Pearson R not reported ({e.message})')
        r = None
    matched = sum(1 for _, tp in scored if tp)
    return CalibrationReport(score=score, bins=diagram, pearson_r=r, ece=ece(diagram), mce=mce(diagram),
                             matched=matched, false_positives=len(scored) - matched,
                             false_negatives=false_negatives)
