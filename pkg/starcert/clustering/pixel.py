# Filename    : pixel.py
# Description : Pixel Approach - BSAS clustering of per-pass instance masks by mask IoU

import logging

from starcert.errors import DimensionMismatchError, ValidationError
from starcert.geometry import boxes_disjoint, iou_mask, iou_mask_dense, rasterize
from starcert.models import BitMask, Cluster, PredictionSet, RadialPolygon, require_open_unit

logger = logging.getLogger(__name__)

DEFAULT_THETA_IOU = 0.5


def rasterize_samples(samples, width=None, height=None):
    """
    Turn every prediction into a BitMask of common dimensions.

    Polygons need width/height; masks bring their own and must all agree.
    """
    dims = (width, height) if width is not None and height is not None else None
    out = []
    for sample in samples:
        masks = []
        for prediction in sample.predictions:
            if isinstance(prediction, RadialPolygon):
                if dims is None:
                    raise ValidationError('width and height are required to rasterize polygon predictions')
                prediction = rasterize(prediction, *dims)
            elif not isinstance(prediction, BitMask):
                raise ValidationError(f'unsupported prediction type {type(prediction).__name__}')
            if dims is None:
                dims = prediction.dims
            elif prediction.dims != dims:
                raise DimensionMismatchError(
                    f'pass {sample.pass_id}: mask dimensions {prediction.dims} differ from {dims}')
            masks.append(prediction)
        out.append(PredictionSet(sample.pass_id, masks))
    return out


def _ordered(samples):
    # stable: passes ascending, file order within a pass
    return sorted(samples, key=lambda s: s.pass_id)


def _iou(a, b):
    if a.is_empty or b.is_empty:
        return 0.0
    return iou_mask(a, b)


class _ClusterState:
    """Cluster plus what the sweep needs to reject it quickly"""

    __slots__ = ('cluster', 'masks', 'passes', 'anchor')

    def __init__(self, cluster_id, pass_id, mask):
        self.cluster = Cluster(cluster_id, [(pass_id, mask)])
        self.masks = [mask]
        self.passes = {pass_id}
        self.anchor = mask

    def add(self, pass_id, mask):
        self.cluster.members.append((pass_id, mask))
        self.masks.append(mask)
        self.passes.add(pass_id)


def _admission_mean(mask, state, theta_iou):
    """Mean IoU to the members if the mask clears theta_iou against every one of them, else None."""
    total = 0.0
    for member in state.masks:
        if boxes_disjoint(mask, member):
            return None
        iou = _iou(mask, member)
        if iou < theta_iou:
            return None
        total += iou
    return total / len(state.masks)


def cluster_bsas(samples, theta_iou=DEFAULT_THETA_IOU, width=None, height=None):
    """
    Basic Sequential Algorithmic Scheme over all passes.

    Predictions are visited pass by pass in file order. A prediction may join a
    cluster that has no member from its pass and whose every member it overlaps
    with IoU >= theta_iou; among several such clusters the highest mean IoU wins
    (ties go to the lowest id). Otherwise it founds a new cluster.

    Returns:
        list of Cluster with ids 1..M in creation order; members are (pass_id, BitMask)
    """
    theta_iou = require_open_unit('theta_iou', theta_iou)
    states = []
    total = 0
    for sample in _ordered(rasterize_samples(samples, width, height)):
        pass_id = sample.pass_id
        for mask in sample.predictions:
            total += 1
            best, best_mean = None, -1.0
            for state in states:
                if pass_id in state.passes or boxes_disjoint(mask, state.anchor):
                    continue
                mean = _admission_mean(mask, state, theta_iou)
                if mean is not None and mean > best_mean:
                    best, best_mean = state, mean
            if best is None:
                states.append(_ClusterState(len(states) + 1, pass_id, mask))
                logger.debug(f'Pass {pass_id}: founded cluster {len(states)}')
            else:
                best.add(pass_id, mask)
                logger.debug(f'Pass {pass_id}: joined cluster {best.cluster.id} (mean IoU {best_mean:.3f})')
    logger.info(f'BSAS grouped {total} prediction(s) into {len(states)} cluster(s)')
    return [state.cluster for state in states]


def cluster_bsas_naive(samples, theta_iou=DEFAULT_THETA_IOU, width=None, height=None):
    """Same contract as cluster_bsas, computed on full-image masks with no pruning."""
    theta_iou = require_open_unit('theta_iou', theta_iou)
    clusters, bits = [], []
    for sample in _ordered(rasterize_samples(samples, width, height)):
        for mask in sample.predictions:
            full = mask.bits
            best, best_mean = None, -1.0
            for cluster, member_bits in zip(clusters, bits):
                if cluster.has_pass(sample.pass_id):
                    continue
                ious = [0.0 if (not full.any() or not other.any()) else iou_mask_dense(full, other)
                        for other in member_bits]
                if all(iou >= theta_iou for iou in ious):
                    mean = sum(ious) / len(ious)
                    if mean > best_mean:
                        best, best_mean = cluster, mean
            if best is None:
                clusters.append(Cluster(len(clusters) + 1, [(sample.pass_id, mask)]))
                bits.append([full])
            else:
                best.members.append((sample.pass_id, mask))
                bits[best.id - 1].append(full)
    return clusters
