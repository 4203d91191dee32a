# Filename    : radial.py
# Description : Radial Approach - mean dense output, shared centers, threshold assignment

import logging

import numpy as np

from starcert.errors import CenterOutOfBoundsError, DimensionMismatchError, ValidationError
from starcert.models import CenterSet, Cluster, MeanDense, RadialPolygon, require_open_unit
from starcert.nms import DEFAULT_THETA_NMS, DEFAULT_THETA_PROB, extract_candidates, nms

logger = logging.getLogger(__name__)

DEFAULT_THETA_D = 0.5


def mean_dense(samples):
    """Elementwise arithmetic mean of the probability and radial fields of all passes."""
    if not samples:
        raise ValidationError('mean_dense needs at least one sample')
    shape = samples[0].radial.shape
    prob = np.zeros(shape[:2], dtype=np.float64)
    radial = np.zeros(shape, dtype=np.float64)
    for index, sample in enumerate(samples, start=1):
        if sample.radial.shape != shape:
            raise DimensionMismatchError(f'sample {index} has shape {sample.radial.shape}, expected {shape}')
        prob += sample.prob
        radial += sample.radial
    count = len(samples)
    return MeanDense(prob / count, radial / count, samples=count)


def extract_centers(mu, theta_prob=DEFAULT_THETA_PROB, theta_nms=DEFAULT_THETA_NMS, exact_iou=False):
    """
    Polygon centers of the mean dense output: the pixels NMS accepts, in acceptance order.

    A center needs a mean probability of at least theta_prob, so an instance
    whose peak reaches 1.0 in only k of F passes gets no center unless
    k / F >= theta_prob. Below that floor it is missing from the radial
    clusters even though the pixel approach still finds it.
    """
    candidates = extract_candidates(mu, theta_prob)
    accepted = nms(candidates, theta_nms, exact_iou, width=mu.width, height=mu.height)
    centers = CenterSet([(c.x, c.y) for c in accepted], [c.polygon for c in accepted],
                        [c.prob for c in accepted])
    logger.info(f'Extracted {len(centers)} center(s) from {len(candidates)} candidate(s)')
    return centers


def cluster_radial(samples, centers, theta_d=DEFAULT_THETA_D):
    """
    Assign, for every center m and pass f, the polygon stored at that center in
    pass f to cluster m when the pass's object probability there exceeds theta_d.

    Cluster ids are 1-based center indices; centers no pass exceeds theta_d for
    are left out of the result.
    """
    theta_d = require_open_unit('theta_d', theta_d)
    if not centers.centers:
        return []
    xs = np.array([x for x, _ in centers.centers])
    ys = np.array([y for _, y in centers.centers])
    height, width = samples[0].prob.shape if samples else (0, 0)
    outside = (xs < 0) | (ys < 0) | (xs >= width) | (ys >= height)
    if outside.any():
        m = int(np.flatnonzero(outside)[0])
        raise CenterOutOfBoundsError(f'center {centers.centers[m]} lies outside {width}x{height}', center=m + 1)

    # (F, M) lookups of probability at every center
    probs = np.stack([sample.prob[ys, xs] for sample in samples])
    hits = probs > theta_d
    clusters = []
    for m, (x, y) in enumerate(centers.centers):
        members = []
        for f in np.flatnonzero(hits[:, m]):
            radii = samples[f].radial[y, x]
            if np.any(radii <= 0):
                logger.warning(f'Pass {f + 1}: center ({x}, {y}) exceeds theta_d but has no valid polygon')
                continue
            members.append((int(f) + 1, RadialPolygon(x + 0.5, y + 0.5, radii.astype(np.float64))))
        if members:
            clusters.append(Cluster(m + 1, members, (int(x), int(y))))
        else:
            logger.debug(f'Center {m + 1} at ({x}, {y}) has no member above theta_d')
    logger.info(f'Radial clustering kept {len(clusters)} of {len(centers)} center(s) over {len(samples)} pass(es)')
    return clusters


def empty_centers(centers, clusters):
    """1-based ids of the centers that ended up with no member."""
    kept = {cluster.id for cluster in clusters}
    return [m for m in range(1, len(centers) + 1) if m not in kept]
