# Filename    : pipeline.py
# Description : Decode -> cluster -> score -> match, shared by every command

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from starcert.calibration import calibration_report, match_predictions
from starcert.certainty import (certainty_scores, median_prediction, percentile_band_radial,
                                pixel_stats)
from starcert.clustering.pixel import cluster_bsas
from starcert.clustering.radial import cluster_radial, empty_centers, extract_centers, mean_dense
from starcert.errors import MethodMismatchError
from starcert.io_formats import load_dense, load_instances
from starcert.models import SCORE_NAMES, DenseOutput, RadialPolygon, RunConfig, ScoredCluster
from starcert.nms import decode_instances
from starcert.synth import realize_ground_truth, scene_from_spec, simulate_passes

logger = logging.getLogger(__name__)


def load_samples(manifest, threads=1):
    if manifest.mode == 'dense':
        return load_dense(manifest, threads)
    return load_instances(manifest)


def cluster_samples(samples, config, width, height):
    """
    Cluster one sample set with config.method.

    Returns:
        (list of Cluster, diagnostics dict)
    """
    dense = bool(samples) and isinstance(samples[0], DenseOutput)
    if config.method == 'radial':
        if not dense:
            raise MethodMismatchError('the radial method needs a dense sample set')
        centers = extract_centers(mean_dense(samples), config.theta_prob, config.theta_nms, config.exact_iou)
        clusters = cluster_radial(samples, centers, config.theta_d)
        dropped = empty_centers(centers, clusters)
        if dropped:
            logger.warning(f'{len(dropped)} center(s) had no pass above theta_d and were dropped')
        return clusters, {'centers': len(centers), 'empty_centers': dropped}

    if dense:
        samples = [decode_instances(g, f, config.theta_prob, config.theta_nms, config.exact_iou)
                   for f, g in enumerate(samples, start=1)]
    clusters = cluster_bsas(samples, config.theta_iou, width, height)
    return clusters, {'predictions': sum(len(s) for s in samples)}


def score_clusters(clusters, passes, config, width, height):
    out = []
    for cluster in clusters:
        median = median_prediction(cluster)
        scores = certainty_scores(cluster, median, passes, config.exact_iou, width, height)
        band = percentile_band_radial(cluster) if isinstance(median, RadialPolygon) else pixel_stats(cluster)
        out.append(ScoredCluster(cluster, median, scores, band))
        logger.debug(f'Cluster {cluster.id}: size={cluster.size} c_spl={scores.c_spl:.4f} '
                     f'c_frac={scores.c_frac:.4f} c_hyb={scores.c_hyb:.4f}')
    return out


def score_sample_set(samples, config=None, width=None, height=None, passes=None):
    """
    Cluster a sample set and score every cluster.

    Args:
        samples: list of DenseOutput or list of PredictionSet, one per pass
        config: RunConfig (method and thresholds)
        width / height: image size (taken from dense samples when omitted)
        passes: F (defaults to len(samples))

    Returns:
        (list of ScoredCluster, diagnostics dict)
    """
    config = config or RunConfig()
    if samples and isinstance(samples[0], DenseOutput):
        width, height = samples[0].dims
    passes = passes or len(samples)
    clusters, diagnostics = cluster_samples(samples, config, width, height)
    return score_clusters(clusters, passes, config, width, height), diagnostics


def match_and_score(scored_clusters, gt, theta_match=0.5):
    """
    Match every cluster median against the ground truth once and pair the
    TP flag with each of the three scores.

    Returns:
        ({score name: [(score, is_tp), ...]}, number of false negatives)
    """
    predictions = [(s.median, s.scores.c_hyb) for s in scored_clusters]
    flags, false_negatives = match_predictions(predictions, gt, theta_match)
    scored = {name: [(s.scores.get(name), tp) for s, (_, tp) in zip(scored_clusters, flags)]
              for name in SCORE_NAMES}
    return scored, false_negatives


def pool_calibration(scored_lists, false_negatives, bins=10):
    """One CalibrationReport per score over the pooled (score, is_tp) lists of several images."""
    return {name: calibration_report([item for scored in scored_lists for item in scored[name]],
                                     bins, name, false_negatives)
            for name in SCORE_NAMES}


def image_seed(seed, image):
    """Scene seed of image `image` in the validation set of `seed`."""
    return int(np.random.SeedSequence([int(seed), int(image)]).generate_state(1)[0])


def synthetic_image(scene_spec, noise, passes, seed, image, config):
    """Generate, simulate, cluster and match one synthetic image; returns (scored lists, false negatives)."""
    scene_seed = image_seed(seed, image)
    scene = scene_from_spec(scene_spec, scene_seed)
    dense, instance_sets = simulate_passes(scene, passes, noise, scene_seed)
    gt = realize_ground_truth(scene, noise, scene_seed)
    samples = dense if config.method == 'radial' else instance_sets
    scored_clusters, _ = score_sample_set(samples, config, scene.width, scene.height, passes)
    return match_and_score(scored_clusters, gt, config.theta_match)


def synthetic_calibration(scene_spec, noise, passes, seed, images=1, config=None, threads=1):
    """
    Calibration of the three scores over a synthetic validation set of
    `images` scenes derived from `seed`, pooled in image order.

    The same seed yields the same scenes and the same first passes for any
    `passes`, so runs with different F differ only in the number of samples.
    """
    config = config or RunConfig()
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(lambda i: synthetic_image(scene_spec, noise, passes, seed, i, config),
                                range(images)))
    false_negatives = sum(fn for _, fn in results)
    return pool_calibration([scored for scored, _ in results], false_negatives, config.bins)
