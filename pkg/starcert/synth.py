# Filename    : synth.py
# Description : Synthetic ground-truth scenes and simulated stochastic forward passes
#
# Every random draw comes from its own substream keyed by (seed, stream, ...),
# so a pass or an instance can be generated alone, in any order or thread, and
# still match a serial run bit for bit.

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from starcert.errors import SceneTooCrowdedError, ValidationError
from starcert.geometry import boundary_distances, iou_radial_same_center, ray_distances, rasterize
from starcert.io_formats import (manifest_document, write_dense, write_label_mask,
                                 write_polygons_csv)
from starcert.models import (DenseOutput, LabelMask, NoiseModel, PredictionSet, RadialPolygon,
                             RayConfig, SyntheticScene)

logger = logging.getLogger(__name__)

MAX_PLACEMENT_ATTEMPTS = 1000
# outline harmonics and their relative amplitude at smoothness 0
HARMONICS = (2, 3)
ROUGHNESS = 0.25
HETEROGENEOUS_P_DET = (0.3, 1.0)
# probability anywhere but the center pixel stays strictly below the peak
OFF_PEAK = 0.99
AGREEMENT_DRAWS = 64

STREAM_SCENE = 0
STREAM_PASS = 1
STREAM_MEMBER = 2
STREAM_P_DET = 3
STREAM_REAL = 4
STREAM_AGREEMENT = 5
STREAM_FIELD = 6


def _rng(seed, *key):
    if int(seed) != seed or seed < 0:
        raise ValidationError(f'seed must be a non-negative integer, got {seed!r}')
    return np.random.default_rng(np.random.SeedSequence([int(seed), *key]))


def _f32(values):
    # radii are stored as float32 on disk; keep them exactly representable
    return np.asarray(values, dtype=np.float32).astype(np.float64)


# ===== Scenes =====

def _outline(rng, rays, r_min, r_max, smoothness):
    base = rng.uniform(r_min, r_max)
    amplitude = ROUGHNESS * (1.0 - smoothness) * base
    radii = np.full(rays.n, base)
    for k in HARMONICS:
        radii += rng.uniform(0.0, amplitude) / (k - 1) * np.cos(k * rays.angles + rng.uniform(0.0, 2.0 * np.pi))
    return _f32(np.clip(radii, r_min, r_max))


def generate_scene(width, height, M, rays=None, r_min=4.0, r_max=10.0, smoothness=0.5, seed=0,
                   max_attempts=MAX_PLACEMENT_ATTEMPTS):
    """
    M disjoint star-convex instances placed at pixel centers inside the image.

    Each outline is a base radius plus low-order harmonics, clamped to
    [r_min, r_max]. Centers are rejection-sampled so that the circles enclosing
    any two instances stay at least one pixel apart.

    Raises:
        SceneTooCrowdedError: an instance found no free spot within max_attempts
    """
    rays = rays or RayConfig()
    if M < 0:
        raise ValidationError(f'instance count must be >= 0, got {M}')
    if not 0 < r_min <= r_max:
        raise ValidationError(f'radii must satisfy 0 < r_min <= r_max, got {r_min}, {r_max}')
    if not 0.0 <= smoothness <= 1.0:
        raise ValidationError(f'smoothness must lie in [0, 1], got {smoothness}')
    rng = _rng(seed, STREAM_SCENE)

    polygons, reaches = [], []
    for j in range(M):
        radii = _outline(rng, rays, r_min, r_max, smoothness)
        reach = float(radii.max())
        # cx = k + 0.5 with reach <= cx <= width - reach
        kx = (int(np.ceil(reach - 0.5)), int(np.floor(width - reach - 0.5)))
        ky = (int(np.ceil(reach - 0.5)), int(np.floor(height - reach - 0.5)))
        if kx[0] > kx[1] or ky[0] > ky[1]:
            raise SceneTooCrowdedError(f'scene too crowded: instance {j + 1} (reach {reach:.2f}) '
                                       f'does not fit a {width}x{height} image', instance=j + 1)
        for _ in range(max_attempts):
            cx = rng.integers(kx[0], kx[1] + 1) + 0.5
            cy = rng.integers(ky[0], ky[1] + 1) + 0.5
            if all(np.hypot(cx - p.cx, cy - p.cy) >= reach + other + 1.0 for p, other in zip(polygons, reaches)):
                break
        else:
            raise SceneTooCrowdedError(f'scene too crowded: no room for instance {j + 1} of {M} '
                                       f'after {max_attempts} attempts', instance=j + 1)
        polygons.append(RadialPolygon(cx, cy, radii))
        reaches.append(reach)

    labels = np.zeros((height, width), dtype=np.uint16)
    for label, poly in enumerate(polygons, start=1):
        mask = rasterize(poly, width, height)
        if mask.is_empty:
            continue
        h, w = mask.crop.shape
        labels[mask.y0:mask.y0 + h, mask.x0:mask.x0 + w][mask.crop] = label
    logger.info(f'Generated scene seed={seed}: {M} instance(s) in {width}x{height}')
    return SyntheticScene(width, height, polygons, LabelMask(width, height, labels), seed, rays)


def scene_from_spec(spec, seed):
    return generate_scene(spec.width, spec.height, spec.instances, spec.rays,
                          spec.r_min, spec.r_max, spec.smoothness, seed)


# ===== Forward passes =====

def detection_probabilities(scene, noise, seed):
    """Per-instance detection probability; drawn from U[0.3, 1.0] when the noise is heterogeneous."""
    M = len(scene.gt_polygons)
    if noise.heterogeneous:
        return _rng(seed, STREAM_P_DET).uniform(*HETEROGENEOUS_P_DET, size=M)
    return np.full(M, noise.p_det)


def member_scales(noise, seed, F):
    """Persistent radial scale of every ensemble member (all ones for dropout sampling)."""
    if noise.sampling != 'ensemble':
        return np.ones(F)
    return np.array([np.exp(_rng(seed, STREAM_MEMBER, f).normal(0.0, noise.member_sigma))
                     for f in range(1, F + 1)])


def _perturbed(poly, p_det, sigma, scale, seed, pass_id, index):
    rng = _rng(seed, STREAM_PASS, pass_id, index)
    if not rng.random() < p_det:
        return None
    factors = np.exp(rng.normal(0.0, sigma, poly.n_rays))
    return poly.with_radii(_f32(poly.radii * factors * scale))


def _pass_polygons(scene, noise, seed, pass_id, p_det, scale):
    out = []
    for index, poly in enumerate(scene.gt_polygons):
        perturbed = _perturbed(poly, p_det[index], noise.sigma_radius, scale, seed, pass_id, index)
        if perturbed is not None:
            out.append(perturbed)
    return out


def simulate_instances(scene, F, noise=None, seed=0):
    """Instance sets only: per pass, the perturbed polygons of the detected instances in scene order."""
    noise = noise or NoiseModel()
    if F < 1:
        raise ValidationError(f'number of passes must be >= 1, got {F}')
    p_det = detection_probabilities(scene, noise, seed)
    scales = member_scales(noise, seed, F)
    return [PredictionSet(f, _pass_polygons(scene, noise, seed, f, p_det, scales[f - 1]))
            for f in range(1, F + 1)]


def render_dense(scene, polygons, sigma_prob=0.0, seed=0, pass_id=1):
    """
    Dense output of one pass.

    Inside each polygon the probability is the distance to the boundary divided
    by that of the center (1.0 at the center pixel, at most OFF_PEAK elsewhere)
    and the radial field holds the ray distances to the boundary. Where two
    polygons overlap the higher probability wins. Gaussian noise clipped to
    three standard deviations is added to the probability field.
    """
    h, w, n = scene.height, scene.width, scene.rays.n
    prob = np.zeros((h, w), dtype=np.float64)
    radial = np.zeros((h, w, n), dtype=np.float32)
    angles = scene.rays.angles
    for poly in polygons:
        mask = rasterize(poly, w, h)
        if mask.is_empty:
            continue
        ys, xs = np.nonzero(mask.crop)
        ys, xs = ys + mask.y0, xs + mask.x0
        points = np.column_stack([xs + 0.5, ys + 0.5])
        peak = boundary_distances([poly.center], poly)[0]
        p = np.minimum(boundary_distances(points, poly) / peak, OFF_PEAK)
        rays = ray_distances(points, angles, poly)
        at_center = (points[:, 0] == poly.cx) & (points[:, 1] == poly.cy)
        p[at_center] = 1.0
        rays[at_center] = poly.radii
        valid = np.all(np.isfinite(rays) & (rays > 0), axis=1)
        p[~valid] = 0.0
        rays[~valid] = 0.0
        wins = p > prob[ys, xs]
        prob[ys[wins], xs[wins]] = p[wins]
        radial[ys[wins], xs[wins]] = rays[wins]
    if sigma_prob > 0:
        noise = _rng(seed, STREAM_FIELD, pass_id).normal(0.0, sigma_prob, prob.shape)
        prob = np.clip(prob + np.clip(noise, -3 * sigma_prob, 3 * sigma_prob), 0.0, 1.0)
    return DenseOutput(prob, radial)


def simulate_passes(scene, F, noise=None, seed=0, threads=1):
    """
    F simulated forward passes over a scene.

    Returns:
        (list of DenseOutput, list of PredictionSet), both in pass order
    """
    noise = noise or NoiseModel()
    instance_sets = simulate_instances(scene, F, noise, seed)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        dense = list(pool.map(lambda s: render_dense(scene, s.predictions, noise.sigma_prob, seed, s.pass_id),
                              instance_sets))
    logger.info(f'Simulated {F} pass(es) over {len(scene.gt_polygons)} instance(s), '
                f'{sum(len(s) for s in instance_sets)} prediction(s)')
    return dense, instance_sets


# ===== Effective ground truth =====

def expected_spatial_agreement(poly, noise, seed=0, index=0, draws=AGREEMENT_DRAWS):
    """Monte-Carlo mean same-center IoU between perturbed draws of poly and their per-ray median."""
    if noise.sigma_radius == 0 and (noise.sampling != 'ensemble' or noise.member_sigma == 0):
        return 1.0
    rng = _rng(seed, STREAM_AGREEMENT, index)
    factors = np.exp(rng.normal(0.0, noise.sigma_radius, (draws, poly.n_rays)))
    if noise.sampling == 'ensemble':
        factors *= np.exp(rng.normal(0.0, noise.member_sigma, (draws, 1)))
    radii = poly.radii * factors
    median = poly.with_radii(np.median(radii, axis=0))
    return float(np.mean([iou_radial_same_center(poly.with_radii(r), median) for r in radii]))


def realize_ground_truth(scene, noise, seed=0):
    """
    Ground truth the predictions are judged against.

    With faithful noise each instance is kept with probability p_det times its
    expected spatial agreement and the rest become hallucinations absent from
    the labels; otherwise the scene's own label mask is returned.
    """
    if not noise.faithful:
        return scene.gt_mask
    p_det = detection_probabilities(scene, noise, seed)
    rng = _rng(seed, STREAM_REAL)
    real = []
    for index, poly in enumerate(scene.gt_polygons):
        agreement = expected_spatial_agreement(poly, noise, seed, index)
        if rng.random() < p_det[index] * agreement:
            real.append(index + 1)
    labels = np.where(np.isin(scene.gt_mask.labels, real), scene.gt_mask.labels, 0)
    logger.debug(f'Scene seed={scene.seed}: {len(real)} of {len(scene.gt_polygons)} instance(s) are real')
    return LabelMask(scene.width, scene.height, labels)


# ===== Sample-set directories =====

def write_sample_set(session, scene, dense, instance_sets, gt=None, name=None, sampling='dropout'):
    """
    Write a dense manifest at the session root and an instance manifest under
    instances/, both pointing at one ground-truth label file.
    """
    gt = gt if gt is not None else scene.gt_mask
    n = scene.rays.n
    gt_name = write_label_mask(session, 'ground_truth.labels.bin', gt)
    files = [write_dense(session, f'pass_{f:03d}', g) for f, g in enumerate(dense, start=1)]
    session.write_json('manifest.json', manifest_document('dense', scene.width, scene.height, n, files,
                                                          gt_name, name, sampling))
    csvs = []
    for s in instance_sets:
        csv_name = f'pass_{s.pass_id:03d}.polygons.csv'
        write_polygons_csv(session, f'instances/{csv_name}', s.pass_id, s.predictions, n)
        csvs.append(csv_name)
    session.write_json('instances/manifest.json',
                       manifest_document('instances', scene.width, scene.height, n, csvs,
                                         f'../{gt_name}', name, sampling))
    return session.path('manifest.json')
