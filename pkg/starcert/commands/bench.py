# Filename    : bench.py
# Description : `starcert bench` - wall-time scaling of BSAS versus radial clustering

import logging
import math
import time
from datetime import datetime

import numpy as np
from dateutil import tz

from starcert.clustering.pixel import cluster_bsas, rasterize_samples
from starcert.clustering.radial import cluster_radial
from starcert.commands import int_list
from starcert.io_formats import bench_csv
from starcert.models import CenterSet, NoiseModel, RayConfig
from starcert.sharedlib.outputs import OutputSession
from starcert.synth import generate_scene, render_dense, simulate_instances

logger = logging.getLogger(__name__)

DEFAULT_SIZES = (50, 100, 200, 400, 800)
DEFAULT_PASSES = 10
# image area per instance and radius range of the workloads
AREA_PER_INSTANCE = 400
BENCH_R_MIN = 3.0
BENCH_R_MAX = 6.0
BENCH_SIGMA = 0.05


def workload(instances, passes=DEFAULT_PASSES, seed=0):
    """Scene, rasterized instance sets, dense outputs and ground-truth centers for one size."""
    side = int(math.ceil(math.sqrt(AREA_PER_INSTANCE * instances)))
    scene = generate_scene(side, side, instances, RayConfig(16), BENCH_R_MIN, BENCH_R_MAX, 0.5, seed)
    instance_sets = simulate_instances(scene, passes, NoiseModel(sigma_radius=BENCH_SIGMA), seed)
    masks = rasterize_samples(instance_sets, side, side)
    dense = [render_dense(scene, s.predictions, 0.0, seed, s.pass_id) for s in instance_sets]
    centers = CenterSet([(int(p.cx), int(p.cy)) for p in scene.gt_polygons], list(scene.gt_polygons),
                        [1.0] * instances)
    return scene, masks, dense, centers


def _timed(fn, repeats):
    best = math.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def fit_slope(predictions, seconds):
    """Least-squares slope of log(seconds) against log(predictions)."""
    slope, _ = np.polyfit(np.log(predictions), np.log(seconds), 1)
    return float(slope)


def run_bench(sizes=DEFAULT_SIZES, passes=DEFAULT_PASSES, seed=0, repeats=1):
    """
    Time cluster_bsas on pre-rasterized masks and cluster_radial on dense
    outputs with known centers; workload generation is not timed.

    Returns:
        (rows for bench.csv, {method: fitted slope})
    """
    rows = []
    for size in sizes:
        scene, masks, dense, centers = workload(size, passes, seed)
        predictions = sum(len(s) for s in masks)
        width, height = scene.width, scene.height
        bsas = _timed(lambda: cluster_bsas(masks, 0.5, width, height), repeats)
        radial = _timed(lambda: cluster_radial(dense, centers, 0.5), repeats)
        rows.append({'method': 'bsas', 'instances': size, 'predictions': predictions, 'seconds': bsas})
        rows.append({'method': 'radial', 'instances': size, 'predictions': predictions, 'seconds': radial})
        logger.info(f'Bench size {size}: {predictions} prediction(s), bsas {bsas:.4f}s, radial {radial:.4f}s')

    slopes = {}
    for method in ('bsas', 'radial'):
        mine = [r for r in rows if r['method'] == method]
        if len(mine) >= 2:
            slopes[method] = fit_slope([r['predictions'] for r in mine], [r['seconds'] for r in mine])
    return rows, slopes


def register(subparsers):
    parser = subparsers.add_parser('bench', help='measure clustering scaling',
                                   description='Time BSAS and radial clustering on synthetic workloads of '
                                               'growing size and fit the log-log slope of time against the '
                                               'number of predictions.')
    parser.add_argument('--out', required=True, help='output directory for bench.csv and bench.json')
    parser.add_argument('--sizes', type=int_list, default=list(DEFAULT_SIZES),
                        help='instance counts (default: 50,100,200,400,800)')
    parser.add_argument('--passes', type=int, default=DEFAULT_PASSES,
                        help=f'forward passes F (default: {DEFAULT_PASSES})')
    parser.add_argument('--seed', type=int, default=0, help='random seed (default: 0)')
    parser.add_argument('--repeats', type=int, default=1, help='timing repeats, the fastest is kept (default: 1)')
    parser.set_defaults(handler=run)


def run(args, config):
    started_at = datetime.now(tz.tzlocal()).isoformat()
    rows, slopes = run_bench(args.sizes, args.passes, args.seed, max(1, args.repeats))
    with OutputSession(args.out) as session:
        session.write_text('bench.csv', bench_csv(rows))
        session.write_json('bench.json', {
            'started_at': started_at,
            'sizes': list(args.sizes),
            'passes': args.passes,
            'seed': args.seed,
            'repeats': args.repeats,
            'area_per_instance': AREA_PER_INSTANCE,
            'radius_range': [BENCH_R_MIN, BENCH_R_MAX],
            'slopes': slopes
        })
    summary = ', '.join(f'{method} slope {slope:.2f}' for method, slope in slopes.items())
    return {'success': True, 'message': f'{args.out}: {summary}'}
