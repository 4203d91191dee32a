# Filename    : sweep.py
# Description : `starcert sweep-passes` - calibration error against the number of forward passes

import logging

import numpy as np

from starcert.commands import add_run_flags, int_list, run_config
from starcert.commands.synth import add_scene_flags, scene_and_noise
from starcert.errors import EmptyBinsError
from starcert.io_formats import sweep_csv
from starcert.models import SCORE_NAMES
from starcert.pipeline import synthetic_calibration
from starcert.sharedlib.outputs import OutputSession

logger = logging.getLogger(__name__)

DEFAULT_PASSES = (2, 5, 10, 20, 30, 40)
DEFAULT_SEEDS = tuple(range(10))
METRICS = ('pearson_r', 'ece', 'mce')
# the heterogeneous, faithful validation suite of the calibration acceptance runs
SWEEP_DEFAULTS = {'instances': 12, 'sigma_radius': 0.1, 'heterogeneous': True, 'faithful': True}


def summarize(values):
    """(mean, sample std, n); std is 0 for a single value and both are None without values."""
    if not values:
        return None, None, 0
    std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return float(np.mean(values)), std, len(values)


def sweep_passes(scene_spec, noise, passes=DEFAULT_PASSES, seeds=DEFAULT_SEEDS, images=1, score='c_hyb',
                 config=None, threads=1):
    """
    For every F and seed: generate the seed's validation set, cluster, match and
    calibrate; then aggregate each metric of `score` over the seeds.

    Returns:
        (rows with passes, metric, mean, std, n; {F: [per-seed {metric: value}]})
    """
    per_passes = {}
    rows = []
    for F in passes:
        results = []
        for seed in seeds:
            try:
                report = synthetic_calibration(scene_spec, noise, F, seed, images, config, threads)[score]
            except EmptyBinsError:
                logger.warning(f'F={F}, seed={seed}: no predictions to calibrate, seed skipped')
                continue
            results.append({'pearson_r': report.pearson_r, 'ece': report.ece, 'mce': report.mce})
        per_passes[F] = results
        for metric in METRICS:
            mean, std, n = summarize([r[metric] for r in results if r[metric] is not None])
            rows.append({'passes': F, 'metric': metric, 'mean': mean, 'std': std, 'n': n})
        logger.info(f'F={F}: {len(results)} seed(s) calibrated')
    return rows, per_passes


def register(subparsers):
    parser = subparsers.add_parser('sweep-passes', help='calibration error versus number of forward passes',
                                   description='Repeat generate/cluster/calibrate over seeds for several pass '
                                               'counts F and report mean and sample standard deviation of '
                                               'Pearson R, ECE and MCE per F. Scene defaults: 12 instances, '
                                               'heterogeneous p_det, sigma-radius 0.1, faithful ground truth.')
    parser.add_argument('--out', required=True, help='output directory for sweep.csv')
    parser.add_argument('--passes', type=int_list, default=list(DEFAULT_PASSES),
                        help='pass counts F (default: 2,5,10,20,30,40)')
    parser.add_argument('--seeds', type=int_list, default=list(DEFAULT_SEEDS), help='seeds (default: 0-9)')
    parser.add_argument('--images', type=int, default=1, help='images per seed (default: 1)')
    parser.add_argument('--score', choices=SCORE_NAMES, default='c_hyb', help='score to calibrate (default: c_hyb)')
    parser.add_argument('--homogeneous', action='store_true',
                        help='use a single --p-det for every instance instead of U[0.3, 1.0]')
    parser.add_argument('--unfaithful', action='store_true',
                        help='judge against every scene instance instead of the faithful ground truth')
    add_scene_flags(parser, SWEEP_DEFAULTS)
    add_run_flags(parser)
    parser.set_defaults(handler=run)


def sweep_scene(args, config):
    if args.homogeneous:
        args.heterogeneous = False
    if args.unfaithful:
        args.faithful = False
    return scene_and_noise(args, config, SWEEP_DEFAULTS)


def run(args, config):
    spec, noise = sweep_scene(args, config)
    options = run_config(args, config, spec.n_rays)
    rows, _ = sweep_passes(spec, noise, args.passes, args.seeds, max(1, args.images), args.score, options,
                           options.threads)
    with OutputSession(args.out) as session:
        session.write_text('sweep.csv', sweep_csv(rows))
    return {'success': True, 'message': f'{args.out}: {len(rows)} row(s) for {len(args.passes)} pass count(s) '
                                        f'x {len(args.seeds)} seed(s)'}
