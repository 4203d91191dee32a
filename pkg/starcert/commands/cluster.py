# Filename    : cluster.py
# Description : `starcert cluster` - cluster a sample set, score every cluster, write report.json

import logging
from pathlib import Path

from starcert import __version__
from starcert.commands import add_run_flags, run_config
from starcert.io_formats import load_ground_truth, read_manifest, write_report
from starcert.pipeline import load_samples, match_and_score, pool_calibration, score_sample_set
from starcert.sharedlib.outputs import OutputSession

logger = logging.getLogger(__name__)

REPORT_NAME = 'report.json'


def register(subparsers):
    parser = subparsers.add_parser('cluster', help='cluster a sample set and score each instance',
                                   description='Group the predictions of F forward passes into instances with '
                                               'the pixel (BSAS) or radial approach and compute spatial, '
                                               'fractional and hybrid certainty. A calibration section is added '
                                               'when the manifest names a ground truth.')
    parser.add_argument('samples', help='sample-set directory or manifest file')
    parser.add_argument('--out', required=True, help=f'output directory for {REPORT_NAME}')
    add_run_flags(parser)
    parser.set_defaults(handler=run)


def run(args, config):
    manifest = read_manifest(args.samples)
    options = run_config(args, config, manifest.n_rays)
    samples = load_samples(manifest, options.threads)
    scored_clusters, diagnostics = score_sample_set(samples, options, manifest.width, manifest.height,
                                                    manifest.passes)

    calibration = None
    gt = load_ground_truth(manifest)
    if gt is not None and scored_clusters:
        scored, false_negatives = match_and_score(scored_clusters, gt, options.theta_match)
        calibration = pool_calibration([scored], false_negatives, options.bins)
    elif gt is not None:
        logger.warning(f'{manifest.path}: no clusters, calibration section skipped')

    metadata = {
        'starcert': __version__,
        'manifest': str(Path(manifest.path).resolve()),
        'name': manifest.name,
        'mode': manifest.mode,
        'sampling': manifest.sampling,
        'method': options.method,
        'width': manifest.width,
        'height': manifest.height,
        'n_rays': manifest.n_rays,
        'passes': manifest.passes,
        'exact_iou': options.exact_iou,
        'bins': options.bins,
        'thresholds': options.thresholds()
    }
    with OutputSession(args.out) as session:
        write_report(REPORT_NAME, [s.cluster for s in scored_clusters], [s.scores for s in scored_clusters],
                     calibration, medians=[s.median for s in scored_clusters],
                     bands=[s.band for s in scored_clusters], metadata=metadata,
                     diagnostics=diagnostics, session=session)

    message = f'{session.path(REPORT_NAME)}: {len(scored_clusters)} cluster(s) over {manifest.passes} pass(es)'
    if calibration:
        message += f", ECE(c_hyb)={calibration['c_hyb'].ece:.4f}"
    return {'success': True, 'message': message}
