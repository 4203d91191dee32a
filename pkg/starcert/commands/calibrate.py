# Filename    : calibrate.py
# Description : `starcert calibrate` - reliability diagrams, Pearson R, ECE and MCE of one or more reports

import logging
from pathlib import Path

from starcert.calibration import match_predictions
from starcert.commands import add_threshold_flags, run_config
from starcert.commands.cluster import REPORT_NAME
from starcert.errors import InvalidFlagError, MissingGroundTruthError
from starcert.figures import overlay_figure, reliability_figure
from starcert.io_formats import (load_ground_truth, load_label_mask, read_manifest, read_report,
                                 write_reliability_csv)
from starcert.models import SCORE_NAMES
from starcert.pipeline import pool_calibration
from starcert.sharedlib.jinja2 import make_slug
from starcert.sharedlib.outputs import OutputSession

logger = logging.getLogger(__name__)

CALIBRATION_NAME = 'calibration.json'


def register(subparsers):
    parser = subparsers.add_parser('calibrate', help='calibration of the certainty scores against ground truth',
                                   description='Match every cluster median of the given reports to the ground '
                                               'truth, pool the scored predictions and write, per score, a '
                                               'reliability CSV and SVG with Pearson R, ECE and MCE, plus one '
                                               'overlay SVG per report.')
    parser.add_argument('reports', nargs='+', help=f'{REPORT_NAME} files or directories holding one')
    parser.add_argument('--out', required=True, help='output directory')
    parser.add_argument('--ground-truth', dest='ground_truth', default=None,
                        help='label mask to use instead of the one named by the report\'s manifest '
                             '(single report only)')
    parser.add_argument('--bins', type=int, default=None, help='reliability diagram bins B (default: 10)')
    add_threshold_flags(parser, 'theta_match')
    parser.set_defaults(handler=run)


def _report_path(path):
    path = Path(path)
    return path / REPORT_NAME if path.is_dir() else path


def _ground_truth(report, path, override):
    width, height = report.metadata.get('width'), report.metadata.get('height')
    if override is not None:
        return load_label_mask(override, width, height)
    manifest_path = report.metadata.get('manifest')
    gt = load_ground_truth(read_manifest(manifest_path)) if manifest_path else None
    if gt is None:
        raise MissingGroundTruthError(f'{path}: no ground truth available (pass --ground-truth)', file=path)
    return gt


def _overlay_name(report, path, taken):
    slug = make_slug(report.metadata.get('name') or path.parent.name or 'image') or 'image'
    name, suffix = f'overlay-{slug}.svg', 2
    while name in taken:
        name, suffix = f'overlay-{slug}-{suffix}.svg', suffix + 1
    taken.add(name)
    return name


def run(args, config):
    if args.ground_truth and len(args.reports) > 1:
        raise InvalidFlagError('--ground-truth applies to a single report only')
    options = run_config(args, config)

    scored_lists, false_negatives, overlays = [], 0, []
    taken = set()
    for given in args.reports:
        path = _report_path(given)
        report = read_report(path)
        gt = _ground_truth(report, path, args.ground_truth)
        predictions = [(entry.median, entry.scores.c_hyb) for entry in report.entries]
        flags, missed = match_predictions(predictions, gt, options.theta_match)
        scored_lists.append({name: [(entry.scores.get(name), tp) for entry, (_, tp) in zip(report.entries, flags)]
                             for name in SCORE_NAMES})
        false_negatives += missed
        title = report.metadata.get('name') or str(path)
        overlays.append((_overlay_name(report, path, taken),
                         overlay_figure(report.entries, [tp for _, tp in flags], gt.width, gt.height, gt, title)))
        logger.info(f'{path}: {len(report.entries)} prediction(s), {sum(tp for _, tp in flags)} matched, '
                    f'{missed} missed')

    reports = pool_calibration(scored_lists, false_negatives, options.bins)
    with OutputSession(args.out) as session:
        session.write_json(CALIBRATION_NAME, {
            'reports': [str(_report_path(r)) for r in args.reports],
            'bins': options.bins,
            'theta_match': options.theta_match,
            'scores': {name: report.to_dict() for name, report in reports.items()}
        })
        for name, report in reports.items():
            write_reliability_csv(session, f'reliability_{name}.csv', report.bins)
            session.write_text(f'reliability_{name}.svg', reliability_figure(report, name))
        for filename, svg in overlays:
            session.write_text(filename, svg)

    summary = ', '.join(f'{name}: ECE={r.ece:.4f} MCE={r.mce:.4f}' for name, r in reports.items())
    return {'success': True, 'message': f'{args.out}: {summary}'}
