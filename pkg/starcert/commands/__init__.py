# Filename    : __init__.py
# Description : Flags and helpers shared by the subcommands

import argparse
import re

from starcert.models import RunConfig
from starcert.sharedlib.get_config import THREADS, setting

# RunConfig field -> (config section, default, help)
THRESHOLDS = {
    'theta_iou': ('cluster', 0.5, 'BSAS admission IoU threshold (default: 0.5)'),
    'theta_d': ('cluster', 0.5, 'radial assignment probability threshold (default: 0.5)'),
    'theta_prob': ('nms', 0.5, 'minimum object probability of an NMS candidate (default: 0.5)'),
    'theta_nms': ('nms', 0.5, 'NMS suppression IoU threshold (default: 0.5)'),
    'theta_match': ('calibration', 0.5, 'IoU needed to match a ground-truth instance (default: 0.5)')
}
DEFAULT_BINS = 10
DEFAULT_RAYS = 16


def int_list(text):
    """'2,5,10' or '0-9' (inclusive) or a mix of both."""
    values = []
    for part in filter(None, (p.strip() for p in text.split(','))):
        span = re.match(r'^(\d+)-(\d+)$', part)
        if span:
            lo, hi = int(span.group(1)), int(span.group(2))
            if hi < lo:
                raise argparse.ArgumentTypeError(f'empty range {part!r}')
            values.extend(range(lo, hi + 1))
        elif re.match(r'^\d+$', part):
            values.append(int(part))
        else:
            raise argparse.ArgumentTypeError(f'not an integer list: {text!r}')
    if not values:
        raise argparse.ArgumentTypeError('empty list')
    return values


def add_threshold_flags(parser, *names):
    for name in names:
        _, _, text = THRESHOLDS[name]
        parser.add_argument(f'--{name.replace("_", "-")}', dest=name, type=float, default=None, help=text)


def add_run_flags(parser, method=True):
    if method:
        parser.add_argument('--method', choices=('pixel', 'radial'), default=None,
                            help='clustering approach (default: radial)')
    add_threshold_flags(parser, *THRESHOLDS)
    parser.add_argument('--bins', type=int, default=None,
                        help=f'reliability diagram bins B (default: {DEFAULT_BINS})')
    parser.add_argument('--exact-iou', dest='exact_iou', action='store_true', default=None,
                        help='rasterize for every IoU instead of the radial shortcut / pruned sweeps')
    parser.add_argument('--threads', type=int, default=None,
                        help='worker threads (default: STARCERT_THREADS or 1)')


def run_config(args, config, n_rays=DEFAULT_RAYS):
    """RunConfig from flags, then the configuration file, then built-in defaults."""
    values = {name: setting(getattr(args, name, None), config, section, name, default)
              for name, (section, default, _) in THRESHOLDS.items()}
    return RunConfig(
        method=setting(getattr(args, 'method', None), config, 'cluster', 'method', 'radial'),
        bins=setting(getattr(args, 'bins', None), config, 'calibration', 'bins', DEFAULT_BINS),
        exact_iou=bool(setting(getattr(args, 'exact_iou', None), config, 'cluster', 'exact_iou', False)),
        n_rays=n_rays,
        threads=THREADS if getattr(args, 'threads', None) is None else args.threads,
        **values
    )
