# Filename    : runcli.py
# Description : starcert command line - uncertainty estimation for star-convex instance segmentation

import argparse
import json
import logging
import sys

from starcert import __version__
from starcert.commands import bench, calibrate, cluster, sweep, synth
from starcert.errors import StarcertError
from starcert.sharedlib.get_config import LOG_LEVEL, load_config

logger = logging.getLogger('starcert')

COMMANDS = (synth, cluster, calibrate, bench, sweep)


def build_parser():
    parser = argparse.ArgumentParser(
        prog='starcert',
        description='Cluster the predictions of repeated stochastic forward passes of a star-convex '
                    'instance segmentation model, score every instance with spatial, fractional and '
                    'hybrid certainty and measure how well the scores are calibrated.')
    parser.add_argument('--version', action='version', version=f'starcert {__version__}')
    parser.add_argument('-v', '--verbose', action='store_true', help='debug logging')
    parser.add_argument('--config', default=None,
                        help='configuration file of "section.key = value" lines (default: STARCERT_CONFIG)')
    subparsers = parser.add_subparsers(dest='command', metavar='command')
    subparsers.required = True
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def setup_logging(verbose=False):
    logger.setLevel(logging.DEBUG if verbose else getattr(logging, LOG_LEVEL, logging.INFO))
    if not any(getattr(h, '_starcert', False) for h in logger.handlers):
        stream_handler = logging.StreamHandler()
        stream_handler.setFormatter(logging.Formatter('%(asctime)s %(levelname)s %(name)s: %(message)s'))
        stream_handler._starcert = True
        logger.addHandler(stream_handler)


def main(argv=None):
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    try:
        config = load_config(args.config)
        result = args.handler(args, config)
    except StarcertError as e:
        logger.error(f'{args.command} failed: {e.message}')
        print(json.dumps(e.to_dict()), file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.error(f'{args.command} failed: {str(e)}', exc_info=True)
        print(json.dumps({'success': False, 'error': 'internal_error', 'message': str(e)}), file=sys.stderr)
        return 1
    print(result['message'])
    return 0


if __name__ == '__main__':
    sys.exit(main())
