# Filename    : synth.py
# Description : `starcert synth` - write a synthetic sample set with ground truth

import logging

from starcert.models import NoiseModel, SceneSpec
from starcert.sharedlib.get_config import THREADS, setting
from starcert.sharedlib.outputs import OutputSession
from starcert.synth import realize_ground_truth, scene_from_spec, simulate_passes, write_sample_set

logger = logging.getLogger(__name__)

SCENE_FLAGS = {
    'width': (int, 128, 'image width in pixels'),
    'height': (int, 128, 'image height in pixels'),
    'instances': (int, 8, 'number of ground-truth instances M'),
    'n_rays': (int, 16, 'rays per polygon n'),
    'r_min': (float, 4.0, 'smallest radius'),
    'r_max': (float, 10.0, 'largest radius'),
    'smoothness': (float, 0.5, 'outline smoothness in [0, 1], 1 gives circles')
}
NOISE_FLAGS = {
    'p_det': (float, 1.0, 'per-pass detection probability'),
    'sigma_radius': (float, 0.0, 'stddev of the per-ray log radius factor'),
    'sigma_prob': (float, 0.0, 'stddev of additive probability-field noise'),
    'sigma_member': (float, None, 'stddev of the ensemble member log scale (default: --sigma-radius)')
}


def add_scene_flags(parser, defaults=None):
    defaults = defaults or {}
    for name, (kind, default, text) in {**SCENE_FLAGS, **NOISE_FLAGS}.items():
        default = defaults.get(name, default)
        flag = '--rays' if name == 'n_rays' else f'--{name.replace("_", "-")}'
        suffix = f' (default: {default})' if default is not None and 'default' not in text else ''
        parser.add_argument(flag, dest=name, type=kind, default=None, help=text + suffix)
    parser.add_argument('--heterogeneous', action='store_true', default=None,
                        help='draw p_det per instance from U[0.3, 1.0]')
    parser.add_argument('--faithful', action='store_true', default=None,
                        help='keep an instance in the ground truth with probability p_det times its spatial agreement')
    parser.add_argument('--sampling', choices=('dropout', 'ensemble'), default=None,
                        help='emulated sampling technique (default: dropout)')


def scene_and_noise(args, config, defaults=None):
    """SceneSpec and NoiseModel from flags, then the synth section of the configuration, then defaults."""
    defaults = defaults or {}

    def value(name, default):
        return setting(getattr(args, name, None), config, 'synth', name, defaults.get(name, default))

    spec = SceneSpec(**{name: value(name, default) for name, (_, default, _) in SCENE_FLAGS.items()})
    noise = NoiseModel(
        p_det=value('p_det', 1.0),
        sigma_radius=value('sigma_radius', 0.0),
        sigma_prob=value('sigma_prob', 0.0),
        sigma_member=value('sigma_member', None),
        heterogeneous=bool(value('heterogeneous', False)),
        faithful=bool(value('faithful', False)),
        sampling=value('sampling', 'dropout')
    )
    return spec, noise


def register(subparsers):
    parser = subparsers.add_parser('synth', help='generate a synthetic sample set',
                                   description='Generate a ground-truth scene and F simulated forward passes. '
                                               'Writes a dense manifest, an instance manifest under instances/ '
                                               'and the ground-truth label mask.')
    parser.add_argument('--out', required=True, help='output directory')
    parser.add_argument('--passes', type=int, default=None, help='forward passes F (default: 20)')
    parser.add_argument('--seed', type=int, default=None, help='random seed (default: 0)')
    parser.add_argument('--name', default=None, help='image name recorded in the manifests')
    add_scene_flags(parser)
    parser.add_argument('--threads', type=int, default=None,
                        help='worker threads (default: STARCERT_THREADS or 1)')
    parser.set_defaults(handler=run)


def run(args, config):
    spec, noise = scene_and_noise(args, config)
    passes = setting(args.passes, config, 'synth', 'passes', 20)
    seed = setting(args.seed, config, 'synth', 'seed', 0)
    threads = THREADS if args.threads is None else args.threads

    scene = scene_from_spec(spec, seed)
    dense, instance_sets = simulate_passes(scene, passes, noise, seed, threads)
    gt = realize_ground_truth(scene, noise, seed)
    with OutputSession(args.out) as session:
        write_sample_set(session, scene, dense, instance_sets, gt, args.name, noise.sampling)

    predictions = sum(len(s) for s in instance_sets)
    return {
        'success': True,
        'message': f'{args.out}: {spec.instances} instance(s), {passes} pass(es), {spec.width}x{spec.height}, '
                   f'n={spec.n_rays}, {predictions} prediction(s)'
    }
