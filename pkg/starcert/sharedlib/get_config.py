# Filename    : get_config.py
# Description : Line-oriented `section.key = value` configuration file and environment defaults

import logging
import os
import re

from starcert.errors import InvalidFlagError, MissingFileError

logger = logging.getLogger(__name__)

# Environment defaults
CONFIG_FILE = os.environ.get('STARCERT_CONFIG')
LOG_LEVEL = os.environ.get('STARCERT_LOG_LEVEL', 'INFO').upper()
try:
    THREADS = max(1, int(os.environ.get('STARCERT_THREADS', '1')))
except ValueError:
    THREADS = 1


def _to_bool(text):
    value = text.strip().lower()
    if value in ('1', 'true', 'yes', 'on'):
        return True
    if value in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f'not a boolean: {text!r}')


KNOWN_KEYS = {
    'cluster': {'method': str, 'theta_iou': float, 'theta_d': float, 'exact_iou': _to_bool},
    'nms': {'theta_prob': float, 'theta_nms': float},
    'calibration': {'theta_match': float, 'bins': int},
    'synth': {
        'width': int, 'height': int, 'instances': int, 'passes': int, 'n_rays': int,
        'r_min': float, 'r_max': float, 'smoothness': float, 'p_det': float,
        'sigma_radius': float, 'sigma_prob': float, 'sigma_member': float,
        'heterogeneous': _to_bool, 'faithful': _to_bool, 'sampling': str, 'seed': int
    }
}


def parse_starcert_config(config_file):
    """
    Parse a configuration file such as

        # comment
        cluster.theta_iou = 0.5
        calibration.bins = 10

    Returns:
        {section: {key: typed value}}; unknown keys are skipped with a warning
    """
    setting_pattern = re.compile(r'^(\w+)\.(\w+)\s*=\s*(.+?)\s*$')
    blank_pattern = re.compile(r'^\s*(#.*)?$')

    settings = {}

    if not os.path.exists(config_file):
        raise MissingFileError(f'configuration file not found: {config_file}', file=config_file)
    with open(config_file, 'r') as file:
        lines = file.readlines()

    for number, line in enumerate(lines, start=1):
        if blank_pattern.match(line):
            continue
        setting_match = setting_pattern.match(line.strip())
        if not setting_match:
            raise InvalidFlagError(f'{config_file}:{number}: expected "section.key = value"',
                                   file=config_file, line=number)
        section, key, value = setting_match.groups()
        kind = KNOWN_KEYS.get(section, {}).get(key)
        if kind is None:
            logger.warning(f'{config_file}:{number}: unknown setting {section}.{key} ignored')
            continue
        try:
            settings.setdefault(section, {})[key] = kind(value)
        except ValueError as e:
            raise InvalidFlagError(f'{config_file}:{number}: {section}.{key}: {str(e)}',
                                   file=config_file, line=number)

    logger.debug(f'Configuration {config_file}: {settings}')
    return settings


def load_config(config_file=None):
    """Settings from the given file, else from STARCERT_CONFIG, else none."""
    config_file = config_file or CONFIG_FILE
    if not config_file:
        return {}
    return parse_starcert_config(config_file)


def setting(flag_value, config, section, key, default):
    """Command-line flag > configuration file > built-in default."""
    if flag_value is not None:
        return flag_value
    return config.get(section, {}).get(key, default)
