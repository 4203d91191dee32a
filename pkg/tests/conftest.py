import logging
from pathlib import Path

import numpy as np
import pytest

from starcert.models import BitMask, Cluster, NoiseModel, RadialPolygon

FIXTURES = Path(__file__).parent / 'fixtures'


def circle(cx, cy, r, n=16):
    return RadialPolygon(cx, cy, np.full(n, float(r)))


def square_mask(x0, y0, size, width=32, height=32):
    bits = np.zeros((height, width), dtype=bool)
    bits[y0:y0 + size, x0:x0 + size] = True
    return BitMask.from_array(bits)


def mask_cluster(masks, cluster_id=1):
    return Cluster(cluster_id, [(f, m) for f, m in enumerate(masks, start=1)])


def polygon_cluster(polygons, cluster_id=1):
    return Cluster(cluster_id, [(f, p) for f, p in enumerate(polygons, start=1)])


@pytest.fixture
def four_pass_dir():
    return FIXTURES / 'four_pass'


@pytest.fixture
def noiseless():
    return NoiseModel()


@pytest.fixture(autouse=True)
def reset_cli_logging():
    yield
    logger = logging.getLogger('starcert')
    for handler in [h for h in logger.handlers if getattr(h, '_starcert', False)]:
        logger.removeHandler(handler)
