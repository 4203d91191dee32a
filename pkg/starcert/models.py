# Filename    : models.py
# Description : Domain records shared by every starcert module

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from scipy import ndimage

from starcert.errors import InvalidFlagError, ValidationError

METHODS = ('pixel', 'radial')
MODES = ('dense', 'instances')
SAMPLING = ('dropout', 'ensemble')
SCORE_NAMES = ('c_spl', 'c_frac', 'c_hyb')


def require_open_unit(name, value, error=ValidationError):
    """Raise unless 0 < value < 1."""
    if not (isinstance(value, (int, float)) and 0.0 < float(value) < 1.0):
        raise error(f'{name} must lie in (0, 1), got {value!r}', parameter=name)
    return float(value)


# ===== Geometry =====

@dataclass(frozen=True)
class RayConfig:
    """n equidistant ray directions; angle i is 2*pi*i/n, starting along +x (y grows downward)."""
    n: int = 16

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 3:
            raise ValidationError(f'RayConfig.n must be an integer >= 3, got {self.n!r}')
        object.__setattr__(self, 'n', int(self.n))

    @property
    def angles(self):
        return 2.0 * np.pi * np.arange(self.n) / self.n

    @property
    def directions(self):
        angles = self.angles
        return np.stack([np.cos(angles), np.sin(angles)], axis=1)


@dataclass(frozen=True, eq=False)
class RadialPolygon:
    """Star-convex polygon: a center plus one positive radius per ray."""
    cx: float
    cy: float
    radii: np.ndarray

    def __post_init__(self):
        radii = np.array(self.radii, dtype=np.float64)
        if radii.ndim != 1 or radii.size < 3:
            raise ValidationError(f'radii must be a flat sequence of at least 3 values, got shape {radii.shape}')
        if not np.all(np.isfinite(radii)) or np.any(radii <= 0):
            bad = int(np.flatnonzero(~np.isfinite(radii) | (radii <= 0))[0])
            raise ValidationError(f'radius {bad} must be finite and > 0, got {radii[bad]!r}', ray=bad)
        if not (math.isfinite(self.cx) and math.isfinite(self.cy)):
            raise ValidationError(f'center must be finite, got ({self.cx!r}, {self.cy!r})')
        radii.setflags(write=False)
        object.__setattr__(self, 'radii', radii)
        object.__setattr__(self, 'cx', float(self.cx))
        object.__setattr__(self, 'cy', float(self.cy))

    @property
    def n_rays(self):
        return int(self.radii.size)

    @property
    def rays(self):
        return RayConfig(self.n_rays)

    @property
    def center(self):
        return (self.cx, self.cy)

    def with_radii(self, radii):
        return RadialPolygon(self.cx, self.cy, radii)

    def same_as(self, other):
        return (self.cx == other.cx and self.cy == other.cy
                and np.array_equal(self.radii, other.radii))

    def to_dict(self):
        return {'cx': self.cx, 'cy': self.cy, 'radii': [float(r) for r in self.radii]}

    @classmethod
    def from_dict(cls, data):
        return cls(data['cx'], data['cy'], data['radii'])


@dataclass(frozen=True, eq=False)
class BitMask:
    """
    Binary instance mask over a width x height image.

    Only the window starting at (x0, y0) with the shape of `crop` is stored;
    everything outside it is background.
    """
    width: int
    height: int
    x0: int = 0
    y0: int = 0
    crop: Optional[np.ndarray] = None
    count: int = field(init=False)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(f'mask dimensions must be positive, got {self.width}x{self.height}')
        crop = np.zeros((0, 0), dtype=bool) if self.crop is None else np.asarray(self.crop, dtype=bool)
        if crop.ndim != 2:
            raise ValidationError(f'mask window must be 2-D, got shape {crop.shape}')
        h, w = crop.shape
        if h and w and (self.x0 < 0 or self.y0 < 0 or self.x0 + w > self.width or self.y0 + h > self.height):
            raise ValidationError(f'mask window ({self.x0},{self.y0})+{w}x{h} exceeds {self.width}x{self.height}')
        crop.setflags(write=False)
        object.__setattr__(self, 'crop', crop)
        object.__setattr__(self, 'count', int(np.count_nonzero(crop)))

    @classmethod
    def from_array(cls, bits):
        """Build a mask from a full (height, width) boolean array, trimmed to its bounding box."""
        bits = np.asarray(bits, dtype=bool)
        height, width = bits.shape
        rows = np.flatnonzero(bits.any(axis=1))
        if rows.size == 0:
            return cls(width, height)
        cols = np.flatnonzero(bits.any(axis=0))
        y0, y1 = int(rows[0]), int(rows[-1]) + 1
        x0, x1 = int(cols[0]), int(cols[-1]) + 1
        return cls(width, height, x0, y0, bits[y0:y1, x0:x1].copy())

    @property
    def dims(self):
        return (self.width, self.height)

    @property
    def is_empty(self):
        return self.count == 0

    @property
    def bbox(self):
        """(x0, y0, x1, y1) with exclusive upper bounds, or None for an empty mask."""
        if self.is_empty:
            return None
        h, w = self.crop.shape
        return (self.x0, self.y0, self.x0 + w, self.y0 + h)

    @property
    def bits(self):
        full = np.zeros((self.height, self.width), dtype=bool)
        if self.crop.size:
            h, w = self.crop.shape
            full[self.y0:self.y0 + h, self.x0:self.x0 + w] = self.crop
        return full

    def window(self, x0, y0, x1, y1):
        """Boolean array for the window [x0, x1) x [y0, y1), zero outside the stored crop."""
        out = np.zeros((y1 - y0, x1 - x0), dtype=bool)
        if not self.crop.size:
            return out
        h, w = self.crop.shape
        ix0, iy0 = max(x0, self.x0), max(y0, self.y0)
        ix1, iy1 = min(x1, self.x0 + w), min(y1, self.y0 + h)
        if ix0 < ix1 and iy0 < iy1:
            out[iy0 - y0:iy1 - y0, ix0 - x0:ix1 - x0] = \
                self.crop[iy0 - self.y0:iy1 - self.y0, ix0 - self.x0:ix1 - self.x0]
        return out

    def same_as(self, other):
        return self.dims == other.dims and np.array_equal(self.bits, other.bits)


@dataclass(frozen=True, eq=False)
class LabelMask:
    """Instance label image: 0 is background, k > 0 is instance k."""
    width: int
    height: int
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(f'label mask dimensions must be positive, got {self.width}x{self.height}')
        if labels.shape != (self.height, self.width):
            raise ValidationError(f'label array shape {labels.shape} does not match {self.width}x{self.height}')
        if labels.size and labels.min() < 0:
            raise ValidationError('labels must be non-negative')
        object.__setattr__(self, 'labels', labels.astype(np.uint16, copy=False))

    @classmethod
    def empty(cls, width, height):
        return cls(width, height, np.zeros((height, width), dtype=np.uint16))

    def instance_ids(self):
        return [int(v) for v in np.unique(self.labels) if v > 0]

    def split(self):
        """Map of label id to that instance's BitMask, in ascending label order."""
        out = {}
        for index, slices in enumerate(ndimage.find_objects(self.labels), start=1):
            if slices is None:
                continue
            ys, xs = slices
            out[index] = BitMask(self.width, self.height, xs.start, ys.start,
                                 self.labels[ys, xs] == index)
        return out


Prediction = Union[RadialPolygon, BitMask]


# ===== Sample sets =====

@dataclass(frozen=True, eq=False)
class DenseOutput:
    """Per-pixel object probability (H, W) and radial distances (H, W, n) of one forward pass."""
    prob: np.ndarray
    radial: np.ndarray

    # pass outputs are float32 on disk
    dtype = np.float32

    def __post_init__(self):
        prob = np.asarray(self.prob, dtype=self.dtype)
        radial = np.asarray(self.radial, dtype=self.dtype)
        if prob.ndim != 2 or radial.ndim != 3 or radial.shape[:2] != prob.shape:
            raise ValidationError(f'dense shapes disagree: prob {prob.shape}, radial {radial.shape}')
        if radial.shape[2] < 3:
            raise ValidationError(f'dense output needs at least 3 rays, got {radial.shape[2]}')
        object.__setattr__(self, 'prob', prob)
        object.__setattr__(self, 'radial', radial)

    @property
    def height(self):
        return int(self.prob.shape[0])

    @property
    def width(self):
        return int(self.prob.shape[1])

    @property
    def n_rays(self):
        return int(self.radial.shape[2])

    @property
    def dims(self):
        return (self.width, self.height)

    def polygon_at(self, x, y):
        """Polygon stored at pixel (x, y), centered on the pixel center."""
        return RadialPolygon(x + 0.5, y + 0.5, self.radial[y, x].astype(np.float64))


@dataclass(frozen=True, eq=False)
class MeanDense(DenseOutput):
    """Elementwise mean of F dense outputs."""
    samples: int = 1

    dtype = np.float64


@dataclass
class PredictionSet:
    """Instances predicted by one forward pass (pass ids start at 1)."""
    pass_id: int
    predictions: List[Prediction] = field(default_factory=list)

    def __len__(self):
        return len(self.predictions)


@dataclass(frozen=True)
class Manifest:
    version: int
    mode: str
    width: int
    height: int
    n_rays: int
    passes: int
    files: Tuple[Path, ...]
    ground_truth: Optional[Path] = None
    name: Optional[str] = None
    sampling: str = 'dropout'
    path: Optional[Path] = None

    @property
    def rays(self):
        return RayConfig(self.n_rays)


# ===== Decoding and clustering =====

@dataclass(frozen=True, eq=False)
class Candidate:
    x: int
    y: int
    prob: float
    polygon: RadialPolygon


@dataclass
class Cluster:
    """Predictions from different passes grouped as one physical instance."""
    id: int
    members: List[Tuple[int, Prediction]] = field(default_factory=list)
    center: Optional[Tuple[int, int]] = None

    @property
    def size(self):
        return len(self.members)

    @property
    def pass_ids(self):
        return [pass_id for pass_id, _ in self.members]

    @property
    def predictions(self):
        return [prediction for _, prediction in self.members]

    def has_pass(self, pass_id):
        return any(p == pass_id for p, _ in self.members)


@dataclass
class CenterSet:
    centers: List[Tuple[int, int]] = field(default_factory=list)
    polygons: List[RadialPolygon] = field(default_factory=list)
    probs: List[float] = field(default_factory=list)

    def __len__(self):
        return len(self.centers)

    def __iter__(self):
        return iter(zip(self.centers, self.polygons))


# ===== Certainty =====

@dataclass(frozen=True)
class CertaintyScores:
    c_spl: float
    c_frac: float
    c_hyb: float

    @classmethod
    def combine(cls, c_spl, c_frac):
        return cls(float(c_spl), float(c_frac), float(c_spl) * float(c_frac))

    def get(self, name):
        return getattr(self, name)

    def to_dict(self):
        return {'c_spl': self.c_spl, 'c_frac': self.c_frac, 'c_hyb': self.c_hyb}


@dataclass(frozen=True, eq=False)
class UncertaintyBand:
    """Inner/outer polygons at the lower/upper radial percentile."""
    inner: RadialPolygon
    outer: RadialPolygon
    lo: float = 2.5
    hi: float = 97.5


@dataclass(frozen=True, eq=False)
class PixelStats:
    """
    Per-pixel mean/std of binary membership over a window whose top-left pixel is
    (x0, y0), plus the inner/outer iso-contours of the mean in image coordinates.
    """
    mean: np.ndarray
    std: np.ndarray
    inner: List[np.ndarray]
    outer: List[np.ndarray]
    x0: int = 0
    y0: int = 0


# ===== Calibration =====

@dataclass(frozen=True)
class ReliabilityBin:
    lo: float
    hi: float
    count: int
    mean_confidence: Optional[float]
    accuracy: Optional[float]

    def to_dict(self):
        return {'lo': self.lo, 'hi': self.hi, 'count': self.count,
                'mean_confidence': self.mean_confidence, 'accuracy': self.accuracy}


@dataclass(frozen=True)
class CalibrationReport:
    score: str
    bins: List[ReliabilityBin]
    pearson_r: Optional[float]
    ece: float
    mce: float
    matched: int
    false_positives: int
    false_negatives: int

    def to_dict(self):
        return {
            'score': self.score,
            'pearson_r': self.pearson_r,
            'ece': self.ece,
            'mce': self.mce,
            'matched': self.matched,
            'false_positives': self.false_positives,
            'false_negatives': self.false_negatives,
            'bins': [b.to_dict() for b in self.bins]
        }


# ===== Synthetic data =====

@dataclass(frozen=True, eq=False)
class SyntheticScene:
    width: int
    height: int
    gt_polygons: List[RadialPolygon]
    gt_mask: LabelMask
    seed: int
    rays: RayConfig = RayConfig()


@dataclass(frozen=True)
class SceneSpec:
    """Parameters of generate_scene; smoothness 1.0 gives circles, 0.0 the roughest outlines."""
    width: int = 128
    height: int = 128
    instances: int = 8
    n_rays: int = 16
    r_min: float = 4.0
    r_max: float = 10.0
    smoothness: float = 0.5

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(f'scene dimensions must be positive, got {self.width}x{self.height}')
        if self.instances < 0:
            raise ValidationError(f'instance count must be >= 0, got {self.instances}')
        if not 0 < self.r_min <= self.r_max:
            raise ValidationError(f'radii must satisfy 0 < r_min <= r_max, got {self.r_min}, {self.r_max}')
        if not 0.0 <= self.smoothness <= 1.0:
            raise ValidationError(f'smoothness must lie in [0, 1], got {self.smoothness}')

    @property
    def rays(self):
        return RayConfig(self.n_rays)


@dataclass(frozen=True)
class NoiseModel:
    """
    Sample variability of the simulated forward passes.

    p_det         per-instance detection probability per pass
    sigma_radius  stddev of the per-ray log scale factor
    sigma_prob    stddev of additive noise on the probability field
    heterogeneous draw p_det per instance from U[0.3, 1.0] instead
    sampling      'dropout' (independent passes) or 'ensemble' (persistent member bias)
    sigma_member  stddev of the ensemble member log scale (defaults to sigma_radius)
    faithful      instances are real with probability p_det * expected spatial agreement
    """
    p_det: float = 1.0
    sigma_radius: float = 0.0
    sigma_prob: float = 0.0
    heterogeneous: bool = False
    sampling: str = 'dropout'
    sigma_member: Optional[float] = None
    faithful: bool = False

    def __post_init__(self):
        if not 0.0 <= self.p_det <= 1.0:
            raise ValidationError(f'p_det must lie in [0, 1], got {self.p_det}')
        if self.sigma_radius < 0 or self.sigma_prob < 0:
            raise ValidationError('noise standard deviations must be >= 0')
        if self.sigma_member is not None and self.sigma_member < 0:
            raise ValidationError('sigma_member must be >= 0')
        if self.sampling not in SAMPLING:
            raise ValidationError(f'sampling must be one of {SAMPLING}, got {self.sampling!r}')

    @property
    def member_sigma(self):
        return self.sigma_radius if self.sigma_member is None else self.sigma_member


# ===== Command line =====

@dataclass(frozen=True)
class RunConfig:
    method: str = 'radial'
    theta_iou: float = 0.5
    theta_d: float = 0.5
    theta_prob: float = 0.5
    theta_nms: float = 0.5
    theta_match: float = 0.5
    bins: int = 10
    exact_iou: bool = False
    n_rays: int = 16
    threads: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidFlagError(f'method must be one of {METHODS}, got {self.method!r}')
        for name in ('theta_iou', 'theta_d', 'theta_prob', 'theta_nms', 'theta_match'):
            require_open_unit(name, getattr(self, name), InvalidFlagError)
        if int(self.bins) != self.bins or self.bins < 2:
            raise InvalidFlagError(f'bins must be an integer >= 2, got {self.bins!r}')
        if self.n_rays < 3:
            raise InvalidFlagError(f'n_rays must be >= 3, got {self.n_rays}')
        if self.threads < 1:
            raise InvalidFlagError(f'threads must be >= 1, got {self.threads}')

    def thresholds(self) -> Dict[str, float]:
        return {
            'theta_iou': self.theta_iou,
            'theta_d': self.theta_d,
            'theta_prob': self.theta_prob,
            'theta_nms': self.theta_nms,
            'theta_match': self.theta_match
        }


# ===== Reports =====

@dataclass
class ScoredCluster:
    """A cluster with its representative prediction, uncertainty band and scores."""
    cluster: Cluster
    median: Prediction
    scores: CertaintyScores
    band: Optional[Union[UncertaintyBand, PixelStats]] = None


@dataclass
class ReportEntry:
    id: int
    size: int
    pass_ids: List[int]
    center: Optional[Tuple[int, int]]
    median: Prediction
    scores: CertaintyScores
    band: Optional[dict] = None


@dataclass
class Report:
    metadata: dict
    entries: List[ReportEntry]
    calibration: Optional[dict] = None
    diagnostics: Optional[dict] = None
