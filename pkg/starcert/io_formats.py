# Filename    : io_formats.py
# Description : On-disk formats for sample sets, ground truth and reports
#
# Binary arrays are raw little-endian, row-major, uncompressed:
#   *.probs.bin   float32, width*height values
#   *.radial.bin  float32, width*height*n values, offset (y*width + x)*n + i
#   *.labels.bin  uint16,  width*height values, 0 = background
# Instance polygons are CSV files with header pass,cx,cy,r0,...,r{n-1}.

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from starcert.errors import (InvalidManifestError, InvalidSampleError, MalformedJSONError,
                             MissingFileError, SizeMismatchError, UnsupportedVersionError,
                             ValidationError)
from starcert.models import (MODES, SAMPLING, BitMask, CertaintyScores, DenseOutput,
                             LabelMask, Manifest, PixelStats, PredictionSet, RadialPolygon,
                             Report, ReportEntry, UncertaintyBand)
from starcert.sharedlib.outputs import read_json_locked, write_json_atomic

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1
REPORT_VERSION = 1
MANIFEST_NAME = 'manifest.json'
RELIABILITY_HEADER = ['bin_lo', 'bin_hi', 'count', 'mean_confidence', 'accuracy']

F32 = np.dtype('<f4')
U16 = np.dtype('<u2')


def _fmt(value):
    # repr() of a Python float round-trips exactly
    return repr(float(value))


# ===== Manifest =====

def _require(data, key, kind, path):
    if key not in data:
        raise InvalidManifestError(f'{path}: missing required field "{key}"', file=path)
    value = data[key]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise InvalidManifestError(f'{path}: field "{key}" must be an integer, got {value!r}', file=path)
    if kind is str and not isinstance(value, str):
        raise InvalidManifestError(f'{path}: field "{key}" must be a string, got {value!r}', file=path)
    return value


def _check_size(filepath, expected):
    if not filepath.exists():
        raise MissingFileError(f'referenced file not found: {filepath}', file=filepath)
    actual = filepath.stat().st_size
    if actual != expected:
        raise SizeMismatchError(f'size mismatch in {filepath}: expected {expected} bytes, found {actual}',
                                file=filepath)


def read_manifest(path):
    """
    Parse and validate a sample-set manifest

    Args:
        path: manifest file, or a directory holding manifest.json

    Returns:
        Manifest with every file reference resolved against the manifest directory
    """
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.exists():
        raise MissingFileError(f'manifest not found: {path}', file=path)
    try:
        data = read_json_locked(path)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise MalformedJSONError(f'{path}: malformed JSON: {str(e)}', file=path)
    if not isinstance(data, dict):
        raise MalformedJSONError(f'{path}: top level must be a JSON object', file=path)

    version = _require(data, 'version', int, path)
    if version != MANIFEST_VERSION:
        raise UnsupportedVersionError(f'{path}: unsupported manifest version {version}', file=path)
    mode = _require(data, 'mode', str, path)
    if mode not in MODES:
        raise InvalidManifestError(f'{path}: mode must be one of {MODES}, got {mode!r}', file=path)
    width = _require(data, 'width', int, path)
    height = _require(data, 'height', int, path)
    n_rays = _require(data, 'n_rays', int, path)
    passes = _require(data, 'passes', int, path)
    if width <= 0 or height <= 0:
        raise InvalidManifestError(f'{path}: width and height must be > 0', file=path)
    if n_rays < 3:
        raise InvalidManifestError(f'{path}: n_rays must be >= 3, got {n_rays}', file=path)
    if passes < 1:
        raise InvalidManifestError(f'{path}: passes must be >= 1, got {passes}', file=path)
    files = data.get('files')
    if not isinstance(files, list) or len(files) != passes:
        raise InvalidManifestError(f'{path}: "files" must list exactly {passes} entries', file=path)
    sampling = data.get('sampling', 'dropout')
    if sampling not in SAMPLING:
        raise InvalidManifestError(f'{path}: sampling must be one of {SAMPLING}, got {sampling!r}', file=path)

    root = path.parent
    resolved = []
    for index, entry in enumerate(files, start=1):
        if mode == 'dense':
            if not isinstance(entry, dict) or not {'probs', 'radial'} <= set(entry):
                raise InvalidManifestError(f'{path}: dense pass {index} needs "probs" and "radial"', file=path)
            probs, radial = root / entry['probs'], root / entry['radial']
            _check_size(probs, width * height * F32.itemsize)
            _check_size(radial, width * height * n_rays * F32.itemsize)
            resolved.append((probs, radial))
        else:
            if not isinstance(entry, str):
                raise InvalidManifestError(f'{path}: instance pass {index} must be a file name', file=path)
            target = root / entry
            if target.name.endswith('.labels.bin'):
                _check_size(target, width * height * U16.itemsize)
            elif target.name.endswith('.csv'):
                if not target.exists():
                    raise MissingFileError(f'referenced file not found: {target}', file=target)
            else:
                raise InvalidManifestError(f'{path}: unsupported instance file type {entry!r}', file=path)
            resolved.append(target)

    ground_truth = data.get('ground_truth')
    if ground_truth is not None:
        ground_truth = root / ground_truth
        _check_size(ground_truth, width * height * U16.itemsize)

    manifest = Manifest(version=version, mode=mode, width=width, height=height, n_rays=n_rays,
                        passes=passes, files=tuple(resolved), ground_truth=ground_truth,
                        name=data.get('name'), sampling=sampling, path=path)
    logger.debug(f'Manifest {path}: mode={mode}, {width}x{height}, n={n_rays}, F={passes}')
    return manifest


def manifest_document(mode, width, height, n_rays, files, ground_truth=None, name=None, sampling='dropout'):
    """JSON document for a manifest; file references are relative to the manifest directory"""
    doc = {
        'version': MANIFEST_VERSION,
        'mode': mode,
        'width': width,
        'height': height,
        'n_rays': n_rays,
        'passes': len(files),
        'files': list(files),
        'sampling': sampling
    }
    if ground_truth is not None:
        doc['ground_truth'] = ground_truth
    if name is not None:
        doc['name'] = name
    return doc


# ===== Dense samples =====

def _read_array(filepath, dtype, shape):
    return np.fromfile(filepath, dtype=dtype).reshape(shape)


def _load_one_dense(manifest, probs_path, radial_path):
    h, w, n = manifest.height, manifest.width, manifest.n_rays
    prob = _read_array(probs_path, F32, (h, w))
    radial = _read_array(radial_path, F32, (h, w, n))
    bad = ~np.isfinite(prob) | (prob < 0) | (prob > 1)
    if bad.any():
        y, x = (int(v) for v in np.argwhere(bad)[0])
        raise InvalidSampleError(f'invalid sample in {probs_path}: probability {prob[y, x]!r} at pixel ({x}, {y})',
                                 file=probs_path, x=x, y=y)
    bad = ~np.isfinite(radial) | (radial < 0)
    if bad.any():
        y, x, i = (int(v) for v in np.argwhere(bad)[0])
        raise InvalidSampleError(
            f'invalid sample in {radial_path}: radial value {radial[y, x, i]!r} at pixel ({x}, {y}), ray {i}',
            file=radial_path, x=x, y=y, ray=i)
    return DenseOutput(prob, radial)


def load_dense(manifest, threads=1):
    """Decode every pass of a dense manifest, in manifest order"""
    if manifest.mode != 'dense':
        raise InvalidManifestError(f'{manifest.path}: load_dense needs a dense manifest, got {manifest.mode!r}')
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        samples = list(pool.map(lambda pair: _load_one_dense(manifest, *pair), manifest.files))
    logger.info(f'Loaded {len(samples)} dense sample(s) from {manifest.path}')
    return samples


def write_dense(session, stem, dense):
    """Write one dense output as <stem>.probs.bin / <stem>.radial.bin; returns the file entry"""
    probs_name, radial_name = f'{stem}.probs.bin', f'{stem}.radial.bin'
    session.write_bytes(probs_name, np.ascontiguousarray(dense.prob, dtype=F32).tobytes())
    session.write_bytes(radial_name, np.ascontiguousarray(dense.radial, dtype=F32).tobytes())
    return {'probs': probs_name, 'radial': radial_name}


# ===== Instance samples =====

def _load_polygons_csv(filepath, pass_id, n_rays):
    expected = ['pass', 'cx', 'cy'] + [f'r{i}' for i in range(n_rays)]
    predictions = []
    with open(filepath, newline='', encoding='utf-8') as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != expected:
            raise ValidationError(f'{filepath}: header must be {",".join(expected)}', file=filepath)
        for row_number, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(expected):
                raise ValidationError(f'{filepath}:{row_number}: expected {len(expected)} columns, got {len(row)}',
                                      file=filepath, row=row_number)
            try:
                row_pass = int(row[0])
                values = [float(cell) for cell in row[1:]]
            except ValueError as e:
                raise ValidationError(f'{filepath}:{row_number}: {str(e)}', file=filepath, row=row_number)
            if row_pass != pass_id:
                raise ValidationError(f'{filepath}:{row_number}: pass {row_pass} listed in the file of pass {pass_id}',
                                      file=filepath, row=row_number)
            try:
                predictions.append(RadialPolygon(values[0], values[1], values[2:]))
            except ValidationError as e:
                raise ValidationError(f'{filepath}:{row_number}: {e.message}', file=filepath, row=row_number)
    return predictions


def load_label_mask(filepath, width, height):
    expected = width * height * U16.itemsize
    _check_size(Path(filepath), expected)
    return LabelMask(width, height, _read_array(filepath, U16, (height, width)))


def load_instances(manifest):
    """Decode every pass of an instance manifest into PredictionSets (pass ids start at 1)"""
    if manifest.mode != 'instances':
        raise InvalidManifestError(f'{manifest.path}: load_instances needs an instance manifest, got {manifest.mode!r}')
    samples = []
    for pass_id, filepath in enumerate(manifest.files, start=1):
        if filepath.name.endswith('.csv'):
            predictions = _load_polygons_csv(filepath, pass_id, manifest.n_rays)
        else:
            labels = load_label_mask(filepath, manifest.width, manifest.height)
            predictions = list(labels.split().values())
        logger.debug(f'Pass {pass_id}: {len(predictions)} prediction(s) from {filepath.name}')
        samples.append(PredictionSet(pass_id, predictions))
    logger.info(f'Loaded {sum(len(s) for s in samples)} prediction(s) over {len(samples)} pass(es)')
    return samples


def load_ground_truth(manifest):
    if manifest.ground_truth is None:
        return None
    return load_label_mask(manifest.ground_truth, manifest.width, manifest.height)


def polygons_csv(pass_id, polygons, n_rays):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow(['pass', 'cx', 'cy'] + [f'r{i}' for i in range(n_rays)])
    for poly in polygons:
        writer.writerow([pass_id, _fmt(poly.cx), _fmt(poly.cy)] + [_fmt(r) for r in poly.radii])
    return out.getvalue()


def write_polygons_csv(session, name, pass_id, polygons, n_rays):
    session.write_text(name, polygons_csv(pass_id, polygons, n_rays))
    return name


def write_label_mask(session, name, labels):
    session.write_bytes(name, np.ascontiguousarray(labels.labels, dtype=U16).tobytes())
    return name


# ===== Reports =====

def encode_mask(mask: BitMask):
    """Bounding-box window plus run lengths (alternating, starting with background)"""
    flat = mask.crop.ravel()
    h, w = mask.crop.shape
    if flat.size == 0:
        runs = []
    else:
        changes = np.flatnonzero(np.diff(flat.astype(np.int8))) + 1
        edges = np.concatenate([[0], changes, [flat.size]])
        runs = np.diff(edges).tolist()
        if flat[0]:
            runs = [0] + runs
    return {'type': 'mask', 'width': mask.width, 'height': mask.height,
            'x0': mask.x0, 'y0': mask.y0, 'w': w, 'h': h, 'runs': runs}


def decode_mask(data):
    values = np.zeros(len(data['runs']), dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, data['runs'])
    crop = flat.reshape(data['h'], data['w']) if flat.size else None
    return BitMask(data['width'], data['height'], data['x0'], data['y0'], crop)


def encode_prediction(prediction):
    if isinstance(prediction, RadialPolygon):
        return {'type': 'polygon', **prediction.to_dict()}
    return encode_mask(prediction)


def decode_prediction(data):
    if data['type'] == 'polygon':
        return RadialPolygon.from_dict(data)
    return decode_mask(data)


def encode_band(band):
    if band is None:
        return None
    if isinstance(band, UncertaintyBand):
        return {'type': 'radial', 'lo': band.lo, 'hi': band.hi,
                'inner': band.inner.to_dict(), 'outer': band.outer.to_dict()}
    if isinstance(band, PixelStats):
        return {'type': 'pixel',
                'inner': [c.tolist() for c in band.inner],
                'outer': [c.tolist() for c in band.outer],
                'max_std': float(band.std.max()) if band.std.size else 0.0}
    raise ValidationError(f'cannot encode band of type {type(band).__name__}')


def report_document(clusters, scores, calibration=None, medians=None, bands=None,
                    metadata=None, diagnostics=None):
    medians = medians if medians is not None else [None] * len(clusters)
    bands = bands if bands is not None else [None] * len(clusters)
    entries = []
    for cluster, score, median, band in zip(clusters, scores, medians, bands):
        entries.append({
            'id': cluster.id,
            'size': cluster.size,
            'passes': cluster.pass_ids,
            'center': list(cluster.center) if cluster.center is not None else None,
            'median': encode_prediction(median) if median is not None else None,
            'band': encode_band(band),
            'c_spl': score.c_spl,
            'c_frac': score.c_frac,
            'c_hyb': score.c_hyb
        })
    doc = {'version': REPORT_VERSION, 'metadata': metadata or {}, 'clusters': entries}
    if diagnostics:
        doc['diagnostics'] = diagnostics
    if calibration:
        doc['calibration'] = {name: report.to_dict() for name, report in calibration.items()}
    return doc


def write_report(path, clusters, scores, calibration=None, *, medians=None, bands=None,
                 metadata=None, diagnostics=None, session=None):
    """
    Write report.json

    Args:
        path: destination file
        clusters: list of Cluster
        scores: CertaintyScores per cluster, same order
        calibration: optional {score name: CalibrationReport}
        medians / bands: optional per-cluster median prediction and uncertainty band
        session: optional OutputSession that owns the write
    """
    doc = report_document(clusters, scores, calibration, medians, bands, metadata, diagnostics)
    if session is not None:
        session.write_json(path, doc)
    else:
        write_json_atomic(path, doc)
    logger.info(f'Report with {len(clusters)} cluster(s) written to {path}')
    return doc


def read_report(path):
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f'report not found: {path}', file=path)
    try:
        doc = read_json_locked(path)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise MalformedJSONError(f'{path}: malformed JSON: {str(e)}', file=path)
    if doc.get('version') != REPORT_VERSION:
        raise UnsupportedVersionError(f'{path}: unsupported report version {doc.get("version")!r}', file=path)
    entries = []
    for item in doc.get('clusters', []):
        center = tuple(item['center']) if item.get('center') is not None else None
        median = decode_prediction(item['median']) if item.get('median') else None
        entries.append(ReportEntry(
            id=item['id'], size=item['size'], pass_ids=list(item.get('passes', [])), center=center,
            median=median, band=item.get('band'),
            scores=CertaintyScores(item['c_spl'], item['c_frac'], item['c_hyb'])))
    return Report(metadata=doc.get('metadata', {}), entries=entries,
                  calibration=doc.get('calibration'), diagnostics=doc.get('diagnostics'))


def reliability_csv(bins):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow(RELIABILITY_HEADER)
    for b in bins:
        writer.writerow([
            _fmt(b.lo), _fmt(b.hi), b.count,
            '' if b.mean_confidence is None else _fmt(b.mean_confidence),
            '' if b.accuracy is None else _fmt(b.accuracy)
        ])
    return out.getvalue()


def write_reliability_csv(session, name, bins):
    session.write_text(name, reliability_csv(bins))
    return name


# ===== Experiment tables =====

SWEEP_HEADER = ['passes', 'metric', 'mean', 'std', 'n']
BENCH_HEADER = ['method', 'instances', 'predictions', 'seconds']


def _optional(value):
    return '' if value is None else _fmt(value)


def sweep_csv(rows):
    """rows: dicts with passes, metric, mean, std, n; a metric no seed produced has empty mean/std"""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow(SWEEP_HEADER)
    for row in rows:
        writer.writerow([row['passes'], row['metric'], _optional(row['mean']), _optional(row['std']), row['n']])
    return out.getvalue()


def bench_csv(rows):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow(BENCH_HEADER)
    for row in rows:
        writer.writerow([row['method'], row['instances'], row['predictions'], _fmt(row['seconds'])])
    return out.getvalue()
