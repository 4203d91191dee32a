import numpy as np
import pytest

from conftest import circle, mask_cluster, polygon_cluster, square_mask
from starcert.certainty import (certainty_scores, fractional_certainty, hybrid_certainty,
                                median_prediction, median_prediction_pixel,
                                median_prediction_radial, percentile_band_radial, pixel_stats,
                                spatial_certainty)
from starcert.clustering import cluster_bsas
from starcert.errors import EmptyClusterError, ValidationError
from starcert.io_formats import load_instances, read_manifest
from starcert.models import BitMask, Cluster, RadialPolygon


def _four_pass_clusters(four_pass_dir):
    manifest = read_manifest(four_pass_dir)
    return manifest, cluster_bsas(load_instances(manifest), 0.5, manifest.width, manifest.height)


def test_four_pass_fractional_certainty(four_pass_dir):
    manifest, clusters = _four_pass_clusters(four_pass_dir)
    assert [fractional_certainty(c, manifest.passes) for c in clusters] == [1.0, 0.25, 0.75]


def test_hybrid_is_the_product_of_spatial_and_fractional(four_pass_dir):
    manifest, clusters = _four_pass_clusters(four_pass_dir)
    for cluster in clusters:
        scores = certainty_scores(cluster, median_prediction(cluster), manifest.passes)
        assert scores.c_hyb == scores.c_spl * scores.c_frac
        assert 0.0 <= scores.c_hyb <= min(scores.c_spl, scores.c_frac)
    # the single-member cluster agrees with itself
    single = clusters[1]
    assert spatial_certainty(single, median_prediction(single)) == 1.0


def test_hybrid_rejects_out_of_range_inputs():
    with pytest.raises(ValidationError):
        hybrid_certainty(1.2, 0.5)


def test_pixel_median_sets_pixels_covered_by_half_the_members():
    a, b = square_mask(4, 4, 5), square_mask(6, 6, 5)
    two = median_prediction_pixel(mask_cluster([a, b]))
    union = a.bits | b.bits
    assert np.array_equal(two.bits, union)

    three = median_prediction_pixel(mask_cluster([a, b, square_mask(20, 20, 3)]))
    overlap = a.bits & b.bits
    assert np.array_equal(three.bits, overlap)
    assert three.count == int(overlap.sum())


def test_radial_median_averages_the_middle_pair():
    cluster = polygon_cluster([circle(9.5, 9.5, r) for r in (1.0, 2.0, 4.0, 10.0)])
    median = median_prediction_radial(cluster)
    assert median.center == (9.5, 9.5)
    assert np.allclose(median.radii, 3.0)


def _oracle_spatial(radii_rows):
    rows = [list(r) for r in radii_rows]
    n = len(rows[0])
    median = []
    for i in range(n):
        column = sorted(row[i] for row in rows)
        k = len(column)
        median.append(column[k // 2] if k % 2 else 0.5 * (column[k // 2 - 1] + column[k // 2]))
    total = 0.0
    for row in rows:
        lo = [min(a, b) for a, b in zip(row, median)]
        hi = [max(a, b) for a, b in zip(row, median)]
        inter = sum(lo[i] * lo[(i + 1) % n] for i in range(n))
        union = sum(hi[i] * hi[(i + 1) % n] for i in range(n))
        total += inter / union
    return total / len(rows)


@pytest.mark.parametrize('seed', range(100))
def test_radial_spatial_certainty_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    members = rng.integers(1, 9)
    rows = rng.uniform(2.0, 12.0, (members, 16))
    cluster = polygon_cluster([RadialPolygon(30.5, 30.5, r) for r in rows])
    c_spl = spatial_certainty(cluster, median_prediction(cluster))
    assert c_spl == pytest.approx(_oracle_spatial(rows), abs=1e-9)


def test_percentile_band_interpolates_linearly():
    cluster = polygon_cluster([circle(9.5, 9.5, r, n=8) for r in (1.0, 2.0, 3.0, 4.0, 5.0)])
    band = percentile_band_radial(cluster)
    assert np.allclose(band.inner.radii, 1.1)
    assert np.allclose(band.outer.radii, 4.9)
    assert band.inner.center == band.outer.center == (9.5, 9.5)
    assert np.all(band.inner.radii <= median_prediction(cluster).radii)
    assert np.all(median_prediction(cluster).radii <= band.outer.radii)


def test_percentile_band_rejects_bad_levels():
    with pytest.raises(ValidationError):
        percentile_band_radial(polygon_cluster([circle(5.5, 5.5, 2.0)]), 60.0, 40.0)


def test_pixel_stats_of_identical_masks():
    cluster = mask_cluster([square_mask(10, 10, 10) for _ in range(4)])
    stats = pixel_stats(cluster)
    assert (stats.x0, stats.y0) == (9, 9)
    assert stats.mean.shape == (12, 12)
    assert np.all(stats.std == 0.0)
    (inner,) = stats.inner
    (outer,) = stats.outer
    assert inner[:, 0].min() == pytest.approx(10.475)
    assert inner[:, 0].max() == pytest.approx(19.525)
    assert outer[:, 0].min() == pytest.approx(9.525)
    assert outer[:, 0].max() == pytest.approx(20.475)


def test_pixel_stats_std_peaks_where_members_disagree():
    cluster = mask_cluster([square_mask(4, 4, 6), square_mask(6, 4, 6)])
    stats = pixel_stats(cluster)
    assert stats.std.max() == pytest.approx(0.5)
    assert stats.mean.max() == 1.0


def test_empty_cluster_and_pass_count_errors():
    with pytest.raises(EmptyClusterError):
        median_prediction_radial(Cluster(7))
    with pytest.raises(EmptyClusterError):
        spatial_certainty(Cluster(7), circle(1.5, 1.5, 1.0))
    with pytest.raises(ValidationError):
        fractional_certainty(polygon_cluster([circle(5.5, 5.5, 2.0)] * 3), 2)
    with pytest.raises(ValidationError):
        fractional_certainty(polygon_cluster([circle(5.5, 5.5, 2.0)]), 0)


def test_even_count_tie_pixels_are_set():
    a, other, extra = square_mask(4, 4, 4), square_mask(20, 20, 4), square_mask(12, 12, 2)
    median = median_prediction_pixel(mask_cluster([a, a, other, extra]))
    assert np.array_equal(median.bits, a.bits)


def _rect(x0, y0, w, h, width=32, height=32):
    bits = np.zeros((height, width), dtype=bool)
    bits[y0:y0 + h, x0:x0 + w] = True
    return BitMask.from_array(bits)


def test_spatial_certainty_of_two_overlapping_rectangles():
    # the median of two members is their union: 10 x 10 pixels
    cluster = mask_cluster([_rect(0, 0, 8, 10), _rect(4, 0, 6, 10)])
    median = median_prediction(cluster)
    assert median.count == 100
    assert spatial_certainty(cluster, median) == pytest.approx(0.7, abs=1e-12)


def _oracle_pixel_spatial(arrays):
    stack = np.stack(arrays)
    median = 2 * stack.sum(axis=0) >= len(arrays)
    ious = [np.count_nonzero(a & median) / np.count_nonzero(a | median) for a in arrays]
    return median, sum(ious) / len(ious)


@pytest.mark.parametrize('seed', range(100))
def test_pixel_spatial_certainty_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    arrays = []
    for _ in range(rng.integers(1, 9)):
        bits = np.zeros((32, 32), dtype=bool)
        x0, y0 = rng.integers(0, 24, size=2)
        w, h = rng.integers(1, 9, size=2)
        bits[y0:y0 + h, x0:x0 + w] = True
        arrays.append(bits)
    cluster = mask_cluster([BitMask.from_array(a) for a in arrays])
    median = median_prediction(cluster)
    expected_median, expected = _oracle_pixel_spatial(arrays)
    assert np.array_equal(median.bits, expected_median)
    scores = certainty_scores(cluster, median, 8)
    assert scores.c_spl == pytest.approx(expected, abs=1e-9)
    assert scores.c_hyb == scores.c_spl * scores.c_frac
