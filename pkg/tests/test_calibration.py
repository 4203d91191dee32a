import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import circle, square_mask
from starcert.calibration import (bin_edges, calibration_report, ece, match_ground_truth,
                                  match_predictions, mce, pearson_r, reliability_diagram)
from starcert.errors import (DimensionMismatchError, EmptyBinsError, UndefinedCorrelationError,
                             ValidationError)
from starcert.geometry import rasterize
from starcert.models import LabelMask, ReliabilityBin

scored_lists = st.lists(st.tuples(st.floats(0.0, 1.0), st.booleans()), min_size=1, max_size=60)


def _bins(*rows):
    return [ReliabilityBin(i / len(rows), (i + 1) / len(rows), *row) for i, row in enumerate(rows)]


def _gt(width=32, height=32):
    labels = np.zeros((height, width), dtype=np.uint16)
    labels[4:12, 4:12] = 1
    labels[20:28, 18:26] = 2
    return LabelMask(width, height, labels)


def test_ece_and_mce_worked_example():
    bins = _bins((2, 0.8, 0.5), (2, 0.6, 0.5))
    assert ece(bins) == pytest.approx(0.2)
    assert mce(bins) == pytest.approx(0.3)


def test_single_populated_bin():
    bins = _bins((0, None, None), (5, 0.9, 0.4))
    assert ece(bins) == pytest.approx(0.5)
    assert mce(bins) == pytest.approx(0.5)


def test_perfect_calibration_has_zero_error():
    bins = _bins((3, 0.1, 0.1), (0, None, None), (4, 0.9, 0.9))
    assert ece(bins) == 0.0
    assert mce(bins) == 0.0


def test_all_empty_bins_are_an_error():
    bins = _bins((0, None, None), (0, None, None))
    with pytest.raises(EmptyBinsError):
        ece(bins)
    with pytest.raises(EmptyBinsError):
        mce(bins)


def test_perfect_scores_fill_only_the_top_bin():
    bins = reliability_diagram([(1.0, True)] * 7, 10)
    assert [b.count for b in bins] == [0] * 9 + [7]
    assert bins[-1].accuracy == 1.0
    assert bins[0].mean_confidence is None


def test_boundary_assignment():
    bins = reliability_diagram([(0.05, True), (0.15, False), (0.0, False), (0.1, True)], 10)
    assert [b.count for b in bins][:3] == [3, 1, 0]
    assert bins[1].mean_confidence == pytest.approx(0.15)
    assert bins[0].hi == pytest.approx(0.1)


def test_reliability_diagram_rejects_bad_input():
    with pytest.raises(ValidationError):
        reliability_diagram([(0.5, True)], 1)
    with pytest.raises(ValidationError):
        reliability_diagram([(1.5, True)], 10)


@settings(deadline=None, max_examples=100)
@given(scored=scored_lists, bins=st.integers(2, 20))
def test_binning_matches_per_item_loop(scored, bins):
    edges = bin_edges(bins)
    expected = [[] for _ in range(bins)]
    for score, tp in scored:
        for b in range(bins):
            if score <= edges[b + 1]:
                expected[b].append((score, tp))
                break
    diagram = reliability_diagram(scored, bins)
    assert [b.count for b in diagram] == [len(items) for items in expected]
    assert sum(b.count for b in diagram) == len(scored)
    for b, items in zip(diagram, expected):
        if items:
            assert b.accuracy == pytest.approx(sum(tp for _, tp in items) / len(items))
            assert b.mean_confidence == pytest.approx(sum(s for s, _ in items) / len(items))


@settings(deadline=None, max_examples=100)
@given(scored=scored_lists, bins=st.integers(2, 20), seed=st.integers(0, 2 ** 16))
def test_mce_bounds_ece_and_both_ignore_order(scored, bins, seed):
    diagram = reliability_diagram(scored, bins)
    assert 0.0 <= ece(diagram) <= mce(diagram) + 1e-12
    shuffled = list(scored)
    random.Random(seed).shuffle(shuffled)
    permuted = reliability_diagram(shuffled, bins)
    assert ece(permuted) == pytest.approx(ece(diagram), abs=1e-12)
    assert mce(permuted) == pytest.approx(mce(diagram), abs=1e-12)


def test_pearson_on_identity_and_decreasing_bins():
    assert pearson_r(_bins((1, 0.1, 0.1), (1, 0.5, 0.5), (1, 0.9, 0.9))) == pytest.approx(1.0)
    assert pearson_r(_bins((1, 0.1, 0.9), (1, 0.5, 0.6), (1, 0.9, 0.2))) < 0


@pytest.mark.parametrize('seed', range(20))
def test_pearson_matches_textbook_formula(seed):
    rng = np.random.default_rng(seed)
    conf, acc = rng.random(6), rng.random(6)
    bins = _bins(*[(1, float(c), float(a)) for c, a in zip(conf, acc)])
    cov = np.sum((conf - conf.mean()) * (acc - acc.mean()))
    expected = cov / np.sqrt(np.sum((conf - conf.mean()) ** 2) * np.sum((acc - acc.mean()) ** 2))
    assert pearson_r(bins) == pytest.approx(expected, abs=1e-9)


def test_pearson_is_undefined_for_degenerate_bins():
    with pytest.raises(UndefinedCorrelationError):
        pearson_r(_bins((3, 0.5, 0.5), (0, None, None)))
    with pytest.raises(UndefinedCorrelationError):
        pearson_r(_bins((1, 0.2, 1.0), (1, 0.8, 1.0)))


def test_report_leaves_undefined_pearson_empty():
    report = calibration_report([(1.0, True)] * 4, 10, 'c_frac', false_negatives=2)
    assert report.pearson_r is None
    assert (report.ece, report.mce) == (0.0, 0.0)
    assert (report.matched, report.false_positives, report.false_negatives) == (4, 0, 2)
    assert report.to_dict()['score'] == 'c_frac'


def test_identical_prediction_is_a_true_positive():
    gt = _gt()
    scored, false_negatives = match_predictions([(gt.split()[1], 0.7)], gt)
    assert scored == [(0.7, True)]
    assert false_negatives == 1


def test_disjoint_prediction_is_a_false_positive():
    assert match_ground_truth([(square_mask(26, 0, 4), 0.9)], _gt()) == [(0.9, False)]


def test_two_predictions_over_one_instance_match_once():
    gt = _gt()
    exact = square_mask(4, 4, 8)
    shifted = square_mask(5, 4, 8)
    assert match_ground_truth([(shifted, 0.4), (exact, 0.6)], gt) == [(0.4, False), (0.6, True)]
    # equal IoU goes to the lower prediction index
    assert match_ground_truth([(exact, 0.4), (exact, 0.6)], gt) == [(0.4, True), (0.6, False)]


def test_polygons_are_rasterized_for_matching():
    poly = circle(16.5, 16.5, 6.0)
    gt = LabelMask(32, 32, rasterize(poly, 32, 32).bits.astype(np.uint16))
    assert match_ground_truth([(poly, 0.5), (circle(4.5, 4.5, 3.0), 0.2)], gt) == [(0.5, True), (0.2, False)]


def test_matching_rejects_mismatched_dimensions():
    with pytest.raises(DimensionMismatchError):
        match_ground_truth([(square_mask(0, 0, 3, width=16, height=16), 0.5)], _gt())
