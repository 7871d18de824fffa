import numpy as np
import pytest
from hypothesis import given
from hypothesis.extra.numpy import arrays

from oracles import popcount_dice
from sliceprop.core import InvalidInputError
from sliceprop.evaluation import (
    EmptyMasksWarning,
    SegmentationReport,
    aggregate,
    dice,
    format_cohort,
    score_slices,
)


def test_dice_closed_forms():
    a = np.zeros((4, 4), bool)
    b = np.zeros((4, 4), bool)
    a[0, 0:2] = True
    b[0, 1:3] = True
    assert dice(a, b) == 0.5
    assert dice(a, a) == 1.0
    c = np.zeros((4, 4), bool)
    c[3, 3] = True
    assert dice(a, c) == 0.0


def test_dice_empty_pair_warns():
    z = np.zeros((3, 3), bool)
    with pytest.warns(EmptyMasksWarning):
        assert dice(z, z) == 1.0


def test_dice_shape_mismatch():
    with pytest.raises(InvalidInputError):
        dice(np.zeros((2, 2), bool), np.zeros((2, 3), bool))


def test_dice_oracle_random():
    rng = np.random.default_rng(0)
    for _ in range(200):
        a, b = rng.random((2, 10, 10)) < rng.uniform(0.05, 0.9)
        if not (a.any() or b.any()):
            continue
        assert abs(dice(a, b) - popcount_dice(a, b)) <= 1e-12
        assert dice(a, b) == dice(b, a)


@given(arrays(bool, (6, 6)), arrays(bool, (6, 6)))
def test_dice_symmetric_and_bounded(a, b):
    if a.any() or b.any():
        assert dice(a, b) == dice(b, a)
        assert 0.0 <= dice(a, b) <= 1.0


def stack_of_masks(seed, n=4, shape=(8, 8)):
    return list(np.random.default_rng(seed).random((n, *shape)) < 0.5)


def test_score_slices_skips_first_and_pools():
    truth = stack_of_masks(1)
    pred = stack_of_masks(2)
    pred[0] = np.zeros((8, 8), bool)  # ignored
    report = score_slices(pred, truth, mf=truth, rf=None, config={"mode": "basic"})
    assert [s.slice for s in report.per_slice] == [2, 3, 4]
    expected = [popcount_dice(p, t) for p, t in zip(pred[1:], truth[1:])]
    assert report.overall_mean["combined"] == pytest.approx(np.mean(expected), abs=1e-12)
    pooled = popcount_dice(np.concatenate(pred[1:]), np.concatenate(truth[1:]))
    assert report.overall_pooled["combined"] == pytest.approx(pooled, abs=1e-12)
    assert report.overall_mean["mf"] == 1.0
    assert report.overall_mean["rf"] is None and report.per_slice[0].dice_rf is None
    assert report.mode == "basic"


def test_score_slices_length_checks():
    truth = stack_of_masks(1)
    with pytest.raises(InvalidInputError):
        score_slices(truth[:3], truth)
    with pytest.raises(InvalidInputError):
        score_slices(truth, truth, mf=truth[:2])


def report(mode, combined, mf=0.5):
    return SegmentationReport([], {"mf": mf, "rf": None, "combined": combined}, {}, {"mode": mode})


def test_aggregate_single_and_pair():
    s = aggregate([report("basic", 0.8)])
    assert s["basic"]["combined"].mean == 0.8 and s["basic"]["combined"].sd == 0.0
    s = aggregate([report("full", 0.8), report("full", 0.9)])
    entry = s["full"]["combined"]
    assert entry.mean == pytest.approx(0.85) and entry.sd == pytest.approx(0.05)
    assert str(entry) == "0.850 ± 0.050"
    assert "rf" not in s["full"]


def test_aggregate_groups_by_mode():
    s = aggregate([report("basic", 0.7), report("full", 0.9), report("basic", 0.8)])
    assert s["basic"]["combined"].n == 2 and s["full"]["combined"].n == 1
    table = format_cohort(s)
    assert table.splitlines()[0].split() == ["mode", "mf", "rf", "combined"]
    assert "0.750 ± 0.050" in table


def test_aggregate_empty():
    with pytest.raises(InvalidInputError):
        aggregate([])
