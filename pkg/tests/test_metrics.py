import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thinedge.metrics import (
    CSV_COLUMNS,
    EvalReport,
    UndefinedMetricError,
    classification_metrics,
    ecd,
    format_value,
    sweep_report,
    sweep_rows,
)
from thinedge.pointcloud import GroundTruthEdges, PointCloud

from oracles import brute_ecd, random_rotation


def test_ecd_subset_is_zero():
    gt = np.random.default_rng(0).normal(size=(50, 3))
    assert ecd(gt[::3], gt) == 0.0


def test_ecd_single_pair():
    assert ecd([[1, 0, 0]], [[0, 0, 0]]) == 1.0
    assert ecd([[3, 4, 0]], [[0, 0, 0]], root=True) == 5.0


def test_ecd_accepts_cloud_and_gt_types():
    gt = GroundTruthEdges([[[0, 0, 0], [1, 0, 0]]])
    assert ecd(PointCloud([[0, 2, 0]]), gt) == pytest.approx(4.0)


def test_ecd_matches_brute_force():
    rng = np.random.default_rng(1)
    x, y = rng.uniform(-1, 1, (1000, 3)), rng.uniform(-1, 1, (5000, 3))
    assert abs(ecd(x, y) - brute_ecd(x, y)) <= 1e-12


def test_ecd_empty_inputs():
    with pytest.raises(UndefinedMetricError):
        ecd(np.empty((0, 3)), [[0, 0, 0]])
    with pytest.raises(UndefinedMetricError):
        ecd([[0, 0, 0]], np.empty((0, 3)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100))
def test_ecd_scaling_and_rigid_invariance(seed, s):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(40, 3)), rng.normal(size=(60, 3))
    base = ecd(x, y)
    assert ecd(s * x, s * y) == pytest.approx(s * s * base, rel=1e-9)
    r, t = random_rotation(rng), rng.normal(size=3) * 10
    assert abs(ecd(x @ r.T + t, y @ r.T + t) - base) <= 1e-9


def test_ecd_zero_only_on_coincidence():
    y = np.eye(3)
    assert ecd(y, y) == 0
    assert ecd(y + [0, 0, 1e-7], y) > 0


def test_classification_example_counts():
    pred = [1, 1, 1, 0] + [0] * 6
    truth = [1, 1, 0, 1] + [0] * 6
    r = classification_metrics(pred, truth)
    assert (r.tp, r.fp, r.fn, r.tn) == (2, 1, 1, 6)
    assert r.precision == pytest.approx(2 / 3)
    assert r.recall == pytest.approx(2 / 3)
    assert r.f1 == pytest.approx(2 / 3)
    assert r.accuracy == pytest.approx(0.8)


def test_perfect_and_undefined():
    r = classification_metrics([1, 0, 1], [1, 0, 1])
    assert r.recall == r.precision == r.f1 == r.accuracy == 1
    r = classification_metrics([0, 0, 0], [1, 0, 0])
    assert r.recall == 0 and r.precision is None and r.f1 is None
    assert format_value(r.precision) == "-"


def test_length_mismatch():
    with pytest.raises(ValueError):
        classification_metrics([1, 0], [1])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=50))
def test_ratio_identities(pairs):
    pred, truth = zip(*pairs)
    r = classification_metrics(pred, truth)
    assert r.total == len(pairs)
    assert r.accuracy == (r.tp + r.tn) / r.total
    if r.f1 is not None:
        assert r.f1 == pytest.approx(2 * r.precision * r.recall / (r.precision + r.recall))


def _report(noise, ecd_value, tp=1):
    return EvalReport(tp=tp, fp=1, tn=5, fn=1, ecd=ecd_value,
                      meta=dict(shape="plate", noise=noise, resolution=0.5, bandwidth=10))


def test_sweep_single_run():
    text = sweep_report([_report(0.001, 0.5)])
    lines = text.strip().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS) and len(lines) == 2


def test_sweep_means_and_ordering():
    rows = sweep_rows([_report(0.03, 3.0), _report(0.001, 1.0), _report(0.001, 2.0, tp=3), _report(0.005, 5.0)])
    assert [r["noise"] for r in rows] == [0.001, 0.005, 0.03]
    assert rows[0]["ecd"] == pytest.approx(1.5)
    assert rows[0]["recall"] == pytest.approx((0.5 + 0.75) / 2)


def test_sweep_undefined_cell_is_dash():
    r = _report(0.001, None)
    line = sweep_report([r]).splitlines()[1]
    assert line.split(",")[CSV_COLUMNS.index("ecd")] == "-"


def test_format_value():
    assert format_value(1 / 3) == "0.333333"
    assert format_value(7) == "7"
    assert format_value(float("nan")) == "-"
