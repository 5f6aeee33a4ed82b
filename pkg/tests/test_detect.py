import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hifdetect import detect
from hifdetect.detect import Detection, DetectorState, MetricsReport, Verdict, classify
from hifdetect.errors import AlignmentError, CalibrationError, ConfigurationError, ShapeError
from hifdetect.feedersim import Label


class TableScorer:
    """Looks up a fixed error per window by its first sample."""

    T = 4

    def errors(self, V, C=None):
        return np.atleast_2d(V)[:, 0].copy()


def state(xi1=2.0, xi2=350.0, eps=1.0, node=1):
    return DetectorState(node, TableScorer(), eps, xi1, xi2)


def window(err):
    return np.array([err, 0.0, 0.0, 0.0])


def test_three_way_bands():
    assert classify(0.5, 2, 350) is Detection.NORMAL
    assert classify(100, 2, 350) is Detection.HIF
    assert classify(1e4, 2, 350) is Detection.OTHER
    # boundaries sit in the HIF band
    assert classify(2, 2, 350) is Detection.HIF
    assert classify(350, 2, 350) is Detection.HIF


def test_bad_thresholds():
    with pytest.raises(ConfigurationError):
        classify(1.0, 3.0, 3.0)
    with pytest.raises(ConfigurationError):
        state(xi1=5.0, xi2=4.0)
    with pytest.raises(ConfigurationError):
        state(eps=0.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1e6), st.floats(0, 1e6), st.floats(1e-3, 1e3), st.floats(1.001, 1e3))
def test_classify_monotone(g1, g2, xi1, ratio):
    xi2 = xi1 * ratio
    order = {Detection.NORMAL: 0, Detection.HIF: 1, Detection.OTHER: 2}
    lo, hi = sorted((g1, g2))
    assert order[classify(lo, xi1, xi2)] <= order[classify(hi, xi1, xi2)]
    c = classify(g1, xi1, xi2)
    assert (c is Detection.NORMAL) == (g1 < xi1)
    assert (c is Detection.OTHER) == (g1 > xi2)


def test_confidence_definitional():
    s = state(eps=2.0)
    assert detect.confidence(s, window(0.0)) == 0.0
    assert detect.confidence(s, window(2.0)) == 1.0
    np.testing.assert_array_equal(detect.confidence(s, np.stack([window(4.0), window(1.0)])), [2.0, 0.5])
    with pytest.raises(ShapeError):
        detect.confidence(s, np.zeros(5))


def test_mean_training_gamma_is_one():
    errs = np.random.default_rng(0).gamma(2.0, size=200)
    s = detect.calibrate(1, TableScorer(), errs, np.stack([window(50.0)]))
    g = detect.confidence(s, np.stack([window(e) for e in errs]))
    assert abs(g.mean() - 1.0) < 0.05


def test_calibrate_xi1():
    assert detect.calibrate_xi1([3.0]) == 1.0
    errs = np.array([1.0, 2.0, 3.0, 6.0])
    assert detect.calibrate_xi1(errs) == pytest.approx(errs.max() / errs.mean())
    assert detect.calibrate_xi1(errs, safety=1.5) == pytest.approx(1.5 * 6.0 / 3.0)
    with pytest.raises(CalibrationError):
        detect.calibrate_xi1([])


def test_calibrate_xi2():
    assert detect.calibrate_xi2([300.0]) == pytest.approx(330.0)
    with pytest.raises(CalibrationError):
        detect.calibrate_xi2([])


def test_calibrate_self_consistent():
    train = np.array([0.8, 1.0, 1.2, 1.0])
    val = np.stack([window(e) for e in (5.0, 9.0, 20.0)])
    s = detect.calibrate(4, TableScorer(), train, val)
    assert 0 < s.xi1 < s.xi2
    assert all(v.label is Detection.HIF for v in detect.local_detect(s, val))


def test_calibrate_rejects_overlapping_bands():
    with pytest.raises(CalibrationError):
        detect.calibrate(1, TableScorer(), np.array([1.0, 1.0, 3.0]), np.stack([window(1.0)]))
    with pytest.raises(CalibrationError):
        detect.calibrate(1, TableScorer(), np.array([1.0]), np.empty((0, 4)))


def test_local_detect_indices():
    s = state()
    out = detect.local_detect(s, np.stack([window(1.0), window(10.0), window(1e3)]), window_indices=[7, 8, 9])
    assert [v.label for v in out] == [Detection.NORMAL, Detection.HIF, Detection.OTHER]
    assert [v.window_index for v in out] == [7, 8, 9]


# --- fusion ---------------------------------------------------------------------


def test_fusion_all_normal():
    vs = [Verdict(n, 0.5 + 0.1 * n, Detection.NORMAL, 3) for n in (1, 2, 3)]
    assert detect.central_fuse(vs).label is Detection.NORMAL


def test_fusion_picks_max_node():
    vs = [Verdict(1, 0.5, Detection.NORMAL, 3), Verdict(2, 40.0, Detection.HIF, 3), Verdict(3, 1.0, Detection.NORMAL, 3)]
    out = detect.central_fuse(vs)
    assert out.node == 2 and out.label is Detection.HIF


def test_fusion_uses_argmax_thresholds():
    vs = [Verdict(1, 50.0, Detection.HIF, 0), Verdict(2, 1.0, Detection.NORMAL, 0)]
    states = {1: state(xi1=2.0, xi2=10.0, node=1), 2: state(node=2)}
    assert detect.central_fuse(vs, states).label is Detection.OTHER


def test_fusion_ties_go_to_lowest_id():
    vs = [Verdict(5, 3.0, Detection.HIF, 0), Verdict(2, 3.0, Detection.HIF, 0)]
    assert detect.central_fuse(vs).node == 2


def test_fusion_errors():
    with pytest.raises(AlignmentError):
        detect.central_fuse([])
    with pytest.raises(AlignmentError):
        detect.central_fuse([Verdict(1, 1.0, Detection.NORMAL, 0), Verdict(2, 1.0, Detection.NORMAL, 1)])


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1e4), st.integers(1, 50), st.sampled_from(list(Detection)))
def test_fusion_singleton_is_identity(g, node, label):
    v = Verdict(node, g, label, 11)
    assert detect.central_fuse([v]) == v


# --- metrics --------------------------------------------------------------------


def test_perfect_predictions():
    labels = [Label.HIF, Label.NORMAL, Label.CAP, Label.LOAD]
    preds = [Detection.HIF, Detection.NORMAL, Detection.OTHER, Detection.NORMAL]
    m = detect.evaluate(preds, labels)
    assert (m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0)


def test_all_hif_predictor():
    labels = [Label.HIF] * 5 + [Label.NORMAL] * 5
    m = detect.evaluate([Detection.HIF] * 10, labels)
    assert m.recall == 1.0 and m.precision == 0.5


def test_hand_counted_confusion():
    labels = ["HIF", "HIF", "HIF", "HIF", "Normal", "Normal", "CapacitorSwitch", "CapacitorSwitch", "LoadSwitch", "HIF"]
    preds = ["HIF", "HIF", "Normal", "OtherAbnormal", "HIF", "Normal", "HIF", "OtherAbnormal", "Normal", "HIF"]
    m = detect.evaluate([Detection(p) for p in preds], labels)
    # TP: 0, 1, 9; FN: 2, 3; FP: 4, 6; TN: 5, 7, 8
    assert (m.tp, m.fn, m.fp, m.tn) == (3, 2, 2, 3)
    assert m.precision == pytest.approx(0.6)
    assert m.recall == pytest.approx(0.6)
    assert m.f1 == pytest.approx(0.6)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 500), st.integers(0, 500), st.integers(0, 500), st.integers(0, 500))
def test_metric_identities(tp, fp, fn, tn):
    m = MetricsReport(tp, fp, fn, tn)
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    assert m.precision == pytest.approx(p)
    assert m.recall == pytest.approx(r)
    assert m.f1 == pytest.approx(2 * p * r / (p + r) if p + r else 0.0)
    assert 0 <= m.f1 <= 1


def test_evaluate_length_mismatch():
    with pytest.raises(ShapeError):
        detect.evaluate([Detection.HIF], [])


def test_verdict_stream_round_trip(tmp_path):
    vs = [Verdict(3, 1.5, Detection.HIF, 0), Verdict(4, 0.25, Detection.NORMAL, 1)]
    path = tmp_path / "v.ndjson"
    detect.write_verdicts(vs, path, {"seed": 1})
    lines = path.read_text().splitlines()
    assert json.loads(lines[0]) == {"provenance": {"seed": 1}}
    assert json.loads(lines[1]) == {"window_index": 0, "node": 3, "gamma": 1.5, "class": "HIF"}
    assert detect.read_verdicts(path) == vs


def test_metrics_table():
    text = MetricsReport(3, 1, 1, 5).table()
    assert "precision" in text and "0.7500" in text
