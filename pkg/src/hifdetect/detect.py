"""Three-way local detection, threshold calibration, max-fusion and scoring."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .ellipse import EllipseParams
from .errors import AlignmentError, CalibrationError, ConfigurationError, ShapeError
from .feedersim import Label

XI2_MARGIN = 1.1


class Detection(str, Enum):
    NORMAL = "Normal"
    HIF = "HIF"
    OTHER = "OtherAbnormal"


@dataclass(frozen=True)
class DetectorState:
    node: int
    scorer: object = field(repr=False)  # anything with errors(V, C) -> (N,)
    epsilon_bar: float
    xi1: float
    xi2: float
    beta_star: EllipseParams | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.epsilon_bar > 0:
            raise ConfigurationError(f"epsilon_bar must be positive, got {self.epsilon_bar}")
        if not 0 < self.xi1 < self.xi2:
            raise ConfigurationError(f"need 0 < xi1 < xi2, got xi1={self.xi1}, xi2={self.xi2}")

    def thresholds(self) -> dict:
        return {"node": self.node, "epsilon_bar": self.epsilon_bar, "xi1": self.xi1, "xi2": self.xi2}


@dataclass(frozen=True)
class Verdict:
    node: int
    gamma: float
    label: Detection
    window_index: int

    def to_dict(self) -> dict:
        return {"window_index": self.window_index, "node": self.node, "gamma": self.gamma, "class": self.label.value}


@dataclass(frozen=True)
class MetricsReport:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
        }

    def table(self) -> str:
        rows = [("precision", f"{self.precision:.4f}"), ("recall", f"{self.recall:.4f}"), ("f1", f"{self.f1:.4f}")]
        rows += [(k, str(getattr(self, k))) for k in ("tp", "fp", "fn", "tn")]
        return "\n".join(f"{k:<10} {v:>8}" for k, v in rows)


def _errors(scorer, V, C):
    V = np.asarray(V, dtype=np.float64)
    T = getattr(scorer, "T", None)
    if T is not None and V.shape[-1] != T:
        raise ShapeError(f"window length {V.shape[-1]} does not match model length {T}")
    return np.asarray(scorer.errors(V, C), dtype=np.float64)


def confidence(state: DetectorState, v, c=None):
    """gamma = ||v - v_hat||^2 / epsilon_bar for one window (float) or a batch."""
    v = np.asarray(v, dtype=np.float64)
    g = _errors(state.scorer, v, c) / state.epsilon_bar
    return float(g[0]) if v.ndim == 1 else g


def classify(gamma, xi1: float, xi2: float) -> Detection:
    if not 0 < xi1 < xi2:
        raise ConfigurationError(f"need 0 < xi1 < xi2, got xi1={xi1}, xi2={xi2}")
    if gamma < xi1:
        return Detection.NORMAL
    if gamma > xi2:
        return Detection.OTHER
    return Detection.HIF


def classify_many(gammas, xi1: float, xi2: float) -> list:
    return [classify(g, xi1, xi2) for g in np.asarray(gammas, dtype=np.float64).ravel()]


def calibrate_xi1(train_errors, safety: float = 1.0) -> float:
    """max/mean of the training errors, optionally inflated.

    Accepts a raw error array or anything with a ``train_errors`` attribute.
    """
    errors = np.asarray(getattr(train_errors, "train_errors", train_errors), dtype=np.float64)
    if errors.size == 0:
        raise CalibrationError("no training errors to calibrate from")
    mean = errors.mean()
    if not mean > 0:
        raise CalibrationError("training reconstruction error is zero")
    return float(safety * errors.max() / mean)


def calibrate_xi2(val_gammas, margin: float = XI2_MARGIN) -> float:
    """``margin`` times the largest confidence score of validation HIF windows."""
    g = np.asarray(val_gammas, dtype=np.float64).ravel()
    if g.size == 0:
        raise CalibrationError("need at least one validation HIF window")
    return float(margin * g.max())


def calibrate(node, scorer, train_errors, V_val, C_val=None, *, beta_star=None, safety=1.0, margin=XI2_MARGIN):
    """Build a DetectorState from training errors and validation HIF windows."""
    errors = np.asarray(getattr(train_errors, "train_errors", train_errors), dtype=np.float64)
    eps = float(errors.mean())
    xi1 = calibrate_xi1(errors, safety)
    if len(V_val) == 0:
        raise CalibrationError("need at least one validation HIF window")
    xi2 = calibrate_xi2(_errors(scorer, V_val, C_val) / eps, margin)
    if xi2 <= xi1:
        raise CalibrationError(
            f"node {node}: validation HIF scores (xi2={xi2:.4g}) do not exceed the normal band (xi1={xi1:.4g})"
        )
    return DetectorState(node, scorer, eps, xi1, xi2, beta_star)


def local_detect(state: DetectorState, V, C=None, window_indices=None) -> list:
    V = np.atleast_2d(np.asarray(V, dtype=np.float64))
    gammas = np.atleast_1d(confidence(state, V, C))
    idx = range(len(V)) if window_indices is None else window_indices
    return [Verdict(state.node, float(g), classify(g, state.xi1, state.xi2), int(w)) for g, w in zip(gammas, idx)]


def central_fuse(verdicts, states: dict | None = None) -> Verdict:
    """System verdict from the node with the largest gamma (lowest node id on ties).

    Thresholds come from that node's state when ``states`` is given;
    otherwise its local class is kept.
    """
    verdicts = list(verdicts)
    if not verdicts:
        raise AlignmentError("no verdicts to fuse")
    windows = {v.window_index for v in verdicts}
    if len(windows) != 1:
        raise AlignmentError(f"verdicts span several windows: {sorted(windows)}")
    best = min(verdicts, key=lambda v: (-v.gamma, v.node))
    label = best.label
    if states is not None:
        s = states[best.node]
        label = classify(best.gamma, s.xi1, s.xi2)
    return Verdict(best.node, best.gamma, label, best.window_index)


def is_positive(label) -> bool:
    value = label.value if isinstance(label, Enum) else str(label)
    return value == Label.HIF.value


def evaluate(predictions, labels) -> MetricsReport:
    """Confusion counts with HIF as the positive class.

    ``predictions`` are Verdicts or Detection values; ``labels`` are true
    event labels (Normal, capacitor and load switching are negatives).
    """
    predictions, labels = list(predictions), list(labels)
    if len(predictions) != len(labels):
        raise ShapeError(f"{len(predictions)} predictions for {len(labels)} labels")
    tp = fp = fn = tn = 0
    for p, y in zip(predictions, labels):
        pred = is_positive(p.label if isinstance(p, Verdict) else p)
        truth = is_positive(y)
        tp += pred and truth
        fp += pred and not truth
        fn += truth and not pred
        tn += not pred and not truth
    return MetricsReport(tp, fp, fn, tn)


def write_verdicts(verdicts, path, provenance: dict | None = None):
    """Newline-delimited JSON, one record per verdict; an optional first provenance record."""
    with open(path, "w", encoding="utf-8") as fh:
        if provenance is not None:
            fh.write(json.dumps({"provenance": provenance}, sort_keys=True) + "\n")
        for v in verdicts:
            fh.write(json.dumps(v.to_dict(), sort_keys=True) + "\n")


def read_verdicts(path) -> list:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            if "provenance" in rec:
                continue
            out.append(Verdict(rec["node"], rec["gamma"], Detection(rec["class"]), rec["window_index"]))
    return out
