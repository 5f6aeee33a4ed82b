"""End-to-end benchmark plumbing shared by the CLI, scripts and tests.

A benchmark run fits one detector per measured node on normal training
windows, calibrates its thresholds on validation HIF windows and scores
the test windows, optionally fusing the nodes' verdicts per event.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import baselines, detect, picae
from .errors import CalibrationError, ConfigurationError
from .feedersim import Dataset, normalize_range

DETECTORS = ("picae", "ae", "pca", "er")


def arrays(ds: Dataset, split: str, node=None, label=None, normalize: bool = True) -> tuple:
    """Stack the selected windows as (V, C, labels, window_indices)."""
    ws = ds.select(split, node, label)
    if normalize:
        ws = [normalize_range(w) for w in ws]
    if not ws:
        return np.empty((0, ds.T)), np.empty((0, ds.T)), [], []
    V = np.stack([w.voltage for w in ws])
    C = np.stack([w.current for w in ws])
    return V, C, [w.label for w in ws], [w.window_index for w in ws]


@dataclass
class FittedDetector:
    kind: str
    node: int
    scorer: object
    train_errors: np.ndarray
    report: picae.TrainReport | None = None
    state: detect.DetectorState | None = None
    calibration_error: str | None = None


def fit_scorer(kind: str, V, C, train_config: picae.TrainConfig | None = None) -> tuple:
    """Fit one detector on normal windows; returns (scorer, train_errors, report)."""
    if kind in ("picae", "ae"):
        cfg = train_config or picae.TrainConfig()
        if kind == "ae":
            model, calib, report = baselines.ae_train(V, C, cfg)
        else:
            model, calib, report = picae.train(V, C, cfg)
        return baselines.CaeScorer(model, calib["epsilon_bar"]), report.train_errors, report
    if kind == "pca":
        model = baselines.pca_fit(V)
        return model, model.errors(V), None
    if kind == "er":
        model = baselines.er_fit(V, C)
        return model, model.errors(V, C), None
    raise ConfigurationError(f"unknown detector '{kind}', expected one of {DETECTORS}")


def fit_detector(kind: str, ds: Dataset, node: int, train_config=None, *, safety=1.0, margin=detect.XI2_MARGIN):
    V, C, _, _ = arrays(ds, "train", node)
    if len(V) == 0:
        raise ConfigurationError(f"no training windows for node {node}")
    scorer, errors, report = fit_scorer(kind, V, C, train_config)
    fitted = FittedDetector(kind, node, scorer, errors, report)
    return calibrate_detector(fitted, ds, safety=safety, margin=margin)


def calibrate_detector(fitted: FittedDetector, ds: Dataset, *, safety=1.0, margin=detect.XI2_MARGIN):
    """Attach thresholds; a detector whose validation HIFs fall inside the
    normal band keeps ``state=None`` and flags nothing as HIF."""
    Vv, Cv, _, _ = arrays(ds, "val", fitted.node)
    beta = fitted.report.beta_star if fitted.report is not None else getattr(fitted.scorer, "beta", None)
    try:
        state = detect.calibrate(
            fitted.node, fitted.scorer, fitted.train_errors, Vv, Cv, beta_star=beta, safety=safety, margin=margin
        )
        return replace(fitted, state=state, calibration_error=None)
    except CalibrationError as exc:
        return replace(fitted, state=None, calibration_error=str(exc))


def gammas(fitted: FittedDetector, V, C) -> np.ndarray:
    eps = float(np.mean(fitted.train_errors))
    return np.asarray(fitted.scorer.errors(V, C), dtype=np.float64) / eps


def local_verdicts(fitted: FittedDetector, ds: Dataset, split: str = "test") -> tuple:
    """Verdicts for one node's windows of ``split`` plus their true labels."""
    V, C, labels, idx = arrays(ds, split, fitted.node)
    if fitted.state is None:
        g = gammas(fitted, V, C)
        verdicts = [detect.Verdict(fitted.node, float(x), detect.Detection.NORMAL, int(w)) for x, w in zip(g, idx)]
    else:
        verdicts = detect.local_detect(fitted.state, V, C, idx)
    return verdicts, labels


@dataclass
class BenchResult:
    kind: str
    metrics: detect.MetricsReport
    verdicts: list
    labels: list
    detectors: dict = field(default_factory=dict)  # node -> FittedDetector

    def row(self) -> dict:
        return {"detector": self.kind, **self.metrics.to_dict()}


def fuse_and_score(detectors: dict, ds: Dataset, nodes=None, split: str = "test") -> BenchResult:
    """Max-gamma fusion over ``nodes`` (default: all fitted nodes)."""
    nodes = sorted(detectors) if nodes is None else sorted(nodes)
    per_node = {n: local_verdicts(detectors[n], ds, split) for n in nodes}
    states = {n: detectors[n].state for n in nodes}
    by_window: dict = {}
    truth: dict = {}
    for n in nodes:
        verdicts, labels = per_node[n]
        for v, y in zip(verdicts, labels):
            by_window.setdefault(v.window_index, []).append(v)
            truth[v.window_index] = y
    fused = []
    for w in sorted(by_window):
        group = by_window[w]
        best = detect.central_fuse(group)
        s = states[best.node]
        if s is not None:
            best = detect.Verdict(best.node, best.gamma, detect.classify(best.gamma, s.xi1, s.xi2), w)
        fused.append(best)
    labels = [truth[v.window_index] for v in fused]
    kind = detectors[nodes[0]].kind if nodes else "none"
    return BenchResult(kind, detect.evaluate(fused, labels), fused, labels, {n: detectors[n] for n in nodes})


def run_detector(kind: str, ds: Dataset, train_config=None, nodes=None, **kw) -> BenchResult:
    nodes = sorted({w.node for w in ds.select("train")}) if nodes is None else list(nodes)
    fitted = {n: fit_detector(kind, ds, n, train_config, **kw) for n in nodes}
    return fuse_and_score(fitted, ds, nodes)
