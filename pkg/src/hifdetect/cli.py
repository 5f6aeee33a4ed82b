"""Command-line entry point.

    hifdetect simulate  --out run --seed 0
    hifdetect train     --out run --detector picae
    hifdetect calibrate --out run --detector picae
    hifdetect detect    --out run --detector picae
    hifdetect evaluate  --out run --detector picae
    hifdetect sweep     --out sweep --seed 0
    hifdetect place     --out run -K 2
    hifdetect plot      --out run --detector picae

Everything lives under ``--out``.  A JSON ``--config`` file may carry the
sections ``dataset``, ``train``, ``sweep``, ``placement`` and ``detector``;
command-line flags override it.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, fields
from pathlib import Path

import jsonschema
import numpy as np

from . import baselines, bench, detect, feedersim, picae, placement
from .ellipse import EllipseParams
from .errors import CalibrationError, ConfigurationError, HifError

log = logging.getLogger("hifdetect")

SNR_GRID = (30.0, 50.0, 70.0, 90.0)
T_GRID = (256, 128, 64, 32, 16)
SWEEP_COLUMNS = ("detector", "snr_db", "T", "precision", "recall", "f1")

_PROVENANCE = {
    "type": "object",
    "required": ["tool", "version", "seed", "config_hash"],
    "properties": {
        "tool": {"const": "hifdetect"},
        "version": {"type": "string"},
        "seed": {"type": "integer"},
        "config_hash": {"type": "string"},
    },
}
_UNIT = {"type": "number", "minimum": 0, "maximum": 1}

SCHEMAS = {
    "manifest": {
        "type": "object",
        "required": ["schema_version", "seed", "T", "fs", "counts", "windows", "provenance"],
        "properties": {"T": {"type": "integer", "minimum": 5}, "provenance": _PROVENANCE},
    },
    "report": {
        "type": "object",
        "required": ["kind", "node", "epsilon_bar", "max_train_error", "provenance"],
        "properties": {"epsilon_bar": {"type": "number", "exclusiveMinimum": 0}, "provenance": _PROVENANCE},
    },
    "state": {
        "type": "object",
        "required": ["kind", "node", "model", "epsilon_bar", "xi1", "xi2", "provenance"],
        "properties": {
            "epsilon_bar": {"type": "number", "exclusiveMinimum": 0},
            "xi1": {"type": "number", "exclusiveMinimum": 0},
            "xi2": {"type": "number", "exclusiveMinimum": 0},
            "beta_star": {"type": ["array", "null"], "items": {"type": "number"}},
            "provenance": _PROVENANCE,
        },
    },
    "verdict": {
        "type": "object",
        "required": ["window_index", "node", "gamma", "class"],
        "properties": {
            "gamma": {"type": "number", "minimum": 0},
            "class": {"enum": [d.value for d in detect.Detection]},
        },
    },
    "metrics": {
        "type": "object",
        "required": ["detector", "precision", "recall", "f1", "tp", "fp", "fn", "tn", "provenance"],
        "properties": {"precision": _UNIT, "recall": _UNIT, "f1": _UNIT, "provenance": _PROVENANCE},
    },
    "placement": {
        "type": "object",
        "required": ["selected", "order", "total_dissimilarity", "provenance"],
        "properties": {
            "selected": {"type": "array", "items": {"type": "integer"}},
            "total_dissimilarity": {"type": "number", "minimum": 0},
            "provenance": _PROVENANCE,
        },
    },
}


# ---------------------------------------------------------------------------
# configuration


def _known(cls, d: dict, section: str) -> dict:
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ConfigurationError(f"unknown keys in '{section}': {sorted(unknown)}")
    return d


def resolve_config(args) -> dict:
    """Merge the JSON config file with flag overrides; flags win."""
    cfg = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigurationError(f"config file {path} does not exist")
        cfg = json.loads(path.read_text())
    dataset = dict(cfg.get("dataset", {}))
    train = dict(cfg.get("train", {}))
    sweep = dict(cfg.get("sweep", {}))
    place = dict(cfg.get("placement", {}))
    if args.seed is not None:
        cfg["seed"] = args.seed
    if "seed" not in cfg:
        raise ConfigurationError("a seed is required (--seed or 'seed' in the config file)")
    if args.nodes:
        dataset["measured_nodes"] = list(args.nodes)
    if args.snr_db is not None:
        dataset["snr_db"] = None if math.isinf(args.snr_db) else args.snr_db
    if args.lambda_r is not None:
        train["lambda_r"] = args.lambda_r
    if args.window_size is not None:
        cfg["window_size"] = args.window_size
    if getattr(args, "detector", None):
        cfg["detector"] = args.detector
    if getattr(args, "epochs", None):
        train["k_max"] = args.epochs
    _known(feedersim.DatasetConfig, dataset, "dataset")
    _known(picae.TrainConfig, train, "train")
    train.setdefault("seed", int(cfg["seed"]))
    feedersim.DatasetConfig(**dataset)  # validate early
    picae.TrainConfig(**train)
    return {
        "seed": int(cfg["seed"]),
        "detector": cfg.get("detector", "picae"),
        "window_size": cfg.get("window_size"),
        "dataset": dataset,
        "train": train,
        "sweep": sweep,
        "placement": place,
    }


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def provenance(cfg: dict) -> dict:
    return {"tool": "hifdetect", "version": feedersim.TOOL_VERSION, "seed": cfg["seed"], "config_hash": config_hash(cfg)}


# ---------------------------------------------------------------------------
# output bookkeeping


class Outputs:
    """Tracks files written by one command so a failure can remove them."""

    def __init__(self, root):
        self.root = Path(root)
        self.written: list = []

    def path(self, *parts) -> Path:
        p = self.root.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def add(self, path) -> Path:
        self.written.append(Path(path))
        return Path(path)

    def json(self, schema: str, obj: dict, *parts) -> Path:
        jsonschema.validate(obj, SCHEMAS[schema])
        p = self.path(*parts)
        self.add(p)
        p.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")
        return p

    def text(self, text: str, *parts) -> Path:
        p = self.path(*parts)
        self.add(p)
        p.write_text(text)
        return p

    def rollback(self):
        for p in self.written:
            if p.exists():
                p.unlink()


def _csv_text(rows, columns, prov: dict) -> str:
    buf = io.StringIO()
    buf.write(f"# tool={prov['tool']} version={prov['version']} seed={prov['seed']} config_hash={prov['config_hash']}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return x


# ---------------------------------------------------------------------------
# shared loading


def _dataset_dir(out: Outputs) -> Path:
    return out.root / "dataset"


def _load_dataset(out: Outputs) -> feedersim.Dataset:
    d = _dataset_dir(out)
    if not (d / feedersim.MANIFEST_FILE).is_file():
        raise ConfigurationError(f"no dataset under {d}; run 'hifdetect simulate' first")
    return feedersim.load_dataset(d)


def _nodes(cfg: dict, ds: feedersim.Dataset) -> list:
    nodes = cfg["dataset"].get("measured_nodes")
    have = sorted({w.node for w in ds.windows})
    if nodes is None:
        return have
    missing = set(nodes) - set(have)
    if missing:
        raise ConfigurationError(f"dataset has no windows for nodes {sorted(missing)}")
    return list(nodes)


def _model_name(kind: str, node: int) -> str:
    return f"{kind}_node{node}.ckpt"


def _load_scorer(out: Outputs, kind: str, node: int):
    path = out.root / "models" / _model_name(kind, node)
    if not path.is_file():
        raise ConfigurationError(f"missing model {path}; run 'hifdetect train' first")
    if kind in ("picae", "ae"):
        model, header = picae.load_model(path)
        return baselines.CaeScorer(model, header["epsilon_bar"]), header
    model, header = baselines.load_baseline(path)
    return model, header


def _load_state(out: Outputs, kind: str, node: int) -> detect.DetectorState:
    path = out.root / "states" / f"{kind}_node{node}.json"
    if not path.is_file():
        raise ConfigurationError(f"missing detector state {path}; run 'hifdetect calibrate' first")
    rec = json.loads(path.read_text())
    jsonschema.validate(rec, SCHEMAS["state"])
    scorer, _ = _load_scorer(out, kind, node)
    beta = EllipseParams(np.array(rec["beta_star"])) if rec.get("beta_star") else None
    return detect.DetectorState(node, scorer, rec["epsilon_bar"], rec["xi1"], rec["xi2"], beta)


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg: dict, out: Outputs) -> None:
    dcfg = feedersim.DatasetConfig(**cfg["dataset"])
    ds = feedersim.generate_dataset(dcfg, cfg["seed"])
    if cfg.get("window_size"):
        W = int(cfg["window_size"])
        if ds.T % W:
            raise ConfigurationError(f"window size {W} does not divide T={ds.T}")
        ds = feedersim.downsample_dataset(ds, ds.T // W)
    ds.manifest["provenance"] = provenance(cfg)
    jsonschema.validate(ds.manifest, SCHEMAS["manifest"])
    d = _dataset_dir(out)
    for name in (feedersim.DATA_FILE, feedersim.MANIFEST_FILE, feedersim.CSV_FILE):
        out.add(d / name)
    feedersim.save_dataset(ds, d, csv=True)
    log.info("wrote %d windows (T=%d) to %s", len(ds.windows), ds.T, d)


def cmd_train(cfg: dict, out: Outputs) -> None:
    ds = _load_dataset(out)
    kind = cfg["detector"]
    tcfg = picae.TrainConfig(**cfg["train"])
    prov = provenance(cfg)
    for node in _nodes(cfg, ds):
        V, C, _, _ = bench.arrays(ds, "train", node)
        if len(V) == 0:
            raise ConfigurationError(f"no training windows for node {node}")
        scorer, errors, report = bench.fit_scorer(kind, V, C, tcfg)
        eps = float(np.mean(errors))
        meta = {"node": node, "epsilon_bar": eps, "provenance": prov, "config": asdict(tcfg)}
        path = out.add(out.path("models", _model_name(kind, node)))
        if kind in ("picae", "ae"):
            picae.save_model(scorer.model, path, meta, kind=kind)
        else:
            baselines.save_baseline(scorer, path, meta)
        rec = {
            "kind": kind,
            "node": node,
            "epsilon_bar": eps,
            "max_train_error": float(np.max(errors)),
            "train_errors": [float(x) for x in errors],
            "provenance": prov,
        }
        if report is not None:
            rec.update({k: v for k, v in report.to_dict().items() if k not in rec})
        out.json("report", rec, "models", f"{kind}_node{node}.report.json")
        log.info("node %d: %s trained, epsilon_bar=%.4g", node, kind, eps)


def cmd_calibrate(cfg: dict, out: Outputs, safety: float = 1.0, margin: float = detect.XI2_MARGIN) -> None:
    ds = _load_dataset(out)
    kind = cfg["detector"]
    prov = provenance(cfg)
    for node in _nodes(cfg, ds):
        scorer, header = _load_scorer(out, kind, node)
        V, C, _, _ = bench.arrays(ds, "train", node)
        errors = np.asarray(scorer.errors(V, C))
        Vv, Cv, _, _ = bench.arrays(ds, "val", node)
        beta = getattr(scorer, "beta", None)
        if beta is None and kind in ("picae", "ae"):
            beta = picae.pooled_beta(V, C)
        state = detect.calibrate(node, scorer, errors, Vv, Cv, beta_star=beta, safety=safety, margin=margin)
        rec = {
            "kind": kind,
            "node": node,
            "model": str(Path("models") / _model_name(kind, node)),
            **state.thresholds(),
            "beta_star": [float(x) for x in state.beta_star.beta] if state.beta_star is not None else None,
            "provenance": prov,
        }
        out.json("state", rec, "states", f"{kind}_node{node}.json")
        log.info("node %d: xi1=%.4g xi2=%.4g", node, state.xi1, state.xi2)


def _fused_verdicts(cfg: dict, out: Outputs, ds: feedersim.Dataset, split: str = "test"):
    kind = cfg["detector"]
    nodes = _nodes(cfg, ds)
    states = {n: _load_state(out, kind, n) for n in nodes}
    by_window, truth, local = {}, {}, {}
    for n in nodes:
        V, C, labels, idx = bench.arrays(ds, split, n)
        local[n] = detect.local_detect(states[n], V, C, idx)
        for v, y in zip(local[n], labels):
            by_window.setdefault(v.window_index, []).append(v)
            truth[v.window_index] = y
    fused = [detect.central_fuse(by_window[w], states) for w in sorted(by_window)]
    return local, fused, [truth[v.window_index] for v in fused]


def cmd_detect(cfg: dict, out: Outputs) -> None:
    ds = _load_dataset(out)
    kind = cfg["detector"]
    local, fused, _ = _fused_verdicts(cfg, out, ds)
    prov = provenance(cfg)
    for n, vs in local.items():
        _write_verdicts(out, vs, prov, "verdicts", f"{kind}_node{n}.ndjson")
    _write_verdicts(out, fused, prov, "verdicts", f"{kind}_fused.ndjson")
    counts = {d.value: sum(v.label is d for v in fused) for d in detect.Detection}
    log.info("fused verdicts: %s", counts)


def _write_verdicts(out: Outputs, verdicts, prov, *parts):
    for v in verdicts:
        jsonschema.validate(v.to_dict(), SCHEMAS["verdict"])
    path = out.add(out.path(*parts))
    detect.write_verdicts(verdicts, path, prov)


def cmd_evaluate(cfg: dict, out: Outputs) -> detect.MetricsReport:
    ds = _load_dataset(out)
    kind = cfg["detector"]
    path = out.root / "verdicts" / f"{kind}_fused.ndjson"
    if not path.is_file():
        raise ConfigurationError(f"missing verdicts {path}; run 'hifdetect detect' first")
    verdicts = detect.read_verdicts(path)
    label_of = {w.window_index: w.label for w in ds.select("test")}
    missing = [v.window_index for v in verdicts if v.window_index not in label_of]
    if missing:
        raise ConfigurationError(f"verdicts reference unknown windows {missing[:5]}")
    report = detect.evaluate(verdicts, [label_of[v.window_index] for v in verdicts])
    out.json("metrics", {"detector": kind, **report.to_dict(), "provenance": provenance(cfg)}, "metrics", f"{kind}.json")
    print(report.table())
    return report


def _sweep_cell(args) -> list:
    cfg, snr, factors, detectors = args
    dcfg = dict(cfg["dataset"], snr_db=snr)
    ds = feedersim.generate_dataset(feedersim.DatasetConfig(**dcfg), cfg["seed"])
    tcfg = picae.TrainConfig(**cfg["train"])
    rows = []
    for factor in factors:
        sub = feedersim.downsample_dataset(ds, factor)
        for kind in detectors:
            res = bench.run_detector(kind, sub, tcfg, cfg["dataset"].get("measured_nodes"))
            m = res.metrics
            rows.append(
                {"detector": kind, "snr_db": snr, "T": sub.T, "precision": m.precision, "recall": m.recall, "f1": m.f1}
            )
    return rows


def sweep_rows(cfg: dict, workers: int = 1) -> list:
    sw = cfg["sweep"]
    snrs = [float(x) for x in sw.get("snr_db", SNR_GRID)]
    Ts = [int(x) for x in sw.get("T", T_GRID)]
    detectors = list(sw.get("detectors", bench.DETECTORS))
    for k in detectors:
        if k not in bench.DETECTORS:
            raise ConfigurationError(f"unknown detector '{k}'")
    base_T = feedersim.DatasetConfig(**cfg["dataset"]).T
    factors = []
    for T in Ts:
        if base_T % T:
            raise ConfigurationError(f"T={T} does not divide the simulated window length {base_T}")
        factors.append(base_T // T)
    jobs = [(cfg, snr, factors, detectors) for snr in snrs]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_cell, jobs))
    else:
        results = [_sweep_cell(j) for j in jobs]
    return [r for rows in results for r in rows]


def cmd_sweep(cfg: dict, out: Outputs, workers: int = 1) -> list:
    rows = sweep_rows(cfg, workers)
    out.text(_csv_text(rows, SWEEP_COLUMNS, provenance(cfg)), "sweep.csv")
    for r in rows:
        log.info("%-6s snr=%5.1f T=%4d f1=%.3f", r["detector"], r["snr_db"], r["T"], r["f1"])
    return rows


def _feeder(cfg: dict) -> feedersim.FeederModel:
    spec = cfg["placement"].get("feeder", "nine_node")
    if spec == "nine_node":
        return feedersim.nine_node_feeder()
    if spec == "four_node":
        return feedersim.four_node_feeder()
    path = Path(spec)
    if not path.is_file():
        raise ConfigurationError(f"feeder file {path} does not exist")
    return feedersim.FeederModel.from_json(path.read_text())


def cmd_place(cfg: dict, out: Outputs, K: int = 2) -> placement.PlacementResult:
    feeder = _feeder(cfg)
    K = int(cfg["placement"].get("K", K))
    T = int(cfg.get("window_size") or feedersim.SAMPLES_PER_CYCLE)
    fs = T * feeder.frequency
    D = placement.feeder_dissimilarity(feeder, fs, T)
    res = placement.greedy_place(D, K)
    rec = {**res.to_dict(), "K": K, "provenance": provenance(cfg)}
    out.json("placement", rec, "placement.json")
    print(json.dumps(res.to_dict(), sort_keys=True))
    return res


# --- plots -----------------------------------------------------------------------

_COLOURS = {"Normal": "#1f77b4", "HIF": "#d62728", "CapacitorSwitch": "#2ca02c", "LoadSwitch": "#9467bd"}


def _svg(panels: list, title: str, width=420, height=320) -> str:
    """Minimal SVG: each panel is (label, xs, ys, kind) with kind 'line' or 'bar'."""
    allx = np.concatenate([np.asarray(p[1], float) for p in panels]) if panels else np.zeros(1)
    ally = np.concatenate([np.asarray(p[2], float) for p in panels]) if panels else np.zeros(1)
    x0, x1 = float(allx.min()), float(allx.max()) or 1.0
    y0, y1 = float(min(ally.min(), 0)), float(ally.max()) or 1.0
    sx = lambda x: 40 + (x - x0) / ((x1 - x0) or 1.0) * (width - 60)  # noqa: E731
    sy = lambda y: height - 30 - (y - y0) / ((y1 - y0) or 1.0) * (height - 60)  # noqa: E731
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{width / 2}" y="16" text-anchor="middle" font-size="12">{title}</text>',
        f'<rect x="40" y="30" width="{width - 60}" height="{height - 60}" fill="none" stroke="#888"/>',
    ]
    for i, (label, xs, ys, kind) in enumerate(panels):
        colour = _COLOURS.get(label, "#333")
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
        if kind == "bar":
            pts = " ".join(
                f"{sx(x):.2f},{sy(0):.2f} {sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys)
            )
        parts.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1" points="{pts}"/>')
        parts.append(f'<text x="{width - 15}" y="{44 + 14 * i}" text-anchor="end" font-size="10" fill="{colour}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_plot(cfg: dict, out: Outputs, bins: int = 30) -> None:
    ds = _load_dataset(out)
    kind = cfg["detector"]
    prov = provenance(cfg)
    node = _nodes(cfg, ds)[0]
    # (a) one v-c trajectory per class
    traj_rows, panels = [], []
    for label in feedersim.Label:
        ws = ds.select("test", node, label) or ds.select("train", node, label)
        if not ws:
            continue
        w = feedersim.normalize_range(ws[0])
        for k in range(w.T):
            traj_rows.append({"class": label.value, "window_index": w.window_index, "sample": k,
                              "voltage": float(w.voltage[k]), "current": float(w.current[k])})
        panels.append((label.value, w.current, w.voltage, "line"))
    out.text(_csv_text(traj_rows, ("class", "window_index", "sample", "voltage", "current"), prov),
             "plots", "trajectories.csv")
    out.text(_svg(panels, f"node {node}: voltage against current"), "plots", "trajectories.svg")

    # (b) log10 gamma histograms per class
    state = _load_state(out, kind, node)
    V, C, labels, _ = bench.arrays(ds, "test", node)
    g = np.atleast_1d(detect.confidence(state, V, C))
    lg = np.log10(np.maximum(g, 1e-12))
    edges = np.linspace(lg.min(), lg.max() + 1e-9, bins + 1)
    hist_rows, panels = [], []
    for label in feedersim.Label:
        sel = np.array([y == label for y in labels])
        if not sel.any():
            continue
        counts, _ = np.histogram(lg[sel], edges)
        prob = counts / sel.sum()
        for lo, hi, p in zip(edges[:-1], edges[1:], prob):
            hist_rows.append({"class": label.value, "log10_gamma_lo": float(lo), "log10_gamma_hi": float(hi),
                              "probability": float(p)})
        panels.append((label.value, 0.5 * (edges[:-1] + edges[1:]), prob, "line"))
    out.text(_csv_text(hist_rows, ("class", "log10_gamma_lo", "log10_gamma_hi", "probability"), prov),
             "plots", f"gamma_{kind}.csv")
    out.text(_svg(panels, f"{kind}: log10 gamma by class"), "plots", f"gamma_{kind}.svg")


# ---------------------------------------------------------------------------
# argument parsing


def _node_list(text: str) -> list:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad node list '{text}'") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--nodes", type=_node_list, help="comma separated measured nodes")
    common.add_argument("--snr-db", type=float, help="measurement SNR in dB (inf for clean)")
    common.add_argument("--lambda-r", type=float, help="ellipse penalty weight")
    common.add_argument("--window-size", type=int, help="samples per window after downsampling")
    common.add_argument("-v", "--verbose", action="store_true")

    det = argparse.ArgumentParser(add_help=False)
    det.add_argument("--detector", choices=bench.DETECTORS, help="detector kind (default picae)")

    ap = argparse.ArgumentParser(prog="hifdetect", description="High impedance fault detection toolkit")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="generate a labelled dataset")
    p = sub.add_parser("train", parents=[common, det], help="train one detector per node")
    p.add_argument("--epochs", type=int, help="override k_max")
    p = sub.add_parser("calibrate", parents=[common, det], help="set thresholds from training and validation")
    p.add_argument("--safety", type=float, default=1.0, help="factor applied to xi1")
    p.add_argument("--margin", type=float, default=detect.XI2_MARGIN, help="factor applied to xi2")
    sub.add_parser("detect", parents=[common, det], help="score the test windows and fuse nodes")
    sub.add_parser("evaluate", parents=[common, det], help="precision, recall and F1 of fused verdicts")
    p = sub.add_parser("sweep", parents=[common], help="F1 over the SNR and window-size grid")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--epochs", type=int, help="override k_max")
    p = sub.add_parser("place", parents=[common], help="greedy sensor placement")
    p.add_argument("-K", type=int, default=2)
    sub.add_parser("plot", parents=[common, det], help="trajectory and gamma histogram files")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out = Outputs(args.out)
    try:
        cfg = resolve_config(args)
        if args.command == "simulate":
            cmd_simulate(cfg, out)
        elif args.command == "train":
            cmd_train(cfg, out)
        elif args.command == "calibrate":
            cmd_calibrate(cfg, out, args.safety, args.margin)
        elif args.command == "detect":
            cmd_detect(cfg, out)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, out)
        elif args.command == "sweep":
            cmd_sweep(cfg, out, args.workers)
        elif args.command == "place":
            cmd_place(cfg, out, args.K)
        elif args.command == "plot":
            cmd_plot(cfg, out)
    except (HifError, jsonschema.ValidationError, OSError, json.JSONDecodeError, TypeError) as exc:
        out.rollback()
        if isinstance(exc, CalibrationError):
            print(f"hifdetect {args.command}: calibration failed: {exc}", file=sys.stderr)
        else:
            print(f"hifdetect {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
