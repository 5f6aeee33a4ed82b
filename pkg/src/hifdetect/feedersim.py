"""Synthetic voltage/current waveforms on a small radial feeder.

Steady state comes from a single-phase backward/forward phasor sweep.
Disturbances (high impedance faults, capacitor and load switching) are
superposed on the steady-state sinusoids quasi-statically: a fault current
``i_f`` drawn at one node changes the voltage of every node by the drop it
causes over the series impedance shared with the source path.
"""
from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    DegeneracyError,
    ParameterError,
    SamplingError,
    ScheduleError,
    SolverError,
    TopologyError,
)

SCHEMA_VERSION = 1
TOOL_VERSION = "0.1.0"

F0_DEFAULT = 60.0
SAMPLES_PER_CYCLE = 512
FS_DEFAULT = F0_DEFAULT * SAMPLES_PER_CYCLE  # 30.72 kHz
STRIDE_DEFAULT = 128

# switching-transient shape defaults
RING_FREQUENCY = 600.0  # Hz
RING_DAMPING = 300.0  # 1/s
RING_REFERENCE_VAR = 5e5  # var; a bank this size rings at 1 pu
BLEND_CYCLES = 1.0


class Label(str, enum.Enum):
    NORMAL = "Normal"
    HIF = "HIF"
    CAP = "CapacitorSwitch"
    LOAD = "LoadSwitch"


# ---------------------------------------------------------------------------
# feeder topology


@dataclass(frozen=True)
class Line:
    frm: int
    to: int
    R: float
    L: float


@dataclass
class FeederModel:
    nodes: list
    lines: list
    source_node: int
    vrms: float
    frequency: float = F0_DEFAULT
    loads: dict = field(default_factory=dict)  # node -> complex VA

    def __post_init__(self):
        self.nodes = [int(n) for n in self.nodes]
        self.lines = [ln if isinstance(ln, Line) else Line(*ln) for ln in self.lines]
        self.loads = {int(k): complex(v) for k, v in self.loads.items()}
        if len(set(self.nodes)) != len(self.nodes):
            raise TopologyError("duplicate node ids")
        if self.source_node not in self.nodes:
            raise TopologyError(f"source node {self.source_node} not in nodes")
        if self.frequency <= 0:
            raise ParameterError("source frequency must be positive")
        if self.vrms <= 0:
            raise ParameterError("source voltage must be positive")
        for ln in self.lines:
            if ln.R <= 0 or ln.L < 0:
                raise ParameterError(f"line {ln.frm}-{ln.to} needs R > 0 and L >= 0")
            if ln.frm not in self.nodes or ln.to not in self.nodes:
                raise TopologyError(f"line {ln.frm}-{ln.to} references an unknown node")
        for n in self.loads:
            if n not in self.nodes:
                raise TopologyError(f"load at unknown node {n}")
        if len(self.lines) != len(self.nodes) - 1:
            raise TopologyError("a radial feeder has exactly n-1 lines")
        self._build_tree()

    def _build_tree(self):
        adj = {n: [] for n in self.nodes}
        for ln in self.lines:
            adj[ln.frm].append((ln.to, ln))
            adj[ln.to].append((ln.frm, ln))
        parent, upline, order = {self.source_node: None}, {}, [self.source_node]
        i = 0
        while i < len(order):
            n = order[i]
            for m, ln in sorted(adj[n], key=lambda t: t[0]):
                if m in parent:
                    continue
                parent[m] = n
                upline[m] = ln
                order.append(m)
            i += 1
        if len(order) != len(self.nodes):
            raise TopologyError("feeder is not connected")
        self._parent = parent
        self._upline = upline
        self._order = order
        self._children = {n: [m for m in order if parent.get(m) == n] for n in self.nodes}

    @property
    def omega(self) -> float:
        return 2 * math.pi * self.frequency

    @property
    def order(self) -> list:
        """Nodes in breadth-first order from the source."""
        return list(self._order)

    def parent(self, node):
        self._check(node)
        return self._parent[node]

    def children(self, node) -> list:
        self._check(node)
        return list(self._children[node])

    def neighbors(self, node) -> list:
        self._check(node)
        out = list(self._children[node])
        if self._parent[node] is not None:
            out.append(self._parent[node])
        return sorted(out)

    def edges(self) -> list:
        return sorted((min(ln.frm, ln.to), max(ln.frm, ln.to)) for ln in self.lines)

    def _check(self, node):
        if node not in self._parent:
            raise TopologyError(f"unknown node {node}")

    def path(self, node) -> list:
        """Nodes from the source to ``node`` inclusive."""
        self._check(node)
        out = [node]
        while self._parent[out[-1]] is not None:
            out.append(self._parent[out[-1]])
        return out[::-1]

    def path_impedance(self, node) -> tuple:
        """Series (R, L) from the source to ``node``."""
        return self.shared_impedance(node, node)

    def shared_impedance(self, a, b) -> tuple:
        """Series (R, L) of the lines common to the source paths of a and b."""
        common = set(self.path(a)[1:]) & set(self.path(b)[1:])
        R = sum(self._upline[n].R for n in common)
        L = sum(self._upline[n].L for n in common)
        return R, L

    def with_load(self, node, delta) -> "FeederModel":
        self._check(node)
        loads = dict(self.loads)
        loads[node] = loads.get(node, 0j) + complex(delta)
        return replace(self, loads=loads)

    def scaled_loads(self, factor: float) -> "FeederModel":
        return replace(self, loads={n: s * factor for n, s in self.loads.items()})

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "source": {"node": self.source_node, "vrms": self.vrms, "frequency": self.frequency},
            "lines": [{"from": ln.frm, "to": ln.to, "R": ln.R, "L": ln.L} for ln in self.lines],
            "loads": {str(n): [s.real, s.imag] for n, s in sorted(self.loads.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeederModel":
        src = d["source"]
        return cls(
            nodes=d["nodes"],
            lines=[Line(int(x["from"]), int(x["to"]), float(x["R"]), float(x["L"])) for x in d["lines"]],
            source_node=int(src["node"]),
            vrms=float(src["vrms"]),
            frequency=float(src.get("frequency", F0_DEFAULT)),
            loads={int(k): complex(v[0], v[1]) for k, v in d.get("loads", {}).items()},
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FeederModel":
        return cls.from_dict(json.loads(text))


V_LN_24_9KV = 24.9e3 / math.sqrt(3)


def four_node_feeder() -> FeederModel:
    """Four-node chain: source 1, lines 1-2, 2-3, 3-4, loads at 2..4.

    Long, light rural sections so that fault currents of a few tens of
    amperes leave a visible voltage signature.
    """
    return FeederModel(
        nodes=[1, 2, 3, 4],
        lines=[Line(1, 2, 12.0, 3.0e-3), Line(2, 3, 12.0, 3.0e-3), Line(3, 4, 8.0, 2.0e-3)],
        source_node=1,
        vrms=V_LN_24_9KV,
        loads={2: 120e3 + 40e3j, 3: 150e3 + 60e3j, 4: 200e3 + 80e3j},
    )


def nine_node_feeder() -> FeederModel:
    """Branched radial feeder used for placement and fusion experiments.

    Trunk 1-2-3-4-5 with laterals 2-9, 3-6-7 and 4-8.
    """
    return FeederModel(
        nodes=list(range(1, 10)),
        lines=[
            Line(1, 2, 6.0, 1.5e-3),
            Line(2, 3, 10.0, 2.5e-3),
            Line(3, 4, 10.0, 2.5e-3),
            Line(4, 5, 8.0, 2.0e-3),
            Line(3, 6, 9.0, 2.2e-3),
            Line(6, 7, 7.0, 1.8e-3),
            Line(4, 8, 9.0, 2.2e-3),
            Line(2, 9, 5.0, 1.2e-3),
        ],
        source_node=1,
        vrms=V_LN_24_9KV,
        loads={
            2: 40e3 + 15e3j,
            3: 60e3 + 25e3j,
            4: 50e3 + 20e3j,
            5: 80e3 + 30e3j,
            6: 40e3 + 15e3j,
            7: 70e3 + 30e3j,
            8: 60e3 + 25e3j,
            9: 50e3 + 20e3j,
        },
    )


# ---------------------------------------------------------------------------
# steady state


@dataclass(frozen=True)
class Phasor:
    V0: float
    C0: float
    phi: float

    def __post_init__(self):
        if not self.V0 > 0 or not self.C0 > 0:
            raise DegeneracyError(f"amplitudes must be positive (V0={self.V0}, C0={self.C0})")
        if not 0 < self.phi < math.pi:
            raise DegeneracyError(f"phase lag {self.phi} outside (0, pi)")


def solve_phasors(feeder: FeederModel, tol: float = 1e-9, max_iter: int = 100) -> tuple:
    """Backward/forward sweep for constant-power loads.

    Returns ``(V, I)``: complex rms node voltages and the current on each
    node's upstream line (for the source node, the total feed).
    """
    order = feeder._order
    Vs = complex(feeder.vrms, 0.0)
    V = {n: Vs for n in order}
    Z = {n: complex(ln.R, feeder.omega * ln.L) for n, ln in feeder._upline.items()}
    for _ in range(max_iter):
        I = {}
        for n in reversed(order):
            s = feeder.loads.get(n, 0j)
            inj = (s / V[n]).conjugate() if s else 0j
            I[n] = inj + sum((I[ch] for ch in feeder._children[n]), 0j)
        newV = {feeder.source_node: Vs}
        for n in order[1:]:
            newV[n] = newV[feeder._parent[n]] - Z[n] * I[n]
        change = max(abs(newV[n] - V[n]) for n in order) / abs(Vs)
        V = newV
        if not all(math.isfinite(abs(x)) for x in V.values()):
            break
        if change < tol:
            I = {}
            for n in reversed(order):
                s = feeder.loads.get(n, 0j)
                inj = (s / V[n]).conjugate() if s else 0j
                I[n] = inj + sum((I[ch] for ch in feeder._children[n]), 0j)
            return V, I
    raise SolverError(f"phasor sweep did not converge in {max_iter} iterations")


def steady_state(feeder: FeederModel, node) -> Phasor:
    """Peak voltage, upstream-line peak current and phase lag at ``node``."""
    feeder._check(node)
    V, I = solve_phasors(feeder)
    v, i = V[node], I[node]
    if abs(i) == 0:
        raise DegeneracyError(f"no current flows at node {node}")
    phi = math.remainder(np.angle(v) - np.angle(i), 2 * math.pi)
    if abs(math.sin(phi)) < 1e-12 or phi <= 0:
        raise DegeneracyError(f"phase lag {phi:.3g} at node {node} gives no ellipse")
    return Phasor(math.sqrt(2) * abs(v), math.sqrt(2) * abs(i), phi)


def synth_waveform(phasor: Phasor, fs: float, n_samples: int, f0: float = F0_DEFAULT) -> tuple:
    if fs < 2 * f0:
        raise SamplingError(f"fs={fs} is below the Nyquist rate for f0={f0}")
    if n_samples < 1:
        raise SamplingError("n_samples must be >= 1")
    theta = 2 * np.pi * f0 * np.arange(n_samples) / fs
    return phasor.V0 * np.cos(theta), phasor.C0 * np.cos(theta - phasor.phi)


def _waveform(z: complex, theta: np.ndarray) -> np.ndarray:
    return math.sqrt(2) * abs(z) * np.cos(theta + np.angle(z))


# ---------------------------------------------------------------------------
# streams


@dataclass(frozen=True)
class EventInterval:
    label: Label
    start: int
    stop: int  # exclusive
    node: int
    params: dict = field(default_factory=dict)


@dataclass
class Streams:
    fs: float
    f0: float
    voltage: dict
    current: dict
    events: list = field(default_factory=list)

    @property
    def n_samples(self) -> int:
        return len(next(iter(self.voltage.values())))


def _check_sampling(fs, f0, n):
    if fs < 2 * f0:
        raise SamplingError(f"fs={fs} is below the Nyquist rate for f0={f0}")
    if n < 1:
        raise SamplingError("stream must have at least one sample")


def _phasor_streams(feeder, V, I, theta, nodes) -> tuple:
    return (
        {n: _waveform(V[n], theta) for n in nodes},
        {n: _waveform(I[n], theta) for n in nodes},
    )


def normal_streams(feeder: FeederModel, fs: float, n_samples: int, phase0: float = 0.0, nodes=None) -> Streams:
    _check_sampling(fs, feeder.frequency, n_samples)
    nodes = feeder.order if nodes is None else list(nodes)
    for n in nodes:
        feeder._check(n)
    V, I = solve_phasors(feeder)
    theta = 2 * np.pi * feeder.frequency * np.arange(n_samples) / fs + phase0
    v, c = _phasor_streams(feeder, V, I, theta, nodes)
    return Streams(fs, feeder.frequency, v, c)


# --- high impedance fault ---------------------------------------------------


class HifSample(NamedTuple):
    Rp: float
    Rn: float
    Vp: float
    Vn: float  # signed, negative


@dataclass(frozen=True)
class HifParams:
    """Ranges for the two-diode arc model; voltages stored as magnitudes."""

    Rp_range: tuple = (600.0, 1400.0)
    Rn_range: tuple = (600.0, 1400.0)
    Vp_range: tuple = (5e3, 6e3)
    Vn_range: tuple = (7e3, 8e3)
    resample_rate: float = 1000.0

    def __post_init__(self):
        for name in ("Rp_range", "Rn_range", "Vp_range", "Vn_range"):
            lo, hi = getattr(self, name)
            if not (lo > 0 and lo <= hi):
                raise ParameterError(f"{name} must satisfy 0 < min <= max, got {(lo, hi)}")
        if not self.resample_rate > 0:
            raise ParameterError("resample_rate must be positive")

    def draw(self, rng: np.random.Generator) -> HifSample:
        u = rng.uniform(size=4)
        lerp = lambda r, t: r[0] + (r[1] - r[0]) * t  # noqa: E731
        return HifSample(
            lerp(self.Rp_range, u[0]),
            lerp(self.Rn_range, u[1]),
            lerp(self.Vp_range, u[2]),
            -lerp(self.Vn_range, u[3]),
        )


def _check_hif_sample(p: HifSample):
    if not (p.Rp > 0 and p.Rn > 0):
        raise ParameterError(f"arc resistances must be positive, got Rp={p.Rp}, Rn={p.Rn}")
    if not (p.Vp > 0 > p.Vn):
        raise ParameterError(f"need Vp > 0 > Vn, got Vp={p.Vp}, Vn={p.Vn}")


def hif_step(v_fault: float, prev_v: float, params: HifSample) -> tuple:
    """One sample of the two-diode arc: returns ``(i_fault, v_held)``.

    Above ``Vp`` the positive diode conducts, below ``Vn`` the negative one
    does; in between the arc is quenched, no current flows and the
    fault-point voltage holds its previous value.
    """
    _check_hif_sample(params)
    if v_fault > params.Vp:
        return (v_fault - params.Vp) / params.Rp, v_fault
    if v_fault < params.Vn:
        return (v_fault - params.Vn) / params.Rn, v_fault
    return 0.0, prev_v


def arc_current(v, Rp, Rn, Vp, Vn) -> np.ndarray:
    """Vectorised arc current of :func:`hif_step` (parameters may be arrays)."""
    v = np.asarray(v, dtype=np.float64)
    return np.where(v > Vp, (v - Vp) / Rp, np.where(v < Vn, (v - Vn) / Rn, 0.0))


def redraw_period(fs: float, rate: float) -> int:
    """Samples between arc-parameter redraws."""
    return max(1, math.ceil(fs / rate))


def _superpose_fault_current(feeder, streams, fault_node, i_f, fs):
    """Add a fault current drawn at ``fault_node`` to every recorded node."""
    di = np.diff(i_f, prepend=0.0) * fs
    on_path = set(feeder.path(fault_node))
    for n in streams.voltage:
        R, L = feeder.shared_impedance(n, fault_node)
        if R or L:
            streams.voltage[n] = streams.voltage[n] - (R * i_f + L * di)
        if n in on_path:
            streams.current[n] = streams.current[n] + i_f
    return streams


def inject_hif(
    feeder: FeederModel,
    fault_node,
    hif: HifParams,
    fs: float,
    duration: float,
    seed,
    *,
    t_on: int = 0,
    phase0: float = 0.0,
    nodes=None,
) -> Streams:
    """Streams with an arcing high impedance fault at ``fault_node`` from ``t_on``."""
    feeder._check(fault_node)
    n = int(round(duration * fs))
    if n < fs / feeder.frequency - 1e-9:
        raise ScheduleError("duration must cover at least one fundamental cycle")
    if not 0 <= t_on < n:
        raise ScheduleError(f"fault onset {t_on} outside stream of {n} samples")
    streams = normal_streams(feeder, fs, n, phase0, nodes)
    V, _ = solve_phasors(feeder)
    theta = 2 * np.pi * feeder.frequency * np.arange(n) / fs + phase0
    v_fault = _waveform(V[fault_node], theta)

    rng = np.random.default_rng(seed)
    period = redraw_period(fs, hif.resample_rate)
    n_draws = math.ceil((n - t_on) / period)
    draws = np.array([hif.draw(rng) for _ in range(n_draws)]).reshape(n_draws, 4)
    idx = (np.arange(n - t_on) // period)
    p = draws[idx]
    i_f = np.zeros(n)
    i_f[t_on:] = arc_current(v_fault[t_on:], p[:, 0], p[:, 1], p[:, 2], p[:, 3])

    _superpose_fault_current(feeder, streams, fault_node, i_f, fs)
    streams.events.append(EventInterval(Label.HIF, t_on, n, fault_node, {"seed": _jsonable_seed(seed)}))
    return streams


def _jsonable_seed(seed):
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    if isinstance(seed, np.random.SeedSequence):
        return [int(x) for x in np.atleast_1d(seed.entropy)] + [int(x) for x in seed.spawn_key]
    return str(seed)


# --- switching events -------------------------------------------------------


def _blend(pre: Streams, post: Streams, w: np.ndarray) -> Streams:
    for n in pre.voltage:
        pre.voltage[n] = (1 - w) * pre.voltage[n] + w * post.voltage[n]
        pre.current[n] = (1 - w) * pre.current[n] + w * post.current[n]
    return pre


def inject_cap_switch(
    feeder: FeederModel,
    node,
    q_var: float,
    t_on: int,
    damping: float = RING_DAMPING,
    f_ring: float = RING_FREQUENCY,
    *,
    fs: float = FS_DEFAULT,
    n_samples: int = 3 * SAMPLES_PER_CYCLE,
    phase0: float = 0.0,
    nodes=None,
    ring_reference: float = RING_REFERENCE_VAR,
) -> Streams:
    """Energise a shunt capacitor bank of ``q_var`` at ``t_on``.

    Node voltages ring at ``f_ring`` with amplitude proportional to the
    bank size (attenuated by the share of path impedance), and the steady
    state switches to the compensated operating point.
    """
    feeder._check(node)
    if not q_var >= 0:
        raise ParameterError("q_var must be non-negative")
    if not 0 <= t_on < n_samples:
        raise ScheduleError(f"switching instant {t_on} outside stream of {n_samples} samples")
    pre = normal_streams(feeder, fs, n_samples, phase0, nodes)
    if q_var == 0:
        pre.events.append(EventInterval(Label.CAP, t_on, n_samples, node, {"q_var": 0.0}))
        return pre
    post = normal_streams(feeder.with_load(node, -1j * q_var), fs, n_samples, phase0, nodes)
    w = (np.arange(n_samples) >= t_on).astype(np.float64)
    out = _blend(pre, post, w)

    V, _ = solve_phasors(feeder)
    A = math.sqrt(2) * abs(V[node]) * q_var / ring_reference
    R_node, L_node = feeder.path_impedance(node)
    z_node = abs(complex(R_node, feeder.omega * L_node))
    k = np.arange(n_samples) - t_on
    tau = np.where(k >= 0, k, 0) / fs
    ring = np.where(k >= 0, np.exp(-damping * tau) * np.cos(2 * np.pi * f_ring * tau), 0.0)
    for n in out.voltage:
        R, L = feeder.shared_impedance(n, node)
        share = abs(complex(R, feeder.omega * L)) / z_node
        if share:
            out.voltage[n] = out.voltage[n] - share * A * ring
    out.events.append(
        EventInterval(Label.CAP, t_on, n_samples, node, {"q_var": float(q_var), "damping": damping, "f_ring": f_ring})
    )
    return out


def inject_load_switch(
    feeder: FeederModel,
    node,
    delta_power: complex,
    t_on: int,
    *,
    fs: float = FS_DEFAULT,
    n_samples: int = 3 * SAMPLES_PER_CYCLE,
    phase0: float = 0.0,
    nodes=None,
    blend_cycles: float = BLEND_CYCLES,
) -> Streams:
    """Step the load at ``node`` by ``delta_power`` with an exponential blend.

    The blend reaches 1 - e^-5 of the new operating point after
    ``blend_cycles`` fundamental cycles.
    """
    feeder._check(node)
    if not 0 <= t_on < n_samples:
        raise ScheduleError(f"switching instant {t_on} outside stream of {n_samples} samples")
    pre = normal_streams(feeder, fs, n_samples, phase0, nodes)
    if complex(delta_power) == 0:
        pre.events.append(EventInterval(Label.LOAD, t_on, n_samples, node, {"delta_power": [0.0, 0.0]}))
        return pre
    post = normal_streams(feeder.with_load(node, delta_power), fs, n_samples, phase0, nodes)
    k = np.arange(n_samples) - t_on
    tau = blend_cycles * fs / feeder.frequency / 5.0
    w = np.where(k >= 0, 1.0 - np.exp(-np.maximum(k, 0) / tau), 0.0)
    out = _blend(pre, post, w)
    d = complex(delta_power)
    out.events.append(EventInterval(Label.LOAD, t_on, n_samples, node, {"delta_power": [d.real, d.imag]}))
    return out


# ---------------------------------------------------------------------------
# windows


@dataclass(frozen=True)
class Window:
    node: int
    voltage: np.ndarray
    current: np.ndarray
    fs: float
    label: Label = Label.NORMAL
    window_index: int = 0
    start: int = 0
    # affine maps x_norm = (x - mid) / half, per channel; None when raw
    v_norm: tuple | None = None
    c_norm: tuple | None = None

    def __post_init__(self):
        v = np.asarray(self.voltage, dtype=np.float64)
        c = np.asarray(self.current, dtype=np.float64)
        if v.ndim != 1 or v.shape != c.shape:
            raise ParameterError("voltage and current must be 1-D with equal length")
        if v.size < 5:
            raise ParameterError("a window needs at least 5 samples")
        if not self.fs > 0:
            raise ParameterError("fs must be positive")
        object.__setattr__(self, "voltage", v)
        object.__setattr__(self, "current", c)
        object.__setattr__(self, "label", Label(self.label))

    @property
    def T(self) -> int:
        return self.voltage.size

    @property
    def normalized(self) -> bool:
        return self.v_norm is not None


def add_noise(window: Window, snr_db: float, seed) -> Window:
    """White Gaussian measurement noise at ``snr_db`` on each channel.

    ``snr_db = inf`` (or None) returns the window unchanged.
    """
    if snr_db is None or snr_db == math.inf:
        return window
    if not math.isfinite(snr_db):
        raise ParameterError(f"snr_db must be finite or +inf, got {snr_db}")
    rng = np.random.default_rng(seed)
    scale = 10.0 ** (-snr_db / 10.0)
    out = []
    for x in (window.voltage, window.current):
        sigma = math.sqrt(float(np.mean(x * x)) * scale)
        out.append(x + sigma * rng.standard_normal(x.size))
    return replace(window, voltage=out[0], current=out[1])


def window_label(events: Sequence[EventInterval], start: int, stop: int) -> Label:
    hits = {ev.label for ev in events if ev.start < stop and start < ev.stop}
    if len(hits) > 1:
        raise ScheduleError(f"window [{start}, {stop}) overlaps events of different types")
    return hits.pop() if hits else Label.NORMAL


def windowize(streams: Streams, node, T: int, stride: int, index_offset: int = 0) -> list:
    """Overlapping windows of ``T`` samples every ``stride`` samples."""
    if T < 5:
        raise ParameterError("T must be >= 5")
    if stride < 1:
        raise ParameterError("stride must be >= 1")
    v, c = streams.voltage[node], streams.current[node]
    out = []
    for i, s in enumerate(range(0, v.size - T + 1, stride)):
        out.append(
            Window(
                node=node,
                voltage=v[s : s + T].copy(),
                current=c[s : s + T].copy(),
                fs=streams.fs,
                label=window_label(streams.events, s, s + T),
                window_index=index_offset + i,
                start=s,
            )
        )
    return out


def _range_map(x: np.ndarray) -> tuple:
    lo, hi = float(np.min(x)), float(np.max(x))
    if not hi > lo:
        raise DegeneracyError("constant channel cannot be range-normalised")
    return (0.5 * (hi + lo), 0.5 * (hi - lo))


def normalize_range(window: Window) -> Window:
    """Map each channel affinely onto [-1, 1]; the maps are kept for undoing."""
    if window.normalized:
        return window
    vm, cm = _range_map(window.voltage), _range_map(window.current)
    return replace(
        window,
        voltage=(window.voltage - vm[0]) / vm[1],
        current=(window.current - cm[0]) / cm[1],
        v_norm=vm,
        c_norm=cm,
    )


def denormalize(window: Window) -> Window:
    if not window.normalized:
        return window
    (vm, vh), (cm, ch) = window.v_norm, window.c_norm
    return replace(
        window,
        voltage=window.voltage * vh + vm,
        current=window.current * ch + cm,
        v_norm=None,
        c_norm=None,
    )


def downsample(window: Window, factor: int) -> Window:
    """Keep every ``factor``-th sample."""
    if factor < 1 or window.T % factor:
        raise ParameterError(f"factor {factor} does not divide T={window.T}")
    if window.T // factor < 16:
        raise ParameterError(f"T/factor = {window.T // factor} is below 16 samples")
    if factor == 1:
        return window
    return replace(
        window,
        voltage=window.voltage[::factor].copy(),
        current=window.current[::factor].copy(),
        fs=window.fs / factor,
    )


# ---------------------------------------------------------------------------
# datasets


@dataclass
class DatasetConfig:
    """Event mix and randomisation ranges for a labelled window set.

    Defaults mirror the benchmark profile: 325 normal training windows,
    100 HIF / 42 load-switch / 54 capacitor-switch / 90 normal test
    windows, plus 10% extra HIF windows for validation.
    """

    feeder: dict = field(default_factory=lambda: four_node_feeder().to_dict())
    measured_nodes: list = field(default_factory=lambda: [3])
    hif_nodes: list = field(default_factory=lambda: [3, 4])
    cap_nodes: list = field(default_factory=lambda: [3, 4])
    load_nodes: list = field(default_factory=lambda: [3, 4])
    n_train: int = 325
    n_test_hif: int = 100
    n_test_load: int = 42
    n_test_cap: int = 54
    n_test_normal: int = 90
    val_fraction: float = 0.1
    fs: float = FS_DEFAULT
    T: int = SAMPLES_PER_CYCLE
    stride: int = STRIDE_DEFAULT
    snr_db: float | None = 50.0
    normalize: bool = True
    load_scale_range: tuple = (0.9, 1.1)
    cap_q_range: tuple = (0.05e6, 0.5e6)
    load_step_range: tuple = (0.1e6, 0.4e6)
    load_step_pf: float = 0.9
    hif: dict = field(default_factory=lambda: asdict(HifParams()))
    train_windows_per_stream: int = 5
    # explicit per-node validation HIFs (node -> count); empty = use hif_nodes
    val_hif_nodes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.hif = dict(self.hif)
        for k in ("Rp_range", "Rn_range", "Vp_range", "Vn_range"):
            self.hif[k] = tuple(self.hif[k])
        self.load_scale_range = tuple(self.load_scale_range)
        self.cap_q_range = tuple(self.cap_q_range)
        self.load_step_range = tuple(self.load_step_range)
        self.val_hif_nodes = {int(k): int(v) for k, v in self.val_hif_nodes.items()}

    @property
    def n_val(self) -> int:
        if self.val_hif_nodes:
            return sum(self.val_hif_nodes.values())
        return int(round(self.val_fraction * self.n_test_hif))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["val_hif_nodes"] = {str(k): v for k, v in self.val_hif_nodes.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetConfig":
        return cls(**d)

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class Dataset:
    windows: list  # list[Window], raw (noisy) samples
    splits: list  # "train" | "test" | "val", parallel to windows
    manifest: dict

    def select(self, split=None, node=None, label=None) -> list:
        out = []
        for w, s in zip(self.windows, self.splits):
            if split is not None and s != split:
                continue
            if node is not None and w.node != node:
                continue
            if label is not None and w.label != Label(label):
                continue
            out.append(w)
        return out

    @property
    def T(self) -> int:
        return self.manifest["T"]


def derive_seed(master_seed: int, *task) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed) & (2**63 - 1), *[int(t) for t in task]])


def _event_window_start(t_on: int, stride: int) -> int:
    return (t_on // stride) * stride


def generate_dataset(config: DatasetConfig, seed: int) -> Dataset:
    """Deterministically synthesise train / test / validation windows.

    Each test or validation event gets its own three-cycle stream; the
    reported window is the one whose first stride contains the event onset.
    """
    feeder = FeederModel.from_dict(config.feeder)
    hif = HifParams(**config.hif)
    T, stride, fs = config.T, config.stride, config.fs
    n_stream = 3 * T
    if T + stride > n_stream or T < 5:
        raise ScheduleError("stream too short to host an event window")
    for n in [*config.measured_nodes, *config.hif_nodes, *config.cap_nodes, *config.load_nodes]:
        feeder._check(n)
    nodes = list(config.measured_nodes)

    windows, splits, records, events = [], [], [], []

    def emit(split, win_list, event_id):
        for w in win_list:
            windows.append(w)
            splits.append(split)
            records.append(
                {
                    "split": split,
                    "node": w.node,
                    "label": w.label.value,
                    "window_index": w.window_index,
                    "start": w.start,
                    "event": event_id,
                }
            )

    def noisy(w, *task):
        return add_noise(w, config.snr_db, derive_seed(seed, 9, *task, w.node))

    def scaled_feeder(rng):
        return feeder.scaled_loads(rng.uniform(*config.load_scale_range))

    # training: overlapping windows of normal streams
    per = config.train_windows_per_stream
    n_streams = math.ceil(config.n_train / per)
    index = 0
    for s_id in range(n_streams):
        rng = np.random.default_rng(derive_seed(seed, 1, s_id))
        f = scaled_feeder(rng)
        st = normal_streams(f, fs, T + (per - 1) * stride, rng.uniform(0, 2 * np.pi), nodes)
        for node in nodes:
            ws = windowize(st, node, T, stride, index_offset=index)
            ws = ws[: max(0, min(per, config.n_train - s_id * per))]
            emit("train", [noisy(w, 1, s_id, k) for k, w in enumerate(ws)], None)
        index += per
    index = 0

    plan = (
        [("test", Label.HIF, None)] * config.n_test_hif
        + [("test", Label.LOAD, None)] * config.n_test_load
        + [("test", Label.CAP, None)] * config.n_test_cap
        + [("test", Label.NORMAL, None)] * config.n_test_normal
    )
    if config.val_hif_nodes:
        for node, count in sorted(config.val_hif_nodes.items()):
            plan += [("val", Label.HIF, node)] * count
    else:
        plan += [("val", Label.HIF, None)] * config.n_val

    for e_id, (split, label, forced_node) in enumerate(plan):
        rng = np.random.default_rng(derive_seed(seed, 2, e_id))
        f = scaled_feeder(rng)
        phase0 = float(rng.uniform(0, 2 * np.pi))
        t_on = int(rng.integers(T, 2 * T))
        ws = _event_window_start(t_on, stride)
        record = {"id": e_id, "split": split, "type": label.value, "start": t_on}
        if label is Label.HIF:
            node = forced_node if forced_node is not None else int(rng.choice(config.hif_nodes))
            st = inject_hif(f, node, hif, fs, n_stream / fs, derive_seed(seed, 3, e_id), t_on=t_on, phase0=phase0, nodes=nodes)
            record.update(node=node)
        elif label is Label.CAP:
            node = int(rng.choice(config.cap_nodes))
            q = float(rng.uniform(*config.cap_q_range))
            st = inject_cap_switch(f, node, q, t_on, fs=fs, n_samples=n_stream, phase0=phase0, nodes=nodes)
            record.update(node=node, q_var=q)
        elif label is Label.LOAD:
            node = int(rng.choice(config.load_nodes))
            p = float(rng.uniform(*config.load_step_range))
            q = p * math.tan(math.acos(config.load_step_pf))
            if rng.uniform() < 0.5:
                # switching off: the extra load is connected before the event
                f = f.with_load(node, complex(p, q))
                p, q = -p, -q
            st = inject_load_switch(f, node, complex(p, q), t_on, fs=fs, n_samples=n_stream, phase0=phase0, nodes=nodes)
            record.update(node=node, delta_power=[p, q])
        else:
            st = normal_streams(f, fs, n_stream, phase0, nodes)
            ws = int(rng.integers(0, n_stream - T + 1))
            record.update(start=None, window_start=ws)
        events.append(record)
        for node in nodes:
            v, c = st.voltage[node], st.current[node]
            w = Window(
                node=node,
                voltage=v[ws : ws + T].copy(),
                current=c[ws : ws + T].copy(),
                fs=fs,
                label=window_label(st.events, ws, ws + T),
                window_index=e_id,
                start=ws,
            )
            emit(split, [noisy(w, 2, e_id)], e_id)

    counts: dict = {}
    for r in records:
        key = (r["split"], r["label"])
        counts[key] = counts.get(key, 0) + 1
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": TOOL_VERSION,
        "seed": int(seed),
        "config_hash": config.config_hash(),
        "config": config.to_dict(),
        "feeder": feeder.to_dict(),
        "fs": fs,
        "f0": feeder.frequency,
        "T": T,
        "stride": stride,
        "snr_db": config.snr_db,
        "normalized": False,
        "normalize": config.normalize,
        "events": events,
        "windows": records,
        "counts": {f"{s}/{lab}": n for (s, lab), n in sorted(counts.items())},
    }
    return Dataset(windows, splits, manifest)


def downsample_dataset(ds: Dataset, factor: int) -> Dataset:
    if factor == 1:
        return ds
    wins = [downsample(w, factor) for w in ds.windows]
    manifest = dict(ds.manifest)
    manifest.update(T=ds.T // factor, fs=ds.manifest["fs"] / factor, stride=max(1, ds.manifest["stride"] // factor))
    manifest["downsample_factor"] = factor * ds.manifest.get("downsample_factor", 1)
    return Dataset(wins, list(ds.splits), manifest)


# --- persistence ---------------------------------------------------------------

DATA_FILE = "windows.bin"
MANIFEST_FILE = "manifest.json"
CSV_FILE = "windows.csv"


def save_dataset(ds: Dataset, directory, csv: bool = False) -> list:
    """Write ``windows.bin`` (little-endian float64) plus a JSON manifest."""
    from pathlib import Path

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    blob = np.concatenate([np.concatenate([w.voltage, w.current]) for w in ds.windows]).astype("<f8")
    (d / DATA_FILE).write_bytes(blob.tobytes())
    (d / MANIFEST_FILE).write_text(json.dumps(ds.manifest, sort_keys=True, indent=1))
    written = [d / DATA_FILE, d / MANIFEST_FILE]
    if csv:
        write_csv(ds, d / CSV_FILE)
        written.append(d / CSV_FILE)
    return written


def write_csv(ds: Dataset, path) -> None:
    m = ds.manifest
    lines = [
        f"# tool=hifdetect {m['tool_version']} seed={m['seed']} config_hash={m['config_hash']}",
        "window_index,node,sample_index,voltage,current,label",
    ]
    for w in ds.windows:
        for k in range(w.T):
            lines.append(f"{w.window_index},{w.node},{k},{w.voltage[k]!r},{w.current[k]!r},{w.label.value}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_dataset(directory) -> Dataset:
    from pathlib import Path

    d = Path(directory)
    manifest = json.loads((d / MANIFEST_FILE).read_text())
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise ParameterError(f"unsupported dataset schema {manifest.get('schema_version')}")
    T = manifest["T"]
    data = np.frombuffer((d / DATA_FILE).read_bytes(), dtype="<f8").astype(np.float64)
    records = manifest["windows"]
    if data.size != 2 * T * len(records):
        raise ParameterError("windows.bin size does not match the manifest")
    data = data.reshape(len(records), 2, T)
    windows = [
        Window(
            node=r["node"],
            voltage=data[i, 0].copy(),
            current=data[i, 1].copy(),
            fs=manifest["fs"],
            label=Label(r["label"]),
            window_index=r["window_index"],
            start=r["start"],
        )
        for i, r in enumerate(records)
    ]
    return Dataset(windows, [r["split"] for r in records], manifest)
