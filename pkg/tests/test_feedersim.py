import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hifdetect import feedersim as fs
from hifdetect.ellipse import design_matrix, fit_beta, phase_from_beta, residual
from hifdetect.errors import (
    DegeneracyError,
    ParameterError,
    SamplingError,
    ScheduleError,
    TopologyError,
)
from hifdetect.feedersim import (
    FeederModel,
    HifParams,
    HifSample,
    Label,
    Line,
    Phasor,
    Window,
    add_noise,
    arc_current,
    denormalize,
    downsample,
    four_node_feeder,
    hif_step,
    inject_cap_switch,
    inject_hif,
    inject_load_switch,
    normal_streams,
    normalize_range,
    steady_state,
    synth_waveform,
    windowize,
)

FS = fs.FS_DEFAULT
T = fs.SAMPLES_PER_CYCLE

GOLDEN = {
    1: (20330.76486510038, 52.14541910770224, 0.35169090259942964),
    2: (19723.65519873587, 52.14541910770224, 0.3598129605839872),
    3: (19268.260956267954, 39.33140240188402, 0.37898084982736),
    4: (19094.28544261723, 22.562414596003304, 0.3805063771123649),
}


def nodal_solve(feeder, iters=200):
    """Constant-power load flow by fixed point on the nodal admittance matrix."""
    nodes = [n for n in feeder.nodes if n != feeder.source_node]
    k = {n: i for i, n in enumerate(nodes)}
    w = 2 * math.pi * feeder.frequency
    Y = np.zeros((len(nodes), len(nodes)), complex)
    ysrc = np.zeros(len(nodes), complex)
    for ln in feeder.lines:
        y = 1 / complex(ln.R, w * ln.L)
        for a, b in ((ln.frm, ln.to), (ln.to, ln.frm)):
            if a == feeder.source_node:
                continue
            Y[k[a], k[a]] += y
            if b == feeder.source_node:
                ysrc[k[a]] += y
            else:
                Y[k[a], k[b]] -= y
    Vs = feeder.vrms
    V = np.full(len(nodes), Vs, complex)
    S = np.array([feeder.loads.get(n, 0j) for n in nodes])
    for _ in range(iters):
        V = np.linalg.solve(Y, ysrc * Vs - np.conj(S / V))
    volts = {feeder.source_node: complex(Vs)}
    volts.update({n: V[k[n]] for n in nodes})
    return volts


def branch_currents(feeder, volts):
    w = 2 * math.pi * feeder.frequency
    out = {}
    for ln in feeder.lines:
        up, down = (ln.frm, ln.to) if feeder.parent(ln.to) == ln.frm else (ln.to, ln.frm)
        out[down] = (volts[up] - volts[down]) / complex(ln.R, w * ln.L)
    out[feeder.source_node] = sum(out[c] for c in feeder.children(feeder.source_node))
    return out


# --- feeder and steady state ---------------------------------------------------


def test_golden_four_node_values():
    f = four_node_feeder()
    for node, (V0, C0, phi) in GOLDEN.items():
        p = steady_state(f, node)
        assert p.V0 == pytest.approx(V0, rel=1e-9)
        assert p.C0 == pytest.approx(C0, rel=1e-9)
        assert p.phi == pytest.approx(phi, rel=1e-9)


def test_golden_values_match_nodal_solve():
    f = four_node_feeder()
    volts = nodal_solve(f)
    amps = branch_currents(f, volts)
    for node, (V0, C0, phi) in GOLDEN.items():
        assert math.sqrt(2) * abs(volts[node]) == pytest.approx(V0, rel=1e-8)
        assert math.sqrt(2) * abs(amps[node]) == pytest.approx(C0, rel=1e-8)
        assert np.angle(volts[node] / amps[node]) == pytest.approx(phi, rel=1e-7)


def test_single_line_closed_form():
    # a constant-power load equals R_load = |V|^2 / P at the solved voltage
    R, L, vrms, P = 5.0, 10e-3, 1000.0, 20e3
    f = FeederModel([1, 2], [Line(1, 2, R, L)], 1, vrms, loads={2: P})
    p = steady_state(f, 1)
    Vload = abs(fs.solve_phasors(f)[0][2])
    R_load = Vload**2 / P
    X = 2 * math.pi * 60 * L
    with pytest.raises(DegeneracyError):
        steady_state(f, 2)  # purely resistive load: current in phase
    assert p.phi == pytest.approx(math.atan2(X, R + R_load), rel=1e-8)
    assert p.C0 == pytest.approx(math.sqrt(2) * vrms / math.hypot(R + R_load, X), rel=1e-8)


def test_zero_load_is_degenerate():
    f = FeederModel([1, 2], [Line(1, 2, 1.0, 1e-3)], 1, 1000.0)
    with pytest.raises(DegeneracyError):
        steady_state(f, 2)


def test_topology_errors():
    with pytest.raises(TopologyError):
        FeederModel([1, 2, 3], [Line(1, 2, 1, 0)], 1, 1.0)
    with pytest.raises(TopologyError):
        FeederModel([1, 2, 3], [Line(1, 2, 1, 0), Line(1, 5, 1, 0)], 1, 1.0)
    with pytest.raises(TopologyError):
        FeederModel([1, 2, 3, 4], [Line(1, 2, 1, 0), Line(2, 1, 1, 0), Line(3, 4, 1, 0)], 1, 1.0)
    with pytest.raises(ParameterError):
        FeederModel([1, 2], [Line(1, 2, 0.0, 0)], 1, 1.0)
    with pytest.raises(TopologyError):
        steady_state(four_node_feeder(), 9)


def test_feeder_json_round_trip():
    f = fs.nine_node_feeder()
    g = FeederModel.from_json(f.to_json())
    assert g.to_dict() == f.to_dict()
    assert g.order == f.order


def test_shared_impedance():
    f = fs.nine_node_feeder()
    # nodes 7 and 8 share only the trunk 1-2-3
    R, L = f.shared_impedance(7, 8)
    assert R == pytest.approx(16.0)
    assert L == pytest.approx(4.0e-3)
    assert f.path(7) == [1, 2, 3, 6, 7]


# --- waveforms -----------------------------------------------------------------


def test_quadrature_waveform():
    v, c = synth_waveform(Phasor(1.0, 1.0, math.pi / 2), 240.0, 4)
    np.testing.assert_allclose(v, [1, 0, -1, 0], atol=1e-12)
    np.testing.assert_allclose(c, [0, 1, 0, -1], atol=1e-12)


def test_waveform_period():
    p = Phasor(2.0, 1.0, 0.4)
    v, _ = synth_waveform(p, FS, T + 1)
    assert v[T] == pytest.approx(v[0], abs=1e-12)


def test_nyquist_violation():
    with pytest.raises(SamplingError):
        synth_waveform(Phasor(1.0, 1.0, 1.0), 100.0, 4)


@settings(max_examples=100, deadline=None)
@given(st.floats(1.0, 3e4), st.floats(0.1, 300.0), st.floats(0.1, math.pi - 0.1))
def test_waveform_satisfies_phasor_ellipse(V0, C0, phi):
    v, c = synth_waveform(Phasor(V0, C0, phi), FS, T)
    x, y = v / V0, c / C0
    r = x * x - 2 * math.cos(phi) * x * y + y * y - math.sin(phi) ** 2
    assert np.abs(r).max() < 1e-9


@settings(max_examples=100, deadline=None)
@given(st.floats(1.0, 3e4), st.floats(0.1, 300.0), st.floats(0.1, math.pi - 0.1))
def test_noise_free_windows_fit_exactly(V0, C0, phi):
    v, c = synth_waveform(Phasor(V0, C0, phi), FS, T)
    Z = design_matrix(v, c)
    assert residual(Z, fit_beta(Z)) / T < 1e-9


# --- arc model -----------------------------------------------------------------

ARC = HifSample(1000.0, 1000.0, 5e3, -7e3)


def test_hif_step_cases():
    assert hif_step(10e3, 0.0, ARC)[0] == pytest.approx(5.0)
    assert hif_step(0.0, 123.0, ARC) == (0.0, 123.0)
    assert hif_step(-9e3, 0.0, ARC)[0] == pytest.approx(-2.0)


def test_hif_step_rejects_bad_params():
    with pytest.raises(ParameterError):
        hif_step(0.0, 0.0, HifSample(0.0, 1.0, 1.0, -1.0))
    with pytest.raises(ParameterError):
        hif_step(0.0, 0.0, HifSample(1.0, 1.0, 1.0, 1.0))


def direct_arc(v, p):
    if v > p.Vp:
        return (v - p.Vp) / p.Rp
    if v < p.Vn:
        return (v - p.Vn) / p.Rn
    return 0.0


def test_arc_sweep_matches_direct_evaluation():
    grid = np.linspace(-20e3, 20e3, 4001)
    got = arc_current(grid, *ARC)
    assert all(hif_step(x, 0.0, ARC)[0] == pytest.approx(direct_arc(x, ARC)) for x in grid)
    np.testing.assert_allclose(got, [direct_arc(x, ARC) for x in grid], rtol=1e-15)
    # two live linear segments and a flat dead band
    slope = np.diff(got) / np.diff(grid)
    assert set(np.round(slope * 1000, 9)) <= {0.0, 1.0}


arc_params = st.builds(
    HifSample,
    st.floats(100.0, 5e3),
    st.floats(100.0, 5e3),
    st.floats(1.0, 1e4),
    st.floats(-1e4, -1.0),
)


@settings(max_examples=200, deadline=None)
@given(st.floats(-3e4, 3e4), arc_params)
def test_arc_is_passive(v, p):
    i, _ = hif_step(v, 0.0, p)
    assert i * (v - min(max(v, p.Vn), p.Vp)) >= 0


@settings(max_examples=100, deadline=None)
@given(st.floats(-3e4, 3e4), arc_params, st.floats(1e-6, 1e-2))
def test_arc_continuous_away_from_thresholds(v, p, h):
    if min(abs(v - p.Vp), abs(v - p.Vn)) < 2 * h:
        return
    a, _ = hif_step(v, 0.0, p)
    b, _ = hif_step(v + h, 0.0, p)
    assert abs(a - b) <= h / min(p.Rp, p.Rn) + 1e-12


def test_hif_params_validation():
    with pytest.raises(ParameterError):
        HifParams(Rp_range=(0.0, 1.0))
    with pytest.raises(ParameterError):
        HifParams(Vp_range=(6e3, 5e3))
    with pytest.raises(ParameterError):
        HifParams(resample_rate=0.0)
    assert fs.redraw_period(FS, 1000.0) == 31


# --- injectors -----------------------------------------------------------------


def test_collapsed_hif_equals_normal():
    f = four_node_feeder()
    quiet = HifParams((1e3, 1e3), (1e3, 1e3), (1e5, 1e5), (1e5, 1e5))
    st_ = inject_hif(f, 3, quiet, FS, 3 * T / FS, seed=1)
    ref = normal_streams(f, FS, 3 * T)
    for n in f.nodes:
        np.testing.assert_array_equal(st_.voltage[n], ref.voltage[n])
        np.testing.assert_array_equal(st_.current[n], ref.current[n])


def test_hif_deviation_decreases_away_from_fault():
    f = fs.nine_node_feeder()
    st_ = inject_hif(f, 7, HifParams(), FS, 3 * T / FS, seed=3)
    ref = normal_streams(f, FS, 3 * T)

    def dev(n):
        return np.mean(np.abs(st_.voltage[n] - ref.voltage[n])) / np.abs(ref.voltage[n]).max()

    assert dev(7) > dev(3) > dev(2)
    assert dev(6) > dev(4)


def test_hif_unknown_node():
    with pytest.raises(TopologyError):
        inject_hif(four_node_feeder(), 12, HifParams(), FS, 3 * T / FS, seed=0)
    with pytest.raises(ScheduleError):
        inject_hif(four_node_feeder(), 3, HifParams(), FS, 0.1 * T / FS, seed=0)


def test_hif_deterministic():
    f = four_node_feeder()
    a = inject_hif(f, 4, HifParams(), FS, 2 * T / FS, seed=11, t_on=100)
    b = inject_hif(f, 4, HifParams(), FS, 2 * T / FS, seed=11, t_on=100)
    np.testing.assert_array_equal(a.voltage[3], b.voltage[3])
    ref = normal_streams(f, FS, 2 * T)
    np.testing.assert_array_equal(a.voltage[3][:100], ref.voltage[3][:100])


def test_null_switching_events():
    f = four_node_feeder()
    ref = normal_streams(f, FS, 3 * T)
    cap = inject_cap_switch(f, 3, 0.0, T, n_samples=3 * T)
    load = inject_load_switch(f, 3, 0j, T, n_samples=3 * T)
    for n in f.nodes:
        np.testing.assert_allclose(cap.voltage[n], ref.voltage[n], atol=1e-9)
        np.testing.assert_allclose(load.current[n], ref.current[n], atol=1e-9)


def test_switching_schedule_errors():
    with pytest.raises(ScheduleError):
        inject_cap_switch(four_node_feeder(), 3, 1e5, 5 * T, n_samples=3 * T)
    with pytest.raises(ScheduleError):
        inject_load_switch(four_node_feeder(), 3, 1e5, -1, n_samples=3 * T)


def event_residual(streams, node, t_on):
    """Residual of the post-event window against the pre-event ellipse."""

    def window(start):
        v = streams.voltage[node][start : start + T]
        c = streams.current[node][start : start + T]
        return normalize_range(Window(node, v, c, FS))

    pre = window(0)
    beta = fit_beta(design_matrix(pre.voltage, pre.current))
    post = window(t_on)
    return residual(design_matrix(post.voltage, post.current), beta)


@pytest.mark.parametrize("node", [3, 4])
def test_cap_residual_dominates_hif_residual(node):
    f = four_node_feeder()
    cap = event_residual(inject_cap_switch(f, node, 0.5e6, T, n_samples=3 * T), node, T)
    for seed in range(5):
        hif = inject_hif(f, node, HifParams(), FS, 3 * T / FS, seed=seed, t_on=T)
        assert cap >= 5 * event_residual(hif, node, T)


@pytest.mark.parametrize("node", [3, 4])
def test_load_disconnect_residual_dominates_hif_residual(node):
    f = four_node_feeder()
    d = 0.4e6 + 0.4e6 * math.tan(math.acos(0.9)) * 1j
    load = event_residual(inject_load_switch(f.with_load(node, d), node, -d, T, n_samples=3 * T), node, T)
    for seed in range(5):
        hif = inject_hif(f, node, HifParams(), FS, 3 * T / FS, seed=seed, t_on=T)
        assert load >= 5 * event_residual(hif, node, T)


def test_events_depart_from_pre_event_ellipse():
    f = four_node_feeder()
    ref = event_residual(normal_streams(f, FS, 3 * T), 3, T)
    assert ref < 1e-9
    load = inject_load_switch(f, 3, 0.3e6 + 0.15e6j, T, n_samples=3 * T)
    hif = inject_hif(f, 3, HifParams(), FS, 3 * T / FS, seed=0, t_on=T)
    assert event_residual(load, 3, T) > 1e3 * ref
    assert event_residual(hif, 3, T) > 1.0


# --- windows -------------------------------------------------------------------


def stream(n, events=()):
    x = np.sin(np.arange(n) * 0.1) + 2.0
    return fs.Streams(FS, 60.0, {1: x}, {1: np.cos(np.arange(n) * 0.1)}, list(events))


def test_windowize_counts():
    assert len(windowize(stream(512), 1, 512, 128)) == 1
    ws = windowize(stream(1024), 1, 512, 128)
    assert [w.start for w in ws] == [0, 128, 256, 384, 512]
    assert windowize(stream(100), 1, 512, 128) == []


@settings(max_examples=100, deadline=None)
@given(st.integers(5, 300), st.integers(1, 64), st.integers(0, 600), st.integers(1, 200))
def test_window_labels_follow_overlap(T_, stride, ev_start, ev_len):
    n = 600
    ev = fs.EventInterval(Label.HIF, ev_start, ev_start + ev_len, 1)
    ws = windowize(stream(n, [ev]), 1, T_, stride)
    assert len(ws) == (max(0, (n - T_) // stride + 1) if n >= T_ else 0)
    for w in ws:
        overlap = w.start < ev.stop and ev.start < w.start + T_
        assert w.label == (Label.HIF if overlap else Label.NORMAL)


def test_overlapping_events_rejected():
    evs = [fs.EventInterval(Label.HIF, 0, 10, 1), fs.EventInterval(Label.CAP, 5, 20, 1)]
    with pytest.raises(ScheduleError):
        fs.window_label(evs, 0, 30)


def test_normalize_example():
    w = Window(1, np.array([-2.0, 0.0, 2.0, 1.0, -1.0]), np.arange(5.0), FS)
    np.testing.assert_allclose(normalize_range(w).voltage[:3], [-1, 0, 1])


def test_constant_channel_rejected():
    with pytest.raises(DegeneracyError):
        normalize_range(Window(1, np.ones(8), np.arange(8.0), FS))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e5, 1e5), min_size=5, max_size=64), st.integers(0, 2**31))
def test_normalize_round_trip(xs, seed):
    v = np.array(xs)
    if np.ptp(v) < 1e-3:
        return
    c = np.random.default_rng(seed).normal(size=v.size)
    w = Window(1, v, c, FS)
    n = normalize_range(w)
    assert n.voltage.min() == pytest.approx(-1) and n.voltage.max() == pytest.approx(1)
    back = denormalize(n)
    np.testing.assert_allclose(back.voltage, v, atol=1e-12 * max(1.0, np.abs(v).max()))
    np.testing.assert_allclose(back.current, c, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, math.pi - 0.1), st.floats(1e2, 3e4), st.floats(1.0, 100.0))
def test_normalized_window_keeps_phase(phi, V0, C0):
    v, c = synth_waveform(Phasor(V0, C0, phi), FS, T)
    raw = fit_beta(design_matrix(v, c))
    n = normalize_range(Window(1, v, c, FS))
    normed = fit_beta(design_matrix(n.voltage, n.current))
    assert phase_from_beta(normed) == pytest.approx(phase_from_beta(raw), abs=1e-6)


def test_downsample():
    v, c = synth_waveform(Phasor(2.0, 1.0, 0.6), FS, T)
    w = Window(1, v, c, FS)
    assert downsample(w, 1) is w
    sizes, rates = [], []
    for f in (2, 4, 8, 16, 32):
        d = downsample(w, f)
        sizes.append(d.T)
        rates.append(d.fs)
    assert sizes == [256, 128, 64, 32, 16]
    np.testing.assert_allclose(rates, [15360, 7680, 3840, 1920, 960])
    with pytest.raises(ParameterError):
        downsample(w, 3)
    with pytest.raises(ParameterError):
        downsample(w, 64)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, math.pi - 0.1), st.sampled_from([1, 2, 4, 8, 16, 32]))
def test_downsampled_window_keeps_conic(phi, factor):
    p = Phasor(3.0, 2.0, phi)
    from hifdetect.ellipse import beta_from_phasor

    v, c = synth_waveform(p, FS, T)
    d = downsample(Window(1, v, c, FS), factor)
    assert residual(design_matrix(d.voltage, d.current), beta_from_phasor(p)) < 1e-9


# --- noise ---------------------------------------------------------------------


def test_noise_infinite_is_identity():
    v, c = synth_waveform(Phasor(1.0, 1.0, 1.0), FS, 64)
    w = Window(1, v, c, FS)
    assert add_noise(w, math.inf, 0) is w
    with pytest.raises(ParameterError):
        add_noise(w, math.nan, 0)


def test_noise_power_at_50db():
    n = 200_000
    v = math.sqrt(2) * np.cos(2 * np.pi * 60 * np.arange(n) / FS)
    w = Window(1, v, v.copy(), FS)
    noisy = add_noise(w, 50.0, 4)
    power = np.mean((noisy.voltage - v) ** 2)
    assert abs(power / 1e-5 - 1) < 0.05
    again = add_noise(w, 50.0, 4)
    np.testing.assert_array_equal(noisy.current, again.current)


# --- datasets ------------------------------------------------------------------


def small_config(**kw):
    base = dict(n_train=20, n_test_hif=6, n_test_load=3, n_test_cap=3, n_test_normal=4, T=64, stride=16, fs=64 * 60.0)
    base.update(kw)
    return fs.DatasetConfig(**base)


def test_default_profile_counts():
    cfg = fs.DatasetConfig()
    assert (cfg.n_train, cfg.n_test_hif, cfg.n_test_load, cfg.n_test_cap, cfg.n_test_normal) == (325, 100, 42, 54, 90)
    assert cfg.n_val == 10


def test_dataset_counts_match_manifest():
    ds = fs.generate_dataset(small_config(), seed=7)
    counts = {}
    for w, s in zip(ds.windows, ds.splits):
        key = f"{s}/{w.label.value}"
        counts[key] = counts.get(key, 0) + 1
    assert counts == ds.manifest["counts"]
    assert counts["train/Normal"] == 20
    assert counts["test/HIF"] == 6 and counts["val/HIF"] == 1


def test_dataset_round_trip_and_determinism(tmp_path):
    a = fs.generate_dataset(small_config(), seed=3)
    b = fs.generate_dataset(small_config(), seed=3)
    fs.save_dataset(a, tmp_path / "a", csv=True)
    fs.save_dataset(b, tmp_path / "b", csv=True)
    for name in (fs.DATA_FILE, fs.MANIFEST_FILE, fs.CSV_FILE):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    back = fs.load_dataset(tmp_path / "a")
    assert back.splits == a.splits
    for x, y in zip(back.windows, a.windows):
        np.testing.assert_array_equal(x.voltage, y.voltage)
        assert x.label == y.label
    c = fs.generate_dataset(small_config(), seed=4)
    assert not np.array_equal(c.windows[0].voltage, a.windows[0].voltage)


def test_dataset_downsample():
    ds = fs.downsample_dataset(fs.generate_dataset(small_config(), seed=1), 4)
    assert ds.T == 16 and all(w.T == 16 for w in ds.windows)


def test_dataset_schedule_error():
    with pytest.raises(ScheduleError):
        fs.generate_dataset(small_config(T=64, stride=200), seed=0)
