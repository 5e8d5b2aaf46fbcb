import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from emtts.circuit import assemble_dae, reference_netlist, series_loop_phasors
from emtts.emt import build_stepped, integrate
from emtts.linalg import dft_harmonics
from emtts.ts import (HarmonicSet, PhasorState, build_ts, reconstruct, ts_integrate, ts_step,
                      write_phasors_csv)

W0 = 2 * np.pi * 50


def test_harmonic_set_validation():
    assert HarmonicSet().harmonics == (0, 1)
    with pytest.raises(ValueError):
        HarmonicSet((1, 0))
    with pytest.raises(ValueError):
        HarmonicSet((0, 0))
    with pytest.raises(ValueError):
        HarmonicSet((-1,))


def test_dc_only_is_emt_matrix(ref_dae):
    ts = build_ts(ref_dae, HarmonicSet((0,), ref_dae.omega0), 2e-4)
    assert np.array_equal(ts.H_TS, build_stepped(ref_dae, 2e-4).H)


def test_block_structure(ref_dae):
    dT = 2e-4
    ts = build_ts(ref_dae, HarmonicSet((0, 1), ref_dae.omega0), dT)
    assert [b.shape[0] for b in ts.blocks] == [14, 28]
    assert ts.H_TS.shape == (42, 42)
    k1 = ts.blocks[1]
    H = build_stepped(ref_dae, dT).H
    assert np.array_equal(k1[:14, :14], H) and np.array_equal(k1[14:, 14:], H)
    Theta = build_stepped(ref_dae, dT).Theta
    assert np.allclose(k1[:14, 14:], -W0 * dT * Theta)
    assert np.allclose(k1[14:, :14], W0 * dT * Theta)
    alg = ~ref_dae.differential_rows
    assert not k1[:14, 14:][alg].any()


def test_zero_forcing_zero_phasors(ref_dae):
    ts = build_ts(ref_dae.with_events([], 0.0), HarmonicSet(), 2e-3)
    p = ts_step(ts, PhasorState.zeros(ts.hs, 14), 2e-3)
    assert not p.z.any()


def test_dc_imaginary_part_stays_zero(ref_dae):
    ts = build_ts(ref_dae, HarmonicSet(), 2e-3)
    _, states = ts_integrate(ts, 0, 0.02)
    assert all(not s.harmonic(0).imag.any() for s in states)


def test_stationary_phasors_match_closed_form(ref_dae):
    exact = series_loop_phasors(reference_netlist())
    ts = build_ts(ref_dae, HarmonicSet(), 2e-3)
    _, states = ts_integrate(ts, 0, 1.0)
    z1 = states[-1].harmonic(1)
    for name, val in exact.items():
        assert abs(z1[ref_dae.index(name)] - val) <= 1e-6 * max(abs(val), 1e-300) + 1e-12


def _fixed_point(dae, dT):
    # fundamental block only: the DC block has no unique steady state
    ts = build_ts(dae, HarmonicSet((1,), dae.omega0), dT)
    return np.linalg.solve(ts.H_TS - ts.Theta_TS, ts.forcing(0.0))


def test_fixed_point_independent_of_step(ref_dae):
    a, b = _fixed_point(ref_dae, 2e-4), _fixed_point(ref_dae, 2e-3)
    assert np.max(np.abs(a - b)) <= 1e-9 * np.max(np.abs(a))


def test_reconstruct_examples():
    hs = HarmonicSet((0, 1), W0)
    p = PhasorState(hs, np.array([[2.5], [0.0]]))
    assert np.allclose(reconstruct(p, np.linspace(0, 0.1, 7)), 2.5)
    q = PhasorState(hs, np.array([[0.0], [1.0]]))
    assert np.isclose(reconstruct(q, 0.0)[0], 1.0)
    assert np.isclose(reconstruct(q, np.pi / W0)[0], -1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_round_trip(n, seed):
    rng = np.random.default_rng(seed)
    hs = HarmonicSet((0, 1), W0)
    p = PhasorState(hs, rng.standard_normal((2, n)) + 1j * rng.standard_normal((2, n)))
    t = np.arange(100) / 100 * hs.period
    back = dft_harmonics(reconstruct(p, t), hs.harmonics)
    assert np.max(np.abs(back - p.z)) <= 1e-9


def test_pack_unpack_inverse():
    hs = HarmonicSet((0, 1, 3), W0)
    rng = np.random.default_rng(1)
    p = PhasorState(hs, rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4)))
    v = p.pack()
    assert v.size == hs.real_dim(4) == 20
    assert np.array_equal(PhasorState.unpack(hs, v, 4).z, p.z)


def test_envelope_matches_emt_amplitude(ref_dae):
    zf = _fixed_point(ref_dae, 2e-3)
    ts_amp = abs(zf[ref_dae.index("v4")] + 1j * zf[14 + ref_dae.index("v4")])
    traj = integrate(build_stepped(ref_dae, 1e-4), 0, 0.3)
    v4 = traj["v4"][-200:]
    emt_amp = abs(dft_harmonics(v4, [1], t0=traj.times[-200], omega0=W0)[0])
    assert abs(emt_amp - ts_amp) <= 0.02 * ts_amp


def test_phasors_smoother_than_waveform(ref_dae):
    dae = ref_dae.with_events([(0.04, 200.0)])
    dt = 2e-4
    traj = integrate(build_stepped(dae, dt), 0, 0.1)
    _, states = ts_integrate(build_ts(dae, HarmonicSet(), dt), 0, 0.1)
    i = dae.index("v4")
    z = np.array([s.harmonic(1)[i] for s in states])
    assert np.max(np.abs(np.diff(z))) <= np.max(np.abs(np.diff(traj["v4"])))


def test_phasor_csv(tmp_path, ref_dae):
    ts = build_ts(ref_dae, HarmonicSet(), 2e-3)
    times, states = ts_integrate(ts, 0, 0.01)
    p = tmp_path / "p.csv"
    write_phasors_csv(p, times, states, ref_dae.names)
    lines = p.read_text().splitlines()
    assert len(lines) == len(times) + 1
    assert lines[0].split(",")[:3] == ["t", "v1_k0_re", "v1_k0_im"]
