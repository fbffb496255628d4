import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import jv

from conftest import fourier_coefficient
from qfpgates.multiport import (
    ConfigError,
    FrequencyGrid,
    Harmonic,
    ModeWindow,
    QfpConfig,
    RfWaveform,
    ShaperPhases,
    TruncatedMultiport,
    TruncationError,
    cascade,
    config_from_dict,
    config_to_dict,
    configure,
    default_half_width,
    eom_coefficients,
    eom_matrix,
    eval_waveform,
    extract_computational,
    gate_of,
    identity_config,
    shaper_matrix,
    unitarity_defect,
)

GRID = FrequencyGrid()


def coeff(c, j):
    return c[(len(c) - 1) // 2 + j]


# ---- types ---------------------------------------------------------------

def test_grid_period():
    g = FrequencyGrid(delta_omega=2 * math.pi * 17e9)
    assert g.period * g.delta_omega == pytest.approx(2 * math.pi, rel=1e-15)
    with pytest.raises(ConfigError):
        FrequencyGrid(delta_omega=0.0)


def test_harmonic_validation():
    assert Harmonic(1, 0.5, 1.25).delay == pytest.approx(0.25)
    with pytest.raises(ConfigError):
        Harmonic(0, 1.0)
    with pytest.raises(ConfigError):
        Harmonic(1, -0.1)
    with pytest.raises(ConfigError):
        RfWaveform(((1, 0.2, 0.0), (1, 0.3, 0.0)))


def test_window_must_hold_computational_bins():
    with pytest.raises(TruncationError):
        ModeWindow(1, 4)
    with pytest.raises(TruncationError):
        ModeWindow(-3, 0)
    w = ModeWindow.symmetric(5)
    assert (w.lo, w.hi, w.size, w.half_width) == (-5, 6, 12, 5)


def test_config_alternation():
    tone = RfWaveform.tone(0.3)
    with pytest.raises(ConfigError):
        configure(tone, ShaperPhases.flat())
    with pytest.raises(ConfigError):
        configure(tone, tone, tone)
    with pytest.raises(ConfigError):
        configure(ShaperPhases.flat())
    assert len(configure(tone, ShaperPhases.flat(), tone).elements) == 3


def test_shaper_phases_length_checked():
    with pytest.raises(ConfigError):
        ShaperPhases(ModeWindow(0, 1), (0.0, 1.0, 2.0))


# ---- eval_waveform ---------------------------------------------------------

def test_eval_waveform_zero_drive():
    assert eval_waveform(RfWaveform(), GRID, 1.3e-11) == 0.0


def test_eval_waveform_quarter_period():
    assert eval_waveform(RfWaveform.tone(1.0), GRID, GRID.period / 4) == pytest.approx(1.0, abs=1e-15)


def test_eval_waveform_two_harmonics(rng):
    w = RfWaveform(((1, 0.7, 0.0), (2, 0.4, 0.0)))
    for t in rng.uniform(-3, 3, 20) * GRID.period:
        expect = 0.7 * math.sin(GRID.delta_omega * t) + 0.4 * math.sin(2 * GRID.delta_omega * t)
        assert eval_waveform(w, GRID, t) == pytest.approx(expect, abs=1e-12)


def test_eval_waveform_periodic(rng):
    w = RfWaveform(((1, 1.1, 0.3), (3, 0.2, 0.7)))
    t = rng.uniform(0, 1, 10) * GRID.period
    np.testing.assert_allclose(eval_waveform(w, GRID, t + GRID.period), eval_waveform(w, GRID, t), atol=1e-12)


# ---- eom_coefficients -------------------------------------------------------

def test_zero_drive_coefficients():
    c = eom_coefficients(RfWaveform(), max_order=5)
    expect = np.zeros(11)
    expect[5] = 1
    np.testing.assert_allclose(c, expect, atol=1e-15)


@pytest.mark.parametrize("theta", [0.1, 0.829, 1.4347, 3.9])
def test_jacobi_anger_magnitudes(theta):
    c = eom_coefficients(RfWaveform.tone(theta), max_order=12)
    for j in range(-12, 13):
        assert abs(coeff(c, j)) == pytest.approx(abs(jv(j, theta)), abs=1e-10)


@pytest.mark.parametrize("theta", [0.5, 0.829, 2.3])
def test_sign_convention_against_quadrature(theta):
    # c_j = (1/T) int exp(iA) exp(+i j dw t) dt, evaluated independently
    c = eom_coefficients(RfWaveform.tone(theta), max_order=10)
    for j in range(-6, 7):
        direct = fourier_coefficient(lambda x: theta * math.sin(x), j)
        assert abs(coeff(c, j) - direct) < 1e-12
        assert coeff(c, j) == pytest.approx((-1) ** j * jv(j, theta), abs=1e-12)


def test_two_tone_matches_quadrature():
    w = RfWaveform(((1, 0.9, 0.13), (2, 0.35, 0.61)))
    phase = lambda x: 0.9 * math.sin(x - 2 * math.pi * 0.13) + 0.35 * math.sin(2 * (x - 2 * math.pi * 0.61))
    c = eom_coefficients(w, max_order=12)
    for j in range(-8, 9):
        assert abs(coeff(c, j) - fourier_coefficient(phase, j)) < 1e-12


def test_equal_splitting_near_analyzer_index():
    c = eom_coefficients(RfWaveform.tone(1.4347), max_order=12)
    p0, p1 = abs(coeff(c, 0)) ** 2, abs(coeff(c, 1)) ** 2
    assert p0 == pytest.approx(p1, abs=1e-4)
    assert p0 == pytest.approx(0.30, abs=0.01)


@given(st.lists(st.tuples(st.floats(0, 2.0), st.floats(0, 1)), min_size=1, max_size=2))
@settings(max_examples=40, deadline=None)
def test_parseval(parts):
    # fundamental plus second harmonic, the layouts synthesis uses
    w = RfWaveform(tuple(Harmonic(r + 1, idx, d) for r, (idx, d) in enumerate(parts)))
    k = 4 * math.ceil(w.total_index) + 8
    power = np.sum(np.abs(eom_coefficients(w, max_order=k)) ** 2)
    assert 1 - 1e-9 <= power <= 1 + 1e-12


@given(st.lists(st.tuples(st.floats(0, 2.0), st.floats(0, 1)), min_size=1, max_size=4))
@settings(max_examples=40, deadline=None)
def test_parseval_default_order_any_harmonics(parts):
    w = RfWaveform(tuple(Harmonic(r + 1, idx, d) for r, (idx, d) in enumerate(parts)))
    power = np.sum(np.abs(eom_coefficients(w)) ** 2)
    assert 1 - 1e-9 <= power <= 1 + 1e-12


def test_truncation_loss_flagged():
    with pytest.raises(TruncationError):
        eom_coefficients(RfWaveform.tone(3.9), max_order=2)
    with pytest.raises(TruncationError):
        eom_coefficients(RfWaveform.tone(0.1), max_order=0)


@given(st.floats(0.05, 2.5), st.floats(0, 1), st.floats(-1, 1))
@settings(max_examples=40, deadline=None)
def test_delay_multiplies_by_phase(theta, d0, tau):
    # A(t - tau) shifts c_j by exp(+i j dw tau) under this Fourier convention
    w = RfWaveform.tone(theta, d0)
    k = 12
    c = eom_coefficients(w, max_order=k)
    cd = eom_coefficients(w.delayed(tau), max_order=k)
    j = np.arange(-k, k + 1)
    np.testing.assert_allclose(cd, c * np.exp(2j * np.pi * j * tau), atol=1e-10)


# ---- eom_matrix / shaper_matrix ---------------------------------------------

def test_delta_coefficients_give_identity():
    c = np.zeros(13, dtype=complex)
    c[6] = 1
    np.testing.assert_array_equal(eom_matrix(c, ModeWindow.symmetric(2)).matrix, np.eye(6))


def test_toeplitz_structure(rng):
    c = rng.standard_normal(13) + 1j * rng.standard_normal(13)
    win = ModeWindow.symmetric(2)
    m = eom_matrix(c, win)
    for a in win.bins:
        for b in win.bins:
            assert m.element(a, b) == c[6 + a - b]


def test_three_bin_tridiagonal():
    c = np.array([0, 0, 0.2, 0.9, -0.2, 0, 0], dtype=complex)
    m = eom_matrix(c, ModeWindow(-1, 1)).matrix
    np.testing.assert_array_equal(m, np.array([[0.9, 0.2, 0], [-0.2, 0.9, 0.2], [0, -0.2, 0.9]]))


def test_window_wider_than_coefficients():
    with pytest.raises(TruncationError):
        eom_matrix(np.ones(5), ModeWindow.symmetric(3))


def test_interior_row_norms():
    win = ModeWindow.symmetric(20)
    c = eom_coefficients(RfWaveform.tone(0.829), max_order=win.size - 1)
    m = eom_matrix(c, win).matrix
    rows = np.sum(np.abs(m[10:-10]) ** 2, axis=1)
    np.testing.assert_allclose(rows, 1.0, atol=1e-12)


def test_shaper_matrices():
    win = ModeWindow.symmetric(3)
    np.testing.assert_array_equal(shaper_matrix(ShaperPhases.flat(win)).matrix, np.eye(win.size))
    step = np.diag(shaper_matrix(ShaperPhases.step(0.7, win)).matrix)
    np.testing.assert_allclose(step, np.where(win.bins >= 1, np.exp(0.7j), 1.0))
    ramp = ShaperPhases(win, win.bins * 0.3)
    np.testing.assert_allclose(np.diag(shaper_matrix(ramp).matrix), np.exp(0.3j * win.bins))
    sloped = ShaperPhases(win, np.zeros(win.size), slope=0.3)
    np.testing.assert_allclose(np.diag(shaper_matrix(sloped).matrix), np.exp(0.3j * win.bins))


def test_shaper_extends_edge_phases():
    s = ShaperPhases(ModeWindow(0, 1), (0.2, 0.9))
    big = ModeWindow.symmetric(3)
    np.testing.assert_allclose(s.phase_at(big.bins), np.where(big.bins >= 1, 0.9, 0.2))


# ---- cascade -----------------------------------------------------------------

def test_identity_cascade():
    v = cascade(identity_config(2), ModeWindow.symmetric(4))
    np.testing.assert_allclose(v.matrix, np.eye(10), atol=1e-15)


def test_pi_shifted_tones_cancel():
    cfg = configure(RfWaveform.tone(0.829), ShaperPhases.flat(), RfWaveform.tone(0.829, 0.5))
    v = cascade(cfg)
    g = 8
    np.testing.assert_allclose(v.matrix[g:-g, g:-g], np.eye(v.window.size - 2 * g), atol=1e-12)


def test_cascade_order_is_temporal(rng):
    win = ModeWindow.symmetric(16)
    e1, e2 = RfWaveform.tone(0.6, 0.1), RfWaveform.tone(1.1, 0.37)
    s = ShaperPhases(win, rng.uniform(0, 2 * np.pi, win.size))
    v = cascade(configure(e1, s, e2), win)
    k = win.size - 1
    m1 = eom_matrix(eom_coefficients(e1, max_order=k), win)
    m2 = eom_matrix(eom_coefficients(e2, max_order=k), win)
    expect = m2.matrix @ shaper_matrix(s).matrix @ m1.matrix
    np.testing.assert_allclose(v.matrix, expect, atol=1e-14)
    # reversed order is genuinely different
    assert np.max(np.abs(v.matrix - m1.matrix @ shaper_matrix(s).matrix @ m2.matrix)) > 1e-3


def test_cascade_rejects_short_coefficients():
    cfg = configure(RfWaveform.tone(0.5), ShaperPhases.flat(), RfWaveform.tone(0.5))
    with pytest.raises(TruncationError):
        cascade(cfg, ModeWindow.symmetric(16), max_order=10)


def test_default_window_grows_with_bandwidth():
    assert default_half_width(0.8) == 16
    assert default_half_width(4.5) == 28
    cfg = configure(RfWaveform(((1, 1.0, 0), (2, 1.5, 0))), ShaperPhases.flat(), RfWaveform.tone(0.2))
    assert cfg.bandwidth == pytest.approx(4.0)
    assert cfg.default_window().half_width == 24


# ---- extract / unitarity -------------------------------------------------------

def test_extract_from_identity_and_diagonal():
    win = ModeWindow.symmetric(2)
    assert np.array_equal(extract_computational(TruncatedMultiport(win, np.eye(6))).w, np.eye(2))
    d = np.ones(6, dtype=complex)
    d[win.position(1)] = -1
    assert np.array_equal(extract_computational(TruncatedMultiport(win, np.diag(d))).w, np.diag([1, -1]))


def test_hadamard_cascade_success():
    cfg = configure(RfWaveform.tone(0.829), ShaperPhases.step(math.pi), RfWaveform.tone(0.829, 0.5))
    w = gate_of(cfg).w
    g2 = np.sum(np.abs(w) ** 2) / 2
    assert g2 == pytest.approx(0.9746, abs=5e-4)
    h = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    g = np.trace(h.conj().T @ w) / 2
    np.testing.assert_allclose(w, g * h, atol=2e-4)


def test_unitarity_defect_identity_and_wide_window():
    win = ModeWindow.symmetric(6)
    assert unitarity_defect(TruncatedMultiport(win, np.eye(win.size)), 2) == 0.0
    cfg = configure(RfWaveform.tone(0.829), ShaperPhases.flat(), RfWaveform.tone(0.829, 0.2))
    assert unitarity_defect(cascade(cfg, ModeWindow.symmetric(24)), 8) <= 1e-10


def test_unitarity_defect_edges_versus_interior():
    cfg = configure(RfWaveform.tone(2.0), ShaperPhases.flat(), RfWaveform.tone(2.0, 0.3))
    v = cascade(cfg, ModeWindow.symmetric(8))
    assert unitarity_defect(v, 0) > 1e-3
    assert unitarity_defect(v, 0) > 1e3 * unitarity_defect(cascade(cfg, ModeWindow.symmetric(30)), 8)


def test_unitarity_defect_monotone_in_window():
    cfg = configure(RfWaveform.tone(1.3), ShaperPhases.step(1.0), RfWaveform.tone(1.3, 0.4))
    defects = [unitarity_defect(cascade(cfg, ModeWindow.symmetric(h)), 4) for h in range(6, 22, 2)]
    for a, b in zip(defects, defects[1:]):
        assert b <= a + 1e-12


def test_guard_too_large():
    with pytest.raises(TruncationError):
        unitarity_defect(TruncatedMultiport(ModeWindow.symmetric(2), np.eye(6)), 3)


@given(
    st.lists(st.floats(0, 2.0), min_size=2, max_size=3),
    st.lists(st.floats(0, 1), min_size=3, max_size=3),
    st.integers(0, 2**31 - 1),
)
@settings(max_examples=30, deadline=None)
def test_subunitarity(indices, delays, seed):
    r = np.random.default_rng(seed)
    els = []
    for i, th in enumerate(indices):
        if i:
            els.append(ShaperPhases(ModeWindow(-2, 3), r.uniform(0, 2 * np.pi, 6)))
        els.append(RfWaveform.tone(th, delays[i]))
    assert gate_of(configure(*els)).max_singular_value <= 1 + 1e-9


# ---- serialization -----------------------------------------------------------

def test_config_dict_round_trip():
    cfg = configure(
        RfWaveform(((1, 0.8, 0.25), (2, 0.1, 0.5))),
        ShaperPhases(ModeWindow(-2, 3), (0.1, 0.2, 0.3, 0.4, 0.5, 0.6), slope=1.5),
        RfWaveform.tone(0.8, 0.75),
    )
    back = config_from_dict(config_to_dict(cfg))
    assert back == cfg
    np.testing.assert_array_equal(gate_of(back).w, gate_of(cfg).w)


def test_config_dict_rejects_unknown_tag():
    with pytest.raises(ConfigError):
        config_from_dict({"elements": [{"laser": {}}]})
    assert isinstance(config_from_dict({"elements": [{"eom": {"harmonics": []}}]}), QfpConfig)
