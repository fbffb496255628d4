import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfpgates.gates import (
    HADAMARD,
    GateMetrics,
    GateReport,
    QubitState,
    UndefinedFidelityError,
    apply_gate,
    gate_fidelity,
    reconfigure,
    success_probability,
    target_unitary,
)
from qfpgates.multiport import ConfigError, ModeWindow, RfWaveform, ShaperPhases, cascade, configure, gate_of

angles = st.floats(0, math.pi)
phases = st.floats(0, 2 * math.pi, exclude_max=True)


def random_config(r, n_eoms=2):
    els = []
    for i in range(n_eoms):
        if i:
            els.append(ShaperPhases(ModeWindow(-2, 3), r.uniform(0, 2 * np.pi, 6), slope=r.uniform(-np.pi, np.pi)))
        els.append(RfWaveform.tone(r.uniform(0, 2), r.uniform()))
    return configure(*els)


# ---- target_unitary ----------------------------------------------------------------

def test_target_closed_forms():
    np.testing.assert_allclose(target_unitary(0, 0, 0), np.eye(2), atol=1e-16)
    np.testing.assert_allclose(target_unitary(math.pi / 2, 0, math.pi), np.array([[1, 1], [1, -1]]) / math.sqrt(2), atol=1e-15)
    np.testing.assert_allclose(target_unitary(math.pi, 0, 0), [[0, -1], [1, 0]], atol=1e-16)


@given(angles, phases, phases)
def test_target_unitary_is_unitary(t, p, l):
    u = target_unitary(t, p, l)
    np.testing.assert_allclose(u.conj().T @ u, np.eye(2), atol=1e-14)


@pytest.mark.parametrize("args", [(-0.1, 0, 0), (3.2, 0, 0), (1, -0.5, 0), (1, 0, 2 * math.pi + 0.1)])
def test_target_range_checked(args):
    with pytest.raises(ValueError):
        target_unitary(*args)


# ---- metrics ---------------------------------------------------------------------

def test_success_probability_examples():
    u = target_unitary(1.1, 0.3, 2.0)
    assert success_probability(u) == pytest.approx(1.0, abs=1e-15)
    assert success_probability(0.6j * u) == pytest.approx(0.36, abs=1e-15)
    assert success_probability(np.diag([1, 0])) == 0.5


def test_fidelity_examples():
    u = target_unitary(2.0, 1.0, 0.5)
    assert gate_fidelity(u, u) == pytest.approx(1.0, abs=1e-15)
    assert gate_fidelity(0.3 * np.exp(0.4j) * u, u) == pytest.approx(1.0, abs=1e-14)
    assert gate_fidelity(np.diag([1, 0]), np.eye(2)) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(UndefinedFidelityError):
        gate_fidelity(np.zeros((2, 2)), u)


@given(angles, phases, phases, st.floats(0, 2 * math.pi), st.integers(0, 2**32 - 1))
@settings(max_examples=50)
def test_metric_invariances(t, p, l, chi, seed):
    r = np.random.default_rng(seed)
    w = r.standard_normal((2, 2)) + 1j * r.standard_normal((2, 2))
    u = target_unitary(t, p, l)
    assert gate_fidelity(np.exp(1j * chi) * w, u) == pytest.approx(gate_fidelity(w, u), abs=1e-12)
    g = complex(*r.standard_normal(2))
    assert success_probability(g * w) == pytest.approx(abs(g) ** 2 * success_probability(w), rel=1e-12)
    m = GateMetrics.of(w, u)
    assert -1e-9 <= m.fidelity <= 1 + 1e-9


# ---- states ------------------------------------------------------------------------

def test_apply_gate_examples():
    s = QubitState(0.6, -0.8)
    assert apply_gate(np.eye(2), s) == s
    h = apply_gate(HADAMARD, QubitState(1, 0))
    np.testing.assert_allclose(h.vector, np.array([1, 1]) / math.sqrt(2), atol=1e-16)


def test_apply_gate_rotation_example():
    # direct multiply of the closed-form matrix, written out by hand
    t, p, l = 0.7 * math.pi, 0.55 * math.pi, 0.25 * math.pi
    c, s = math.cos(t / 2), math.sin(t / 2)
    d0 = c * 0.6 - np.exp(1j * l) * s * (-0.8)
    d1 = np.exp(1j * p) * s * 0.6 + np.exp(1j * (p + l)) * c * (-0.8)
    out = apply_gate(target_unitary(t, p, l), QubitState(0.6, -0.8))
    np.testing.assert_allclose(out.vector, [d0, d1], atol=1e-15)
    assert out.norm2 == pytest.approx(1.0, abs=1e-15)


def test_retention_probability_is_norm():
    w = 0.9 * target_unitary(1.0, 0.2, 0.1)
    assert apply_gate(w, QubitState(0.6, 0.8)).norm2 == pytest.approx(0.81, abs=1e-14)


def test_bloch_state():
    s = QubitState.bloch(math.pi / 2, math.pi / 2)
    np.testing.assert_allclose(s.vector, np.array([1, 1j]) / math.sqrt(2), atol=1e-16)
    rho = QubitState(0.6, 0.8j).density()
    assert np.trace(rho) == pytest.approx(1.0)
    np.testing.assert_allclose(rho, rho.conj().T)


# ---- reconfigure --------------------------------------------------------------------

def test_reconfigure_zero_is_identity(rng):
    cfg = random_config(rng)
    assert reconfigure(cfg, 0.0, 0.0) is cfg


def test_reconfigure_hadamard_base():
    # beamsplitter at alpha = pi realizes U(pi/2, 0, pi); lambda = pi moves it to U(pi/2, 0, 0)
    bs = configure(RfWaveform.tone(0.8169), ShaperPhases.step(math.pi), RfWaveform.tone(0.8169, 0.5))
    base = reconfigure(bs, 0.0, math.pi)
    w0 = gate_of(base).w
    f0 = gate_fidelity(w0, target_unitary(math.pi / 2, 0, 0))
    assert f0 == pytest.approx(0.9999, abs=5e-5)
    w = gate_of(reconfigure(base, 0.0, math.pi)).w
    assert gate_fidelity(w, HADAMARD) == pytest.approx(f0, abs=1e-9)
    assert success_probability(w) == pytest.approx(success_probability(w0), abs=1e-9)
    np.testing.assert_allclose(w, gate_of(bs).w, atol=1e-12)


@pytest.mark.parametrize("n_eoms", [2, 3])
def test_reconfigure_phases_every_interior_bin(rng, n_eoms):
    win = ModeWindow.symmetric(24)
    for _ in range(10):
        cfg = random_config(rng, n_eoms)
        phi, lam = rng.uniform(0, 2 * np.pi, 2)
        v = cascade(cfg, win).matrix
        vt = cascade(reconfigure(cfg, phi, lam), win).matrix
        k = win.bins
        expect = np.exp(1j * (k[:, None] * phi + k[None, :] * lam)) * v
        g = 8
        np.testing.assert_allclose(vt[g:-g, g:-g], expect[g:-g, g:-g], atol=1e-9)


def test_reconfigure_only_touches_ends(rng):
    cfg = random_config(rng, 3)
    new = reconfigure(cfg, 1.0, 2.0)
    assert new.elements[2] == cfg.elements[2]
    assert new.elements[0].waveform.harmonics[0].index == cfg.elements[0].waveform.harmonics[0].index
    assert new.elements[1].phases.phases == cfg.elements[1].phases.phases


def test_reconfigure_lone_shaper_gets_both_slopes(rng):
    cfg = random_config(rng, 2)
    new = reconfigure(cfg, 0.4, 0.9)
    assert new.elements[1].phases.slope == pytest.approx(cfg.elements[1].phases.slope + 1.3)


def test_reconfigure_preserves_metrics(rng):
    cfg = random_config(rng)
    theta = 1.3
    w0 = gate_of(cfg).w
    for phi, lam in rng.uniform(0, 2 * np.pi, (5, 2)):
        w = gate_of(reconfigure(cfg, phi, lam)).w
        assert success_probability(w) == pytest.approx(success_probability(w0), abs=1e-9)
        assert gate_fidelity(w, target_unitary(theta, phi, lam)) == pytest.approx(
            gate_fidelity(w0, target_unitary(theta, 0, 0)), abs=1e-9
        )


def test_reconfigure_single_eom():
    cfg = configure(RfWaveform.tone(0.7, 0.1))
    w = gate_of(cfg).w
    new = gate_of(reconfigure(cfg, 0.5, 2 * math.pi - 0.5)).w
    np.testing.assert_allclose(new, np.exp(1j * 0.5 * np.array([[0, -1], [1, 0]])) * w, atol=1e-12)
    with pytest.raises(ConfigError):
        reconfigure(cfg, 0.5, 0.2)


# ---- report -------------------------------------------------------------------------

def test_report_round_trip():
    u = target_unitary(1.0, 0.5, 0.25)
    rep = GateReport.build(0.9 * u, 1.0, 0.5, 0.25, params=[1.0, 2.0], scenario="3x1", seed=3, extra={"family": "small-index"})
    d = rep.to_dict()
    assert set(d) >= {"theta", "phi", "lambda", "W", "success", "fidelity", "params", "scenario", "seed"}
    back = GateReport.from_dict(d)
    np.testing.assert_array_equal(back.w, rep.w)
    assert back.extra == {"family": "small-index"}
    assert back.fidelity == pytest.approx(1.0)
    assert back.success == pytest.approx(0.81)
