"""Closed-form tunable frequency beamsplitter.

Two EOMs driven by pi-shifted sinewaves of index Theta enclose a shaper that
applies a phase step ``alpha`` between bins 0 and 1. The computational block
has a Bessel-series closed form, so this module doubles as an analytic oracle
for the numerical cascade.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import jv

from .gates import gate_fidelity, target_unitary
from .multiport import ComputationalGate, FrequencyGrid, QfpConfig, RfWaveform, ShaperPhases, configure

HADAMARD_INDEX = 0.829
TAIL_TOLERANCE = 1e-14


@dataclass(frozen=True)
class BeamsplitterSpec:
    theta_mod: float = HADAMARD_INDEX
    alpha: float = 0.0
    series_terms: int = 40

    def __post_init__(self):
        if self.theta_mod < 0:
            raise ValueError(f"modulation index must be nonnegative, got {self.theta_mod}")
        if self.series_terms < 8:
            raise ValueError(f"series_terms must be at least 8, got {self.series_terms}")


def _bessel_sum(theta: float, terms: int) -> float:
    k = np.arange(1, terms + 1)
    tail = abs(jv(terms + 1, theta) * jv(terms, theta))
    if tail >= TAIL_TOLERANCE:
        raise ValueError(f"{terms} series terms leave a tail of {tail:.2e} at index {theta}")
    return float(np.sum(jv(k, theta) * jv(k - 1, theta)))


def bs_matrix(spec: BeamsplitterSpec) -> ComputationalGate:
    e = np.exp(1j * spec.alpha)
    j0sq = jv(0, spec.theta_mod) ** 2
    off = (1 - e) * _bessel_sum(spec.theta_mod, spec.series_terms)
    mix = (1 + e) * (1 - j0sq) / 2
    return ComputationalGate(np.array([[j0sq + mix, off], [off, e * j0sq + mix]]))


def reflectivity_transmissivity(spec: BeamsplitterSpec) -> tuple[float, float]:
    """(R, T) = (|W10|^2, |W00|^2)."""
    w = bs_matrix(spec).w
    return float(abs(w[1, 0]) ** 2), float(abs(w[0, 0]) ** 2)


def bloch_angles(c0: complex, c1: complex) -> tuple[float, float]:
    """Bloch angles of the normalized state c0|0> + c1|1>, phi wrapped to (-pi, pi]."""
    r0, r1 = abs(c0), abs(c1)
    if r0 == 0 and r1 == 0:
        raise ValueError("zero state has no Bloch angles")
    theta = 2 * math.atan2(r1, r0)
    if r1 == 0 or r0 == 0:
        return theta, 0.0
    phi = math.remainder(np.angle(c1) - np.angle(c0), 2 * math.pi)
    if phi == -math.pi:
        phi = math.pi
    return theta, phi


def bloch_trajectory(specs) -> list[tuple[float, float]]:
    """Bloch angles of the post-selected output W|0> for each spec."""
    out = []
    for s in specs:
        w = bs_matrix(s).w
        out.append(bloch_angles(w[0, 0], w[1, 0]))
    return out


def bs_config(spec: BeamsplitterSpec, grid: FrequencyGrid | None = None) -> QfpConfig:
    return configure(
        RfWaveform.tone(spec.theta_mod, 0.0),
        ShaperPhases.step(spec.alpha),
        RfWaveform.tone(spec.theta_mod, 0.5),
        grid=grid,
    )


def fidelity_vs_ideal(spec: BeamsplitterSpec) -> float:
    """F_W of the beamsplitter against U(theta, phi, 0) read off its own trajectory point."""
    theta, phi = bloch_trajectory([spec])[0]
    return gate_fidelity(bs_matrix(spec), target_unitary(theta, phi % (2 * math.pi), 0.0))


def alpha_grid(n: int) -> np.ndarray:
    """``n`` evenly spaced shaper phases covering [0, 2pi] inclusive."""
    if n < 2:
        raise ValueError("need at least two alpha points")
    return np.linspace(0.0, 2 * math.pi, n)
