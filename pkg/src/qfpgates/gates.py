"""Single-qubit targets, gate metrics, and the delay/linear-phase reconfiguration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .multiport import ComputationalGate, ConfigError, Eom, QfpConfig, Shaper

SLACK = 1e-9


class UndefinedFidelityError(ValueError):
    """Fidelity requested for a gate that transmits nothing (P_W = 0)."""


def target_unitary(theta: float, phi: float = 0.0, lam: float = 0.0) -> np.ndarray:
    """U(theta, phi, lambda) acting on bins (0, 1)."""
    if not -SLACK <= theta <= math.pi + SLACK:
        raise ValueError(f"theta must lie in [0, pi], got {theta}")
    for name, v in (("phi", phi), ("lambda", lam)):
        if not -SLACK <= v < 2 * math.pi + SLACK:
            raise ValueError(f"{name} must lie in [0, 2pi), got {v}")
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
        ],
        dtype=complex,
    )


HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


def _w(w) -> np.ndarray:
    return w.w if isinstance(w, ComputationalGate) else np.asarray(w, dtype=complex)


def success_probability(w) -> float:
    """P_W = Tr(W^dag W) / 2."""
    w = _w(w)
    return float(np.real(np.trace(w.conj().T @ w)) / 2)


def gate_fidelity(w, u) -> float:
    """F_W = |Tr(W^dag U)|^2 / (4 P_W); insensitive to any complex scale on W."""
    w = _w(w)
    p = success_probability(w)
    if p <= 0:
        raise UndefinedFidelityError("gate fidelity is undefined when P_W = 0")
    return float(abs(np.trace(w.conj().T @ np.asarray(u))) ** 2 / (4 * p))


@dataclass(frozen=True)
class GateMetrics:
    success: float
    fidelity: float

    @classmethod
    def of(cls, w, u) -> "GateMetrics":
        return cls(success_probability(w), gate_fidelity(w, u))


@dataclass(frozen=True)
class QubitState:
    c0: complex
    c1: complex

    @classmethod
    def from_vector(cls, v) -> "QubitState":
        v = np.asarray(v, dtype=complex)
        return cls(complex(v[0]), complex(v[1]))

    @classmethod
    def bloch(cls, theta: float, phi: float) -> "QubitState":
        """cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>."""
        return cls(math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2))

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.c0, self.c1], dtype=complex)

    @property
    def norm2(self) -> float:
        return abs(self.c0) ** 2 + abs(self.c1) ** 2

    def normalized(self) -> "QubitState":
        n = math.sqrt(self.norm2)
        if n == 0:
            raise ValueError("cannot normalize the zero vector")
        return QubitState(self.c0 / n, self.c1 / n)

    def density(self) -> np.ndarray:
        v = self.vector
        return np.outer(v, v.conj())


def apply_gate(matrix, s: QubitState) -> QubitState:
    """Output amplitudes; with a lossy W the squared norm is the retention probability."""
    return QubitState.from_vector(_w(matrix) @ s.vector)


def reconfigure(cfg: QfpConfig, phi: float, lam: float) -> QfpConfig:
    """Turn a QFP realizing g*U(theta,0,0) into one realizing g*U(theta,phi,lambda).

    The first EOM is delayed by -lambda/dw and the last by phi/dw; the first
    shaper gains the ramp k*lambda and the last the ramp k*phi (a lone shaper
    gets both). Everything else is left as is, so the new multiport obeys
    W'[m, n] = exp(i(m phi + n lambda)) W[m, n] on every bin pair.
    """
    els = list(cfg.elements)
    if not isinstance(els[0], Eom) or not isinstance(els[-1], Eom):
        raise ConfigError("reconfigure needs EOMs at both ends")
    if len(els) == 1:
        if abs(math.remainder(phi + lam, 2 * math.pi)) > 1e-12:
            raise ConfigError("a lone EOM can only realize phi = -lambda")
        return replace(cfg, elements=(Eom(els[0].waveform.delayed(phi / (2 * math.pi))),))
    if phi == 0 and lam == 0:
        return cfg

    els[0] = Eom(els[0].waveform.delayed(-lam / (2 * math.pi)))
    els[-1] = Eom(els[-1].waveform.delayed(phi / (2 * math.pi)))
    first, last = 1, len(els) - 2
    s = els[first].phases
    els[first] = Shaper(replace(s, slope=s.slope + lam))
    s = els[last].phases
    els[last] = Shaper(replace(s, slope=s.slope + phi))
    return replace(cfg, elements=tuple(els))


def complex_to_pairs(m) -> list:
    return np.stack([np.real(m), np.imag(m)], axis=-1).tolist()


def pairs_to_complex(p) -> np.ndarray:
    a = np.asarray(p, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


@dataclass
class GateReport:
    """Outcome of synthesizing one gate, in the shape written to disk."""

    theta: float
    phi: float
    lam: float
    w: np.ndarray
    success: float
    fidelity: float
    params: list[float] = field(default_factory=list)
    scenario: str = ""
    seed: int | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def build(cls, w, theta, phi=0.0, lam=0.0, **kw) -> "GateReport":
        w = _w(w)
        u = target_unitary(theta, phi, lam)
        return cls(theta, phi, lam, w, success_probability(w), gate_fidelity(w, u), **kw)

    def to_dict(self) -> dict:
        d = {
            "theta": self.theta,
            "phi": self.phi,
            "lambda": self.lam,
            "W": complex_to_pairs(self.w),
            "success": self.success,
            "fidelity": self.fidelity,
            "params": [float(x) for x in self.params],
            "scenario": self.scenario,
            "seed": self.seed,
        }
        d.update(self.extra)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GateReport":
        known = {"theta", "phi", "lambda", "W", "success", "fidelity", "params", "scenario", "seed"}
        return cls(
            theta=d["theta"],
            phi=d["phi"],
            lam=d["lambda"],
            w=pairs_to_complex(d["W"]),
            success=d["success"],
            fidelity=d["fidelity"],
            params=list(d.get("params", [])),
            scenario=d.get("scenario", ""),
            seed=d.get("seed"),
            extra={k: v for k, v in d.items() if k not in known},
        )
