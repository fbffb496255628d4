"""Frequency-bin multiport built from electro-optic modulators and pulse shapers.

A photon entering bin ``n`` leaves in bin ``m`` with amplitude ``V[m, n]``.
An EOM driven by the periodic phase ``A(t)`` couples bins through the Fourier
coefficients

    c_j = (1/T) * integral_T exp(i A(t)) exp(+i j dw t) dt,

so that ``V[m, n] = c_{m-n}``. With this convention a single tone
``Theta sin(dw t)`` gives ``c_j = J_{-j}(Theta) = (-1)^j J_j(Theta)``, and
delaying the drive by ``tau`` multiplies ``c_j`` by ``exp(+i j dw tau)``.
The cascade product applies the first element in the list to the input first,
i.e. ``V = E_last @ ... @ S_1 @ E_1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

QUADRATURE_POINTS = 2**12
PARSEVAL_FLOOR = 0.999
MIN_HALF_WIDTH = 16


class TruncationError(ValueError):
    """Raised when a coefficient set or mode window is too small."""


class ConfigError(ValueError):
    """Raised for malformed QFP configurations."""


@dataclass(frozen=True)
class FrequencyGrid:
    """Comb of bins spaced by ``delta_omega`` (rad/s) around ``omega0``."""

    delta_omega: float = 2 * math.pi * 25e9
    omega0: float = 0.0

    def __post_init__(self):
        if not self.delta_omega > 0:
            raise ConfigError(f"delta_omega must be positive, got {self.delta_omega}")

    @property
    def period(self) -> float:
        return 2 * math.pi / self.delta_omega

    def frequency(self, n):
        return self.omega0 + np.asarray(n) * self.delta_omega


@dataclass(frozen=True)
class Harmonic:
    """One sinusoidal component of an rf drive.

    ``delay`` is a fraction of the period and is stored reduced to [0, 1).
    """

    order: int
    index: float
    delay: float = 0.0

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise ConfigError(f"harmonic order must be a positive integer, got {self.order}")
        if self.index < 0:
            raise ConfigError(f"modulation index must be nonnegative, got {self.index}")
        object.__setattr__(self, "order", int(self.order))
        object.__setattr__(self, "index", float(self.index))
        object.__setattr__(self, "delay", float(self.delay) % 1.0)


@dataclass(frozen=True)
class RfWaveform:
    harmonics: tuple[Harmonic, ...] = ()

    def __post_init__(self):
        hs = tuple(h if isinstance(h, Harmonic) else Harmonic(*h) for h in self.harmonics)
        orders = [h.order for h in hs]
        if len(set(orders)) != len(orders):
            raise ConfigError(f"harmonic orders must be distinct, got {orders}")
        object.__setattr__(self, "harmonics", hs)

    @classmethod
    def tone(cls, index: float, delay: float = 0.0, order: int = 1) -> "RfWaveform":
        return cls((Harmonic(order, index, delay),))

    @property
    def total_index(self) -> float:
        return sum(h.index for h in self.harmonics)

    @property
    def bandwidth(self) -> float:
        """Order-weighted index sum; sidebands decay quickly beyond this many bins."""
        return sum(h.order * h.index for h in self.harmonics)

    def delayed(self, shift: float) -> "RfWaveform":
        """Same waveform with every harmonic delayed by ``shift`` periods."""
        return RfWaveform(tuple(Harmonic(h.order, h.index, h.delay + shift) for h in self.harmonics))


@dataclass(frozen=True)
class ModeWindow:
    lo: int
    hi: int

    def __post_init__(self):
        if not (self.lo <= 0 and self.hi >= 1):
            raise TruncationError(f"window [{self.lo}, {self.hi}] must contain bins 0 and 1")

    @classmethod
    def symmetric(cls, half_width: int) -> "ModeWindow":
        """``half_width`` bins on each side of the computational pair {0, 1}."""
        return cls(-int(half_width), 1 + int(half_width))

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    @property
    def bins(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    @property
    def half_width(self) -> int:
        return min(-self.lo, self.hi - 1)

    def position(self, k: int) -> int:
        if not self.lo <= k <= self.hi:
            raise TruncationError(f"bin {k} outside window [{self.lo}, {self.hi}]")
        return k - self.lo


@dataclass(frozen=True)
class ShaperPhases:
    """Per-bin spectral phase, plus an optional linear ramp ``slope * k``.

    Bins outside ``window`` take the phase of the nearest edge bin; the ramp
    applies everywhere. Keeping the ramp separate lets delay-like linear phases
    act on any simulation window without re-tabulating.
    """

    window: ModeWindow
    phases: tuple[float, ...]
    slope: float = 0.0

    def __post_init__(self):
        phases = tuple(float(p) for p in np.ravel(self.phases))
        if len(phases) != self.window.size:
            raise ConfigError(f"expected {self.window.size} phases for {self.window}, got {len(phases)}")
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "slope", float(self.slope))

    @classmethod
    def flat(cls, window: ModeWindow | None = None) -> "ShaperPhases":
        window = window or ModeWindow(0, 1)
        return cls(window, (0.0,) * window.size)

    @classmethod
    def step(cls, alpha: float, window: ModeWindow | None = None) -> "ShaperPhases":
        """Phase 0 on bins <= 0 and ``alpha`` on bins >= 1."""
        window = window or ModeWindow(0, 1)
        return cls(window, tuple(alpha if k >= 1 else 0.0 for k in window.bins))

    def phase_at(self, bins) -> np.ndarray:
        bins = np.asarray(bins)
        idx = np.clip(bins - self.window.lo, 0, self.window.size - 1)
        return np.asarray(self.phases)[idx] + self.slope * bins


@dataclass(frozen=True)
class Eom:
    waveform: RfWaveform


@dataclass(frozen=True)
class Shaper:
    phases: ShaperPhases


Element = Union[Eom, Shaper]


@dataclass(frozen=True)
class QfpConfig:
    """Alternating EOM/shaper cascade, listed in the order light traverses it."""

    elements: tuple[Element, ...]
    grid: FrequencyGrid = field(default_factory=FrequencyGrid)

    def __post_init__(self):
        els = tuple(self.elements)
        object.__setattr__(self, "elements", els)
        if len(els) % 2 != 1:
            raise ConfigError(f"a QFP needs an odd number of elements, got {len(els)}")
        for i, el in enumerate(els):
            want = Eom if i % 2 == 0 else Shaper
            if not isinstance(el, want):
                raise ConfigError(f"element {i} must be {want.__name__}, got {type(el).__name__}")

    @property
    def eoms(self) -> list[Eom]:
        return list(self.elements[::2])

    @property
    def shapers(self) -> list[Shaper]:
        return list(self.elements[1::2])

    @property
    def bandwidth(self) -> float:
        return max(e.waveform.bandwidth for e in self.eoms)

    def default_window(self) -> ModeWindow:
        return ModeWindow.symmetric(default_half_width(self.bandwidth))


@dataclass(frozen=True, eq=False)
class TruncatedMultiport:
    window: ModeWindow
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (self.window.size, self.window.size):
            raise ValueError(f"matrix shape {m.shape} does not match window size {self.window.size}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __matmul__(self, other: "TruncatedMultiport") -> "TruncatedMultiport":
        if self.window != other.window:
            raise TruncationError("cannot compose multiports on different windows")
        return TruncatedMultiport(self.window, self.matrix @ other.matrix)

    def element(self, m: int, n: int) -> complex:
        return complex(self.matrix[self.window.position(m), self.window.position(n)])


@dataclass(frozen=True, eq=False)
class ComputationalGate:
    """2x2 block of the multiport on bins {0, 1}."""

    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=complex)
        if w.shape != (2, 2):
            raise ValueError(f"computational gate must be 2x2, got {w.shape}")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def max_singular_value(self) -> float:
        return float(np.linalg.norm(self.w, 2))


def default_half_width(bandwidth: float) -> int:
    return max(MIN_HALF_WIDTH, 4 * math.ceil(bandwidth) + 8)


def default_max_order(w: RfWaveform) -> int:
    # order-weighted: a harmonic of order r moves light in steps of r bins
    return 4 * math.ceil(w.bandwidth) + 8


def eval_waveform(w: RfWaveform, grid: FrequencyGrid, t):
    """Drive phase A(t) in radians; ``t`` may be an array."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for h in w.harmonics:
        out = out + h.index * np.sin(h.order * grid.delta_omega * (t - h.delay * grid.period))
    return out if out.ndim else float(out)


def _phase_samples(w: RfWaveform, n: int = QUADRATURE_POINTS) -> np.ndarray:
    # sampled in units of the period, so the grid drops out
    x = 2 * np.pi * np.arange(n) / n
    a = np.zeros(n)
    for h in w.harmonics:
        a += h.index * np.sin(h.order * (x - 2 * np.pi * h.delay))
    return a


def coefficients_from_phase(phase: np.ndarray, max_order: int) -> np.ndarray:
    """Fourier coefficients c_{-K..K} of exp(i*phase) sampled uniformly over one period.

    ``phase`` may carry leading batch dimensions; the last axis is time.
    """
    n = phase.shape[-1]
    if 2 * max_order + 1 > n:
        raise TruncationError(f"max_order {max_order} exceeds the {n}-point quadrature")
    spec = np.fft.ifft(np.exp(1j * phase), axis=-1)
    return np.concatenate([spec[..., n - max_order:], spec[..., : max_order + 1]], axis=-1)


def eom_coefficients(w: RfWaveform, grid: FrequencyGrid | None = None, max_order: int | None = None) -> np.ndarray:
    """Coupling coefficients ``c[j + K]`` for ``j`` in ``[-K, K]``.

    The grid only fixes physical units; delays are stored in periods, so the
    coefficients do not depend on it.

    Raises
    ------
    TruncationError
        If ``max_order < 1`` or the retained power sum drops below 0.999.
    """
    k = default_max_order(w) if max_order is None else int(max_order)
    if k < 1:
        raise TruncationError(f"max_order must be >= 1, got {k}")
    c = coefficients_from_phase(_phase_samples(w), k)
    power = float(np.sum(np.abs(c) ** 2))
    if power < PARSEVAL_FLOOR:
        raise TruncationError(
            f"max_order {k} keeps only {power:.6f} of the modulated power; increase it"
        )
    return c


def eom_matrix(coeffs: np.ndarray, window: ModeWindow) -> TruncatedMultiport:
    """Banded Toeplitz matrix ``V[m, n] = c_{m-n}`` restricted to ``window``."""
    coeffs = np.asarray(coeffs, dtype=complex)
    k = (coeffs.shape[-1] - 1) // 2
    if coeffs.shape[-1] != 2 * k + 1:
        raise ValueError("coefficient vector must have odd length 2K+1")
    if window.size - 1 > k:
        raise TruncationError(
            f"window of {window.size} bins needs coefficients up to order {window.size - 1}, have {k}"
        )
    return TruncatedMultiport(window, toeplitz_from_coefficients(coeffs, window.size))


def toeplitz_from_coefficients(coeffs: np.ndarray, size: int) -> np.ndarray:
    """Batched ``c_{m-n}`` matrices; ``coeffs`` has shape (..., 2K+1) with K >= size-1."""
    k = (coeffs.shape[-1] - 1) // 2
    offsets = np.arange(size)[:, None] - np.arange(size)[None, :]
    return coeffs[..., offsets + k]


def shaper_matrix(s: ShaperPhases, window: ModeWindow | None = None) -> TruncatedMultiport:
    window = window or s.window
    return TruncatedMultiport(window, np.diag(np.exp(1j * s.phase_at(window.bins))))


def cascade(cfg: QfpConfig, window: ModeWindow | None = None, max_order: int | None = None) -> TruncatedMultiport:
    """Multiport of the whole cascade over ``window``.

    ``max_order`` defaults to the widest coupling the window can hold
    (``window.size - 1``); passing a smaller value raises ``TruncationError``.
    """
    window = window or cfg.default_window()
    k = window.size - 1 if max_order is None else int(max_order)
    v = np.eye(window.size, dtype=complex)
    for el in cfg.elements:
        if isinstance(el, Eom):
            m = eom_matrix(eom_coefficients(el.waveform, cfg.grid, k), window).matrix
        else:
            m = shaper_matrix(el.phases, window).matrix
        v = m @ v
    return TruncatedMultiport(window, v)


def extract_computational(v: TruncatedMultiport) -> ComputationalGate:
    i0, i1 = v.window.position(0), v.window.position(1)
    return ComputationalGate(v.matrix[np.ix_([i0, i1], [i0, i1])])


def gate_of(cfg: QfpConfig, window: ModeWindow | None = None) -> ComputationalGate:
    """Shortcut for ``extract_computational(cascade(cfg, window))``."""
    return extract_computational(cascade(cfg, window))


def unitarity_defect(v: TruncatedMultiport, guard: int) -> float:
    """Worst deviation from unit norm over rows/columns at least ``guard`` bins from the edges."""
    n = v.window.size
    if 2 * guard >= n:
        raise TruncationError(f"guard {guard} leaves no interior bins in a {n}-bin window")
    inner = slice(guard, n - guard)
    p = np.abs(v.matrix) ** 2
    cols = p.sum(axis=0)[inner]
    rows = p.sum(axis=1)[inner]
    return float(max(np.max(np.abs(cols - 1)), np.max(np.abs(rows - 1))))


def configure(*elements: Element | RfWaveform | ShaperPhases, grid: FrequencyGrid | None = None) -> QfpConfig:
    """Build a QfpConfig from bare waveforms and phase patterns."""
    els: list[Element] = []
    for el in elements:
        if isinstance(el, RfWaveform):
            el = Eom(el)
        elif isinstance(el, ShaperPhases):
            el = Shaper(el)
        els.append(el)
    return QfpConfig(tuple(els), grid or FrequencyGrid())


def identity_config(n_shapers: int = 1, grid: FrequencyGrid | None = None) -> QfpConfig:
    els: list = [RfWaveform()]
    for _ in range(n_shapers):
        els += [ShaperPhases.flat(), RfWaveform()]
    return configure(*els, grid=grid)


def _harmonics_of(seq: Sequence) -> tuple[Harmonic, ...]:
    return tuple(Harmonic(int(o), float(i), float(d)) for o, i, d in seq)


def config_to_dict(cfg: QfpConfig) -> dict:
    elements = []
    for el in cfg.elements:
        if isinstance(el, Eom):
            elements.append({"eom": {"harmonics": [[h.order, h.index, h.delay] for h in el.waveform.harmonics]}})
        else:
            p = el.phases
            elements.append({"shaper": {"lo": p.window.lo, "phases": list(p.phases), "slope": p.slope}})
    return {"grid": {"delta_omega": cfg.grid.delta_omega, "omega0": cfg.grid.omega0}, "elements": elements}


def config_from_dict(d: dict) -> QfpConfig:
    g = d.get("grid", {})
    grid = FrequencyGrid(float(g.get("delta_omega", FrequencyGrid.delta_omega)), float(g.get("omega0", 0.0)))
    els: list[Element] = []
    for item in d["elements"]:
        if len(item) != 1:
            raise ConfigError(f"element must have exactly one tag, got {sorted(item)}")
        if "eom" in item:
            els.append(Eom(RfWaveform(_harmonics_of(item["eom"].get("harmonics", [])))))
        elif "shaper" in item:
            s = item["shaper"]
            phases = list(s["phases"])
            window = ModeWindow(int(s["lo"]), int(s["lo"]) + len(phases) - 1)
            els.append(Shaper(ShaperPhases(window, tuple(phases), float(s.get("slope", 0.0)))))
        else:
            raise ConfigError(f"unknown element tag {sorted(item)}")
    return QfpConfig(tuple(els), grid)
