"""Pauli-basis measurement model, photon-count simulation and Bayesian state estimation.

The X and Y settings use a single sinusoidally driven EOM as a probabilistic
Hadamard: at the index where J_0 = J_1 a photon in bins {0, 1} is split evenly,
and about 40% of the light scatters to other bins. Y adds a -pi/2 phase on
bin 1 first (S^dagger).

Density matrices come from a 2x4 complex matrix G with standard normal
entries, rho = G G^dag / Tr(G G^dag). Posterior samples are drawn with a
preconditioned Crank-Nicolson random walk, which leaves that Gaussian prior
invariant, so only the likelihood ratio enters the acceptance test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import bisect
from scipy.special import jv

from .gates import QubitState
from .multiport import ModeWindow, RfWaveform, ShaperPhases, eom_coefficients, eom_matrix, shaper_matrix

OUTCOMES = ("n0", "n1", "np", "nm", "npi", "nmi")
SETTINGS = ("Z", "X", "Y")
PARAM_DIM = 16
PROB_FLOOR = 1e-300
DENSITY_TOL = 1e-12


class SamplerDiagnosticError(RuntimeError):
    """The Markov chain failed its acceptance-rate check."""

    def __init__(self, message: str, samples: "PosteriorSamples | None" = None):
        super().__init__(message)
        self.samples = samples


def check_density(rho, tol: float = DENSITY_TOL) -> np.ndarray:
    """Return ``rho`` as an array, raising ValueError unless it is a valid 2x2 state."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise ValueError(f"density matrix must be 2x2, got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise ValueError(f"density matrix has trace {np.trace(rho).real}")
    if np.min(np.linalg.eigvalsh(rho)) < -tol:
        raise ValueError("density matrix has a negative eigenvalue")
    return rho


def projector_states() -> list[QubitState]:
    """|0>, |1>, |+>, |->, |+i>, |-i>, normalized, in the order of ``OUTCOMES``."""
    r = 1 / math.sqrt(2)
    return [
        QubitState(1, 0),
        QubitState(0, 1),
        QubitState(r, r),
        QubitState(r, -r),
        QubitState(r, 1j * r),
        QubitState(r, -1j * r),
    ]


_PROJECTORS = np.array([s.vector for s in projector_states()])


def born_probabilities(rho) -> np.ndarray:
    """<t|rho|t> for the six projector states."""
    rho = np.asarray(rho, dtype=complex)
    return np.real(np.einsum("ti,ij,tj->t", _PROJECTORS.conj(), rho, _PROJECTORS))


def analyzer_root() -> float:
    """Drive index of the probabilistic Hadamard, where J_0 = J_1 (about 1.4347 rad)."""
    return float(bisect(lambda x: jv(0, x) - jv(1, x), 1.2, 1.6, xtol=1e-13))


@dataclass(frozen=True)
class AnalyzerModel:
    h_index: float | None = None
    include_loss: bool = False

    def __post_init__(self):
        if self.h_index is None:
            object.__setattr__(self, "h_index", analyzer_root())
        if not self.h_index > 0:
            raise ValueError("analyzer index must be positive")


@lru_cache(maxsize=32)
def _analyzer_block(h_index: float, setting: str) -> np.ndarray:
    """Bins {0,1} -> bins {0,1} amplitude map for one measurement setting."""
    if setting == "Z":
        return np.eye(2, dtype=complex)
    window = ModeWindow.symmetric(16)
    v = eom_matrix(eom_coefficients(RfWaveform.tone(h_index), max_order=window.size - 1), window).matrix
    if setting == "Y":
        s_dag = ShaperPhases(ModeWindow(0, 1), (0.0, -math.pi / 2))
        # only bin 1 differs; the other bins are dark after the blocking shaper
        v = v @ shaper_matrix(s_dag, window).matrix
    elif setting != "X":
        raise ValueError(f"unknown setting {setting!r}; use Z, X or Y")
    idx = [window.position(0), window.position(1)]
    return v[np.ix_(idx, idx)]


def analyzer_matrix(model: AnalyzerModel, setting: str) -> np.ndarray:
    return _analyzer_block(float(model.h_index), setting)


def _detect(block: np.ndarray, rho: np.ndarray, include_loss: bool) -> np.ndarray:
    q = np.real(np.diag(block @ rho @ block.conj().T))
    q = np.clip(q, 0.0, None)
    return q if include_loss else q / q.sum()


def analyzer_probabilities(model: AnalyzerModel, s: QubitState, setting: str) -> tuple[float, float]:
    """Detection probabilities at bins 0 and 1 for a pure input state."""
    q = _detect(analyzer_matrix(model, setting), s.density(), model.include_loss)
    return float(q[0]), float(q[1])


def analyzer_density_probabilities(model: AnalyzerModel, rho) -> np.ndarray:
    """Six detection probabilities (Z pair, X pair, Y pair) for a density matrix."""
    rho = np.asarray(rho, dtype=complex)
    return np.concatenate([_detect(analyzer_matrix(model, st), rho, model.include_loss) for st in SETTINGS])


@dataclass
class TomographyDataset:
    counts: dict[str, float]
    budget: float | None = None
    seed: int | None = None
    dark_rate: float = 0.0

    def __post_init__(self):
        missing = set(OUTCOMES) - set(self.counts)
        if missing:
            raise ValueError(f"dataset is missing counts {sorted(missing)}")
        self.counts = {k: max(0.0, float(self.counts[k])) for k in OUTCOMES}

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.counts[k] for k in OUTCOMES])

    @property
    def total(self) -> float:
        return float(self.vector.sum())

    def to_dict(self) -> dict:
        return {"counts": dict(self.counts), "budget": self.budget, "seed": self.seed, "dark_rate": self.dark_rate}

    @classmethod
    def from_dict(cls, d: dict) -> "TomographyDataset":
        return cls(dict(d["counts"]), d.get("budget"), d.get("seed"), float(d.get("dark_rate") or 0.0))


def simulate_counts(
    rho,
    model: AnalyzerModel | None = None,
    budget: float = 1e5,
    seed: int | None = 0,
    dark_rate: float = 0.0,
    analytic: bool = False,
) -> TomographyDataset:
    """Dark-subtracted counts for the three settings.

    Each outcome is Poisson with mean ``budget * q + dark_rate``; the mean dark
    level is subtracted and negatives clamp to zero. ``analytic=True`` returns
    the noiseless means ``budget * q`` instead.
    """
    if not budget > 0:
        raise ValueError("budget must be positive")
    model = model or AnalyzerModel()
    q = analyzer_density_probabilities(model, check_density(rho, 1e-9))
    if analytic:
        counts = budget * q
    else:
        rng = np.random.default_rng(seed)
        counts = rng.poisson(budget * q + dark_rate).astype(float) - dark_rate
        counts = np.clip(counts, 0.0, None)
    return TomographyDataset(dict(zip(OUTCOMES, counts)), budget, seed, dark_rate)


def log_likelihood(rho, d: TomographyDataset) -> float:
    p = np.maximum(born_probabilities(rho), PROB_FLOOR)
    n = d.vector
    return float(np.sum(np.where(n > 0, n * np.log(p), 0.0)))


def density_from_params(x) -> np.ndarray:
    """rho = G G^dag / Tr(G G^dag) with G = (x[:8] + i x[8:]).reshape(2, 4)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (PARAM_DIM,):
        raise ValueError(f"expected {PARAM_DIM} parameters, got shape {x.shape}")
    g = (x[:8] + 1j * x[8:]).reshape(2, 4)
    m = g @ g.conj().T
    return m / np.real(np.trace(m))


def _loglik_fast(x: np.ndarray, n: tuple) -> float:
    # same value as log_likelihood(density_from_params(x), d), without building matrices
    re0, re1, im0, im1 = x[0:4], x[4:8], x[8:12], x[12:16]
    a = float(re0 @ re0 + im0 @ im0)
    b = float(re1 @ re1 + im1 @ im1)
    s = a + b
    rc = float(re0 @ re1 + im0 @ im1) / s
    ic = float(im0 @ re1 - re0 @ im1) / s
    p = (a / s, b / s, 0.5 + rc, 0.5 - rc, 0.5 - ic, 0.5 + ic)
    tot = 0.0
    for ni, pi in zip(n, p):
        if ni > 0:
            tot += ni * math.log(max(pi, PROB_FLOOR))
    return tot


@dataclass(frozen=True)
class ChainSettings:
    burn_in: int = 20_000
    thin: int = 20
    target_accept: float = 0.25
    initial_step: float = 0.5
    adapt_every: int = 100


@dataclass
class PosteriorSamples:
    samples: np.ndarray
    acceptance_rate: float
    thinning: int
    step: float
    burn_in: int
    diagnostics: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.samples)

    def mean(self) -> np.ndarray:
        return self.samples.mean(axis=0)


def sample_posterior(
    d: TomographyDataset,
    R: int = 1024,
    chain: ChainSettings = ChainSettings(),
    seed: int | None = 0,
) -> PosteriorSamples:
    """Draw ``R`` density matrices from the posterior given dataset ``d``.

    The pCN step ``x' = sqrt(1 - beta^2) x + beta xi`` is tuned during burn-in
    toward ``chain.target_accept`` and then frozen. With ``beta`` at its cap of
    1 the proposals are independent prior draws; a near-flat likelihood then
    accepts almost everything, which is exact sampling rather than a stuck
    chain, so the acceptance window is only enforced for ``beta < 1``.

    Raises
    ------
    SamplerDiagnosticError
        If the post-burn-in acceptance rate leaves [0.05, 0.9] with beta < 1.
    """
    if R < 1:
        raise ValueError("R must be at least 1")
    rng = np.random.default_rng(seed)
    n = tuple(float(v) for v in d.vector)
    x = rng.standard_normal(PARAM_DIM)
    ll = _loglik_fast(x, n)
    log_beta = math.log(chain.initial_step)
    accepted = 0
    for i in range(1, chain.burn_in + 1):
        beta = min(1.0, math.exp(log_beta))
        prop = math.sqrt(1 - beta * beta) * x + beta * rng.standard_normal(PARAM_DIM)
        llp = _loglik_fast(prop, n)
        if math.log(rng.random()) < llp - ll:
            x, ll = prop, llp
            accepted += 1
        if i % chain.adapt_every == 0:
            rate = accepted / chain.adapt_every
            gain = 1.0 / math.sqrt(i / chain.adapt_every)
            log_beta = min(0.0, log_beta + 2.0 * gain * (rate - chain.target_accept))
            accepted = 0

    beta = min(1.0, math.exp(log_beta))
    shrink = math.sqrt(1 - beta * beta)
    out = np.empty((R, 2, 2), dtype=complex)
    accepted = 0
    steps = R * chain.thin
    for i in range(steps):
        prop = shrink * x + beta * rng.standard_normal(PARAM_DIM)
        llp = _loglik_fast(prop, n)
        if math.log(rng.random()) < llp - ll:
            x, ll = prop, llp
            accepted += 1
        if (i + 1) % chain.thin == 0:
            out[(i + 1) // chain.thin - 1] = density_from_params(x)
    rate = accepted / steps
    result = PosteriorSamples(out, rate, chain.thin, beta, chain.burn_in)
    if beta < 1.0 and not 0.05 <= rate <= 0.9:
        raise SamplerDiagnosticError(f"acceptance rate {rate:.3f} outside [0.05, 0.9] (step {beta:.3g})", result)
    return result


def fidelity_stats(samples, phi: QubitState) -> tuple[float, float]:
    """Mean and standard deviation of <phi|rho_r|phi> over the samples."""
    rhos = samples.samples if isinstance(samples, PosteriorSamples) else np.asarray(samples)
    if len(rhos) == 0:
        raise ValueError("no samples")
    v = phi.vector
    f = np.real(np.einsum("i,rij,j->r", v.conj(), rhos, v))
    return float(f.mean()), float(f.std())


def trace_distance(a, b) -> float:
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(np.asarray(a) - np.asarray(b)))))


def purity(rho) -> float:
    rho = np.asarray(rho)
    return float(np.real(np.trace(rho @ rho)))


def bloch_vector(rho) -> np.ndarray:
    rho = np.asarray(rho)
    return np.array([2 * rho[0, 1].real, -2 * rho[0, 1].imag, (rho[0, 0] - rho[1, 1]).real])


def post_selected_output(w, psi: QubitState) -> np.ndarray:
    """Density matrix of W|psi> / ||W|psi>||, the state the analyzer sees."""
    out = QubitState.from_vector(np.asarray(w) @ psi.vector).normalized()
    return out.density()
