"""End-to-end runs behind the CLI: gate synthesis with reconfiguration,
beamsplitter tables, and simulated tomography of rotated states."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import beamsplitter as bs
from .gates import GateReport, QubitState, reconfigure, success_probability
from .io import read_json, write_json
from .multiport import ModeWindow, QfpConfig, gate_of
from .synthesis import PsoSettings, Scenario, SynthesisError, SynthesisResult, result_from_params, synthesize
from .tomography import (
    AnalyzerModel,
    ChainSettings,
    SamplerDiagnosticError,
    fidelity_stats,
    post_selected_output,
    sample_posterior,
    simulate_counts,
)

log = logging.getLogger(__name__)

# number of phi values per theta for the 41-gate preset, pole-to-pole
FIG3_PHI_COUNTS = (1, 3, 4, 5, 5, 5, 5, 5, 4, 3, 1)
_GOLDEN = (math.sqrt(5) - 1) / 2


def fig3_gates() -> list[tuple[float, float]]:
    """41 deterministic (theta, phi) pairs: 11 uniform theta in [0, pi].

    Each theta row gets evenly spaced phi values, rotated by a golden-ratio
    offset per row so rows do not line up. The poles get a single phi = 0.
    """
    out = []
    n_theta = len(FIG3_PHI_COUNTS)
    for i, count in enumerate(FIG3_PHI_COUNTS):
        theta = math.pi * i / (n_theta - 1)
        if count == 1:
            out.append((theta, 0.0))
            continue
        for j in range(count):
            out.append((theta, 2 * math.pi * ((j / count + i * _GOLDEN) % 1.0)))
    return out


def _window(half_width: int | None) -> ModeWindow | None:
    return None if half_width is None else ModeWindow.symmetric(half_width)


def _cache_key(theta: float, scenario: Scenario, settings: PsoSettings, restarts: int) -> str:
    blob = json.dumps(
        [float(theta).hex(), scenario.variant, scenario.index_bound, settings.__dict__, restarts], sort_keys=True
    )
    return hashlib.sha256(blob.encode()).hexdigest()[:20]


@dataclass
class SynthOutcome:
    result: SynthesisResult
    config: QfpConfig
    report: GateReport
    feasible: bool


def synthesize_gate(
    theta: float,
    phi: float = 0.0,
    lam: float = 0.0,
    scenario: Scenario | str = "3x1",
    settings: PsoSettings = PsoSettings(),
    restarts: int = 8,
    window: int | None = None,
    cache_dir=None,
    memo: dict | None = None,
) -> SynthOutcome:
    """Synthesize U(theta,0,0), then move it to (phi, lambda) by delays and linear phases.

    ``cache_dir`` persists base solutions across runs; ``memo`` shares them
    within one run (gates that differ only in phi reuse one synthesis).
    """
    scenario = Scenario(scenario) if isinstance(scenario, str) else scenario
    key = _cache_key(theta, scenario, settings, restarts)
    if memo is not None and key in memo:
        res, feasible = memo[key]
    else:
        res, feasible = _base_solution(theta, scenario, settings, restarts, cache_dir, key)
        if memo is not None:
            memo[key] = (res, feasible)
    cfg = reconfigure(res.config, phi, lam)
    w = gate_of(cfg, _window(window))
    report = GateReport.build(
        w, theta, phi, lam, params=list(map(float, res.params)), scenario=scenario.variant, seed=settings.seed
    )
    report.extra["family"] = res.family
    report.extra["refined"] = bool(res.refined)
    return SynthOutcome(res, cfg, report, feasible)


def _base_solution(theta, scenario, settings, restarts, cache_dir, key):
    cached = None
    if cache_dir is not None:
        cache_file = Path(cache_dir) / f"synth_{key}.json"
        if cache_file.exists():
            cached = read_json(cache_file)
    if cached is not None:
        p = np.array(cached["params"])
        res = result_from_params(scenario, theta, p, cached["cost_history"], cached["refined"], settings.seed)
        feasible = cached["feasible"]
    else:
        try:
            res = synthesize(theta, scenario, settings, restarts)
            feasible = True
        except SynthesisError as exc:
            res, feasible = exc.best, False
        if cache_dir is not None:
            write_json(
                cache_file,
                {
                    "params": [float(x) for x in res.params],
                    "cost_history": [float(c) for c in res.cost_history],
                    "refined": bool(res.refined),
                    "feasible": feasible,
                },
            )
    return res, feasible


BS_HEADER = ["alpha", "R", "T", "theta", "phi", "fidelity_vs_ideal", "crosscheck"]


def beamsplitter_table(theta_mod: float = bs.HADAMARD_INDEX, n_alpha: int = 21, window: int | None = None) -> list[list]:
    """Rows of BS_HEADER; ``crosscheck`` is max |analytic W - cascade W|."""
    rows = []
    for alpha in bs.alpha_grid(n_alpha):
        spec = bs.BeamsplitterSpec(theta_mod, float(alpha))
        r, t = bs.reflectivity_transmissivity(spec)
        theta, phi = bs.bloch_trajectory([spec])[0]
        numeric = gate_of(bs.bs_config(spec), _window(window)).w
        cross = float(np.max(np.abs(bs.bs_matrix(spec).w - numeric)))
        rows.append([float(alpha), r, t, theta, phi, bs.fidelity_vs_ideal(spec), cross])
    return rows


TOMO_HEADER = [
    "label", "theta", "phi", "fidelity_mean", "fidelity_std",
    "gate_success", "gate_fidelity", "acceptance", "status",
]


@dataclass
class TomoSettings:
    budget: float = 1e5
    samples: int = 1024
    dark_rate: float = 0.0
    include_loss: bool = False
    chain: ChainSettings = ChainSettings()


def tomography_run(w, ideal: QubitState, tomo: TomoSettings, count_seed: int, chain_seed: int):
    """Simulate counts on the post-selected output W|0>, sample the posterior, score against ``ideal``."""
    rho = post_selected_output(w, QubitState(1, 0))
    model = AnalyzerModel(include_loss=tomo.include_loss)
    data = simulate_counts(rho, model, tomo.budget, count_seed, tomo.dark_rate)
    status = "ok"
    try:
        post = sample_posterior(data, tomo.samples, tomo.chain, chain_seed)
    except SamplerDiagnosticError as exc:
        post, status = exc.samples, "sampler-diagnostic"
    mean, std = fidelity_stats(post, ideal)
    return mean, std, post, status


def _seeds(seed: int, n: int) -> list[tuple[int, int]]:
    out = []
    for child in np.random.SeedSequence(seed).spawn(n):
        a, b = child.generate_state(2)
        out.append((int(a), int(b)))
    return out


def rotation_tomography(
    gates,
    seed: int = 0,
    tomo: TomoSettings | None = None,
    scenario: Scenario | str = "3x1",
    settings: PsoSettings | None = None,
    restarts: int = 8,
    window: int | None = None,
    cache_dir=None,
) -> list[list]:
    """Rows of TOMO_HEADER for gates U(theta, phi, 0) applied to |0>."""
    tomo = tomo or TomoSettings()
    settings = settings or PsoSettings(seed=seed)
    rows = []
    memo: dict = {}
    for k, ((theta, phi), (s1, s2)) in enumerate(zip(gates, _seeds(seed, len(gates)))):
        out = synthesize_gate(theta, phi, 0.0, scenario, settings, restarts, window, cache_dir, memo)
        mean, std, post, status = tomography_run(out.report.w, QubitState.bloch(theta, phi), tomo, s1, s2)
        if not out.feasible:
            status = "synthesis-infeasible" if status == "ok" else status + "+synthesis-infeasible"
        log.info("gate %d theta=%.4f phi=%.4f F_rho=%.5f+-%.5f", k, theta, phi, mean, std)
        rows.append([f"g{k:02d}", theta, phi, mean, std, out.report.success, out.report.fidelity, post.acceptance_rate, status])
    return rows


def beamsplitter_tomography(
    theta_mod: float = bs.HADAMARD_INDEX,
    n_alpha: int = 21,
    seed: int = 0,
    tomo: TomoSettings | None = None,
    window: int | None = None,
) -> list[list]:
    """Rows of TOMO_HEADER along the tunable-beamsplitter trajectory; ``phi`` is in (-pi, pi]."""
    tomo = tomo or TomoSettings()
    rows = []
    alphas = bs.alpha_grid(n_alpha)
    for k, (alpha, (s1, s2)) in enumerate(zip(alphas, _seeds(seed, len(alphas)))):
        spec = bs.BeamsplitterSpec(theta_mod, float(alpha))
        w = gate_of(bs.bs_config(spec), _window(window)).w
        theta, phi = bs.bloch_trajectory([spec])[0]
        mean, std, post, status = tomography_run(w, QubitState.bloch(theta, phi), tomo, s1, s2)
        rows.append([f"a{k:02d}", theta, phi, mean, std, success_probability(w), bs.fidelity_vs_ideal(spec), post.acceptance_rate, status])
    return rows
