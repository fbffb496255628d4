"""Command-line front end.

Every command writes its outputs under ``--out`` together with a
``manifest.json`` recording the exact argument vector, so

    qfpgates --replay out/manifest.json

regenerates the same files bit for bit (only the manifest's wall time differs).

Exit codes: 0 ok, 2 usage, 3 synthesis infeasible, 4 sampler diagnostic, 5 I/O.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from . import beamsplitter as bs
from .gates import QubitState, complex_to_pairs, reconfigure, success_probability
from .io import load_config, load_dataset, read_json, save_config, save_dataset, save_report, write_csv, write_json
from .multiport import ConfigError, ModeWindow, gate_of
from .pipelines import (
    BS_HEADER,
    TOMO_HEADER,
    TomoSettings,
    beamsplitter_table,
    beamsplitter_tomography,
    fig3_gates,
    rotation_tomography,
    synthesize_gate,
)
from .synthesis import PsoSettings, Scenario, sweep
from .tomography import (
    AnalyzerModel,
    ChainSettings,
    SamplerDiagnosticError,
    bloch_vector,
    fidelity_stats,
    post_selected_output,
    purity,
    sample_posterior,
    simulate_counts,
)

log = logging.getLogger("qfpgates")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_SAMPLER = 4
EXIT_IO = 5

SWEEP_HEADER = ["theta", "success", "fidelity", "family", "params_json", "status"]
MANIFEST_NAME = "manifest.json"


class _Run:
    """Collects output paths and the exit status of one command."""

    def __init__(self, out: Path):
        self.out = out
        self.outputs: list[str] = []
        self.status = EXIT_OK

    def path(self, name: str) -> Path:
        p = self.out / name
        self.outputs.append(name)
        return p

    def flag(self, code: int) -> None:
        # the first failure wins; later ones are logged only
        if self.status == EXIT_OK:
            self.status = code


def _window(args) -> ModeWindow | None:
    return None if args.window is None else ModeWindow.symmetric(args.window)


def _scenario(args) -> Scenario:
    return Scenario(args.scenario, args.index_bound)


def _pso(args) -> PsoSettings:
    return PsoSettings(particles=args.particles, iterations=args.iterations, seed=args.seed)


def _chain(args) -> ChainSettings:
    return ChainSettings(burn_in=args.burn_in)


def _tomo(args) -> TomoSettings:
    return TomoSettings(budget=args.budget, samples=args.samples, dark_rate=args.dark_rate, chain=_chain(args))


def cmd_synth(args, run: _Run) -> None:
    out = synthesize_gate(
        args.theta, args.phi, args.lam, _scenario(args), _pso(args), args.restarts, args.window, args.cache
    )
    save_report(run.path("gate_report.json"), out.report)
    save_config(run.path("qfp_config.json"), out.config)
    log.info("P_W=%.6f F_W=%.8f family=%s", out.report.success, out.report.fidelity, out.result.family)
    if not out.feasible:
        log.error("no feasible solution; wrote the best infeasible one")
        run.flag(EXIT_INFEASIBLE)


def cmd_sweep(args, run: _Run) -> None:
    if args.n_theta < 2:
        raise ConfigError("--n-theta must be at least 2")
    thetas = np.linspace(0.0, math.pi, args.n_theta)
    rows = sweep(thetas, _scenario(args), _pso(args), args.restarts)
    table = [[r.theta, r.success, r.fidelity, r.family, json.dumps(r.params), r.status] for r in rows]
    write_csv(run.path("sweep.csv"), SWEEP_HEADER, table)
    mismatches = [r.index_mismatch for r in rows if r.index_mismatch is not None and r.status == "ok"]
    if mismatches:
        log.info("max EOM index mismatch over feasible rows: %.3g", max(mismatches))
    if any(r.status != "ok" for r in rows):
        run.flag(EXIT_INFEASIBLE)


def cmd_reconfig(args, run: _Run) -> None:
    cfg = reconfigure(load_config(args.config), args.phi, args.lam)
    save_config(run.path("qfp_config.json"), cfg)
    w = gate_of(cfg, _window(args)).w
    write_json(run.path("gate.json"), {"W": complex_to_pairs(w), "success": success_probability(w)})


def cmd_bs(args, run: _Run) -> None:
    if args.n_alpha < 2:
        raise ConfigError("--n-alpha must be at least 2")
    write_csv(run.path("bs.csv"), BS_HEADER, beamsplitter_table(args.theta_mod, args.n_alpha, args.window))


def cmd_tomo_sim(args, run: _Run) -> None:
    if args.config is not None:
        w = gate_of(load_config(args.config), _window(args)).w
        rho = post_selected_output(w, QubitState(1, 0))
    else:
        rho = QubitState.bloch(args.theta, args.phi).density()
    model = AnalyzerModel(include_loss=args.include_loss)
    d = simulate_counts(rho, model, args.budget, args.seed, args.dark_rate)
    save_dataset(run.path("dataset.json"), d)


def cmd_tomo_fit(args, run: _Run) -> None:
    d = load_dataset(args.dataset)
    try:
        post = sample_posterior(d, args.samples, _chain(args), args.seed)
        status = "ok"
    except SamplerDiagnosticError as exc:
        post, status = exc.samples, "sampler-diagnostic"
        log.error("%s", exc)
        run.flag(EXIT_SAMPLER)
    mean = post.mean()
    doc = {
        "status": status,
        "samples": len(post),
        "acceptance_rate": post.acceptance_rate,
        "step": post.step,
        "mean_rho": complex_to_pairs(mean),
        "bloch": [float(v) for v in bloch_vector(mean)],
        "purity": purity(mean),
    }
    if args.target is not None:
        f_mean, f_std = fidelity_stats(post, QubitState.bloch(*args.target))
        doc.update(target=list(args.target), fidelity_mean=f_mean, fidelity_std=f_std)
    write_json(run.path("posterior.json"), doc)
    if args.save_samples:
        rows = [[k, *np.real(r).ravel(), *np.imag(r).ravel()] for k, r in enumerate(post.samples)]
        header = ["k", "re00", "re01", "re10", "re11", "im00", "im01", "im10", "im11"]
        write_csv(run.path("samples.csv"), header, [[k, *map(float, rest)] for k, *rest in rows])


def _parse_gates(text: str) -> list[tuple[float, float]]:
    """``"theta,phi;theta,phi"`` in radians."""
    out = []
    for item in text.split(";"):
        if item.strip():
            theta, phi = (float(v) for v in item.split(","))
            out.append((theta, phi))
    if not out:
        raise ConfigError("empty gate list")
    return out


def cmd_rotate_tomo(args, run: _Run) -> None:
    if not args.budget > 0:
        raise ConfigError("--budget must be positive")
    tomo = _tomo(args)
    if args.preset == "bs":
        rows = beamsplitter_tomography(args.theta_mod, args.n_alpha, args.seed, tomo, args.window)
    else:
        gates = fig3_gates() if args.gates is None else _parse_gates(args.gates)
        rows = rotation_tomography(gates, args.seed, tomo, _scenario(args), _pso(args), args.restarts, args.window, args.cache)
    write_csv(run.path("rotate_tomo.csv"), TOMO_HEADER, rows)
    statuses = [r[-1] for r in rows]
    if any("synthesis-infeasible" in s for s in statuses):
        run.flag(EXIT_INFEASIBLE)
    if any("sampler-diagnostic" in s for s in statuses):
        run.flag(EXIT_SAMPLER)
    log.info("min fidelity %.5f over %d gates", min(r[3] for r in rows), len(rows))


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--window", type=int, default=None, help="mode-window half-width (default: from bandwidth)")
    p.add_argument("--budget", type=float, default=1e5, help="photon-count budget per setting")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def _synth_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", default="3x1", choices=["3x1", "3x2", "5x1"])
    p.add_argument("--index-bound", type=float, default=4.0, help="max modulation index per harmonic (rad)")
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--particles", type=int, default=60)
    p.add_argument("--iterations", type=int, default=800)
    p.add_argument("--cache", type=Path, default=None, help="directory for cached base solutions")


def _tomo_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--samples", type=int, default=1024)
    p.add_argument("--burn-in", type=int, default=20_000)
    p.add_argument("--dark-rate", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="qfpgates", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--replay", type=Path, metavar="MANIFEST", help="re-run the command recorded in a manifest")
    ap.add_argument("--replay-out", type=Path, default=None, help="with --replay, write to this directory instead")
    sub = ap.add_subparsers(dest="command")

    p = sub.add_parser("synth", parents=[common], help="synthesize U(theta, phi, lambda)")
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--lam", "--lambda", dest="lam", type=float, default=0.0)
    _synth_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sweep", parents=[common], help="success probability versus theta")
    p.add_argument("--n-theta", type=int, default=15)
    _synth_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("reconfig", parents=[common], help="move a U(theta,0,0) config to (phi, lambda)")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--lam", "--lambda", dest="lam", type=float, default=0.0)
    p.set_defaults(func=cmd_reconfig)

    p = sub.add_parser("bs", parents=[common], help="tunable beamsplitter table")
    p.add_argument("--theta-mod", type=float, default=bs.HADAMARD_INDEX)
    p.add_argument("--n-alpha", type=int, default=21)
    p.set_defaults(func=cmd_bs)

    p = sub.add_parser("tomo-sim", parents=[common], help="simulate analyzer counts")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="QFP config; the state is W|0> post-selected")
    src.add_argument("--theta", type=float, help="Bloch polar angle of the state")
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--dark-rate", type=float, default=0.0)
    p.add_argument("--include-loss", action="store_true")
    p.set_defaults(func=cmd_tomo_sim)

    p = sub.add_parser("tomo-fit", parents=[common], help="Bayesian estimate from a dataset file")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--samples", type=int, default=1024)
    p.add_argument("--burn-in", type=int, default=20_000)
    p.add_argument("--target", type=float, nargs=2, metavar=("THETA", "PHI"), default=None)
    p.add_argument("--save-samples", action="store_true")
    p.set_defaults(func=cmd_tomo_fit)

    p = sub.add_parser("rotate-tomo", parents=[common], help="synthesize gates and reconstruct their outputs")
    p.add_argument("--preset", choices=["fig3", "bs"], default="fig3")
    p.add_argument("--gates", default=None, help='explicit list "theta,phi;theta,phi" (overrides fig3 pairs)')
    p.add_argument("--theta-mod", type=float, default=bs.HADAMARD_INDEX)
    p.add_argument("--n-alpha", type=int, default=21)
    _synth_flags(p)
    _tomo_flags(p)
    p.set_defaults(func=cmd_rotate_tomo)
    return ap


def _manifest(argv: list[str], args, run: _Run, wall: float) -> dict:
    params = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k not in ("func", "replay", "replay_out")}
    return {
        "command": args.command,
        "argv": argv,
        "params": params,
        "seed": args.seed,
        "version": __version__,
        "outputs": run.outputs,
        "wall_time_s": wall,
    }


def _replay_argv(manifest: Path, out: Path | None) -> list[str]:
    argv = list(read_json(manifest)["argv"])
    target = out if out is not None else manifest.parent
    # drop any recorded --out and point at the replay target
    cleaned, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--out":
            skip = True
            continue
        if a.startswith("--out="):
            continue
        cleaned.append(a)
    return cleaned + ["--out", str(target)]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.replay is not None:
        try:
            argv = _replay_argv(args.replay, args.replay_out)
        except (OSError, ValueError, KeyError) as exc:
            print(f"error: cannot read manifest: {exc}", file=sys.stderr)
            return EXIT_IO
        args = ap.parse_args(argv)
    if args.command is None:
        ap.print_help(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    run = _Run(args.out)
    t0 = time.perf_counter()
    try:
        args.func(args, run)
        write_json(args.out / MANIFEST_NAME, _manifest(argv, args, run, time.perf_counter() - t0))
    except (OSError, json.JSONDecodeError, jsonschema.ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run.status


if __name__ == "__main__":
    sys.exit(main())
