#!/usr/bin/env python
"""Batch front end: run one configured mode and write its artifacts."""

import logging
import os
import sys
from dataclasses import replace
from typing import List, Optional

# Ensure the parent directory is in sys.path
sys.path.insert(0, os.path.abspath(os.path.dirname(os.path.dirname(__file__))))

import argparse  # noqa: E402

from src.utils.automaton_utils import (  # noqa: E402
    charge_observable,
    evolve_ensemble,
    expectation,
    random_ensemble,
    trajectory,
)
from src.utils.config import RUN_MODES, RunConfig, config  # noqa: E402
from src.utils.errors import AutomatonError, BudgetExceededError, ConfigurationError  # noqa: E402
from src.utils.evolution_utils import (  # noqa: E402
    WaveFunction,
    apply_step,
    build_step_operator,
    expected_free_phase,
    free_spectrum,
    wavefunction_from_ensemble,
)
from src.utils.fock_utils import continuum_trend, is_decreasing  # noqa: E402
from src.utils.io_utils import (  # noqa: E402
    ensure_dir,
    load_initial_state,
    save_events_jsonl,
    save_json,
    save_table,
    trajectory_frame,
)
from src.utils.lattice_utils import BitConfig, Charge, LatticeSpec, Species  # noqa: E402
from src.utils.render_utils import render_trajectory  # noqa: E402
from src.utils.verify_utils import run_suite, suite_manifest  # noqa: E402

logger = logging.getLogger("fermion_automaton")

# several movers, one same-direction pair and crossings of single R and L lines
FIGURE_PARTICLES = (
    (0, Species.R1),
    (3, Species.R1),
    (3, Species.R2),
    (6, Species.L1),
    (9, Species.L2),
    (12, Species.L1),
    (14, Species.R2),
)


def figure_initial_condition(spec: LatticeSpec) -> BitConfig:
    return BitConfig.from_particles(spec, FIGURE_PARTICLES)


def _initial_config(run_config: RunConfig, spec: LatticeSpec) -> BitConfig:
    if run_config.initial_bits:
        try:
            return BitConfig.from_bits(spec, run_config.initial_bits)
        except ValueError as e:
            raise ConfigurationError(f"initial.bits: {e}") from e
    return figure_initial_condition(spec)


def _initial_ensemble(run_config: RunConfig, spec: LatticeSpec):
    if run_config.input:
        state = load_initial_state(run_config.input)
        if state.spec != spec:
            raise ConfigurationError("Input state was written for another lattice")
        return state
    return random_ensemble(spec, run_config.ensemble.support, run_config.seed)


def run_trajectory(run_config: RunConfig, spec: LatticeSpec, out_dir: str) -> int:
    start = _initial_config(run_config, spec)
    configs, events = trajectory(start, run_config.steps)
    save_table(trajectory_frame(configs), os.path.join(out_dir, "trajectory.csv"))
    save_events_jsonl(events, os.path.join(out_dir, "events.jsonl"))
    render_trajectory(events, configs, os.path.join(out_dir, "trajectory.svg"))
    print(f"Trajectory: {len(configs) - 1} steps, {len(events)} exchanges")
    return 0


def run_ensemble(run_config: RunConfig, spec: LatticeSpec, out_dir: str) -> int:
    rows, summary = [], []
    for member in range(run_config.ensemble.count):
        e = _initial_ensemble(run_config, spec) if member == 0 else random_ensemble(
            spec, run_config.ensemble.support, run_config.seed + member
        )
        if isinstance(e, WaveFunction):
            raise ConfigurationError("ensemble mode needs an ensemble input")
        for t, state in enumerate(evolve_ensemble(e, run_config.steps)):
            for tau, p in sorted(state.weights.items()):
                rows.append({"member": member, "t": t, "tau": tau, "p": p})
            summary.append(
                {
                    "member": member,
                    "t": t,
                    **{c.value: expectation(state, charge_observable(c)) for c in Charge},
                }
            )
    save_table(rows, os.path.join(out_dir, "ensemble.csv"), ["member", "t", "tau", "p"])
    save_table(summary, os.path.join(out_dir, "charges.csv"))
    print(f"Ensemble: {run_config.ensemble.count} member(s), {run_config.steps} steps")
    return 0


def run_wavefunction(run_config: RunConfig, spec: LatticeSpec, out_dir: str) -> int:
    state = _initial_ensemble(run_config, spec)
    wf = state if isinstance(state, WaveFunction) else wavefunction_from_ensemble(state)
    S = build_step_operator(spec, "full")
    rows = []
    for t in range(run_config.steps + 1):
        if t:
            wf = apply_step(S, wf)
        for tau in wf.q.nonzero()[0]:
            q = complex(wf.q[tau])
            rows.append({"t": t, "tau": int(tau), "q_re": q.real, "q_im": q.imag, "p": abs(q) ** 2})
    save_table(rows, os.path.join(out_dir, "wavefunction.csv"), ["t", "tau", "q_re", "q_im", "p"])
    print(f"Wave function: {run_config.steps} steps, dimension {wf.dimension}")
    return 0


def run_verify(run_config: RunConfig, spec: LatticeSpec, out_dir: str) -> int:
    """Exit 1 if a check failed, 3 if none failed but some did not fit the budgets, else 0."""
    results = run_suite(spec, run_config.seed)
    save_table([r.to_dict() for r in results], os.path.join(out_dir, "checks.csv"))
    save_json(
        {"lattice": {"M_x": spec.M_x, "epsilon": spec.epsilon}, "suites": suite_manifest()},
        os.path.join(out_dir, "manifest.json"),
    )
    failed = [r for r in results if r.status == "FAIL"]
    skips = [r for r in results if r.skipped]
    print("\nVerification Summary")
    print("=" * 80)
    for r in results:
        print(f"{r.status}  {r.suite}.{r.name}  {r.detail}")
    print(
        f"\n{len(results) - len(failed) - len(skips)}/{len(results)} checks passed, "
        f"{len(failed)} failed, {len(skips)} skipped"
    )
    if failed:
        return 1
    return BudgetExceededError.exit_code if skips else 0


def run_spectrum(run_config: RunConfig, spec: LatticeSpec, out_dir: str) -> int:
    rows = []
    for species in Species:
        for line in free_spectrum(spec, species):
            rows.append(
                {
                    "species": species.name,
                    "k": line.k,
                    "phase": line.phase,
                    "expected": expected_free_phase(species, line.k, spec.M_x),
                    "residual": line.residual,
                }
            )
    save_table(rows, os.path.join(out_dir, "spectrum.csv"))
    print(f"Spectrum: {spec.M_x} eigenphases per species")
    return 0


def run_trotter(run_config: RunConfig, spec: LatticeSpec, out_dir: str) -> int:
    """Receding packets must approach the continuum as they widen; colliding ones are reported only."""
    settings = run_config.trotter
    packet_spec = LatticeSpec(settings.M_x, spec.epsilon)
    receding = continuum_trend(packet_spec, settings.widths, settings.n_steps, settings.separation)
    colliding = continuum_trend(
        packet_spec, settings.widths, settings.collision_steps, settings.collision_separation, "colliding"
    )
    save_table([r.to_dict() for r in receding + colliding], os.path.join(out_dir, "trotter.csv"))
    monotone = is_decreasing(receding)
    print(f"Continuum trend over widths {settings.widths}: {'decreasing' if monotone else 'NOT decreasing'}")
    print(
        "Colliding packets, automaton vs continuum: "
        + ", ".join(f"{r.automaton_vs_continuum:.3f}" for r in colliding)
    )
    return 0 if monotone else 1


MODES = {
    "trajectory": run_trajectory,
    "ensemble": run_ensemble,
    "wavefunction": run_wavefunction,
    "verify": run_verify,
    "spectrum": run_spectrum,
    "trotter": run_trotter,
}


def run(run_config: RunConfig) -> int:
    """Execute one run; the return value is the process exit status."""
    tolerances, budgets = replace(config.tolerances), replace(config.budgets)
    try:
        config.override_tolerances(run_config.tolerances)
        if run_config.max_dim is not None:
            config.set_max_dim(run_config.max_dim)
        spec = LatticeSpec(run_config.M_x, run_config.epsilon)
        out_dir = ensure_dir(run_config.output_dir)
        save_json(run_config.to_dict(), os.path.join(out_dir, "run_config.json"))
        logger.info("🚀 Mode %s on M_x = %d", run_config.mode, spec.M_x)
        return MODES[run_config.mode](run_config, spec, out_dir)
    except AutomatonError as e:
        print(f"Error: {str(e)}")
        return e.exit_code
    except (OSError, ValueError) as e:
        print(f"Error: {str(e)}")
        return ConfigurationError.exit_code
    finally:
        config.tolerances, config.budgets = tolerances, budgets


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Run the fermion automaton simulator")
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--mode", choices=RUN_MODES, help="Override the configured mode")
    parser.add_argument("--out", help="Output directory")
    parser.add_argument("--seed", type=int, help="Seed for random ensembles")
    parser.add_argument("--max-dim", type=int, help="Largest dense dimension allowed")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO)
    args = build_parser().parse_args(argv)
    try:
        data = RunConfig.from_json(args.config).to_dict() if args.config else {}
        if args.mode:
            data["mode"] = args.mode
        if args.out:
            data["output_dir"] = args.out
        if args.seed is not None:
            data["seed"] = args.seed
        if args.max_dim is not None:
            data["max_dim"] = args.max_dim
        run_config = RunConfig.from_dict(data)
    except ConfigurationError as e:
        print(f"Error: {str(e)}")
        return e.exit_code
    return run(run_config)


if __name__ == "__main__":
    sys.exit(main())
