#!/usr/bin/env python

import os
import sys

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

import argparse

from src.simulator import figure_initial_condition
from src.utils.automaton_utils import replay_events, trajectory
from src.utils.io_utils import ensure_dir, save_events_jsonl
from src.utils.lattice_utils import BitConfig, LatticeSpec
from src.utils.render_utils import render_trajectory


def render_figure(M_x: int, steps: int, out_dir: str, bits: str = None) -> bool:
    """Render the multi-particle trajectory and check its squares against a replay.
    Returns True if the logged exchanges match the replay."""
    spec = LatticeSpec(M_x)
    start = BitConfig.from_bits(spec, bits) if bits else figure_initial_condition(spec)
    configs, events = trajectory(start, steps)

    ensure_dir(out_dir)
    svg_path = os.path.join(out_dir, "figure.svg")
    render_trajectory(events, configs, svg_path, title=f"M_x = {M_x}, {steps} steps")
    save_events_jsonl(events, os.path.join(out_dir, "figure_events.jsonl"))

    logged = sorted((e.t, e.x) for e in events)
    replayed = sorted(replay_events(configs))
    print(f"\nRendered {svg_path}")
    print("=" * 80)
    print(f"Initial configuration: {start}")
    print(f"Exchanges logged: {len(logged)}")
    for t, x in logged:
        print(f"  - t = {t}, x = {x}")
    if logged != replayed:
        print("Warning: logged exchanges differ from the brute-force replay")
        return False
    print("Exchanges match the brute-force replay")
    return True


def main():
    parser = argparse.ArgumentParser(description="Render the multi-particle trajectory figure")
    parser.add_argument("--M_x", type=int, default=16, help="Number of lattice sites")
    parser.add_argument("--steps", type=int, default=16, help="Number of automaton steps")
    parser.add_argument("--out", default="data/figures", help="Output directory")
    parser.add_argument("--bits", help="Initial configuration as a 0/1 string")
    args = parser.parse_args()

    ok = render_figure(args.M_x, args.steps, args.out, args.bits)
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
