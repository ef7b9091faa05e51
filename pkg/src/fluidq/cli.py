"""Command dispatch over scenario files.

    fluidq simulate --scenario s.scn --out dir    raw trajectories per (n, seed)
    fluidq solve    --scenario s.scn --out dir    fluid paths + tail surface
    fluidq compare  --scenario s.scn --out dir    scaled-sim vs fluid gap report
    fluidq gc-check --scenario s.scn --out dir    block empirical-measure deviations

Common flags: --seed (base-seed override), --n (comma list override),
--quiet.  FLUIDQ_THREADS caps the (n, seed) fan-out.  Exit codes: 0 ok,
2 configuration error, 3 numeric failure.  Every artifact header carries
the scenario hash and the seed, and identical inputs produce byte-identical
artifacts; on error, partially written artifacts are removed.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .fluid import FluidAccuracyError, FluidSolverError, solution_to_text, solve, surface_to_text
from .harness import convergence_experiment, gc_table_to_text, glivenko_cantelli_check, run_scenario_once
from .laws import DensityRequiredError
from .measures import atomic_to_text
from .scenario import ScenarioError, load_scenario, scenario_hash
from .simulate import trajectory_to_text

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

GC_WINDOW_MASS = 2.0
GC_BLOCK_SPAN = 2.0


def _parser():
    p = argparse.ArgumentParser(prog="fluidq", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("simulate", "run the event simulation per (n, seed)"),
        ("solve", "solve the fluid equations"),
        ("compare", "simulate, scale and compare against the fluid solution"),
        ("gc-check", "empirical law-of-large-numbers deviation table"),
    ):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--scenario", required=True, help="scenario file path")
        s.add_argument("--out", required=True, help="output directory")
        s.add_argument("--seed", type=int, default=None, help="base seed override")
        s.add_argument("--n", default=None, help="comma-separated n override")
        s.add_argument("--quiet", action="store_true")
    return p


class _Writer:
    """Tracks written artifacts so a failed dispatch leaves nothing behind."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.written: list = []

    def write(self, name: str, text: str):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / name
        path.write_text(text, encoding="utf-8")
        self.written.append(path)
        return path

    def discard_all(self):
        for path in self.written:
            try:
                path.unlink()
            except OSError:
                pass
        self.written.clear()


def _base_header(scenario, command: str, seed: int):
    return [
        f"scenario: {scenario.name}",
        f"scenario_hash: {scenario_hash(scenario)}",
        f"command: {command}",
        f"seed: {seed}",
    ]


def _threads() -> int:
    raw = os.environ.get("FLUIDQ_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _sim_grid(scenario) -> np.ndarray:
    if scenario.horizon == 0.0:
        return np.array([0.0])
    steps = max(1, int(round(scenario.horizon / scenario.dt)))
    return np.linspace(0.0, scenario.horizon, steps + 1)


def _cmd_simulate(scenario, writer: _Writer, n_list, seeds, say):
    grid = _sim_grid(scenario)
    for n in n_list:
        for seed in seeds:
            traj = run_scenario_once(
                scenario, n, seed, grid=grid, snapshot_times=scenario.snapshot_times
            )
            header = _base_header(scenario, "simulate", seed) + [f"n: {n}"]
            writer.write(
                f"trajectory_n{n}_seed{seed}.tsv", trajectory_to_text(traj, header)
            )
            if traj.snapshots:
                parts = [f"# {line}" for line in header]
                for sn in traj.snapshots:
                    parts.append(f"# t = {float(sn.time)!r}")
                    parts.append(atomic_to_text(sn.measure).rstrip("\n"))
                writer.write(f"snapshots_n{n}_seed{seed}.txt", "\n".join(parts) + "\n")
            say(f"simulate n={n} seed={seed}: {len(traj.events)} events")


def _cmd_solve(scenario, writer: _Writer, say):
    params = scenario.fluid_params()
    sol = solve(params, x_grid=scenario.x_grid())
    header = _base_header(scenario, "solve", scenario.seed) + [
        f"dt: {params.dt_effective!r}",
        f"grid_points: {sol.times.size}",
    ]
    writer.write("solution.tsv", solution_to_text(sol, header))
    writer.write("tail_surface.tsv", surface_to_text(sol, header))
    say(
        f"solve: {len(sol.diagnostics.windows)} windows, "
        f"defect {sol.diagnostics.defect:.3g}"
    )


def _cmd_compare(scenario, writer: _Writer, n_list, seeds, say):
    report = convergence_experiment(
        scenario, n_list=n_list, seeds=seeds, replications=len(seeds),
        threads=_threads(),
    )
    header = _base_header(scenario, "compare", seeds[0]) + [
        f"n_list: {','.join(str(n) for n in n_list)}",
        f"seeds: {','.join(str(s) for s in seeds)}",
    ]
    writer.write("report.tsv", report.to_text(header))
    summary = "".join(f"# {line}\n" for line in header) + report.summary_text()
    writer.write("summary.txt", summary)
    say(report.summary_text().rstrip())


def _cmd_gc_check(scenario, writer: _Writer, n_list, seed, say):
    law = scenario.build_service()
    rows = []
    for n in n_list:
        dev = glivenko_cantelli_check(
            law, n, GC_WINDOW_MASS, GC_BLOCK_SPAN, scenario.x_grid(), seed=seed
        )
        rows.append((n, dev))
        say(f"gc-check n={n}: max deviation {dev:.5f}")
    header = _base_header(scenario, "gc-check", seed) + [
        f"window_mass: {GC_WINDOW_MASS!r}",
        f"block_span: {GC_BLOCK_SPAN!r}",
    ]
    writer.write("gc.tsv", gc_table_to_text(rows, header))


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    quiet = args.quiet

    def say(msg):
        if not quiet:
            print(msg)

    try:
        scenario = load_scenario(args.scenario)
    except OSError as exc:
        print(f"error: cannot read scenario: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.n is not None:
        try:
            n_list = [int(v) for v in args.n.split(",")]
        except ValueError:
            print("error: --n needs comma-separated integers", file=sys.stderr)
            return EXIT_CONFIG
        if any(n < 1 for n in n_list):
            print("error: --n entries must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
    else:
        n_list = list(scenario.n_list)
    base_seed = scenario.seed if args.seed is None else args.seed
    seeds = [base_seed + r for r in range(scenario.replications)]

    writer = _Writer(Path(args.out))
    try:
        if args.command == "simulate":
            _cmd_simulate(scenario, writer, n_list, seeds, say)
        elif args.command == "solve":
            _cmd_solve(scenario, writer, say)
        elif args.command == "compare":
            _cmd_compare(scenario, writer, n_list, seeds, say)
        elif args.command == "gc-check":
            _cmd_gc_check(scenario, writer, n_list, base_seed, say)
    except (ScenarioError, DensityRequiredError, ValueError) as exc:
        writer.discard_all()
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FluidSolverError, FluidAccuracyError, FloatingPointError) as exc:
        writer.discard_all()
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
