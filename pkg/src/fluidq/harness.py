"""Experiment orchestration: scaled-simulation vs fluid-solution gaps,
empirical law-of-large-numbers checks for block empirical measures, and
path-oscillation diagnostics.

All stochastic outputs are deterministic functions of the seeds handed in;
experiments fan out over (n, seed) with no shared mutable state and reports
are assembled in key order regardless of completion order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import fluid as fluid_mod
from .laws import DensityRequiredError, ServiceLaw
from .measures import AtomicMeasure, prohorov
from .simulate import Simulator, init, sample_initial, scale_trajectory


@dataclass(frozen=True)
class GapRow:
    n: int
    seed: int
    count_gap: float
    queue_gap: float
    starts_gap: float
    measure_gaps: tuple  # ((snapshot time, prohorov distance), ...)


@dataclass
class ConvergenceReport:
    """Per-(n, seed) sup-norm gaps between scaled simulation paths and the
    fluid solution, plus Prohorov distances at snapshot times.

    ``simulation_only`` reports carry no gaps: the service law admits no
    fluid target, so only the runs themselves are recorded.
    """

    scenario_name: str
    x_grid_step: float
    snapshot_times: tuple
    rows: list = field(default_factory=list)
    simulation_only: bool = False

    def per_n(self) -> dict:
        """n -> dict of mean/max aggregates over replications."""
        out = {}
        for n in sorted({r.n for r in self.rows}):
            rows = [r for r in self.rows if r.n == n]
            agg = {
                "mean_count_gap": float(np.mean([r.count_gap for r in rows])),
                "max_count_gap": float(np.max([r.count_gap for r in rows])),
                "mean_queue_gap": float(np.mean([r.queue_gap for r in rows])),
                "mean_starts_gap": float(np.mean([r.starts_gap for r in rows])),
            }
            per_t = {}
            for r in rows:
                for t, d in r.measure_gaps:
                    per_t.setdefault(t, []).append(d)
            agg["mean_measure_gap"] = {
                t: float(np.mean(v)) for t, v in sorted(per_t.items())
            }
            out[n] = agg
        return out

    def to_text(self, header_lines=()) -> str:
        out = [f"# {line}" for line in header_lines]
        snap_cols = "\t".join(f"rho@{t!r}" for t in self.snapshot_times)
        out.append("n\tseed\tsup_X_gap\tsup_Q_gap\tsup_B_gap" + ("\t" + snap_cols if snap_cols else ""))
        for r in self.rows:
            cells = [str(r.n), str(r.seed)]
            if self.simulation_only:
                cells += ["nan", "nan", "nan"] + ["nan"] * len(self.snapshot_times)
            else:
                cells += [repr(r.count_gap), repr(r.queue_gap), repr(r.starts_gap)]
                cells += [repr(d) for _, d in r.measure_gaps]
            out.append("\t".join(cells))
        return "\n".join(out) + "\n"

    def summary_text(self) -> str:
        if self.simulation_only:
            return (
                f"{self.scenario_name}: simulation only (service law has no "
                "Lipschitz density, no fluid target)\n"
            )
        lines = [f"{self.scenario_name}: gap summary (x-grid step {self.x_grid_step})"]
        for n, agg in self.per_n().items():
            rho = ", ".join(
                f"t={t:g}: {d:.4f}" for t, d in agg["mean_measure_gap"].items()
            )
            lines.append(
                f"  n={n:>6}  mean sup|X| gap {agg['mean_count_gap']:.5f}"
                f"  max {agg['max_count_gap']:.5f}  mean rho [{rho}]"
            )
        return "\n".join(lines) + "\n"


def discretize_fluid_measure(
    solution: fluid_mod.FluidSolution,
    t: float,
    x_grid=None,
    params: fluid_mod.FluidParams | None = None,
) -> AtomicMeasure:
    """Atomic stand-in for the fluid residual-work measure at time t.

    Each grid cell contributes an atom at its midpoint with the cell's
    tail decrement as weight; mass beyond the last grid point sits in a
    final atom there, so the total equals the tail at the first grid
    point.  Cell masses below -1e-9 indicate an inaccurate solve.
    """
    if x_grid is None:
        x_grid = solution.x_grid
    x_grid = np.asarray(x_grid, dtype=float)
    if params is not None:
        i = int(np.argmin(np.abs(solution.times - t)))
        if abs(solution.times[i] - t) > 1e-9:
            raise ValueError(f"time {t} is not on the solution grid")
        z = fluid_mod.tail_on_grid(
            params, solution.count, solution.drained, solution.started, i, x_grid
        )
    else:
        i = int(np.argmin(np.abs(solution.surface_times - t)))
        if abs(solution.surface_times[i] - t) > 1e-9:
            raise ValueError(f"time {t} has no stored tail surface row")
        if x_grid.shape != solution.x_grid.shape or not np.all(x_grid == solution.x_grid):
            raise ValueError("x_grid differs from the stored surface grid")
        z = solution.tail_surface[i]
    cell_mass = z[:-1] - z[1:]
    if cell_mass.size and float(cell_mass.min()) < -1e-9:
        raise fluid_mod.FluidAccuracyError(
            "negative cell mass in tail discretization; refine dt"
        )
    cell_mass = np.clip(cell_mass, 0.0, None)
    locations = 0.5 * (x_grid[:-1] + x_grid[1:])
    if z[-1] > 0.0:
        locations = np.append(locations, x_grid[-1])
        cell_mass = np.append(cell_mass, z[-1])
    return AtomicMeasure(locations, cell_mass)


def run_scenario_once(scenario, n: int, seed: int, grid=None, snapshot_times=()):
    """One raw simulation run of the scenario at scale n.

    The initial condition is sampled from the scenario's initial tail and
    queue mass; arrival and service streams derive from ``seed`` alone so a
    fixed seed couples the draws across the n ladder.
    """
    service = scenario.build_service()
    state_rng = np.random.default_rng(np.random.SeedSequence((seed, n)))
    tail0 = scenario.build_initial_tail()
    if tail0.total_mass == 0.0 and scenario.q0 == 0.0:
        state = init(n)
    else:
        residuals, reqs = sample_initial(tail0, scenario.q0, n, service, state_rng)
        state = init(n, residuals=residuals, queue_requirements=reqs)
    sim = Simulator(
        n,
        service,
        scenario.build_rate(),
        arrivals=scenario.build_arrivals(),
        state=state,
        seed=seed,
    )
    return sim.run(scenario.horizon, grid=grid, snapshot_times=snapshot_times)


def convergence_experiment(
    scenario,
    n_list=None,
    replications=None,
    seeds=None,
    solution: fluid_mod.FluidSolution | None = None,
    threads: int | None = None,
) -> ConvergenceReport:
    """Run the scaled simulations and report sup-norm and Prohorov gaps
    against the fluid solution.

    Laws without a Lipschitz density have no fluid target; the report is
    then marked simulation-only.  Deterministic for fixed seeds.
    """
    n_list = list(scenario.n_list if n_list is None else n_list)
    replications = scenario.replications if replications is None else replications
    if seeds is None:
        seeds = [scenario.seed + r for r in range(replications)]
    seeds = list(seeds)[:replications]
    snapshot_times = tuple(scenario.snapshot_times)

    params = None
    if solution is None:
        try:
            params = scenario.fluid_params()
            solution = fluid_mod.solve(params, x_grid=scenario.x_grid())
        except DensityRequiredError:
            solution = None
    else:
        params = scenario.fluid_params()

    simulation_only = solution is None
    grid = solution.times if solution is not None else np.linspace(
        0.0, scenario.horizon, 501
    )
    report = ConvergenceReport(
        scenario_name=scenario.name,
        x_grid_step=float(scenario.x_step),
        snapshot_times=snapshot_times,
        simulation_only=simulation_only,
    )

    fluid_measures = {}
    if not simulation_only:
        for t in snapshot_times:
            fluid_measures[t] = discretize_fluid_measure(
                solution, t, scenario.x_grid(), params=params
            )

    def job(key):
        n, seed = key
        traj = scale_trajectory(
            run_scenario_once(scenario, n, seed, grid, snapshot_times), n
        )
        if simulation_only:
            return GapRow(n, seed, math.nan, math.nan, math.nan, ())
        count_gap = float(np.max(np.abs(traj.count - solution.count)))
        queue_gap = float(np.max(np.abs(traj.queue - solution.queue)))
        starts_gap = float(np.max(np.abs(traj.started - solution.started)))
        mgaps = []
        for sn in traj.snapshots:
            d = prohorov(sn.measure, fluid_measures[sn.time])
            mgaps.append((sn.time, d))
        return GapRow(n, seed, count_gap, queue_gap, starts_gap, tuple(mgaps))

    keys = [(n, seed) for n in n_list for seed in seeds]
    results = {}
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for key, row in zip(keys, pool.map(job, keys)):
                results[key] = row
    else:
        for key in keys:
            results[key] = job(key)
    report.rows = [results[key] for key in sorted(results)]
    return report


def glivenko_cantelli_check(
    law: ServiceLaw,
    n: int,
    window_mass: float,
    block_span: float,
    x_grid,
    seed: int = 0,
    m_points: int = 16,
    ell_points: int = 17,
) -> float:
    """Worst deviation of block empirical measures from their mean.

    Draws one i.i.d. block of requirements indexed over
    (-n*window_mass, n*block_span + n*window_mass], forms the scaled
    empirical measure of each window {i : m < i <= m + floor(n*ell)} for m
    on a coarse lattice and ell in [0, block_span], and returns the largest
    |<f, empirical> - ell*<f, law>| over half-line indicators f anchored on
    ``x_grid`` (both open and closed variants).
    """
    if n * block_span < 1:
        raise ValueError("need n * block_span >= 1")
    x_grid = np.asarray(x_grid, dtype=float)
    rng = np.random.default_rng(seed)
    m_half = int(round(n * window_mass))
    max_len = int(math.floor(n * block_span))
    total = 2 * m_half + max_len
    draws = law.sample(rng, total)  # index i in (-m_half, m_half + max_len]
    m_lattice = np.unique(np.linspace(-m_half + 1, m_half - 1, m_points).astype(int))
    ell_lattice = np.linspace(0.0, block_span, ell_points)
    target_geq = np.asarray(law.tail_geq(x_grid), dtype=float)
    target_gt = np.asarray(law.tail_gt(x_grid), dtype=float)
    worst = 0.0
    for m in m_lattice:
        start = m + m_half  # array position of index m+1
        for ell in ell_lattice:
            cnt = int(math.floor(n * ell))
            seg = np.sort(draws[start : start + cnt])
            emp_geq = (cnt - np.searchsorted(seg, x_grid, side="left")) / n
            emp_gt = (cnt - np.searchsorted(seg, x_grid, side="right")) / n
            dev = max(
                float(np.max(np.abs(emp_geq - ell * target_geq))),
                float(np.max(np.abs(emp_gt - ell * target_gt))),
            )
            if dev > worst:
                worst = dev
    return worst


def oscillation(times, values, delta: float, horizon: float | None = None) -> float:
    """Largest |value difference| over time pairs at distance <= delta."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if horizon is not None:
        keep = times <= horizon + 1e-12
        times, values = times[keep], values[keep]
    n = times.size
    if n < 2:
        return 0.0
    best = 0.0
    maxq: list = []  # indices, values decreasing
    minq: list = []
    j = 0
    for i in range(n):
        while j < n and times[j] <= times[i] + delta + 1e-12:
            v = values[j]
            while maxq and values[maxq[-1]] <= v:
                maxq.pop()
            maxq.append(j)
            while minq and values[minq[-1]] >= v:
                minq.pop()
            minq.append(j)
            j += 1
        while maxq and maxq[0] < i:
            maxq.pop(0)
        while minq and minq[0] < i:
            minq.pop(0)
        if maxq and minq:
            best = max(best, values[maxq[0]] - values[minq[0]])
    return float(best)


def measure_oscillation(snapshots, delta: float, horizon: float | None = None) -> float:
    """Oscillation of a measure-valued path in the Prohorov metric."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    snaps = [
        sn for sn in snapshots if horizon is None or sn.time <= horizon + 1e-12
    ]
    best = 0.0
    for a in range(len(snaps)):
        for b in range(a + 1, len(snaps)):
            if snaps[b].time - snaps[a].time > delta + 1e-12:
                break
            best = max(best, prohorov(snaps[a].measure, snaps[b].measure))
    return best


def weak_oscillation(times, values, delta: float, horizon: float | None = None) -> float:
    """Partition-relative oscillation: the smallest, over grid partitions
    with cell length > delta, of the largest within-cell oscillation.
    Cells are half-open, so the right endpoint of each cell is excluded.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if horizon is not None:
        keep = times <= horizon + 1e-12
        times, values = times[keep], values[keep]
    n = times.size - 1
    if n < 1 or times[n] - times[0] <= delta:
        raise ValueError("horizon must exceed delta for a valid partition")
    inf = math.inf
    dp = np.full(n + 1, inf)
    dp[0] = 0.0
    for i in range(1, n + 1):
        hi = -inf
        lo = inf
        # extend the final cell [t_j, t_i) backwards; values[i] excluded
        for j in range(i - 1, -1, -1):
            hi = max(hi, values[j])
            lo = min(lo, values[j])
            if times[i] - times[j] > delta and dp[j] < inf:
                cand = max(dp[j], hi - lo)
                if cand < dp[i]:
                    dp[i] = cand
    return float(dp[n])


def gc_table_to_text(rows, header_lines=()) -> str:
    """Deviation table for the LLN check: one row per n."""
    out = [f"# {line}" for line in header_lines]
    out.append("n\tmax_deviation")
    for n, dev in rows:
        out.append(f"{n}\t{dev!r}")
    return "\n".join(out) + "\n"
