"""Solver for the deterministic (fluid) limit of the many-server queue.

The scaled customer count X solves a scalar fixed-point equation: writing
K(t) for the cumulative per-server drain (the integral of the service rate
along the solution) and with ingredients built from the initial tail F, the
initial queue mass q0, the arrival rate and the service law (tail Gc,
density g),

    X(t) = F(K(t)) + q0*Gc(K(t))
           + lam * int_0^t Gc(K(t) - K(s)) ds
           + int_0^t (X(s) - 1)^+ k(X(s)) g(K(t) - K(s)) ds.

The unknown enters through its own path and through K, so the solve
marches in time windows sized a priori from the Lipschitz constants of the
ingredients: over an invariant region |X| <= d3 given by a Gronwall-type
growth bound, the fixed-point map contracts at factor <= 1/2 on windows of
the computed length, and each window is Picard-iterated to convergence.
All time integrals use the trapezoid rule on a uniform grid.

The tail surface z(t, x) of the limiting residual-work measure is then a
midpoint Stieltjes sum against the increments of the cumulative
service-start path B(t) = lam*t - Q(t), which is robust to the kinks B
picks up when the queue empties or fills.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .laws import RateFunction, ServiceLaw
from .measures import TailFunction

CONSISTENCY_TOL = 1e-9
DEFECT_TOL_FACTOR = 1e-6   # accepted defect: factor * (1 + sup|X|)
PICARD_TOL_FACTOR = 1e-9   # window iteration stops at this * (1 + sup|X|)
MAX_PICARD_ITERATIONS = 80


class FluidSolverError(RuntimeError):
    """Fixed-point iteration failed to contract at the minimal window."""


class FluidAccuracyError(RuntimeError):
    """A solution identity failed beyond slack; a smaller dt should fix it."""


def check_initial_consistency(in_service_mass: float, queue_mass: float):
    """Time-zero identity: the queue must equal (X0 - 1)^+, so a positive
    queue requires in-service mass exactly 1."""
    x0 = in_service_mass + queue_mass
    if abs(queue_mass - max(x0 - 1.0, 0.0)) > CONSISTENCY_TOL:
        raise ValueError(
            "inconsistent initial state: queue must equal (X0 - 1)^+ "
            f"(in-service mass {in_service_mass}, queue {queue_mass})"
        )


@dataclass(frozen=True)
class FluidParams:
    """Inputs of one fluid solve.

    Consistency at time zero is enforced on construction: with z0 the total
    initial in-service mass, the initial queue must equal
    (z0 + initial_queue - 1)^+ within 1e-9, i.e. a positive queue requires
    a fully loaded initial tail.
    """

    arrival_rate: float
    service: ServiceLaw
    rate: RateFunction
    initial_tail: TailFunction
    initial_queue: float
    horizon: float
    dt: float

    def __post_init__(self):
        if self.arrival_rate < 0:
            raise ValueError("arrival rate must be >= 0")
        if self.initial_queue < 0:
            raise ValueError("initial queue must be >= 0")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if not (0 < self.dt <= self.horizon):
            raise ValueError("dt must lie in (0, horizon]")
        check_initial_consistency(self.initial_tail.total_mass, self.initial_queue)

    @property
    def steps(self) -> int:
        return max(1, int(round(self.horizon / self.dt)))

    @property
    def dt_effective(self) -> float:
        return self.horizon / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)

    @property
    def initial_count(self) -> float:
        return self.initial_tail.total_mass + self.initial_queue


@dataclass
class SolveDiagnostics:
    window_steps: int
    contraction_bound: float
    invariant_radius: float
    windows: list = field(default_factory=list)  # (i0, i1, iterations, last_change)
    defect: float = math.nan

    @property
    def total_iterations(self) -> int:
        return sum(w[2] for w in self.windows)


@dataclass(frozen=True)
class FluidSolution:
    """Grid paths of one solve plus the residual-work tail surface.

    ``tail_surface[i, j]`` is the mass at or above ``x_grid[j]`` at time
    ``surface_times[i]``.
    """

    times: np.ndarray
    count: np.ndarray       # X
    queue: np.ndarray       # Q = (X - 1)^+
    started: np.ndarray     # B = lam*t - Q
    drained: np.ndarray     # K, cumulative per-server drain
    x_grid: np.ndarray
    surface_times: np.ndarray
    tail_surface: np.ndarray
    diagnostics: SolveDiagnostics


def _ingredients(params: FluidParams):
    tail_f = params.initial_tail
    svc = params.service
    lam = params.arrival_rate
    q0 = params.initial_queue

    def h1(y):
        return tail_f(y) + q0 * svc.tail(y)

    def h2(y):
        return lam * svc.tail(y)

    def drain_coeff(x):
        return np.maximum(x - 1.0, 0.0) * params.rate(x)

    return h1, h2, drain_coeff, svc.pdf


def window_length_steps(params: FluidParams):
    """A-priori window size (in grid steps) making the map a contraction.

    Constants are taken over the invariant region |X| <= d3 from the
    growth bound d3 = (F(0) + q0 + lam*T) * exp(k_sup * g_sup * T); the
    window length h solves C*h = 1/2 and is then capped at T/10 and
    floored at one grid step.
    """
    lam, q0, T = params.arrival_rate, params.initial_queue, params.horizon
    gb = params.service.density_bound
    lg = params.service.density_lipschitz
    kb = params.rate.bound
    lk = params.rate.lipschitz
    l1 = params.initial_tail.lipschitz + q0 * gb
    l2 = lam * gb
    d1 = params.initial_tail.total_mass + q0 + lam * T
    d3 = d1 * math.exp(kb * gb * T)
    drain_sup = d3 * kb                 # sup of (x-1)^+ k(x) over |x| <= d3+1
    drain_lip = kb + d3 * lk
    contraction = l1 * lk + l2 * lk * T + drain_sup * lg * lk * T + gb * drain_lip
    if contraction > 0:
        h = 0.5 / contraction
    else:
        h = T / 10.0
    h = min(h, T / 10.0)
    dt = params.dt_effective
    steps = max(1, int(math.floor(h / dt + 1e-12)))
    return steps, contraction, d3


def _cumtrapz(values: np.ndarray, dt: float) -> np.ndarray:
    out = np.empty_like(values)
    out[0] = 0.0
    np.cumsum(0.5 * dt * (values[1:] + values[:-1]), out=out[1:])
    return out


def cumulative_drain(count: np.ndarray, rate: RateFunction, dt: float) -> np.ndarray:
    """Trapezoid cumulative integral of the service rate along the path."""
    return _cumtrapz(np.asarray(rate(count), dtype=float), dt)


def queue_and_starts(count: np.ndarray, arrival_rate: float, times: np.ndarray):
    """Queue mass (X - 1)^+ and cumulative service starts lam*t - Q.

    The starts path must come out nondecreasing; a violation beyond 1e-9
    means the count path is not accurate enough at this dt.
    """
    queue = np.maximum(count - 1.0, 0.0)
    started = arrival_rate * times - queue
    if started.size > 1 and np.min(np.diff(started)) < -1e-9:
        raise FluidAccuracyError(
            "cumulative service starts decreased; refine dt"
        )
    return queue, started


def _trapezoid_weights(i0: int, i1: int, dt: float) -> np.ndarray:
    """Rows are grid indices i0+1..i1; column j carries the trapezoid
    weight of node j in the integral from 0 to t_i (zero beyond j = i)."""
    rows = np.arange(i0 + 1, i1 + 1)
    cols = np.arange(i1 + 1)
    w = np.where(cols[None, :] <= rows[:, None], dt, 0.0)
    w[:, 0] = 0.5 * dt
    w[np.arange(rows.size), rows] = 0.5 * dt
    return w


def solve_count_path(params: FluidParams, start: str = "constant"):
    """March the fixed-point equation for the scaled count over windows.

    ``start`` selects the first Picard iterate on each window: "constant"
    continues the last solved value, "h1" seeds with the no-feedback
    response to the extrapolated drain.  Both must land on the same fixed
    point; the solver's uniqueness probe exploits that.

    Returns (count path, SolveDiagnostics).
    """
    params.service.require_lipschitz_density()
    if start not in ("constant", "h1"):
        raise ValueError("start must be 'constant' or 'h1'")
    n_steps = params.steps
    dt = params.dt_effective
    times = params.times
    h1, h2, drain_coeff, g = _ingredients(params)
    x = np.zeros(n_steps + 1)
    x[0] = params.initial_count

    win_steps, contraction, d3 = window_length_steps(params)
    diag = SolveDiagnostics(
        window_steps=win_steps, contraction_bound=contraction, invariant_radius=d3
    )
    if params.arrival_rate == 0.0 and params.initial_tail.total_mass == 0.0:
        # nothing ever enters: the zero path solves the equation exactly
        return x, diag

    rate = params.rate
    constant_rate = rate.lipschitz == 0.0
    k_all = np.asarray(rate(x), dtype=float)  # rewritten as windows solve
    drain = np.zeros(n_steps + 1)
    if constant_rate:
        drain[:] = rate(x[:1])[0] * times
        k_all[:] = k_all[0]
    coeff = drain_coeff(x)

    i0 = 0
    pending = win_steps
    while i0 < n_steps:
        i1 = min(i0 + pending, n_steps)
        m = i1 - i0
        rows = np.arange(i0 + 1, i1 + 1)
        w = _trapezoid_weights(i0, i1, dt)
        if start == "constant":
            phi = np.full(m, x[i0])
        else:
            guess_drain = drain[i0] + float(rate(np.array([x[i0]]))[0]) * (
                times[i0 + 1 : i1 + 1] - times[i0]
            )
            phi = h1(guess_drain)

        h2_fixed = None
        gw_fixed = None
        if constant_rate:
            d = drain[rows][:, None] - drain[None, : i1 + 1]
            np.maximum(d, 0.0, out=d)
            h2_fixed = (h2(d) * w).sum(axis=1)
            gw_fixed = g(d) * w

        converged = False
        last_change = math.inf
        for it in range(1, MAX_PICARD_ITERATIONS + 1):
            if not constant_rate:
                k_all[i0 + 1 : i1 + 1] = rate(phi)
                drain[i0 + 1 : i1 + 1] = drain[i0] + _cumtrapz(
                    k_all[i0 : i1 + 1], dt
                )[1:]
            coeff[i0 + 1 : i1 + 1] = drain_coeff(phi)
            if constant_rate:
                rhs = h1(drain[rows]) + h2_fixed + gw_fixed @ coeff[: i1 + 1]
            else:
                d = drain[rows][:, None] - drain[None, : i1 + 1]
                np.maximum(d, 0.0, out=d)
                rhs = (
                    h1(drain[rows])
                    + (h2(d) * w).sum(axis=1)
                    + ((coeff[None, : i1 + 1] * g(d)) * w).sum(axis=1)
                )
            change = float(np.max(np.abs(rhs - phi)))
            phi = rhs
            scale = 1.0 + float(np.max(np.abs(phi)))
            if change <= PICARD_TOL_FACTOR * scale:
                converged = True
                last_change = change
                break
            if change > 10.0 * (d3 + 1.0):
                break  # clearly diverging; do not burn the iteration budget
            last_change = change
        if not converged:
            if pending > 1:
                pending = max(1, pending // 2)  # retry this window shorter
                continue
            raise FluidSolverError(
                f"no contraction on [{times[i0]:.6g}, {times[i1]:.6g}] at the "
                f"minimal window (last change {last_change:.3g}); "
                f"a-priori bound {contraction:.3g}, radius {d3:.3g}"
            )
        x[i0 + 1 : i1 + 1] = phi
        if not constant_rate:
            k_all[i0 + 1 : i1 + 1] = rate(phi)
            drain[i0 + 1 : i1 + 1] = drain[i0] + _cumtrapz(k_all[i0 : i1 + 1], dt)[1:]
        coeff[i0 + 1 : i1 + 1] = drain_coeff(phi)
        diag.windows.append((i0, i1, it, last_change))
        i0 = i1
        pending = win_steps
    return x, diag


def fixed_point_defect(params: FluidParams, count: np.ndarray) -> float:
    """Sup-norm defect of a grid path in the count equation, with the same
    trapezoid quadrature the solver uses.  The solver's own output must
    pass DEFECT_TOL_FACTOR * (1 + sup|X|); a visibly perturbed path must
    not."""
    count = np.asarray(count, dtype=float)
    n = count.size - 1
    if n != params.steps:
        raise ValueError("path length does not match the parameter grid")
    dt = params.dt_effective
    h1, h2, drain_coeff, g = _ingredients(params)
    drain = cumulative_drain(count, params.rate, dt)
    coeff = drain_coeff(count)
    worst = abs(count[0] - float(h1(np.zeros(1))[0]))
    block = 256
    for lo in range(1, n + 1, block):
        hi = min(lo + block, n + 1)
        rows = np.arange(lo, hi)
        w = _trapezoid_weights(lo - 1, hi - 1, dt)[:, : hi]
        d = drain[rows][:, None] - drain[None, :hi]
        np.maximum(d, 0.0, out=d)
        rhs = (
            h1(drain[rows])
            + (h2(d) * w).sum(axis=1)
            + ((coeff[None, :hi] * g(d)) * w).sum(axis=1)
        )
        worst = max(worst, float(np.max(np.abs(count[rows] - rhs))))
    return worst


def defect_tolerance(count: np.ndarray) -> float:
    return DEFECT_TOL_FACTOR * (1.0 + float(np.max(np.abs(count))))


def tail_on_grid(
    params: FluidParams,
    count: np.ndarray,
    drained: np.ndarray,
    started: np.ndarray,
    t_index: int,
    x_grid: np.ndarray,
) -> np.ndarray:
    """Residual-mass tail z(t, x) over ``x_grid`` at grid time index
    ``t_index``: initial-tail carry-over plus a midpoint Stieltjes sum of
    the service-law tail against the increments of the starts path."""
    x_grid = np.asarray(x_grid, dtype=float)
    tail_f = params.initial_tail
    svc_tail = params.service.tail
    i = t_index
    z = np.asarray(tail_f(x_grid + drained[i]), dtype=float)
    if i > 0:
        db = np.diff(started[: i + 1])
        mid = 0.5 * (drained[:i] + drained[1 : i + 1])
        args = x_grid[None, :] + (drained[i] - mid)[:, None]
        z = z + svc_tail(args).T @ db
    return z


def _grid_index(times: np.ndarray, t: float) -> int:
    i = int(np.argmin(np.abs(times - t)))
    if abs(times[i] - t) > 1e-9:
        raise ValueError(f"time {t} is not on the solution grid")
    return i


def tail_at(params: FluidParams, solution: "FluidSolution", x: float, t: float) -> float:
    """z(t, x) for a single point; ``t`` must be a grid time."""
    i = _grid_index(solution.times, t)
    return float(
        tail_on_grid(
            params, solution.count, solution.drained, solution.started, i,
            np.array([float(x)]),
        )[0]
    )


def solve(
    params: FluidParams,
    x_grid=None,
    surface_times=None,
    start: str = "constant",
) -> FluidSolution:
    """Full solve: count path, queue/starts/drain paths, tail surface.

    ``surface_times`` defaults to roughly 100 evenly spaced grid times.
    The computed surface is validated: nonnegative within 1e-9,
    nonincreasing in x within 1e-9, and z(t, 0) within quadrature slack of
    min(count, 1).
    """
    if x_grid is None:
        x_grid = np.arange(0.0, 10.0 + 1e-12, 0.05)
    x_grid = np.asarray(x_grid, dtype=float)
    count, diag = solve_count_path(params, start=start)
    diag.defect = fixed_point_defect(params, count)
    if diag.defect > defect_tolerance(count):
        raise FluidSolverError(
            f"defect {diag.defect:.3g} above tolerance {defect_tolerance(count):.3g}"
        )
    times = params.times
    dt = params.dt_effective
    drained = cumulative_drain(count, params.rate, dt)
    queue, started = queue_and_starts(count, params.arrival_rate, times)

    if surface_times is None:
        stride = max(1, params.steps // 100)
        idx = np.arange(0, params.steps + 1, stride)
        if idx[-1] != params.steps:
            idx = np.append(idx, params.steps)
    else:
        idx = np.array([_grid_index(times, t) for t in surface_times], dtype=int)
    surface = np.empty((idx.size, x_grid.size))
    for row, i in enumerate(idx):
        surface[row] = tail_on_grid(params, count, drained, started, int(i), x_grid)

    # identity checks on the assembled solution
    if np.min(surface) < -1e-9:
        raise FluidAccuracyError("negative tail mass; refine dt")
    if surface.shape[1] > 1 and np.max(np.diff(surface, axis=1)) > 1e-9:
        raise FluidAccuracyError("tail surface increases in x; refine dt")
    z0_slack = max(
        1e-9,
        10.0 * dt * params.arrival_rate * params.service.density_bound,
    ) + 10.0 * dt * params.initial_tail.lipschitz * params.rate.bound
    in_service = np.minimum(count[idx], 1.0)
    if x_grid[0] == 0.0 and np.max(np.abs(surface[:, 0] - in_service)) > z0_slack:
        raise FluidAccuracyError("tail at 0 disagrees with min(count, 1); refine dt")

    return FluidSolution(
        times=times,
        count=count,
        queue=queue,
        started=started,
        drained=drained,
        x_grid=x_grid,
        surface_times=times[idx],
        tail_surface=surface,
        diagnostics=diag,
    )


def solution_to_text(sol: FluidSolution, header_lines=()) -> str:
    """Delimited export of the grid paths: t, X, Q, B, S columns."""
    out = [f"# {line}" for line in header_lines]
    out.append("t\tX\tQ\tB\tS")
    for i in range(sol.times.size):
        out.append(
            f"{float(sol.times[i])!r}\t{float(sol.count[i])!r}"
            f"\t{float(sol.queue[i])!r}\t{float(sol.started[i])!r}"
            f"\t{float(sol.drained[i])!r}"
        )
    return "\n".join(out) + "\n"


def surface_to_text(sol: FluidSolution, header_lines=()) -> str:
    """Tail-surface matrix: one row per surface time, columns per x."""
    out = [f"# {line}" for line in header_lines]
    out.append("# x_grid: " + ",".join(repr(float(v)) for v in sol.x_grid))
    out.append("t\t" + "\t".join(f"z@{float(v)!r}" for v in sol.x_grid))
    for i in range(sol.surface_times.size):
        row = "\t".join(repr(float(v)) for v in sol.tail_surface[i])
        out.append(f"{float(sol.surface_times[i])!r}\t{row}")
    return "\n".join(out) + "\n"
