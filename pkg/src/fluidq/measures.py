"""Finite nonnegative Borel measures on [0, infinity).

Two representations are used throughout the package:

* :class:`AtomicMeasure` -- a finite collection of weighted atoms.  This is
  the natural container for the residual-work state of a finite-server
  simulation (one atom per customer in service).
* :class:`TailFunction` -- the map ``x -> measure of [x, inf)`` sampled on a
  grid with linear interpolation in between.  Fluid-scale states and initial
  conditions live here.

The Prohorov distance between two atomic measures is computed exactly (to a
bisection tolerance) by restricting the closed-set quantifier to finite
subsets of the supports, which attains the supremum for purely atomic
measures.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

PROHOROV_TOL = 1e-9


def _as_sorted_atoms(locations, weights):
    """Sort by location, merge exact ties, drop zero weights."""
    loc = np.asarray(locations, dtype=float).ravel()
    wgt = np.asarray(weights, dtype=float).ravel()
    if loc.shape != wgt.shape:
        raise ValueError("locations and weights must have equal length")
    if loc.size and loc.min() < 0.0:
        raise ValueError("atom locations must be >= 0")
    if wgt.size and wgt.min() < 0.0:
        raise ValueError("atom weights must be >= 0")
    keep = wgt > 0.0
    loc, wgt = loc[keep], wgt[keep]
    order = np.argsort(loc, kind="stable")
    loc, wgt = loc[order], wgt[order]
    if loc.size:
        uniq, inverse = np.unique(loc, return_inverse=True)
        if uniq.size != loc.size:
            merged = np.zeros_like(uniq)
            np.add.at(merged, inverse, wgt)
            loc, wgt = uniq, merged
    loc.flags.writeable = False
    wgt.flags.writeable = False
    return loc, wgt


@dataclass(frozen=True)
class AtomicMeasure:
    """Finite measure sum_i w_i * delta_{x_i} with x_i >= 0, w_i > 0.

    Atoms are stored sorted by location with exact ties merged.  Instances
    are immutable and safe to share between threads.
    """

    locations: np.ndarray
    weights: np.ndarray

    def __init__(self, locations=(), weights=()):
        loc, wgt = _as_sorted_atoms(locations, weights)
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "weights", wgt)

    @classmethod
    def from_pairs(cls, pairs):
        pairs = list(pairs)
        if not pairs:
            return cls()
        loc, wgt = zip(*pairs)
        return cls(loc, wgt)

    @classmethod
    def empty(cls):
        return cls()

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def __len__(self) -> int:
        return int(self.locations.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, AtomicMeasure):
            return NotImplemented
        return (
            self.locations.shape == other.locations.shape
            and bool(np.all(self.locations == other.locations))
            and bool(np.all(self.weights == other.weights))
        )

    def __hash__(self):
        return hash((self.locations.tobytes(), self.weights.tobytes()))

    def scaled(self, factor: float) -> "AtomicMeasure":
        if factor < 0:
            raise ValueError("scale factor must be >= 0")
        return AtomicMeasure(self.locations, self.weights * factor)

    def mass_below(self, x: float) -> float:
        """Mass of [0, x), i.e. atoms with location strictly less than x."""
        idx = np.searchsorted(self.locations, x, side="left")
        return float(self.weights[:idx].sum())

    def mass_at_most(self, x: float) -> float:
        """Mass of [0, x]."""
        idx = np.searchsorted(self.locations, x, side="right")
        return float(self.weights[:idx].sum())


def tail(measure: AtomicMeasure, x: float) -> float:
    """Mass of the closed half line [x, inf); atoms at exactly x count."""
    idx = np.searchsorted(measure.locations, x, side="left")
    return float(measure.weights[idx:].sum())


def shift_tail(measure: AtomicMeasure, s: float) -> AtomicMeasure:
    """The measure C -> measure(C + s): translate every atom left by s.

    Atoms whose shifted location is <= 0 are dropped; residual-work
    measures carry no mass at the origin.
    """
    if s < 0:
        raise ValueError("shift must be >= 0")
    new_loc = measure.locations - s
    keep = new_loc > 0.0
    return AtomicMeasure(new_loc[keep], measure.weights[keep])


def _subset_excess(a: AtomicMeasure, b: AtomicMeasure, eps: float) -> float:
    """max over finite S within supp(a) of  a(S) - b(S^eps),  S^eps open.

    Adding points outside supp(a) to a closed test set only inflates the
    enlargement, so this maximum equals the one over all closed sets.  A
    left-to-right pass over the atoms of ``a`` suffices: the mass newly
    covered when a run of chosen atoms is extended depends only on the
    rightmost atom chosen so far.
    """
    n = len(a)
    if n == 0:
        return 0.0
    loc = a.locations
    wgt = a.weights
    b_loc = b.locations
    b_cum = np.concatenate(([0.0], np.cumsum(b.weights)))

    # b-mass of the open interval (loc-eps, loc+eps), clipped to [0, inf)
    upper = b_cum[np.searchsorted(b_loc, loc + eps, side="left")]
    lower = b_cum[np.searchsorted(b_loc, loc - eps, side="right")]
    fresh_cost = upper - lower

    best = np.empty(n)
    far_max = 0.0          # best over atoms left of the 2*eps overlap window
    far_ptr = 0
    window = deque()       # (index, best[i] + mass_lt(loc[i] + eps)), max at left
    result = 0.0
    for j in range(n):
        left_edge = loc[j] - 2.0 * eps
        while far_ptr < j and loc[far_ptr] <= left_edge:
            i = far_ptr
            if best[i] > far_max:
                far_max = best[i]
            while window and window[0][0] == i:
                window.popleft()
            far_ptr += 1
        cand = far_max - fresh_cost[j]
        if window:
            cand2 = window[0][1] - upper[j]
            if cand2 > cand:
                cand = cand2
        best[j] = wgt[j] + cand
        g = best[j] + upper[j]  # mass_lt(loc[j] + eps) == upper[j]
        while window and window[-1][1] <= g:
            window.pop()
        window.append((j, g))
        if best[j] > result:
            result = best[j]
    return float(result)


def _prohorov_ok(m1: AtomicMeasure, m2: AtomicMeasure, eps: float) -> bool:
    return (
        _subset_excess(m1, m2, eps) <= eps
        and _subset_excess(m2, m1, eps) <= eps
    )


def prohorov(m1: AtomicMeasure, m2: AtomicMeasure, tol: float = PROHOROV_TOL) -> float:
    """Prohorov distance between two finite atomic measures.

    Bisects on eps in the two-sided enlargement test; the returned value is
    an upper bound on the exact distance, within ``tol`` of it.
    """
    if m1 == m2:
        return 0.0
    # eps = larger total mass always satisfies the test; pad past rounding
    hi = max(m1.total_mass, m2.total_mass) + tol
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _prohorov_ok(m1, m2, mid):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class TailFunction:
    """x -> measure of [x, inf) on a grid, linear in between, flat beyond.

    ``grid`` starts at 0 and increases strictly; ``values`` are
    nonincreasing and nonnegative.  Queries beyond the last grid point
    return the last value.
    """

    grid: np.ndarray
    values: np.ndarray

    def __init__(self, grid, values):
        g = np.asarray(grid, dtype=float).ravel()
        v = np.asarray(values, dtype=float).ravel()
        if g.size == 0 or g.size != v.size:
            raise ValueError("grid and values must be nonempty and equal length")
        if g[0] != 0.0:
            raise ValueError("tail grid must start at 0")
        if g.size > 1 and np.min(np.diff(g)) <= 0.0:
            raise ValueError("tail grid must be strictly increasing")
        if np.min(v) < 0.0:
            raise ValueError("tail values must be >= 0")
        if v.size > 1 and np.max(np.diff(v)) > 1e-12:
            raise ValueError("tail values must be nonincreasing")
        g.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_atomic(cls, measure: AtomicMeasure, grid) -> "TailFunction":
        # evaluate tail() itself so both representations agree bit-exactly
        g = np.asarray(grid, dtype=float)
        vals = np.array([tail(measure, x) for x in g])
        return cls(g, vals)

    @classmethod
    def zero(cls) -> "TailFunction":
        return cls([0.0], [0.0])

    def __call__(self, x):
        return np.interp(x, self.grid, self.values)

    @property
    def total_mass(self) -> float:
        return float(self.values[0])

    @property
    def lipschitz(self) -> float:
        """Largest slope magnitude over the grid cells."""
        if self.grid.size < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(self.values)) / np.diff(self.grid)))

    def inverse(self, level):
        """Largest x at which the tail still meets ``level``.

        Piecewise-linear inverse used for inverse-transform sampling of
        residual work; levels at or below the final value map to the last
        grid point.
        """
        v = self.values[::-1]
        g = self.grid[::-1]
        return np.interp(level, v, g)


def tail_function_agrees(tf: TailFunction, measure: AtomicMeasure) -> bool:
    """Exact agreement of the two representations on the tail grid."""
    sampled = TailFunction.from_atomic(measure, tf.grid)
    return bool(np.all(sampled.values == tf.values))


# -- delimited-text serialization -------------------------------------------

def atomic_to_text(measure: AtomicMeasure) -> str:
    lines = [
        f"{float(x)!r},{float(w)!r}"
        for x, w in zip(measure.locations, measure.weights)
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def atomic_from_text(text: str) -> AtomicMeasure:
    pairs = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        x, w = line.split(",")
        pairs.append((float(x), float(w)))
    return AtomicMeasure.from_pairs(pairs)


def tail_to_text(tf: TailFunction) -> str:
    lines = [f"{float(x)!r},{float(v)!r}" for x, v in zip(tf.grid, tf.values)]
    return "\n".join(lines) + "\n"


def tail_from_text(text: str) -> TailFunction:
    xs, vs = [], []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        x, v = line.split(",")
        xs.append(float(x))
        vs.append(float(v))
    return TailFunction(xs, vs)
