"""
Optimal MDS placement.

For coverage profile g and popularity p, the rate contributed by file j is

    f_j(q) = p_j * sum_d g_d * (1 - min(1, d q)),

which is piecewise linear in q with breakpoints 1/S, 1/(S-1), ..., 1/2, 1.
On (1/(k+1), 1/k] it falls at rate p_j * sum_{d<=k} d g_d, and that rate
shrinks as q grows, so each f_j is convex. Minimizing sum_j f_j(q_j) under
sum_j q_j = M and 0 <= q_j <= 1 is then a fractional knapsack over the
linear pieces: fill budget into the steepest pieces first.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .demand import PopularityModel
from .evaluation import _gamma, _probs, mds_objective
from .placement import BUDGET_TOL, Placement, _check_budget


@dataclass(frozen=True)
class Segment:
    file: int
    q_low: float
    q_high: float
    slope: float

    @property
    def width(self) -> float:
        return self.q_high - self.q_low


def breakpoints(s_max: int) -> np.ndarray:
    """0, 1/S, 1/(S-1), ..., 1/2, 1."""
    if s_max < 1:
        return np.array([0.0, 1.0])
    return np.concatenate([[0.0], 1.0 / np.arange(s_max, 0, -1)])


def segments(gamma, popularity) -> list[Segment]:
    """Linear pieces of every file's rate, in file order then increasing q."""
    g = _gamma(gamma)
    p = _probs(popularity)
    S = max(len(g) - 1, 1)
    d = np.arange(len(g))
    # slope on (1/(k+1), 1/k] is sum_{d<=k} d g_d
    cum = np.cumsum(d * g)
    cum = np.concatenate([cum, np.full(max(0, S + 1 - len(cum)), cum[-1])])
    bp = breakpoints(S)
    out = []
    for j, pj in enumerate(p):
        for i in range(S):
            k = S - i
            out.append(Segment(j, float(bp[i]), float(bp[i + 1]), float(pj * cum[k])))
    return out


def _greedy_order(segs: list[Segment]) -> list[Segment]:
    return sorted(segs, key=lambda s: (-s.slope, s.file, s.q_low))


def optimize(gamma, popularity: PopularityModel, M: float) -> Placement:
    """Minimize the MDS backhaul rate over fractional placements with budget M."""
    p = _probs(popularity)
    _check_budget(len(p), M)
    q = np.zeros(len(p))
    remaining = float(M)
    for seg in _greedy_order(segments(gamma, p)):
        if remaining <= BUDGET_TOL:
            break
        # within a file the order is by increasing q_low, so fills are contiguous
        assert q[seg.file] == seg.q_low
        if remaining >= seg.width - BUDGET_TOL:
            q[seg.file] = seg.q_high
            remaining -= seg.width
        else:
            q[seg.file] = seg.q_low + remaining
            remaining = 0.0
    return Placement(np.minimum(q, 1.0), M, "opt")


def lipschitz(gamma, popularity) -> float:
    """Largest per-file slope max_j p_j * sum_d d g_d."""
    g = _gamma(gamma)
    return float(np.max(_probs(popularity)) * np.dot(np.arange(len(g)), g))


def kkt_threshold(gamma, popularity, placement: Placement, tol: float = 1e-12):
    """Threshold lambda certifying optimality, or None if there is none.

    Every segment filled completely must have slope >= lambda and every
    untouched segment slope <= lambda.
    """
    q = placement.q
    full, empty, partial = [], [], []
    for seg in segments(gamma, popularity):
        x = q[seg.file]
        if x >= seg.q_high - 1e-9:
            full.append(seg.slope)
        elif x <= seg.q_low + 1e-9:
            empty.append(seg.slope)
        else:
            partial.append(seg.slope)
    lo = max(empty, default=0.0)
    hi = min(full, default=np.inf)
    for s in partial:
        lo, hi = max(lo, s), min(hi, s)
    if lo > hi + tol:
        return None
    return lo


def brute_force_oracle(gamma, popularity, M: float, resolution: float = 1e-3,
                       max_files: int = 4) -> Placement:
    """Best placement on the grid {0, delta, ..., 1}^N with sum q = M.

    The grid is searched exactly by dynamic programming over files: the best
    cost of spending t grid steps on the first j files is a min-plus
    convolution of the previous table with file j's sampled rate.
    """
    g = _gamma(gamma)
    p = _probs(popularity)
    N = len(p)
    if N > max_files:
        raise ValueError(f"oracle limited to {max_files} files, got {N}")
    _check_budget(N, M)
    K = int(round(1.0 / resolution))
    if abs(K * resolution - 1.0) > 1e-9:
        raise ValueError("resolution must divide 1")
    T = int(round(M / resolution))
    if abs(T * resolution - M) > 1e-9:
        raise ValueError("resolution must divide the budget M")

    levels = np.arange(K + 1) / K
    d = np.arange(len(g))[:, None]
    # per-file cost at every grid level
    unit = g @ (1.0 - np.minimum(1.0, d * levels[None, :]))
    best = np.full(T + 1, np.inf)
    best[:min(K, T) + 1] = p[0] * unit[:min(K, T) + 1]
    choices = [np.minimum(np.arange(T + 1), K)]
    for j in range(1, N):
        cost_j = p[j] * unit
        new = np.full(T + 1, np.inf)
        arg = np.zeros(T + 1, dtype=np.int64)
        for k in range(K + 1):
            if k > T:
                break
            cand = best[:T + 1 - k] + cost_j[k]
            better = cand < new[k:]
            new[k:][better] = cand[better]
            arg[k:][better] = k
        best = new
        choices.append(arg)

    steps = np.zeros(N, dtype=np.int64)
    t = T
    for j in range(N - 1, 0, -1):
        steps[j] = choices[j][t]
        t -= steps[j]
    steps[0] = t
    if not np.isfinite(best[T]) or steps[0] > K:
        raise ValueError("budget infeasible on this grid")
    return Placement(steps / K, M, "oracle")


def exhaustive_oracle(gamma, popularity, M: float, resolution: float) -> Placement:
    """Literal enumeration of the grid; only for coarse grids and tiny N."""
    g = _gamma(gamma)
    p = _probs(popularity)
    K = int(round(1.0 / resolution))
    T = int(round(M / resolution))
    best, best_q = np.inf, None
    for head in product(range(K + 1), repeat=len(p) - 1):
        last = T - sum(head)
        if not 0 <= last <= K:
            continue
        q = np.array(head + (last,)) / K
        val = mds_objective(g, p, q)
        if val < best - 1e-15:
            best, best_q = val, q
    if best_q is None:
        raise ValueError("budget infeasible on this grid")
    return Placement(best_q, M, "exhaustive")
