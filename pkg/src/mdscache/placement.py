"""
Cache placements and the heuristic placement strategies.

A placement stores, for every file j, the fraction ``q[j] = m_j / n`` of the
file held by each SBS. Every SBS holds the same fractions.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .demand import PopularityModel

BUDGET_TOL = 1e-9


@dataclass(frozen=True)
class Placement:
    q: np.ndarray
    cache_capacity: float
    label: str = ""

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.ndim != 1:
            raise ValueError("q must be a vector")
        if np.any(q < 0) or np.any(q > 1):
            raise ValueError("cached fractions must lie in [0, 1]")
        if q.sum() > self.cache_capacity + BUDGET_TOL:
            raise ValueError(
                f"placement uses {q.sum():.12g} files of cache, capacity {self.cache_capacity}"
            )
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @property
    def n_files(self) -> int:
        return len(self.q)

    def to_dict(self) -> dict:
        return {"label": self.label, "M": self.cache_capacity, "q": [float(x) for x in self.q]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Placement":
        obj = json.loads(text)
        return cls(np.asarray(obj["q"], dtype=float), obj["M"], obj.get("label", ""))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label", "M", "file", "q"])
        for j, x in enumerate(self.q):
            w.writerow([self.label, self.cache_capacity, j, repr(float(x))])
        return buf.getvalue()


def _check_budget(n_files: int, M: float) -> None:
    if M < 0:
        raise ValueError("cache size must be >= 0")
    if M > n_files:
        raise ValueError(f"cache size M={M} exceeds library size N={n_files}")


def most_popular(popularity: PopularityModel, M: int) -> Placement:
    """Cache the ``M`` most popular files whole."""
    if int(M) != M:
        raise ValueError("most_popular needs an integer cache size")
    M = int(M)
    _check_budget(popularity.n_files, M)
    # stable sort breaks ties towards the lower index
    order = np.argsort(-popularity.probs, kind="stable")
    q = np.zeros(popularity.n_files)
    q[order[:M]] = 1.0
    return Placement(q, M, "pop")


def uniform(n_files: int, M: float) -> Placement:
    _check_budget(n_files, M)
    return Placement(np.full(n_files, M / n_files), M, "unif")


def proportional(popularity: PopularityModel, M: float) -> Placement:
    """Fractions proportional to popularity, capped at 1.

    Budget freed by capped files is spread again over the uncapped ones in
    proportion to their popularity until no further file reaches the cap.
    """
    _check_budget(popularity.n_files, M)
    p = popularity.probs
    q = np.zeros_like(p)
    capped = np.zeros(len(p), dtype=bool)
    while True:
        free = ~capped
        budget = M - capped.sum()
        mass = p[free].sum()
        if budget <= 0 or mass == 0:
            break
        trial = p * budget / mass
        newly = free & (trial >= 1.0)
        if not newly.any():
            q[free] = trial[free]
            break
        capped |= newly
        q[newly] = 1.0
    return Placement(q, M, "prop")


def to_integer(placement: Placement, n: int) -> np.ndarray:
    """Integer part counts ``m_j`` out of ``n`` per file.

    Largest-remainder rounding keeps ``sum(m) == round(sum(q) * n)`` and puts
    every ``m_j`` at the floor or ceiling of ``q_j * n``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    scaled = placement.q * n
    m = np.floor(scaled + 1e-9).astype(np.int64)
    target = int(round(float(scaled.sum())))
    short = target - int(m.sum())
    if short > 0:
        frac = scaled - m
        # largest remainder first, lower index on ties
        order = np.lexsort((np.arange(len(frac)), -frac))
        m[order[:short]] += 1
    elif short < 0:
        frac = scaled - m
        order = np.lexsort((np.arange(len(frac)), frac))
        m[order[:-short]] -= 1
    return np.minimum(m, n)
