"""
Grid deployment of small cells inside a macro cell, and the distribution of
how many small cells cover a uniformly placed user.

Inclusion rules
---------------
``"calibrated"`` (default)
    The macro-cell center sits at the center of a grid cell, and a grid site
    is deployed if it lies within ``D + r + d/sqrt(2)`` of the center, where
    ``d/sqrt(2)`` is the largest distance from any point to its nearest grid
    site. With d=60, D=500, r=60 this deploys 316 SBSs.
``"reach"``
    A site sits on the macro-cell center, and a site is deployed if its
    coverage disk touches the macro disk (distance <= ``D + r``).

Both rules keep every site whose coverage disk touches the macro disk; the
extra sites of the calibrated rule never cover a user.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

INCLUSION_RULES = ("calibrated", "reach")

# closed coverage disk, with slack so that geometric ties survive rounding
_TIE_SLACK = 1e-12

CHUNK_SIZE = 1 << 16


@dataclass(frozen=True)
class GridTopology:
    grid_spacing: float = 60.0
    macro_radius: float = 500.0
    coverage_radius: float = 60.0
    user_density: float = 0.05
    full_coverage: bool = False
    inclusion: str = "calibrated"

    def __post_init__(self):
        for name in ("grid_spacing", "macro_radius", "user_density"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if not (np.isfinite(self.coverage_radius) and self.coverage_radius >= 0):
            raise ValueError("coverage_radius must be nonnegative and finite")
        if self.inclusion not in INCLUSION_RULES:
            raise ValueError(f"unknown inclusion rule {self.inclusion!r}")
        if self.full_coverage:
            d, r = self.grid_spacing, self.coverage_radius
            if not d / np.sqrt(2) * (1 - _TIE_SLACK) <= r <= d:
                raise ValueError("full coverage requires d/sqrt(2) <= r <= d")

    def with_radius(self, r: float) -> "GridTopology":
        return GridTopology(
            self.grid_spacing, self.macro_radius, r, self.user_density,
            self.full_coverage, self.inclusion,
        )

    @property
    def expected_users(self) -> float:
        return self.user_density * np.pi * self.macro_radius ** 2


@dataclass(frozen=True)
class Deployment:
    """Concrete SBS positions with a common coverage radius."""

    positions: np.ndarray
    coverage_radius: float
    macro_radius: float

    @property
    def n_sbs(self) -> int:
        return len(self.positions)

    def tree(self) -> cKDTree:
        return cKDTree(self.positions)


def deploy(topology: GridTopology) -> np.ndarray:
    """SBS positions, shape (K, 2), in row-major order (y, then x ascending)."""
    d = topology.grid_spacing
    D, r = topology.macro_radius, topology.coverage_radius
    if topology.inclusion == "calibrated":
        offset = 0.5
        cutoff = D + r + d / np.sqrt(2)
    else:
        offset = 0.0
        cutoff = D + r
    k = int(np.ceil(cutoff / d)) + 1
    coords = (np.arange(-k, k + 1) + offset) * d
    ys, xs = np.meshgrid(coords, coords, indexing="ij")
    pts = np.column_stack([xs.ravel(), ys.ravel()])
    keep = np.hypot(pts[:, 0], pts[:, 1]) <= cutoff * (1 + _TIE_SLACK)
    return pts[keep]


def deployment(topology: GridTopology) -> Deployment:
    return Deployment(deploy(topology), topology.coverage_radius, topology.macro_radius)


def coverage_count(topology, sbs_positions, point) -> int:
    """Number of SBSs within ``coverage_radius`` of ``point`` (ties covered)."""
    pos = np.asarray(sbs_positions, dtype=float).reshape(-1, 2)
    dist = np.hypot(pos[:, 0] - point[0], pos[:, 1] - point[1])
    return int(np.count_nonzero(dist <= topology.coverage_radius * (1 + _TIE_SLACK)))


def coverage_counts(tree: cKDTree, radius: float, points: np.ndarray) -> np.ndarray:
    """Vectorized :func:`coverage_count` over an (n, 2) array of points."""
    if len(points) == 0:
        return np.zeros(0, dtype=np.int64)
    counts = tree.query_ball_point(points, radius * (1 + _TIE_SLACK), return_length=True)
    return np.asarray(counts, dtype=np.int64)


def covering_sets(tree: cKDTree | None, radius: float, points: np.ndarray) -> list:
    """Indices of the SBSs covering each point, sorted."""
    if tree is None:
        return [[] for _ in range(len(points))]
    sets = tree.query_ball_point(points, radius * (1 + _TIE_SLACK))
    return [sorted(s) for s in sets]


def uniform_disk(rng: np.random.Generator, radius: float, size: int) -> np.ndarray:
    rho = radius * np.sqrt(rng.random(size))
    theta = 2 * np.pi * rng.random(size)
    return np.column_stack([rho * np.cos(theta), rho * np.sin(theta)])


def chunk_streams(seed: int, samples: int, chunk_size: int = CHUNK_SIZE):
    """Per-chunk generators and sizes.

    The chunking depends only on ``samples``, so any partition of the chunks
    over workers reproduces the same draws.
    """
    n_chunks = -(-samples // chunk_size)
    seqs = np.random.SeedSequence(seed).spawn(n_chunks)
    sizes = [chunk_size] * (n_chunks - 1) + [samples - chunk_size * (n_chunks - 1)]
    return [(np.random.default_rng(s), size) for s, size in zip(seqs, sizes)]


@dataclass(frozen=True)
class CoverageProfile:
    """Distribution of coverage multiplicity; ``gamma[d]`` for d = 0..s_max."""

    gamma: np.ndarray
    samples: int = 0
    seed: int | None = None

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        if g.ndim != 1 or len(g) == 0:
            raise ValueError("gamma must be a nonempty vector")
        if np.any(g < 0) or abs(g.sum() - 1.0) > 1e-12:
            raise ValueError("gamma must be nonnegative and sum to 1")
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)

    @classmethod
    def from_gamma(cls, values, samples: int = 0, seed: int | None = None):
        """Profile from per-multiplicity probabilities, index 0 meaning d=0."""
        return cls(np.asarray(values, dtype=float), samples, seed)

    @classmethod
    def from_covered(cls, values):
        """Profile from probabilities for d = 1, 2, ... (no uncovered users)."""
        return cls(np.concatenate([[0.0], np.asarray(values, dtype=float)]))

    @property
    def s_max(self) -> int:
        return len(self.gamma) - 1

    @property
    def std_err(self) -> np.ndarray:
        if self.samples == 0:
            return np.zeros_like(self.gamma)
        return np.sqrt(self.gamma * (1 - self.gamma) / self.samples)

    @property
    def mean(self) -> float:
        return float(np.dot(np.arange(len(self.gamma)), self.gamma))

    def to_json(self) -> str:
        return json.dumps(
            {
                "gamma": [float(x) for x in self.gamma],
                "s_max": self.s_max,
                "samples": self.samples,
                "seed": self.seed,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "CoverageProfile":
        obj = json.loads(text)
        prof = cls(np.asarray(obj["gamma"], dtype=float), obj.get("samples", 0), obj.get("seed"))
        if "s_max" in obj and obj["s_max"] != prof.s_max:
            raise ValueError("s_max does not match gamma length")
        return prof

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "CoverageProfile":
        return cls.from_json(Path(path).read_text())


def estimate_gamma(topology, samples: int, seed: int = 0, workers: int = 1,
                   positions=None) -> CoverageProfile:
    """Monte Carlo estimate of the coverage profile.

    ``topology`` is a :class:`GridTopology` or a :class:`Deployment`; users
    are uniform in the macro disk. ``positions`` overrides the SBS layout.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if isinstance(topology, Deployment):
        dep = topology
    else:
        dep = deployment(topology)
    if positions is not None:
        dep = Deployment(np.asarray(positions, dtype=float).reshape(-1, 2),
                         dep.coverage_radius, dep.macro_radius)

    tree = dep.tree() if dep.n_sbs else None

    def run(stream):
        rng, size = stream
        pts = uniform_disk(rng, dep.macro_radius, size)
        if tree is None:
            return np.array([size])
        return np.bincount(coverage_counts(tree, dep.coverage_radius, pts))

    streams = chunk_streams(seed, samples)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, streams))
    else:
        parts = [run(s) for s in streams]

    total = np.zeros(max(len(p) for p in parts), dtype=np.int64)
    for p in parts:
        total[:len(p)] += p
    last = np.flatnonzero(total)[-1]
    total = total[:last + 1]
    gamma = total / samples
    return CoverageProfile(gamma, samples, seed)
