"""Zipf file popularity."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class PopularityModel:
    """Request probabilities for a library of ``n_files`` equal-size files.

    Files are indexed from 0 in decreasing order of popularity.
    """

    n_files: int
    alpha: float
    probs: np.ndarray
    cdf: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = self.probs
        if p.shape != (self.n_files,):
            raise ValueError("probs must have length n_files")
        if np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probs must be positive and sum to 1")
        if np.any(np.diff(p) > 0):
            raise ValueError("probs must be non-increasing")


def zipf(n_files: int, alpha: float) -> PopularityModel:
    if n_files < 1:
        raise ValueError("n_files must be >= 1")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    w = np.arange(1, n_files + 1, dtype=float) ** -float(alpha)
    probs = w / w.sum()
    probs.setflags(write=False)
    cdf = np.cumsum(probs)
    cdf.setflags(write=False)
    return PopularityModel(n_files, float(alpha), probs, cdf)


def sample_request(model: PopularityModel, rng: np.random.Generator, size=None):
    """Draw file indices with probabilities ``model.probs`` by inverse CDF."""
    u = rng.random(size)
    idx = np.searchsorted(model.cdf, u, side="right")
    # cdf[-1] can fall a hair below 1
    idx = np.minimum(idx, model.n_files - 1)
    return int(idx) if size is None else idx
