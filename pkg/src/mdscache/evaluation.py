"""
Backhaul rate of a placement: closed forms and delivery-phase simulation.

The rate is the expected fraction of a requested file that the macro cell
must send over the backhaul. Users covered by no SBS take the whole file
from the macro cell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import galois_mds
from .demand import PopularityModel, sample_request
from .placement import Placement, to_integer
from .topology import (
    CoverageProfile,
    Deployment,
    GridTopology,
    chunk_streams,
    coverage_counts,
    covering_sets,
    deployment,
    uniform_disk,
)

MODES = ("analytic", "simulated-counting", "simulated-coded")
SCHEMES = ("mds", "uncoded")


@dataclass(frozen=True)
class RateReport:
    rate: float
    mode: str = "analytic"
    samples: int = 0
    std_err: float = 0.0
    scheme: str = "mds"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if not -1e-12 <= self.rate <= 1 + 1e-12:
            raise ValueError(f"rate {self.rate} outside [0, 1]")

    def row(self) -> dict:
        return {"rate": self.rate, "stderr": self.std_err, "samples": self.samples}


def _gamma(gamma) -> np.ndarray:
    if isinstance(gamma, CoverageProfile):
        return gamma.gamma
    return np.asarray(gamma, dtype=float)


def _probs(popularity) -> np.ndarray:
    if isinstance(popularity, PopularityModel):
        return popularity.probs
    return np.asarray(popularity, dtype=float)


def _fractions(placement) -> np.ndarray:
    if isinstance(placement, Placement):
        return placement.q
    return np.asarray(placement, dtype=float)


def _operands(gamma, popularity, placement):
    g, p, q = _gamma(gamma), _probs(popularity), _fractions(placement)
    if p.shape != q.shape:
        raise ValueError(f"popularity has {p.size} files, placement has {q.size}")
    return g, p, q


def mds_objective(g: np.ndarray, p: np.ndarray, q: np.ndarray) -> float:
    """sum_d sum_j g[d] p[j] (1 - min(1, d q[j])), with d running from 0."""
    d = np.arange(len(g))[:, None]
    miss = 1.0 - np.minimum(1.0, d * q[None, :])
    return float(g @ (miss @ p))


def uncoded_objective(g: np.ndarray, p: np.ndarray, q: np.ndarray) -> float:
    """sum_d sum_j g[d] p[j] (1 - q[j])^d, with d running from 0."""
    d = np.arange(len(g))[:, None]
    miss = (1.0 - q[None, :]) ** d
    return float(g @ (miss @ p))


def rate_mds(gamma, popularity, placement) -> RateReport:
    """Analytic backhaul rate when each SBS caches distinct MDS packets."""
    g, p, q = _operands(gamma, popularity, placement)
    return RateReport(mds_objective(g, p, q), "analytic", scheme="mds")


def rate_uncoded(gamma, popularity, placement) -> RateReport:
    """Analytic backhaul rate when each SBS caches a random fragment subset."""
    g, p, q = _operands(gamma, popularity, placement)
    return RateReport(uncoded_objective(g, p, q), "analytic", scheme="uncoded")


# --- simulation -----------------------------------------------------------

def _resolve_source(source):
    if isinstance(source, GridTopology):
        return deployment(source)
    if isinstance(source, (CoverageProfile, Deployment)):
        return source
    return CoverageProfile.from_gamma(source)


class _RequestSampler:
    """Draws (multiplicity, file, location) triples for one source."""

    def __init__(self, source, popularity: PopularityModel):
        self.source = _resolve_source(source)
        self.popularity = popularity
        if isinstance(self.source, Deployment):
            self.tree = self.source.tree() if self.source.n_sbs else None
        else:
            self.gamma_cdf = np.cumsum(self.source.gamma)

    def draw(self, rng: np.random.Generator, size: int):
        points = None
        if isinstance(self.source, Deployment):
            src = self.source
            points = uniform_disk(rng, src.macro_radius, size)
            if self.tree is None:
                d = np.zeros(size, dtype=np.int64)
            else:
                d = coverage_counts(self.tree, src.coverage_radius, points)
        else:
            u = rng.random(size)
            d = np.searchsorted(self.gamma_cdf, u, side="right")
            d = np.minimum(d, len(self.gamma_cdf) - 1)
        files = sample_request(self.popularity, rng, size)
        return d, files, points


def _mds_packets(d, m, n):
    return np.maximum(0, n - d * m)


def _uncoded_packets(rng, d, m, n):
    # Union of d independent uniform m-subsets of n fragments, built one SBS
    # at a time: the fragments new to the union are hypergeometric.
    have = np.zeros(len(d), dtype=np.int64)
    for k in range(1, int(d.max(initial=0)) + 1):
        take = np.where(d >= k, m, 0)
        have += rng.hypergeometric(n - have, have, take)
    return n - have


def _summarize(total, total_sq, samples, n, mode, scheme):
    mean = total / (n * samples)
    if samples > 1:
        var = (total_sq / n ** 2 - samples * mean ** 2) / (samples - 1)
        std_err = float(np.sqrt(max(var, 0.0) / samples))
    else:
        std_err = 0.0
    return RateReport(float(mean), mode, samples, std_err, scheme)


def simulate(source, popularity: PopularityModel, placement: Placement,
             scheme: str = "mds", n_fragments: int = 100, samples: int = 100_000,
             seed: int = 0) -> RateReport:
    """Monte Carlo backhaul rate under the packet-counting model.

    ``source`` is a :class:`CoverageProfile` (multiplicity drawn directly), a
    :class:`GridTopology` or a :class:`Deployment` (user location drawn
    uniformly in the macro disk). Cached fractions are realized as integer
    part counts with :func:`~mdscache.placement.to_integer`.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if n_fragments < 1 or samples < 1:
        raise ValueError("n_fragments and samples must be >= 1")
    if placement.n_files != popularity.n_files:
        raise ValueError("placement and popularity disagree on library size")

    sampler = _RequestSampler(source, popularity)
    m_all = to_integer(placement, n_fragments)
    total = 0
    total_sq = 0
    for rng, size in chunk_streams(seed, samples):
        d, files, _ = sampler.draw(rng, size)
        m = m_all[files]
        if scheme == "mds":
            pk = _mds_packets(d, m, n_fragments)
        else:
            pk = _uncoded_packets(rng, d, m, n_fragments)
        total += int(pk.sum())
        total_sq += int((pk * pk).sum())
    return _summarize(total, total_sq, samples, n_fragments, "simulated-counting", scheme)


def simulate_coded_end_to_end(source, popularity: PopularityModel,
                              placement: Placement, n_fragments: int,
                              samples: int, seed: int = 0,
                              fragment_bytes: int = 8):
    """Run the placement and delivery protocol on real encoded bytes.

    Every file gets ``E_j = n + (K - 1) m_j`` Reed-Solomon packets for K SBSs.
    The macro cell keeps packets ``0 .. n - m_j - 1`` and SBS k holds the
    next block of ``m_j``. A request collects the packets of its covering
    SBSs, tops them up from the macro cell and decodes.

    The request stream is the one :func:`simulate` draws for the same
    ``source`` and ``seed``, so the two rates must agree exactly.

    Returns ``(report, all_decoded)``.
    """
    dep = _resolve_source(source)
    if not isinstance(dep, Deployment):
        raise ValueError("end-to-end simulation needs SBS positions, not a profile")
    n = n_fragments
    K = dep.n_sbs
    m_all = to_integer(placement, n)
    E = n + max(K - 1, 0) * m_all
    if E.max() > galois_mds.MAX_PACKETS:
        raise galois_mds.CodecError(
            f"E_j up to {int(E.max())} packets exceeds codec capacity {galois_mds.MAX_PACKETS}"
        )

    content_rng = np.random.default_rng([seed, 1])
    files, packets = [], []
    for j in range(popularity.n_files):
        data = content_rng.integers(0, 256, n * fragment_bytes, dtype=np.uint8).tobytes()
        params = galois_mds.CodeParams(n, int(E[j]))
        files.append(data)
        packets.append(galois_mds.encode(params, galois_mds.split(data, n)))

    def stored(j, k):
        m = int(m_all[j])
        start = n - m + k * m
        return packets[j][start:start + m]

    sampler = _RequestSampler(dep, popularity)
    all_ok = True
    total = 0
    total_sq = 0
    for rng, size in chunk_streams(seed, samples):
        _, req_files, points = sampler.draw(rng, size)
        covers = covering_sets(sampler.tree, dep.coverage_radius, points)
        for cover, j in zip(covers, req_files):
            j = int(j)
            got = [pk for k in cover for pk in stored(j, k)]
            need = max(0, n - len(got))
            # with no covering SBS the macro cell regenerates the systematic
            # packets it handed out, since it holds the whole file
            got.extend(packets[j][:need])
            params = galois_mds.CodeParams(n, int(E[j]))
            try:
                out = galois_mds.decode(params, got)
            except galois_mds.CodecError:
                all_ok = False
                continue
            if b"".join(out) != files[j]:
                all_ok = False
            total += need
            total_sq += need * need
    report = _summarize(total, total_sq, samples, n, "simulated-coded", "mds")
    return report, all_ok
