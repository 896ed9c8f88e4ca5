"""MDS-coded edge caching: backhaul rates, optimal placement, simulation."""

from .demand import PopularityModel, sample_request, zipf
from .evaluation import RateReport, rate_mds, rate_uncoded, simulate, simulate_coded_end_to_end
from .optimizer import brute_force_oracle, kkt_threshold, optimize, segments
from .placement import Placement, most_popular, proportional, to_integer, uniform
from .topology import (
    CoverageProfile,
    Deployment,
    GridTopology,
    coverage_count,
    deploy,
    deployment,
    estimate_gamma,
)

__all__ = [
    "CoverageProfile", "Deployment", "GridTopology", "Placement", "PopularityModel",
    "RateReport", "brute_force_oracle", "coverage_count", "deploy", "deployment",
    "estimate_gamma", "kkt_threshold", "most_popular", "optimize", "proportional",
    "rate_mds", "rate_uncoded", "sample_request", "segments", "simulate",
    "simulate_coded_end_to_end", "to_integer", "uniform", "zipf",
]
