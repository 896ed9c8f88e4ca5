"""
Experiment harness: coverage profiles, placements, rates and parameter sweeps.

    mdscache gamma  [--coverage-radius 60 ...]
    mdscache optimize --n-files 200 --cache-size 20
    mdscache rate   --strategies opt,prop --sim-samples 100000
    mdscache sweep  --figure 3 --output fig3.csv
    mdscache sweep  --config experiment.json

Values for ``--coverage-radius``, ``--cache-size`` and ``--n-files`` may be
a single number, a comma list, or an inclusive range ``start:stop:step``.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .demand import zipf
from .evaluation import rate_mds, rate_uncoded, simulate
from .optimizer import optimize
from .placement import Placement, most_popular, proportional, uniform
from .topology import CoverageProfile, GridTopology, deploy, estimate_gamma

log = logging.getLogger("mdscache")

CSV_HEADER = ["sweep_param", "value", "strategy", "coding", "rate", "stderr", "samples", "seed"]
CODINGS = ("mds", "uncoded")

STRATEGIES: dict[str, Callable[[CoverageProfile, object, float], Placement]] = {
    "opt": lambda gamma, pop, M: optimize(gamma, pop, M),
    "pop": lambda gamma, pop, M: most_popular(pop, M),
    "unif": lambda gamma, pop, M: uniform(pop.n_files, M),
    "prop": lambda gamma, pop, M: proportional(pop, M),
}
STRATEGY_ORDER = {name: i for i, name in enumerate(STRATEGIES)}

AXES = {"coverage_radius": "r", "cache_size": "M", "n_files": "N"}


def register_strategy(name: str, build: Callable) -> None:
    """Add a placement strategy ``build(gamma, popularity, M) -> Placement``."""
    STRATEGIES[name] = build
    STRATEGY_ORDER.setdefault(name, len(STRATEGY_ORDER))


@dataclass
class ExperimentConfig:
    grid_spacing: float = 60.0
    macro_radius: float = 500.0
    coverage_radius: float | list = 60.0
    user_density: float = 0.05
    inclusion: str = "calibrated"
    n_files: int | list = 200
    alpha: float = 0.7
    cache_size: float | list = 20
    strategies: list = field(default_factory=lambda: ["opt", "pop", "unif", "prop"])
    codings: list = field(default_factory=lambda: ["mds", "uncoded"])
    gamma_samples: int = 200_000
    sim_samples: int = 0
    n_fragments: int = 100
    seed: int = 0
    output: str | None = None

    def __post_init__(self):
        axes = [k for k in AXES if isinstance(getattr(self, k), (list, tuple))]
        if len(axes) > 1:
            raise ValueError(f"at most one sweep axis allowed, got {axes}")
        for k in axes:
            if len(getattr(self, k)) == 0:
                raise ValueError(f"empty range for {k}")
        unknown = set(self.strategies) - set(STRATEGIES)
        if unknown:
            raise ValueError(f"unknown strategies {sorted(unknown)}")
        bad = set(self.codings) - set(CODINGS)
        if bad:
            raise ValueError(f"unknown codings {sorted(bad)}")
        if self.gamma_samples < 1 or self.sim_samples < 0 or self.n_fragments < 1:
            raise ValueError("sample counts and n_fragments must be positive")

    @property
    def axis(self) -> str | None:
        for k in AXES:
            if isinstance(getattr(self, k), (list, tuple)):
                return k
        return None

    def points(self):
        """(sweep label, value, point config) for every sweep point."""
        axis = self.axis
        if axis is None:
            yield "point", None, self
            return
        for v in getattr(self, axis):
            yield AXES[axis], v, dataclasses.replace(self, **{axis: v})

    def topology(self) -> GridTopology:
        return GridTopology(
            self.grid_spacing, self.macro_radius, float(self.coverage_radius),
            self.user_density, inclusion=self.inclusion,
        )

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        obj = json.loads(text)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - names
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**obj)


def figure_config(figure: int, **overrides) -> ExperimentConfig:
    """Default sweeps for the cache-size, radius and library-size figures."""
    base = ExperimentConfig()
    if figure == 3:
        cfg = dataclasses.replace(base, cache_size=list(range(5, 101, 5)))
    elif figure == 4:
        d = base.grid_spacing
        cfg = dataclasses.replace(
            base, coverage_radius=[float(x) for x in np.linspace(d / np.sqrt(2), d, 7)]
        )
    elif figure == 5:
        cfg = dataclasses.replace(base, n_files=[50, 100] + list(range(200, 1001, 100)))
    else:
        raise ValueError(f"no preset for figure {figure}")
    return dataclasses.replace(cfg, **overrides)


class GammaCache:
    """Coverage profiles keyed by topology and sampling parameters."""

    def __init__(self, directory=None):
        self.directory = Path(directory) if directory else None
        self._mem: dict = {}

    def _key(self, topo: GridTopology, samples: int, seed: int) -> str:
        raw = json.dumps([dataclasses.astuple(topo), samples, seed])
        return hashlib.sha1(raw.encode()).hexdigest()[:16]

    def get(self, topo: GridTopology, samples: int, seed: int) -> CoverageProfile:
        key = self._key(topo, samples, seed)
        if key in self._mem:
            return self._mem[key]
        path = self.directory / f"gamma-{key}.json" if self.directory else None
        if path is not None and path.exists():
            prof = CoverageProfile.load(path)
        else:
            prof = estimate_gamma(topo, samples, seed)
            if path is not None:
                self.directory.mkdir(parents=True, exist_ok=True)
                prof.save(path)
        self._mem[key] = prof
        return prof


def run_sweep(config: ExperimentConfig, cache: GammaCache | None = None) -> list[dict]:
    cache = cache or GammaCache()
    rows = []
    for label, value, point in config.points():
        gamma = cache.get(point.topology(), point.gamma_samples, point.seed)
        pop = zipf(int(point.n_files), point.alpha)
        M = point.cache_size
        for name in point.strategies:
            placement = STRATEGIES[name](gamma, pop, M)
            for coding in point.codings:
                exact = rate_mds if coding == "mds" else rate_uncoded
                rep = exact(gamma, pop, placement)
                rows.append(_row(label, value, name, coding, rep.rate, 0.0, 0, point.seed))
                if point.sim_samples > 0:
                    sim = simulate(gamma, pop, placement, coding, point.n_fragments,
                                   point.sim_samples, point.seed)
                    rows.append(_row(label, value, name, coding, sim.rate, sim.std_err,
                                     sim.samples, point.seed))
        log.info("%s=%s done", label, value)
    rows.sort(key=lambda r: (
        r["value"] if r["value"] is not None else 0,
        STRATEGY_ORDER[r["strategy"]], CODINGS.index(r["coding"]), r["samples"],
    ))
    return rows


def _row(label, value, strategy, coding, rate, stderr, samples, seed):
    return {
        "sweep_param": label, "value": value, "strategy": strategy, "coding": coding,
        "rate": rate, "stderr": stderr, "samples": samples, "seed": seed,
    }


def check_invariants(rows: list[dict], tol: float = 1e-9) -> list[str]:
    """Optimizer dominance and MDS <= uncoded on the analytic rows."""
    problems = []
    table = {}
    for r in rows:
        if r["samples"] == 0:
            table[(r["value"], r["strategy"], r["coding"])] = r["rate"]
    for (value, strategy, coding), rate in table.items():
        best = table.get((value, "opt", "mds"))
        if coding == "mds" and best is not None and best > rate + tol:
            problems.append(f"value={value}: opt-mds {best:.6g} > {strategy}-mds {rate:.6g}")
        if coding == "mds":
            unc = table.get((value, strategy, "uncoded"))
            if unc is not None and rate > unc + tol:
                problems.append(f"value={value}: {strategy} mds {rate:.6g} > uncoded {unc:.6g}")
    return problems


def write_csv(rows: list[dict], out) -> None:
    w = csv.DictWriter(out, fieldnames=CSV_HEADER, lineterminator="\n")
    w.writeheader()
    for r in rows:
        r = dict(r)
        r["value"] = "" if r["value"] is None else r["value"]
        r["rate"] = repr(float(r["rate"]))
        r["stderr"] = repr(float(r["stderr"]))
        w.writerow(r)


def describe_gamma(config: ExperimentConfig) -> dict:
    topo = config.topology()
    prof = estimate_gamma(topo, config.gamma_samples, config.seed)
    out = json.loads(prof.to_json())
    out["n_sbs"] = int(len(deploy(topo)))
    out["expected_users"] = topo.expected_users
    out["std_err"] = [float(x) for x in prof.std_err]
    return out


# --- argument handling -----------------------------------------------------

def _parse_values(text: str, cast=float):
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        vals = np.arange(start, stop + step * 1e-9, step)
        return [cast(round(v, 12)) for v in vals]
    if "," in text:
        return [cast(x) for x in text.split(",")]
    return cast(text)


def _number(x: str):
    v = float(x)
    return int(v) if v.is_integer() else v


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON file with ExperimentConfig fields")
    p.add_argument("--grid-spacing", type=float)
    p.add_argument("--macro-radius", type=float)
    p.add_argument("--coverage-radius", type=lambda s: _parse_values(s, float))
    p.add_argument("--user-density", type=float)
    p.add_argument("--inclusion", choices=["calibrated", "reach"])
    p.add_argument("--n-files", type=lambda s: _parse_values(s, int))
    p.add_argument("--alpha", type=float)
    p.add_argument("--cache-size", type=lambda s: _parse_values(s, _number))
    p.add_argument("--strategies", type=lambda s: s.split(","))
    p.add_argument("--codings", type=lambda s: s.split(","))
    p.add_argument("--gamma-samples", type=int)
    p.add_argument("--sim-samples", type=int)
    p.add_argument("--n-fragments", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--output")


def _config_from_args(args, base: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = base or ExperimentConfig()
    if args.config is not None:
        cfg = ExperimentConfig.from_json(args.config.read_text())
    overrides = {}
    for f in dataclasses.fields(ExperimentConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            overrides[f.name] = v
    return dataclasses.replace(cfg, **overrides)


def _emit_rows(rows, output) -> None:
    if output:
        try:
            with open(output, "w", newline="") as fh:
                write_csv(rows, fh)
        except OSError as exc:
            raise SystemExit(f"cannot write {output}: {exc}")
    else:
        write_csv(rows, sys.stdout)


def _report_problems(problems) -> int:
    for msg in problems:
        print(f"invariant violated: {msg}", file=sys.stderr)
    return 1 if problems else 0


def cmd_gamma(args) -> int:
    cfg = _config_from_args(args)
    info = describe_gamma(cfg)
    print(json.dumps(info, indent=2))
    return 0 if abs(sum(info["gamma"]) - 1) <= 1e-12 else 1


def cmd_optimize(args) -> int:
    cfg = _config_from_args(args)
    gamma = estimate_gamma(cfg.topology(), cfg.gamma_samples, cfg.seed)
    pop = zipf(int(cfg.n_files), cfg.alpha)
    placement = STRATEGIES[args.strategy](gamma, pop, cfg.cache_size)
    if args.format == "csv":
        sys.stdout.write(placement.to_csv())
    else:
        out = placement.to_dict()
        out["rate_mds"] = rate_mds(gamma, pop, placement).rate
        out["rate_uncoded"] = rate_uncoded(gamma, pop, placement).rate
        print(json.dumps(out, indent=2))
    return 0


def cmd_rate(args) -> int:
    cfg = _config_from_args(args)
    if cfg.axis is not None:
        raise SystemExit("rate takes a single point; use sweep for ranges")
    rows = run_sweep(cfg)
    _emit_rows(rows, cfg.output)
    return _report_problems(check_invariants(rows))


def cmd_sweep(args) -> int:
    base = figure_config(args.figure) if args.figure else None
    cfg = _config_from_args(args, base)
    rows = run_sweep(cfg, GammaCache(args.gamma_cache))
    _emit_rows(rows, cfg.output)
    return _report_problems(check_invariants(rows))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mdscache", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gamma", help="estimate the coverage profile")
    _add_config_flags(p)
    p.set_defaults(func=cmd_gamma)

    p = sub.add_parser("optimize", help="print a placement")
    _add_config_flags(p)
    p.add_argument("--strategy", default="opt", choices=sorted(STRATEGIES))
    p.add_argument("--format", default="json", choices=["json", "csv"])
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("rate", help="rates of every strategy at one point")
    _add_config_flags(p)
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("sweep", help="rates over a parameter range")
    _add_config_flags(p)
    p.add_argument("--figure", type=int, choices=[3, 4, 5], help="preset sweep")
    p.add_argument("--gamma-cache", help="directory for cached coverage profiles")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
