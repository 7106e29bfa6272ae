"""
Command-line reports: exponent regions, frontiers, simulations and the
validation suite.

    twohop-dht --source dsbs-example --command region --eps1 0.05 --eps2 0.05 --grid 0.3:0.1:0.8
"""
import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .exponent_regions import (EpsilonPair, OptimizerConfig, RateBudget, Regime, Variant,
                               brute_force_oracle, fixed_corner, frontier_eps1_greater,
                               frontier_eps2_greater, max_forwarded_info, region_equal_eps,
                               theta1_fix, verify_solution)
from .probability import (ConditionalPmf, Pmf, Side, TwoHopSource, entropy,
                          mutual_information)
from .sim.scheme import (SchemeParams, estimate_errors, length_bound, min_blocklength,
                         partition_rule_for, scheme_rates, sweep_blocklengths)
from .utils import derive_seed

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2

COMMANDS = ("region", "frontier", "simulate", "validate")
DSBS_EXAMPLE = "dsbs-example"

# Exponents of the built-in source at R1 = R2 = 0.5, eps = 0.05.
DSBS_REFERENCE = {"theta1_fix": 0.162282395565877, "theta1_eps": 0.169743069706874,
                  "theta2_fix": 0.325872480392762, "theta2_eps": 0.340885797698503}


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(message if line is None else "line %d: %s" % (line, message))


# Sources

def dsbs_example() -> TwoHopSource:
    """X ~ Bern(0.4), Y = X xor T, Z = Y xor S with T, S ~ Bern(0.8)."""
    flip = ConditionalPmf(np.array([[0.2, 0.8], [0.8, 0.2]]))
    return TwoHopSource(Pmf.bernoulli(0.4), flip, flip)


def _parse_numbers(text: str, line: int) -> List[float]:
    try:
        return [float(tok) for tok in text.split()]
    except ValueError:
        raise ConfigError("expected numbers, got %r" % text.strip(), line)


def parse_source(text: str) -> TwoHopSource:
    """Key/value source description.

    ``p_x`` is a vector, ``p_y_given_x`` and ``p_z_given_y`` row-major matrices
    whose rows are separated by ``;`` or continue on indented lines. Optional
    ``x_size``, ``y_size``, ``z_size`` pin the alphabet sizes. ``#`` starts a
    comment.
    """
    entries = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        if not body.strip():
            continue
        if "=" in body:
            key, value = (s.strip() for s in body.split("=", 1))
            if key in entries:
                raise ConfigError("duplicate key %r" % key, lineno)
            entries[key] = (lineno, [])
            current = key
        elif current is not None and body[:1].isspace():
            value = body
        else:
            raise ConfigError("expected 'key = value'", lineno)
        rows = entries[current][1]
        for chunk in value.split(";"):
            if chunk.strip():
                rows.append(_parse_numbers(chunk, lineno))

    known = {"p_x", "p_y_given_x", "p_z_given_y", "x_size", "y_size", "z_size"}
    for key, (lineno, _) in entries.items():
        if key not in known:
            raise ConfigError("unknown key %r" % key, lineno)
    for key in ("p_x", "p_y_given_x", "p_z_given_y"):
        if key not in entries:
            raise ConfigError("missing key %r" % key)

    def _size(key):
        if key not in entries:
            return None
        lineno, rows = entries[key]
        if len(rows) != 1 or len(rows[0]) != 1 or rows[0][0] != int(rows[0][0]) or rows[0][0] < 1:
            raise ConfigError("%s must be a positive integer" % key, lineno)
        return int(rows[0][0])

    def _matrix(key):
        lineno, rows = entries[key]
        if not rows:
            raise ConfigError("%s has no values" % key, lineno)
        if len({len(r) for r in rows}) != 1:
            raise ConfigError("%s rows have different lengths" % key, lineno)
        return lineno, np.array(rows)

    sizes = {axis: _size(axis + "_size") for axis in ("x", "y", "z")}
    try:
        lineno, px = _matrix("p_x")
        if px.shape[0] != 1:
            raise ConfigError("p_x must be a single row", lineno)
        p_x = Pmf(px[0])
        lineno, m = _matrix("p_y_given_x")
        p_y_given_x = ConditionalPmf(m)
        lineno, m = _matrix("p_z_given_y")
        p_z_given_y = ConditionalPmf(m)
        src = TwoHopSource(p_x, p_y_given_x, p_z_given_y)
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e), lineno)
    for axis, declared in sizes.items():
        actual = src.sizes["xyz".index(axis)]
        if declared is not None and declared != actual:
            raise ConfigError("%s_size = %d but the tables have %d symbols"
                              % (axis, declared, actual), entries[axis + "_size"][0])
    return src


def load_source(name: str) -> TwoHopSource:
    if name == DSBS_EXAMPLE:
        return dsbs_example()
    if not os.path.exists(name):
        raise ConfigError("source file %s does not exist" % name)
    with open(name) as fp:
        return parse_source(fp.read())


# Report rows

def _q(value):
    return None if value is None else float("%.15g" % value)


@dataclass(frozen=True)
class ReportRow:
    """Flat CSV record; floats are kept at 15 significant digits."""

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, (float, np.floating)):
                object.__setattr__(self, f.name, _q(float(value)))

    @classmethod
    def columns(cls, timing: bool = False) -> List[str]:
        return [f.name for f in dataclasses.fields(cls) if timing or f.name != "runtime"]

    def to_csv(self, columns: Sequence[str]) -> List[str]:
        out = []
        for name in columns:
            value = getattr(self, name)
            if value is None:
                out.append("")
            elif isinstance(value, float):
                out.append("%.15g" % value)
            else:
                out.append(str(value))
        return out

    @classmethod
    def from_csv(cls, record: dict) -> "ReportRow":
        kwargs = {}
        for f in dataclasses.fields(cls):
            text = record.get(f.name, "")
            if text == "":
                kwargs[f.name] = None
            elif f.type in (str, "str"):
                kwargs[f.name] = text
            else:
                kwargs[f.name] = float(text)
        return cls(**kwargs)


@dataclass(frozen=True)
class RegionRow(ReportRow):
    r: float
    eps: float
    theta1_fix: float
    theta1_eps: float
    theta2_fix: float
    theta2_eps: float
    runtime: Optional[float] = None


@dataclass(frozen=True)
class FrontierRow(ReportRow):
    variant: str
    status: str
    r1: float
    r2: float
    eps1: float
    eps2: float
    theta1: float
    theta2: Optional[float]
    rate_used_1: Optional[float]
    rate_used_2: Optional[float]
    runtime: Optional[float] = None


def write_rows(rows: Sequence[ReportRow], fp, kind, timing: bool = False):
    columns = kind.columns(timing)
    writer = csv.writer(fp, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(row.to_csv(columns))


def read_rows(path) -> List[ReportRow]:
    with open(path, newline="") as fp:
        reader = csv.DictReader(fp)
        kind = RegionRow if "theta1_fix" in (reader.fieldnames or ()) else FrontierRow
        return [kind.from_csv(record) for record in reader]


# Configuration

def parse_grid(text: Optional[str]) -> Optional[Tuple[float, ...]]:
    """``start:step:end`` (end included), a single value, or empty."""
    if text is None:
        return None
    text = text.strip()
    if not text:
        return ()
    parts = text.split(":")
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        raise ConfigError("grid must be start:step:end, got %r" % text)
    if len(nums) == 1:
        return (nums[0],)
    if len(nums) != 3 or nums[1] <= 0 or nums[2] < nums[0]:
        raise ConfigError("grid must be start:step:end with step > 0 and end >= start, got %r"
                          % text)
    start, step, end = nums
    count = int(np.floor((end - start) / step + 1e-9)) + 1
    return tuple(round(start + i * step, 12) for i in range(count))


def parse_n_grid(text: Optional[str]) -> Optional[Tuple[int, ...]]:
    """Blocklengths for simulation sweeps, same syntax as parse_grid."""
    values = parse_grid(text)
    if values is None:
        return None
    ns = tuple(int(round(v)) for v in values)
    if any(abs(n - v) > 1e-9 for n, v in zip(ns, values)):
        raise ConfigError("blocklengths must be integers, got %r" % text)
    return ns


@dataclass(frozen=True)
class RunConfig:
    source: str
    command: str
    r1: float = 0.5
    r2: float = 0.5
    eps1: float = 0.05
    eps2: float = 0.05
    grid: Optional[Tuple[float, ...]] = None
    variants: Tuple[str, ...] = ("full",)
    n: int = 100
    n_grid: Optional[Tuple[int, ...]] = None
    mu: Optional[float] = None
    trials: int = 1000
    theta1: float = 0.
    seed: int = 0
    out: Optional[str] = None
    transcript: Optional[str] = None
    jobs: int = 1
    timing: bool = False
    verbose: int = 0
    u_cardinality: Optional[int] = None
    grid_resolution: float = 0.05
    curve_step: float = 0.025
    oracle_resolution: float = 0.01

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError("unknown command %r" % self.command)
        if self.source != DSBS_EXAMPLE and not os.path.exists(self.source):
            raise ConfigError("source file %s does not exist" % self.source)
        if self.r1 < 0 or self.r2 < 0:
            raise ConfigError("rates must be non-negative")
        for name in ("eps1", "eps2"):
            if not 0 <= getattr(self, name) < 1:
                raise ConfigError("%s must lie in [0, 1)" % name)
        for v in self.variants:
            if v not in {x.value for x in Variant}:
                raise ConfigError("unknown variant %r" % v)
        if self.n < 1:
            raise ConfigError("n must be positive")
        if self.n_grid is not None and (len(self.n_grid) < 2 or min(self.n_grid) < 1):
            raise ConfigError("an n grid needs at least two positive blocklengths")
        if self.mu is not None and self.mu <= 0:
            raise ConfigError("mu must be positive")
        if self.command == "simulate" and self.trials < 1:
            raise ConfigError("trials must be at least 1, got %d" % self.trials)
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        return cls(source=args.source, command=args.command, r1=args.r1, r2=args.r2,
                   eps1=args.eps1, eps2=args.eps2, grid=parse_grid(args.grid),
                   variants=tuple(args.variant or ("full",)), n=args.n,
                   n_grid=parse_n_grid(args.n_grid), mu=args.mu,
                   trials=args.trials, theta1=args.theta1, seed=args.seed, out=args.out,
                   transcript=args.transcript, jobs=args.jobs, timing=args.timing,
                   verbose=args.verbose, u_cardinality=args.u_cardinality,
                   grid_resolution=args.grid_resolution, curve_step=args.curve_step,
                   oracle_resolution=args.oracle_resolution)

    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(u_cardinality=self.u_cardinality,
                               grid_resolution=self.grid_resolution,
                               curve_step=self.curve_step, seed=self.seed,
                               n_jobs=self.jobs, verbose=self.verbose)


# Commands

def cmd_region(cfg: RunConfig, src: TwoHopSource) -> List[RegionRow]:
    if cfg.eps1 != cfg.eps2:
        raise ConfigError("region sweeps need eps1 == eps2; use --command frontier")
    opt = cfg.optimizer()
    eps = EpsilonPair.equal(cfg.eps1)
    grid = cfg.grid if cfg.grid is not None else parse_grid("0.3:0.1:0.8")
    rows = []
    for r in grid:
        tic = time.perf_counter()
        budget = RateBudget(r, r)
        fixed, _ = fixed_corner(src, budget, opt)
        boosted, _ = region_equal_eps(src, budget, eps, opt)
        rows.append(RegionRow(r, cfg.eps1, fixed.theta1, boosted.theta1, fixed.theta2,
                              boosted.theta2,
                              runtime=time.perf_counter() - tic if cfg.timing else None))
        logger.info("R=%g: fixed (%.6f, %.6f), eps (%.6f, %.6f)", r, fixed.theta1,
                    fixed.theta2, boosted.theta1, boosted.theta2)
    return rows


def _default_theta1_grid(src, r: RateBudget, eps: EpsilonPair, opt) -> Tuple[float, ...]:
    top = theta1_fix(src, r.r1 / (1. - eps.eps1), opt)
    return tuple(np.linspace(0., top, 21))


def cmd_frontier(cfg: RunConfig, src: TwoHopSource) -> List[FrontierRow]:
    if cfg.eps1 == cfg.eps2:
        raise ConfigError("eps1 == eps2 gives a rectangle region without tradeoff;"
                          " use --command region")
    opt = cfg.optimizer()
    eps = EpsilonPair(cfg.eps1, cfg.eps2)
    budget = RateBudget(cfg.r1, cfg.r2)
    grid = cfg.grid if cfg.grid is not None else _default_theta1_grid(src, budget, eps, opt)
    solve = frontier_eps2_greater if eps.regime is Regime.EPS2_GREATER else frontier_eps1_greater
    common = dict(r1=cfg.r1, r2=cfg.r2, eps1=cfg.eps1, eps2=cfg.eps2)

    rows = []
    for variant in cfg.variants:
        tic = time.perf_counter()
        frontier = solve(src, budget, eps, grid, Variant(variant), opt, on_infeasible="skip")
        runtime = time.perf_counter() - tic if cfg.timing else None
        records = [(p.theta1, FrontierRow(variant, frontier.label, theta1=p.theta1,
                                          theta2=p.theta2,
                                          rate_used_1=p.solution.rates_used.r1,
                                          rate_used_2=p.solution.rates_used.r2,
                                          runtime=runtime, **common))
                   for p in frontier.points]
        records += [(t, FrontierRow(variant, "infeasible", theta1=t, theta2=None,
                                    rate_used_1=None, rate_used_2=None, runtime=runtime,
                                    **common))
                    for t in frontier.infeasible]
        rows += [row for _, row in sorted(records, key=lambda rec: rec[0])]

    corner, sol = fixed_corner(src, budget, opt)
    rows.append(FrontierRow("fixed", "corner", theta1=corner.theta1, theta2=corner.theta2,
                            rate_used_1=sol.rates_used.r1, rate_used_2=sol.rates_used.r2,
                            **common))
    return rows


def _simulation_channels(cfg: RunConfig, src, eps: EpsilonPair, opt):
    budget = RateBudget(cfg.r1, cfg.r2)
    if eps.regime is Regime.EQUAL:
        return region_equal_eps(src, budget, eps, opt)[1]
    solve = frontier_eps2_greater if eps.regime is Regime.EPS2_GREATER else frontier_eps1_greater
    frontier = solve(src, budget, eps, [cfg.theta1], Variant(cfg.variants[0]), opt)
    return frontier.points[0].solution


def cmd_simulate(cfg: RunConfig, src: TwoHopSource) -> dict:
    opt = cfg.optimizer()
    eps = EpsilonPair(cfg.eps1, cfg.eps2)
    solution = _simulation_channels(cfg, src, eps, opt)
    mu = cfg.mu if cfg.mu is not None else SchemeParams.default_mu(cfg.n)
    params = SchemeParams(src, eps.regime, cfg.n, mu, eps, solution,
                          partition_seed=derive_seed(cfg.seed, 1),
                          codebook_seed=derive_seed(cfg.seed, 2),
                          noise_seed=derive_seed(cfg.seed, 3))
    rule = partition_rule_for(params)
    if cfg.n < min_blocklength(params):
        logger.warning("n=%d is below %d, where the scheme is guaranteed to meet its rates",
                       cfg.n, min_blocklength(params))
    tic = time.perf_counter()
    stats = estimate_errors(params, rule, cfg.trials, master_seed=cfg.seed,
                            transcript=cfg.transcript, n_jobs=cfg.jobs, verbose=cfg.verbose)
    rates = scheme_rates(params)
    bound1, bound2 = length_bound(params, rule)
    report = {
        "command": "simulate", "regime": eps.regime.value, "n": cfg.n, "mu": mu,
        "r1": cfg.r1, "r2": cfg.r2, "eps1": cfg.eps1, "eps2": cfg.eps2, "seed": cfg.seed,
        "partition": {"s_prob": rule.s_prob, "d2_prob": rule.d2_prob},
        "stats": stats.to_dict(),
        "theory": {"theta1": solution.achieved.theta1, "theta2": solution.achieved.theta2,
                   "scheme_rates": [rates.r1, rates.r2],
                   "length_bound": [bound1, bound2],
                   "min_blocklength": min_blocklength(params)},
    }
    if cfg.n_grid:
        sweep = sweep_blocklengths(params, cfg.n_grid, cfg.trials, cfg.seed, mu=cfg.mu,
                                   n_jobs=cfg.jobs, verbose=cfg.verbose)
        report["sweep"] = sweep.to_dict()
    if cfg.timing:
        report["runtime"] = time.perf_counter() - tic
    return report


def _check(name, passed, **detail):
    return dict(detail, name=name, passed=bool(passed))


def cmd_validate(cfg: RunConfig) -> dict:
    checks = []
    try:
        src = load_source(cfg.source)
    except ConfigError as e:
        return {"command": "validate", "passed": False,
                "checks": [_check("ingest", False, error=str(e))]}
    checks.append(_check("ingest", True))
    opt = cfg.optimizer()

    joint = src.p_xy
    delta = mutual_information(joint) - (entropy(joint.marginal(0)) + entropy(joint.marginal(1))
                                         - entropy(joint))
    checks.append(_check("mutual_information_identity", abs(delta) <= 1e-9, delta=delta))
    i_xy, i_yz, i_xz = (mutual_information(j) for j in (src.p_xy, src.p_yz, src.p_xz))
    checks.append(_check("data_processing", i_xz <= min(i_xy, i_yz) + 1e-12,
                         i_xz=i_xz, i_xy=i_xy, i_yz=i_yz))

    for side in Side:
        for cap in (0.1, 0.3, 0.5):
            name = "oracle_%s_%g" % (side.value, cap)
            try:
                oracle = brute_force_oracle(src, side, cap, cfg.oracle_resolution)
            except ValueError as e:
                checks.append(_check(name, True, skipped=str(e)))
                continue
            value = max_forwarded_info(src, side, cap, opt)[1]
            checks.append(_check(name, abs(value - oracle) <= 2 * cfg.oracle_resolution,
                                 delta=value - oracle))

    caps = np.linspace(0., entropy(src.p_x), 10)
    values = [max_forwarded_info(src, Side.TX_RELAY, c, opt)[1] for c in caps]
    drop = float(min(np.diff(values)))
    checks.append(_check("monotone_in_rate", drop >= -1e-9, worst_step=drop))

    eps = EpsilonPair.equal(cfg.eps1)
    budget = RateBudget(0.5, 0.5)
    corner, sol = region_equal_eps(src, budget, eps, opt)
    boosted = theta1_fix(src, 0.5 / (1. - eps.eps1), opt)
    checks.append(_check("boost_identity", abs(corner.theta1 - boosted) <= 2e-3,
                         delta=corner.theta1 - boosted))
    fixed, fixed_sol = fixed_corner(src, budget, opt)
    checks.append(_check("verify_equal_eps_solution",
                         verify_solution(src, sol, budget, eps, Regime.EQUAL)))
    checks.append(_check("verify_fixed_solution",
                         verify_solution(src, fixed_sol, budget, None, Regime.FIXED)))

    if cfg.source == DSBS_EXAMPLE and cfg.eps1 == 0.05:
        measured = {"theta1_fix": fixed.theta1, "theta1_eps": corner.theta1,
                    "theta2_fix": fixed.theta2, "theta2_eps": corner.theta2}
        for key, ref in sorted(DSBS_REFERENCE.items()):
            checks.append(_check("reference_%s" % key, abs(measured[key] - ref) <= 1e-3,
                                 delta=measured[key] - ref))

    return {"command": "validate", "passed": all(c["passed"] for c in checks),
            "checks": checks}


# Entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twohop-dht",
        description="Error-exponent regions and scheme simulations for two-hop hypothesis testing.")
    parser.add_argument("--source", default=DSBS_EXAMPLE,
                        help="source description file or '%s'" % DSBS_EXAMPLE)
    parser.add_argument("--command", required=True, choices=COMMANDS)
    parser.add_argument("--r1", type=float, default=0.5)
    parser.add_argument("--r2", type=float, default=0.5)
    parser.add_argument("--eps1", type=float, default=0.05)
    parser.add_argument("--eps2", type=float, default=0.05)
    parser.add_argument("--grid", default=None,
                        help="start:step:end; rates for region, theta1 values for frontier")
    parser.add_argument("--variant", action="append", choices=[v.value for v in Variant])
    parser.add_argument("--theta1", type=float, default=0.,
                        help="operating theta1 for simulations with unequal epsilons")
    parser.add_argument("--n", type=int, default=100)
    parser.add_argument("--n-grid", default=None,
                        help="start:step:end blocklengths; simulate also fits type-II exponents")
    parser.add_argument("--mu", type=float, default=None, help="defaults to n^(-1/3)")
    parser.add_argument("--trials", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=None, help="output path (default: stdout)")
    parser.add_argument("--transcript", default=None,
                        help="write per-trial records as newline-delimited JSON")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--timing", action="store_true", help="add runtimes to the output")
    parser.add_argument("--verbose", "-v", action="count", default=0)
    parser.add_argument("--u-cardinality", type=int, default=None)
    parser.add_argument("--grid-resolution", type=float, default=0.05)
    parser.add_argument("--curve-step", type=float, default=0.025)
    parser.add_argument("--oracle-resolution", type=float, default=0.01)
    return parser


def _emit(cfg: RunConfig, write):
    if cfg.out is None:
        write(sys.stdout)
    else:
        with open(cfg.out, "w", newline="") as fp:
            write(fp)


def _emit_json(cfg: RunConfig, report: dict):
    _emit(cfg, lambda fp: fp.write(json.dumps(report, sort_keys=True, indent=2) + "\n"))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.from_args(args)
        if cfg.command == "validate":
            report = cmd_validate(cfg)
            _emit_json(cfg, report)
            if report["checks"][0]["name"] == "ingest" and not report["checks"][0]["passed"]:
                return EXIT_CONFIG
            return EXIT_OK if report["passed"] else EXIT_FAILED
        src = load_source(cfg.source)
        if cfg.command == "region":
            rows = cmd_region(cfg, src)
            _emit(cfg, lambda fp: write_rows(rows, fp, RegionRow, cfg.timing))
        elif cfg.command == "frontier":
            rows = cmd_frontier(cfg, src)
            _emit(cfg, lambda fp: write_rows(rows, fp, FrontierRow, cfg.timing))
        else:
            _emit_json(cfg, cmd_simulate(cfg, src))
    except ValueError as e:
        logger.error("%s", e)
        return EXIT_CONFIG
    return EXIT_OK
