"""
Command-line entry point: ``python -m cbrt <command>``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import pandas as pd
import yaml

from cbrt import __version__
from cbrt.config import ExperimentConfig, load_config
from cbrt.errors import CbrtError, CoincidentNodes, ConfigError, NotInSurvivalArea, RuleCountOverflow, TableFormatError
from cbrt.experiments import plots, runner, site
from cbrt.mobility.kinematics import (
    KinematicState,
    LifetimeScenario,
    is_unbounded,
    predict_lifetime,
    survival_exit_oracle,
)
from cbrt.ranking.sbfl import FuzzySystem, rule_count, sbfl_report
from cbrt.ranking.table import MetricTable

logger = logging.getLogger(__name__)

USAGE_ERRORS = (ConfigError, TableFormatError, NotInSurvivalArea, CoincidentNodes, FileNotFoundError)
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

EPILOG = """
Examples:
  python -m cbrt run configs/run.yaml --snapshot
  python -m cbrt compare --config configs/compare.yaml --workers 4
  python -m cbrt topo --config configs/topo.yaml
  python -m cbrt rank data/five_relays.csv
  python -m cbrt lifetime --source 0 0 0 0 --relay 50 0 1 3.1416 --dest 200 0 0 0 --range 100
  python -m cbrt rules --terms 3 --metrics 10 --svg
  python -m cbrt report --out out --public public
"""


# ── shared helpers ───────────────────────────────────────────────────

def _config(args) -> ExperimentConfig:
    overrides = {
        "experiment.seed": args.seed,
        "experiment.out_dir": args.out,
        "experiment.workers": args.workers,
        "experiment.svg": args.svg,
    }
    return load_config(getattr(args, "config_file", None) or args.config, overrides)


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.experiment.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _meta(cfg: ExperimentConfig, title: str, kind: str, **extra) -> dict:
    return {"title": title, "kind": kind, "seed": cfg.experiment.seed,
            "config": cfg.source or "defaults", **extra}


def _print_checks(checks):
    for check in checks:
        mark = "✓" if check.passed else "✗"
        print(f"  {mark} {check.name}: {check.detail}")


def _seconds(t: float) -> str:
    return "Unbounded" if is_unbounded(t) else f"{t:.6f} s"


# ── commands ─────────────────────────────────────────────────────────

def cmd_run(args) -> int:
    cfg = _config(args)
    out = _out_dir(cfg)
    print(f"Running {cfg.routing.protocol.upper()} with {cfg.world.node_count} nodes "
          f"for {cfg.sim.duration_s:g} s (seed {cfg.experiment.seed})...")
    result = runner.run_single(cfg, out, snapshot=args.snapshot)
    summary = result.summary(cfg.sim.warmup_s)
    table = pd.DataFrame([{"protocol": cfg.routing.protocol, "node_count": result.node_count, **summary}])
    runner.write_summary(out / "summary.md",
                         _meta(cfg, f"{cfg.routing.protocol.upper()} run", "run",
                               protocol=cfg.routing.protocol, node_count=result.node_count),
                         table)
    if args.csv:
        table.to_csv(sys.stdout, index=False)
    else:
        for key, value in summary.items():
            print(f"  {key:>15}: {value:.6g}" if isinstance(value, float) else f"  {key:>15}: {value}")
    if not result.conserved:
        logger.error("packet conservation violated: %d generated, %d delivered, %d dropped, %d in flight",
                     result.generated, result.delivered, result.dropped, result.in_flight)
        return 1
    print(f"Built {out / 'metrics.csv'}")
    print("\n✓ Run complete!")
    return 0


def cmd_compare(args) -> int:
    cfg = _config(args)
    out = _out_dir(cfg)
    jobs = runner.sweep_jobs(cfg, cfg.routing.protocols, cfg.experiment.node_counts)
    print(f"Comparing {', '.join(p.upper() for p in cfg.routing.protocols)} over "
          f"{len(cfg.experiment.node_counts)} node counts x {cfg.experiment.replicas} replicas "
          f"({len(jobs)} runs, {cfg.experiment.workers} workers)...")
    rows = runner.run_jobs(runner.run_job, cfg, jobs, cfg.experiment.workers)
    frame = runner.aggregate(rows)
    frame.to_csv(out / "compare.csv", index=False, float_format="%.6f", na_rep="")
    print(f"Built {out / 'compare.csv'}")
    charts = []
    if cfg.experiment.svg:
        charts = runner.compare_charts(frame, out)
        print(f"Built {len(charts)} charts")
    checks = runner.compare_checks(frame)
    runner.write_summary(out / "summary.md",
                         _meta(cfg, "CBRT vs ExOR", "compare", charts=[p.name for p in charts]),
                         frame, checks)
    if args.csv:
        frame.to_csv(sys.stdout, index=False, float_format="%.6f", na_rep="")
    _print_checks(checks)
    print("\n✓ Compare complete!")
    return 0


def cmd_topo(args) -> int:
    cfg = _config(args)
    out = _out_dir(cfg)
    jobs = runner.topo_jobs(cfg)
    print(f"Comparing OTC and k-connection over {len(cfg.topology.node_counts)} node counts x "
          f"{cfg.experiment.replicas} replicas...")
    frames = runner.run_jobs(runner.run_topo_job, cfg, jobs, cfg.experiment.workers)
    frame = runner.write_topo_csv(frames, out / "topo.csv")
    print(f"Built {out / 'topo.csv'}")
    n1, n2 = cfg.policy.band()
    summary = runner.topo_aggregate(frame, n1, n2, cfg.sim.warmup_s)
    charts = []
    if cfg.experiment.svg:
        charts = runner.topo_charts(summary, out)
        print(f"Built {len(charts)} charts")
    checks = runner.topo_checks(summary, cfg.topology.k)
    runner.write_summary(out / "summary.md",
                         _meta(cfg, "OTC vs k-connection", "topo", band=[n1, n2], k=cfg.topology.k,
                               charts=[p.name for p in charts]),
                         summary, checks)
    if args.csv:
        summary.to_csv(sys.stdout, index=False, float_format="%.6f", na_rep="")
    _print_checks(checks)
    print("\n✓ Topology comparison complete!")
    return 0


def cmd_rank(args) -> int:
    table = MetricTable.from_csv(args.table)
    report = sbfl_report(table, FuzzySystem(term_count=args.terms))
    if args.csv:
        rows = [("rv", name, v) for name, v in zip(table.column_names, report.rv)]
        rows += [("weight", name, w) for name, w in zip(table.column_names, report.weights)]
        rows += [("rank", f"{node}:{name}", report.ranks[i, j])
                 for i, node in enumerate(table.row_names) for j, name in enumerate(table.column_names)]
        rows += [("utility", node, u) for node, u in zip(table.row_names, report.utilities)]
        rows += [("order", table.row_names[i], pos) for pos, (i, _) in enumerate(report.order, start=1)]
        pd.DataFrame(rows, columns=["kind", "name", "value"]).to_csv(sys.stdout, index=False)
        return 0

    print(f"{'metric':<16}{'orientation':>12}{'rv':>14}{'weight':>10}")
    for name, o, rv, w in zip(table.column_names, table.orientations, report.rv, report.weights):
        print(f"{name:<16}{o.value:>12}{rv:>14.6g}{w:>10.4f}")
    print()
    print(f"{'node':<16}" + "".join(f"{name[:9]:>10}" for name in table.column_names) + f"{'utility':>10}")
    for i, node in enumerate(table.row_names):
        ranks = "".join(f"{r:>10g}" for r in report.ranks[i])
        print(f"{node:<16}{ranks}{report.utilities[i]:>10.4f}")
    print()
    print("priority: " + " → ".join(table.row_names[i] for i, _ in report.order))
    return 0


def _scenario(args) -> LifetimeScenario:
    if args.scenario:
        try:
            record = yaml.safe_load(Path(args.scenario).read_text())
            return LifetimeScenario.from_mapping(record)
        except FileNotFoundError:
            raise
        except (yaml.YAMLError, KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ConfigError(f"{args.scenario}: bad lifetime scenario: {exc}") from None
    missing = [flag for flag in ("source", "relay", "dest", "range") if getattr(args, flag) is None]
    if missing:
        raise ConfigError("lifetime needs --scenario or all of " + ", ".join(f"--{m}" for m in missing))
    try:
        return LifetimeScenario(KinematicState(*args.source), KinematicState(*args.relay),
                                KinematicState(*args.dest), args.range)
    except ValueError as exc:
        raise ConfigError(f"bad kinematic state: {exc}") from None


def cmd_lifetime(args) -> int:
    sc = _scenario(args)
    if sc.R <= 0:
        raise ConfigError(f"range must be positive, got {sc.R}")
    analytic = predict_lifetime(sc.source, sc.relay, sc.dest, sc.R, args.horizon)
    oracle = survival_exit_oracle(sc.source, sc.relay, sc.dest, sc.R, args.dt, args.horizon)
    if args.csv:
        print("case,range_exit_s,dest_exit_s,analytic_s,oracle_s")
        print(f"{analytic.case.value},{analytic.range_exit},{analytic.destination_exit},{analytic.seconds},{oracle}")
        return 0
    print(f"case:     {analytic.case.value}")
    print(f"analytic: {_seconds(analytic.seconds)}")
    print(f"oracle:   {_seconds(oracle)} (dt {args.dt:g} s)")
    return 0


def cmd_rules(args) -> int:
    rows = []
    for m in range(1, args.metrics + 1):
        try:
            classic = rule_count(args.terms, m, "classic")
        except RuleCountOverflow:
            classic = None
        rows.append({"metrics": m, "classic": classic, "sbfl": rule_count(args.sbfl_terms, m, "sbfl")})
    frame = pd.DataFrame(rows, columns=["metrics", "classic", "sbfl"])
    if args.csv:
        frame.to_csv(sys.stdout, index=False)
    else:
        print(f"{'metrics':>8}{'classic':>24}{'sbfl':>8}")
        for row in rows:
            classic = "overflow" if row["classic"] is None else row["classic"]
            print(f"{row['metrics']:>8}{classic:>24}{row['sbfl']:>8}")
    if args.svg:
        out = Path(args.out or "out")
        out.mkdir(parents=True, exist_ok=True)
        xs = [r["metrics"] for r in rows]
        path = plots.write_chart(
            out / "rules.svg",
            [plots.Series(f"classic ({args.terms} terms)", xs,
                          [math.nan if r["classic"] is None else float(r["classic"]) for r in rows]),
             plots.Series(f"SBFL ({args.sbfl_terms} terms)", xs, [float(r["sbfl"]) for r in rows])],
            "Fuzzy rule count", "number of metrics", "rules", log_y=True)
        print(f"Built {path}")
    return 0


def cmd_report(args) -> int:
    out = Path(args.out or "out")
    public = Path(args.public)
    print(f"Building report from {out}...")
    pages = site.build_report(out, public)
    for page in pages:
        print(f"Built {page.name}")
    print("\n✓ Build complete!")
    print(f"Output: {public}")
    return 0


# ── parser ───────────────────────────────────────────────────────────

def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration file")
    common.add_argument("--seed", type=int, help="seed base (replica k uses seed + k)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int, help="parallel worker processes for sweeps")
    common.add_argument("--csv", action="store_true", help="machine-readable CSV on stdout")
    common.add_argument("--svg", action=argparse.BooleanOptionalAction, default=None,
                        help="emit SVG charts")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(
        prog="cbrt",
        description="CBRT opportunistic routing experiments",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=EPILOG,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, func, help_text in (("run", cmd_run, "one seeded simulation run"),
                                  ("compare", cmd_compare, "CBRT vs ExOR over the node-count sweep"),
                                  ("topo", cmd_topo, "OTC vs k-connection topology control")):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("config_file", nargs="?", help="configuration file (same as --config)")
        if name == "run":
            p.add_argument("--snapshot", action="store_true", help="also write the final node snapshot")
        p.set_defaults(func=func)

    p = sub.add_parser("rank", parents=[common], help="SBFL ranking of a metric-table CSV")
    p.add_argument("table", help="metric-table CSV")
    p.add_argument("--terms", type=int, default=7, help="fuzzy terms (default 7)")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("lifetime", parents=[common], help="single-shot residual link lifetime")
    for flag in ("source", "relay", "dest"):
        p.add_argument(f"--{flag}", nargs=4, type=float, metavar=("X", "Y", "SPEED", "HEADING"),
                       help="position (m), speed (m/s), heading (rad)")
    p.add_argument("--range", type=float, help="sender range R (m)")
    p.add_argument("--scenario", help="YAML record with source, relay, dest and range")
    p.add_argument("--dt", type=float, default=0.001, help="oracle time step (s)")
    p.add_argument("--horizon", type=float, default=1000.0, help="longest finite lifetime reported (s)")
    p.set_defaults(func=cmd_lifetime)

    p = sub.add_parser("rules", parents=[common], help="classic vs SBFL rule counts")
    p.add_argument("--terms", type=int, default=3, help="terms per input of the classic system")
    p.add_argument("--sbfl-terms", type=int, default=7, help="terms of the SBFL system")
    p.add_argument("--metrics", type=int, default=10, help="largest number of metrics")
    p.set_defaults(func=cmd_rules)

    p = sub.add_parser("report", parents=[common], help="static HTML site from an output directory")
    p.add_argument("--public", default="public", help="site directory (default public)")
    p.set_defaults(func=cmd_report)
    return parser


def _positive(args, parser):
    for name in ("terms", "sbfl_terms", "metrics", "workers"):
        value = getattr(args, name, None)
        if value is not None and value < 1:
            parser.error(f"--{name.replace('_', '-')} must be a positive integer")
    for name in ("dt", "horizon"):
        value = getattr(args, name, None)
        if value is not None and not value > 0:
            parser.error(f"--{name} must be positive")


def configure_logging(verbosity: int):
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _positive(args, parser)
    except SystemExit as exc:
        return int(exc.code or 0)
    configure_logging(args.verbose)
    try:
        return args.func(args)
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CbrtError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        logger.exception("%s failed", args.command)
        return 1


if __name__ == "__main__":
    sys.exit(main())
