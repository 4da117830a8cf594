"""Command-line entry point: ``cachenet {generate,run,sweep,trace,route}``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from . import fixtures
from .avalanche import avalanche_run, replay_violations
from .harness import ExperimentConfig, parse_fraction, records_to_csv, run_experiment, summarize, summary_to_csv
from .model import assign_caches, binom, round_up_file_size
from .scenario import (
    Layout,
    build_collision_graph,
    build_topological_graph,
    covered_users,
    generate_layout,
)
from .topo import (
    direct_programs,
    solve_centralized_routing,
    solve_multiround_routing,
    solve_new_decentralized_routing,
)


def _emit(text: str, path: str | None) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _layout_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda-h", type=float, default=7.0, help="helpers per km^2")
    p.add_argument("--lambda-u", type=float, default=140.0, help="users per km^2")
    p.add_argument("--radius", type=float, default=1000.0, help="region radius in meters")
    p.add_argument("--a-sig", type=float, default=220.0)
    p.add_argument("--a-cell", type=float, default=200.0)
    p.add_argument("--a-interf", type=float, default=240.0)
    p.add_argument("--c-front", type=float, default=1.0)
    p.add_argument("--c-access", type=float, default=1.0)


def _scheme_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--L", type=int, default=5, help="number of cache configurations")
    p.add_argument("--mu", default="1/5", help="cache fraction M/N, e.g. 0.2 or 1/5")
    p.add_argument("--F", type=int, default=None,
                   help="file size in bits; rounded up to a multiple of the subpacketization "
                        "(default: times are reported for F = 1)")


def _layout_from(args) -> Layout:
    if getattr(args, "example", False):
        return fixtures.example_layout(args.c_front, args.c_access)
    if getattr(args, "layout", None):
        return Layout.load(args.layout)
    return generate_layout(args.seed, args.lambda_h, args.lambda_u, args.radius, args.a_sig,
                           args.a_cell, args.a_interf, args.c_front, args.c_access)


def _scheme_from(args):
    cfg = ExperimentConfig(L=args.L, mu=parse_fraction(args.mu), sweep_param="L", sweep_values=(args.L,))
    return cfg.cache_scheme()


def _file_bits(args, subpack: int) -> float:
    if args.F is None:
        return 1.0
    F = round_up_file_size(args.F, subpack)
    if F != args.F:
        print(f"note: F rounded up from {args.F} to {F} bits (multiple of {subpack})", file=sys.stderr)
    return float(F)


def cmd_generate(args) -> int:
    _emit(_layout_from(args).to_json(), args.output)
    return 0


def cmd_run(args) -> int:
    cfg = ExperimentConfig.from_toml(args.config)
    if args.workers:
        cfg = replace(cfg, workers=args.workers)
    return _run_and_write(cfg, args)


def cmd_sweep(args) -> int:
    cfg = ExperimentConfig.from_toml(args.config)
    values = tuple(v.strip() for v in args.values.split(","))
    if args.param == "L":
        values = tuple(int(v) for v in values)
    elif args.param == "c_ratio":
        values = tuple(float(v) for v in values)
    cfg = replace(cfg, sweep_param=args.param, sweep_values=values)
    if args.workers:
        cfg = replace(cfg, workers=args.workers)
    return _run_and_write(cfg, args)


def _run_and_write(cfg: ExperimentConfig, args) -> int:
    records = run_experiment(cfg)
    _emit(records_to_csv(records), args.output)
    if args.summary:
        _emit(summary_to_csv(summarize(records)), args.summary)
    return 0


def cmd_trace(args) -> int:
    layout = _layout_from(args)
    if args.example:
        assignment, scheme = fixtures.example_assignment(), fixtures.example_scheme()
    else:
        layout = layout.with_users(covered_users(layout, layout.a_cell))
        scheme = _scheme_from(args)
        assignment = assign_caches(layout.K, scheme.L, args.seed)
    cg = build_collision_graph(layout)
    F = _file_bits(args, scheme.subpacketization)
    res = avalanche_run(cg, assignment, scheme, layout.c_front, layout.c_access, F)
    _emit(res.trace.to_jsonl(), args.output)
    bad = replay_violations(res.trace, cg, scheme)
    print(f"D = {res.slots} slots, T = {res.seconds!r} s, replay violations: {len(bad)}", file=sys.stderr)
    for line in bad:
        print("  " + line, file=sys.stderr)
    return 1 if bad else 0


def cmd_route(args) -> int:
    layout = _layout_from(args)
    graph = build_topological_graph(layout)
    if args.example:
        assignment = fixtures.example_assignment()
    if args.scheme == "central":
        t = len(graph.users) * parse_fraction(args.mu)
        if t.denominator != 1:
            raise ValueError(f"K*mu = {t} is not an integer")
        t = int(t)
        sol = solve_centralized_routing(graph, t, _file_bits(args, binom(len(graph.users), t)), args.method)
        progs = direct_programs("central", graph, t=t) if args.dump_lp else []
    else:
        scheme = _scheme_from(args)
        if not args.example:
            assignment = assign_caches(layout.K, scheme.L, args.seed)
        solve = solve_multiround_routing if args.scheme == "multiround" else solve_new_decentralized_routing
        sol = solve(graph, assignment, scheme, _file_bits(args, scheme.subpacketization), args.method)
        progs = direct_programs(args.scheme, graph, assignment=assignment, scheme=scheme) if args.dump_lp else []
    if args.dump_lp:
        _emit("".join(p.to_lp_format() for p in progs), args.dump_lp)
    _emit(sol.to_json() + "\n", args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cachenet", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample a layout and write it as JSON")
    _layout_args(p)
    p.add_argument("--example", action="store_true", help="the small hand-placed 4-helper layout")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_generate)

    for name, helptext in (("run", "run a config file"), ("sweep", "run a config over a list of values")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", help="TOML experiment config")
        if name == "sweep":
            p.add_argument("--param", required=True, choices=("mu", "L", "c_ratio"))
            p.add_argument("--values", required=True, help="comma-separated values")
        p.add_argument("-o", "--output", help="results CSV (default stdout)")
        p.add_argument("--summary", help="also write per-(scheme, value) mean/stderr CSV here")
        p.add_argument("--workers", type=int, default=0)
        p.set_defaults(func=cmd_run if name == "run" else cmd_sweep)

    p = sub.add_parser("trace", help="avalanche schedule of one collision instance as JSON lines")
    _layout_args(p)
    _scheme_args(p)
    p.add_argument("--layout", help="layout JSON from `generate`")
    p.add_argument("--example", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("route", help="solve one topological routing problem and print its JSON")
    _layout_args(p)
    _scheme_args(p)
    p.add_argument("--layout")
    p.add_argument("--example", action="store_true")
    p.add_argument("--scheme", choices=("central", "multiround", "new-lp"), default="new-lp")
    p.add_argument("--method", choices=("bisection", "direct"), default="direct")
    p.add_argument("--dump-lp", metavar="PATH", help="write the LP(s) in CPLEX LP format")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_route)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"cachenet: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
