"""Command-line entry point.

Exit codes: 0 success, 1 configuration or validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .config import load_config
from .engines import preset_names
from .errors import AmmError, ConfigError, ConfigurationError, InvalidMatrixError, TopologyError
from .graph_topology import random_connected_graph, write_edge_list

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
_CONFIG_ERRORS = (ConfigError, ConfigurationError, TopologyError, InvalidMatrixError)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ammkit", description="Distributed approximate method of multipliers toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment and write CSV traces plus a summary")
    r.add_argument("config")
    r.add_argument("--output", help="output directory (overrides the config)")

    v = sub.add_parser("validate", help="run every validator without iterating")
    v.add_argument("config")

    c = sub.add_parser("certificate", help="print bound constants and the linear-rate certificate")
    c.add_argument("config")

    pr = sub.add_parser("presets", help="preset registry")
    pr_sub = pr.add_subparsers(dest="action", required=True)
    pr_sub.add_parser("list", help="list preset names")

    g = sub.add_parser("graph", help="graph utilities")
    g_sub = g.add_subparsers(dest="action", required=True)
    gen = g_sub.add_parser("gen", help="random connected graph as a 1-based edge list")
    gen.add_argument("--nodes", type=int, required=True)
    gen.add_argument("--edges", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--output", "-o", help="file to write (stdout if omitted)")
    return p


def _cmd_run(args) -> int:
    from .experiments import run_experiment, summary_dict, summary_text

    cfg = load_config(args.config)
    result = run_experiment(cfg, output=args.output)
    print(summary_text(summary_dict(cfg, result)), end="")
    print(f"wrote {len(result.outcomes)} trace(s) to {result.output}")
    return EXIT_OK if result.ok else EXIT_RUNTIME


def _cmd_validate(args) -> int:
    from .experiments import validate_experiment

    cfg = load_config(args.config)
    reports = validate_experiment(cfg)
    ok = True
    for label, rep in reports:
        rep.subject = label
        print(rep)
        ok = ok and rep.ok
    print("all checks passed" if ok else "validation failed")
    return EXIT_OK if ok else EXIT_CONFIG


def _cmd_certificate(args) -> int:
    from .experiments import certificate_report

    print(certificate_report(load_config(args.config)), end="")
    return EXIT_OK


def _cmd_graph_gen(args) -> int:
    topo = random_connected_graph(args.nodes, args.edges, seed=args.seed)
    if args.output:
        write_edge_list(topo, args.output)
    else:
        for i, j in topo.edges:
            print(f"{i + 1} {j + 1}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "certificate":
            return _cmd_certificate(args)
        if args.command == "presets":
            for name in preset_names():
                print(name)
            return EXIT_OK
        return _cmd_graph_gen(args)
    except _CONFIG_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except AmmError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
