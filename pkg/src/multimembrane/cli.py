"""Command-line entry point: ``multimembrane <run> --config FILE``."""
from __future__ import annotations

import argparse
import os
import re
import sys
from pathlib import Path

import yaml

from .core import SolverError
from .scenarios import RUNS, ConfigError, ToleranceBreach, parse_scenario

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_TOLERANCE = 0, 2, 3, 4


class _Loader(yaml.SafeLoader):
    """Safe loader that reads exponent floats such as ``1e6`` and rejects duplicate keys."""

    def construct_mapping(self, node, deep=False):
        seen = set()
        for key_node, _ in node.value:
            key = self.construct_object(key_node, deep=deep)
            if key in seen:
                raise yaml.constructor.ConstructorError(
                    None, None, f"duplicate key {key!r}", key_node.start_mark)
            seen.add(key)
        return super().construct_mapping(node, deep=deep)


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
                   |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
                   |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
                   |[-+]?\.(?:inf|Inf|INF)
                   |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."))


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return yaml.load(fh, Loader=_Loader)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="multimembrane",
        description="Couplings, decay rates and cooperativity of membrane arrays in a 1D cavity.")
    parser.add_argument("run", choices=sorted(RUNS), help="what to compute")
    parser.add_argument("--config", required=True, type=Path, help="YAML scenario file")
    parser.add_argument("--out", type=Path, help="directory for result files (default: stdout)")
    parser.add_argument("--format", choices=("csv", "json", "both"), default="both")
    parser.add_argument("--seed", type=int, default=None,
                        help="seed recorded in the metadata of randomized scenarios")
    parser.add_argument("--quiet", action="store_true", help="suppress stdout output")
    return parser


def _emit(table, args):
    outputs = {"csv": table.to_csv, "json": table.to_json}
    kinds = ("csv", "json") if args.format == "both" else (args.format,)
    if args.out is None:
        if not args.quiet:
            try:
                for kind in kinds:
                    sys.stdout.write(outputs[kind]())
                sys.stdout.flush()
            except BrokenPipeError:
                # reader went away (e.g. piped into head); silence the flush at exit
                os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return
    args.out.mkdir(parents=True, exist_ok=True)
    for kind in kinds:
        path = args.out / f"{table.name}.{kind}"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(outputs[kind]())
        if not args.quiet:
            print(f"wrote {path}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        raw = load_config(args.config)
        scenario = parse_scenario(raw if raw is not None else {})
        table = RUNS[args.run](scenario)
    except (OSError, yaml.YAMLError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except ToleranceBreach as exc:
        exc.table.metadata["seed"] = args.seed
        _emit(exc.table, args)
        print(f"tolerance breach: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    table.metadata["seed"] = args.seed
    _emit(table, args)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
