"""Command-line entry point: ``mec-ppo run|verify|compare|gen``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import experiment as exp
from .baselines import InstanceTooLarge
from .scenario import ScenarioError, generate_scenario, write_scenario
from .verify import SUITES, run_suite

EXIT_OK, EXIT_USAGE, EXIT_GUARD, EXIT_VERIFY = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mec-ppo", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run an experiment config or preset")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path)
    src.add_argument("--preset", choices=exp.PRESETS)
    run.add_argument("--out", type=Path, help="output directory (default: config 'output' or .)")
    run.add_argument("--seeds", type=int, help="override repetitions")

    ver = sub.add_parser("verify", help="run an oracle property suite")
    ver.add_argument("suite", choices=sorted(SUITES))
    ver.add_argument("--seeds", type=int)

    cmp_ = sub.add_parser("compare", help="mean makespan table across configs")
    cmp_.add_argument("--configs", required=True, help="comma-separated config files")
    cmp_.add_argument("--out", type=Path, help="write the table here instead of stdout")

    gen = sub.add_parser("gen", help="generate a random scenario file")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--servers", type=int, required=True)
    gen.add_argument("--ues", type=int, required=True)
    gen.add_argument("--out", type=Path, required=True)
    return p


def _run(args) -> int:
    cfg = exp.preset(args.preset) if args.preset else exp.load_config(args.config)
    if args.seeds is not None:
        cfg = replace(cfg, repetitions=args.seeds)
    out = args.out or Path(cfg.output or ".")
    cells = exp.run_experiment(cfg)
    csv_path, json_path = exp.write_results(cfg, cells, out)
    print(f"wrote {csv_path} and {json_path} ({len(cells)} runs)")
    return EXIT_OK


def _verify(args) -> int:
    res = run_suite(args.suite, args.seeds)
    print(res.summary())
    for f in res.failures[:20]:
        print(f"  {f}")
    return EXIT_OK if res.passed else EXIT_VERIFY


def _compare(args) -> int:
    paths = [Path(s) for s in args.configs.split(",") if s]
    configs = [exp.load_config(p) for p in paths]
    header, table = exp.comparison_table(configs, [exp.run_experiment(c) for c in configs])
    text = exp.table_to_csv(header, table)
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _gen(args) -> int:
    sc = generate_scenario(args.seed, args.servers, args.ues)
    write_scenario(sc, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run": _run, "verify": _verify, "compare": _compare, "gen": _gen}
    try:
        return handlers[args.command](args)
    except InstanceTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (exp.ConfigError, ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
