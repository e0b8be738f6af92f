"""Command-line entry point: ``ttcomp <experiment> --out PATH [--config PATH]``.

Exit status is 0 when every embedded check passes and 1 otherwise; the JSON
verdict is printed on stdout either way.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .experiments import KINDS, ExperimentConfig, jsonable, run_experiment

log = logging.getLogger("ttcomp")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ttcomp", description="Type-threshold computation experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind.replace("_", "-"), help=f"run the {kind.replace('_', ' ')} experiment")
        p.add_argument("--config", type=Path, help="JSON experiment config (defaults are used if omitted)")
        p.add_argument("--out", type=Path, required=True, help="output file (CSV or JSON)")
        p.add_argument("--seed", type=int, help="override the first seed in the config")
        p.add_argument("--format", choices=("csv", "json"), help="output format (default: from --out suffix, else csv)")
        p.add_argument("--no-plot", action="store_true", help="skip PNG rendering for figure experiments")
    return parser


def load_config(kind: str, path: Path | None, seed: int | None) -> ExperimentConfig:
    data = json.loads(path.read_text()) if path is not None else {}
    given = data.get("experiment")
    if given is not None and given.replace("-", "_") != kind:
        raise ValueError(f"config is for experiment {given!r}, not {kind!r}")
    data["experiment"] = kind
    cfg = ExperimentConfig.from_dict(data)
    if seed is not None:
        cfg.seeds = [seed] + cfg.seeds[1:]
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    kind = args.command.replace("-", "_")
    try:
        cfg = load_config(kind, args.config, args.seed)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        print(json.dumps({"experiment": kind, "passed": False, "error": str(exc)}), file=sys.stdout)
        return 2
    fmt = args.format or ("json" if args.out.suffix == ".json" else "csv")
    log.info("running %s", kind)
    result = run_experiment(cfg)
    written = result.write(args.out, fmt)
    if not args.no_plot:
        from .plotting import render

        png = render(result, args.out)
        if png is not None:
            written.append(png)
    for p in written:
        log.info("wrote %s", p)
    print(json.dumps(jsonable(result.verdict()), indent=2))
    return 0 if result.passed else 1


if __name__ == "__main__":
    sys.exit(main())
