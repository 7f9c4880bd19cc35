"""Command-line interface.

    matspec simulate|fit-np|fit-var|compare|diagnose --config FILE
            [--seed N] [--out DIR] [--desk] [--workers N]

The seed is taken from ``--seed``, then the config's ``seed``, then the
MATSPEC_SEED environment variable, then 0.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__, pipeline
from .io import CsvParseError

log = logging.getLogger("matspec")

COMMANDS = ("simulate", "fit-np", "fit-var", "compare", "diagnose")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="matspec", description="Bayesian spectral density matrix estimation.")
    p.add_argument("--version", action="version", version=f"matspec {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="JSON run configuration")
        s.add_argument("--seed", type=int, default=None, help="base seed (replicate i uses seed + i)")
        s.add_argument("--out", default=None, help="output directory (default: config 'out' or '.')")
        s.add_argument("--desk", action="store_true", help="short chains (8000 / 3000 / 5)")
        s.add_argument("--workers", type=int, default=1, help="parallel replicate workers")
        s.add_argument("-v", "--verbose", action="store_true")
        if name == "simulate":
            s.add_argument("--header", action="store_true", help="write component names as the first row")
        if name in ("fit-np", "fit-var", "diagnose"):
            s.add_argument("--input", nargs="+", default=None, help="series CSV file(s), overriding data.inputs")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.workers < 1:
        print("matspec: --workers must be at least 1", file=sys.stderr)
        return 2
    try:
        cfg = pipeline.load_config(args.config, desk=args.desk)
        if getattr(args, "header", False):
            cfg["simulate"]["header"] = True
        seed = pipeline.resolve_seed(args.seed, cfg)
        out = Path(args.out or cfg.get("out") or ".")
        if args.command == "simulate":
            paths = pipeline.simulate(cfg, seed, out)
            log.info("wrote %d series", len(paths))
        elif args.command in ("fit-np", "fit-var"):
            method = "NP" if args.command == "fit-np" else "VAR"
            files = pipeline.fit_files(method, cfg, seed, out, inputs=args.input, workers=args.workers)
            log.info("fitted %d series", len(files))
        elif args.command == "compare":
            errors = pipeline.compare(cfg, seed, out, workers=args.workers)
            for method, errs in errors.items():
                l1 = sum(e[0] for e in errs) / len(errs)
                print(f"{method}: mean L1 {l1:.4f} over {len(errs)} replicates")
        else:
            inp = args.input[0] if args.input else None
            res = pipeline.diagnose(cfg, out, input_path=inp)
            print(f"lambda_n {res['lambda_n']:.6g}  whittle residual {res['whittle_form_residual']:.3g}")
    except (pipeline.ConfigError, CsvParseError, FileNotFoundError, PermissionError, ValueError) as exc:
        print(f"matspec {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
