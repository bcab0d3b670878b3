"""Command-line entry point: `qtwist <subcommand> [--config FILE] [--set key=value] ...`.

Exit status: 0 all checks passed, 1 a check failed, 2 configuration error,
3 resource error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time

from .arithmetic import odd_squarefree_mask
from .config import parse_config
from .errors import ConfigurationError, DomainError, NumericalError, QTwistError, RangeError, ResourceError
from .suites import Context, SUITES, run_suite

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RESOURCE = 0, 1, 2, 3

COMMANDS = ["gen-eigenform", "verify-afe", "verify-charsum", "verify-first-moment", "mollifier-check",
            "sweep", "holder-check", "lower-bound", "mertens", "s1s2", "report"]

# flag name -> config key
_FLAGS = {"weight": "weight", "X": "X", "k": "k", "threads": "threads", "cache_dir": "cache_dir",
          "out_dir": "out_dir", "csv": "csv", "dump_family": "dump_family", "n_max": "n_max",
          "mode": "mode", "ell1": "ell1", "R": "R", "Y": "Y", "alpha": "alpha"}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qtwist", description="Moments of quadratic twists of modular L-functions")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="key = value file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
    p.add_argument("--weight", type=str)
    p.add_argument("--X", type=str)
    p.add_argument("--k", type=str)
    p.add_argument("--threads", type=str)
    p.add_argument("--cache-dir", dest="cache_dir")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--csv")
    p.add_argument("--dump-family", dest="dump_family", help="write the family members d to this file")
    p.add_argument("--n-max", dest="n_max", type=str)
    p.add_argument("--mode", choices=["paper", "practical"])
    p.add_argument("--ell1", type=str)
    p.add_argument("--R", type=str)
    p.add_argument("--Y", type=str)
    p.add_argument("--alpha", type=str)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _overrides(args) -> dict:
    out = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    for flag, key in _FLAGS.items():
        v = getattr(args, flag)
        if v is not None:
            out[key] = v
    return out


def _gen_eigenform(cfg) -> int:
    ctx = Context(cfg)
    n_max = cfg.n_max or 10**5
    t0 = time.perf_counter()
    table = ctx.table(cfg.weight, n_max)
    print(f"weight {table.weight} n_max {table.n_max} digest {table.hex_digest} "
          f"({time.perf_counter() - t0:.2f} s)")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config, _overrides(args))
        if cfg.dump_family:
            mask = odd_squarefree_mask(int(cfg.X))
            with open(cfg.dump_family, "w") as fh:
                fh.writelines(f"{d}\n" for d in mask.nonzero()[0])
        if args.command == "gen-eigenform":
            return _gen_eigenform(cfg)
        names = list(cfg.suites) if args.command == "report" else [args.command]
        unknown = [n for n in names if n not in SUITES]
        if unknown:
            raise ConfigurationError(f"unknown suites {unknown}")
        status, text, _ = run_suite(cfg, names)
        print(text, end="")
        return status
    except (ResourceError, MemoryError, OSError) as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ConfigurationError, DomainError, RangeError) as exc:
        print(f"configuration error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, QTwistError, ArithmeticError) as exc:
        print(f"numerical failure [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
