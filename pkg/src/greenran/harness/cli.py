"""``greenran`` command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 runtime error.  Failures
print a single JSON error record on stderr and write no artifacts.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from .. import __version__
from ..errors import ConfigError, GreenRanError, ParseError
from . import experiments as ex
from .config import load_config, resolved, tomllib, with_overrides

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # usage errors count as config errors
        self.print_usage(sys.stderr)
        _emit_error(EXIT_CONFIG, "UsageError", message)
        raise SystemExit(EXIT_CONFIG)


def _emit_error(code: int, kind: str, message: str, **extra: Any) -> None:
    record = {"status": "error", "exit_code": code, "error": kind, "message": message, **extra}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="experiment TOML file")
    p.add_argument("--seed", type=int, action="append", dest="seeds",
                   help="seed to run (repeatable); overrides the config's seed list")
    p.add_argument("--out", help="output directory; overrides output_dir in the config")
    p.add_argument("--quiet", action="store_true", help="suppress the summary on stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="greenran", description="Beam tracking and carrier switch-off experiments.")
    parser.add_argument("--version", action="version", version=f"greenran {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, help_text in (("beam", "run a beam-tracking experiment"),
                            ("carrier", "run a carrier switch-off experiment"),
                            ("dump", "write ground-truth RSRP and oracle beams for a beam scenario"),
                            ("validate", "check a config and print it fully resolved")):
        _common(sub.add_parser(name, help=help_text))

    sw = sub.add_parser("sweep", help="run an experiment once per value of one parameter")
    _common(sw)
    sw.add_argument("--axis", required=True, help="dotted parameter name, e.g. tracker.budget_per_slot")
    sw.add_argument("--values", required=True, help="comma-separated values")

    ws = sub.add_parser("warm-start", help="fold a historical QoS trace into the threshold prior")
    _common(ws)
    ws.add_argument("--trace", required=True, help="CSV with columns load,rho_used,satisfied")
    return parser


def parse_value(text: str) -> Any:
    """Interpret one sweep value the way TOML would, falling back to a bare string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def _out_dir(args, cfg) -> Path:
    out = args.out or cfg.output_dir
    if out is None:
        raise ConfigError("no output directory: pass --out or set output_dir")
    return Path(out)


def _print(args, payload: Any) -> None:
    if not args.quiet:
        print(json.dumps(payload, indent=2, sort_keys=True))


def _dispatch(args) -> int:
    cfg = with_overrides(load_config(args.config), seeds=args.seeds)
    cmd = args.command
    if cmd == "validate":
        _print(args, resolved(cfg))
        return EXIT_OK
    if cmd in ("beam", "carrier", "dump") and cfg.kind != ("carrier" if cmd == "carrier" else "beam"):
        raise ConfigError(f"'{cmd}' needs a {'carrier' if cmd == 'carrier' else 'beam'} config, got kind={cfg.kind!r}")
    if cmd == "warm-start" and cfg.kind != "carrier":
        raise ConfigError("'warm-start' needs a carrier config")
    out = _out_dir(args, cfg)

    if cmd == "beam":
        _print(args, ex.run_beam(cfg, out))
    elif cmd == "carrier":
        _print(args, ex.run_carrier(cfg, out))
    elif cmd == "dump":
        paths = ex.dump_groundtruth(cfg, out)
        _print(args, {"files": [p.name for p in paths]})
    elif cmd == "sweep":
        values = [parse_value(v.strip()) for v in args.values.split(",") if v.strip()]
        if not values:
            raise ConfigError("--values is empty")
        rows = ex.sweep(cfg, args.axis, values, out)
        _print(args, {"rows": len(rows), "axis": args.axis, "values": values})
    elif cmd == "warm-start":
        belief = ex.warm_start_artifact(cfg, args.trace, out)
        _print(args, {"files": ["belief.csv"], "cells": int(belief.density.size)})
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        _emit_error(EXIT_CONFIG, type(exc).__name__, str(exc))
        return EXIT_CONFIG
    except ParseError as exc:
        _emit_error(EXIT_RUNTIME, "ParseError", str(exc), row=exc.row)
        return EXIT_RUNTIME
    except (GreenRanError, OSError, ValueError) as exc:
        _emit_error(EXIT_RUNTIME, type(exc).__name__, str(exc))
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
