"""Command-line driver.

    edham run --config cfg.json [--output report.json] [--format json|csv] [--seed S] [--workers W]

Subcommands: solve, reduce, verify, linearize, run, oracle.  Exit codes:
0 success, 2 configuration error, 3 numerical failure (stage named on stderr).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import csvio, pipeline
from .config import load_config
from .errors import ConfigError, NumericalError

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="edham", description="Energy-dependent Hamiltonian toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="JSON run configuration")
        p.add_argument("--output", help="output file (directory for linearize --format csv)")
        p.add_argument("--format", choices=("json", "csv"), help="overrides output.format")
        p.add_argument("--seed", type=int, help="seed for random matrices (overrides config)")
        p.add_argument("--workers", type=int, default=1, help="threads for grid scans; output is unaffected")

    for name, text in (
        ("solve", "self-consistent bound states"),
        ("reduce", "Feshbach effective Hamiltonian samples and recoverable spectrum"),
        ("verify", "solve, then overlap matrix, duals and completeness checks"),
        ("linearize", "solve, verify, then K, L and metric operators"),
        ("run", "the full pipeline with oracle cross-checks"),
    ):
        common(sub.add_parser(name, help=text))

    p = sub.add_parser("oracle", help="QES constructions and Gamma-moment tables")
    p.add_argument("--output")
    p.add_argument("--qes-N", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--b", default="1", help="sextic parameter (rational string allowed)")
    p.add_argument("--moments-nmax", type=int, default=10)
    p.add_argument("--moments-c", type=float, nargs="+", default=[0.0, 0.5, 1.0])
    return ap


def _json(report: dict) -> str:
    stamped = {"timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"), **report}
    return json.dumps(stamped, indent=2) + "\n"


def _emit(text: str, output) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _states_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "j", "energy", "residual_right", "residual_left", "fixed_point_residual", "match_quality"])
    for s in report.get("bound_states", []):
        w.writerow([*s["alpha"], *(repr(s[k]) for k in list(s)[1:])])
    return buf.getvalue()


def _write_linearize_csv(ctx: pipeline.Context, report: dict, output) -> None:
    if not output:
        raise ConfigError("linearize --format csv needs --output <directory>")
    out = Path(output)
    out.mkdir(parents=True, exist_ok=True)
    for name, M in ctx.pair.matrices().items():
        csvio.write_matrix(out / f"{name}.csv", M)
    (out / "residuals.json").write_text(_json({"residuals": report["linearize"]["residuals"]}))


def _run(args) -> int:
    if args.command == "oracle":
        tables = pipeline.oracle_tables(tuple(args.qes_N), args.b, args.moments_nmax, tuple(args.moments_c))
        _emit(_json(tables), args.output)
        return 0

    cfg, base = load_config(args.config)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = cfg.model_copy(update={"seed": args.seed})
    if args.workers < 1:
        raise ConfigError("--workers must be >= 1")
    fmt = args.format or cfg.output.format
    output = args.output or cfg.output.path
    if fmt == "csv" and args.command in ("reduce",):
        raise ConfigError(f"{args.command} writes JSON only")

    with pipeline.stage("model"):
        report, ctx = pipeline.execute(args.command, cfg, base, args.workers)

    if fmt == "json":
        _emit(_json(report), output)
    elif args.command == "linearize":
        _write_linearize_csv(ctx, report, output)
    else:
        _emit(_states_csv(report), output)
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _run(args)
    except pipeline.StageError as exc:
        err = {"error": "numerical", "stage": exc.stage, "reason": exc.reason, "message": str(exc.cause)}
        sys.stderr.write(json.dumps(err) + "\n")
        return EXIT_NUMERICAL
    except NumericalError as exc:
        err = {"error": "numerical", "stage": "unknown", "reason": pipeline.reason_of(exc), "message": str(exc)}
        sys.stderr.write(json.dumps(err) + "\n")
        return EXIT_NUMERICAL
    except (ConfigError, OSError) as exc:
        sys.stderr.write(json.dumps({"error": "config", "message": str(exc)}) + "\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
