"""Command-line entry point.

``qresource run --experiment NAME [options]`` runs an experiment and writes
CSV or JSON; ``qresource validate FILE`` checks a state or channel file.
Exit codes: 0 success, 1 validation error, 2 internal error.
"""

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile

from .experiments import EXPERIMENTS, ExperimentConfig, check_config, run
from .io import validate_file
from .qcore import UnsupportedError, ValidationError

log = logging.getLogger("qresource")

EXIT_OK, EXIT_VALIDATION, EXIT_INTERNAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _numbers(text, cast=float):
    return [cast(x) for x in text.split(",") if x.strip()]


def build_parser():
    p = _Parser(prog="qresource", description="Quantum resource experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a named experiment")
    r.add_argument("--experiment", required=True, help="one of: " + ", ".join(EXPERIMENTS))
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--restarts", type=int, default=None, help="optimizer restarts (experiment default if omitted)")
    r.add_argument("--tol-supp", type=float, default=None, help="support tolerance for relative entropies")
    r.add_argument("--out", default=None, help="output path (stdout if omitted)")
    r.add_argument("--format", default="csv", help="csv or json")
    r.add_argument("--state", default=None, help="w, dicke, ghz-dualrail or a state file")
    r.add_argument("--channel", default=None, help="channel-spec file")
    r.add_argument("--parties", type=lambda s: _numbers(s, int), default=None, help="N, or a comma list")
    r.add_argument("--excitations", type=int, default=None)
    r.add_argument("--copies", type=int, default=None)
    r.add_argument("--functional", default=None, help="chsh, svetlichny, bbgl, mabk or zb")
    r.add_argument("--mu", type=_numbers, default=None, help="comma list of mixing parameters")
    r.add_argument("--gamma", type=_numbers, default=None, help="comma list of damping parameters")
    r.add_argument("--sigma", type=_numbers, default=None, help="comma list of phase spreads")
    r.add_argument("--no-timing", action="store_true", help="leave wall-clock columns empty")

    v = sub.add_parser("validate", help="check a state or channel file")
    v.add_argument("path")
    return p


def config_from_args(args):
    params = {k: getattr(args, k) for k in
              ("state", "channel", "parties", "excitations", "copies", "functional", "mu", "gamma", "sigma")}
    return ExperimentConfig(experiment=args.experiment, seed=args.seed, restarts=args.restarts,
                            tol_supp=args.tol_supp, out=args.out, format=args.format,
                            timing=not args.no_timing, params=params)


def format_value(x):
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    if isinstance(x, float) or hasattr(x, "dtype"):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".12g")
    return str(x)


def render_csv(record):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(record.columns)
    for row in record.rows:
        w.writerow([format_value(row.get(c)) for c in record.columns])
    return buf.getvalue()


def _json_value(x):
    if isinstance(x, float) and not math.isfinite(x):
        return format_value(x)
    if hasattr(x, "tolist"):
        return x.tolist()
    return x


def render_json(record):
    doc = {
        "config": record.config,
        "version": record.version,
        "columns": record.columns,
        "rows": [{c: _json_value(r.get(c)) for c in record.columns} for r in record.rows],
        "wall_time_s": record.wall_time_s,
        "diagnostics": {k: _json_value(v) for k, v in record.diagnostics.items()},
        "warnings": record.warnings,
    }
    return json.dumps(doc, indent=1, sort_keys=False) + "\n"


def write_atomic(path, text):
    """Write via a temporary file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".qresource-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cmd_run(args):
    cfg = config_from_args(args)
    check_config(cfg)
    record = run(cfg)
    text = render_json(record) if cfg.format == "json" else render_csv(record)
    for w in record.warnings:
        log.warning(w)
    if cfg.out:
        write_atomic(cfg.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_validate(args):
    kind, checks = validate_file(args.path)
    ok = all(passed for _, passed, _ in checks)
    print(f"{args.path}: {kind}")
    for name, passed, detail in checks:
        print(f"  {'PASS' if passed else 'FAIL'}  {name}: {detail}")
    return EXIT_OK if ok else EXIT_VALIDATION


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        return cmd_validate(args)
    except (ValidationError, UnsupportedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
