"""Command line entry point: ``ensemble-rc {run,plot,validate,oracle}``.

Exit codes: 0 success, 1 oracle mismatch, 2 configuration or input error,
3 numerical divergence, 4 I/O error. Errors are also written to stderr as
one JSON object per line.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, _backend, config
from .errors import (
    DegeneratePerturbationError,
    DivergenceError,
    InstabilityError,
    InvalidArgumentError,
    SingularityError,
)

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3, 4
THREADS_ENV = "ENSEMBLE_RC_THREADS"


def _emit(level, code, kind, message, **extra):
    rec = {"level": level, "code": code, "kind": kind, "message": message}
    rec.update(extra)
    print(json.dumps(rec, default=str), file=sys.stderr)


def _threads(cfg):
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise config.ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}")
        if n < 1:
            raise config.ConfigError(f"{THREADS_ENV} must be >= 1")
        return n
    return int(cfg["threads"])


def _guard(fn):
    """Map exceptions to exit codes."""
    try:
        return fn()
    except (DivergenceError, SingularityError, InstabilityError, DegeneratePerturbationError) as exc:
        _emit("error", EXIT_NUMERIC, "divergence", str(exc),
              step=getattr(exc, "step", None), trial=getattr(exc, "trial", None))
        return EXIT_NUMERIC
    except (InvalidArgumentError, ValueError) as exc:
        _emit("error", EXIT_CONFIG, "config", str(exc))
        return EXIT_CONFIG
    except OSError as exc:
        _emit("error", EXIT_IO, "io", str(exc))
        return EXIT_IO


def cmd_run(args):
    from threadpoolctl import threadpool_limits

    from .experiments import RUNNERS, Context

    cfg = config.load(args.config)
    if args.output_dir:
        cfg["output_dir"] = args.output_dir
    threads = _threads(cfg)
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory not writable: {out}")
    ctx = Context(cfg, out, threads)
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    # one BLAS thread per worker keeps floating-point reductions reproducible
    with threadpool_limits(limits=1):
        summary = RUNNERS[cfg["experiment"]](ctx)
    manifest = {
        "artifact_version": __version__,
        "experiment": cfg["experiment"],
        "seed": cfg["seed"],
        "config": cfg,
        "backend": _backend.BACKEND,
        "threads": threads,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "started_utc": started.isoformat(),
        "wall_clock_s": time.perf_counter() - t0,
        "timings_s": ctx.timings,
        "outputs": sorted(set(ctx.files)),
        "summary": summary,
    }
    (out / "run_manifest.json").write_text(json.dumps(manifest, indent=2, default=_jsonable) + "\n",
                                           encoding="utf-8")
    print(json.dumps({"experiment": cfg["experiment"], "output_dir": str(out), "summary": summary},
                     default=_jsonable))
    return EXIT_OK


def _jsonable(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    return str(o)


def cmd_validate(args):
    cfg = config.load(args.config)
    print(json.dumps(cfg, indent=2, default=_jsonable))
    return EXIT_OK


def cmd_plot(args):
    from .plots import emit_plots

    written = emit_plots(args.directory)
    for p in written:
        print(p)
    return EXIT_OK


def cmd_oracle(args):
    from .oracles import ORACLES

    if args.name == "list":
        print("\n".join(sorted(ORACLES)))
        return EXIT_OK
    if args.name not in ORACLES:
        raise InvalidArgumentError(f"unknown oracle {args.name!r}; choose from {', '.join(sorted(ORACLES))}")
    res = ORACLES[args.name]()
    print(json.dumps(res, default=_jsonable))
    return EXIT_OK if res["ok"] else EXIT_MISMATCH


def build_parser():
    p = argparse.ArgumentParser(prog="ensemble-rc", description="Ensemble reservoir computing experiments.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the experiment described by a config (or manifest)")
    r.add_argument("config")
    r.add_argument("-o", "--output-dir", help="override output_dir from the config")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="validate a config and print the resolved tree")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)
    pl = sub.add_parser("plot", help="render figures from the CSV files of a run directory")
    pl.add_argument("directory")
    pl.set_defaults(func=cmd_plot)
    o = sub.add_parser("oracle", help="run a brute-force reference check ('list' to enumerate)")
    o.add_argument("name")
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    return _guard(lambda: args.func(args))


if __name__ == "__main__":
    sys.exit(main())
