"""Command-line front end.

Exit status: 0 when every report passed, 1 when some report failed (the
report is still written), 2 on usage, configuration or I/O errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import identities as idt
from . import lawtest as lt
from . import pl_path as pl
from .errors import ConfigurationError, DomainError, PreconditionError
from .pl_path import Grid
from .sampler import DEFAULT_LAW_STEPS, SampleSpec, sample, write_long_csv
from .transforms import TransformKind, apply

THREADS_ENV = "BMTRANSFORMS_THREADS"
SUBCOMMANDS = ("sample", "transform", "verify-identities", "verify-law", "sweep-c",
               "verify-appendix")


class UsageError(Exception):
    pass


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not v > 0 or not np.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def _seed(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _c_list(text):
    return [_positive_float(x) for x in text.split(",") if x.strip()]


def _threads(text):
    return "auto" if text == "auto" else _positive_int(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--t", type=_positive_float, default=1.0, help="horizon")
    common.add_argument("--n-steps", type=_positive_int, default=None)
    common.add_argument("--n-paths", type=_positive_int, default=None)
    common.add_argument("--seed", type=_seed, default=0)
    common.add_argument("--c", type=_c_list, default=None, dest="c_values",
                        help="comma-separated positive values")
    common.add_argument("--drift", type=float, default=None)
    common.add_argument("--transform", default=None, help="e.g. G, M, MMin, T, Tc:0.25")
    common.add_argument("--direction", choices=("to-zero", "to-infinity"), default=None)
    common.add_argument("--input", default=None, help="path CSV with header time,value")
    common.add_argument("--out", default=None, help="output file (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--threads", type=_threads, default=None,
                        help=f"worker threads (default ${THREADS_ENV}, else CPU count)")
    parser = argparse.ArgumentParser(prog="bmtransforms")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def resolve_threads(flag) -> int:
    if isinstance(flag, int):
        return flag
    env = os.environ.get(THREADS_ENV)
    if flag is None and env:
        try:
            return _positive_int(env)
        except argparse.ArgumentTypeError as exc:
            raise UsageError(f"{THREADS_ENV}: {exc}")
    return os.cpu_count() or 1


def _config(args, threads) -> dict:
    cfg = {k: getattr(args, k) for k in ("subcommand", "t", "n_steps", "n_paths", "seed",
                                         "c_values", "drift", "transform", "direction",
                                         "input", "format")}
    cfg["out_path"] = args.out
    cfg["threads"] = threads
    return cfg


def _write_text(text: str, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _write_reports(args, cfg, reports):
    doc = {"version": __version__, "config": cfg, "reports": [r.to_dict() for r in reports]}
    _write_text(json.dumps(doc, indent=2) + "\n", args.out)


def _parse_kind(text):
    if text is None:
        raise UsageError("--transform is required")
    try:
        kind = TransformKind.parse(text)
    except (ValueError, DomainError, ConfigurationError) as exc:
        raise UsageError(str(exc))
    return kind


def _sample_spec(args, n_paths, n_steps, drift=0.0):
    return SampleSpec(Grid(args.t, n_steps), n_paths, args.seed, drift)


def _paths_json(paths):
    return [{"times": p.times.tolist(), "values": p.values.tolist()} for p in paths]


def _cmd_sample(args, cfg):
    spec = _sample_spec(args, args.n_paths or 1, args.n_steps or DEFAULT_LAW_STEPS,
                        args.drift or 0.0)
    batch = sample(spec)
    if args.format == "json":
        _write_text(json.dumps({"version": __version__, "config": cfg,
                                "paths": _paths_json(batch)}) + "\n", args.out)
    elif args.out is None:
        _long_csv_stdout(batch)
    else:
        write_long_csv(batch, args.out)
    return 0


def _long_csv_stdout(paths):
    w = csv.writer(sys.stdout)
    w.writerow(["path_id", "time", "value"])
    for i, p in enumerate(paths):
        for s, x in zip(p.times, p.values):
            w.writerow([i, f"{s:.17g}", f"{x:.17g}"])


def _cmd_transform(args, cfg):
    if args.input is not None:
        src = pl.read_csv(args.input)
        kind = _parse_kind(args.transform)
        if kind.sampled:
            kind = TransformKind(kind.tag, kind.c, Grid(src.horizon, args.n_steps or 1024))
        out = [apply(kind, src, src.terminal)]
    else:
        kind = _parse_kind(args.transform)
        spec = _sample_spec(args, args.n_paths or 1, args.n_steps or DEFAULT_LAW_STEPS,
                            args.drift or 0.0)
        if kind.sampled:
            kind = TransformKind(kind.tag, kind.c, spec.grid)
        out = [apply(kind, p, p.terminal) for p in sample(spec)]
    if args.format == "json":
        _write_text(json.dumps({"version": __version__, "config": cfg,
                                "paths": _paths_json(out)}) + "\n", args.out)
    elif len(out) == 1 and args.input is not None:
        if args.out is None:
            w = csv.writer(sys.stdout)
            w.writerow(["time", "value"])
            for s, x in zip(out[0].times, out[0].values):
                w.writerow([f"{s:.17g}", f"{x:.17g}"])
        else:
            pl.write_csv(out[0], args.out)
    elif args.out is None:
        _long_csv_stdout(out)
    else:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["path_id", "time", "value"])
            for i, p in enumerate(out):
                for s, x in zip(p.times, p.values):
                    w.writerow([i, f"{s:.17g}", f"{x:.17g}"])
    return 0


def _cmd_identities(args, cfg, pool):
    paths = idt.random_paths(args.n_paths or 100, args.seed, horizon=args.t)
    reports = idt.run_identity_suite(paths, seed=args.seed, executor=pool)
    _write_reports(args, cfg, reports)
    return 0 if all(r.passed for r in reports) else 1


def _cmd_law(args, cfg, pool):
    n = args.n_paths or 20_000
    spec = _sample_spec(args, n, args.n_steps or DEFAULT_LAW_STEPS)
    cs = args.c_values or [0.25, 1.0, 4.0]
    mu = 1.0 if args.drift is None else args.drift
    jobs = [(lt.invariance_test, TransformKind("T", grid=spec.grid), spec)]
    jobs += [(lt.invariance_test, TransformKind("Tc", c, spec.grid), spec) for c in cs]
    jobs += [(lt.invariance_test, TransformKind(tag), spec) for tag in ("G", "M", "MMin")]
    jobs += [
        (lt.covariance_test, spec),
        (lt.drift_flip_test, mu, spec),
        (lt.pitman_bessel_test, spec),
        (lt.conditional_symmetry_test, spec),
    ]
    futures = [pool.submit(fn, *a) for fn, *a in jobs]
    reports = [f.result() for f in futures]
    _write_reports(args, cfg, reports)
    return 0 if all(r.passed for r in reports) else 1


def _sweep_path(args):
    if args.input is not None:
        return pl.read_csv(args.input)
    return idt.random_path(args.seed, 0, n_knots=16, horizon=args.t)


def _cmd_sweep(args, cfg):
    direction = args.direction or "to-infinity"
    if args.c_values:
        cs = args.c_values
    elif direction == "to-infinity":
        cs = [2.0**k for k in range(9)]
    else:
        cs = [2.0**-k for k in range(9)]
    path = _sweep_path(args)
    grid = Grid(path.horizon, args.n_steps) if args.n_steps else None
    report = idt.sweep_c(path, direction, cs, grid, seed=args.seed)
    if args.format == "csv":
        lines = ["c,distance"] + [f"{c:.17g},{d:.17g}" for c, d in report.refinement_trace]
        _write_text("\n".join(lines) + "\n", args.out)
    else:
        _write_reports(args, cfg, [report])
    return 0 if report.passed else 1


def appendix_reports(seed: int = 0, horizon: float = 1.0) -> list:
    """Calculus fixtures: three log-sum-exp limits and two Dini checks."""
    c = np.arange(1.0, 51.0)
    reports = [
        idt.log_sum_exp_limit_check(2.0 * c, c, c, 2.0, 1.0),
        idt.log_sum_exp_limit_check(np.zeros_like(c), np.zeros_like(c), c, 0.0, 0.0),
        idt.log_sum_exp_limit_check(-c, 3.0 * c, c, -1.0, 3.0),
    ]
    path = idt.random_path(seed, 0, n_knots=16, horizon=horizon)
    if path.terminal < 0:
        # Tc(phi) - phi is nonincreasing in s only when phi_t >= 0
        path = -path
    family, limit = idt.tc_minus_identity_family(path, [2.0**k for k in range(9)])
    reports.append(idt.dini_uniform_check(family, limit))
    # raise the s = 0 value of one member: monotonicity in s survives, its
    # residual jumps above its predecessor's
    k = len(family) // 2
    c_k, f_k = family[k]
    bumped = f_k.values.copy()
    bumped[0] += 0.1
    faulty = list(family)
    faulty[k] = (c_k, pl.PlPath(f_k.times, bumped))
    inner = idt.dini_uniform_check(faulty, limit)
    reports.append(idt.IdentityReport("dini_uniform[injected_fault_detected]",
                                      inner.n_paths, inner.max_residual, inner.tolerance,
                                      inner.refinement_trace, not inner.passed, int(seed)))
    return reports


def _cmd_appendix(args, cfg):
    reports = appendix_reports(args.seed, args.t)
    _write_reports(args, cfg, reports)
    return 0 if all(r.passed for r in reports) else 1


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        threads = resolve_threads(args.threads)
        cfg = _config(args, threads)
        cmd = args.subcommand
        if cmd == "sample":
            return _cmd_sample(args, cfg)
        if cmd == "transform":
            return _cmd_transform(args, cfg)
        if cmd == "sweep-c":
            return _cmd_sweep(args, cfg)
        if cmd == "verify-appendix":
            return _cmd_appendix(args, cfg)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            if cmd == "verify-identities":
                return _cmd_identities(args, cfg, pool)
            return _cmd_law(args, cfg, pool)
    except UsageError as exc:
        parser.error(str(exc))
    except (ConfigurationError, PreconditionError, DomainError) as exc:
        print(f"bmtransforms: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"bmtransforms: I/O error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
