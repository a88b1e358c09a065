"""Command-line driver: ``solve``, ``reference`` and ``verify``."""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import inspect
import json
import math
import os
import sys
from dataclasses import fields

import numpy as np

from . import __version__
from .model import StopCriterion
from .outer import OuterConfig, run
from .problem import LogisticProblem, example1, load_libsvm

TRACE_COLUMNS = (
    "iter",
    "seconds",
    "objective",
    "rel_gap",
    "nnz",
    "stage",
    "alpha",
    "prox_grad_norm",
    "inner_iters",
    "enlargements",
)
ALGOS = ("isqa-lbfgs", "isqa-newton", "isqa+-lbfgs", "isqa+-newton")
CLI_SUBSOLVERS = ("pg", "apg", "rpcd", "sparsa")
BUILTINS = ("example1",)
REPORT_KEYS = ("reason", "iterations", "objective", "fstar", "rel_gap", "residual", "nnz", "support", "x", "manifest")
MANIFEST_KEYS = ("config", "data", "seed", "version", "timestamp", "threads")
NA = "na"
REFERENCE_TOL = 1e-13
REFERENCE_MAX_OUTER = 100_000


class CliError(Exception):
    """Configuration or IO failure; reported on stderr with exit code 1."""


def _num(v):
    return NA if v is None or (isinstance(v, float) and math.isnan(v)) else format(float(v), ".17g")


def trace_row(rec, timing=True):
    return [
        str(rec.iteration),
        _num(rec.wall_seconds) if timing else NA,
        _num(rec.objective),
        _num(rec.rel_gap),
        str(rec.nnz),
        rec.stage,
        _num(rec.alpha),
        _num(rec.prox_grad_norm),
        str(rec.inner_iters),
        str(rec.enlargements),
    ]


class TraceWriter:
    """Buffered CSV writer, flushed after every row."""

    def __init__(self, path, timing=True):
        self.timing = timing
        try:
            self._fh = open(path, "w", newline="", encoding="utf-8")
        except OSError as exc:
            raise CliError(f"cannot open trace file {path}: {exc}") from None
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(TRACE_COLUMNS)

    def __call__(self, rec):
        self._w.writerow(trace_row(rec, self.timing))
        self._fh.flush()

    def close(self):
        self._fh.close()


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def threads_setting():
    raw = os.environ.get("MANIFOLD_ISQA_THREADS")
    if raw is None:
        return None
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise CliError(f"MANIFOLD_ISQA_THREADS must be a positive integer, got {raw!r}")
    return n


def config_from_dict(d):
    """Inverse of :meth:`OuterConfig.to_dict`."""
    known = {f.name for f in fields(OuterConfig)}
    extra = set(d) - known
    if extra:
        raise CliError(f"unknown config keys: {sorted(extra)}")
    d = dict(d)
    for k in ("S", "max_seconds"):
        if d.get(k) == "inf":
            d[k] = math.inf
    if isinstance(d.get("inner_criterion"), dict):
        d["inner_criterion"] = StopCriterion(**d["inner_criterion"])
    try:
        return OuterConfig(**d)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid config: {exc}") from None


def parse_fstar(text):
    if text is None:
        return None
    try:
        return float(text)
    except ValueError:
        pass
    try:
        with open(text, encoding="utf-8") as fh:
            doc = json.load(fh)
        return float(doc["value"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CliError(f"--fstar must be a number or a reference file: {exc}") from None


def load_problem(data=None, builtin=None, lam=1.0, features=None, rows=None):
    """Problem plus a data descriptor for the manifest."""
    if (data is None) == (builtin is None):
        raise CliError("give exactly one of --data or --builtin")
    if builtin is not None:
        if builtin != "example1":
            raise CliError(f"unknown builtin {builtin!r}")
        return example1(), {"builtin": builtin}
    if not lam > 0:
        raise CliError("--lambda must be positive")
    try:
        mat, labels = load_libsvm(data, n_features=features, max_rows=rows)
    except OSError as exc:
        raise CliError(f"cannot read {data}: {exc}") from None
    except ValueError as exc:
        raise CliError(f"{data}: {exc}") from None
    if labels.size == 0:
        raise CliError(f"{data}: dataset is empty")
    prob = LogisticProblem(mat, labels, lam).composite(name=os.path.basename(str(data)))
    desc = {"path": os.path.abspath(str(data)), "sha256": sha256_file(data), "lambda": lam,
            "features": features, "rows": rows, "shape": list(mat.shape)}
    return prob, desc


def build_config(args):
    algo, hess = args.algo.split("-")
    try:
        return OuterConfig(
            algorithm="isqa_plus" if algo == "isqa+" else "isqa",
            hessian_kind=hess,
            subsolver=args.subsolver,
            S=args.S,
            T=args.T,
            tol=args.tol,
            max_outer=args.max_iter,
            max_seconds=args.max_seconds,
            seed=args.seed,
        )
    except ValueError as exc:
        raise CliError(f"invalid config: {exc}") from None


def make_manifest(config, data_desc, timing=True):
    return {
        "config": config.to_dict(),
        "data": data_desc,
        "seed": config.seed,
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "threads": threads_setting(),
        "timing": timing,
    }


def build_report(report, problem, manifest):
    x = np.asarray(report.x, dtype=float)
    last = report.trace[-1]
    return {
        "reason": report.reason,
        "iterations": report.iterations,
        "objective": report.objective,
        "fstar": report.fstar,
        "rel_gap": last.rel_gap,
        "residual": report.info.get("residual"),
        "nnz": int(np.count_nonzero(x)),
        "support": np.flatnonzero(x).tolist(),
        "x": x.tolist(),
        "manifest": manifest,
    }


def validate_report(doc):
    """Check the report layout; raises ``ValueError`` on mismatch."""
    missing = [k for k in REPORT_KEYS if k not in doc]
    if missing:
        raise ValueError(f"report is missing {missing}")
    man = doc["manifest"]
    missing = [k for k in MANIFEST_KEYS if k not in man]
    if missing:
        raise ValueError(f"manifest is missing {missing}")
    if not isinstance(doc["iterations"], int) or doc["iterations"] < 0:
        raise ValueError("iterations must be a nonnegative integer")
    if len(doc["x"]) < doc["nnz"] or len(doc["support"]) != doc["nnz"]:
        raise ValueError("support and x disagree")
    config_from_dict(man["config"])
    return doc


def _write_json(path, doc):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, allow_nan=False)
            fh.write("\n")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}") from None


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, dict):
        return {k: _clean(u) for k, u in v.items()}
    if isinstance(v, list):
        return [_clean(u) for u in v]
    return v


def _print_summary(report, out=None):
    out = sys.stdout if out is None else out
    print(f"reason={report.reason} iterations={report.iterations} objective={report.objective:.17g}", file=out)
    x = np.asarray(report.x)
    if x.size <= 20:
        print("x = " + " ".join(format(float(v), ".17g") for v in x), file=out)
    else:
        print(f"nnz = {np.count_nonzero(x)} of {x.size}", file=out)


def _load_manifest(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read manifest {path}: {exc}") from None
    man = doc.get("manifest", doc)
    for k in ("config", "data"):
        if k not in man:
            raise CliError(f"manifest {path} has no {k!r}")
    return man


def cmd_solve(args):
    timing = args.timing == "on"
    if args.from_manifest:
        man = _load_manifest(args.from_manifest)
        config = config_from_dict(man["config"])
        d = man["data"]
        if "builtin" in d:
            problem, desc = load_problem(builtin=d["builtin"])
        else:
            problem, desc = load_problem(data=d["path"], lam=d["lambda"], features=d.get("features"),
                                         rows=d.get("rows"))
            if desc["sha256"] != d["sha256"]:
                raise CliError(f"{d['path']}: checksum differs from the manifest")
        timing = bool(man.get("timing", timing)) and args.timing == "on"
    else:
        config = build_config(args)
        problem, desc = load_problem(args.data, args.builtin, args.lam, args.features, args.rows)
    fstar = parse_fstar(args.fstar)
    manifest = make_manifest(config, desc, timing)
    writer = TraceWriter(args.trace, timing) if args.trace else None
    try:
        report = run(problem, config, fstar=fstar, callback=writer)
    finally:
        if writer is not None:
            writer.close()
    if args.report:
        _write_json(args.report, _clean(build_report(report, problem, manifest)))
    _print_summary(report)
    return 0


def cmd_reference(args):
    problem, desc = load_problem(args.data, args.builtin, args.lam, args.features, args.rows)
    config = OuterConfig(hessian_kind="newton", algorithm="isqa_plus", tol=REFERENCE_TOL,
                         max_outer=args.max_iter, max_seconds=args.max_seconds, seed=args.seed)
    report = run(problem, config)
    # direct evaluation; the tracked objective of a run may differ in the last bits
    value = problem.objective(report.x)
    doc = {
        "value": value,
        "residual": report.info["residual"],
        "iterations": report.iterations,
        "reason": report.reason,
        "manifest": make_manifest(config, desc),
    }
    _write_json(args.output, _clean(doc))
    print(f"F* = {value:.17g} residual={report.info['residual']:.3e} "
          f"iterations={report.iterations} ({report.reason})")
    return 0


def cmd_verify(args):
    from .verify import SUITES

    names = list(SUITES) if args.suite == "all" else [args.suite]
    dump = {}
    failed = 0
    for name in names:
        fn = SUITES[name]
        kw = {"seed": args.seed}
        if args.builtin is not None:
            if "builtin" not in inspect.signature(fn).parameters:
                raise CliError(f"suite {name!r} takes no --builtin")
            kw["builtin"] = args.builtin
        verdicts = fn(**kw)
        bad = [v for v in verdicts if not v.passed]
        failed += len(bad)
        dump[name] = [v.to_dict() for v in verdicts]
        print(f"{name}: {len(verdicts)} verdicts, {len(bad)} failed")
        for v in bad[:20]:
            print(f"  FAIL {v.claim} {v.instance} measured={v.measured:.6g} bound={v.bound:.6g}")
    if args.output:
        _write_json(args.output, _clean(dump))
    return 0 if failed == 0 else 1


def _add_data_args(p):
    p.add_argument("--data", help="LIBSVM file")
    p.add_argument("--builtin", choices=BUILTINS, help="embedded instance")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0, help="l1 weight (default 1)")
    p.add_argument("--features", type=int, default=None, help="number of features (columns)")
    p.add_argument("--rows", type=int, default=None, help="use only the first N examples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-seconds", type=float, default=math.inf)


def build_parser():
    parser = argparse.ArgumentParser(prog="manifold-isqa", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve an l1-regularized problem")
    _add_data_args(p)
    p.add_argument("--algo", choices=ALGOS, default="isqa+-lbfgs")
    p.add_argument("--subsolver", choices=CLI_SUBSOLVERS, default="rpcd")
    p.add_argument("--S", type=int, default=10, help="unchanged-pattern iterations before the second stage")
    p.add_argument("--T", type=int, default=5, help="inner iterations per subproblem")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--fstar", help="optimal value, or a file written by 'reference'")
    p.add_argument("--trace", help="CSV trace output")
    p.add_argument("--report", help="JSON report output")
    p.add_argument("--timing", choices=("on", "off"), default="on",
                   help="'off' writes 'na' for seconds so identical runs give identical bytes")
    p.add_argument("--from-manifest", help="rerun the configuration stored in a report")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("reference", help="compute a high-accuracy optimal value")
    _add_data_args(p)
    p.add_argument("--max-iter", type=int, default=REFERENCE_MAX_OUTER)
    p.add_argument("--output", "-o", required=True, help="JSON file for {value, residual, iterations}")
    p.set_defaults(func=cmd_reference)

    from .verify import SUITES

    p = sub.add_parser("verify", help="run numeric audit suites")
    p.add_argument("--suite", required=True, choices=sorted(SUITES) + ["all"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--builtin", choices=BUILTINS)
    p.add_argument("--output", "-o", help="JSON verdict dump")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        threads_setting()
        return args.func(args)
    except CliError as exc:
        print(f"manifold-isqa: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
