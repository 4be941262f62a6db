"""Command line: ``hassenet validate|run|sweep``.

Exit codes: 0 success, 1 usage or parse error, 2 failed checks, 3 engine error.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

from .errors import HasseNetError, ParseError, SemanticError
from .render import DiagramStyle, to_dot, to_jsonl, to_svg
from .runner import build_report
from .scenario import read_scenario
from .scrambling import sample_decoupling, with_seed

EXIT_OK, EXIT_USAGE, EXIT_CHECKS, EXIT_ENGINE = 0, 1, 2, 3
OUT_ENV = "HASSENET_OUT"


def _jsonable(o):
    if hasattr(o, "item"):
        return o.item()
    if isinstance(o, (set, frozenset, tuple)):
        return list(o)
    raise TypeError(f"{type(o).__name__} is not JSON serializable")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False, default=_jsonable) + "\n"


def _out_dir(arg: str | None, sc) -> Path:
    d = arg or sc.output.get("dir") or os.environ.get(OUT_ENV) or "hassenet_out"
    path = Path(d)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _stem(path: str, sc) -> str:
    return sc.raw.get("name") or Path(path).stem


def cmd_validate(args) -> int:
    sc = read_scenario(args.file)
    print(f"ok: {args.file} ({sc.kind}, engine={sc.engine}, {sc.net.n_nodes} nodes, {sc.net.size} qubits)")
    return EXIT_OK


def cmd_run(args) -> int:
    sc = read_scenario(args.file)
    if args.epsilon is not None:
        if not args.epsilon > 0:
            raise SemanticError("--epsilon must be positive")
        sc.epsilon = args.epsilon
    seed = sc.seed if args.seed is None else args.seed
    t0 = time.perf_counter()
    try:
        report, run = build_report(sc, seed, args.trials, args.jobs)
    except HasseNetError as exc:
        print(f"engine error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    report["timing"] = {"seconds": round(time.perf_counter() - t0, 6)}
    out = _out_dir(args.out, sc)
    stem = _stem(args.file, sc)
    (out / f"{stem}.report.json").write_text(dumps(report))
    opts = sc.output
    style = DiagramStyle.from_json(opts["style"]) if "style" in opts else None
    names = run.net.labels()
    if opts.get("jsonl", True):
        (out / f"{stem}.trace.jsonl").write_text(to_jsonl(run.trace))
    if opts.get("dot", True):
        (out / f"{stem}.dot").write_text(to_dot(run.trace, style, names=names))
        (out / f"{stem}.hasse.dot").write_text(to_dot(run.trace, style, mode="hasse", names=names))
    if opts.get("svg", True):
        (out / f"{stem}.svg").write_text(to_svg(run.trace, style, names=names))
    for c in report["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}")
    print(f"report: {out / f'{stem}.report.json'}")
    return EXIT_OK if report["passed"] else EXIT_CHECKS


def _sizes(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"sizes must be comma-separated integers, got {text!r}") from None


def cmd_sweep(args) -> int:
    sc = read_scenario(args.file)
    if sc.kind != "scrambling":
        raise SemanticError(f"{args.file}: sweep needs a scrambling scenario")
    seed = sc.seed if args.seed is None else args.seed
    trials = args.trials or sc.trials
    limit = sc.net.n_nodes if sc.scrambling.granularity == "node" else sc.net.size
    sizes = args.sizes or list(range(1, limit + 1))
    for k in sizes:
        if not 0 <= k <= limit:
            raise SemanticError(f"subset size {k} outside 0..{limit}")
    t0 = time.perf_counter()
    try:
        rep = sample_decoupling(with_seed(sc.scrambling, seed), sizes, trials, seed=seed, jobs=args.jobs)
    except HasseNetError as exc:
        print(f"engine error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    doc = {"schema_version": 1, "scenario": sc.raw, "seed": seed, "trials": trials,
           "engine": sc.engine, **rep.to_dict(), "monotone_2se": rep.monotone(2.0),
           "timing": {"seconds": round(time.perf_counter() - t0, 6)}}
    out = _out_dir(args.out, sc)
    stem = _stem(args.file, sc)
    (out / f"{stem}.sweep.json").write_text(dumps(doc))
    if not args.no_csv:
        with open(out / f"{stem}.sweep.csv", "w", newline="") as fh:
            rows = [r.to_dict() for r in rep.rows]
            w = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["n_E"])
            w.writeheader()
            w.writerows(rows)
    for r in rep.rows:
        se = "null" if r.stderr_mi is None else f"{r.stderr_mi:.4f}"
        print(f"n_E={r.n_e:3d}  I={r.mean_mi:.4f} (se {se})  dev={r.mean_deviation:.4f}  bound={r.bound:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hassenet", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    v = sub.add_parser("validate", help="check a scenario file")
    v.add_argument("file")
    v.set_defaults(func=cmd_validate)
    r = sub.add_parser("run", help="run a scenario and write report + diagrams")
    r.add_argument("file")
    r.add_argument("--seed", type=int)
    r.add_argument("--trials", type=int)
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--out")
    r.add_argument("--epsilon", type=float)
    r.set_defaults(func=cmd_run)
    s = sub.add_parser("sweep", help="decoupling sweep over V_E sizes")
    s.add_argument("file")
    s.add_argument("--sizes", type=_sizes)
    s.add_argument("--trials", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out")
    s.add_argument("--no-csv", action="store_true")
    s.set_defaults(func=cmd_sweep)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (ParseError, SemanticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HasseNetError as exc:
        print(f"engine error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ENGINE


if __name__ == "__main__":
    sys.exit(main())
