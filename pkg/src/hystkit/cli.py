"""``hyst`` command line: run scenario files and write traces and reports.

Exit codes: 0 success, 2 invalid scenario, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import __version__
from .errors import NumericalFailure
from .scenario import NAMED_INTERFACES, Scenario, run_task
from .weighting import BUILTINS

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


def fmt_float(x: float) -> str:
    s = format(float(x), ".17g")
    # keep integral values recognisable as reals
    return s if any(c in s for c in ".ein") else s + ".0"


def to_json(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with every float written at 17 significant digits.

    Non-finite floats become the strings ``"inf"``, ``"-inf"`` and ``"nan"``.
    """
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return fmt_float(x) if math.isfinite(x) else json.dumps(str(x))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [to_json(v, indent, _level + 1) for v in obj]
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(items) + "]"
        return "[\n" + ",\n".join(pad + s for s in items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_trace(path: Path, columns: dict) -> None:
    names = list(columns) or ["t", "u", "y"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        if columns:
            for row in zip(*(columns[k] for k in names)):
                w.writerow([fmt_float(v) for v in row])


def read_trace(path: Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array(body, dtype=float).reshape(len(body), len(header))
    return {name: data[:, k] for k, name in enumerate(header)}


def _line_of(text: str, loc: tuple) -> int | None:
    """Best-effort line number of the innermost key named in a validation location."""
    keys = [k for k in loc if isinstance(k, str)]
    for key in reversed(keys):
        m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
        if m:
            return text.count("\n", 0, m.start()) + 1
    return None


def load_scenario(path: Path) -> Scenario:
    text = path.read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"{path}:{exc.lineno}: invalid JSON: {exc.msg}"]) from None
    try:
        return Scenario.model_validate(raw)
    except ValidationError as exc:
        msgs = []
        for err in exc.errors():
            line = _line_of(text, err["loc"])
            where = f"{path}:{line}" if line else str(path)
            field = ".".join(str(p) for p in err["loc"]) or "<root>"
            msgs.append(f"{where}: {field}: {err['msg']}")
        raise ScenarioError(msgs) from None


class ScenarioError(Exception):
    def __init__(self, messages: list[str]):
        super().__init__("\n".join(messages))
        self.messages = messages


def output_dir(sc: Scenario, path: Path, out: str | None, many: bool) -> Path:
    if out is not None:
        return Path(out) / sc.name if many else Path(out)
    if sc.output is not None:
        return (path.parent / sc.output).resolve()
    return Path("out") / sc.name


def run_scenario(path: str | Path, out: str | None = None, many: bool = False) -> int:
    path = Path(path)
    try:
        sc = load_scenario(path)
    except ScenarioError as exc:
        for m in exc.messages:
            print(m, file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"{path}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    t0 = time.perf_counter()
    try:
        results, trace = run_task(sc)
    except NumericalFailure as exc:
        print(f"{path}: numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, TypeError, KeyError) as exc:
        print(f"{path}: invalid scenario ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_INVALID
    wall = time.perf_counter() - t0
    dest = output_dir(sc, path, out, many)
    dest.mkdir(parents=True, exist_ok=True)
    write_trace(dest / "trace.csv", trace)
    report = {
        "tool": "hystkit",
        "version": __version__,
        "scenario": sc.model_dump(mode="json", exclude_none=True),
        "results": results,
        "wall_time": wall,
    }
    (dest / "report.json").write_text(to_json(report) + "\n")
    print(f"{sc.name}: wrote {dest}")
    return EXIT_OK


def list_builtins() -> str:
    lines = ["weighting functions:"]
    for name in sorted(BUILTINS):
        spec = BUILTINS[name]
        params = ", ".join(f"{k}={v!r}" for k, v in spec.params.items()) or "no parameters"
        lines.append(f"  {name}({params})")
        lines.append(f"      {spec.summary}")
    lines.append("named interfaces:")
    for name in sorted(NAMED_INTERFACES):
        lines.append(f"  {name}")
        lines.append(f"      {NAMED_INTERFACES[name][0]}")
    return "\n".join(lines)


def _run_one(args: tuple[str, str | None, bool]) -> int:
    return run_scenario(*args)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hyst", description="Preisach hysteresis scenario runner")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one or more scenario files")
    r.add_argument("scenarios", nargs="+", help="scenario JSON files")
    r.add_argument("--out", default=None, help="output directory (one subdirectory per scenario if several)")
    r.add_argument("--jobs", type=int, default=1, help="scenarios to run in parallel")
    sub.add_parser("list-builtins", help="list builtin weightings and named interfaces")
    sub.add_parser("version", help="print the version")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "version":
        print(__version__)
        return EXIT_OK
    if args.command == "list-builtins":
        print(list_builtins())
        return EXIT_OK
    if args.jobs < 1:
        print("--jobs must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    many = len(args.scenarios) > 1
    jobs = [(s, args.out, many) for s in args.scenarios]
    if args.jobs == 1 or not many:
        codes = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            codes = list(ex.map(_run_one, jobs))
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
