"""Command line: ``hyperheat [run|converge] <experiment> [flags]``.

Exit codes: 0 success, 1 runtime or IO failure, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Any

from .errors import HyperHeatError, UsageError, ValidationError
from .experiments import EXPERIMENTS, run_experiment
from .kernel import KernelSpec
from .report import write_report

VERBS = ("run", "converge")

FLOAT_KEYS = {"a", "r_max", "dt"}
INT_KEYS = {"nodes"}
LIST_KEYS = {"t"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage()}")


def _parser() -> _Parser:
    p = _Parser(prog="hyperheat", description="Reproduce heat-flow results on hyperbolic space.")
    p.add_argument("experiment", help=f"one of: {', '.join(sorted(EXPERIMENTS))}")
    p.add_argument("--n", help="dimension, or a comma list of dimensions")
    p.add_argument("--t-list", dest="t", help="comma-separated times")
    p.add_argument("--a", help="displacement")
    p.add_argument("--r-max", dest="r_max", help="initial truncation radius")
    p.add_argument("--nodes", help="grid intervals")
    p.add_argument("--dt", help="fixed time step")
    p.add_argument("--out", help="output directory (default: print the JSON report)")
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("--thresholds", help="JSON threshold file overriding the packaged one")
    return p


def _numbers(text: str, kind=float) -> list:
    try:
        return [kind(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _coerce(key: str, raw: str) -> Any:
    if key == "n":
        values = _numbers(raw, int)
        for n in values:
            KernelSpec(n)
        return values[0] if len(values) == 1 else values
    if key in LIST_KEYS:
        return _numbers(raw)
    if key in INT_KEYS:
        return _numbers(raw, int)[0]
    if key in FLOAT_KEYS:
        return _numbers(raw)[0]
    if key in ("out", "thresholds"):
        return raw
    try:
        values = [float(x) for x in raw.split(",")]
    except ValueError:
        return raw
    return values if "," in raw else values[0]


def read_config_file(path) -> dict[str, str]:
    """Plain ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    for no, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{no}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        out["t" if key == "t_list" else key] = value
    return out


def parse_cli(argv: list[str]) -> tuple[str, dict[str, Any]]:
    argv = list(argv)
    if argv and argv[0] in VERBS:
        argv = argv[1:]
    if not argv or argv[0].startswith("-"):
        raise UsageError(f"missing experiment name\n{_parser().format_usage()}")
    ns = _parser().parse_args(argv)
    raw: dict[str, str] = read_config_file(ns.config) if ns.config else {}
    for key in ("n", "t", "a", "r_max", "nodes", "dt", "out", "thresholds"):
        value = getattr(ns, key)
        if value is not None:
            raw[key] = value
    return ns.experiment, {k: _coerce(k, v) for k, v in raw.items()}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        name, config = parse_cli(argv)
        out = config.pop("out", None)
        report = run_experiment(name, config)
    except ValidationError as exc:
        print(f"hyperheat: {exc}", file=sys.stderr)
        return 2
    except HyperHeatError as exc:
        print(f"hyperheat: {exc}", file=sys.stderr)
        return 1
    if out is None:
        sys.stdout.write(report.to_json())
        return 0
    try:
        paths = write_report(report, out)
    except OSError as exc:
        print(f"hyperheat: cannot write report: {exc}", file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
