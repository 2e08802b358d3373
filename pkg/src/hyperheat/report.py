"""Experiment reports and their byte-stable serialisation."""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Any, Mapping, Sequence

from .errors import DomainError

FLOAT_FORMAT = "{:.17g}"


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise DomainError(f"non-finite value {x!r} cannot be serialised")
    text = FLOAT_FORMAT.format(x)
    return text if any(c in text for c in ".en") else text + ".0"


def to_json(obj: Any, indent: int = 0, step: int = 2) -> str:
    """Deterministic JSON: sorted keys, 17 significant digits for floats."""
    pad, inner = " " * indent, " " * (indent + step)
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=True)
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        items = [f"{inner}{to_json(str(k))}: {to_json(obj[k], indent + step)}"
                 for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (Mapping, list, tuple)) for v in obj):
            return "[" + ", ".join(to_json(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + to_json(v, indent + step) for v in obj) + f"\n{pad}]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def config_hash(config: Mapping[str, Any]) -> str:
    return hashlib.sha256(to_json(dict(config)).encode()).hexdigest()


@dataclass(frozen=True)
class Series:
    """A table whose first column is a strictly increasing abscissa."""

    columns: tuple[str, ...]
    rows: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        cols = tuple(self.columns)
        rows = tuple(tuple(float(v) for v in row) for row in self.rows)
        if len(cols) < 2:
            raise DomainError("a series needs an x column and at least one y column")
        for row in rows:
            if len(row) != len(cols):
                raise DomainError("row width does not match the columns")
            if not all(math.isfinite(v) for v in row):
                raise DomainError("series values must be finite")
        xs = [row[0] for row in rows]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise DomainError(f"series x column {cols[0]!r} must be strictly increasing")
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "rows", rows)

    @classmethod
    def of(cls, columns: Sequence[str], *cols: Sequence[float]) -> "Series":
        return cls(tuple(columns), tuple(zip(*cols)))

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        lines += [",".join(FLOAT_FORMAT.format(v) for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ExperimentReport:
    experiment: str
    params: Mapping[str, Any]
    metrics: Mapping[str, float]
    series: Mapping[str, Series] = field(default_factory=dict)
    provenance: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for k, v in self.metrics.items():
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise DomainError(f"metric {k!r} is not a finite real: {v!r}")
        for name in self.series:
            if not name or any(c in name for c in "/\\,"):
                raise DomainError(f"bad series name {name!r}")
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))
        object.__setattr__(self, "metrics",
                           MappingProxyType({k: float(v) for k, v in self.metrics.items()}))
        object.__setattr__(self, "series", MappingProxyType(dict(self.series)))
        object.__setattr__(self, "provenance", MappingProxyType(dict(self.provenance)))

    def as_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "params": dict(self.params),
            "metrics": dict(self.metrics),
            "series": {k: {"columns": list(s.columns), "rows": [list(r) for r in s.rows]}
                       for k, s in self.series.items()},
            "provenance": dict(self.provenance),
        }

    def to_json(self) -> str:
        return to_json(self.as_dict()) + "\n"


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n", encoding="ascii") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(report: ExperimentReport, out_dir) -> list[Path]:
    """Write ``<experiment>.json`` plus one ``<experiment>.<series>.csv`` each.

    Raises OSError when the directory cannot be created or written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{report.experiment}.json"]
    _atomic_write(paths[0], report.to_json())
    for name in sorted(report.series):
        p = out / f"{report.experiment}.{name}.csv"
        _atomic_write(p, report.series[name].to_csv())
        paths.append(p)
    return paths
