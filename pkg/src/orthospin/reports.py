"""Result rows, CSV/JSON writers shared by the exact, Monte Carlo and CLI layers.

Every float is written with ``%.17g`` so files round-trip exactly.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

CSV_HEADER = ("model", "beta", "n", "quantity", "value", "method", "std_error")


def fmt(x: float) -> str:
    return "%.17g" % x


def dumps(obj, indent: int | None = None, _level: int = 0) -> str:
    """``json.dumps`` replacement that writes floats with ``%.17g``."""
    pad = "" if indent is None else "\n" + " " * (indent * (_level + 1))
    end = "" if indent is None else "\n" + " " * (indent * _level)
    sep = ", " if indent is None else ","
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if math.isnan(obj):
            return "NaN"
        if math.isinf(obj):
            return "Infinity" if obj > 0 else "-Infinity"
        return fmt(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = (f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items())
        return "{" + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        # numeric lists stay on one line
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        items = (pad + dumps(v, indent, _level + 1) for v in obj)
        return "[" + sep.join(items) + end + "]"
    if hasattr(obj, "tolist"):
        return dumps(obj.tolist(), indent, _level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


@dataclass(frozen=True)
class ResultRow:
    model: str
    beta: float
    n: int
    quantity: str
    value: float
    method: str = "exact"
    std_error: float = 0.0

    def as_strings(self) -> list[str]:
        return [self.model, fmt(self.beta), str(self.n), self.quantity,
                fmt(self.value), self.method, fmt(self.std_error)]


def write_results_csv(rows: Iterable[ResultRow], path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow(r.as_strings())


def read_results_csv(path) -> list[ResultRow]:
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [ResultRow(r["model"], float(r["beta"]), int(r["n"]), r["quantity"],
                          float(r["value"]), r["method"], float(r["std_error"]))
                for r in reader]
