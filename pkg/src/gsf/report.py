"""Deterministic JSON/CSV reports.

Floats are written with 17 significant digits so that a report round-trips
exactly; key order is insertion order, so identical runs give identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from gsf.ring import Verdict


def _float_text(x):
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def plain(obj):
    """Convert numpy scalars/arrays, tuples and verdicts into JSON-ready python values."""
    if isinstance(obj, Verdict):
        return obj.as_dict()
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def dumps(obj, indent=2, _level=0):
    """JSON text with '.17g' floats."""
    obj = plain(obj)
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return _float_text(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    return json.dumps(str(obj))


def verdict_fields(v: Verdict, witness="witness"):
    """{"verdict": ..., "witness_<name>": ...} or the Indeterminate reason."""
    out = {"verdict": v.label}
    key = witness if witness == "witness" else f"witness_{witness}"
    if v.witness is not None:
        out[key] = plain(v.witness)
    out["diagnostics"] = v.diagnostics
    return out


@dataclass
class Table:
    columns: list
    rows: list
    description: str = ""


@dataclass
class Report:
    command: str
    config: dict
    items: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    passed: bool | None = None

    def add(self, name, **data):
        self.items.append({"name": name, **plain(data)})
        return self

    def add_verdict(self, name, verdict: Verdict, witness="witness", **data):
        self.items.append({"name": name, **verdict_fields(verdict, witness), **plain(data)})
        return self

    def add_table(self, name, columns, rows, description=""):
        self.tables[name] = Table(list(columns), [list(plain(r)) for r in rows], description)
        return self

    def as_dict(self):
        return {
            "command": self.command,
            "config": plain(self.config),
            "items": self.items,
            "tables": {k: {"description": t.description, "columns": t.columns, "rows": t.rows}
                       for k, t in self.tables.items()},
            "summary": {"passed": self.passed, "items": len(self.items)},
        }


def _csv_cell(v):
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, (dict, list)):
        return json.dumps(v, sort_keys=False)
    return "" if v is None else str(v)


def emit(report: Report, fmt="json") -> bytes:
    if fmt == "json":
        return (dumps(report.as_dict()) + "\n").encode()
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    buf.write(f"# command: {report.command}\n")
    buf.write(f"# passed: {report.passed}\n")
    buf.write("# table: items\n# columns: name (item), verdict (true/false/indeterminate or empty), "
              "witness (witness value), detail (remaining fields as JSON)\n")
    w.writerow(["name", "verdict", "witness", "detail"])
    for it in report.items:
        wit = next((it[k] for k in it if k.startswith("witness")), None)
        rest = {k: v for k, v in it.items() if k not in ("name", "verdict") and not k.startswith("witness")}
        w.writerow([it["name"], it.get("verdict", ""), _csv_cell(wit), _csv_cell(rest)])
    for name, t in report.tables.items():
        buf.write(f"# table: {name}\n# columns: {', '.join(t.columns)}")
        buf.write(f" ({t.description})\n" if t.description else "\n")
        w.writerow(t.columns)
        for row in t.rows:
            w.writerow([_csv_cell(v) for v in row])
    return buf.getvalue().encode()
