"""Verification reports: rows, summaries and deterministic serialisation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from .errors import IoError

STATUSES = ("pass", "fail", "skipped-budget")
ROW_KEYS = ("check", "inputs", "claim", "observed", "margin", "status")


def canon(v: Any) -> Any:
    """Plain JSON value with fractions as ``"num/den"`` strings."""
    if isinstance(v, bool) or v is None or isinstance(v, str):
        return v
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, int):
        return int(v)
    if isinstance(v, float):
        return v if math.isfinite(v) else repr(v)
    if hasattr(v, "item"):  # numpy scalar
        return canon(v.item())
    if isinstance(v, dict):
        return {str(k): canon(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [canon(x) for x in v]
    return str(v)


@dataclass
class Row:
    check: str
    inputs: str
    claim: str
    observed: str
    margin: float | str
    status: str

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"bad status {self.status!r}")
        self.observed = str(self.observed)
        self.margin = canon(self.margin)

    @classmethod
    def from_dict(cls, d: dict) -> "Row":
        return cls(*(d[k] for k in ROW_KEYS))

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ROW_KEYS}


@dataclass
class Report:
    suite: str
    config: dict
    rows: list[Row] = field(default_factory=list)
    version: str = ""
    wall_time: float | None = None

    def __post_init__(self):
        self.config = canon(self.config)

    def add(self, check, inputs, claim, observed, margin, ok: bool | None) -> None:
        status = "skipped-budget" if ok is None else ("pass" if ok else "fail")
        self.rows.append(Row(check, str(inputs), str(claim), str(observed), margin, status))

    def extend(self, dicts) -> None:
        self.rows.extend(Row.from_dict(d) for d in dicts)

    def summary(self) -> dict:
        out = {"total": len(self.rows)}
        for s in STATUSES:
            out[s] = sum(r.status == s for r in self.rows)
        return out

    @property
    def ok(self) -> bool:
        return self.summary()["fail"] == 0

    def __eq__(self, other) -> bool:
        return (isinstance(other, Report) and self.suite == other.suite and self.config == other.config
                and self.rows == other.rows and self.version == other.version)


def _summary_line(rep: Report) -> str:
    s = rep.summary()
    head = "PASS" if s["fail"] == 0 else "FAIL"
    line = f"{head} {s['pass']}/{s['total']}"
    if s["skipped-budget"]:
        line += f" ({s['skipped-budget']} skipped-budget)"
    return line


def emit_report(rep: Report, fmt: str = "json", timing: bool = False) -> bytes:
    """Serialise with a fixed field order; wall time only when ``timing`` is set."""
    if fmt == "json":
        doc = {"suite": rep.suite, "version": rep.version, "config": rep.config,
               "rows": [r.to_dict() for r in rep.rows], "summary": rep.summary()}
        if timing and rep.wall_time is not None:
            doc["wall_time"] = round(rep.wall_time, 3)
        return (json.dumps(doc, indent=2, ensure_ascii=False) + "\n").encode()
    if fmt == "text":
        lines = [f"suite {rep.suite} (liquidkit {rep.version})"]
        lines += [f"  {k} = {v}" for k, v in rep.config.items()]
        for r in rep.rows:
            lines.append(f"[{r.status}] {r.check}: {r.inputs} | claim {r.claim} | observed {r.observed}"
                         f" | margin {r.margin}")
        if timing and rep.wall_time is not None:
            lines.append(f"wall time {rep.wall_time:.3f} s")
        lines.append(_summary_line(rep))
        return ("\n".join(lines) + "\n").encode()
    raise ValueError(f"unknown format {fmt!r}")


def parse_report(data: bytes | str) -> Report:
    doc = json.loads(data)
    rep = Report(doc["suite"], doc["config"], [Row.from_dict(r) for r in doc["rows"]], doc.get("version", ""),
                 doc.get("wall_time"))
    return rep


def write_report(rep: Report, path: str, fmt: str = "json", timing: bool = False) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(emit_report(rep, fmt, timing))
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def read_report(path: str) -> Report:
    try:
        with open(path, "rb") as fh:
            return parse_report(fh.read())
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
