# Benchmark Report Service

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, List, Optional, Sequence


@dataclass
class ResultRow:
    instance_id: str
    solver: str
    problem: str = "pmpdc"
    objective: Optional[float] = None
    bound: Optional[float] = None
    verdict: str = ""
    reference: Optional[float] = None
    gap: Optional[float] = None
    wall_time: Optional[float] = None
    seed: Optional[int] = None
    error: str = ""

    def sort_key(self):
        return (self.instance_id, self.solver)


TIMING_COLUMNS = {"wall_time"}


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if value.is_integer():
            return str(int(value))
        return f"{value:.6f}"
    return str(value)


class ReportService:
    def __init__(self, include_timing: bool = False):
        self.include_timing = include_timing

    def columns(self, rows: Sequence[Any]) -> List[str]:
        if not rows:
            return [f.name for f in fields(ResultRow) if self.include_timing or f.name not in TIMING_COLUMNS]
        names = [f.name for f in fields(rows[0])]
        return [n for n in names if self.include_timing or n not in TIMING_COLUMNS]

    def to_csv(self, rows: Sequence[Any]) -> str:
        cols = self.columns(rows)
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(cols)
        for row in rows:
            writer.writerow([_cell(getattr(row, c)) for c in cols])
        return out.getvalue()

    def to_table(self, rows: Sequence[Any]) -> str:
        cols = self.columns(rows)
        body = [[_cell(getattr(row, c)) for c in cols] for row in rows]
        widths = [max([len(c)] + [len(r[i]) for r in body]) for i, c in enumerate(cols)]
        lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip()]
        lines.append("  ".join("-" * w for w in widths))
        for r in body:
            lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip())
        return "\n".join(lines) + "\n"

    def render(self, rows: Sequence[Any], fmt: str = "table") -> str:
        if fmt == "csv":
            return self.to_csv(rows)
        if fmt == "table":
            return self.to_table(rows)
        raise ValueError(f"unknown format {fmt!r}")

    def key_values(self, record: Dict[str, Any], fmt: str = "table") -> str:
        """Single-solve output as key/value lines (or a two-column CSV)."""
        if fmt == "csv":
            out = io.StringIO()
            writer = csv.writer(out, lineterminator="\n")
            writer.writerow(["key", "value"])
            for k, v in record.items():
                writer.writerow([k, _cell(v)])
            return out.getvalue()
        width = max((len(k) for k in record), default=0)
        return "".join(f"{k.ljust(width)}  {_cell(v)}\n" for k, v in record.items())

    def run_summary(self, config: Dict[str, Any], rows: Sequence[Any]) -> str:
        """Machine-readable summary with parameters, seeds and timings for reproduction."""
        summary = {
            "config": config,
            "rows": len(rows),
            "errors": sum(1 for r in rows if getattr(r, "error", "")),
            "results": [asdict(r) for r in rows],
        }
        return json.dumps(summary, indent=2, sort_keys=True, default=str)
