"""Result rows, CSV output and the metadata sidecar."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

CSV_COLUMNS = ("method", "epsilon", "theta_db", "gamma", "value", "ci", "runtime_ms")
MOMENT_COLUMNS = ("method", "epsilon", "theta_db", "b", "value", "ci", "runtime_ms")


@dataclass(frozen=True)
class ResultRow:
    method: str
    epsilon: float
    theta_db: float
    gamma: float
    value: float
    ci: float | None = None
    runtime_ms: float = 0.0

    @property
    def failed(self) -> bool:
        return not math.isfinite(self.value)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


@dataclass
class ResultTable:
    rows: list[ResultRow] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    columns: tuple[str, ...] = CSV_COLUMNS

    def add(self, row: ResultRow) -> None:
        if not row.failed and not 0.0 <= row.value <= 1.0 and self.columns == CSV_COLUMNS:
            raise ValueError(f"probability outside [0, 1]: {row}")
        self.rows.append(row)

    def select(self, method: str, epsilon: float | None = None):
        return [r for r in self.rows
                if r.method == method and (epsilon is None or math.isclose(r.epsilon, epsilon))]

    def lookup(self) -> dict:
        return {(r.method, r.epsilon, r.theta_db, r.gamma): r.value for r in self.rows}

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([r.method, _fmt(r.epsilon), _fmt(r.theta_db), _fmt(r.gamma),
                            _fmt(r.value), _fmt(r.ci), f"{r.runtime_ms:.3f}"])

    def write_metadata(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.metadata, indent=2, sort_keys=True) + "\n")


def read_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
