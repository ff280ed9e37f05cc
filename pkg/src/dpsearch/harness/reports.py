"""Report persistence: line-delimited records plus CSV export.

A report is one JSON object per line: a header echoing the raw config
text, one record per (seed, step), then one record per threshold check.
Records are written with sorted keys, so reruns with the same config and
seeds are byte-identical except for fields prefixed ``time_``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

from .. import __version__

TIMING_PREFIX = "time_"


@dataclass
class Report:
    kind: str
    config_echo: str
    records: list[dict] = field(default_factory=list)
    checks: list[dict] = field(default_factory=list)

    def add(self, **record) -> None:
        self.records.append(record)

    def add_check(self, name: str, passed: bool, **detail) -> None:
        self.checks.append({"check": name, "passed": bool(passed), **detail})

    @property
    def all_passed(self) -> bool:
        return all(c["passed"] for c in self.checks)


def write_report(report: Report, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "record": "header",
            "kind": report.kind,
            "library_version": __version__,
            "config_echo": report.config_echo,
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for rec in report.records:
            fh.write(json.dumps({"record": "run", **rec}, sort_keys=True) + "\n")
        for check in report.checks:
            fh.write(json.dumps({"record": "check", **check}, sort_keys=True) + "\n")
    return path


def read_report(path) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def strip_timings(records: list[dict]) -> list[dict]:
    """Drop wall-clock fields; what remains must be reproducible."""
    return [
        {k: v for k, v in rec.items() if not k.startswith(TIMING_PREFIX)}
        for rec in records
    ]


def export_csv(report: Report, path) -> Path:
    """Tabular export of the run records (checks and header omitted)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    keys: list[str] = []
    for rec in report.records:
        for k in rec:
            if k not in keys:
                keys.append(k)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=keys)
        writer.writeheader()
        for rec in report.records:
            writer.writerow({k: rec.get(k, "") for k in keys})
    return path
