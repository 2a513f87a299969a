"""Report envelopes and their JSON / CSV serialisation.

Both formats are byte-stable for a fixed configuration: JSON keys are
sorted, floats are written with ``repr`` and non-finite values as the
strings ``"inf"``, ``"-inf"`` and ``"nan"``.
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import __version__

STATUSES = ("pass", "fail", "estimate")


@dataclass
class CheckRecord:
    """One check or estimate.

    Failed records keep their violating inputs verbatim in ``witnesses``.
    """

    name: str
    status: str
    values: dict = field(default_factory=dict)
    slacks: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"status must be one of {STATUSES}")


@dataclass
class ReportEnvelope:
    command: str
    config: dict
    records: list = field(default_factory=list)
    table: list = field(default_factory=list)
    columns: list = field(default_factory=list)
    wall_time: float = None

    @property
    def failed(self):
        return any(r.status == "fail" for r in self.records)

    def to_dict(self):
        doc = {
            "tool": "orlicz-lab",
            "version": __version__,
            "command": self.command,
            "config": self.config,
            "checks": [
                {"name": r.name, "status": r.status, "values": r.values,
                 "slacks": r.slacks, "witnesses": r.witnesses}
                for r in self.records
            ],
            "summary": {
                "total": len(self.records),
                "failed": sum(r.status == "fail" for r in self.records),
                "passed": sum(r.status == "pass" for r in self.records),
                "estimates": sum(r.status == "estimate" for r in self.records),
            },
        }
        if self.table:
            doc["table"] = {"columns": self.columns, "rows": self.table}
        if self.wall_time is not None:
            doc["wall_time_seconds"] = self.wall_time
        return doc


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def to_json(report):
    return json.dumps(_clean(report.to_dict()), sort_keys=True, indent=2) + "\n"


def _cell(x):
    x = _clean(x)
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, (list, dict)):
        return json.dumps(x, sort_keys=True)
    return str(x)


def to_csv(report):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if report.table:
        writer.writerow(report.columns)
        for row in report.table:
            writer.writerow([_cell(row[c]) for c in report.columns])
        return buf.getvalue()
    value_keys = sorted({k for r in report.records for k in r.values})
    slack_keys = sorted({k for r in report.records for k in r.slacks})
    writer.writerow(["name", "status"] + value_keys + [f"slack_{k}" for k in slack_keys])
    for r in report.records:
        writer.writerow([r.name, r.status]
                        + [_cell(r.values.get(k, "")) for k in value_keys]
                        + [_cell(r.slacks.get(k, "")) for k in slack_keys])
    return buf.getvalue()


def emit(report, fmt="json", path=None, stream=None):
    """Write the report to ``path`` (or ``stream``) and return the text."""
    if fmt not in ("json", "csv"):
        raise ValueError(f"unknown format {fmt!r}")
    text = to_json(report) if fmt == "json" else to_csv(report)
    if path:
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write report to {path}: {exc.strerror}") from exc
    elif stream is not None:
        stream.write(text)
    return text
