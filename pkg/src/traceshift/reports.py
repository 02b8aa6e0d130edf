"""Verification reports: tagged check records, CSV emission, plot data.

Every check record carries a tag from the closed registry below; the
registry mirrors the identity/bound map the suites implement, and any
unknown tag is a harness defect.  CSV bodies contain no timestamps, so a
fixed configuration and seed reproduce them byte for byte; wall-clock
metadata lives only in the JSON sidecars.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field

from .errors import SeriesLookupError, TraceshiftError
from .storage import atomic_write_text

CHECK_TAGS = frozenset({
    "moi-derivative",
    "moi-norm-ratio",
    "moi-trace-bound",
    "cyclicity-reduction",
    "perturbation-anchor",
    "counting-first-order",
    "remainder-bound",
    "remainder-taylor-exactness",
    "ssf-l1-bound",
    "ssf-reconstruction",
    "ssf-uniqueness",
    "ssf-growth",
    "symbol-expansion",
    "resolvent-expansion",
    "resolvent-transfer",
    "first-order-resolvent-bound",
    "bump-partition",
    "lemma-sup-ratio",
    "class-witness",
    "determinism",
})

VERDICTS = ("pass", "info", "fail")


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


@dataclass(frozen=True)
class CheckRecord:
    tag: str
    fixture: str
    value: float
    reference: float
    verdict: str
    detail: str = ""

    def __post_init__(self):
        if self.tag not in CHECK_TAGS:
            raise TraceshiftError(f"unknown check tag {self.tag!r}; registry is closed")
        if self.verdict not in VERDICTS:
            raise TraceshiftError(f"unknown verdict {self.verdict!r}")


@dataclass
class VerificationReport:
    name: str
    records: list[CheckRecord] = field(default_factory=list)
    series: dict[str, tuple[tuple[str, ...], list[tuple]]] = field(default_factory=dict)
    constants_snapshot: dict = field(default_factory=dict)

    def add(self, tag: str, fixture: str, value: float, reference: float,
            verdict: str, detail: str = "") -> CheckRecord:
        rec = CheckRecord(tag, fixture, float(value), float(reference), verdict, detail)
        self.records.append(rec)
        return rec

    def add_series(self, key: str, header: tuple[str, ...], rows: list[tuple]) -> None:
        self.series[key] = (header, list(rows))

    def extend_series(self, key: str, header: tuple[str, ...], rows) -> None:
        if key not in self.series:
            self.series[key] = (header, [])
        self.series[key][1].extend(rows)

    def summary(self) -> dict:
        counts = {v: 0 for v in VERDICTS}
        for rec in self.records:
            counts[rec.verdict] += 1
        return counts

    @property
    def any_fail(self) -> bool:
        return any(rec.verdict == "fail" for rec in self.records)

    def to_csv_text(self) -> str:
        lines = ["tag,fixture,value,reference,verdict,detail"]
        for rec in self.records:
            detail = rec.detail.replace(",", ";").replace("\n", " ")
            lines.append(",".join([rec.tag, rec.fixture, _fmt(rec.value),
                                   _fmt(rec.reference), rec.verdict, detail]))
        return "\n".join(lines) + "\n"

    def write(self, outdir: str) -> str:
        """Write <name>.csv (deterministic body) plus a JSON sidecar."""
        os.makedirs(outdir, exist_ok=True)
        csv_path = os.path.join(outdir, f"{self.name}.csv")
        atomic_write_text(csv_path, self.to_csv_text())
        sidecar = {
            "name": self.name,
            "summary": self.summary(),
            "constants": self.constants_snapshot,
            "generated_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
        }
        atomic_write_text(os.path.join(outdir, f"{self.name}.json"),
                          json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
        return csv_path


PLOT_KINDS = {
    "ssf": "ssf",
    "bound-margin": "bound_margin",
    "growth": "growth",
    "ratios": "ratios",
}


def emit_plotdata(report: VerificationReport, kind: str, outdir: str) -> str:
    """Write one plot-data CSV (stable column order, documented header)."""
    if kind not in PLOT_KINDS:
        raise SeriesLookupError(f"unknown plot kind {kind!r}")
    key = PLOT_KINDS[kind]
    if key not in report.series:
        raise SeriesLookupError(f"report {report.name!r} has no series {key!r}")
    header, rows = report.series[key]
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, f"{report.name}-{key}.csv")
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    atomic_write_text(path, "\n".join(lines) + "\n")
    return path
