"""JSON run reports with a companion per-slice CSV."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Mapping

from .evaluation import MODELS, SegmentationReport, SliceScore

SCHEMA = "1"
CSV_HEADER = ("slice", "dice_mf", "dice_rf", "dice_combined")


def report_to_dict(report: SegmentationReport) -> dict:
    return {
        "schema": SCHEMA,
        "per_slice": [
            {"slice": s.slice, "dice_mf": s.dice_mf, "dice_rf": s.dice_rf, "dice_combined": s.dice_combined}
            for s in report.per_slice
        ],
        "overall_mean": {m: report.overall_mean.get(m) for m in MODELS},
        "overall_pooled": {m: report.overall_pooled.get(m) for m in MODELS},
        "config": report.config,
        "wall_seconds": report.wall_seconds,
        "warnings": [{"slice": k, "message": msg} for k, msg in report.warnings],
    }


def report_from_dict(d: Mapping) -> SegmentationReport:
    if str(d.get("schema")) != SCHEMA:
        raise ValueError(f"unsupported report schema {d.get('schema')!r}")
    return SegmentationReport(
        per_slice=[
            SliceScore(s["slice"], s["dice_mf"], s["dice_rf"], s["dice_combined"]) for s in d["per_slice"]
        ],
        overall_mean=dict(d["overall_mean"]),
        overall_pooled=dict(d["overall_pooled"]),
        config=dict(d.get("config", {})),
        wall_seconds=d.get("wall_seconds"),
        warnings=[(w["slice"], w["message"]) for w in d.get("warnings", [])],
    )


def _clean(o):
    # Infinite forest lifetimes are written as the string "inf".
    if isinstance(o, float) and math.isinf(o):
        return "inf" if o > 0 else "-inf"
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return o


def dumps(d: Mapping) -> str:
    return json.dumps(_clean(d), indent=2, sort_keys=True, allow_nan=False) + "\n"


def per_slice_csv(report: SegmentationReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for s in report.per_slice:
        w.writerow([s.slice] + ["" if v is None else repr(v) for v in (s.dice_mf, s.dice_rf, s.dice_combined)])
    return buf.getvalue()


def read_per_slice_csv(path) -> list[SliceScore]:
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    conv = lambda v: float(v) if v != "" else None  # noqa: E731
    return [SliceScore(int(r["slice"]), conv(r["dice_mf"]), conv(r["dice_rf"]), float(r["dice_combined"])) for r in rows]


def csv_path(path) -> Path:
    return Path(path).with_suffix(".csv")


def write_report(report: SegmentationReport, path):
    """Write ``path`` (JSON) and the per-slice CSV next to it."""
    path = Path(path)
    path.write_text(dumps(report_to_dict(report)))
    csv_path(path).write_text(per_slice_csv(report))


def read_report(path) -> SegmentationReport:
    return report_from_dict(json.loads(Path(path).read_text()))


def write_experiments_report(reports: Mapping[str, SegmentationReport], path, summary: Mapping | None = None):
    """One JSON document holding a report per mode; one CSV per mode beside it."""
    path = Path(path)
    doc = {
        "schema": SCHEMA,
        "modes": {mode: report_to_dict(r) for mode, r in reports.items()},
    }
    if summary is not None:
        doc["summary"] = summary
    path.write_text(dumps(doc))
    for mode, r in reports.items():
        path.with_name(f"{path.stem}_{mode}.csv").write_text(per_slice_csv(r))
