"""Dice scoring, per-slice reports and cohort aggregation."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import InvalidInputError, as_mask

MODELS = ("mf", "rf", "combined")


class EmptyMasksWarning(UserWarning):
    """Dice of two empty masks was requested."""


def dice(a, b) -> float:
    """``2|a & b| / (|a| + |b|)``; two empty masks score 1.0 with a warning."""
    a = as_mask(a)
    b = as_mask(b)
    if a.shape != b.shape:
        raise InvalidInputError(f"mask shapes differ: {a.shape} vs {b.shape}")
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        warnings.warn("dice of two empty masks taken as 1.0", EmptyMasksWarning, stacklevel=2)
        return 1.0
    return 2 * int((a & b).sum()) / total


@dataclass(frozen=True)
class SliceScore:
    slice: int  # 1-based slice index
    dice_mf: Optional[float]
    dice_rf: Optional[float]
    dice_combined: float


@dataclass
class SegmentationReport:
    per_slice: list[SliceScore]
    overall_mean: dict[str, Optional[float]]
    overall_pooled: dict[str, Optional[float]]
    config: dict = field(default_factory=dict)
    wall_seconds: Optional[float] = None
    warnings: list[tuple[int, str]] = field(default_factory=list)

    @property
    def mode(self) -> Optional[str]:
        return self.config.get("mode")


def _pooled(pred: Sequence[np.ndarray], truth: Sequence[np.ndarray]) -> float:
    return dice(
        np.concatenate([as_mask(p).ravel() for p in pred])[None, :],
        np.concatenate([as_mask(t).ravel() for t in truth])[None, :],
    )


def score_slices(
    combined: Sequence[np.ndarray],
    truth: Sequence[np.ndarray],
    mf: Optional[Sequence[np.ndarray]] = None,
    rf: Optional[Sequence[np.ndarray]] = None,
    config: Optional[dict] = None,
    wall_seconds: Optional[float] = None,
    slice_warnings: Sequence[tuple[int, str]] = (),
) -> SegmentationReport:
    """Score slices 2..N of a segmented stack against ground truth.

    All sequences are indexed from slice 1; entry 0 (the labeled slice) is
    ignored. ``mf``/``rf`` may be ``None`` when per-model masks are absent.
    """
    n = len(truth)
    if n < 2 or len(combined) != n:
        raise InvalidInputError("need predicted and true masks for at least 2 slices")
    preds = {"combined": combined, "mf": mf, "rf": rf}
    for name, seq in preds.items():
        if seq is not None and len(seq) != n:
            raise InvalidInputError(f"{name} masks: expected {n}, got {len(seq)}")

    per_slice = []
    for k in range(1, n):
        d = {m: (dice(preds[m][k], truth[k]) if preds[m] is not None else None) for m in MODELS}
        per_slice.append(SliceScore(k + 1, d["mf"], d["rf"], d["combined"]))

    overall_mean, overall_pooled = {}, {}
    for m in MODELS:
        if preds[m] is None:
            overall_mean[m] = overall_pooled[m] = None
            continue
        overall_mean[m] = float(np.mean([getattr(s, f"dice_{m}") for s in per_slice]))
        overall_pooled[m] = _pooled(preds[m][1:], truth[1:])
    return SegmentationReport(
        per_slice=per_slice,
        overall_mean=overall_mean,
        overall_pooled=overall_pooled,
        config=dict(config or {}),
        wall_seconds=wall_seconds,
        warnings=list(slice_warnings),
    )


@dataclass(frozen=True)
class CohortEntry:
    mean: float
    sd: float
    n: int

    def __str__(self) -> str:
        return f"{self.mean:.3f} ± {self.sd:.3f}"


def aggregate(reports: Sequence[SegmentationReport]) -> dict[str, dict[str, CohortEntry]]:
    """Mean and population standard deviation of ``overall_mean`` per mode and model."""
    if not reports:
        raise InvalidInputError("aggregate needs at least one report")
    grouped: dict[str, dict[str, list[float]]] = {}
    for r in reports:
        by_model = grouped.setdefault(r.mode or "unknown", {})
        for m in MODELS:
            v = r.overall_mean.get(m)
            if v is not None:
                by_model.setdefault(m, []).append(v)
    return {
        mode: {
            m: CohortEntry(float(np.mean(v)), float(np.std(v)), len(v)) for m, v in by_model.items()
        }
        for mode, by_model in grouped.items()
    }


def format_cohort(summary: dict[str, dict[str, CohortEntry]]) -> str:
    """Plain-text table, one row per mode."""
    lines = [f"{'mode':<12}" + "".join(f"{m:>18}" for m in MODELS)]
    for mode, by_model in summary.items():
        cells = "".join(f"{str(by_model[m]) if m in by_model else '-':>18}" for m in MODELS)
        lines.append(f"{mode:<12}{cells}")
    return "\n".join(lines)
