"""Slice-to-slice label propagation with a static Mondrian forest and a refit random forest.

Both forests learn slice 1 from its manual mask. Each later slice is labeled
by thresholding both forests' LV probabilities, optionally post-processing
each mask against the previous slice's result, and taking the union. In
``full`` mode the random forest is then refit on the Mondrian forest's mask
of the slice just segmented; the Mondrian forest is never refit.
"""
from __future__ import annotations

import dataclasses
import enum
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    CineStack,
    InvalidInputError,
    as_mask,
    attach_labels,
    decide_mask,
    extract_features,
    mask_union,
)
from .mforest import MFParams, MondrianForestModel, mf_fit, mf_predict_proba
from .postprocess import post_process_with_status
from .rforest import RandomForestModel, RFParams, rf_fit, rf_predict_proba

log = logging.getLogger(__name__)


class PipelineMode(str, enum.Enum):
    BASIC = "basic"
    POSTPROCESS = "postprocess"
    FULL = "full"

    @property
    def post_processes(self) -> bool:
        return self is not PipelineMode.BASIC


@dataclass(frozen=True)
class PipelineConfig:
    """Run configuration.

    ``seed`` overrides the ``seed`` fields of both parameter sets: the two
    forests (and every refit of the random forest) get independent streams
    derived from it.
    """

    rf_params: RFParams = RFParams()
    mf_params: MFParams = MFParams()
    mode: PipelineMode = PipelineMode.FULL
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", PipelineMode(self.mode))

    def as_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "seed": self.seed,
            "rf_params": dataclasses.asdict(self.rf_params),
            "mf_params": dataclasses.asdict(self.mf_params),
        }


def derive_seed(seed: int, *path: int) -> int:
    return int(np.random.SeedSequence([seed, *path]).generate_state(1, np.uint64)[0])


_MF_STREAM = 1
_RF_STREAM = 2


@dataclass
class RFTraining:
    """One random-forest fit: which slice (1-based) and which labels it learned."""

    slice: int
    source: str  # "manual" for the first mask, "mf" for a Mondrian-forest mask
    seed: int
    model: RandomForestModel = field(repr=False)


@dataclass
class SegmentationResult:
    masks: list[np.ndarray]
    mf_masks: list[np.ndarray]
    rf_masks: list[np.ndarray]
    warnings: list[tuple[int, str]]
    mf_model: MondrianForestModel = field(repr=False)
    rf_trainings: list[RFTraining] = field(repr=False)
    # rf_used[k] indexes rf_trainings for the model that inferred slice k+1 (None for slice 1)
    rf_used: list[Optional[int]]
    config: PipelineConfig


def segment_stack(stack: CineStack, first_lv, config: PipelineConfig = PipelineConfig()) -> SegmentationResult:
    first_lv = as_mask(first_lv)
    if first_lv.shape != stack.shape:
        raise InvalidInputError(f"first mask shape {first_lv.shape} != slice shape {stack.shape}")
    if not first_lv.any():
        raise InvalidInputError("the first mask is empty")
    h, w = stack.shape
    mode = config.mode
    vmax = max(stack.max_intensity, 1)
    features = [extract_features(s, vmax) for s in stack.slices]

    train = attach_labels(features[0], first_lv)
    mf_params = dataclasses.replace(config.mf_params, seed=derive_seed(config.seed, _MF_STREAM))
    mf_model = mf_fit(train, mf_params)
    rf_seed = derive_seed(config.seed, _RF_STREAM, 1)
    rf_model = rf_fit(train, dataclasses.replace(config.rf_params, seed=rf_seed))
    trainings = [RFTraining(1, "manual", rf_seed, rf_model)]

    masks, mf_masks, rf_masks = [first_lv], [first_lv], [first_lv]
    rf_used: list[Optional[int]] = [None]
    warnings: list[tuple[int, str]] = []

    for k in range(1, len(stack)):
        slice_no = k + 1
        X = features[k].values
        per_model = {}
        for name, proba in (("mf", mf_predict_proba(mf_model, X)), ("rf", rf_predict_proba(rf_model, X))):
            raw = decide_mask(proba, w, h)
            if mode.post_processes:
                out, fell_back = post_process_with_status(raw, masks[-1])
                if fell_back:
                    warnings.append((slice_no, f"{name}: no region overlaps the previous LV; kept it"))
            else:
                out = raw
                if not raw.any():
                    warnings.append((slice_no, f"{name}: empty inference"))
            per_model[name] = out
        rf_used.append(len(trainings) - 1)
        combined = mask_union(per_model["mf"], per_model["rf"])
        masks.append(combined)
        mf_masks.append(per_model["mf"])
        rf_masks.append(per_model["rf"])
        log.debug("slice %d: %d LV pixels", slice_no, int(combined.sum()))

        # The refit after the last slice would never be used.
        if mode is PipelineMode.FULL and slice_no < len(stack):
            rf_seed = derive_seed(config.seed, _RF_STREAM, slice_no)
            rf_model = rf_fit(
                attach_labels(features[k], per_model["mf"]),
                dataclasses.replace(config.rf_params, seed=rf_seed),
            )
            trainings.append(RFTraining(slice_no, "mf", rf_seed, rf_model))

    return SegmentationResult(
        masks=masks,
        mf_masks=mf_masks,
        rf_masks=rf_masks,
        warnings=warnings,
        mf_model=mf_model,
        rf_trainings=trainings,
        rf_used=rf_used,
        config=config,
    )


def run_experiments(stack: CineStack, first_lv, base_config: PipelineConfig = PipelineConfig()) -> dict[PipelineMode, SegmentationResult]:
    """Run all three modes with identical seeds."""
    return {
        mode: segment_stack(stack, first_lv, dataclasses.replace(base_config, mode=mode))
        for mode in PipelineMode
    }
