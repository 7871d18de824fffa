"""Left-ventricle segmentation propagated through a slice stack with a Mondrian
forest and a random forest learned from one manually segmented slice."""
from .core import (
    CineStack,
    FeatureMatrix,
    ImageSlice,
    InvalidInputError,
    attach_labels,
    decide_mask,
    extract_features,
    mask_union,
)
from .evaluation import aggregate, dice, score_slices
from .mforest import MFParams, mf_extend, mf_fit, mf_predict_proba
from .phantom import PhantomParams, generate_phantom
from .pipeline import PipelineConfig, PipelineMode, run_experiments, segment_stack
from .postprocess import convex_hull, fill_contour, fill_convex_polygon, find_contours, post_process
from .rforest import RFParams, rf_fit, rf_predict_proba

__version__ = "0.1.0"

__all__ = [
    "CineStack",
    "FeatureMatrix",
    "ImageSlice",
    "InvalidInputError",
    "MFParams",
    "PhantomParams",
    "PipelineConfig",
    "PipelineMode",
    "RFParams",
    "aggregate",
    "attach_labels",
    "convex_hull",
    "decide_mask",
    "dice",
    "extract_features",
    "fill_contour",
    "fill_convex_polygon",
    "find_contours",
    "generate_phantom",
    "mask_union",
    "mf_extend",
    "mf_fit",
    "mf_predict_proba",
    "post_process",
    "rf_fit",
    "rf_predict_proba",
    "run_experiments",
    "score_slices",
    "segment_stack",
]
