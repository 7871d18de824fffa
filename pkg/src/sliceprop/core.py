"""Image, mask and per-pixel feature primitives.

Masks are plain 2D boolean numpy arrays of shape ``(height, width)``; images
are wrapped in :class:`ImageSlice` so that the bit depth travels with the
pixels.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

N_FEATURES = 3


class InvalidInputError(ValueError):
    """Raised when an argument violates an operation's preconditions."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ImageSlice:
    """One grayscale slice with integer intensities."""

    pixels: np.ndarray
    bit_depth: int = 8

    def __post_init__(self):
        if self.bit_depth not in (8, 16):
            raise InvalidInputError(f"bit_depth must be 8 or 16, got {self.bit_depth}")
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise InvalidInputError(f"slice must be 2D, got shape {px.shape}")
        if px.size:
            if not np.issubdtype(px.dtype, np.integer):
                raise InvalidInputError("slice intensities must be integers")
            if int(px.min()) < 0 or int(px.max()) > 2 ** self.bit_depth - 1:
                raise InvalidInputError(
                    f"intensities must lie in [0, {2 ** self.bit_depth - 1}]"
                )
        px = px.astype(np.uint16 if self.bit_depth == 16 else np.uint8)
        object.__setattr__(self, "pixels", _frozen(px))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape


@dataclass(frozen=True)
class CineStack:
    """Ordered slices sharing one geometry; the first is the labeled one."""

    slices: tuple[ImageSlice, ...]

    def __post_init__(self):
        slices = tuple(self.slices)
        if len(slices) < 2:
            raise InvalidInputError("a stack needs at least 2 slices")
        first = slices[0]
        for k, s in enumerate(slices[1:], start=2):
            if s.shape != first.shape or s.bit_depth != first.bit_depth:
                raise InvalidInputError(
                    f"slice {k} has shape {s.shape}/{s.bit_depth}-bit, "
                    f"expected {first.shape}/{first.bit_depth}-bit"
                )
        object.__setattr__(self, "slices", slices)

    def __len__(self) -> int:
        return len(self.slices)

    def __getitem__(self, k: int) -> ImageSlice:
        return self.slices[k]

    @property
    def shape(self) -> tuple[int, int]:
        return self.slices[0].shape

    @property
    def max_intensity(self) -> int:
        return max(int(s.pixels.max()) for s in self.slices)


@dataclass(frozen=True)
class FeatureMatrix:
    """Rows of normalized ``(x, y, intensity)`` features in row-major pixel order.

    ``shape`` records the ``(height, width)`` of the slice the rows came from,
    or ``None`` for free-standing feature sets.
    """

    values: np.ndarray
    labels: Optional[np.ndarray] = None
    shape: Optional[tuple[int, int]] = None

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise InvalidInputError(f"features must be 2D, got shape {v.shape}")
        object.__setattr__(self, "values", _frozen(v))
        if self.labels is not None:
            lab = np.array(self.labels)
            if lab.shape != (v.shape[0],):
                raise InvalidInputError("one label per row is required")
            if lab.size and not np.isin(lab, (0, 1)).all():
                raise InvalidInputError("labels must be 0 or 1")
            object.__setattr__(self, "labels", _frozen(lab.astype(np.int8)))
        if self.shape is not None:
            h, w = self.shape
            if h * w != v.shape[0]:
                raise InvalidInputError("row count does not match the slice shape")
            object.__setattr__(self, "shape", (int(h), int(w)))

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def is_labeled(self) -> bool:
        return self.labels is not None


def extract_features(image: ImageSlice, stack_max_intensity: int) -> FeatureMatrix:
    """Per-pixel features ``(c/(w-1), r/(h-1), raw/stack_max)``, row-major."""
    h, w = image.shape
    if h * w == 0:
        raise InvalidInputError("zero-area slice")
    if h == 1 or w == 1:
        raise InvalidInputError("width and height must both be at least 2")
    if stack_max_intensity < 1 or stack_max_intensity < int(image.pixels.max()):
        raise InvalidInputError(
            f"stack_max_intensity={stack_max_intensity} is below 1 or below the slice maximum"
        )
    rows, cols = np.mgrid[0:h, 0:w]
    values = np.empty((h * w, N_FEATURES))
    values[:, 0] = cols.ravel() / (w - 1)
    values[:, 1] = rows.ravel() / (h - 1)
    values[:, 2] = image.pixels.ravel() / stack_max_intensity
    return FeatureMatrix(values, shape=(h, w))


def attach_labels(features: FeatureMatrix, mask: np.ndarray) -> FeatureMatrix:
    mask = as_mask(mask)
    if features.shape is None or features.shape != mask.shape:
        raise InvalidInputError(
            f"mask shape {mask.shape} does not match feature source {features.shape}"
        )
    return FeatureMatrix(features.values, labels=mask.ravel().astype(np.int8), shape=features.shape)


def as_mask(mask, shape: Optional[Sequence[int]] = None) -> np.ndarray:
    """Validate and coerce ``mask`` into a 2D boolean array."""
    m = np.asarray(mask)
    if m.ndim != 2:
        raise InvalidInputError(f"mask must be 2D, got shape {m.shape}")
    if m.dtype != bool:
        if m.size and not np.isin(m, (0, 1)).all():
            raise InvalidInputError("mask values must be 0 or 1")
        m = m.astype(bool)
    if shape is not None and m.shape != tuple(shape):
        raise InvalidInputError(f"mask shape {m.shape} != expected {tuple(shape)}")
    return m


def decide_mask(prob_lv, width: int, height: int) -> np.ndarray:
    """Label a pixel LV when ``P(LV) >= P(Bg)``, i.e. ``P(LV) >= 0.5``."""
    p = np.asarray(prob_lv, dtype=np.float64)
    if p.shape != (width * height,):
        raise InvalidInputError(f"expected {width * height} probabilities, got {p.shape}")
    if np.isnan(p).any() or (p < 0).any() or (p > 1).any():
        raise InvalidInputError("probabilities must lie in [0, 1]")
    return (p >= 0.5).reshape(height, width)


def mask_union(a, b) -> np.ndarray:
    a = as_mask(a)
    b = as_mask(b)
    if a.shape != b.shape:
        raise InvalidInputError(f"mask shapes differ: {a.shape} vs {b.shape}")
    return a | b
