"""Seeded synthetic slice stacks with exact LV ground truth.

Each slice holds a bright disk (the LV) inside a darker ring, drifting a few
pixels and shrinking from slice to slice, over a smoothly varying background
with slowly moving distractor blobs, some of which are as bright as the LV.
From slice 2 on, two dark papillary spots sit inside the LV (the basal first
slice has none); they belong to the ground truth but look like the ring, so
per-pixel classifiers leave holes there.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CineStack, ImageSlice, InvalidInputError


@dataclass(frozen=True)
class PhantomParams:
    size: int = 128
    n_slices: int = 10
    r0: float = 22.0
    shrink: float = 1.2
    drift: float = 2.0
    lv_mean: float = 185.0
    lv_sd: float = 10.0
    ring_width: float = 5.0
    ring_intensity: float = 85.0
    bg_mean: float = 60.0
    bg_texture: float = 20.0
    n_blobs: int = 6
    blob_radius: tuple[float, float] = (4.0, 9.0)
    blob_intensity: tuple[float, float] = (110.0, 200.0)
    papillary_frac: float = 0.15  # papillary spot radius relative to the LV radius
    blob_speed: float = 1.5
    papillary_turn: float = 0.35  # rotation of the papillary spots per slice, radians
    noise_sd: float = 20.0
    seed: int = 42

    def validate(self):
        if self.size < 16:
            raise InvalidInputError("size must be at least 16")
        if self.n_slices < 2:
            raise InvalidInputError("n_slices must be at least 2")
        if self.r0 - self.shrink * (self.n_slices - 1) < 4:
            raise InvalidInputError("the LV radius would drop below 4 px")
        if self.shrink < 0:
            raise InvalidInputError("shrink must be non-negative")
        if not 0 <= self.drift <= 3:
            raise InvalidInputError("drift must lie in [0, 3]")
        if 2 * (self.r0 + self.ring_width + 3 * self.n_slices) > self.size:
            raise InvalidInputError("the LV does not fit in the image")
        if self.noise_sd < 0 or self.lv_sd < 0:
            raise InvalidInputError("noise levels must be non-negative")


def disk(size: int, cx: float, cy: float, r: float) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    return (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r


def _smooth_background(params: PhantomParams, rng: np.random.Generator) -> np.ndarray:
    """Sum of a few wide Gaussian bumps around ``bg_mean``."""
    n = params.size
    yy, xx = np.mgrid[0:n, 0:n]
    field = np.full((n, n), params.bg_mean)
    for _ in range(5):
        cx, cy = rng.uniform(0, n, 2)
        s = rng.uniform(0.15, 0.35) * n
        amp = rng.uniform(-1, 1) * params.bg_texture
        field += amp * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * s * s))
    return field


def generate_phantom(params: PhantomParams = PhantomParams()) -> tuple[CineStack, list[np.ndarray]]:
    """Return the slice stack and the per-slice ground-truth LV masks."""
    params.validate()
    rng = np.random.default_rng(params.seed)
    n = params.size

    centers = [np.array([n / 2, n / 2]) + rng.uniform(-3, 3, 2)]
    for _ in range(params.n_slices - 1):
        angle = rng.uniform(0, 2 * math.pi)
        step = rng.uniform(0, params.drift)
        centers.append(centers[-1] + step * np.array([math.cos(angle), math.sin(angle)]))
    radii = [params.r0 - params.shrink * k for k in range(params.n_slices)]

    background = _smooth_background(params, rng)
    lv_texture = params.lv_mean + params.lv_sd * rng.standard_normal((n, n))

    # Distractors stay inside the image and never touch any slice's LV or ring.
    keep_out = max(radii) + params.ring_width + 3
    steps = np.arange(params.n_slices)[:, None]
    blobs = []
    for _ in range(200 * max(params.n_blobs, 1)):
        if len(blobs) == params.n_blobs:
            break
        br = rng.uniform(*params.blob_radius)
        bc = rng.uniform(br, n - 1 - br, 2)
        velocity = rng.uniform(-params.blob_speed, params.blob_speed, 2)
        path = bc + steps * velocity
        if (path < br).any() or (path > n - 1 - br).any():
            continue
        if (np.hypot(*(path - np.array(centers)).T) < keep_out + br).any():
            continue
        if any(np.hypot(*(bc - c)) < br + r + 2 for c, r, _, _ in blobs):
            continue
        blobs.append((bc, br, rng.uniform(*params.blob_intensity), velocity))
    papillary_angle = rng.uniform(0, 2 * math.pi)

    slices, truths = [], []
    for k in range(params.n_slices):
        img = background.copy()
        for bc, br, level, velocity in blobs:
            x, y = bc + k * velocity
            img[disk(n, x, y, br)] = level
        cx, cy = centers[k]
        r = radii[k]
        img[disk(n, cx, cy, r + params.ring_width)] = params.ring_intensity
        lv = disk(n, cx, cy, r)
        img[lv] = lv_texture[lv]
        turn = papillary_angle + k * params.papillary_turn
        for a in (turn, turn + 0.6 * math.pi) if k > 0 else ():
            px, py = cx + 0.55 * r * math.cos(a), cy + 0.55 * r * math.sin(a)
            img[disk(n, px, py, params.papillary_frac * r) & lv] = params.ring_intensity
        img += params.noise_sd * rng.standard_normal((n, n))
        slices.append(ImageSlice(np.clip(np.rint(img), 0, 255).astype(np.uint8)))
        truths.append(lv)
    return CineStack(tuple(slices)), truths
