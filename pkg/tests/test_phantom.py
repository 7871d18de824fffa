import dataclasses

import numpy as np
import pytest
from scipy import ndimage as ndi

from sliceprop.core import InvalidInputError
from sliceprop.evaluation import dice
from sliceprop.phantom import PhantomParams, disk, generate_phantom
from sliceprop.postprocess import convex_hull, fill_convex_polygon, find_contours


@pytest.fixture(scope="module")
def default_phantom():
    return generate_phantom(PhantomParams(seed=42))


def hull_fill(mask):
    ys, xs = np.nonzero(mask)
    return fill_convex_polygon(convex_hull(list(zip(xs.tolist(), ys.tolist()))), mask.shape[1], mask.shape[0])


def test_static_phantom_has_identical_slices():
    params = PhantomParams(noise_sd=0, drift=0, shrink=0, papillary_frac=0, blob_speed=0, seed=3)
    stack, truth = generate_phantom(params)
    for img, gt in zip(stack.slices[1:], truth[1:]):
        assert np.array_equal(img.pixels, stack[0].pixels)
        assert np.array_equal(gt, truth[0])


def test_areas_decrease(default_phantom):
    _, truth = default_phantom
    areas = [int(t.sum()) for t in truth]
    assert all(a > b for a, b in zip(areas, areas[1:]))


def test_truths_are_convex_connected_and_hole_free(default_phantom):
    _, truth = default_phantom
    for t in truth:
        assert np.array_equal(hull_fill(t), t)
        assert len(find_contours(t)) == 1
        assert np.array_equal(ndi.binary_fill_holes(t), t)


def test_consecutive_truths_are_similar(default_phantom):
    _, truth = default_phantom
    assert min(dice(a, b) for a, b in zip(truth, truth[1:])) >= 0.85


def test_shape_and_dtype(default_phantom):
    stack, truth = default_phantom
    assert len(stack) == 10 and stack.shape == (128, 128)
    assert all(s.pixels.dtype == np.uint8 for s in stack.slices)
    assert all(t.shape == (128, 128) and t.dtype == bool for t in truth)


def test_seeded(default_phantom):
    again, _ = generate_phantom(PhantomParams(seed=42))
    other, _ = generate_phantom(PhantomParams(seed=43))
    assert all(np.array_equal(a.pixels, b.pixels) for a, b in zip(again.slices, default_phantom[0].slices))
    assert not np.array_equal(other[0].pixels, again[0].pixels)


def test_lv_is_brighter_than_ring(default_phantom):
    stack, truth = default_phantom
    img = stack[0].pixels.astype(float)
    lv = truth[0]
    cy, cx = ndi.center_of_mass(lv)
    r = np.sqrt(lv.sum() / np.pi)
    ring = disk(128, cx, cy, r + 4) & ~disk(128, cx, cy, r + 1)
    assert img[lv].mean() > img[ring].mean() + 50


def test_distractors_reach_lv_brightness(default_phantom):
    stack, truth = default_phantom
    img = stack[0].pixels
    far = ~disk(128, 64, 64, 40)
    # some background pixels look like LV pixels
    assert (img[far] > 170).sum() > 50


@pytest.mark.parametrize(
    "change",
    [dict(size=8), dict(n_slices=1), dict(r0=10, shrink=1.0), dict(drift=4), dict(noise_sd=-1), dict(size=40)],
)
def test_invalid_params(change):
    with pytest.raises(InvalidInputError):
        generate_phantom(dataclasses.replace(PhantomParams(), **change))
