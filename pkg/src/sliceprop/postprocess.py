"""Mask cleanup: keep the region overlapping the previous LV, then close concavities.

Points are ``(x, y)`` integer pairs with ``x`` the column and ``y`` the row.
"""
from __future__ import annotations

import logging
import warnings
from collections import deque
from typing import Optional, Sequence

import numpy as np

from .core import InvalidInputError, as_mask

log = logging.getLogger(__name__)

Point = tuple[int, int]
Contour = list[Point]
Polygon = list[Point]

# 8-neighbourhood of a pixel in clockwise order on screen (y grows downward),
# starting from the left neighbour.
_NEIGHBOURS = [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)]
_DIRECTION = {d: i for i, d in enumerate(_NEIGHBOURS)}


class PostProcessFallback(UserWarning):
    """No contour of the raw mask touches the previous LV."""


def label_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """8-connected component labels, numbered in raster order of first pixel."""
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    n = 0
    for r, c in zip(*np.nonzero(mask)):
        if labels[r, c]:
            continue
        n += 1
        labels[r, c] = n
        queue = deque([(r, c)])
        while queue:
            i, j = queue.popleft()
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    a, b = i + di, j + dj
                    if 0 <= a < h and 0 <= b < w and mask[a, b] and not labels[a, b]:
                        labels[a, b] = n
                        queue.append((a, b))
    return labels, n


def _trace_outer_border(region: np.ndarray, start: Point) -> Contour:
    """Follow the outer border of the component containing ``start``.

    ``start`` must be the component's first pixel in raster order, so its left
    neighbour is background. Tracing stops only when the start pixel is
    re-entered from the pixel that closes the loop, so borders passing through
    the start twice are followed completely.
    """
    h, w = region.shape

    def on(p: Point) -> bool:
        x, y = p
        return 0 <= x < w and 0 <= y < h and bool(region[y, x])

    def step(p: Point, k: int) -> Point:
        dx, dy = _NEIGHBOURS[k % 8]
        return (p[0] + dx, p[1] + dy)

    # Clockwise from the background left neighbour: the pixel the border
    # arrives from when it closes.
    last = None
    for k in range(8):
        q = step(start, k)
        if on(q):
            last = q
            break
    if last is None:
        return [start]

    contour = []
    prev, cur = last, start
    while True:
        contour.append(cur)
        k_prev = _DIRECTION[(prev[0] - cur[0], prev[1] - cur[1])]
        for i in range(1, 9):
            nxt = step(cur, k_prev - i)
            if on(nxt):
                break
        if nxt == start and cur == last:
            return contour
        prev, cur = cur, nxt


def find_contours(mask) -> list[Contour]:
    """Outer borders of the 8-connected foreground components, in raster order."""
    mask = as_mask(mask)
    labels, n = label_components(mask)
    if n == 0:
        return []
    contours = []
    flat = labels.ravel()
    labs, first = np.unique(flat, return_index=True)
    for lab, idx in zip(labs[labs > 0], first[labs > 0]):
        y, x = divmod(int(idx), mask.shape[1])
        contours.append(_trace_outer_border(labels == lab, (x, y)))
    return contours


def _check_points(points: Sequence[Point], width: int, height: int):
    for x, y in points:
        if not (0 <= x < width and 0 <= y < height):
            raise InvalidInputError(f"point ({x}, {y}) outside {width}x{height}")


def fill_contour(contour: Contour, width: int, height: int) -> np.ndarray:
    """Pixels inside or on a traced border, by even-odd scanline filling.

    Consecutive border points are 8-adjacent, so every non-horizontal edge
    spans exactly one scanline and crosses it at an integer column.
    """
    if not contour:
        raise InvalidInputError("empty contour")
    _check_points(contour, width, height)
    out = np.zeros((height, width), dtype=bool)
    pts = np.asarray(contour, dtype=np.int64)
    out[pts[:, 1], pts[:, 0]] = True
    nxt = np.roll(pts, -1, axis=0)
    crossing = pts[:, 1] != nxt[:, 1]
    a, b = pts[crossing], nxt[crossing]
    upper = np.where((a[:, 1] < b[:, 1])[:, None], a, b)  # endpoint on the lower row index
    for row in np.unique(upper[:, 1]):
        xs = np.sort(upper[upper[:, 1] == row, 0])
        for x0, x1 in zip(xs[0::2], xs[1::2]):
            out[row, x0 : x1 + 1] = True
    return out


def select_max_overlap(contours: list[Contour], prev_lv) -> Optional[Contour]:
    """Contour whose filled area overlaps ``prev_lv`` most; ``None`` if no overlap.

    Ties go to the larger filled area, then to the earlier contour.
    """
    prev_lv = as_mask(prev_lv)
    h, w = prev_lv.shape
    best, best_key = None, (0, 0)
    for c in contours:
        region = fill_contour(c, w, h)
        key = (int((region & prev_lv).sum()), int(region.sum()))
        if key[0] > 0 and key > best_key:
            best, best_key = c, key
    return best


def _cross(o: Point, a: Point, b: Point) -> int:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> Polygon:
    """Hull vertices counter-clockwise (monotone chain), collinear points dropped."""
    pts = sorted({(int(x), int(y)) for x, y in points})
    if not pts:
        raise InvalidInputError("convex hull of an empty point set")
    if len(pts) <= 2:
        return pts

    def chain(seq):
        out: list[Point] = []
        for p in seq:
            while len(out) >= 2 and _cross(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = chain(pts)
    upper = chain(reversed(pts))
    hull = lower[:-1] + upper[:-1]
    return hull


def fill_convex_polygon(poly: Polygon, width: int, height: int) -> np.ndarray:
    """Pixels inside or on a convex polygon given in either winding order."""
    _check_points(poly, width, height)
    out = np.zeros((height, width), dtype=bool)
    if not poly:
        return out
    v = np.asarray(poly, dtype=np.int64)
    x0, y0 = v.min(axis=0)
    x1, y1 = v.max(axis=0)
    ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    inside = np.ones(xs.shape, dtype=bool)
    if len(v) == 2:
        (ax, ay), (bx, by) = v
        inside &= (bx - ax) * (ys - ay) - (by - ay) * (xs - ax) == 0
    elif len(v) > 2:
        left_of_all = inside.copy()
        right_of_all = inside
        for (ax, ay), (bx, by) in zip(v, np.roll(v, -1, axis=0)):
            side = (bx - ax) * (ys - ay) - (by - ay) * (xs - ax)
            left_of_all &= side >= 0
            right_of_all &= side <= 0
        inside = left_of_all | right_of_all
    out[y0 : y1 + 1, x0 : x1 + 1] = inside
    return out


def _row_extremes(region: np.ndarray) -> list[Point]:
    """Leftmost and rightmost pixel of each row; enough to determine the hull."""
    rows = np.flatnonzero(region.any(axis=1))
    left = region[rows].argmax(axis=1)
    right = region.shape[1] - 1 - region[rows, ::-1].argmax(axis=1)
    return [(int(x), int(y)) for y, x in zip(rows, left)] + [
        (int(x), int(y)) for y, x in zip(rows, right)
    ]


def post_process_with_status(raw, prev_lv) -> tuple[np.ndarray, bool]:
    """Like :func:`post_process`, also reporting whether the fallback was used."""
    raw = as_mask(raw)
    prev_lv = as_mask(prev_lv)
    if raw.shape != prev_lv.shape:
        raise InvalidInputError(f"mask shapes differ: {raw.shape} vs {prev_lv.shape}")
    h, w = raw.shape
    chosen = select_max_overlap(find_contours(raw), prev_lv)
    if chosen is None:
        return prev_lv.copy(), True
    region = fill_contour(chosen, w, h)
    hull = convex_hull(_row_extremes(region))
    return fill_convex_polygon(hull, w, h), False


def post_process(raw, prev_lv) -> np.ndarray:
    """Keep the component overlapping ``prev_lv`` most, fill it, take its convex hull.

    When nothing overlaps ``prev_lv`` the previous mask is returned unchanged
    and a :class:`PostProcessFallback` warning is issued.
    """
    out, fell_back = post_process_with_status(raw, prev_lv)
    if fell_back:
        log.warning("no contour overlaps the previous LV; keeping the previous mask")
        warnings.warn("no contour overlaps the previous LV", PostProcessFallback, stacklevel=2)
    return out
