"""Independent reference implementations used by the tests."""
import itertools

import numpy as np
from scipy import ndimage as ndi

EIGHT = np.ones((3, 3), dtype=int)


def cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def on_segment(p, a, b):
    return (
        cross(a, b, p) == 0
        and min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
        and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])
    )


def in_closed_triangle(p, a, b, c):
    d1, d2, d3 = cross(a, b, p), cross(b, c, p), cross(c, a, p)
    return not ((d1 < 0 or d2 < 0 or d3 < 0) and (d1 > 0 or d2 > 0 or d3 > 0))


def brute_force_hull_vertices(points):
    """A point is a vertex iff it lies in no closed triangle or segment of the others."""
    pts = sorted(set(points))
    verts = set()
    for p in pts:
        others = [q for q in pts if q != p]
        covered = any(on_segment(p, a, b) for a, b in itertools.combinations(others, 2))
        if not covered:
            covered = any(
                cross(a, b, c) != 0 and in_closed_triangle(p, a, b, c)
                for a, b, c in itertools.combinations(others, 3)
            )
        if not covered:
            verts.add(p)
    return verts


def filled_components(mask):
    """8-connected labels and each component with its holes filled from outside."""
    lab, n = ndi.label(mask, structure=EIGHT)
    return lab, [ndi.binary_fill_holes(lab == i) for i in range(1, n + 1)]


def popcount_dice(a, b):
    a = [bool(v) for v in np.ravel(a)]
    b = [bool(v) for v in np.ravel(b)]
    inter = sum(1 for x, y in zip(a, b) if x and y)
    return 2 * inter / (sum(a) + sum(b))
