import numpy as np
import pytest

from sliceprop.core import CineStack, ImageSlice
from sliceprop.phantom import PhantomParams, generate_phantom

SMALL = PhantomParams(
    size=64, n_slices=4, r0=11.0, shrink=0.6, ring_width=2.5, blob_radius=(2.0, 4.5), seed=7
)


@pytest.fixture(scope="session")
def small_phantom():
    return generate_phantom(SMALL)


def identical_stack(n=4, size=24, seed=0):
    """``n`` copies of one random slice and a rectangle first mask."""
    img = ImageSlice(np.random.default_rng(seed).integers(0, 256, (size, size)))
    first = np.zeros((size, size), bool)
    first[6:15, 5:17] = True
    return CineStack((img,) * n), first


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
