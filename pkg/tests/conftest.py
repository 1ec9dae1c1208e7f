"""Shared helpers: a small torus grid and band-limited rough synthesis.

Keeping synthesis band-limited (levels <= 4 on a 512-point grid) keeps every
pointwise product alias-free, so the algebraic identities hold to round-off.
"""

import pytest

from paraflow.dyadic_core import Grid, block_decompose
from paraflow.holder_lab import synth_rough

LEVEL_TOP = 4


@pytest.fixture(scope="session")
def grid():
    return Grid(1, 9)


def rough(alpha, seed, grid, top=LEVEL_TOP):
    """Band-limited rough function of regularity |alpha|."""
    return synth_rough(abs(float(alpha)), seed, grid, levels=range(-1, top + 1))


def rough_seq(alpha, seed, grid, top=LEVEL_TOP):
    """The same function as a block sequence capped just above its band."""
    return block_decompose(rough(alpha, seed, grid, top), top + 1)


def seqs_for(beta, base_seed, grid, top=LEVEL_TOP):
    return [rough_seq(b, base_seed + j, grid, top) for j, b in enumerate(beta)]


def fns_for(beta, base_seed, grid, top=LEVEL_TOP):
    return [rough(b, base_seed + j, grid, top) for j, b in enumerate(beta)]
