"""Regularity bookkeeping, rough-function synthesis, exponent regression."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .cut_algebra import partial_sum
from .dyadic_core import BlockSequence, Grid, GridFunction, block_decompose, get_bank


class AssumptionViolation(ValueError):
    """Some consecutive partial sum of the regularity tuple is an integer."""

    def __init__(self, a: int, b: int, value):
        self.a, self.b, self.value = a, b, value
        super().__init__(f"partial sum alpha_{a}..alpha_{b} = {value} is an integer")


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class RegularityTuple:
    alphas: tuple
    delta0: float

    def __len__(self):
        return len(self.alphas)


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    max_residual: float
    sample_count: int


def check_assumption_a(alphas) -> RegularityTuple:
    """Verify that no consecutive partial sum of alphas is an integer and
    return the tuple with its margin delta0 (min distance of sums to Z)."""
    alphas = tuple(float(a) for a in alphas)
    if not alphas:
        raise ValueError("empty tuple")
    n = len(alphas)
    best = None
    for a in range(1, n + 1):
        for b in range(a, n + 1):
            s = partial_sum(alphas, a, b)
            d = abs(s - round(s))
            if d == 0:
                raise AssumptionViolation(a, b, s)
            if best is None or d < best:
                best = d
    return RegularityTuple(alphas, float(best))


def synth_rough(alpha: float, seed: int, grid: Grid, levels=None) -> GridFunction:
    """f = sum_j 2^{-j alpha} g_j with g_j a random unit-sup-norm band-j
    function (random phases over the whole band); deterministic per seed."""
    if levels is None:
        levels = range(-1, grid.i_max + 1)
    rng = np.random.default_rng(seed)
    bank = get_bank(grid)
    total = np.zeros(grid.shape)
    for j in levels:
        noise = rng.standard_normal(grid.shape)
        spec = np.fft.fftn(noise)
        mod = np.abs(spec)
        phases = np.divide(spec, mod, out=np.ones_like(spec), where=mod > 0)
        band = np.fft.ifftn(bank.chi(j) * phases).real
        sup = np.max(np.abs(band))
        if sup > 0:
            band = band / sup
        total += 2.0 ** (-j * alpha) * band
    return GridFunction(grid, total)


def fit_exponent(samples) -> ExponentFit:
    """Least-squares slope of log v against log h over (h, v) samples.

    Zero or negative v samples are dropped; fewer than 4 surviving samples
    raises InsufficientData.
    """
    pts = [(float(h), float(v)) for h, v in samples if v > 0.0]
    if len(pts) < 4:
        raise InsufficientData(f"only {len(pts)} positive samples")
    logh = np.array([math.log(h) for h, _ in pts])
    logv = np.array([math.log(v) for _, v in pts])
    a = np.vstack([logh, np.ones_like(logh)]).T
    (slope, intercept), *_ = np.linalg.lstsq(a, logv, rcond=None)
    resid = np.max(np.abs(a @ np.array([slope, intercept]) - logv))
    return ExponentFit(float(slope), float(intercept), float(resid), len(pts))


def block_norms(seq_or_fn, levels=None):
    """(level, sup norm of block) pairs for a function or block sequence."""
    if isinstance(seq_or_fn, GridFunction):
        seq = block_decompose(seq_or_fn)
    else:
        seq = seq_or_fn
    if levels is None:
        levels = seq.levels()
    return [(i, seq.block(i).sup()) for i in levels]


def estimate_block_regularity(seq_or_fn, window=None) -> ExponentFit:
    """Fit -r from log2 block norms ~ -i r; returns the fit with slope = r.

    The window is a range of levels; default drops the two lowest and the top
    level to avoid the absorbing top band and the nondyadic bottom.
    """
    if isinstance(seq_or_fn, GridFunction):
        seq = block_decompose(seq_or_fn)
    else:
        seq = seq_or_fn
    if window is None:
        window = range(1, seq.top_level)
    samples = [(2.0**-i, seq.block(i).sup()) for i in window]
    fit = fit_exponent(samples)
    return fit
