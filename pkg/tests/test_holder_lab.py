"""Regularity tuples, rough synthesis, exponent regression."""

import numpy as np
import pytest

from paraflow.dyadic_core import Grid, block_decompose, lp_project
from paraflow.holder_lab import (
    AssumptionViolation,
    InsufficientData,
    check_assumption_a,
    estimate_block_regularity,
    fit_exponent,
    synth_rough,
)


class TestAssumptionA:
    def test_margin(self):
        tup = check_assumption_a((0.4, 0.4))
        assert tup.delta0 == pytest.approx(0.2)
        assert len(tup) == 2

    def test_integer_partial_sum_rejected(self):
        with pytest.raises(AssumptionViolation) as exc:
            check_assumption_a((0.5, 0.5))
        assert (exc.value.a, exc.value.b) == (1, 2)
        with pytest.raises(AssumptionViolation):
            check_assumption_a((1.0, 0.4))
        with pytest.raises(ValueError):
            check_assumption_a(())

    def test_negative_entries_allowed(self):
        tup = check_assumption_a((0.4, -0.75, 0.6))
        assert tup.delta0 == pytest.approx(0.15)


class TestSynth:
    def test_deterministic(self, grid):
        a = synth_rough(0.4, 3, grid)
        b = synth_rough(0.4, 3, grid)
        assert np.array_equal(a.values, b.values)
        c = synth_rough(0.4, 4, grid)
        assert not np.array_equal(a.values, c.values)

    def test_levels_respected(self, grid):
        f = synth_rough(0.4, 3, grid, levels=range(-1, 4))
        # no spectral mass above band 4 (band 4 overlaps band 3)
        hi = sum(lp_project(f, i).sup() for i in range(5, grid.i_max + 1))
        assert hi < 1e-10

    def test_block_norms_scale(self, grid):
        # unit-sup bands scaled by 2^{-j alpha}: block sup ~ 2^{-j alpha}
        # up to the overlap of adjacent bands
        f = synth_rough(0.6, 5, grid)
        fit = estimate_block_regularity(f)
        assert abs(fit.slope - 0.6) < 0.15


class TestFit:
    def test_exact_power_law(self):
        hs = [2.0**-j for j in range(3, 9)]
        fit = fit_exponent([(h, 3.0 * h**1.25) for h in hs])
        assert fit.slope == pytest.approx(1.25, abs=1e-12)
        assert fit.intercept == pytest.approx(np.log(3.0), abs=1e-12)
        assert fit.max_residual < 1e-12
        assert fit.sample_count == len(hs)

    def test_zero_samples_dropped(self):
        hs = [2.0**-j for j in range(3, 9)]
        samples = [(h, h**2) for h in hs] + [(0.5, 0.0), (0.25, -1.0)]
        fit = fit_exponent(samples)
        assert fit.slope == pytest.approx(2.0, abs=1e-12)
        assert fit.sample_count == len(hs)

    def test_insufficient_data(self):
        with pytest.raises(InsufficientData):
            fit_exponent([(0.5, 1.0), (0.25, 0.5), (0.125, 0.0)])

    def test_block_regularity_exact_sequence(self, grid):
        # synthetic sequence with exact block norms 2^{-0.7 i}
        f = synth_rough(0.0, 6, grid)
        seq = block_decompose(f)
        scaled = seq.map_blocks(lambda b: b)
        blocks = []
        for i in scaled.levels():
            b = scaled.block(i)
            s = b.sup()
            blocks.append(b * (2.0 ** (-0.7 * i) / s) if s > 0 else b)
        total = blocks[0]
        for b in blocks[1:]:
            total = total + b
        fit = estimate_block_regularity(block_decompose(total))
        assert abs(fit.slope - 0.7) < 0.1
