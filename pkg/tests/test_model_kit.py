"""Models, brackets, blockwise identities, and slope verification helpers."""

from fractions import Fraction as F

import numpy as np
import pytest

from paraflow.dyadic_core import Grid, lp_project
from paraflow.holder_lab import synth_rough
from paraflow.model_kit import (
    Model,
    bracket_f_pair,
    bracket_f_t,
    bracket_pair,
    bracket_t,
    canonical_model,
    children,
    chains,
    criterion_bases,
    g_yx_field,
    gtogtilde_residual_pi,
    model_pi_x,
    norm_t,
    pairing,
    representation_check,
    representation_check_plus,
    splice_residual,
    star_identity_i,
    star_identity_ii,
    sumgtilde_residual,
    upsilon_cross_check,
    verify_pi_symbol,
    window_sup,
)
from paraflow.structure_algebra import (
    Caps,
    build_bases,
    poly_sym,
    seg_sym,
    segment_structure,
)

Z = (0,)
LEVELS = range(-1, 5)
ALPHA2 = (F(2, 5), F(2, 5))
ALPHA3 = (F(7, 20), F(3, 10), F(3, 10))

TAU12 = seg_sym((1, 2), (Z,), Z, p=Z, d0=1)
TAU12W = seg_sym((1, 2), ((1,),), Z, p=Z, d0=1)
TAU12P = seg_sym((1, 2), (Z,), Z, p=(1,), d0=1)
TAU2 = seg_sym((2,), (), Z, p=Z, d0=1)
TAU123 = seg_sym((1, 2, 3), (Z, Z), Z, p=Z, d0=1)
TAU23 = seg_sym((2, 3), (Z,), Z, p=Z, d0=1)
TAU3 = seg_sym((3,), (), Z, p=Z, d0=1)


@pytest.fixture(scope="module")
def m2(grid):
    fs = [synth_rough(float(a), 7 + j, grid, levels=LEVELS) for j, a in enumerate(ALPHA2)]
    return canonical_model(fs, ALPHA2, Caps(1, 1, 1))


@pytest.fixture(scope="module")
def m3(grid):
    fs = [synth_rough(float(a), 20 + j, grid, levels=LEVELS) for j, a in enumerate(ALPHA3)]
    return canonical_model(fs, ALPHA3, Caps(1, 1, 1))


class TestModelBasics:
    def test_single_letter_bracket_is_plain_block(self, m2):
        # no chains below a single letter: the bracket is the raw block
        tau1 = seg_sym((1,), (), Z, p=Z, d0=1)
        for i in (0, 2, 4):
            want = lp_project(m2.pi(tau1), i)
            assert window_sup(bracket_t(m2, tau1).block(i) - want) < 1e-12

    def test_pi_rejects_plus_and_g_rejects_t(self, m2):
        with pytest.raises(ValueError):
            m2.pi(seg_sym((1,), (), Z, k=(Z,), p=Z, d0=1, plus=True))
        with pytest.raises(ValueError):
            m2.g(TAU12)

    def test_g_yx_of_coordinate(self, m2):
        # g_{y,x}(X) = y - x in torus units
        eps = poly_sym(1, (1,), True)
        field = g_yx_field(m2, eps, (3,))
        # the coordinate is non-periodic: stay clear of the wrap-around tail
        assert np.max(np.abs(field[:-3] - 3.0 / m2.grid.n)) < 1e-12

    def test_children_and_chains(self, m2):
        kids = children(m2.struct, TAU12)
        assert TAU2 in kids
        assert all(len(c) >= 1 for c in chains(m2.struct, TAU12, "prec"))

    def test_pairing_agrees_with_scalar_probe(self, m2):
        val = model_pi_x(m2, TAU12, 100, 3)
        assert val == pytest.approx(pairing(m2, TAU12, 3).values[100])
        assert np.isfinite(norm_t(m2, TAU12))


class TestBlockIdentities:
    @pytest.mark.parametrize("tau", [TAU12, TAU12W, TAU123], ids=["n2", "n2w", "n3"])
    def test_splice(self, m3, m2, tau):
        model = m3 if len(tau.labels) == 3 else m2
        assert splice_residual(model, tau) < 1e-12

    @pytest.mark.parametrize("tau", [TAU12, TAU12W, TAU123], ids=["n2", "n2w", "n3"])
    def test_weighted_block_recursion(self, m3, m2, tau):
        model = m3 if len(tau.labels) == 3 else m2
        assert gtogtilde_residual_pi(model, tau) < 1e-12

    @pytest.mark.parametrize("tau", [TAU12, TAU123], ids=["n2", "n3"])
    def test_bracket_resummation(self, m3, m2, tau):
        model = m3 if len(tau.labels) == 3 else m2
        assert sumgtilde_residual(model, tau) < 1e-12

    def test_weighted_bracket_extends_plain(self, m2):
        # for an undecorated symbol the weighted bracket is the plain one
        for i in (1, 3, 5):
            diff = bracket_f_t(m2, TAU12).block(i) - bracket_t(m2, TAU12).block(i)
            assert window_sup(diff) < 1e-12
            diffp = bracket_f_pair(m2, TAU12, TAU2).block(i) - bracket_pair(
                m2, TAU12, TAU2
            ).block(i)
            assert window_sup(diffp) < 1e-12


class TestRepresentation:
    @pytest.mark.parametrize(
        "tau", [TAU12, TAU12W, TAU12P, TAU123], ids=["n2", "n2w", "n2p", "n3"]
    )
    def test_t_side(self, m3, m2, tau):
        model = m3 if len(tau.labels) == 3 else m2
        rep = representation_check(model, tau)
        assert rep.ok and rep.residual < 1e-12

    def test_plus_side(self, m3, m2):
        cases = [(m2, TAU12), (m3, TAU123), (m3, TAU23)]
        checked = 0
        for model, tau in cases:
            for sigma in children(model.struct, tau):
                if sigma.is_poly():
                    continue
                rep = representation_check_plus(model, tau, sigma)
                assert rep.ok and rep.residual < 1e-12, rep.symbol
                checked += 1
        assert checked >= 3


class TestStarIdentities:
    def test_variant_i(self, grid):
        fs = [synth_rough(float(a), 7 + j, grid, levels=LEVELS) for j, a in enumerate(ALPHA2)]
        rep = star_identity_i(fs, ALPHA2, ((0,), (1,)), ((0,),))
        assert rep.ok and rep.residual < 1e-7

    def test_variant_i_vanishes_with_poly_factor(self, grid):
        fs = [synth_rough(float(a), 7 + j, grid, levels=LEVELS) for j, a in enumerate(ALPHA2)]
        rep = star_identity_i(fs, ALPHA2, ((0,), (0,)), ((0,),), m=(1,))
        assert rep.ok and rep.residual < 1e-12

    def test_variant_ii(self, m2):
        rep = star_identity_ii(m2, TAU12, TAU2, (1,))
        assert rep.ok and rep.residual < 1e-7


class TestUpsilon:
    def test_cross_check_n2(self, grid):
        fs = [synth_rough(a, 40 + j, grid, levels=LEVELS) for j, a in enumerate((0.5, 0.75))]
        rep = upsilon_cross_check(fs, (F(1, 2), F(-3, 4)), ((0,),))
        assert rep.ok and rep.residual < 1e-12

    def test_cross_check_n3(self, grid):
        fs = [synth_rough(a, 40 + j, grid, levels=LEVELS) for j, a in enumerate((0.5, 0.75, 0.4))]
        rep = upsilon_cross_check(fs, (F(1, 2), F(-3, 4), F(2, 5)), ((0,), (0,)))
        assert rep.ok and rep.residual < 1e-12


class TestCriterionBases:
    def test_saturated_weight_filtered(self):
        struct = segment_structure(ALPHA2, 1)
        caps = Caps(1, 1, 1)
        full_t, full_plus = build_bases(struct, caps)
        basis_t, crit_plus = criterion_bases(struct, caps)
        # the weight-saturated segment is in the truncated basis but carries
        # no recentering decay, so the criterion basis drops it
        assert TAU12W in full_t and TAU12W not in basis_t
        assert TAU12 in basis_t
        assert crit_plus == full_plus

    def test_verify_row_shape(self, m2):
        row = verify_pi_symbol(m2, TAU12, levels=range(1, 5))
        assert row.sector == "T"
        assert np.isfinite(row.fitted_slope)
