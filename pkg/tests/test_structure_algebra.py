"""Symbol algebra: coproducts, comodule law, characters, hat family."""

from fractions import Fraction as F

import pytest

from paraflow.structure_algebra import (
    Caps,
    Character,
    FormalSum,
    build_bases,
    char_convolve,
    char_identity,
    char_invert,
    coproduct,
    coproduct_plus,
    counit,
    degree,
    degree_additivity_ok,
    formal_sum_json,
    basis_json,
    hat_coproduct,
    hat_cut,
    hat_degree,
    hat_multicut,
    hat_ratio,
    hat_ratios,
    hat_sym,
    in_plus_basis,
    plus_closure,
    poly_sym,
    seg_sym,
    segment_structure,
    sym_str,
    unit_plus,
    verify_comodule,
    word_structure,
)

Z = (0,)
ALPHA = (F(2, 5), F(2, 5))
STRUCT = segment_structure(ALPHA, 1)


def x_pow(q, plus=False):
    return poly_sym(1, q, plus)


class TestFormalSum:
    def test_algebra(self):
        a = FormalSum([(("x",), F(1))])
        b = FormalSum([(("x",), F(2)), (("y",), F(3))])
        assert (a + b).terms == {("x",): F(3), ("y",): F(3)}
        assert (b - b) == FormalSum()
        assert len(b.scale(F(1, 3))) == 2
        assert b.filter(lambda k: k == ("y",)).terms == {("y",): F(3)}

    def test_zero_coefficients_dropped(self):
        a = FormalSum()
        a.add_term("k", 1)
        a.add_term("k", -1)
        assert len(a) == 0 and repr(a) == "0"

    def test_json_stable(self):
        a = FormalSum([((x_pow((1,)), unit_plus(1)), F(1, 2))])
        out = formal_sum_json(a)
        assert out == formal_sum_json(a)
        assert out[0]["coefficient"] == "1/2"


class TestDegreesAndCounit:
    def test_poly_degree(self):
        assert degree(STRUCT, x_pow((2,))) == 2
        assert degree(STRUCT, seg_sym((1, 2), (Z,), Z, p=Z, d0=1)) == F(4, 5)
        weighted = seg_sym((1, 2), ((1,),), Z, p=Z, d0=1)
        assert degree(STRUCT, weighted) == F(4, 5) + 1

    def test_counit(self):
        assert counit(unit_plus(1)) == 1
        assert counit(x_pow((1,), plus=True)) == 0
        assert counit(seg_sym((1,), (), Z, k=(Z,), p=Z, d0=1, plus=True)) == 0

    def test_in_plus_basis(self):
        # positive degree required
        assert in_plus_basis(
            STRUCT, seg_sym((1, 2), (Z,), Z, k=(Z, Z), p=Z, d0=1, plus=True)
        )
        # a derivative decoration of size 1 exceeds the cap sum(|alpha|) = 4/5
        assert not in_plus_basis(
            STRUCT, seg_sym((1, 2), (Z,), Z, k=((1,), Z), p=Z, d0=1, plus=True)
        )


class TestCoproduct:
    def test_poly_binomial_splitting(self):
        cop = coproduct(STRUCT, x_pow((2,)))
        # X^2 -> sum_q binom(2,q) X^q (x) X^{2-q}
        want = {
            (x_pow((0,)), x_pow((2,), True)): F(1),
            (x_pow((1,)), x_pow((1,), True)): F(2),
            (x_pow((2,)), x_pow((0,), True)): F(1),
        }
        assert cop.terms == want

    def test_counit_is_right_counit(self):
        # (Id (x) counit) Delta tau = tau, exactly, on the whole basis
        basis, _ = build_bases(STRUCT, Caps(1, 1, 1))
        for tau in basis:
            collapsed = FormalSum()
            for (left, right), c in coproduct(STRUCT, tau).items():
                collapsed.add_term(left, c * counit(right))
            assert collapsed.terms == {tau: F(1)}, sym_str(tau)

    def test_degree_additivity(self):
        basis, plus_basis = build_bases(STRUCT, Caps(1, 1, 1))
        for tau in list(basis) + list(plus_basis):
            assert degree_additivity_ok(STRUCT, tau), sym_str(tau)


class TestComodule:
    @pytest.mark.parametrize("d0", [1, 2])
    @pytest.mark.parametrize("n", [2, 3])
    def test_exact_small(self, n, d0):
        struct = segment_structure((F(2, 5),) * n, d0)
        report = verify_comodule(struct, Caps(1, 1, 1))
        assert report.ok
        assert report.checked_t > 0 and report.checked_plus > 0

    def test_word_structure_comodule(self):
        struct = word_structure({1: F(2, 5), 2: F(-3, 4)}, 1)
        words = [(1,), (2,), (1, 2), (2, 1)]
        report = verify_comodule(struct, Caps(1, 1, 1), words=words)
        assert report.ok


class TestCharacters:
    def _gens(self):
        _, plus_basis = build_bases(STRUCT, Caps(1, 1, 1))
        gens = [s for s in plus_basis if not s.is_poly()]
        return plus_closure(STRUCT, gens)

    def test_identity_and_inverse(self):
        gens = self._gens()
        vals = {g: 0.1 + 0.01 * idx for idx, g in enumerate(gens)}
        g = Character(STRUCT, vals, (0.3,))
        ident = char_identity(STRUCT, gens)
        conv = char_convolve(g, char_invert(g))
        for mu in gens:
            assert abs(conv(mu) - ident(mu)) < 1e-12
        conv2 = char_convolve(char_invert(g), g)
        for mu in gens:
            assert abs(conv2(mu) - ident(mu)) < 1e-12

    def test_identity_is_neutral(self):
        gens = self._gens()
        vals = {g: 0.2 - 0.03 * idx for idx, g in enumerate(gens)}
        g = Character(STRUCT, vals, (-0.5,))
        ident = char_identity(STRUCT, gens)
        conv = char_convolve(ident, g)
        for mu in gens:
            assert abs(conv(mu) - g(mu)) < 1e-12

    def test_characters_reject_t_symbols(self):
        gens = self._gens()
        g = char_identity(STRUCT, gens)
        with pytest.raises(ValueError):
            g(x_pow((1,), plus=False))


class TestHatFamily:
    BETA = (F(1, 2), F(-3, 4), F(2, 5))

    def tau(self, labels, ell, k=None):
        return hat_sym(labels, ell, Z, k=k, d0=1)

    def test_hat_degree(self):
        t = self.tau((1, 2), (Z,))
        assert hat_degree(1, t, self.BETA) == F(-1, 4)
        t2 = self.tau((1, 2), ((1,),), k=((1,), Z))
        assert hat_degree(1, t2, self.BETA) == F(-1, 4)

    def test_hat_coproduct_suffix_legs(self):
        t = self.tau((1, 2, 3), (Z, Z))
        ratios = hat_ratios(1, t)
        lefts = set(ratios)
        # the left legs are the suffixes cut at zero junction slots
        assert self.tau((2, 3), (Z,)) in lefts
        assert self.tau((3,), ()) in lefts
        assert self.tau((1,), ()) not in lefts

    def test_hat_cut_matches_scalar_cut(self):
        from paraflow.cut_algebra import cut_set

        t = self.tau((1, 2, 3), (Z, Z))
        cuts = hat_cut(1, t, self.BETA)
        positions = sorted(len(t.labels) - len(c.labels) for c in cuts)
        assert positions == cut_set(self.BETA)

    def test_hat_multicut_chains(self):
        t = self.tau((1, 2, 3), (Z, Z))
        chains = hat_multicut(1, t, self.BETA)
        # a single cut yields a single one-element chain
        assert len(chains) == 1 and len(chains[0]) == 1

    def test_hat_ratio_missing_leg(self):
        t = self.tau((1, 2), (Z,))
        assert len(hat_ratio(1, t, self.tau((2,), ()))) == 1
        with pytest.raises(KeyError):
            hat_ratio(1, t, self.tau((1,), ()))


class TestSerialization:
    def test_basis_json(self):
        basis, _ = build_bases(STRUCT, Caps(1, 1, 1))
        rows = basis_json(STRUCT, basis)
        assert len(rows) == len(basis)
        assert all("symbol" in r and "degree" in r for r in rows)
