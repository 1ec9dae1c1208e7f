"""Paraproduct engine: recursions, remainders, and the nested-sum oracle."""

from fractions import Fraction as F

import numpy as np
import pytest

from conftest import LEVEL_TOP, rough, rough_seq, seqs_for
from paraflow.cut_algebra import cut_set, i_set, mi_abs, mi_ball, mi_binom, mi_factorial
from paraflow.dyadic_core import derive_fn, taylor_poly_fn, translate_fn
from paraflow.model_kit import window_sup
from paraflow.para_engine import (
    para,
    para_iterated,
    pair_expansion_remainder,
    remainder_delta,
    remainder_delta_twisted,
    simp_para,
    star_derivative,
    star_derivative_twisted,
    tree_sum,
    twisted_oracle,
    twisted_simp,
    twisted_simp_block,
    twisted_two,
)

IVALS = (-1, 0, 2, 4)


def hpow(h, k):
    out = 1.0
    for a, p in enumerate(k):
        out *= float(h[a]) ** p
    return out


class TestReductions:
    def test_single_factor(self, grid):
        seq = rough_seq(0.4, 1, grid)
        assert window_sup(simp_para([seq]).summed() - seq.summed()) < 1e-12
        assert window_sup(para_iterated([seq.summed()]) - seq.summed()) == 0.0

    def test_pair_matches_direct_sum(self, grid):
        f = rough(0.4, 2, grid)
        g = rough(0.4, 3, grid)
        direct = para(f, g)
        via_seq = simp_para([rough_seq(0.4, 2, grid), rough_seq(0.4, 3, grid)])
        assert window_sup(direct - via_seq.summed()) < 1e-10

    def test_positive_tuple_has_no_corrections(self, grid):
        # all partial sums positive: no cuts, the twisted product is plain
        beta = (F(2, 5), F(7, 20), F(3, 10))
        seqs = seqs_for(beta, 4, grid)
        assert cut_set(beta) == []
        lhs = twisted_simp(beta, seqs)
        assert window_sup(lhs - simp_para(seqs).summed()) < 1e-12


class TestNestedSumOracle:
    def test_matches_twisted_blocks(self, grid):
        beta = (F(2, 5), F(-3, 4), F(3, 5))
        seqs = seqs_for(beta, 5, grid)
        for i in IVALS:
            fast = twisted_simp_block(beta, seqs, i)
            slow = twisted_oracle(beta, seqs, i, LEVEL_TOP + 1)
            denom = max(window_sup(fast), 1e-30)
            assert window_sup(fast - slow) / denom < 1e-10

    def test_corrections_are_not_vacuous(self, grid):
        # the same tuple has a genuine cut, so the twisted block must differ
        # from the plain paraproduct block
        beta = (F(2, 5), F(-3, 4), F(3, 5))
        seqs = seqs_for(beta, 5, grid)
        plain = simp_para(seqs).block(2)
        twisted = twisted_simp_block(beta, seqs, 2)
        assert window_sup(plain - twisted) > 1e-6


class TestRecursions:
    def test_twisted_block_recursion(self, grid):
        # P~^beta_<{i} = P_<{i} - sum_{d in Cut} P~(head) . P~(tail){i}
        beta = (F(2, 5), F(-3, 4), F(3, 5))
        seqs = seqs_for(beta, 10, grid)
        assert cut_set(beta) == [1]
        for i in IVALS:
            lhs = twisted_simp_block(beta, seqs, i)
            rhs = simp_para(seqs).block(i)
            for d in cut_set(beta):
                rhs = rhs - twisted_simp(beta[:d], seqs[:d]) * twisted_simp_block(
                    beta[d:], seqs[d:], i
                )
            assert window_sup(lhs - rhs) < 1e-12

    def test_two_tuple_recursion(self, grid):
        # P~^{b1,b2} = P~^{b1} - sum over the cuts of b2 absent from b1
        beta1 = (F(3, 5), F(1, 2), F(9, 20))
        beta2 = (F(3, 5), F(1, 2), F(-11, 20))
        seqs = seqs_for(beta1, 130, grid)
        extra = [d for d in cut_set(beta2) if d not in cut_set(beta1)]
        assert extra == [1, 2]
        lhs = twisted_two(beta1, seqs, beta2=beta2)
        rhs = twisted_simp(beta1, seqs)
        for d in extra:
            rhs = rhs - twisted_two(beta1[:d], seqs[:d], beta2=beta2[:d]) * twisted_two(
                beta1[d:], seqs[d:], beta2=beta2[d:]
            )
        assert window_sup(lhs - rhs) < 1e-12

    @pytest.mark.parametrize("k", [(1,), (2,)])
    def test_star_derivative_recursion(self, grid, k):
        # d*^k P_< = d^k P_< - sum_c sum_l binom(k,l) d*^l(head) d*^{k-l}(tail)
        # over l with |l| below the head sum and |k-l| above the tail sum
        alpha = (F(4, 5), F(7, 10), F(3, 5))
        seqs = seqs_for(alpha, 30, grid)
        lhs = star_derivative(alpha, k, seqs)
        rhs = derive_fn(simp_para(seqs).summed(), k)
        tot = sum(alpha)
        for c in range(1, len(alpha)):
            head = sum(alpha[:c])
            tail = tot - head
            for l in mi_ball(1, mi_abs(k)):
                if not all(a <= b for a, b in zip(l, k)):
                    continue
                kl = tuple(b - a for a, b in zip(l, k))
                if F(mi_abs(l)) < head and F(mi_abs(kl)) > tail:
                    rhs = rhs - star_derivative(
                        alpha[:c], l, seqs[:c]
                    ) * star_derivative(alpha[c:], kl, seqs[c:]) * float(mi_binom(k, l))
        assert window_sup(lhs - rhs) < 1e-8


class TestRemainderDelta:
    H = (8.0 / 512.0,)

    def test_plain_expansion(self, grid):
        # Delta_{h,o} P_< = (shift - jet) of P_< minus the paracontrolled sum
        # d*^k(head) Delta_{h,o-|k|}(tail) h^k / k!
        alpha = (F(4, 5), F(7, 10), F(3, 5))
        seqs = seqs_for(alpha, 50, grid)
        h, o = self.H, 2.3
        for i in IVALS:
            lhs = remainder_delta(alpha, h, o, seqs, i)
            pb = simp_para(seqs).block(i)
            rhs = translate_fn(pb, h) - taylor_poly_fn(pb, h, o)
            for a in range(1, len(alpha)):
                head = sum(alpha[:a])
                for k in mi_ball(1, max(int(np.ceil(float(head))) - 1, 0)):
                    if not F(mi_abs(k)) < head:
                        continue
                    rhs = rhs - star_derivative(alpha[:a], k, seqs[:a]) * remainder_delta(
                        alpha[a:], h, o - mi_abs(k), seqs[a:], i
                    ) * (hpow(h, k) / mi_factorial(k))
            assert window_sup(lhs - rhs) < 1e-12

    def test_twisted_expansion(self, grid):
        beta = (F(13, 10), F(-9, 20), F(7, 10))
        seqs = seqs_for(beta, 70, grid)
        h, o = self.H, 1.7
        assert i_set(beta) == [1, 2]
        for i in IVALS:
            lhs = remainder_delta_twisted(beta, h, o, seqs, i)
            tb = twisted_simp_block(beta, seqs, i)
            rhs = translate_fn(tb, h) - taylor_poly_fn(tb, h, o)
            for c in i_set(beta):
                head = sum(beta[:c])
                for k in mi_ball(1, max(int(np.ceil(float(head))) - 1, 0)):
                    if not F(mi_abs(k)) < head:
                        continue
                    rhs = rhs - star_derivative_twisted(
                        beta[:c], k, seqs[:c]
                    ) * remainder_delta_twisted(
                        beta[c:], h, o - mi_abs(k), seqs[c:], i
                    ) * (hpow(h, k) / mi_factorial(k))
            assert window_sup(lhs - rhs) < 1e-12

    def test_order_change_plain(self, grid):
        # Delta_{h,o2} - Delta_{h,o1} = - sum_{o1 < |k| < o2} d*^k h^k / k!
        alpha = (F(2, 5), F(7, 20), F(3, 10))
        seqs = seqs_for(alpha, 90, grid)
        h, o1, o2 = self.H, 1.1, 2.2
        for i in IVALS:
            diff = remainder_delta(alpha, h, o2, seqs, i) - remainder_delta(
                alpha, h, o1, seqs, i
            )
            terms = [
                star_derivative(alpha, k, seqs, i) * (hpow(h, k) / mi_factorial(k))
                for k in mi_ball(1, int(np.ceil(o2)) - 1)
                if o1 < mi_abs(k) < o2
            ]
            assert terms, "vacuous order window"
            assert window_sup(diff + tree_sum(terms)) < 1e-12

    def test_order_change_twisted(self, grid):
        beta = (F(2, 5), F(-3, 4), F(3, 5))
        seqs = seqs_for(beta, 110, grid)
        h, o1, o2 = self.H, 0.3, 1.5
        for i in IVALS:
            diff = remainder_delta_twisted(beta, h, o2, seqs, i) - remainder_delta_twisted(
                beta, h, o1, seqs, i
            )
            terms = [
                star_derivative_twisted(beta, k, seqs, i)
                * (hpow(h, k) / mi_factorial(k))
                for k in mi_ball(1, int(np.ceil(o2)) - 1)
                if o1 < mi_abs(k) < o2
            ]
            assert terms, "vacuous order window"
            assert window_sup(diff + tree_sum(terms)) < 1e-12


class TestPairRemainder:
    def test_smaller_than_raw_increment(self, grid):
        f = rough(0.4, 200, grid)
        g = rough(0.4, 201, grid)
        h = (8.0 / grid.n,)
        p = para(f, g)
        raw = window_sup(translate_fn(p, h) - p)
        rem = window_sup(pair_expansion_remainder(f, g, (0.4, 0.4), h))
        assert np.isfinite(rem)
        assert rem < raw
