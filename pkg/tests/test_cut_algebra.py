"""Exact combinatorics: multi-index helpers, partitions, cut sets."""

from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paraflow.cut_algebra import (
    assumption_margin,
    compositions,
    cut_report,
    cut_set,
    chains_through,
    e_set,
    ell_cut_set,
    i_set,
    m0,
    mi_abs,
    mi_add,
    mi_ball,
    mi_binom,
    mi_factorial,
    mi_leq,
    mi_range,
    mi_sub,
    mi_unit,
    mi_zero,
    multicut_classes,
    multicut_partition_ok,
    multicut_set,
    multicut_two,
    multinomial,
    partial_sum,
    partitions,
    partitions_count,
    vandermonde_check,
)

small_mi = st.tuples(st.integers(0, 3), st.integers(0, 3))


class TestMultiIndices:
    def test_zero_unit(self):
        assert mi_zero(3) == (0, 0, 0)
        assert mi_unit(3, 1) == (0, 1, 0)

    @given(small_mi, small_mi)
    def test_add_sub_roundtrip(self, k, l):
        assert mi_sub(mi_add(k, l), l) == k

    def test_sub_rejects_negative(self):
        with pytest.raises(ValueError):
            mi_sub((1, 0), (0, 1))

    @given(small_mi, small_mi)
    def test_binom_symmetry(self, k, l):
        total = mi_add(k, l)
        assert mi_binom(total, k) == mi_binom(total, l)
        assert mi_binom(total, k) == mi_factorial(total) // (
            mi_factorial(k) * mi_factorial(l)
        )

    def test_range_and_ball(self):
        assert mi_range((1, 1)) == [(0, 0), (0, 1), (1, 0), (1, 1)]
        assert set(mi_ball(2, 1)) == {(0, 0), (0, 1), (1, 0)}
        assert all(mi_leq(l, (2, 1)) for l in mi_range((2, 1)))


class TestPartitions:
    @given(st.integers(0, 5), st.integers(1, 4))
    def test_composition_count(self, total, c):
        import math

        assert len(compositions(total, c)) == math.comb(total + c - 1, c - 1)

    @given(small_mi, st.integers(1, 3))
    @settings(max_examples=30)
    def test_partition_count_and_sums(self, k, c):
        parts = partitions(k, c)
        assert len(parts) == partitions_count(k, c)
        for p in parts:
            acc = mi_zero(len(k))
            for q in p:
                acc = mi_add(acc, q)
            assert acc == k

    @given(small_mi, st.integers(1, 3))
    @settings(max_examples=30)
    def test_multinomial_sum(self, k, c):
        # sum over all partitions of the multinomial weights = c^|k| per axis
        total = sum(multinomial(k, p) for p in partitions(k, c))
        expected = 1
        for a in k:
            expected *= c**a
        assert total == expected

    def test_multinomial_rejects_bad_parts(self):
        with pytest.raises(ValueError):
            multinomial((2,), ((1,), (2,)))

    @pytest.mark.parametrize(
        "p,q,i", [((1,), (1,), 2), ((2,), (1,), 2), ((1, 1), (1, 0), 2), ((2,), (2,), 3)]
    )
    def test_vandermonde(self, p, q, i):
        assert vandermonde_check(p, q, i)


class TestCutSets:
    def test_partial_sum_and_margin(self):
        beta = (F(2, 5), F(-3, 4), F(3, 5))
        assert partial_sum(beta, 1, 2) == F(-7, 20)
        assert partial_sum(beta, 2, 1) == 0
        assert assumption_margin(beta) == F(3, 20)

    def test_cut_set_examples(self):
        assert cut_set((F(1, 2), F(-3, 4), F(2, 5))) == [1]
        assert cut_set((F(7, 20), F(3, 10), F(-11, 20), F(2, 5))) == [2]
        assert cut_set((F(2, 5), F(2, 5))) == []

    def test_chains_and_multicut(self):
        assert chains_through([1], 3) == [(0, 1, 3), (0, 3)]
        beta = (F(1, 2), F(-3, 4), F(2, 5))
        assert multicut_set(beta) == [(0, 1, 3), (0, 3)]

    @pytest.mark.parametrize(
        "beta",
        [
            (F(1, 2), F(-3, 4), F(2, 5)),
            (F(7, 20), F(3, 10), F(-11, 20), F(2, 5)),
            (F(3, 5), F(1, 2), F(-11, 20)),
            (F(2, 5), F(-3, 4), F(3, 5), F(-1, 4)),
        ],
    )
    def test_multicut_partition(self, beta):
        assert multicut_partition_ok(beta)
        classes = multicut_classes(beta)
        assert set(classes) == set(cut_set(beta))

    def test_multicut_two(self):
        b1 = (F(3, 5), F(1, 2), F(9, 20))
        b2 = (F(3, 5), F(1, 2), F(-11, 20))
        assert cut_set(b1) == []
        assert cut_set(b2) == [1, 2]
        assert multicut_two(b1, b2) == chains_through([1, 2], 3)
        with pytest.raises(ValueError):
            multicut_two(b2, b1)

    def test_ell_cut_set(self):
        beta = (F(1, 2), F(-3, 4))
        # zero junction weight: the only cut has radius min(1/2, 3/4)
        assert ell_cut_set(beta, ((0,),)) == [(1, F(1, 2))]
        # a non-zero junction weight disables the cut at its position
        assert ell_cut_set(beta, ((1,),)) == []
        # tail weight raises the last entry: -3/4 + 1 > 0, no cut survives
        assert ell_cut_set(beta, ((0,),), tail=(1,)) == []

    def test_e_i_sets(self):
        beta = (F(4, 5), F(-9, 20), F(7, 10))
        assert e_set(beta) == [2, 3]
        assert m0(beta) == 3
        assert i_set(beta) == [1, 2]
        assert m0((F(-1, 2), F(2, 5))) == 1

    def test_cut_report(self):
        rep = cut_report((F(1, 2), F(-3, 4), F(2, 5)))
        assert rep.cut == (1,)
        assert rep.multicuts == ((0, 1, 3), (0, 3))
        assert rep.m0 == 1
