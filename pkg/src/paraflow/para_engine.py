"""Paraproduct-type operators.

Grid-function level: the paraproduct P(f,g), iterated P(f_1..f_n), weighted
P_ell, and the weighted twisted operator P~^beta_ell (with ell-cut correction
terms).  Block-sequence level: the simplified iterated paraproduct P_<, the
twisted P~^beta_< and two-tuple P~^{beta1,beta2}_<, star derivatives, and the
Taylor-remainder operators Delta_{h,o}.

All infinite sums are finite here because block sequences carry finitely many
levels and grid spectra are finite.  Signed sums over multicut chains use a
deterministic pairwise tree reduction for bitwise reproducibility.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .cut_algebra import (
    ell_cut_set,
    mi_abs,
    mi_ball,
    mi_binom,
    mi_factorial,
    mi_range,
    mi_sub,
    mi_zero,
    multicut_set,
    multicut_two,
    multinomial,
    partitions,
    cut_set,
)
from .dyadic_core import (
    BlockSequence,
    GridFunction,
    constant,
    derive,
    derive_fn,
    get_bank,
    lp_project,
    lp_project_below,
    lp_project_weighted_below,
    taylor_poly,
    taylor_poly_fn,
    taylor_remainder,
    taylor_remainder_fn,
    translate,
    translate_fn,
)


@dataclass(frozen=True)
class TwistedSpec:
    beta: tuple
    beta2: tuple | None = None
    ell_tuple: tuple | None = None
    star_k: tuple | None = None


@dataclass(frozen=True)
class RemainderSpec:
    h: tuple
    o: float
    a: int = 0
    alpha: tuple = ()


def _beta_of(spec):
    return spec.beta if isinstance(spec, TwistedSpec) else tuple(spec)


def tree_sum(terms):
    """Deterministic pairwise tree reduction of a list of grid functions."""
    items = list(terms)
    if not items:
        raise ValueError("empty sum")
    while len(items) > 1:
        nxt = []
        for j in range(0, len(items) - 1, 2):
            nxt.append(items[j] + items[j + 1])
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


def _h_pow(h, k) -> float:
    out = 1.0
    for axis, power in enumerate(k):
        out *= float(h[axis]) ** power
    return out


def _h_abs(h) -> float:
    return float(np.sqrt(sum(float(x) ** 2 for x in h)))


# ---------------------------------------------------------------------------
# grid-function level paraproducts


def para(f: GridFunction, g: GridFunction) -> GridFunction:
    """P(f, g) = sum_{i >= 1} Delta_{<i-1} f . Delta_i g."""
    if f.grid != g.grid:
        raise ValueError("grid mismatch")
    terms = [
        lp_project_below(f, i - 1) * lp_project(g, i)
        for i in range(1, f.grid.i_max + 1)
    ]
    return tree_sum(terms)


def para_iterated(fs) -> GridFunction:
    """P(f_1..f_n) = P(P(f_1..f_{n-1}), f_n); P(f) = f."""
    fs = list(fs)
    if not fs:
        raise ValueError("empty operand list")
    acc = fs[0]
    for f in fs[1:]:
        acc = para(acc, f)
    return acc


def para_pair_weighted(f: GridFunction, g: GridFunction, ell) -> GridFunction:
    """P_ell(f, g) = sum_{i >= 1} (Delta^ell_{<i-1} f)(Delta_i g)."""
    if f.grid != g.grid:
        raise ValueError("grid mismatch")
    terms = [
        lp_project_weighted_below(f, i - 1, ell) * lp_project(g, i)
        for i in range(1, f.grid.i_max + 1)
    ]
    return tree_sum(terms)


def para_weighted(fs, ell) -> GridFunction:
    """Weighted iterated paraproduct P_ell(f_1..f_c).

    `ell` holds the c-1 junction weights; the recursion consumes one function
    and one weight at a time (the first slot is vacuous).  A trailing weight
    slot, if carried by callers, does not act analytically and is not passed
    here.
    """
    fs = list(fs)
    if len(ell) != len(fs) - 1:
        raise ValueError(f"need {len(fs) - 1} junction weights, got {len(ell)}")
    acc = fs[0]
    for f, l in zip(fs[1:], ell):
        acc = para_pair_weighted(acc, f, l)
    return acc


def twisted_weighted(beta, ell, fs, tail=None) -> GridFunction:
    """P~^beta_ell(g_1..g_c): P_ell minus the ell-cut correction terms.

    `ell` has c-1 junction parts and `tail` is the trailing weight slot
    (default 0; it enters the cut sums but not the analytic evaluation).
    Grounding: a single operand is returned as is.
    """
    fs = list(fs)
    c = len(fs)
    if c == 1:
        return fs[0]
    beta = tuple(beta)
    ell = tuple(tuple(l) for l in ell)
    d0 = len(ell[0]) if ell else fs[0].grid.dim
    if tail is None:
        tail = mi_zero(d0)
    base = para_weighted(fs, ell)
    corrections = []
    for d, r_d in ell_cut_set(beta, ell, tail):
        cap = int(r_d) if r_d == int(r_d) else int(np.floor(float(r_d)))
        for m in mi_ball(d0, max(cap, 0)):
            if not Fraction(mi_abs(m)) < r_d:
                continue
            for mm in partitions(m, d):
                for mm2 in partitions(m, c - d):
                    coef = Fraction(mi_factorial(m))
                    for part in mm:
                        coef /= mi_factorial(part)
                    for part in mm2:
                        coef /= mi_factorial(part)
                    beta_left = tuple(
                        Fraction(b) - mi_abs(mj) for b, mj in zip(beta[:d], mm)
                    )
                    left = twisted_weighted(
                        beta_left,
                        ell[: d - 1],
                        [derive_fn(f, mj) for f, mj in zip(fs[:d], mm)],
                        tail=ell[d - 1],
                    )
                    # right slots d+1..c: junctions ell[d:] plus trailing tail,
                    # each shifted by the corresponding part of mm2
                    right_slots = list(ell[d:]) + [tail]
                    shifted = [
                        tuple(x + y for x, y in zip(s, mj))
                        for s, mj in zip(right_slots, mm2)
                    ]
                    right = twisted_weighted(
                        beta[d:], tuple(shifted[:-1]), fs[d:], tail=shifted[-1]
                    )
                    corrections.append(left * right * float(coef))
    if not corrections:
        return base
    return base - tree_sum(corrections)


# ---------------------------------------------------------------------------
# simplified iterated paraproducts on block sequences


def simp_para(seqs) -> BlockSequence:
    """P_<(f_1..f_n): blocks P_<(..)_i = Delta_{<i-1}(P_<(f_1..f_{n-1})) f_{n,i}.

    Delta_{<i-1} acts at sequence level (sum of blocks at levels <= i-2);
    output blocks are raw products, not band-limited.
    """
    seqs = list(seqs)
    if not seqs:
        raise ValueError("empty operand list")
    if len(seqs) == 1:
        return seqs[0]
    prev = simp_para(seqs[:-1])
    last = seqs[-1]
    blocks = []
    for i in last.levels():
        blocks.append(prev.partial_below(i - 1) * last.block(i))
    return BlockSequence(last.grid, blocks, band_limited=False)


def simp_para_block(seqs, i: int) -> GridFunction:
    return simp_para(seqs).block(i)


def _chain_factors(chain, seqs):
    """The consecutive slices (h_{d_{e-1}+1}..h_{d_e}) of a multicut chain."""
    return [seqs[chain[e - 1] : chain[e]] for e in range(1, len(chain))]


def _twisted_from_chains(chains, seqs, i=None) -> GridFunction:
    grid = seqs[0].grid
    terms = []
    for chain in chains:
        sign = -1.0 if len(chain) % 2 else 1.0  # (-1)^{n(d)+1}, n(d)=len-1
        factors = _chain_factors(chain, seqs)
        acc = constant(grid, 1.0)
        for e, fac in enumerate(factors):
            sub = simp_para(fac)
            if i is not None and e == len(factors) - 1:
                acc = acc * sub.block(i)
            else:
                acc = acc * sub.summed()
        terms.append(acc * sign)
    return tree_sum(terms)


def twisted_simp(spec, seqs) -> GridFunction:
    """P~^beta_<(h_1..h_n): signed sum over multicut chains of P_< products."""
    beta = _beta_of(spec)
    return _twisted_from_chains(multicut_set(beta), list(seqs), None)


def twisted_simp_block(spec, seqs, i: int) -> GridFunction:
    """P~^beta_<(h_1..h_n){i}: the {i} lands on the last factor of each chain."""
    beta = _beta_of(spec)
    return _twisted_from_chains(multicut_set(beta), list(seqs), i)


def twisted_two(spec, seqs, beta2=None, i=None) -> GridFunction:
    """Two-tuple P~^{beta1,beta2}_<: chains through Cut(beta1) | Cut(beta2)."""
    if isinstance(spec, TwistedSpec):
        beta1, beta2 = spec.beta, spec.beta2
    else:
        beta1 = tuple(spec)
    if beta2 is None:
        raise ValueError("beta2 required")
    return _twisted_from_chains(multicut_two(beta1, beta2), list(seqs), i)


def twisted_oracle(spec, seqs, i: int, level_cap: int) -> GridFunction:
    """Nested-sum form of P~^beta_<{i}: rho-signed sum over index chains with
    thresholds rho_c (i_{c+1} - i_c + 3/2) > 0; must equal twisted_simp_block.
    """
    beta = _beta_of(spec)
    seqs = list(seqs)
    n = len(seqs)
    grid = seqs[0].grid
    if n == 1:
        return seqs[0].block(i)
    cut = set(cut_set(beta))
    rhos = [1 if (n - c) in cut else -1 for c in range(1, n)]  # rho_1..rho_{n-1}
    sign = 1.0
    for r in rhos:
        sign *= -r
    levels = range(-1, level_cap + 1)
    terms = []

    def rec(idx_chain):
        # idx_chain = (i_1, ..., i_m); i_1 = i fixed
        m = len(idx_chain)
        if m == n:
            # factor c pairs with index i_{n-c+1}
            acc = constant(grid, 1.0)
            for c in range(1, n + 1):
                acc = acc * seqs[c - 1].block(idx_chain[n - c])
            terms.append(acc)
            return
        rho = rhos[m - 1]
        for nxt in levels:
            if rho * (nxt - idx_chain[-1] + 1.5) > 0:
                rec(idx_chain + (nxt,))

    rec((i,))
    if not terms:
        return constant(grid, 0.0)
    return tree_sum(terms) * sign


# ---------------------------------------------------------------------------
# star derivatives


def star_derivative_tuple(alpha, k_parts, seqs, i=None) -> GridFunction:
    """d^k_{*alpha} P_< for a fixed partition: P~^{alpha-|k|}_<(d^{k_j} f_j)."""
    seqs = list(seqs)
    if len(k_parts) != len(seqs):
        raise ValueError("partition arity mismatch")
    beta = tuple(Fraction(a) - mi_abs(kj) for a, kj in zip(alpha, k_parts))
    derived = [derive(s, kj) for s, kj in zip(seqs, k_parts)]
    if i is None:
        return twisted_simp(beta, derived)
    return twisted_simp_block(beta, derived, i)


def star_derivative(alpha, k, seqs, i=None) -> GridFunction:
    """d^k_{*alpha} P_< = sum over partitions of binomial-weighted tuples."""
    seqs = list(seqs)
    n = len(seqs)
    k = tuple(k)
    terms = []
    for parts in partitions(k, n):
        coef = float(multinomial(k, parts))
        terms.append(star_derivative_tuple(alpha, parts, seqs, i) * coef)
    return tree_sum(terms)


def star_derivative_twisted_tuple(beta, k_parts, seqs, i=None) -> GridFunction:
    """d^k_* P~^beta for a fixed partition: P~^{beta, beta-|k|}_<(d^{k_j} f_j)."""
    seqs = list(seqs)
    beta = tuple(Fraction(b) for b in beta)
    beta2 = tuple(b - mi_abs(kj) for b, kj in zip(beta, k_parts))
    derived = [derive(s, kj) for s, kj in zip(seqs, k_parts)]
    return twisted_two(beta, derived, beta2=beta2, i=i)


def star_derivative_twisted(beta, k, seqs, i=None) -> GridFunction:
    seqs = list(seqs)
    k = tuple(k)
    terms = []
    for parts in partitions(k, len(seqs)):
        coef = float(multinomial(k, parts))
        terms.append(star_derivative_twisted_tuple(beta, parts, seqs, i) * coef)
    return tree_sum(terms)


# ---------------------------------------------------------------------------
# Taylor-remainder operators Delta_{h,o}


def _shifted_tuple(alpha, b_rel, k_parts, o, k_total):
    """alpha_a(k, o) for operands alpha (the tail tuple alpha_{a+1..n}):
    (alpha_1 - |k_1|, .., alpha_{b-1} - |k_{b-1}|, alpha_b - o + |k|,
     alpha_{b+1}, .., alpha_m), 1-based relative to the operand list."""
    alpha = [Fraction(x) for x in alpha]
    out = []
    for j in range(b_rel - 1):
        out.append(alpha[j] - mi_abs(k_parts[j]))
    out.append(alpha[b_rel - 1] - Fraction(o) + mi_abs(k_total))
    out.extend(alpha[b_rel:])
    return tuple(out)


def _delta_operands(seqs, b_rel, k_parts, h, o, k_total, allow_offgrid):
    ops = []
    for j in range(b_rel - 1):
        ops.append(derive(seqs[j], k_parts[j]))
    ops.append(taylor_remainder(seqs[b_rel - 1], h, float(o) - mi_abs(k_total), allow_offgrid))
    for j in range(b_rel, len(seqs)):
        ops.append(translate(seqs[j], h, allow_offgrid))
    return ops


def _delta_terms(seqs, h, o, d0, allow_offgrid):
    """Common enumeration for the Delta_{h,o} sums: yields
    (b_rel, k, k_parts, scalar coefficient, operand list)."""
    m = len(seqs)
    habs = _h_abs(h)
    for b_rel in range(1, m + 1):
        for k in mi_ball(d0, max(int(np.ceil(o)) - 1, 0)):
            if not mi_abs(k) < o:
                continue
            for k_parts in partitions(k, b_rel - 1):
                coef = _h_pow(h, k) * habs ** (float(o) - mi_abs(k))
                for part in k_parts:
                    coef /= mi_factorial(part)
                ops = _delta_operands(seqs, b_rel, k_parts, h, o, k, allow_offgrid)
                yield b_rel, k, k_parts, coef, ops


def remainder_delta(alpha, h, o, seqs, i=None, allow_offgrid=False) -> GridFunction:
    """(Delta^alpha_{h,o} P_<)(f_1..f_m) (block i when given).

    `alpha` are the regularities of the operands; the double sum runs over the
    slot b carrying the Taylor remainder and the derivative partitions on the
    slots before it, with the tail slots translated.  Empty operand lists give
    0 (the b-sum is empty).
    """
    seqs = list(seqs)
    if not seqs:
        raise ValueError("empty operand list; the empty sum is 0 by convention")
    grid = seqs[0].grid
    if o <= 0:
        raise ValueError("o must be positive")
    terms = []
    for b_rel, k, k_parts, coef, ops in _delta_terms(seqs, h, o, grid.dim, allow_offgrid):
        beta = _shifted_tuple(alpha, b_rel, k_parts, o, k)
        if i is None:
            terms.append(twisted_simp(beta, ops) * coef)
        else:
            terms.append(twisted_simp_block(beta, ops, i) * coef)
    return tree_sum(terms)


def remainder_delta_twisted(beta, h, o, seqs, i=None, allow_offgrid=False) -> GridFunction:
    """(Delta_{h,o} P~^beta_<)(f_1..f_m) (block i when given): as above but the
    twisted factor is the two-tuple P~^{beta, beta(k,o)}_<."""
    seqs = list(seqs)
    if not seqs:
        raise ValueError("empty operand list; the empty sum is 0 by convention")
    grid = seqs[0].grid
    if o <= 0:
        raise ValueError("o must be positive")
    beta = tuple(Fraction(b) for b in beta)
    terms = []
    for b_rel, k, k_parts, coef, ops in _delta_terms(seqs, h, o, grid.dim, allow_offgrid):
        beta_shift = _shifted_tuple(beta, b_rel, k_parts, o, k)
        terms.append(twisted_two(beta, ops, beta2=beta_shift, i=i) * coef)
    return tree_sum(terms)

# ---------------------------------------------------------------------------
# local-expansion remainder for a pair paraproduct


def _star_derivative_pair_fn(f: GridFunction, g: GridFunction, alpha, k) -> GridFunction:
    """The generalized derivative of P(f,g): the plain derivative minus the
    divergent cross terms (low derivative on f, order >= a2 on g)."""
    a1, a2 = (float(a) for a in alpha)
    out = derive_fn(para(f, g), k)
    for k1 in mi_range(k):
        k2 = mi_sub(k, k1)
        if mi_abs(k1) < a1 and mi_abs(k2) >= a2:
            out = out - derive_fn(f, k1) * derive_fn(g, k2) * float(mi_binom(k, k1))
    return out


def pair_expansion_remainder(f, g, alpha, h, allow_offgrid=False) -> GridFunction:
    """The local-expansion remainder of P(f,g) at shift h, as a function of
    the base point: P(f,g)(.+h) minus the generalized-derivative jet of order
    a1+a2 minus the controlled term (jet of f at order a1) x (Taylor remainder
    of g at order a2).  Its sup norm scales like |h|^{a1+a2}."""
    a1, a2 = (float(a) for a in alpha)
    grid = f.grid
    out = translate_fn(para(f, g), h, allow_offgrid)
    cap = max(int(np.ceil(a1 + a2)) - 1, 0)
    for k in mi_ball(grid.dim, cap):
        if not mi_abs(k) < a1 + a2:
            continue
        out = out - _star_derivative_pair_fn(f, g, alpha, k) * (_h_pow(h, k) / mi_factorial(k))
    rem_g = taylor_remainder_fn(g, h, a2, allow_offgrid) * (_h_abs(h) ** a2)
    return out - taylor_poly_fn(f, h, a1) * rem_g
