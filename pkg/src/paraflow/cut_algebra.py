"""Exact combinatorics: multi-index partitions, multinomials, cut sets.

Multi-indices are tuples of non-negative ints of length d0.  Tuples of
multi-indices ("parts") represent the weight/derivative tuples attached to
operator slots.  All coefficients are exact rationals; sign decisions on
regularity tuples are made in exact Fraction arithmetic (callers pass dyadic
rationals, whose float representations are exact).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product as _iproduct


class ExactnessError(ArithmeticError):
    """A sign decision came too close to zero to be trusted."""


# ---------------------------------------------------------------------------
# multi-index helpers


def mi_zero(d0: int) -> tuple:
    return (0,) * d0


def mi_unit(d0: int, axis: int) -> tuple:
    return tuple(1 if a == axis else 0 for a in range(d0))


def mi_add(k, l) -> tuple:
    return tuple(a + b for a, b in zip(k, l))


def mi_sub(k, l) -> tuple:
    out = tuple(a - b for a, b in zip(k, l))
    if any(a < 0 for a in out):
        raise ValueError(f"negative multi-index in {k} - {l}")
    return out


def mi_abs(k) -> int:
    return sum(k)


def mi_leq(l, k) -> bool:
    return all(a <= b for a, b in zip(l, k))


def mi_factorial(k) -> int:
    out = 1
    for a in k:
        out *= math.factorial(a)
    return out


def mi_binom(k, l) -> int:
    """Product of per-axis binomial coefficients C(k_a, l_a); 0 if l > k."""
    if not mi_leq(l, k):
        return 0
    out = 1
    for a, b in zip(k, l):
        out *= math.comb(a, b)
    return out


def mi_range(k):
    """All multi-indices l <= k componentwise, in lexicographic order."""
    return [tuple(t) for t in _iproduct(*(range(a + 1) for a in k))]


def mi_ball(d0: int, radius: int):
    """All multi-indices with |l| <= radius, lexicographic order."""
    out = []
    for t in _iproduct(range(radius + 1), repeat=d0):
        if sum(t) <= radius:
            out.append(tuple(t))
    return out


def tuple_abs(parts) -> int:
    """|| (k_1..k_c) || = sum of |k_i|."""
    return sum(mi_abs(p) for p in parts)


def tuple_add(parts1, parts2) -> tuple:
    return tuple(mi_add(a, b) for a, b in zip(parts1, parts2))


# ---------------------------------------------------------------------------
# partitions and multinomials


def compositions(total: int, c: int):
    """All (n_1..n_c) of non-negative ints summing to total, lexicographic."""
    if c == 0:
        return [()] if total == 0 else []
    if c == 1:
        return [(total,)]
    out = []
    for first in range(total + 1):
        for rest in compositions(total - first, c - 1):
            out.append((first,) + rest)
    return out


def partitions(k, c: int):
    """The set P_c(k): tuples (k_1..k_c) of multi-indices summing to k.

    Deterministic lexicographic order; the count is
    prod_axes C(k_axis + c - 1, c - 1).
    """
    if c < 0:
        raise ValueError("c must be >= 0")
    if c == 0:
        return [()] if mi_abs(k) == 0 else []
    if c == 1:
        return [(tuple(k),)]
    out = []
    for first in mi_range(k):
        for rest in partitions(mi_sub(k, first), c - 1):
            out.append((first,) + rest)
    return out


def partitions_count(k, c: int) -> int:
    out = 1
    for a in k:
        out *= math.comb(a + c - 1, c - 1)
    return out


def multinomial(k, parts) -> Fraction:
    """Exact k! / prod parts! for parts summing to k."""
    acc = mi_zero(len(k))
    for p in parts:
        acc = mi_add(acc, p)
    if acc != tuple(k):
        raise ValueError(f"parts {parts} do not sum to {k}")
    den = 1
    for p in parts:
        den *= mi_factorial(p)
    return Fraction(mi_factorial(k), den)


def vandermonde_check(p, q, i: int) -> bool:
    """Generalized Vandermonde: for every r-tuple in P_i(p+q),
    sum over compatible (p-tuple, q-tuple) splittings of r!/(p!q!) equals
    the aggregate r!/(p!q!).  Exact arithmetic."""
    if i < 1:
        raise ValueError("i must be >= 1")
    r = mi_add(p, q)
    rhs = Fraction(mi_factorial(r), mi_factorial(p) * mi_factorial(q))
    for rr in partitions(r, i):
        lhs = Fraction(0)
        for pp in partitions(p, i):
            ok = all(mi_leq(ppart, rpart) for ppart, rpart in zip(pp, rr))
            if not ok:
                continue
            term = Fraction(1)
            for rpart, ppart in zip(rr, pp):
                qpart = mi_sub(rpart, ppart)
                term *= Fraction(
                    mi_factorial(rpart), mi_factorial(ppart) * mi_factorial(qpart)
                )
            lhs += term
        if lhs != rhs:
            return False
    return True


# ---------------------------------------------------------------------------
# cut sets


def _fr(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def partial_sum(beta, a: int, b: int) -> Fraction:
    """Sum of beta_a..beta_b, 1-based inclusive; 0 for empty range."""
    return sum((_fr(x) for x in beta[a - 1 : b]), Fraction(0))


def assumption_margin(beta) -> Fraction:
    """Min distance of all consecutive partial sums to the integers."""
    n = len(beta)
    best = None
    for a in range(1, n + 1):
        for b in range(a, n + 1):
            s = partial_sum(beta, a, b)
            frac = s - round(s)
            d = abs(frac)
            if best is None or d < best:
                best = d
    return best


def _guard_sign(s: Fraction, margin) -> int:
    if margin is not None and margin > 0 and s != 0 and abs(s) <= margin / 2:
        raise ExactnessError(f"partial sum {s} inside exactness guard {margin}/2")
    return (s > 0) - (s < 0)


def cut_set(beta):
    """Cut(beta) = {d : sum(beta_1..beta_d) > 0 and sum(beta_{d+1}..beta_n) < 0}."""
    n = len(beta)
    margin = assumption_margin(beta)
    out = []
    for d in range(1, n):
        head = _guard_sign(partial_sum(beta, 1, d), margin)
        tail = _guard_sign(partial_sum(beta, d + 1, n), margin)
        if head > 0 and tail < 0:
            out.append(d)
    return out


def chains_through(points, n: int):
    """All increasing chains 0 = d_0 < ... < d_m = n with interior points
    drawn from `points`; includes the trivial chain (0, n)."""
    pts = sorted(set(points))
    out = []
    for mask in range(1 << len(pts)):
        interior = tuple(p for j, p in enumerate(pts) if mask >> j & 1)
        out.append((0,) + interior + (n,))
    return sorted(out)


def multicut_set(beta):
    return chains_through(cut_set(beta), len(beta))


def multicut_classes(beta):
    """Partition of the nontrivial multicut chains by the interior point with
    the minimal head partial sum.  Requires unique minima (guaranteed under
    Assumption (A)); raises ExactnessError on ties."""
    n = len(beta)
    classes: dict[int, list] = {d: [] for d in cut_set(beta)}
    for chain in multicut_set(beta):
        interior = chain[1:-1]
        if not interior:
            continue
        sums = [(partial_sum(beta, 1, d), d) for d in interior]
        best = min(s for s, _ in sums)
        winners = [d for s, d in sums if s == best]
        if len(winners) > 1:
            raise ExactnessError(f"tied multicut minima {winners} for beta={beta}")
        classes[winners[0]].append(chain)
    return classes


def multicut_partition_ok(beta) -> bool:
    """Check MultiCut(beta) = {(0,n)} + disjoint union of the [d] classes."""
    n = len(beta)
    all_chains = set(multicut_set(beta))
    acc = {(0, n)}
    for chains in multicut_classes(beta).values():
        for ch in chains:
            if ch in acc:
                return False
            acc.add(ch)
    return acc == all_chains


def multicut_two(beta1, beta2):
    """Chains through Cut(beta1) | Cut(beta2); requires beta2 <= beta1."""
    if len(beta1) != len(beta2):
        raise ValueError("length mismatch")
    for x, y in zip(beta1, beta2):
        if _fr(y) > _fr(x):
            raise ValueError("need beta2 <= beta1 componentwise")
    pts = set(cut_set(beta1)) | set(cut_set(beta2))
    return chains_through(pts, len(beta1))


def ell_cut_set(beta, ell, tail=None):
    """ell-admissible cuts of beta with their radii r_d.

    `ell` has c-1 parts for beta of length c; the trailing weight slot
    (position c) defaults to zero and enters the weighted partial sums.
    Returns [(d, r_d)] with
      d in 1..c-1, ell_d = 0,
      head = sum_{e<=d} (beta_e + |ell_e|) > 0,
      tail = sum_{e>d} (beta_e + |ell_e|) < 0,
      r_d = min(head, -tail).
    """
    c = len(beta)
    if len(ell) != c - 1:
        raise ValueError(f"ell must have {c - 1} parts, got {len(ell)}")
    if tail is None:
        d0 = len(ell[0]) if ell else 1
        tail = mi_zero(d0)
    weights = [_fr(b) for b in beta]
    for e, l in enumerate(ell):
        weights[e] += mi_abs(l)
    weights[c - 1] += mi_abs(tail)
    out = []
    for d in range(1, c):
        if mi_abs(ell[d - 1]) != 0:
            continue
        head = sum(weights[:d], Fraction(0))
        tl = sum(weights[d:], Fraction(0))
        if head > 0 and tl < 0:
            out.append((d, min(head, -tl)))
    return out


def e_set(beta):
    """E_beta = {c in 1..n : sum(beta_1..beta_{c-1}) > 0 and sum(beta_c..beta_n) > 0}.

    The head sum is empty for c = 1 (equals 0, which is not > 0), so 1 is
    never a member; m0 falls back to 1 when E_beta is empty.
    """
    n = len(beta)
    margin = assumption_margin(beta)
    out = []
    for c in range(2, n + 1):
        if (
            _guard_sign(partial_sum(beta, 1, c - 1), margin) > 0
            and _guard_sign(partial_sum(beta, c, n), margin) > 0
        ):
            out.append(c)
    return out


def m0(beta) -> int:
    """max E_beta, or 1 when E_beta is empty."""
    e = e_set(beta)
    return max(e) if e else 1


def i_set(beta):
    """I(beta) = {c in 1..n-1 : head sum > 0 and tail sum > 0}."""
    n = len(beta)
    margin = assumption_margin(beta)
    out = []
    for c in range(1, n):
        if (
            _guard_sign(partial_sum(beta, 1, c), margin) > 0
            and _guard_sign(partial_sum(beta, c + 1, n), margin) > 0
        ):
            out.append(c)
    return out


@dataclass(frozen=True)
class CutReport:
    beta: tuple
    cut: tuple
    multicuts: tuple
    e_beta: tuple
    m0: int
    i_beta: tuple


def cut_report(beta) -> CutReport:
    return CutReport(
        beta=tuple(beta),
        cut=tuple(cut_set(beta)),
        multicuts=tuple(multicut_set(beta)),
        e_beta=tuple(e_set(beta)),
        m0=m0(beta),
        i_beta=tuple(i_set(beta)),
    )
