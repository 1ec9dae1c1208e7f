"""Exact symbolic engine for the iterated-paraproduct regularity structures.

Symbols are segments of an index range (or words over an alphabet) carrying
junction weights, a trailing weight slot, optional derivative decorations and
a polynomial factor.  The engine provides the truncated bases, the exact
gradings, the two splitting maps (the coproduct on the T sector and the
coproduct on the T+ algebra), the comodule/coassociativity verifier, the
character group (convolution and inverse), and the auxiliary "hat" symbol
family with its cut/multicut chain combinatorics.

All coefficients are exact rationals; formal-sum equality is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

from .cut_algebra import (
    mi_abs,
    mi_add,
    mi_ball,
    mi_binom,
    mi_factorial,
    mi_range,
    mi_sub,
    mi_zero,
    partitions,
    tuple_abs,
    tuple_add,
)


# ---------------------------------------------------------------------------
# symbols


@dataclass(frozen=True)
class Sym:
    """A basis symbol.

    plus   -- sector flag: False for the T sector, True for the T+ algebra
              (and for hat symbols, which carry both decorations).
    labels -- the index/letter sequence; empty for pure polynomials.
    ell    -- junction weight multi-indices (len(labels)-1 of them).
    tail   -- the trailing weight slot (None iff labels is empty).
    k      -- derivative decorations, one per label (T+ / hat only).
    p      -- the polynomial factor X^p.
    """

    plus: bool
    labels: tuple
    ell: tuple
    tail: tuple | None
    k: tuple | None
    p: tuple

    def slots(self) -> tuple:
        """All weight slots: junctions then the trailing slot."""
        return self.ell + ((self.tail,) if self.tail is not None else ())

    def is_poly(self) -> bool:
        return not self.labels

    def is_unit(self) -> bool:
        return not self.labels and mi_abs(self.p) == 0


def poly_sym(d0: int, p, plus: bool) -> Sym:
    return Sym(plus, (), (), None, None, tuple(p))


def unit_plus(d0: int) -> Sym:
    return poly_sym(d0, mi_zero(d0), True)


def seg_sym(labels, ell, tail, k=None, p=None, d0=None, plus=None) -> Sym:
    labels = tuple(labels)
    ell = tuple(tuple(e) for e in ell)
    if d0 is None:
        d0 = len(tail) if tail is not None else len(ell[0])
    if len(ell) != len(labels) - 1:
        raise ValueError("need one junction weight per adjacent pair")
    tail = tuple(tail) if tail is not None else mi_zero(d0)
    if k is not None:
        k = tuple(tuple(x) for x in k)
        if len(k) != len(labels):
            raise ValueError("need one derivative decoration per label")
    if plus is None:
        plus = k is not None
    if plus and k is None:
        k = tuple(mi_zero(d0) for _ in labels)
    p = tuple(p) if p is not None else mi_zero(d0)
    return Sym(plus, labels, ell, tail, k, p)


def sym_str(s: Sym) -> str:
    if s.is_poly():
        core = "1+" if (s.plus and s.is_unit()) else f"X^{list(s.p)}"
        return core
    body = ",".join(str(x) for x in s.labels)
    out = f"[{body}]"
    if s.k is not None:
        out += f"^k{[list(x) for x in s.k]}"
    out += f"_l{[list(x) for x in s.slots()]}"
    if mi_abs(s.p):
        out += f" X^{list(s.p)}"
    return out


# ---------------------------------------------------------------------------
# formal sums


class FormalSum:
    """A finite linear combination with exact rational coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms: dict = {}
        if terms:
            for key, coeff in terms:
                self.add_term(key, coeff)

    def add_term(self, key, coeff):
        coeff = Fraction(coeff)
        cur = self.terms.get(key, Fraction(0)) + coeff
        if cur == 0:
            self.terms.pop(key, None)
        else:
            self.terms[key] = cur

    def __add__(self, other: "FormalSum") -> "FormalSum":
        out = FormalSum()
        out.terms = dict(self.terms)
        for key, coeff in other.terms.items():
            out.add_term(key, coeff)
        return out

    def __sub__(self, other: "FormalSum") -> "FormalSum":
        return self + other.scale(-1)

    def scale(self, c) -> "FormalSum":
        c = Fraction(c)
        out = FormalSum()
        if c != 0:
            out.terms = {key: coeff * c for key, coeff in self.terms.items()}
        return out

    def items(self):
        return self.terms.items()

    def __len__(self):
        return len(self.terms)

    def __eq__(self, other):
        return isinstance(other, FormalSum) and self.terms == other.terms

    def __repr__(self):
        if not self.terms:
            return "0"
        return " + ".join(f"({c})*{k}" for k, c in sorted(self.terms.items(), key=repr))

    def filter(self, pred) -> "FormalSum":
        out = FormalSum()
        out.terms = {key: c for key, c in self.terms.items() if pred(key)}
        return out


# ---------------------------------------------------------------------------
# structures


@dataclass(frozen=True)
class Structure:
    """A label set with sizes; parameterizes the symbol algebra.

    kind "segment": labels are 1..n, basis segments are contiguous ranges,
    and the basis truncation includes the cap max(|k|, |l|) < sum |sizes|.
    kind "word": labels are letters, basis sequences are words, no cap.
    """

    d0: int
    kind: str
    size_items: tuple

    def sizes(self) -> dict:
        return dict(self.size_items)

    def size(self, label) -> Fraction:
        return dict(self.size_items)[label]

    def seq_size(self, labels) -> Fraction:
        table = dict(self.size_items)
        return sum((table[l] for l in labels), Fraction(0))

    def global_cap(self):
        if self.kind != "segment":
            return None
        return sum((abs(v) for _, v in self.size_items), Fraction(0))


def segment_structure(alpha, d0: int) -> Structure:
    items = tuple((j + 1, Fraction(a)) for j, a in enumerate(alpha))
    return Structure(d0, "segment", items)


def word_structure(sizes: dict, d0: int) -> Structure:
    items = tuple(sorted((l, Fraction(v)) for l, v in sizes.items()))
    return Structure(d0, "word", items)


def degree(struct: Structure, s: Sym) -> Fraction:
    out = struct.seq_size(s.labels) + Fraction(mi_abs(s.p))
    for slot in s.slots():
        out += mi_abs(slot)
    if s.k is not None:
        out -= tuple_abs(s.k)
    return out


def counit(s: Sym) -> Fraction:
    return Fraction(1) if s.is_unit() else Fraction(0)


def _below(bound: Fraction) -> int:
    """Largest integer strictly below the rational bound (-1 if none >= 0)."""
    if bound <= 0:
        return -1
    n = bound.numerator // bound.denominator
    return n - 1 if bound == n else n


def in_plus_basis(struct: Structure, s: Sym) -> bool:
    """Membership of a decorated segment/word in the B+ generator set:
    positive degree, and (segments only) max(|k|, |l|) < sum |sizes|."""
    if s.is_poly():
        return mi_abs(s.p) <= 1
    if degree(struct, s) <= 0:
        return False
    cap = struct.global_cap()
    if cap is not None:
        l_norm = sum(mi_abs(slot) for slot in s.slots())
        k_norm = tuple_abs(s.k) if s.k is not None else 0
        if not (Fraction(max(k_norm, l_norm)) < cap):
            return False
    return True


# ---------------------------------------------------------------------------
# coproducts


def _cut_positions(s: Sym):
    """Admissible cut positions (1-based slot indices): junction cuts require
    a zero weight there; the full cut (last position) is always admissible,
    with the trailing weight carried onto the prefix leg."""
    slots = s.slots()
    m = len(slots)
    return [c for c, slot in enumerate(slots, start=1) if c == m or mi_abs(slot) == 0]


def _with_poly(base: FormalSum, p, d0: int) -> FormalSum:
    """Multiplicative extension by the binomial splitting of X^p: each tensor
    term (left, right) becomes (left X^{p1}, right X^{p2})."""
    if mi_abs(p) == 0:
        return base
    out = FormalSum()
    for (left, right), coeff in base.items():
        for p1 in mi_range(p):
            p2 = mi_sub(p, p1)
            l2 = Sym(left.plus, left.labels, left.ell, left.tail, left.k, mi_add(left.p, p1))
            r2 = Sym(right.plus, right.labels, right.ell, right.tail, right.k, mi_add(right.p, p2))
            out.add_term((l2, r2), coeff * mi_binom(p, p1))
    return out


def _poly_coproduct(d0: int, p, left_plus: bool) -> FormalSum:
    out = FormalSum()
    for p1 in mi_range(p):
        p2 = mi_sub(p, p1)
        out.add_term((poly_sym(d0, p1, left_plus), poly_sym(d0, p2, True)), mi_binom(p, p1))
    return out


def coproduct(struct: Structure, tau: Sym) -> FormalSum:
    """The splitting T -> T (x) T+.

    Cuts happen at zero weight slots; the right leg is the prefix with a
    derivative decoration k', the left leg the suffix with the weight shift
    k1 distributed over all remaining slots (trailing included) and a
    polynomial factor X^{k2}, with coefficient k!/(k'! k1! k2!).
    """
    if tau.plus:
        raise ValueError("coproduct acts on the T sector")
    d0 = struct.d0
    if tau.is_poly():
        return _poly_coproduct(d0, tau.p, left_plus=False)
    base = FormalSum()
    base.add_term((Sym(False, tau.labels, tau.ell, tau.tail, None, mi_zero(d0)), unit_plus(d0)), 1)
    m = len(tau.labels)
    slots = tau.slots()
    for c in _cut_positions(tau):
        pre_labels, pre_ell, pre_tail = tau.labels[:c], tau.ell[: c - 1], slots[c - 1]
        suf_labels, suf_slots = tau.labels[c:], slots[c:]
        # admissibility bounds ignore the (analytically vacuous) trailing slot
        pre_l_norm = Fraction(sum(mi_abs(e) for e in pre_ell))
        head = struct.seq_size(pre_labels) + pre_l_norm
        kmax = _below(head)
        cap = struct.global_cap()
        if cap is not None:
            if not (pre_l_norm < cap):
                continue
            kmax = min(kmax, _below(cap))
        for k in mi_ball(d0, max(kmax, 0)):
            if kmax < 0 or mi_abs(k) > kmax:
                continue
            kfact = mi_factorial(k)
            for kp in partitions(k, c):
                right = Sym(True, pre_labels, pre_ell, pre_tail, kp, mi_zero(d0))
                for k1 in mi_range(k):
                    k2 = mi_sub(k, k1)
                    for k1_parts in partitions(k1, m - c):
                        coeff = Fraction(kfact, mi_factorial(k2))
                        for part in kp + k1_parts:
                            coeff /= mi_factorial(part)
                        new_slots = tuple_add(suf_slots, k1_parts)
                        if suf_labels:
                            left = Sym(False, suf_labels, new_slots[:-1], new_slots[-1], None, k2)
                        else:
                            left = poly_sym(d0, k2, False)
                        base.add_term((left, right), coeff)
    return _with_poly(base, tau.p, d0)


def coproduct_plus(struct: Structure, mu: Sym) -> FormalSum:
    """The splitting T+ -> T+ (x) T+ on a generator times X^p.

    Besides the mu (x) 1+ and 1+ (x) mu terms: cuts at interior zero slots are
    kept when the bare suffix has positive degree (the polynomial additions do
    not enter this filter); the full-prefix cut produces the Taylor legs
    X^p/p'! (x) mu^{k+p'}.
    """
    if not mu.plus:
        raise ValueError("coproduct_plus acts on the T+ sector")
    d0 = struct.d0
    if mu.is_poly():
        return _poly_coproduct(d0, mu.p, left_plus=True)
    gen = Sym(True, mu.labels, mu.ell, mu.tail, mu.k, mi_zero(d0))
    base = FormalSum()
    base.add_term((gen, unit_plus(d0)), 1)
    base.add_term((unit_plus(d0), gen), 1)
    m = len(mu.labels)
    slots = mu.slots()
    cap = struct.global_cap()
    for c in _cut_positions(mu):
        pre_labels, pre_ell, pre_tail = mu.labels[:c], mu.ell[: c - 1], slots[c - 1]
        pre_k = mu.k[:c]
        suf_labels, suf_slots, suf_k = mu.labels[c:], slots[c:], mu.k[c:]
        if c < m:
            bare = (
                struct.seq_size(suf_labels)
                + Fraction(sum(mi_abs(s) for s in suf_slots))
                - Fraction(tuple_abs(suf_k))
            )
            if bare <= 0:
                continue
        # admissibility bounds ignore the (analytically vacuous) trailing slot
        pre_l_norm = Fraction(sum(mi_abs(e) for e in pre_ell))
        head = struct.seq_size(pre_labels) + pre_l_norm - Fraction(tuple_abs(pre_k))
        pmax = _below(head)
        if cap is not None:
            if not (pre_l_norm < cap):
                continue
            pmax = min(pmax, _below(cap - tuple_abs(pre_k)))
        for p_tot in mi_ball(d0, max(pmax, 0)):
            if pmax < 0 or mi_abs(p_tot) > pmax:
                continue
            if c == m and mi_abs(p_tot) == 0:
                continue  # the counit term 1+ (x) mu is added above
            pfact = mi_factorial(p_tot)
            for pp in partitions(p_tot, c):
                right = Sym(True, pre_labels, pre_ell, pre_tail, tuple_add(pre_k, pp), mi_zero(d0))
                for p1 in mi_range(p_tot):
                    p2 = mi_sub(p_tot, p1)
                    for p1_parts in partitions(p1, m - c):
                        coeff = Fraction(pfact, mi_factorial(p2))
                        for part in pp + p1_parts:
                            coeff /= mi_factorial(part)
                        new_slots = tuple_add(suf_slots, p1_parts)
                        if suf_labels:
                            left = Sym(True, suf_labels, new_slots[:-1], new_slots[-1], suf_k, p2)
                        else:
                            left = poly_sym(d0, p2, True)
                        base.add_term((left, right), coeff)
    return _with_poly(base, mu.p, d0)


# ---------------------------------------------------------------------------
# bases and verification


@dataclass(frozen=True)
class Caps:
    p_cap: int = 2
    k_cap: int = 2
    l_cap: int = 2


def _weight_tuples(d0: int, n_slots: int, total_cap: int):
    """All junction-weight tuples (n_slots parts) with total |l| <= cap."""
    out = []
    for ell_total in mi_ball(d0, total_cap):
        out.extend(partitions(ell_total, n_slots))
    # partitions() of distinct totals never coincide; keep deterministic order
    return out


def _label_sequences(struct: Structure, words=None):
    if struct.kind == "segment":
        n = len(struct.size_items)
        return [tuple(range(a, b + 1)) for a in range(1, n + 1) for b in range(a, n + 1)]
    if words is None:
        raise ValueError("word structures need an explicit word list")
    return [tuple(w) for w in words]


def build_bases(struct: Structure, caps: Caps, words=None):
    """The truncated bases (B, B+): all symbols within the caps, with the B+
    membership condition enforced."""
    d0 = struct.d0
    basis_t, basis_plus = [], []
    for p in mi_ball(d0, caps.p_cap):
        basis_t.append(poly_sym(d0, p, False))
    basis_plus.append(unit_plus(d0))
    for axis in range(d0):
        eps = tuple(1 if a == axis else 0 for a in range(d0))
        basis_plus.append(poly_sym(d0, eps, True))
    for labels in _label_sequences(struct, words):
        m = len(labels)
        for ell in _weight_tuples(d0, m - 1, caps.l_cap):
            for p in mi_ball(d0, caps.p_cap):
                basis_t.append(seg_sym(labels, ell, mi_zero(d0), p=p, d0=d0))
            for k_total in mi_ball(d0, caps.k_cap):
                for k in partitions(k_total, m):
                    cand = seg_sym(labels, ell, mi_zero(d0), k=k, d0=d0)
                    if in_plus_basis(struct, cand):
                        basis_plus.append(cand)
    return basis_t, basis_plus


@dataclass
class ComoduleReport:
    checked_t: int
    checked_plus: int
    mismatches: list

    @property
    def ok(self) -> bool:
        return not self.mismatches


def _triple_left(struct, tau, plus: bool) -> FormalSum:
    """(Delta (x) Id) Delta or (Delta+ (x) Id) Delta+."""
    first = coproduct_plus(struct, tau) if plus else coproduct(struct, tau)
    out = FormalSum()
    for (t1, s), c1 in first.items():
        inner = coproduct_plus(struct, t1) if plus else coproduct(struct, t1)
        for (t11, s2), c2 in inner.items():
            out.add_term((t11, s2, s), c1 * c2)
    return out


def _triple_right(struct, tau, plus: bool) -> FormalSum:
    """(Id (x) Delta+) Delta or (Id (x) Delta+) Delta+."""
    first = coproduct_plus(struct, tau) if plus else coproduct(struct, tau)
    out = FormalSum()
    for (t1, s), c1 in first.items():
        inner = coproduct_plus(struct, s)
        for (n1, n2), c2 in inner.items():
            out.add_term((t1, n1, n2), c1 * c2)
    return out


def verify_comodule(struct: Structure, caps: Caps, words=None) -> ComoduleReport:
    """Exact check of (Delta (x) Id)Delta = (Id (x) Delta+)Delta on the T basis
    and (Delta+ (x) Id)Delta+ = (Id (x) Delta+)Delta+ on the T+ basis."""
    basis_t, basis_plus = build_bases(struct, caps, words)
    mismatches = []
    for tau in basis_t:
        lhs, rhs = _triple_left(struct, tau, False), _triple_right(struct, tau, False)
        if lhs != rhs:
            diff = lhs - rhs
            mismatches.append((sym_str(tau), len(diff)))
    for mu in basis_plus:
        lhs, rhs = _triple_left(struct, mu, True), _triple_right(struct, mu, True)
        if lhs != rhs:
            diff = lhs - rhs
            mismatches.append((sym_str(mu), len(diff)))
    return ComoduleReport(len(basis_t), len(basis_plus), mismatches)


def degree_additivity_ok(struct: Structure, tau: Sym) -> bool:
    """Each tensor term of the coproduct splits the degree exactly."""
    cop = coproduct_plus(struct, tau) if tau.plus else coproduct(struct, tau)
    target = degree(struct, tau)
    return all(
        degree(struct, left) + degree(struct, right) == target
        for (left, right) in cop.terms
    )


# ---------------------------------------------------------------------------
# characters


class Character:
    """A multiplicative functional on T+, stored on generators.

    gen_values maps undecorated-polynomial generators (p = 0) to ring values
    (floats or grid functions); eps_values holds the values on the X^{eps_i}.
    one is the ring unit (1.0 for scalars, a constant grid function, ...).
    """

    def __init__(self, struct: Structure, gen_values: dict, eps_values, one=1.0):
        self.struct = struct
        self.gen_values = dict(gen_values)
        self.eps_values = tuple(eps_values)
        self.one = one

    def __call__(self, s: Sym):
        if not s.plus:
            raise ValueError("characters act on T+")
        out = self.one
        for axis, power in enumerate(s.p):
            for _ in range(power):
                out = out * self.eps_values[axis]
        if s.labels:
            gen = Sym(True, s.labels, s.ell, s.tail, s.k, mi_zero(self.struct.d0))
            out = out * self.gen_values[gen]
        return out


def plus_closure(struct: Structure, gens):
    """Close a set of T+ generators under the legs of the splitting map, so a
    character stored on the result can be convolved and inverted.  Returned
    sorted by degree (the grading recursion order)."""
    seen = set()
    stack = [Sym(True, g.labels, g.ell, g.tail, g.k, mi_zero(struct.d0)) for g in gens]
    while stack:
        s = stack.pop()
        if s in seen or not s.labels:
            continue
        seen.add(s)
        for (left, right) in coproduct_plus(struct, s).terms:
            for leg in (left, right):
                if leg.labels:
                    gen = Sym(True, leg.labels, leg.ell, leg.tail, leg.k, mi_zero(struct.d0))
                    if gen not in seen:
                        stack.append(gen)
    return sorted(seen, key=lambda s: (degree(struct, s), repr(s)))


def char_identity(struct: Structure, generators, one=1.0, zero=0.0) -> Character:
    """The counit as a character: 1 on 1+, 0 on every proper generator."""
    return Character(struct, {g: zero for g in generators}, (zero,) * struct.d0, one)


def char_convolve(g1: Character, g2: Character) -> Character:
    """(g1 * g2)(mu) = (g1 (x) g2) Delta+ mu on generators."""
    struct = g1.struct
    gen_values = {}
    for gen in g1.gen_values:
        acc = None
        for (left, right), coeff in coproduct_plus(struct, gen).items():
            term = g1(left) * g2(right) * float(coeff)
            acc = term if acc is None else acc + term
        gen_values[gen] = acc
    eps = tuple(a + b for a, b in zip(g1.eps_values, g2.eps_values))
    return Character(struct, gen_values, eps, g1.one)


def char_invert(g: Character) -> Character:
    """The group inverse, by recursion over the grading: on a generator mu,
    g^{-1}(mu) = -g(mu) - sum' g(left) g^{-1}(right) over the proper terms."""
    struct = g.struct
    eps_inv = tuple(-v for v in g.eps_values)
    inv = Character(struct, {}, eps_inv, g.one)
    order = sorted(g.gen_values, key=lambda s: (degree(struct, s), repr(s)))
    for gen in order:
        acc = g.gen_values[gen] * (-1.0)
        for (left, right), coeff in coproduct_plus(struct, gen).items():
            if right.is_unit() or (right == gen and left.is_unit()):
                continue
            acc = acc - g(left) * inv(right) * float(coeff)
        inv.gen_values[gen] = acc
    return inv


# ---------------------------------------------------------------------------
# hat symbols: the auxiliary family with both decorations and no positivity
# filter; cut sets are graded by an external tuple beta.


def hat_sym(labels, ell, tail, k, p=None, d0=None) -> Sym:
    return seg_sym(labels, ell, tail, k=k, p=p, d0=d0, plus=True)


def hat_degree(struct_or_d0, s: Sym, beta) -> Fraction:
    """|s|_beta = sum_{j in labels} beta_j - |k| + |l| + |p| (labels are
    1-based positions into beta)."""
    out = Fraction(mi_abs(s.p))
    for label in s.labels:
        out += Fraction(beta[label - 1])
    for slot in s.slots():
        out += mi_abs(slot)
    if s.k is not None:
        out -= tuple_abs(s.k)
    return out


def hat_coproduct(d0: int, tau: Sym, p_cap: int = 0) -> FormalSum:
    """The reduced hat splitting: proper prefix cuts at zero slots, with the
    polynomial addition capped at |p| <= p_cap (the hat family carries no
    positivity filter, so the cap is the truncation)."""
    if tau.is_poly():
        return FormalSum()
    base = FormalSum()
    m = len(tau.labels)
    slots = tau.slots()
    for c in range(1, m):
        if mi_abs(tau.ell[c - 1]) != 0:
            continue  # proper junction cuts at zero weight only
        pre_labels, pre_ell, pre_k = tau.labels[:c], tau.ell[: c - 1], tau.k[:c]
        suf_labels, suf_slots, suf_k = tau.labels[c:], slots[c:], tau.k[c:]
        for p_tot in mi_ball(d0, p_cap):
            pfact = mi_factorial(p_tot)
            for pp in partitions(p_tot, c):
                right = Sym(True, pre_labels, pre_ell, mi_zero(d0), tuple_add(pre_k, pp), mi_zero(d0))
                for p1 in mi_range(p_tot):
                    p2 = mi_sub(p_tot, p1)
                    for p1_parts in partitions(p1, m - c):
                        coeff = Fraction(pfact, mi_factorial(p2))
                        for part in pp + p1_parts:
                            coeff /= mi_factorial(part)
                        new_slots = tuple_add(suf_slots, p1_parts)
                        left = Sym(True, suf_labels, new_slots[:-1], new_slots[-1], suf_k, p2)
                        base.add_term((left, right), coeff)
    return _with_poly(base, tau.p, d0)


def hat_ratios(d0: int, tau: Sym, p_cap: int = 0) -> dict:
    """Re-index the hat splitting by its left legs: nu -> tau/nu (a formal sum
    of prefix symbols)."""
    out: dict = {}
    for (left, right), coeff in hat_coproduct(d0, tau, p_cap).items():
        out.setdefault(left, FormalSum()).add_term(right, coeff)
    return out


def hat_cut(d0: int, tau: Sym, beta, p_cap: int = 0):
    """Cut(tau, beta): left legs nu with |nu|_beta < 0 and |tau/nu|_beta > 0.

    All terms of tau/nu share one beta-degree; we read it off any term."""
    out = []
    for nu, ratio in hat_ratios(d0, tau, p_cap).items():
        if not (hat_degree(d0, nu, beta) < 0):
            continue
        any_term = next(iter(ratio.terms))
        if hat_degree(d0, any_term, beta) > 0:
            out.append(nu)
    return sorted(out, key=repr)


def hat_multicut(d0: int, tau: Sym, beta, p_cap: int = 0):
    """Chains sigma_e < ... < sigma_1 < tau with every sigma_j in
    Cut(tau, beta); returned as tuples (sigma_1, ..., sigma_e)."""
    cuts = hat_cut(d0, tau, beta, p_cap)
    return _nested_chains(d0, cuts, p_cap)


def hat_multicut_two(d0: int, tau: Sym, beta1, beta2, p_cap: int = 0):
    cuts = sorted(
        set(hat_cut(d0, tau, beta1, p_cap)) | set(hat_cut(d0, tau, beta2, p_cap)),
        key=repr,
    )
    return _nested_chains(d0, cuts, p_cap)


def _nested_chains(d0: int, cuts, p_cap: int):
    def lt(a: Sym, b: Sym) -> bool:
        return a in hat_ratios(d0, b, p_cap)

    chains = []
    for size in range(1, len(cuts) + 1):
        for combo in combinations(cuts, size):
            for perm in _orderings(list(combo), lt):
                chains.append(tuple(perm))
    return chains


def _orderings(items, lt):
    """All strictly decreasing arrangements (sigma_1 > sigma_2 > ...)."""
    if len(items) == 1:
        return [items]
    out = []
    for i, top in enumerate(items):
        rest = items[:i] + items[i + 1 :]
        if all(lt(x, top) for x in rest):
            for sub in _orderings(rest, lt):
                out.append([top] + sub)
    return out


def hat_ratio(d0: int, tau: Sym, nu: Sym, p_cap: int = 0) -> FormalSum:
    ratios = hat_ratios(d0, tau, p_cap)
    if nu not in ratios:
        raise KeyError(f"{sym_str(nu)} is not below {sym_str(tau)}")
    return ratios[nu]


# ---------------------------------------------------------------------------
# JSON-friendly dumps


def formal_sum_json(fs: FormalSum):
    out = []
    for key, coeff in sorted(fs.items(), key=lambda kv: repr(kv[0])):
        if isinstance(key, tuple):
            name = " (x) ".join(sym_str(s) for s in key)
        else:
            name = sym_str(key)
        out.append({"symbol": name, "coefficient": f"{coeff.numerator}/{coeff.denominator}"})
    return out


def basis_json(struct: Structure, syms):
    return [
        {"symbol": sym_str(s), "degree": str(degree(struct, s))}
        for s in syms
    ]
