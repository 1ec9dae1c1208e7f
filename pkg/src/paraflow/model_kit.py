"""Models on the symbol structure: the canonical model built from a tuple of
functions, local-expansion pairings, bracket block sequences, Q-operators,
the representation formulas, star-derivative identities, the hat-family
realization, size norms, and empirical model verification.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .cut_algebra import mi_abs, mi_add, mi_binom, mi_factorial, mi_range, mi_zero, partitions
from .dyadic_core import (
    BlockSequence,
    GridFunction,
    constant,
    coordinate_power,
    derive,
    derive_fn,
    lp_project,
    lp_project_below,
    lp_project_weighted,
    lp_project_weighted_below,
)
from .holder_lab import check_assumption_a, fit_exponent
from .para_engine import para_weighted, simp_para, tree_sum, twisted_simp, twisted_weighted
from .structure_algebra import (
    Caps,
    FormalSum,
    Structure,
    Sym,
    build_bases,
    coproduct,
    coproduct_plus,
    degree,
    hat_ratio,
    hat_ratios,
    hat_multicut,
    hat_sym,
    segment_structure,
    sym_str,
)


# ---------------------------------------------------------------------------
# splitting maps re-indexed by their legs, and chain enumeration


_RATIO_CACHE: dict = {}


def ratios_t(struct: Structure, tau: Sym) -> dict:
    """The T splitting grouped by its left leg: tau1 -> tau/tau1 (a formal
    sum of T+ symbols), including tau1 = tau with ratio 1+."""
    key = (struct, tau, False)
    if key not in _RATIO_CACHE:
        out: dict = {}
        for (left, right), coeff in coproduct(struct, tau).items():
            out.setdefault(left, FormalSum()).add_term(right, coeff)
        _RATIO_CACHE[key] = out
    return _RATIO_CACHE[key]


def ratios_plus(struct: Structure, mu: Sym) -> dict:
    key = (struct, mu, True)
    if key not in _RATIO_CACHE:
        out: dict = {}
        for (left, right), coeff in coproduct_plus(struct, mu).items():
            out.setdefault(left, FormalSum()).add_term(right, coeff)
        _RATIO_CACHE[key] = out
    return _RATIO_CACHE[key]


def children(struct: Structure, tau: Sym):
    """Strictly smaller legs of the T splitting, deterministically ordered."""
    return sorted((s for s in ratios_t(struct, tau) if s != tau), key=repr)


def is_below(struct: Structure, sigma: Sym, tau: Sym) -> bool:
    return sigma != tau and sigma in ratios_t(struct, tau)


def prec(sigma: Sym, tau: Sym) -> bool:
    """Strict-suffix order: sigma spans a proper tail segment of tau."""
    if not sigma.labels or not tau.labels:
        return False
    m, n = len(sigma.labels), len(tau.labels)
    return m < n and sigma.labels == tau.labels[n - m :]


def leqq(sigma: Sym, tau: Sym) -> bool:
    """Same-segment order: identical labels and weights, lower power."""
    return sigma.labels == tau.labels and sigma.ell == tau.ell and sigma.tail == tau.tail


_CHAIN_CACHE: dict = {}


def chains(struct: Structure, tau: Sym, order: str = "lt"):
    """All non-empty descending chains (sigma_1, ..., sigma_e) below tau.

    order: "lt" for the full splitting order, "prec" for strict-suffix legs
    only, "leqq" for same-segment legs only.
    """
    key = (struct, tau, order)
    if key in _CHAIN_CACHE:
        return _CHAIN_CACHE[key]
    out = []
    for child in children(struct, tau):
        if order == "prec" and not prec(child, tau):
            continue
        if order == "leqq" and not leqq(child, tau):
            continue
        out.append((child,))
        for sub in chains(struct, child, order):
            out.append((child,) + sub)
    _CHAIN_CACHE[key] = out
    return out


def chains_between(struct: Structure, tau: Sym, rho: Sym, order: str = "lt"):
    """Chains (sigma_1, ..., sigma_e) with rho strictly below sigma_e
    (rho below in the full order for "lt", rho prec sigma_e for "prec")."""
    out = []
    for chain in chains(struct, tau, order):
        last = chain[-1]
        if order == "prec":
            if prec(rho, last) and is_below(struct, rho, last):
                out.append(chain)
        else:
            if is_below(struct, rho, last):
                out.append(chain)
    return out


# ---------------------------------------------------------------------------
# the canonical model


def _window_slices(shape, frac=0.5):
    return tuple(slice(int(n * (0.5 - frac / 2)), int(n * (0.5 + frac / 2))) for n in shape)


def window_sup(f: GridFunction, frac=0.5) -> float:
    """Sup norm over the central window of the torus (polynomial coordinate
    factors are non-periodic; the window keeps wrap-around out of sups)."""
    return float(np.max(np.abs(f.values[_window_slices(f.grid.shape, frac)])))


class Model:
    """The pair (Pi, g) built from a tuple of grid functions.

    Pi realizes T symbols as grid functions, g realizes T+ generators as grid
    functions (value at x = the character g_x); both are cached lazily and
    extended multiplicatively/linearly to polynomial factors and formal sums.
    """

    def __init__(self, fs, alpha, caps: Caps = Caps(2, 2, 2), struct: Structure | None = None):
        self.fs = tuple(fs)
        self.grid = self.fs[0].grid
        # consecutive partial sums are only meaningful for positional labels;
        # word structures validate per word instead
        self.reg = check_assumption_a(alpha) if struct is None or struct.kind == "segment" else None
        self.alpha = tuple(Fraction(a) for a in alpha)
        self.caps = caps
        self.struct = struct if struct is not None else segment_structure(alpha, self.grid.dim)
        if len(self.fs) != len(self.struct.size_items):
            raise ValueError("operand count does not match the structure arity")
        # one realization per structure label, in size-table order
        self._fn = {label: f for (label, _), f in zip(self.struct.size_items, self.fs)}
        self._pi: dict = {}
        self._g: dict = {}
        self._ginv: dict = {}
        self._bracket_t: dict = {}
        self._bracket_pair: dict = {}

    # -- Pi ----------------------------------------------------------------
    def pi(self, tau: Sym) -> GridFunction:
        """Pi(tau): X^p times the weighted paraproduct over the label slice
        with the junction weights (the trailing slot does not act)."""
        if tau.plus:
            raise ValueError("Pi acts on the T sector")
        if tau not in self._pi:
            if tau.is_poly():
                val = coordinate_power(self.grid, tau.p)
            else:
                ops = [self._fn[j] for j in tau.labels]
                val = para_weighted(ops, tau.ell)
                if mi_abs(tau.p):
                    val = coordinate_power(self.grid, tau.p) * val
            self._pi[tau] = val
        return self._pi[tau]

    # -- g -----------------------------------------------------------------
    def g_gen(self, gen: Sym) -> GridFunction:
        if gen not in self._g:
            beta = tuple(self.struct.size(j) - mi_abs(k) for j, k in zip(gen.labels, gen.k))
            ops = [derive_fn(self._fn[j], k) for j, k in zip(gen.labels, gen.k)]
            self._g[gen] = twisted_weighted(beta, gen.ell, ops, tail=gen.tail)
        return self._g[gen]

    def g(self, sym: Sym) -> GridFunction:
        """The character value of a T+ symbol as a grid function of x."""
        if not sym.plus:
            raise ValueError("g acts on the T+ sector")
        val = constant(self.grid, 1.0) if mi_abs(sym.p) == 0 else coordinate_power(self.grid, sym.p)
        if sym.labels:
            gen = Sym(True, sym.labels, sym.ell, sym.tail, sym.k, mi_zero(self.grid.dim))
            val = val * self.g_gen(gen)
        return val

    def ginv(self, sym: Sym) -> GridFunction:
        """The inverse character, by the grading recursion."""
        if sym.is_poly():
            if mi_abs(sym.p) == 0:
                return constant(self.grid, 1.0)
            return coordinate_power(self.grid, sym.p) * ((-1.0) ** mi_abs(sym.p))
        gen = Sym(True, sym.labels, sym.ell, sym.tail, sym.k, mi_zero(self.grid.dim))
        if gen not in self._ginv:
            acc = self.g(gen) * (-1.0)
            for (left, right), coeff in coproduct_plus(self.struct, gen).items():
                if right.is_unit() or (right == gen and left.is_unit()):
                    continue
                acc = acc - self.g(left) * self.ginv(right) * float(coeff)
            self._ginv[gen] = acc
        val = self._ginv[gen]
        if mi_abs(sym.p):
            val = coordinate_power(self.grid, sym.p) * ((-1.0) ** mi_abs(sym.p)) * val
        return val

    def g_sum(self, fs_ratio: FormalSum) -> GridFunction:
        return tree_sum([self.g(s) * float(c) for s, c in sorted(fs_ratio.items(), key=repr)])

    def ginv_sum(self, fs_ratio: FormalSum) -> GridFunction:
        return tree_sum([self.ginv(s) * float(c) for s, c in sorted(fs_ratio.items(), key=repr)])

    def g_yx(self, mu: Sym, y_idx, x_idx) -> float:
        """g_yx(mu) = (g_y (x) g_x^{-1}) of the T+ splitting, at grid indices."""
        out = 0.0
        for (left, right), coeff in coproduct_plus(self.struct, mu).items():
            out += float(coeff) * self.g(left).values[y_idx] * self.ginv(right).values[x_idx]
        return out

    def g_yx_sum(self, fs_ratio: FormalSum, y_idx, x_idx) -> float:
        return sum(float(c) * self.g_yx(s, y_idx, x_idx) for s, c in sorted(fs_ratio.items(), key=repr))


def canonical_model(fs, alpha, caps: Caps = Caps(2, 2, 2)) -> Model:
    return Model(fs, alpha, caps)


# ---------------------------------------------------------------------------
# local-expansion pairing


def pairing(model: Model, tau: Sym, i: int) -> GridFunction:
    """x -> the pairing of the recentered realization of tau against the
    low-pass kernel below level i, computed as Delta_{<i}(Pi_x tau)(x)."""
    terms = []
    for tau1, ratio in sorted(ratios_t(model.struct, tau).items(), key=lambda kv: repr(kv[0])):
        coeff_fn = model.ginv_sum(ratio)
        terms.append(coeff_fn * lp_project_below(model.pi(tau1), i))
    return tree_sum(terms)


def model_pi_x(model: Model, tau: Sym, x_idx, i: int) -> float:
    return float(pairing(model, tau, i).values[x_idx])


# ---------------------------------------------------------------------------
# brackets


def _levels(model: Model):
    return range(-1, model.grid.i_max + 1)


def bracket_t(model: Model, tau: Sym) -> BlockSequence:
    """[tau]: block i is Delta_i(Pi tau) minus the alternating chain sums
    with each g factor projected below level i-1 separately."""
    if tau not in model._bracket_t:
        struct = model.struct
        chain_data = []
        for chain in chains(struct, tau, "lt"):
            sign = -1.0 if len(chain) % 2 else 1.0  # -(-1)^{e-1} = (-1)^e
            seq = (tau,) + chain
            gfns = [model.g_sum(ratios_t(struct, seq[j])[seq[j + 1]]) for j in range(len(chain))]
            chain_data.append((sign, gfns, model.pi(chain[-1])))
        blocks = []
        for i in _levels(model):
            terms = [lp_project(model.pi(tau), i)]
            for sign, gfns, pi_last in chain_data:
                acc = lp_project(pi_last, i)
                for gfn in gfns:
                    acc = acc * lp_project_below(gfn, i - 1)
                terms.append(acc * sign)
            blocks.append(tree_sum(terms))
        model._bracket_t[tau] = BlockSequence(model.grid, blocks, band_limited=False)
    return model._bracket_t[tau]


def bracket_pair(model: Model, tau: Sym, rho: Sym) -> BlockSequence:
    """[tau/rho]: block i is Delta_i(g(tau/rho)) minus the alternating sums
    over chains strictly between rho and tau."""
    key = (tau, rho)
    if key not in model._bracket_pair:
        struct = model.struct
        chain_data = []
        for chain in chains_between(struct, tau, rho, "lt"):
            sign = -1.0 if len(chain) % 2 else 1.0
            seq = (tau,) + chain
            gfns = [model.g_sum(ratios_t(struct, seq[j])[seq[j + 1]]) for j in range(len(chain))]
            last = model.g_sum(ratios_t(struct, chain[-1])[rho])
            chain_data.append((sign, gfns, last))
        direct = model.g_sum(ratios_t(struct, tau)[rho])
        blocks = []
        for i in _levels(model):
            terms = [lp_project(direct, i)]
            for sign, gfns, last in chain_data:
                acc = lp_project(last, i)
                for gfn in gfns:
                    acc = acc * lp_project_below(gfn, i - 1)
                terms.append(acc * sign)
            blocks.append(tree_sum(terms))
        model._bracket_pair[key] = BlockSequence(model.grid, blocks, band_limited=False)
    return model._bracket_pair[key]


# ---------------------------------------------------------------------------
# Q-operators and the splice identity


def q_op(model: Model, tau: Sym, i: int) -> GridFunction:
    """Q_i of the recentered family x -> Pi_x(tau): the base point is averaged
    against the low-pass kernel below i-1, which turns the inverse-character
    coefficients of Pi_x into their own low-pass projections (a single
    projection per coefficient, unlike the bracket blocks)."""
    struct = model.struct
    terms = []
    for tau1, ratio in sorted(ratios_t(struct, tau).items(), key=lambda kv: repr(kv[0])):
        terms.append(
            lp_project_below(model.ginv_sum(ratio), i - 1) * lp_project(model.pi(tau1), i)
        )
    return tree_sum(terms)


def q_plus(model: Model, tau: Sym, sigma: Sym, i: int) -> GridFunction:
    """Q_i^+ of the pair (tau, sigma): minus the low-pass of g over the inner
    legs times the low-pass of the inverse character over the outer legs of
    the splitting of tau/sigma.  This is the unique family for which the
    splice identity [tau]_i = Q_i + sum_sigma Q_i^+ [sigma]_i holds: inverting
    the unipotent system expressing the bracket coefficients through the
    inverse-character coefficients gives exactly this convolution."""
    struct = model.struct
    ratio = ratios_t(struct, tau)[sigma]
    terms = []
    for s, c in sorted(ratio.items(), key=repr):
        for (left, right), c2 in sorted(coproduct_plus(struct, s).items(), key=repr):
            terms.append(
                lp_project_below(model.g(left), i - 1)
                * lp_project_below(model.ginv(right), i - 1)
                * float(-c * c2)
            )
    return tree_sum(terms)


def splice_residual(model: Model, tau: Sym, levels=None) -> float:
    """Max block residual of [tau]_i = Q_i + sum_sigma Q_i^+(tau/sigma)[sigma]_i.

    Levels start at 1: the low-pass average over the base points is
    degenerate below that."""
    if levels is None:
        levels = range(1, model.grid.i_max + 1)
    struct = model.struct
    out = 0.0
    for i in levels:
        rhs = q_op(model, tau, i)
        for sigma in children(struct, tau):
            rhs = rhs + q_plus(model, tau, sigma, i) * bracket_t(model, sigma).block(i)
        out = max(out, (bracket_t(model, tau).block(i) - rhs).sup())
    return out


# ---------------------------------------------------------------------------
# weighted block forms and the representation formulas


def pi_f_block(model: Model, tau: Sym, i: int) -> GridFunction:
    """The weighted block Delta_i^p of the paraproduct realized by tau."""
    base = Sym(False, tau.labels, tau.ell, tau.tail, None, mi_zero(model.grid.dim))
    return lp_project_weighted(model.pi(base), i, tau.p)


def g_f_block(model: Model, mu: Sym, i: int) -> GridFunction:
    """The weighted block Delta_i^q of the corrected paraproduct of mu."""
    gen = Sym(True, mu.labels, mu.ell, mu.tail, mu.k, mi_zero(model.grid.dim))
    return lp_project_weighted(model.g_gen(gen), i, mu.p)


def g_f_below(model: Model, mu: Sym, j: int) -> GridFunction:
    gen = Sym(True, mu.labels, mu.ell, mu.tail, mu.k, mi_zero(model.grid.dim))
    return lp_project_weighted_below(model.g_gen(gen), j, mu.p)


def _pi_f_seq(model: Model, tau: Sym) -> BlockSequence:
    return BlockSequence(
        model.grid,
        [pi_f_block(model, tau, i) for i in _levels(model)],
        band_limited=(mi_abs(tau.p) == 0),
    )


def bracket_f_t(model: Model, tau: Sym) -> BlockSequence:
    """[tau]^f via the weighted-block recursion over suffix chains:
    the weighted form of the bracket, built from Pi^f and g^f blocks."""
    struct = model.struct
    chain_data = []
    for chain in chains(struct, tau, "prec"):
        sign = -1.0 if len(chain) % 2 else 1.0
        seq = (tau,) + chain
        pairs = [(seq[j], seq[j + 1]) for j in range(len(chain))]
        chain_data.append((sign, pairs, chain[-1]))
    blocks = []
    for i in _levels(model):
        terms = [pi_f_block(model, tau, i)]
        for sign, pairs, last in chain_data:
            acc = pi_f_block(model, last, i)
            for a, b in pairs:
                acc = acc * g_f_pair_below(model, a, b, i - 1)
            terms.append(acc * sign)
        blocks.append(tree_sum(terms))
    return BlockSequence(model.grid, blocks, band_limited=False)


def _single_ratio(struct: Structure, tau: Sym, sigma: Sym):
    """The ratio tau/sigma; requires all its terms to share labels and X
    power (true for suffix-type sigma), returning (labels, k_total, p, terms)."""
    ratio = ratios_t(struct, tau)[sigma]
    terms = sorted(ratio.items(), key=lambda kv: repr(kv[0]))
    labels = {s.labels for s, _ in terms}
    powers = {s.p for s, _ in terms}
    if len(labels) != 1 or len(powers) != 1:
        raise ValueError(f"ratio of {sym_str(tau)} / {sym_str(sigma)} is not shape-uniform")
    return ratio


def g_f_pair_below(model: Model, tau: Sym, sigma: Sym, j: int) -> GridFunction:
    """g^f(tau/sigma)_{<j}: the weighted-block low-pass of the ratio,
    extended linearly over the ratio's formal sum."""
    ratio = _single_ratio(model.struct, tau, sigma)
    terms = [g_f_below(model, s, j) * float(c) for s, c in sorted(ratio.items(), key=repr)]
    return tree_sum(terms)


def gtogtilde_residual_pi(model: Model, tau: Sym, levels=None) -> float:
    """Blockwise residual of the identity expressing the weighted block
    Pi^f(tau)_i through plain blocks and same-segment chains."""
    if levels is None:
        levels = range(1, model.grid.i_max + 1)
    struct = model.struct
    out = 0.0
    for i in levels:
        rhs = lp_project(model.pi(tau), i)
        for chain in chains(struct, tau, "leqq"):
            sign = 1.0 if len(chain) % 2 else -1.0  # -(-1)^e
            seq = (tau,) + chain
            acc = lp_project(model.pi(chain[-1]), i)
            for j in range(len(chain)):
                gfn = model.g_sum(ratios_t(struct, seq[j])[seq[j + 1]])
                acc = acc * lp_project_below(gfn, i - 1)
            rhs = rhs + acc * sign
        out = max(out, window_sup(pi_f_block(model, tau, i) - rhs))
    return out


def sumgtilde_residual(model: Model, tau: Sym, levels=None) -> float:
    """Blockwise residual of the corollary writing [tau]^f through the
    weighted blocks along suffix chains."""
    if levels is None:
        levels = range(1, model.grid.i_max + 1)
    struct = model.struct
    plain = bracket_t(model, tau)
    weighted = bracket_f_t(model, tau)
    out = 0.0
    for i in levels:
        out = max(out, window_sup(plain.block(i) - weighted.block(i)))
    return out


@dataclass
class ResidualReport:
    symbol: str
    residual: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.residual < self.tolerance


def representation_check(model: Model, tau: Sym, levels=None, tol=1e-8) -> ResidualReport:
    """Delta_i^p of the realized paraproduct equals the sum over suffix
    chains of low-high products of brackets."""
    if levels is None:
        levels = range(1, model.grid.i_max + 1)
    struct = model.struct
    out = 0.0
    for i in levels:
        lhs = pi_f_block(model, tau, i)
        # weighted-block brackets: identical to the plain ones for undecorated
        # symbols, and the only exact form on the torus when a coordinate
        # power decorates the symbol (x^p itself is not periodic)
        terms = [bracket_f_t(model, tau).block(i)]
        for chain in chains(struct, tau, "prec"):
            seq = (tau,) + chain
            seqs = [bracket_f_pair(model, seq[j], seq[j + 1]) for j in range(len(chain))]
            seqs.append(bracket_f_t(model, chain[-1]))
            terms.append(simp_para(seqs).block(i))
        out = max(out, window_sup(lhs - tree_sum(terms)))
    return ResidualReport(sym_str(tau), out, tol)


def representation_check_plus(model: Model, tau: Sym, sigma: Sym, levels=None, tol=1e-8) -> ResidualReport:
    """Same for the g side: Delta_i^q of the corrected paraproduct of the
    ratio tau/sigma equals the chain sum ending at pair brackets into sigma."""
    if levels is None:
        levels = range(1, model.grid.i_max + 1)
    struct = model.struct
    ratio = _single_ratio(struct, tau, sigma)
    out = 0.0
    for i in levels:
        lhs = tree_sum(
            [g_f_block(model, s, i) * float(c) for s, c in sorted(ratio.items(), key=repr)]
        )
        terms = [bracket_f_pair(model, tau, sigma).block(i)]
        for chain in chains_between(struct, tau, sigma, "prec"):
            seq = (tau,) + chain
            seqs = [bracket_f_pair(model, seq[j], seq[j + 1]) for j in range(len(chain))]
            seqs.append(bracket_f_pair(model, chain[-1], sigma))
            terms.append(simp_para(seqs).block(i))
        out = max(out, window_sup(lhs - tree_sum(terms)))
    return ResidualReport(f"{sym_str(tau)} / {sym_str(sigma)}", out, tol)


# ---------------------------------------------------------------------------
# star-derivative identities


def star_identity_i(fs, alpha, k_parts, ell, m=None, tol=1e-7) -> ResidualReport:
    """Variant (i): in the structure shifted by the derivative counts, the
    corrected-paraproduct chain sum collapses to the corrected paraproduct of
    the derivatives (and to zero when the symbol carries a polynomial factor).
    """
    grid = fs[0].grid
    d0 = grid.dim
    n = len(fs)
    k_parts = tuple(tuple(k) for k in k_parts)
    shifted = tuple(Fraction(a) - mi_abs(k) for a, k in zip(alpha, k_parts))
    dfs = [derive_fn(f, k) for f, k in zip(fs, k_parts)]
    sub = Model(dfs, shifted, struct=segment_structure(shifted, d0))
    struct = sub.struct
    if m is None:
        m = mi_zero(d0)
    tau = Sym(False, tuple(range(1, n + 1)), tuple(tuple(l) for l in ell), mi_zero(d0), None, tuple(m))
    terms = [bracket_f_t(sub, tau).summed()]
    for chain in chains(struct, tau, "prec"):
        seq = (tau,) + chain
        seqs = [bracket_f_pair(sub, seq[j], seq[j + 1]) for j in range(len(chain))]
        seqs.append(bracket_f_t(sub, chain[-1]))
        degs = [degree(struct, _any_key(ratios_t(struct, seq[j])[seq[j + 1]])) for j in range(len(chain))]
        degs.append(degree(struct, chain[-1]))
        terms.append(twisted_simp(tuple(degs), seqs))
    lhs = tree_sum(terms)
    if mi_abs(tuple(m)) == 0:
        rhs = twisted_weighted(shifted, tuple(tuple(l) for l in ell), dfs)
    else:
        rhs = constant(grid, 0.0)
    return ResidualReport(sym_str(tau), window_sup(lhs - rhs), tol)


def _any_key(fs_ratio: FormalSum):
    return sorted(fs_ratio.terms, key=repr)[0]


def bracket_f_pair(model: Model, tau: Sym, rho: Sym) -> BlockSequence:
    """[tau/rho]^f via weighted blocks along suffix chains."""
    struct = model.struct
    chain_data = []
    for chain in chains_between(struct, tau, rho, "prec"):
        sign = -1.0 if len(chain) % 2 else 1.0
        seq = (tau,) + chain
        pairs = [(seq[j], seq[j + 1]) for j in range(len(chain))]
        chain_data.append((sign, pairs, chain[-1]))
    blocks = []
    for i in _levels(model):
        ratio = _single_ratio(struct, tau, rho)
        terms = [
            tree_sum([g_f_block(model, s, i) * float(c) for s, c in sorted(ratio.items(), key=repr)])
        ]
        for sign, pairs, last in chain_data:
            lratio = _single_ratio(struct, last, rho)
            acc = tree_sum(
                [g_f_block(model, s, i) * float(c) for s, c in sorted(lratio.items(), key=repr)]
            )
            for a, b in pairs:
                acc = acc * g_f_pair_below(model, a, b, i - 1)
            terms.append(acc * sign)
        blocks.append(tree_sum(terms))
    return BlockSequence(model.grid, blocks, band_limited=False)


def star_identity_ii(model: Model, tau: Sym, sigma: Sym, p, tol=1e-7) -> ResidualReport:
    """Variant (ii): the derivative-twisted chain sum between sigma and tau
    equals the derivative-resummed corrected paraproduct of the prefix."""
    struct = model.struct
    grid = model.grid
    p = tuple(p)
    ratio = _single_ratio(struct, tau, sigma)
    rep = _any_key(ratio)
    n_pre = len(rep.labels)
    k_total = mi_zero(grid.dim)
    for k in rep.k:
        k_total = mi_add(k_total, k)
    m = rep.p

    terms = []
    all_chains = [()] + chains_between(struct, tau, sigma, "prec")
    for chain in all_chains:
        seq = (tau,) + chain + (sigma,)
        e = len(chain)
        base_seqs = [bracket_f_pair(model, seq[j], seq[j + 1]) for j in range(e + 1)]
        degs = [
            degree(struct, _any_key(ratios_t(struct, seq[j])[seq[j + 1]])) for j in range(e + 1)
        ]
        for pp in partitions(p, e + 1):
            coeff = Fraction(mi_factorial(p))
            for part in pp:
                coeff /= mi_factorial(part)
            seqs = [derive(s, part) for s, part in zip(base_seqs, pp)]
            shifted = tuple(d - mi_abs(part) for d, part in zip(degs, pp))
            terms.append(twisted_simp(shifted, seqs) * float(coeff))
    lhs = tree_sum(terms)

    if mi_abs(m) == 0:
        rhs_terms = []
        ell_pre = rep.ell
        labels = rep.labels
        for kk in partitions(k_total, n_pre):
            for pp in partitions(p, n_pre):
                coeff = Fraction(mi_factorial(k_total) * mi_factorial(p))
                for part in kk + pp:
                    coeff /= mi_factorial(part)
                beta = tuple(
                    model.alpha[j - 1] - mi_abs(k) - mi_abs(q)
                    for j, k, q in zip(labels, kk, pp)
                )
                ops = [
                    derive_fn(model.fs[j - 1], mi_add(k, q))
                    for j, k, q in zip(labels, kk, pp)
                ]
                rhs_terms.append(twisted_weighted(beta, ell_pre, ops) * float(coeff))
        rhs = tree_sum(rhs_terms)
    else:
        rhs = constant(grid, 0.0)
    return ResidualReport(f"{sym_str(tau)} / {sym_str(sigma)}", window_sup(lhs - rhs), tol)


# ---------------------------------------------------------------------------
# hat-family realization


def upsilon(fs, sym: Sym, grid=None) -> GridFunction:
    """The product realization of a hat symbol: the weighted paraproduct of
    the decorated derivatives, times the coordinate power."""
    grid = grid if grid is not None else fs[0].grid
    if sym.is_poly():
        return coordinate_power(grid, sym.p) if mi_abs(sym.p) else constant(grid, 1.0)
    ops = [derive_fn(fs[j - 1], k) for j, k in zip(sym.labels, sym.k)]
    val = para_weighted(ops, sym.ell)
    if mi_abs(sym.p):
        val = coordinate_power(grid, sym.p) * val
    return val


def upsilon_sum(fs, ratio: FormalSum, grid=None) -> GridFunction:
    grid = grid if grid is not None else fs[0].grid
    return tree_sum([upsilon(fs, s, grid) * float(c) for s, c in sorted(ratio.items(), key=repr)])


def upsilon_cross_check(fs, beta, ell, tol=1e-8, p_cap=0) -> ResidualReport:
    """The corrected paraproduct equals the plain one minus the alternating
    hat-chain correction built from product realizations."""
    grid = fs[0].grid
    d0 = grid.dim
    n = len(fs)
    beta = tuple(Fraction(b) for b in beta)
    ell = tuple(tuple(l) for l in ell)
    tau = hat_sym(
        tuple(range(1, n + 1)), ell, mi_zero(d0), k=tuple(mi_zero(d0) for _ in range(n)), d0=d0
    )
    lhs = twisted_weighted(beta, ell, fs)
    correction_terms = []
    for chain in hat_multicut(d0, tau, tuple(float(b) for b in beta), p_cap):
        e = len(chain)
        sign = -1.0 if e % 2 else 1.0  # -(-1)^{e+1}
        seq = (tau,) + chain
        acc = None
        for j in range(e):
            fac = upsilon_sum(fs, hat_ratio(d0, seq[j], seq[j + 1], p_cap), grid)
            acc = fac if acc is None else acc * fac
        acc = acc * upsilon(fs, chain[-1], grid)
        correction_terms.append(acc * sign)
    rhs = para_weighted(fs, ell) + tree_sum(correction_terms) if correction_terms else para_weighted(fs, ell)
    return ResidualReport(sym_str(tau), window_sup(lhs - rhs), tol)


# ---------------------------------------------------------------------------
# size norms


def _dyadic_offsets(grid, count=6, start=2):
    """(index_offset, |h|) pairs along the first axis; offsets stay below a
    quarter period so recentered windows never wrap around the torus, and
    above two grid cells so the finest offsets are resolved."""
    n = grid.n
    out = []
    for j in range(start, start + count):
        h = n >> j
        if h < 2:
            break
        out.append(((h,) + (0,) * (grid.dim - 1), h / n))
    return out


def g_yx_field(model: Model, mu: Sym, offset) -> np.ndarray:
    """g_{x+h,x}(mu) as an array over the base point x, for a fixed index
    offset h (first factor shifted, second evaluated in place)."""
    axes = tuple(range(model.grid.dim))
    shifts = tuple(-o for o in offset)
    out = np.zeros(model.grid.shape)
    for (left, right), coeff in coproduct_plus(model.struct, mu).items():
        out += float(coeff) * np.roll(model.g(left).values, shifts, axis=axes) * model.ginv(right).values
    return out


def g_yx_field_sum(model: Model, fs_ratio: FormalSum, offset) -> np.ndarray:
    out = np.zeros(model.grid.shape)
    for s, c in sorted(fs_ratio.items(), key=repr):
        out += float(c) * g_yx_field(model, s, offset)
    return out


def _window_max(values: np.ndarray, frac=0.5) -> float:
    return float(np.max(np.abs(values[_window_slices(values.shape, frac)])))


def norm_t(model: Model, tau: Sym, levels=None) -> float:
    """sup_i 2^{i |tau|} of the pairing sup over the interior window."""
    if levels is None:
        levels = range(0, model.grid.i_max)
    deg = float(degree(model.struct, tau))
    return max(2.0 ** (i * deg) * window_sup(pairing(model, tau, i)) for i in levels)


def norm_plus(model: Model, mu: Sym) -> float:
    """sup over dyadic offsets and base points of |g_{x+h,x}(mu)| / |h|^{|mu|}."""
    deg = float(degree(model.struct, mu))
    return max(
        _window_max(g_yx_field(model, mu, off)) / h**deg
        for off, h in _dyadic_offsets(model.grid)
    )


def norm_ratio(model: Model, ratio: FormalSum) -> float:
    deg = float(degree(model.struct, _any_key(ratio)))
    return max(
        _window_max(g_yx_field_sum(model, ratio, off)) / h**deg
        for off, h in _dyadic_offsets(model.grid)
    )


def norm_star(model: Model, tau: Sym, _memo=None) -> float:
    """The recursive size norm: max of the symbol's own norm and the ratio
    norms times the star norms further down."""
    if _memo is None:
        _memo = {}
    if tau in _memo:
        return _memo[tau]
    base = norm_plus(model, tau) if tau.plus else norm_t(model, tau)
    ratios = ratios_plus(model.struct, tau) if tau.plus else ratios_t(model.struct, tau)
    for sigma in sorted((s for s in ratios if s != tau and not s.is_unit()), key=repr):
        if tau.plus and sigma.is_poly():
            continue
        base = max(base, norm_ratio(model, ratios[sigma]) * norm_star(model, sigma, _memo))
    _memo[tau] = base
    return base


def criterion_bases(struct: Structure, caps: Caps):
    """The truncated bases restricted to symbols the local-expansion criterion
    can see: a T segment whose junction weight reaches the degree cap has all
    its recentering legs filtered out of T+, so its recentered realization
    coincides with the raw one and carries no decay to measure."""
    basis_t, basis_plus = build_bases(struct, caps)
    cap = struct.global_cap()
    if cap is not None:
        basis_t = [
            tau
            for tau in basis_t
            if tau.is_poly() or Fraction(sum(mi_abs(s) for s in tau.slots())) < cap
        ]
    return basis_t, basis_plus


def model_size(model: Model, caps: Caps | None = None) -> float:
    caps = caps or model.caps
    basis_t, basis_plus = criterion_bases(model.struct, caps)
    memo: dict = {}
    vals = [norm_star(model, tau, memo) for tau in basis_t if not tau.is_poly()]
    vals += [norm_plus(model, mu) for mu in basis_plus if mu.labels]
    return max(vals) if vals else 0.0


# ---------------------------------------------------------------------------
# empirical verification


@dataclass
class VerifyRow:
    symbol: str
    sector: str
    degree: float
    fitted_slope: float
    tolerance: float
    ok: bool


def verify_pi_symbol(model: Model, tau: Sym, tol=0.15, levels=None) -> VerifyRow:
    if levels is None:
        levels = range(1, model.grid.i_max)
    deg = float(degree(model.struct, tau))
    samples = [(2.0**-i, window_sup(pairing(model, tau, i))) for i in levels]
    try:
        fit = fit_exponent(samples)
        slope = fit.slope
        ok = slope >= deg - tol
    except Exception:
        # pairings that vanish identically satisfy any decay bound
        slope = float("inf")
        ok = True
    return VerifyRow(sym_str(tau), "T", deg, slope, tol, ok)


def verify_g_symbol(model: Model, mu: Sym, tol=0.15) -> VerifyRow:
    deg = float(degree(model.struct, mu))
    samples = [
        (h, _window_max(g_yx_field(model, mu, off)))
        for off, h in _dyadic_offsets(model.grid, start=4)
    ]
    try:
        fit = fit_exponent(samples)
        slope = fit.slope
        ok = slope >= deg - tol
    except Exception:
        slope = float("inf")
        ok = True
    return VerifyRow(sym_str(mu), "T+", deg, slope, tol, ok)


def model_verify(model: Model, tol=0.15, caps: Caps | None = None, levels=None):
    """Slope report for every basis symbol: pairing decay on the T side,
    two-point growth on the T+ side."""
    caps = caps or model.caps
    basis_t, basis_plus = criterion_bases(model.struct, caps)
    rows = [verify_pi_symbol(model, tau, tol, levels) for tau in basis_t]
    rows += [verify_g_symbol(model, mu, tol) for mu in basis_plus if not mu.is_unit()]
    return rows


def verify_report_json(rows):
    return [
        {
            "symbol": r.symbol,
            "sector": r.sector,
            "degree": r.degree,
            "fitted_slope": r.fitted_slope,
            "tolerance": r.tolerance,
            "pass": bool(r.ok),
        }
        for r in rows
    ]
