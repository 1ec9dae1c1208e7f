"""Paracontrolled systems over a finite alphabet of reference functions:
bottom-up construction from remainders, the canonical model on the word symbol
structure, the lift of a system to a coefficient family over that structure,
and translation-defect verification of the lift.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .cut_algebra import mi_abs, mi_add, mi_factorial, mi_zero, partitions
from .dyadic_core import GridFunction, derive_fn
from .holder_lab import check_assumption_a, fit_exponent
from .model_kit import (
    Model,
    ResidualReport,
    VerifyRow,
    _dyadic_offsets,
    _window_max,
    g_yx_field_sum,
    ratios_t,
    window_sup,
)
from .para_engine import para_weighted, tree_sum, twisted_weighted
from .structure_algebra import (
    Caps,
    Structure,
    Sym,
    coproduct,
    coproduct_plus,
    degree,
    sym_str,
    word_structure,
)


class StructureError(ValueError):
    """The word index set violates the closure conditions."""


# ---------------------------------------------------------------------------
# words and the index set

REMAINDER_MARK = "#"


def word_name(w) -> str:
    return "".join(w) if w else "()"


def remainder_letter(w) -> str:
    """The extra letter standing for the remainder attached to the word w."""
    return REMAINDER_MARK + "".join(w)


def word_size(sizes: dict, w) -> Fraction:
    return sum((Fraction(sizes[l]) for l in w), Fraction(0))


def _is_ending(w, v) -> bool:
    """w is a contiguous ending of v."""
    return len(w) <= len(v) and tuple(v[len(v) - len(w) :]) == tuple(w)


def validate_words(sizes: dict, words, r) -> tuple:
    """Check the closure conditions on the index set and return the final
    subset: the empty word belongs, every size stays below r, the maximal
    words have positive size, and every word is an ending of a maximal one."""
    words = {tuple(w) for w in words}
    if () not in words:
        raise StructureError("the empty word must belong to the index set")
    r = Fraction(r)
    for w in words:
        for l in w:
            if l not in sizes:
                raise StructureError(f"unknown letter {l!r}")
        if not word_size(sizes, w) < r:
            raise StructureError(f"word {word_name(w)} has size >= r")
    final = tuple(
        sorted(w for w in words if not any((l,) + w in words for l in sizes))
    )
    if words == {()}:
        # the degenerate system: the lone component is its own remainder
        return final
    for w in final:
        if not word_size(sizes, w) > 0:
            raise StructureError(f"final word {word_name(w)} has non-positive size")
    for w in words:
        if not any(_is_ending(w, v) for v in final):
            raise StructureError(f"word {word_name(w)} does not extend to a final word")
    return final


# ---------------------------------------------------------------------------
# the system


@dataclass
class ParacontrolledSystem:
    """A family (u_w) controlled by the reference functions: each component
    splits as u_w = sum_l P(u_{lw}, [l]) + u_w^#, extensions prepending the
    letter, with the remainder u_w^# of declared regularity r - |w|."""

    sizes: dict
    references: dict
    r: Fraction
    words: tuple
    final: tuple
    remainders: dict
    components: dict

    @property
    def grid(self):
        return next(iter(self.references.values())).grid

    def word_size(self, w) -> Fraction:
        return word_size(self.sizes, w)

    def extensions(self, w) -> list:
        """Letters l with lw in the index set."""
        return [l for l in sorted(self.sizes) if (l,) + tuple(w) in set(self.words)]


def build_system(sizes: dict, references: dict, remainders: dict, r) -> ParacontrolledSystem:
    """Assemble the components bottom-up from the remainders: maximal words
    carry u_w = u_w^#, and each shorter word adds the paraproducts of the
    references against the already-built one-letter extensions."""
    sizes = {l: Fraction(v) for l, v in sizes.items()}
    r = Fraction(r)
    words = tuple(sorted((tuple(w) for w in remainders), key=lambda w: (len(w), w)))
    final = validate_words(sizes, words, r)
    d0 = next(iter(references.values())).grid.dim
    components: dict = {}
    zero_junction = (mi_zero(d0),)
    for w in sorted(words, key=len, reverse=True):
        terms = [remainders[w]]
        for l in sorted(sizes):
            ext = (l,) + w
            if ext in remainders:
                terms.append(para_weighted([components[ext], references[l]], zero_junction))
        components[w] = tree_sum(terms)
    return ParacontrolledSystem(sizes, references, r, words, final, dict(remainders), components)


def system_residual(system: ParacontrolledSystem) -> float:
    """Recompute the defining relation of every component and report the
    largest deviation (zero up to round-off by construction)."""
    d0 = system.grid.dim
    zero_junction = (mi_zero(d0),)
    worst = 0.0
    for w in system.words:
        acc = system.remainders[w]
        for l in system.extensions(w):
            acc = acc + para_weighted(
                [system.components[(l,) + w], system.references[l]], zero_junction
            )
        worst = max(worst, window_sup(system.components[w] - acc))
    return worst


# ---------------------------------------------------------------------------
# models on word structures


def word_model(sizes: dict, references: dict, caps: Caps = Caps(2, 2, 2), words=None) -> Model:
    """The canonical model over the word symbol structure: Pi realizes a word
    as the weighted iterated paraproduct of its letters' references, g as the
    corresponding twisted operators."""
    sizes = {l: Fraction(v) for l, v in sizes.items()}
    d0 = next(iter(references.values())).grid.dim
    struct = word_structure(sizes, d0)
    if words is not None:
        for w in words:
            if w:
                check_assumption_a(tuple(sizes[l] for l in w))
    fs = [references[label] for label, _ in struct.size_items]
    alpha = tuple(v for _, v in struct.size_items)
    return Model(fs, alpha, caps, struct=struct)


def extended_sizes(system: ParacontrolledSystem) -> dict:
    """Letter sizes for the alphabet enlarged by one remainder letter per
    word, of size r - |w|."""
    out = dict(system.sizes)
    for w in system.words:
        out[remainder_letter(w)] = system.r - system.word_size(w)
    return out


def extended_model(system: ParacontrolledSystem, caps: Caps = Caps(2, 2, 2)) -> Model:
    refs = dict(system.references)
    for w in system.words:
        refs[remainder_letter(w)] = system.remainders[w]
    return word_model(extended_sizes(system), refs, caps)


def rho_symbol(system: ParacontrolledSystem, w, d0=None) -> Sym:
    """The extended-alphabet word symbol whose realization is the iterated
    paraproduct of the remainder of w followed by the letters of w."""
    d0 = d0 if d0 is not None else system.grid.dim
    labels = (remainder_letter(w),) + tuple(w)
    z = mi_zero(d0)
    return Sym(False, labels, (z,) * (len(labels) - 1), z, None, z)


def inclusion_compatible(small: Structure, big: Structure, syms) -> bool:
    """Both splittings agree term by term on symbols of the smaller label set
    (the inclusion into the enlarged alphabet commutes with the coproducts)."""
    for s in syms:
        if coproduct(small, s).terms != coproduct(big, s).terms:
            return False
        for (left, right), _ in coproduct(small, s).items():
            if not right.is_unit():
                if coproduct_plus(small, right).terms != coproduct_plus(big, right).terms:
                    return False
    return True


# ---------------------------------------------------------------------------
# the lift


@dataclass
class ModelledDistribution:
    """A coefficient family over the word symbol structure, together with the
    models used to build and transport it."""

    system: ParacontrolledSystem
    model: Model
    coefficients: dict
    r: Fraction

    def sectors(self) -> list:
        return sorted({float(degree(self.model.struct, tau)) for tau in self.coefficients})


def lift_system(system: ParacontrolledSystem, caps: Caps = Caps(2, 2, 2)) -> ModelledDistribution:
    """Coefficients u_tau(x) = sum_w gbar_x(rho(w)/tau) over the index set:
    every left leg of the splitting of rho(w) that stays inside the base
    letter structure contributes its character value as a function of x."""
    model = extended_model(system, caps)
    struct = model.struct
    base_letters = set(system.sizes)
    coeffs: dict = {}
    for w in system.words:
        rho = rho_symbol(system, w)
        for sigma, ratio in sorted(ratios_t(struct, rho).items(), key=lambda kv: repr(kv[0])):
            if any(l not in base_letters for l in sigma.labels):
                continue
            val = model.g_sum(ratio)
            coeffs[sigma] = coeffs[sigma] + val if sigma in coeffs else val
    return ModelledDistribution(system, model, coeffs, system.r)


def lift_coefficient_direct(system: ParacontrolledSystem, tau: Sym) -> GridFunction:
    """The same coefficient written out: a sum over extension words of
    multinomial-weighted twisted paraproducts with the remainder in the first
    slot and the derivative total l + p split over the slots."""
    d0 = system.grid.dim
    w = tuple(tau.labels)
    k_tot = tau.p
    for slot in tau.slots():
        k_tot = mi_add(k_tot, slot)
    slot_fact = mi_factorial(tau.p)
    for slot in tau.slots():
        slot_fact *= mi_factorial(slot)
    terms = []
    for full in system.words:
        if not _is_ending(w, full):
            continue
        prefix = full[: len(full) - len(w)]
        ops_base = [system.remainders[full]] + [system.references[l] for l in prefix]
        beta_base = [system.r - system.word_size(full)] + [system.sizes[l] for l in prefix]
        n = len(ops_base)
        zero_ell = tuple(mi_zero(d0) for _ in range(n - 1))
        for parts in partitions(k_tot, n):
            coeff = Fraction(mi_factorial(k_tot), slot_fact)
            for part in parts:
                coeff /= mi_factorial(part)
            beta = tuple(b - mi_abs(kj) for b, kj in zip(beta_base, parts))
            ops = [derive_fn(f, kj) for f, kj in zip(ops_base, parts)]
            terms.append(twisted_weighted(beta, zero_ell, ops, tail=mi_zero(d0)) * float(coeff))
    return tree_sum(terms)


def lift_cross_check(lift: ModelledDistribution, tol=1e-8) -> list:
    """Compare the splitting-derived coefficients with the written-out form
    symbol by symbol."""
    out = []
    for tau in sorted(lift.coefficients, key=repr):
        direct = lift_coefficient_direct(lift.system, tau)
        res = window_sup(lift.coefficients[tau] - direct)
        out.append(ResidualReport(sym_str(tau), res, tol))
    return out


# ---------------------------------------------------------------------------
# translation defects


def defect_field(lift: ModelledDistribution, tau: Sym, offset) -> np.ndarray:
    """u_tau(x+h) - sum_sigma u_sigma(x) g_{x+h,x}(sigma/tau), over x."""
    struct = lift.model.struct
    axes = tuple(range(lift.model.grid.dim))
    shifts = tuple(-o for o in offset)
    out = np.roll(lift.coefficients[tau].values, shifts, axis=axes).copy()
    for sigma, coeff_fn in lift.coefficients.items():
        ratios = ratios_t(struct, sigma)
        if tau in ratios:
            out -= coeff_fn.values * g_yx_field_sum(lift.model, ratios[tau], offset)
    return out


def defect_row(lift: ModelledDistribution, tau: Sym, tol=0.15, start=3) -> VerifyRow:
    """Fitted decay slope of the translation defect of the tau coefficient;
    the required exponent is r minus the symbol degree."""
    deg = float(lift.r) - float(degree(lift.model.struct, tau))
    samples = [
        (h, _window_max(defect_field(lift, tau, off)))
        for off, h in _dyadic_offsets(lift.model.grid, start=start)
    ]
    try:
        slope = fit_exponent(samples).slope
        ok = slope >= deg - tol
    except Exception:
        slope = float("inf")
        ok = True
    return VerifyRow(sym_str(tau), "defect", deg, slope, tol, ok)


def defect_report(lift: ModelledDistribution, tol=0.15, start=3) -> list:
    return [defect_row(lift, tau, tol, start) for tau in sorted(lift.coefficients, key=repr)]
