"""Configuration-driven experiment runner.

Subcommands build the symbol structures, run the exact-identity oracles, fit
local-expansion exponents, verify canonical models, and lift word systems.
Each run writes a versioned JSON report (and CSV/SVG artifacts where they
apply) into a directory named by the hash of the effective configuration, so
identical configurations produce bit-identical artifacts.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import click
import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "paraflow"
import matplotlib.pyplot as plt  # noqa: E402

import numpy as np  # noqa: E402

from . import __version__  # noqa: E402
from .dyadic_core import Grid  # noqa: E402
from .holder_lab import AssumptionViolation, check_assumption_a, fit_exponent, synth_rough  # noqa: E402
from .model_kit import (  # noqa: E402
    canonical_model,
    model_size,
    model_verify,
    pairing,
    verify_report_json,
    window_sup,
)
from .para_engine import (  # noqa: E402
    pair_expansion_remainder,
    simp_para,
    twisted_oracle,
    twisted_simp,
    twisted_simp_block,
)
from .paracontrolled import (  # noqa: E402
    StructureError,
    build_system,
    defect_report,
    extended_sizes,
    inclusion_compatible,
    lift_cross_check,
    lift_system,
    system_residual,
    word_size,
)
from .structure_algebra import (  # noqa: E402
    Caps,
    basis_json,
    build_bases,
    degree_additivity_ok,
    segment_structure,
    verify_comodule,
    word_structure,
)

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# plumbing


def _frac(x) -> Fraction:
    try:
        return Fraction(x) if not isinstance(x, float) else Fraction(x).limit_denominator(10**6)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad rational {x!r}: {exc}") from exc


def _frac_str(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _merged(defaults: dict, cfg: dict, seed) -> dict:
    out = dict(defaults)
    for key, val in cfg.items():
        if key not in defaults:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = val
    if seed is not None:
        out["seed"] = int(seed)
    return out


def _config_hash(command: str, cfg: dict) -> str:
    blob = json.dumps({"command": command, **cfg}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _run_dir(out_opt, command: str, cfg: dict) -> str:
    base = out_opt or os.environ.get("PARAFLOW_OUT") or "runs"
    path = os.path.join(base, f"{command}-{_config_hash(command, cfg)}")
    os.makedirs(path, exist_ok=True)
    return path


def _pmap(fn, items, jobs: int):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _row(check: str, kind: str, value, threshold, passed: bool) -> dict:
    return {
        "check": check,
        "kind": kind,
        "value": None if value is None else float(value),
        "threshold": None if threshold is None else float(threshold),
        "pass": bool(passed),
    }


def _exact_row(check: str, residual: float, tol: float) -> dict:
    return _row(check, "exact", residual, tol, residual < tol)


def _slope_row(check: str, slope: float, bound: float) -> dict:
    return _row(check, "regression", slope, bound, slope >= bound)


def _emit(command: str, cfg: dict, rows: list, run_dir: str, extra=None) -> int:
    report = {
        "schema_version": SCHEMA_VERSION,
        "library_version": __version__,
        "command": command,
        "config": cfg,
        "config_hash": _config_hash(command, cfg),
        "rows": rows,
        "pass": all(r["pass"] for r in rows),
    }
    if extra:
        report.update(extra)
    with open(os.path.join(run_dir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for r in rows:
        status = "PASS" if r["pass"] else "FAIL"
        click.echo(f"{status} {r['check']}: value={r['value']} threshold={r['threshold']}")
    click.echo(f"report: {os.path.join(run_dir, 'report.json')}")
    return 0 if report["pass"] else 1


def _common(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True), default=None)(fn)
    fn = click.option("--out", "out_dir", type=click.Path(), default=None)(fn)
    fn = click.option("--jobs", type=int, default=1)(fn)
    fn = click.option("--seed", type=int, default=None)(fn)
    return fn


def _write_csv(path: str, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in rows:
            writer.writerow(r)


def _write_svg(path: str, curves: dict, xlabel: str, ylabel: str):
    fig, ax = plt.subplots(figsize=(5, 4))
    for name in sorted(curves):
        xs, ys = zip(*curves[name])
        ax.loglog(xs, ys, marker="o", label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# ---------------------------------------------------------------------------
# commands


@click.group()
def main():
    """Dyadic-analysis workbench: structures, oracles, expansions, models, lifts."""


STRUCTURE_DEFAULTS = {
    "dim": 1,
    "alpha": ["2/5", "2/5"],
    "caps": [2, 2, 2],
    "seed": 0,
}


@main.command()
@_common
def structure(config_path, out_dir, jobs, seed):
    """Build the truncated symbol bases and verify the splitting algebra."""
    try:
        cfg = _merged(STRUCTURE_DEFAULTS, _load_config(config_path), seed)
        alpha = tuple(_frac(a) for a in cfg["alpha"])
        caps = Caps(*cfg["caps"])
        check_assumption_a(alpha)
    except (ConfigError, AssumptionViolation, TypeError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    run = _run_dir(out_dir, "structure", cfg)
    struct = segment_structure(alpha, cfg["dim"])
    rep = verify_comodule(struct, caps)
    basis_t, basis_plus = build_bases(struct, caps)
    additive = all(degree_additivity_ok(struct, t) for t in basis_t if not t.is_poly())
    rows = [
        _row("comodule-coassociativity", "exact", len(rep.mismatches), 1, rep.ok),
        _row("degree-additivity", "exact", 0 if additive else 1, 1, additive),
        _row(
            "basis-sizes",
            "exact",
            len(basis_t) + len(basis_plus),
            None,
            len(basis_t) > 0 and len(basis_plus) > 0,
        ),
    ]
    with open(os.path.join(run, "bases.json"), "w") as fh:
        json.dump(
            {
                "T": basis_json(struct, basis_t),
                "T_plus": basis_json(struct, basis_plus),
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    sys.exit(_emit("structure", cfg, rows, run))


ORACLE_DEFAULTS = {
    "dim": 1,
    "log2_n": 9,
    "level_cap": 4,
    "seeds": [0, 1, 2, 3, 4],
    "betas": [["2/5", "2/5"], ["1/2", "-3/4", "2/5"], ["7/20", "3/10", "-11/20", "2/5"]],
    "tolerance": 1e-8,
    "mutate_sign": False,
    "seed": 0,
}


@main.command()
@_common
def oracle(config_path, out_dir, jobs, seed):
    """Exact-identity oracles: nested-sum equivalence and reductions."""
    try:
        cfg = _merged(ORACLE_DEFAULTS, _load_config(config_path), seed)
        betas = [tuple(_frac(b) for b in bs) for bs in cfg["betas"]]
        for bs in betas:
            check_assumption_a(bs)
        grid = Grid(cfg["dim"], cfg["log2_n"])
    except (ConfigError, AssumptionViolation, ValueError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    run = _run_dir(out_dir, "oracle", cfg)
    lcap = cfg["level_cap"]
    mutate = -1.0 if cfg["mutate_sign"] else 1.0
    from .dyadic_core import block_decompose

    def one_case(args):
        s, beta = args
        seqs = [
            block_decompose(
                synth_rough(float(b), s * 101 + j, grid, levels=range(-1, lcap + 1)), lcap
            )
            for j, b in enumerate(beta)
        ]
        res = max(
            window_sup(twisted_oracle(beta, seqs, i, lcap) * mutate - twisted_simp_block(beta, seqs, i))
            for i in range(-1, lcap + 1)
        )
        pos = tuple(abs(b) for b in beta)
        red = window_sup(twisted_simp(pos, seqs) - simp_para(seqs).summed())
        single = window_sup(twisted_simp((beta[0],), seqs[:1]) - seqs[0].summed())
        return res, red, single

    cases = [(s, beta) for s in cfg["seeds"] for beta in betas]
    results = _pmap(one_case, cases, jobs)
    tol = cfg["tolerance"]
    rows = [
        _exact_row("nested-sum-oracle", max(r[0] for r in results), tol),
        _exact_row("positive-tuple-reduction", max(r[1] for r in results), tol),
        _exact_row("single-factor-degenerate", max(r[2] for r in results), tol),
    ]
    sys.exit(_emit("oracle", cfg, rows, run))


EXPAND_DEFAULTS = {
    "dim": 1,
    "log2_n": 14,
    "cases": [
        {"name": "pair-0.4-0.4", "alpha": ["2/5", "2/5"], "target": "4/5", "tolerance": 0.15},
        {"name": "pair-0.6-0.7", "alpha": ["3/5", "7/10"], "target": "13/10", "tolerance": 0.15},
    ],
    "seeds": [0, 1, 2, 3, 4, 5, 6, 7, 8, 9],
    "h_exponents": [3, 4, 5, 6, 7, 8],
    "seed": 0,
}


@main.command()
@_common
def expand(config_path, out_dir, jobs, seed):
    """Fit local-expansion remainder exponents for pair paraproducts."""
    try:
        cfg = _merged(EXPAND_DEFAULTS, _load_config(config_path), seed)
        grid = Grid(cfg["dim"], cfg["log2_n"])
        for case in cfg["cases"]:
            check_assumption_a([_frac(a) for a in case["alpha"]])
    except (ConfigError, AssumptionViolation, ValueError, KeyError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    run = _run_dir(out_dir, "expand", cfg)
    h_js = []
    for j in cfg["h_exponents"]:
        if 2 <= (grid.n >> j) <= grid.n // 4:
            h_js.append(j)
        else:
            click.echo(f"warning: dropping h=2^-{j} (outside the resolvable window)", err=True)
    rows, csv_rows, curves = [], [], {}
    for case in cfg["cases"]:
        alpha = tuple(float(_frac(a)) for a in case["alpha"])

        def one_seed(s, alpha=alpha):
            f = synth_rough(alpha[0], s, grid)
            g = synth_rough(alpha[1], 1000 + s, grid)
            pts = []
            for j in h_js:
                h = (2.0**-j,)
                sup = window_sup(pair_expansion_remainder(f, g, alpha, h))
                pts.append((2.0**-j, sup))
            return pts, fit_exponent(pts).slope

        per_seed = _pmap(one_seed, cfg["seeds"], jobs)
        slopes = [sl for _, sl in per_seed]
        for s, (pts, sl) in zip(cfg["seeds"], per_seed):
            for hval, sup in pts:
                csv_rows.append([case["name"], s, f"{hval:.10e}", f"{sup:.10e}"])
        curves[case["name"]] = per_seed[0][0]
        median = float(np.median(slopes))
        bound = float(_frac(case["target"])) - float(case["tolerance"])
        rows.append(_slope_row(f"expansion-{case['name']}", median, bound))
    _write_csv(os.path.join(run, "expansion.csv"), ["case", "seed", "h", "sup"], sorted(csv_rows))
    _write_svg(os.path.join(run, "expansion.svg"), curves, "h", "sup of remainder")
    sys.exit(_emit("expand", cfg, rows, run))


MODEL_DEFAULTS = {
    "dim": 1,
    "log2_n": 13,
    "alpha": ["2/5", "2/5"],
    "caps": [2, 2, 2],
    "seed": 100,
    "tolerance": 0.15,
    "perturbation": 1e-3,
    "perturbation_bound": 1e-2,
}


@main.command()
@_common
def model(config_path, out_dir, jobs, seed):
    """Verify the canonical model: pairing decay and two-point growth."""
    try:
        cfg = _merged(MODEL_DEFAULTS, _load_config(config_path), seed)
        alpha = tuple(_frac(a) for a in cfg["alpha"])
        check_assumption_a(alpha)
        grid = Grid(cfg["dim"], cfg["log2_n"])
        caps = Caps(*cfg["caps"])
    except (ConfigError, AssumptionViolation, TypeError, ValueError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    run = _run_dir(out_dir, "model", cfg)
    s = cfg["seed"]
    fs = [synth_rough(float(a), s + 100 * j, grid) for j, a in enumerate(alpha)]
    m = canonical_model(fs, alpha, caps)
    verify_rows = model_verify(m, tol=cfg["tolerance"])
    rows = [
        _slope_row(f"model-{r.sector}-{r.symbol}", r.fitted_slope, r.degree - r.tolerance)
        for r in verify_rows
    ]
    size = model_size(m)
    rows.append(_row("model-size-finite", "exact", size, None, np.isfinite(size)))
    bump = fs[0] * 0.0
    bump.values[:] = cfg["perturbation"] * np.sin(
        2 * np.pi * np.arange(grid.shape[0]).reshape([-1] + [1] * (grid.dim - 1)) / grid.shape[0]
    )
    m2 = canonical_model([fs[0] + bump] + fs[1:], alpha, caps)
    basis_t, _ = build_bases(m.struct, Caps(1, 1, 1))
    moved = max(
        window_sup(pairing(m2, tau, i) - pairing(m, tau, i)) for tau in basis_t for i in (2, 5, 8)
    )
    rows.append(_exact_row("model-continuity", moved, cfg["perturbation_bound"]))
    with open(os.path.join(run, "verify.json"), "w") as fh:
        json.dump(verify_report_json(verify_rows), fh, indent=2, sort_keys=True)
        fh.write("\n")
    sys.exit(_emit("model", cfg, rows, run))


LIFT_DEFAULTS = {
    "dim": 1,
    "log2_n": 12,
    "letters": {"a": "2/5", "b": "7/20"},
    "r": "11/10",
    "words": ["", "a", "b", "ba"],
    "seed": 0,
    "cross_tolerance": 1e-8,
    "defect_tolerance": 0.15,
}


@main.command()
@_common
def lift(config_path, out_dir, jobs, seed):
    """Build a word system from synthesized data and verify its lift."""
    try:
        cfg = _merged(LIFT_DEFAULTS, _load_config(config_path), seed)
        sizes = {l: _frac(v) for l, v in cfg["letters"].items()}
        r = _frac(cfg["r"])
        words = [tuple(w) for w in cfg["words"]]
        grid = Grid(cfg["dim"], cfg["log2_n"])
    except (ConfigError, ValueError, AttributeError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    run = _run_dir(out_dir, "lift", cfg)
    s = cfg["seed"]
    refs = {l: synth_rough(float(sizes[l]), 300 + s + 7 * j, grid) for j, l in enumerate(sorted(sizes))}
    rem = {
        w: synth_rough(float(r - word_size(sizes, w)), 500 + 10 * s + i, grid)
        for i, w in enumerate(words)
    }
    try:
        system = build_system(sizes, refs, rem, r)
    except StructureError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    lifted = lift_system(system)
    rows = [_exact_row("system-relation", system_residual(system), 1e-8)]
    checks = lift_cross_check(lifted, tol=cfg["cross_tolerance"])
    rows.append(
        _exact_row("lift-two-forms", max(c.residual for c in checks), cfg["cross_tolerance"])
    )
    for dr in defect_report(lifted, tol=cfg["defect_tolerance"]):
        rows.append(_slope_row(f"defect-{dr.symbol}", dr.fitted_slope, dr.degree - dr.tolerance))
    small = word_structure(sizes, grid.dim)
    big = word_structure(extended_sizes(system), grid.dim)
    syms = sorted(lifted.coefficients, key=repr)
    compat = inclusion_compatible(small, big, [t for t in syms if not t.is_poly()])
    rows.append(_row("inclusion-compatibility", "exact", 0 if compat else 1, 1, compat))
    sys.exit(_emit("lift", cfg, rows, run))


if __name__ == "__main__":
    main()
