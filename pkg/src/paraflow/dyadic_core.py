"""Periodic grids, Littlewood-Paley projectors, and block-sequence calculus.

Conventions
-----------
- Domain: unit torus per axis, N = 2**log2_n points per axis, dim in {1, 2}.
- Forward transform kernel e^{-2 pi i x.xi}; frequencies are the integers in
  (-N/2, N/2].
- Dyadic bands: chi_{-1} covers |xi| <= 1, chi_i for 0 <= i < I_max the
  annulus 2^i <~ |xi| <~ 2^{i+1}, and the top band i = I_max absorbs the
  symbol tail so the family sums to 1 exactly and band-limited inputs are
  reproduced exactly.  I_max = log2_n - 2.
- The smooth cutoff is phi(t) = 1 for t <= 1, theta(2 - t) on (1, 2), 0 for
  t >= 2, with theta(u) = A(u)/(A(u) + A(1-u)), A(u) = exp(-1/u).  Weighted
  projector symbols use the analytic xi-derivatives of phi (via sympy) so the
  telescoping cancellations are exact in floating point.
- The weighted projector Delta_i^ell convolves against z -> (-z)^ell K_i(z),
  i.e. multiplies by (2 pi i)^{-|ell|} d_xi^ell chi_i (constant pinned by the
  quadrature oracle in the test suite).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy as sp

from .cut_algebra import mi_abs, mi_ball, mi_range, mi_sub, mi_binom, mi_factorial

# ---------------------------------------------------------------------------
# smooth cutoff profile and its t-derivatives (exact symbolic differentiation)

MAX_WEIGHT = 2


def phi_symbolic(m: int):
    """Sympy expression for phi^{(m)} on (1, 2); used by tests to verify the
    closed-form derivative formulas below."""
    t = sp.symbols("t", positive=True)
    a_hi = sp.exp(-1 / (2 - t))
    a_lo = sp.exp(-1 / (t - 1))
    phi = a_hi / (a_hi + a_lo)
    return t, (sp.diff(phi, t, m) if m else phi)


def _phi_profile(t: np.ndarray, m: int) -> np.ndarray:
    """phi^{(m)}(t) for arrays t >= 0.

    phi(t) = 1 for t <= 1, 0 for t >= 2, and on (1, 2) the logistic
    phi = 1/(1 + e^{g}) with g(t) = 1/(2-t) - 1/(t-1).  Derivatives are
    written in terms of phi(1-phi), which stays bounded, so evaluation is
    stable all the way to the edges (where everything underflows to the flat
    values exactly).
    """
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    if m == 0:
        out[t <= 1.0] = 1.0
    inside = (t > 1.0) & (t < 2.0)
    if not np.any(inside):
        return out
    ti = t[inside]
    lo = ti - 1.0
    hi = 2.0 - ti
    g = 1.0 / hi - 1.0 / lo
    with np.errstate(under="ignore"):
        e = np.exp(-np.abs(g))
        phi = np.where(g >= 0, e / (1.0 + e), 1.0 / (1.0 + e))
    if m == 0:
        out[inside] = phi
        return out
    gp = 1.0 / hi**2 + 1.0 / lo**2
    w = phi * (1.0 - phi)
    if m == 1:
        out[inside] = -gp * w
        return out
    if m == 2:
        gpp = 2.0 / hi**3 - 2.0 / lo**3
        out[inside] = w * (gp**2 * (1.0 - 2.0 * phi) - gpp)
        return out
    raise ValueError(f"profile derivative order {m} not supported")


# ---------------------------------------------------------------------------
# grids and grid functions


@dataclass(frozen=True)
class Grid:
    dim: int
    log2_n: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if self.log2_n < 3:
            raise ValueError("log2_n must be >= 3 to resolve any dyadic band")

    @property
    def n(self) -> int:
        return 1 << self.log2_n

    @property
    def i_max(self) -> int:
        return self.log2_n - 2

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    def freqs(self):
        """Integer frequencies per axis, in (-N/2, N/2], fft layout."""
        n = self.n
        f = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
        f[n // 2] = n // 2  # place Nyquist at +N/2 per the convention
        return f

    def freq_mesh(self):
        f = self.freqs()
        if self.dim == 1:
            return (f,)
        return np.meshgrid(f, f, indexing="ij")

    def abs_freq(self) -> np.ndarray:
        mesh = self.freq_mesh()
        if self.dim == 1:
            return np.abs(mesh[0]).astype(np.float64)
        return np.sqrt(mesh[0].astype(np.float64) ** 2 + mesh[1].astype(np.float64) ** 2)

    def coords(self):
        """Coordinate arrays x in [0, 1) per axis over the full grid shape."""
        x = np.arange(self.n, dtype=np.float64) / self.n
        if self.dim == 1:
            return (x,)
        return np.meshgrid(x, x, indexing="ij")


class GridFunction:
    """Real-valued function sampled on a Grid, with a cached spectrum."""

    __slots__ = ("grid", "values", "_hat")

    def __init__(self, grid: Grid, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != grid.shape:
            raise ValueError(f"values shape {values.shape} != grid shape {grid.shape}")
        self.grid = grid
        self.values = values
        self._hat = None

    # -- spectrum -----------------------------------------------------------
    def hat(self) -> np.ndarray:
        if self._hat is None:
            self._hat = np.fft.fftn(self.values)
        return self._hat

    @classmethod
    def from_hat(cls, grid: Grid, hat: np.ndarray) -> "GridFunction":
        vals = np.fft.ifftn(hat).real
        out = cls(grid, vals)
        return out

    # -- arithmetic ----------------------------------------------------------
    def _check(self, other):
        if self.grid != other.grid:
            raise ValueError("grid mismatch")

    def __add__(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return GridFunction(self.grid, self.values + other.values)
        return GridFunction(self.grid, self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return GridFunction(self.grid, self.values - other.values)
        return GridFunction(self.grid, self.values - other)

    def __rsub__(self, other):
        return GridFunction(self.grid, other - self.values)

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return GridFunction(self.grid, self.values * other.values)
        return GridFunction(self.grid, self.values * float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    # -- serialization: 16-byte header (dim, log2_n) + flat real64 -----------
    def to_bytes(self) -> bytes:
        header = struct.pack("<qq", self.grid.dim, self.grid.log2_n)
        return header + self.values.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "GridFunction":
        dim, log2_n = struct.unpack("<qq", data[:16])
        grid = Grid(int(dim), int(log2_n))
        vals = np.frombuffer(data[16:], dtype="<f8").reshape(grid.shape).copy()
        return cls(grid, vals)


def constant(grid: Grid, c: float) -> GridFunction:
    return GridFunction(grid, np.full(grid.shape, float(c)))


def coordinate_power(grid: Grid, p) -> GridFunction:
    """The grid function y -> y^p (multi-index power of the coordinates)."""
    vals = np.ones(grid.shape)
    for axis, power in enumerate(p):
        if power:
            vals = vals * grid.coords()[axis] ** power
    return GridFunction(grid, vals)


# ---------------------------------------------------------------------------
# Littlewood-Paley symbol bank

# The kernel pairing uses (-z)^ell; with the e^{-2 pi i x xi} forward
# convention the multiplier constant is (+2 pi i)^{-|ell|}.
WEIGHT_CONST_BASE = 2.0j * np.pi


class LPSymbolBank:
    """Smooth dyadic partition symbols and their weighted derivatives."""

    def __init__(self, grid: Grid, weight_cap: int = MAX_WEIGHT):
        if weight_cap > MAX_WEIGHT:
            raise ValueError(f"weight cap {weight_cap} exceeds supported {MAX_WEIGHT}")
        self.grid = grid
        self.weight_cap = weight_cap
        self._build_plain()
        self._weighted: dict = {}

    # level i runs -1..i_max; list index is i + 1
    def _build_plain(self):
        g = self.grid
        r = g.abs_freq()
        # F_j = phi(|xi| / 2^j) for j = 0..i_max
        self._bigF = [_phi_profile(r / float(1 << j), 0) for j in range(g.i_max + 1)]
        chis = [self._bigF[0]]
        for i in range(g.i_max):
            chis.append(self._bigF[i + 1] - self._bigF[i])
        chis.append(1.0 - self._bigF[g.i_max])  # top band absorbs the tail
        total = np.zeros_like(chis[0])
        for c in chis:
            total += c
        # pointwise renormalization; the telescoping sum is already 1 up to
        # float round-off, so this is a near-no-op that makes it exact
        self.chis = [c / total for c in chis]
        below = [np.zeros_like(chis[0])]
        acc = np.zeros_like(chis[0])
        for c in self.chis:
            acc = acc + c
            below.append(acc.copy())
        # below[j + 1] = sum of chi_i for i <= j - 1, j from -1
        self._below = below

    def n_levels(self) -> int:
        return self.grid.i_max + 2  # levels -1..i_max

    def chi(self, i: int) -> np.ndarray:
        if not (-1 <= i <= self.grid.i_max):
            raise IndexError(f"level {i} out of range [-1, {self.grid.i_max}]")
        return self.chis[i + 1]

    def chi_below(self, j: int) -> np.ndarray:
        """Symbol of Delta_{<j} = sum_{i <= j-1} Delta_i (includes i = -1)."""
        jj = min(j, self.grid.i_max + 1)
        if jj < -1:
            jj = -1
        return self._below[jj + 1]

    # -- analytic frequency-derivatives of F_j and chi_i ---------------------
    def _bigF_deriv(self, j: int, ell) -> np.ndarray:
        """d_xi^ell F_j as a real array; |ell| <= 2."""
        g = self.grid
        scale = float(1 << j)
        r = g.abs_freq()
        t = r / scale
        mesh = [m.astype(np.float64) for m in g.freq_mesh()]
        order = mi_abs(ell)
        if order == 0:
            return self._bigF[j]
        inside = (t > 1.0) & (t < 2.0)
        out = np.zeros_like(r)
        if not np.any(inside):
            return out
        phi1 = _phi_profile(t, 1)
        if order == 1:
            axis = next(a for a, e in enumerate(ell) if e)
            with np.errstate(divide="ignore", invalid="ignore"):
                val = phi1 * mesh[axis] / (r * scale)
            out[inside] = val[inside]
            return out
        # order == 2
        phi2 = _phi_profile(t, 2)
        axes = [a for a, e in enumerate(ell) for _ in range(e)]
        a, b = axes[0], axes[1]
        with np.errstate(divide="ignore", invalid="ignore"):
            term = phi2 * mesh[a] * mesh[b] / (r**2 * scale**2)
            delta = 1.0 if a == b else 0.0
            term = term + phi1 * (delta / r - mesh[a] * mesh[b] / r**3) / scale
        out[inside] = term[inside]
        return out

    def chi_weighted(self, i: int, ell) -> np.ndarray:
        """Complex multiplier of Delta_i^ell: (2 pi i)^{-|ell|} d^ell chi_i."""
        ell = tuple(ell)
        if len(ell) != self.grid.dim:
            raise ValueError("multi-index dimension != grid dim")
        order = mi_abs(ell)
        if order > self.weight_cap:
            raise ValueError(f"weight |{ell}| exceeds cap {self.weight_cap}")
        if order == 0:
            return self.chi(i)
        key = (i, ell)
        if key not in self._weighted:
            g = self.grid
            if not (-1 <= i <= g.i_max):
                raise IndexError(f"level {i} out of range")
            if i == -1:
                d = self._bigF_deriv(0, ell)
            elif i == g.i_max:
                d = -self._bigF_deriv(g.i_max, ell)
            else:
                d = self._bigF_deriv(i + 1, ell) - self._bigF_deriv(i, ell)
            self._weighted[key] = d * WEIGHT_CONST_BASE ** (-order)
        return self._weighted[key]

    def chi_weighted_below(self, j: int, ell) -> np.ndarray:
        """Multiplier of Delta^ell_{<j} = sum_{i <= j-1} Delta_i^ell."""
        if mi_abs(ell) == 0:
            return self.chi_below(j)
        top = min(j - 1, self.grid.i_max)
        acc = np.zeros(self.grid.shape, dtype=np.complex128)
        for i in range(-1, top + 1):
            acc = acc + self.chi_weighted(i, ell)
        return acc

    def kernel(self, i: int) -> np.ndarray:
        """Physical-space kernel K_i with Delta_i f = (1/N^d) sum K_i(x-y) f(y)."""
        n_total = self.grid.n**self.grid.dim
        return np.fft.ifftn(self.chi(i)).real * n_total

    def kernel_below(self, j: int) -> np.ndarray:
        n_total = self.grid.n**self.grid.dim
        return np.fft.ifftn(self.chi_below(j)).real * n_total


_BANKS: dict = {}


def get_bank(grid: Grid, weight_cap: int = MAX_WEIGHT) -> LPSymbolBank:
    key = (grid.dim, grid.log2_n, weight_cap)
    if key not in _BANKS:
        _BANKS[key] = LPSymbolBank(grid, weight_cap)
    return _BANKS[key]


# ---------------------------------------------------------------------------
# projector operations


def _apply_multiplier(f: GridFunction, mult: np.ndarray) -> GridFunction:
    return GridFunction(f.grid, np.fft.ifftn(f.hat() * mult).real)


def lp_project(f: GridFunction, i: int) -> GridFunction:
    """Delta_i f."""
    return _apply_multiplier(f, get_bank(f.grid).chi(i))


def lp_project_below(f: GridFunction, j: int) -> GridFunction:
    """Delta_{<j} f = sum_{i <= j-1} Delta_i f."""
    return _apply_multiplier(f, get_bank(f.grid).chi_below(j))


def lp_project_weighted(f: GridFunction, i: int, ell) -> GridFunction:
    """Delta_i^ell f."""
    return _apply_multiplier(f, get_bank(f.grid).chi_weighted(i, ell))


def lp_project_weighted_below(f: GridFunction, j: int, ell) -> GridFunction:
    """Delta^ell_{<j} f = sum_{i <= j-1} Delta_i^ell f."""
    return _apply_multiplier(f, get_bank(f.grid).chi_weighted_below(j, ell))


# ---------------------------------------------------------------------------
# block sequences (elements of sC^r)


class BlockSequence:
    """A finite sequence of grid functions indexed by levels -1..top.

    band_limited=True means block i is spectrally supported in band i (the
    image of the LP projectors); simplified-paraproduct outputs are raw
    products and carry band_limited=False.
    """

    __slots__ = ("grid", "blocks", "band_limited", "declared_reg")

    def __init__(self, grid: Grid, blocks, band_limited=True, declared_reg=None):
        self.grid = grid
        self.blocks = list(blocks)
        self.band_limited = band_limited
        self.declared_reg = declared_reg

    @property
    def top_level(self) -> int:
        return len(self.blocks) - 2  # blocks[0] is level -1

    def block(self, i: int) -> GridFunction:
        """Block at level i (zero beyond the stored range)."""
        idx = i + 1
        if idx < 0 or idx >= len(self.blocks):
            return constant(self.grid, 0.0)
        return self.blocks[idx]

    def levels(self):
        return range(-1, self.top_level + 1)

    def summed(self) -> GridFunction:
        acc = constant(self.grid, 0.0)
        for b in self.blocks:
            acc = acc + b
        return acc

    def partial_below(self, j: int) -> GridFunction:
        """Sequence-level Delta_{<j}: sum of blocks at levels <= j-1."""
        acc = constant(self.grid, 0.0)
        for i in self.levels():
            if i <= j - 1:
                acc = acc + self.block(i)
        return acc

    def norm(self, r: float) -> float:
        out = 0.0
        for i in self.levels():
            out = max(out, 2.0 ** (i * r) * self.block(i).sup())
        return out

    def map_blocks(self, fn, band_limited=None) -> "BlockSequence":
        return BlockSequence(
            self.grid,
            [fn(b) for b in self.blocks],
            self.band_limited if band_limited is None else band_limited,
            self.declared_reg,
        )


def block_decompose(f: GridFunction, top_level=None) -> BlockSequence:
    """LP decomposition of f into a band-limited BlockSequence."""
    g = f.grid
    top = g.i_max if top_level is None else min(top_level, g.i_max)
    blocks = [lp_project(f, i) for i in range(-1, top + 1)]
    if top < g.i_max:
        # absorb the remaining bands into the top block so the sum is f
        rest = f
        for b in blocks:
            rest = rest - b
        blocks[-1] = blocks[-1] + rest
    return BlockSequence(g, blocks, band_limited=(top == g.i_max))


def band_mass_outside(f: GridFunction, i: int) -> float:
    """Fraction of spectral mass outside band i (support check)."""
    bank = get_bank(f.grid)
    hat = f.hat()
    total = float(np.sum(np.abs(hat) ** 2))
    if total == 0.0:
        return 0.0
    mask = bank.chi(i) > 1e-12
    inside = float(np.sum(np.abs(hat[mask]) ** 2))
    return (total - inside) / total


# ---------------------------------------------------------------------------
# calculus: derivatives, translations, Taylor operators


def derive_fn(f: GridFunction, k) -> GridFunction:
    """Spectral derivative d^k f."""
    if mi_abs(k) == 0:
        return f
    g = f.grid
    mesh = g.freq_mesh()
    mult = np.ones(g.shape, dtype=np.complex128)
    for axis, power in enumerate(k):
        if power:
            mult = mult * (2.0j * np.pi * mesh[axis].astype(np.float64)) ** power
    return _apply_multiplier(f, mult)


def derive(s: BlockSequence, k) -> BlockSequence:
    return s.map_blocks(lambda b: derive_fn(b, k))


def translate_fn(f: GridFunction, h, allow_offgrid: bool = False) -> GridFunction:
    """f(. + h).  h is a tuple of per-axis shifts in [0,1) units; exact grid
    multiples use np.roll, otherwise spectral modulation (behind the flag)."""
    g = f.grid
    h = tuple(float(x) for x in h)
    shifts = [x * g.n for x in h]
    if all(abs(s - round(s)) < 1e-12 for s in shifts):
        vals = f.values
        for axis, s in enumerate(shifts):
            vals = np.roll(vals, -int(round(s)), axis=axis)
        return GridFunction(g, vals)
    if not allow_offgrid:
        raise ValueError(f"shift {h} is not a grid multiple (pass allow_offgrid=True)")
    mesh = g.freq_mesh()
    phase = np.zeros(g.shape, dtype=np.float64)
    for axis, x in enumerate(h):
        phase = phase + mesh[axis].astype(np.float64) * x
    return _apply_multiplier(f, np.exp(2.0j * np.pi * phase))


def translate(s: BlockSequence, h, allow_offgrid: bool = False) -> BlockSequence:
    return s.map_blocks(lambda b: translate_fn(b, h, allow_offgrid))


def _taylor_indices(dim: int, o: float):
    # |k| < o means |k| <= ceil(o) - 1 for any o > 0
    cap = max(int(np.ceil(o)) - 1, 0)
    return [k for k in mi_ball(dim, cap) if mi_abs(k) < o]


def taylor_poly_fn(f: GridFunction, h, o: float) -> GridFunction:
    """T_h^o f = sum_{|k| < o} h^k / k! d^k f."""
    g = f.grid
    acc = constant(g, 0.0)
    for k in _taylor_indices(g.dim, o):
        coeff = 1.0
        for axis, power in enumerate(k):
            coeff *= float(h[axis]) ** power
        coeff /= mi_factorial(k)
        acc = acc + derive_fn(f, k) * coeff
    return acc


def taylor_remainder_fn(f: GridFunction, h, o: float, allow_offgrid=False) -> GridFunction:
    """R_h^o f defined by |h|^o R_h^o f = f(.+h) - T_h^o f."""
    if o <= 0:
        raise ValueError("o must be positive")
    habs = float(np.sqrt(sum(float(x) ** 2 for x in h)))
    if habs == 0.0:
        raise ValueError("h must be nonzero")
    diff = translate_fn(f, h, allow_offgrid) - taylor_poly_fn(f, h, o)
    return diff * (habs ** (-o))


def taylor_poly(s: BlockSequence, h, o: float) -> BlockSequence:
    return s.map_blocks(lambda b: taylor_poly_fn(b, h, o))


def taylor_remainder(s: BlockSequence, h, o: float, allow_offgrid=False) -> BlockSequence:
    return s.map_blocks(lambda b: taylor_remainder_fn(b, h, o, allow_offgrid))
