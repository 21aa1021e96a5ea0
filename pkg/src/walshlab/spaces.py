"""Variable-exponent L_{p(.)} and L_{p(.),q} quasi-norms on finite dyadic grids.

The measure space is [0,1) with Lebesgue measure, discretized into 2^N equal
cells; functions and exponents are constant on cells.  The quasi-norm is the
unique root of the modular, found by monotone bisection; the Lorentz
quasi-norm is the dyadic (powers-of-two) discretization, with the infinite
lower tail of the sum evaluated analytically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GridFunction",
    "VariableExponent",
    "ConditionReport",
    "exponent_bounds",
    "check_condition_log",
    "conjugate_exponent",
    "modular",
    "lp_norm",
    "lorentz_norm",
    "load_grid_function",
    "save_grid_function",
    "load_exponent",
    "save_exponent",
]


def _freeze(resolution, values, positive=False):
    arr = np.array(values, dtype=float)
    if arr.ndim != 1 or arr.size != (1 << resolution):
        raise ValueError(
            f"expected {1 << resolution} cell values at resolution {resolution}, "
            f"got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError("cell values must be finite")
    if positive and not np.all(arr > 0):
        raise ValueError("exponent values must be strictly positive")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real-valued function on [0,1), constant on 2^N dyadic cells.

    values[i] is the value on [i*2^-N, (i+1)*2^-N).
    """

    resolution: int
    values: np.ndarray

    def __post_init__(self):
        if self.resolution < 0:
            raise ValueError("resolution must be non-negative")
        object.__setattr__(self, "values", _freeze(self.resolution, self.values))

    @classmethod
    def constant(cls, c, resolution):
        return cls(resolution, np.full(1 << resolution, float(c)))

    @classmethod
    def indicator(cls, cells, resolution):
        v = np.zeros(1 << resolution)
        v[np.asarray(cells, dtype=int)] = 1.0
        return cls(resolution, v)

    @classmethod
    def sample(cls, fn, resolution):
        """Sample a callable at cell left endpoints."""
        x = np.arange(1 << resolution) * 2.0 ** (-resolution)
        return cls(resolution, np.array([fn(t) for t in x], dtype=float))

    def refine(self, resolution):
        """Replicate values onto a finer grid (no-op at equal resolution)."""
        if resolution < self.resolution:
            raise ValueError("can only refine to a finer resolution")
        reps = 1 << (resolution - self.resolution)
        return GridFunction(resolution, np.repeat(self.values, reps))


@dataclass(frozen=True, eq=False)
class VariableExponent:
    """Cell-wise positive exponent p(.); 0 < p_- <= p_+ < inf."""

    resolution: int
    values: np.ndarray

    def __post_init__(self):
        if self.resolution < 0:
            raise ValueError("resolution must be non-negative")
        object.__setattr__(self, "values", _freeze(self.resolution, self.values, positive=True))

    @property
    def p_minus(self):
        return float(self.values.min())

    @property
    def p_plus(self):
        return float(self.values.max())

    @property
    def underline_p(self):
        return min(self.p_minus, 1.0)

    @classmethod
    def constant(cls, p, resolution):
        return cls(resolution, np.full(1 << resolution, float(p)))

    @classmethod
    def affine(cls, a, c, resolution):
        """p(x) = a + c*x sampled at cell left endpoints."""
        x = np.arange(1 << resolution) * 2.0 ** (-resolution)
        return cls(resolution, a + c * x)

    @classmethod
    def split(cls, left, right, resolution):
        """Two-valued exponent: `left` on [0,1/2), `right` on [1/2,1)."""
        if resolution < 1:
            raise ValueError("split exponent needs resolution >= 1")
        half = 1 << (resolution - 1)
        v = np.empty(1 << resolution)
        v[:half] = left
        v[half:] = right
        return cls(resolution, v)


@dataclass(frozen=True)
class ConditionReport:
    """Result of the atom-wise exponent oscillation check.

    K is the max of P(A)^(p_-(A)-p_+(A)) over all filtration atoms A; the
    exponent is <= 0 for P(A) <= 1, so K >= 1 always.  worst_atom is
    (level, atom index) of an argmax.
    """

    K: float
    worst_atom: tuple


def _check_shared(a, b):
    if a.resolution != b.resolution:
        raise ValueError(f"resolution mismatch: {a.resolution} vs {b.resolution}")


def exponent_bounds(exp, cells):
    """(min, max) of the exponent over a non-empty set of cell indices."""
    idx = np.asarray(list(cells) if isinstance(cells, (set, frozenset)) else cells, dtype=int)
    if idx.size == 0:
        raise ValueError("cell set must be non-empty")
    if idx.min() < 0 or idx.max() >= exp.values.size:
        raise ValueError("cell index out of range")
    sub = exp.values[idx]
    return float(sub.min()), float(sub.max())


def check_condition_log(exp, filt):
    """Max of P(A)^(p_-(A)-p_+(A)) over every atom of every filtration level.

    `filt` only needs `.resolution` and `.levels` (per level, a list of
    cell-index arrays), so any filtration-like object works.
    """
    if exp.resolution != filt.resolution:
        raise ValueError("exponent and filtration resolutions differ")
    w = 2.0 ** (-exp.resolution)
    pv = exp.values
    best = -math.inf
    worst = (0, 0)
    for level, atoms in enumerate(filt.levels):
        for idx, atom in enumerate(atoms):
            sub = pv[atom]
            val = (atom.size * w) ** float(sub.min() - sub.max())
            if val > best:
                best = val
                worst = (level, idx)
    return ConditionReport(K=float(best), worst_atom=worst)


def conjugate_exponent(exp):
    """Cell-wise p' with 1/p + 1/p' = 1; requires p_- > 1."""
    if exp.p_minus <= 1.0:
        raise ValueError("conjugate exponent needs p_- > 1")
    p = exp.values
    return VariableExponent(exp.resolution, p / (p - 1.0))


def modular(f, exp, lam=1.0):
    """2^-N * sum_i (|f_i|/lam)^{p_i}; strictly decreasing in lam for f != 0."""
    _check_shared(f, exp)
    if lam <= 0:
        raise ValueError("lambda must be positive")
    with np.errstate(over="ignore"):
        return float(np.mean((np.abs(f.values) / lam) ** exp.values))


def _lp_norm_raw(absvals, pvals, resolution):
    """Bisection root of the modular, on support cells only.

    absvals/pvals list the |f| and p values of an arbitrary subset of cells
    (each carrying weight 2^-N); cells outside contribute nothing.
    """
    if absvals.size == 0:
        return 0.0
    vmax = float(absvals.max())
    if vmax == 0.0:
        return 0.0
    mask = absvals > 0
    a = absvals[mask] if not mask.all() else absvals
    p = pvals[mask] if not mask.all() else pvals
    w = 2.0 ** (-resolution)

    def mod(lam):
        with np.errstate(over="ignore"):
            return w * float(np.sum((a / lam) ** p))

    # Bracket: modular(vmax) <= 2^-N * 2^N = 1 since every ratio is <= 1.
    # At lo = minpos * 2^(-N/p_-) the largest cell alone contributes
    # 2^-N (vmax/lo)^{p_i} >= 2^-N * 2^(N p_i/p_-) >= 1, so the root is inside.
    lo = max(1e-300, float(a.min()) * 2.0 ** (-resolution / float(p.min())))
    hi = vmax
    if lo >= hi:
        lo = hi * 0.5
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mod(mid) > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * lo:
            break
    return 0.5 * (lo + hi)


def lp_norm(f, exp):
    """The L_{p(.)} quasi-norm: inf{lam > 0 : modular(f/lam) <= 1}; 0 for f = 0."""
    _check_shared(f, exp)
    return _lp_norm_raw(np.abs(f.values), exp.values, f.resolution)


def indicator_norm(exp, mask):
    """lp_norm of the indicator of a boolean cell mask (support-restricted)."""
    mask = np.asarray(mask, dtype=bool)
    n = int(mask.sum())
    if n == 0:
        return 0.0
    return _lp_norm_raw(np.ones(n), exp.values[mask], exp.resolution)


def _largest_k_below(v):
    """Largest integer k with 2^k < v (v > 0); float-exactness guarded."""
    k = int(math.floor(math.log2(v)))
    while 2.0 ** k >= v:
        k -= 1
    while 2.0 ** (k + 1) < v:
        k += 1
    return k


def lorentz_norm(f, exp, q):
    """Dyadic-discretized L_{p(.),q} quasi-norm.

    q < inf:  ( sum_k 2^{kq} ||chi_{|f|>2^k}||^q )^{1/q}  over all integers k;
    q = inf:  sup_k 2^k ||chi_{|f|>2^k}||.

    Below the smallest positive value of |f| the level set freezes at the
    support, so that part of the sum is a geometric series and is added in
    closed form; the sup case is increasing there and needs only its top term.
    """
    _check_shared(f, exp)
    if not q > 0:
        raise ValueError("q must be positive (or inf)")
    af = np.abs(f.values)
    vmax = float(af.max())
    if vmax == 0.0:
        return 0.0
    minpos = float(af[af > 0].min())
    k_top = _largest_k_below(vmax)      # largest k with {|f| > 2^k} non-empty
    k_stab = _largest_k_below(minpos)   # for k <= k_stab the level set = support

    def term(k):
        return (2.0 ** k) * indicator_norm(exp, af > 2.0 ** k)

    if math.isinf(q):
        return max(term(k) for k in range(k_stab, k_top + 1))
    total = sum(term(k) ** q for k in range(k_stab + 1, k_top + 1))
    c0 = indicator_norm(exp, af > 0)
    total += (2.0 ** k_stab * c0) ** q / (1.0 - 2.0 ** (-q))
    return total ** (1.0 / q)


# ---------------------------------------------------------------------------
# JSON file formats
#
# exponent:      {"resolution": N, "values": [...]}   or
#                {"resolution": N, "formula": {"kind": "affine", "a": ..., "c": ...}}
#                (p(x) = a + c*x sampled at cell left endpoints)
# grid function: {"resolution": N, "values": [...]}
# ---------------------------------------------------------------------------


def _load_json(source):
    if isinstance(source, dict):
        return source
    with open(source, "r", encoding="utf-8") as fh:
        return json.load(fh)


def load_grid_function(source):
    doc = _load_json(source)
    return GridFunction(int(doc["resolution"]), doc["values"])


def save_grid_function(f, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"resolution": f.resolution, "values": list(map(float, f.values))}, fh)


def load_exponent(source):
    doc = _load_json(source)
    n = int(doc["resolution"])
    if "values" in doc:
        return VariableExponent(n, doc["values"])
    formula = doc["formula"]
    if formula.get("kind") != "affine":
        raise ValueError(f"unknown exponent formula kind: {formula.get('kind')!r}")
    return VariableExponent.affine(float(formula["a"]), float(formula["c"]), n)


def save_exponent(exp, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"resolution": exp.resolution, "values": list(map(float, exp.values))}, fh)
