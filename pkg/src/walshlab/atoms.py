"""Stopping-time atomic decompositions and atomic quasi-norms.

Three decomposition kinds, keyed by the size functional that drives the
stopping times:

- kind "s": tau_k = inf{n >= -1 : s_{n+1}(f) > 2^k}  (conditional square
  function; s_{n+1} is F_n-measurable, so tau_k is a stopping time);
- kind "M": rho_k = inf{n >= 0 : |f_n| > 2^k}, F_j^k = the smallest
  F_{j-1}-measurable set containing {rho_k = j} (union of parent atoms;
  F_0^k is Omega or empty since F_{-1} := F_0 is trivial), and
  tau_k(x) = inf{n >= -1 : x in F^k_{n+1}};
- kind "S": as kind "M" with the square function S_n in place of |f_n|.

Stopping level -1 means "stopped before time 0" with f^{tau} = f_{-1} = 0
there.  It is what makes the telescoping reconstruction exact for every f:
with stopping levels restricted to {0..N, INF} the bottom of the telescope is
some f^{tau} with tau >= 0, which always retains the mean f_0, so martingales
with E f != 0 could never be reproduced.  With -1 admitted, the governing
functional of every stopped martingale f^{tau_k} is <= 2^k everywhere, and
sum_k mu_k a^k = f exactly.

Emitted k range: thresholds 2^k below every positive value of the governing
run give f^{tau_k} = 0, thresholds at or above its sup give tau_k = INF
everywhere; only the k between contribute, and there are finitely many.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .spaces import GridFunction, lp_norm, indicator_norm, _largest_k_below
from .martingales import (
    INF,
    Martingale,
    StoppingTime,
    stopped_martingale,
    doob_maximal,
    square_function,
    cond_square_function,
    maximal_levels,
    square_levels,
    cond_square_levels,
)

__all__ = [
    "KINDS",
    "AtomEntry",
    "AtomBundle",
    "decompose",
    "verify_atom",
    "atomic_norm",
    "bundle_to_dict",
    "save_bundle",
]

KINDS = ("s", "S", "M")

_RUNS = {"s": cond_square_levels, "S": square_levels, "M": maximal_levels}
_SIZE_FUNCTIONALS = {"s": cond_square_function, "S": square_function, "M": doob_maximal}


class AtomEntry:
    """One (k, mu_k, tau_k, atom) row of a decomposition."""

    def __init__(self, k, mu, tau, atom):
        self.k = k
        self.mu = mu
        self.tau = tau
        self.atom = atom

    def __repr__(self):
        return f"AtomEntry(k={self.k}, mu={self.mu:.6g})"


class AtomBundle:
    """Output of `decompose`: finitely many entries with sum mu_k a^k = f."""

    def __init__(self, kind, entries, exponent):
        self.kind = kind
        self.entries = list(entries)
        self.exponent = exponent

    @property
    def resolution(self):
        return self.exponent.resolution

    def __len__(self):
        return len(self.entries)

    def reconstruct(self):
        """sum_k mu_k * atom_k.terminal as a GridFunction."""
        out = np.zeros(1 << self.resolution)
        for e in self.entries:
            out += e.mu * e.atom.terminal.values
        return GridFunction(self.resolution, out)


def _governing_runs(m, kind):
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    return _RUNS[kind](m)


def _tau_values(runs, kind, filt, k):
    """Per-cell stopping levels for threshold 2^k (INF where never)."""
    threshold = 2.0 ** k
    exceed = runs > threshold
    hit = exceed.any(axis=0)
    first = exceed.argmax(axis=0)  # first m with run_m > 2^k where hit
    size = runs.shape[1]
    if kind == "s":
        # tau = (first m with s_m > 2^k) - 1; s_{m} is F_{m-1}-measurable
        return np.where(hit, first - 1, INF).astype(np.int64)
    # kinds S/M go through the parent-atom dilation
    tau = np.full(size, INF, dtype=np.int64)
    rho = np.where(hit, first, INF)
    present = sorted({int(j) for j in np.unique(rho) if j != INF}, reverse=True)
    # assign tau = j - 1 on F_j^k, descending in j so the smallest j wins
    for j in present:
        mask = rho == j
        if j == 0:
            member = np.ones(size, dtype=bool)  # smallest trivial set containing it
        else:
            label = filt.labels[j - 1]
            member = np.isin(label, np.unique(label[mask]))
        tau[member] = j - 1
    return tau


def decompose(m, exp, kind):
    """Canonical stopping-time atomic decomposition of a martingale.

    Every finite filtration is regular (finite R), which is all kinds S/M
    need.  Atoms are a^k = (f^{tau_{k+1}} - f^{tau_k}) / mu_k with
    mu_k = 3 * 2^k * ||chi_{tau_k < INF}||_{p(.)}, and the zero atom when
    mu_k = 0.
    """
    if m.resolution != exp.resolution:
        raise ValueError("martingale and exponent resolutions differ")
    runs = _governing_runs(m, kind)
    filt = m.filtration
    positive = runs[runs > 0]
    if positive.size == 0:
        return AtomBundle(kind, [], exp)
    minpos = float(positive.min())
    vmax = float(positive.max())
    # floor(log2(minpos)) - 1: one threshold strictly below every positive value
    k_lo = _floor_log2(minpos) - 1
    k_hi = _largest_k_below(vmax)  # the largest k with tau_k not identically INF

    taus = {}
    for k in range(k_lo, k_hi + 1):
        taus[k] = StoppingTime(filt, _tau_values(runs, kind, filt, k))
    stopped = {k: stopped_martingale(m, taus[k]).terminal.values for k in taus}
    stopped[k_hi + 1] = m.level_values(m.resolution)  # tau_{k_hi+1} = INF everywhere

    entries = []
    for k in range(k_lo, k_hi + 1):
        finite = taus[k].finite_mask()
        mu = 3.0 * 2.0 ** k * indicator_norm(exp, finite)
        diff = stopped[k + 1] - stopped[k]
        atom_values = diff / mu if mu > 0 else np.zeros_like(diff)
        entries.append(
            AtomEntry(k, mu, taus[k], Martingale(filt, GridFunction(m.resolution, atom_values)))
        )
    return AtomBundle(kind, entries, exp)


def _floor_log2(v):
    k = int(math.floor(math.log2(v)))
    while 2.0 ** k > v:
        k -= 1
    while 2.0 ** (k + 1) <= v:
        k += 1
    return k


class AtomReport:
    """verify_atom outcome; failures are reported here, never raised."""

    def __init__(self, passed, vanish_violation, size_value, size_bound, kind):
        self.passed = passed
        self.vanish_violation = vanish_violation  # max |a_n(x)| over n <= tau(x)
        self.size_value = size_value              # ||g(a)||_inf for the kind's g
        self.size_bound = size_bound              # 1 / ||chi_{tau < INF}||
        self.kind = kind

    @property
    def size_margin(self):
        return self.size_bound - self.size_value

    def __repr__(self):
        return (
            f"AtomReport(passed={self.passed}, vanish={self.vanish_violation:.3g}, "
            f"size={self.size_value:.6g} <= {self.size_bound:.6g})"
        )


def verify_atom(a, tau, exp, kind, *, vanish_tol=1e-12, size_tol=1e-9):
    """Check the two atom conditions; returns measured slack, never throws.

    (i) a_n(x) = 0 whenever n <= tau(x) (vacuous where tau = -1);
    (ii) ||g(a)||_inf <= 1/||chi_{tau < INF}||_{p(.)} with g = s, S or M
         according to kind.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    N = a.resolution
    tvals = tau.values
    vanish = 0.0
    for n in range(N + 1):
        mask = tvals >= n  # includes INF cells
        if mask.any():
            vanish = max(vanish, float(np.abs(a.level_values(n)[mask]).max()))
    g = _SIZE_FUNCTIONALS[kind](a)
    size_value = float(np.abs(g.values).max())
    denom = indicator_norm(exp, tvals != INF)
    size_bound = math.inf if denom == 0.0 else 1.0 / denom
    passed = vanish <= vanish_tol and size_value <= size_bound + size_tol
    return AtomReport(passed, vanish, size_value, size_bound, kind)


def atomic_norm(bundle, exp, *, q=None, t=None):
    """Atomic quasi-norm of THIS bundle (no infimum over decompositions).

    Exactly one of q, t must be given:
      q: (sum_k (2^k ||chi_{tau_k<INF}||)^q)^(1/q), sup over k when q = inf;
      t: || (sum_k (mu_k chi_{tau_k<INF} / ||chi_{tau_k<INF}||)^t)^(1/t) ||_{p(.)},
         valid for 0 < t < underline p.
    """
    if (q is None) == (t is None):
        raise ValueError("give exactly one of q, t")
    if not bundle.entries:
        return 0.0
    if q is not None:
        if not q > 0:
            raise ValueError("q must be positive (or inf)")
        terms = []
        for e in bundle.entries:
            terms.append(2.0 ** e.k * indicator_norm(exp, e.tau.finite_mask()))
        if math.isinf(q):
            return max(terms)
        return float(sum(x ** q for x in terms)) ** (1.0 / q)
    if not 0 < t < exp.underline_p:
        raise ValueError(f"t must lie in (0, {exp.underline_p}) = (0, underline p)")
    acc = np.zeros(1 << bundle.resolution)
    for e in bundle.entries:
        if e.mu == 0.0:
            continue
        finite = e.tau.finite_mask()
        norm = indicator_norm(exp, finite)
        acc[finite] += (e.mu / norm) ** t
    return lp_norm(GridFunction(bundle.resolution, acc ** (1.0 / t)), exp)


# ---------------------------------------------------------------------------
# JSON export: entries carry k, mu_k, the per-cell stopping levels (INF -> null,
# -1 kept as -1), and the atom's terminal values.
# ---------------------------------------------------------------------------


def bundle_to_dict(bundle):
    entries = []
    for e in bundle.entries:
        tau_list = [None if v == INF else int(v) for v in e.tau.values]
        entries.append(
            {
                "k": int(e.k),
                "mu_k": float(e.mu),
                "tau": tau_list,
                "atom_terminal": list(map(float, e.atom.terminal.values)),
            }
        )
    return {
        "resolution": bundle.resolution,
        "kind": bundle.kind,
        "exponent": list(map(float, bundle.exponent.values)),
        "entries": entries,
    }


def save_bundle(bundle, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(bundle_to_dict(bundle), fh)
