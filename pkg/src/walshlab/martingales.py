"""Finite filtrations on the dyadic grid and the classical martingale operators.

A filtration is an increasing chain of partitions F_0 c ... c F_N of the 2^N
cells, with F_0 trivial and F_N the singletons.  Martingales are stored by
(filtration, terminal) only: in the finite setting every adapted martingale is
closed, so f_n = E_n(terminal) is derived, never stored independently.
"""

from __future__ import annotations

import json
from functools import lru_cache

import numpy as np

from .spaces import GridFunction

__all__ = [
    "INF",
    "Filtration",
    "Martingale",
    "StoppingTime",
    "cond_expectation",
    "doob_maximal",
    "square_function",
    "cond_square_function",
    "stopped_martingale",
    "regularity_constant",
    "martingale_transform",
    "load_filtration",
    "save_filtration",
]

# Stopping-time value for "never stops".  An int sentinel (not None/inf) so
# that per-cell stopping arrays stay integer and n <= tau comparisons are cheap.
INF = 2 ** 31


class Filtration:
    """Partitions F_0 c ... c F_N of the grid into atoms.

    levels[n] is a list of atoms, each a sorted array of cell indices.
    labels[n][cell] is the position of the cell's atom inside levels[n],
    giving conditional expectations via one bincount per level.
    """

    def __init__(self, resolution, levels):
        size = 1 << resolution
        if len(levels) != resolution + 1:
            raise ValueError(f"need {resolution + 1} levels, got {len(levels)}")
        self.resolution = resolution
        self.levels = []
        self.labels = []
        self.counts = []
        for n, atoms in enumerate(levels):
            atoms = [np.unique(np.asarray(atom, dtype=int)) for atom in atoms]
            label = np.full(size, -1, dtype=np.int64)
            for j, atom in enumerate(atoms):
                if atom.size == 0:
                    raise ValueError(f"level {n} has an empty atom")
                if atom.min() < 0 or atom.max() >= size:
                    raise ValueError(f"level {n} atom has out-of-range cells")
                if np.any(label[atom] != -1):
                    raise ValueError(f"level {n} atoms overlap")
                label[atom] = j
            if np.any(label == -1):
                raise ValueError(f"level {n} does not cover all cells")
            self.levels.append(atoms)
            self.labels.append(label)
            self.counts.append(np.array([a.size for a in atoms], dtype=np.int64))
        if len(self.levels[0]) != 1:
            raise ValueError("level 0 must be the single atom {all cells}")
        if len(self.levels[resolution]) != size:
            raise ValueError("level N must consist of singletons")
        # refinement check + parent map: parent[n][j] = index of the level-(n-1)
        # atom containing level-n atom j
        self.parent = [None]
        for n in range(1, resolution + 1):
            up = self.labels[n - 1]
            par = np.empty(len(self.levels[n]), dtype=np.int64)
            for j, atom in enumerate(self.levels[n]):
                owners = np.unique(up[atom])
                if owners.size != 1:
                    raise ValueError(f"level {n} atom {j} is not inside one level-{n - 1} atom")
                par[j] = owners[0]
            self.parent.append(par)

    @classmethod
    def dyadic(cls, resolution):
        return _dyadic_filtration(resolution)

    def condexp_values(self, values, n):
        """Measure-weighted average of a cell array over each level-n atom."""
        label = self.labels[n]
        sums = np.bincount(label, weights=values, minlength=self.counts[n].size)
        return (sums / self.counts[n])[label]


@lru_cache(maxsize=None)
def _dyadic_filtration(resolution):
    levels = [
        [np.arange(j << (resolution - n), (j + 1) << (resolution - n)) for j in range(1 << n)]
        for n in range(resolution + 1)
    ]
    return Filtration(resolution, levels)


class Martingale:
    """Martingale (E_n terminal)_{n=0..N} over a filtration."""

    def __init__(self, filtration, terminal):
        if filtration.resolution != terminal.resolution:
            raise ValueError("filtration and terminal resolutions differ")
        self.filtration = filtration
        self.terminal = terminal
        self._levels = None

    @property
    def resolution(self):
        return self.filtration.resolution

    def level_values(self, n):
        """f_n as a raw cell array (levels are computed once, then cached)."""
        if self._levels is None:
            N = self.resolution
            levels = [None] * (N + 1)
            levels[N] = self.terminal.values.astype(float)
            for n_ in range(N - 1, -1, -1):
                levels[n_] = self.filtration.condexp_values(levels[n_ + 1], n_)
            self._levels = levels
        return self._levels[n]

    def level(self, n):
        return GridFunction(self.resolution, self.level_values(n))

    def difference_values(self):
        """d_n f for n = 0..N with f_{-1} := 0, so d_0 f = f_0."""
        N = self.resolution
        out = [self.level_values(0)]
        for n in range(1, N + 1):
            out.append(self.level_values(n) - self.level_values(n - 1))
        return out


def cond_expectation(f, filt, n):
    """E_n f: average of f over each level-n atom, broadcast back to cells."""
    if f.resolution != filt.resolution:
        raise ValueError("resolution mismatch")
    if not 0 <= n <= filt.resolution:
        raise ValueError(f"level {n} out of range 0..{filt.resolution}")
    return GridFunction(f.resolution, filt.condexp_values(f.values, n))


def doob_maximal(m, upto=None):
    """M f = max_{n <= upto} |f_n| cellwise; upto=None/INF means all levels."""
    N = m.resolution
    if upto is None or upto >= N:
        upto = N
    if upto < 0:
        raise ValueError("upto must be >= 0")
    out = np.abs(m.level_values(0))
    for n in range(1, upto + 1):
        out = np.maximum(out, np.abs(m.level_values(n)))
    return GridFunction(N, out)


def maximal_levels(m):
    """Running maxima M_m = max_{n <= m} |f_n| as an (N+1, 2^N) array."""
    rows = [np.abs(m.level_values(0))]
    for n in range(1, m.resolution + 1):
        rows.append(np.maximum(rows[-1], np.abs(m.level_values(n))))
    return np.array(rows)


def square_levels(m):
    """Running square functions S_m = (sum_{n<=m} |d_n f|^2)^(1/2)."""
    acc = np.zeros(1 << m.resolution)
    rows = []
    for d in m.difference_values():
        acc = acc + d * d
        rows.append(np.sqrt(acc))
    return np.array(rows)


def cond_square_levels(m):
    """Running conditional square functions s_m = (sum_{n<=m} E_{n-1}|d_n f|^2)^(1/2).

    E_{-1} := E_0 (F_0 is trivial), so the m=0 row is |f_0|.
    """
    filt = m.filtration
    acc = np.zeros(1 << m.resolution)
    rows = []
    for n, d in enumerate(m.difference_values()):
        acc = acc + filt.condexp_values(d * d, max(n - 1, 0))
        rows.append(np.sqrt(acc))
    return np.array(rows)


def square_function(m):
    """S f = (sum_{n=0}^N |d_n f|^2)^(1/2) cellwise."""
    return GridFunction(m.resolution, square_levels(m)[-1])


def cond_square_function(m):
    """s f = (sum_{n=0}^N E_{n-1}|d_n f|^2)^(1/2) cellwise, E_{-1} := E_0."""
    return GridFunction(m.resolution, cond_square_levels(m)[-1])


class StoppingTime:
    """Cell-wise stopping level in {-1, 0, ..., N} or INF.

    {tau = n} must be a union of level-n atoms for 0 <= n <= N.  The value -1
    ("stopped before time 0") must hold on all cells or none, matching the
    trivial F_0; it makes the stopped martingale identically zero there, which
    the atomic decompositions need to reproduce martingales with f_0 != 0.
    Measurability is validated eagerly at construction.
    """

    def __init__(self, filtration, values):
        arr = np.asarray(values, dtype=np.int64).copy()
        if arr.shape != (1 << filtration.resolution,):
            raise ValueError("stopping-time array has wrong shape")
        ok = ((arr >= -1) & (arr <= filtration.resolution)) | (arr == INF)
        if not np.all(ok):
            raise ValueError(f"stopping levels must lie in -1..{filtration.resolution} or INF")
        pre = arr == -1
        if pre.any() and not pre.all():
            raise ValueError("{tau = -1} must be trivial (all cells or none)")
        for n in range(0, filtration.resolution + 1):
            mask = arr == n
            if not mask.any():
                continue
            label = filtration.labels[n]
            hit = np.unique(label[mask])
            if int(filtration.counts[n][hit].sum()) != int(mask.sum()):
                raise ValueError(f"{{tau = {n}}} is not a union of level-{n} atoms")
        arr.flags.writeable = False
        self.filtration = filtration
        self.values = arr

    @classmethod
    def constant(cls, filtration, n):
        return cls(filtration, np.full(1 << filtration.resolution, n, dtype=np.int64))

    @property
    def resolution(self):
        return self.filtration.resolution

    def finite_mask(self):
        return self.values != INF


def stopped_martingale(m, tau):
    """f^tau with terminal f_{min(n, tau)} at n = N; tau = -1 stops at f_{-1} = 0."""
    if tau.filtration is not m.filtration:
        # re-validate measurability against the martingale's own filtration
        tau = StoppingTime(m.filtration, tau.values)
    N = m.resolution
    idx = np.minimum(tau.values, N)
    out = np.empty(1 << N)
    for n in range(0, N + 1):
        sel = idx == n
        if sel.any():
            out[sel] = m.level_values(n)[sel]
    out[idx == -1] = 0.0
    return Martingale(m.filtration, GridFunction(N, out))


def regularity_constant(filt):
    """R = max over refinement steps of P(parent atom)/P(atom); 1 at depth 0."""
    best = 1.0
    for n in range(1, filt.resolution + 1):
        ratios = filt.counts[n - 1][filt.parent[n]] / filt.counts[n]
        best = max(best, float(ratios.max()))
    return best


def martingale_transform(m, multipliers):
    """(T_b f) with differences (0, b_0 d_1 f, ..., b_{N-1} d_N f).

    Each b_{k-1} must be F_{k-1}-measurable with |b| <= 1 cellwise; violations
    raise.
    """
    N = m.resolution
    if len(multipliers) != N:
        raise ValueError(f"need {N} multipliers b_0..b_{N - 1}, got {len(multipliers)}")
    filt = m.filtration
    diffs = m.difference_values()
    out = np.zeros(1 << N)
    for k in range(1, N + 1):
        b = multipliers[k - 1]
        bv = b.values if isinstance(b, GridFunction) else np.asarray(b, dtype=float)
        if bv.shape != out.shape:
            raise ValueError(f"multiplier {k - 1} has wrong shape")
        if np.max(np.abs(bv)) > 1.0 + 1e-12:
            raise ValueError(f"multiplier {k - 1} exceeds 1 in absolute value")
        if not np.allclose(filt.condexp_values(bv, k - 1), bv, atol=1e-12, rtol=0.0):
            raise ValueError(f"multiplier {k - 1} is not F_{k - 1}-measurable")
        out += bv * diffs[k]
    return Martingale(filt, GridFunction(N, out))


# ---------------------------------------------------------------------------
# JSON file format
#
# {"resolution": N, "levels": [[[cells of atom]...]...]}  or the shorthand
# {"resolution": N, "kind": "dyadic"}
# ---------------------------------------------------------------------------


def load_filtration(source):
    if isinstance(source, dict):
        doc = source
    else:
        with open(source, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    n = int(doc["resolution"])
    if doc.get("kind") == "dyadic":
        return Filtration.dyadic(n)
    return Filtration(n, doc["levels"])


def save_filtration(filt, path):
    doc = {
        "resolution": filt.resolution,
        "levels": [[list(map(int, atom)) for atom in atoms] for atoms in filt.levels],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
