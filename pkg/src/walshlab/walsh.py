"""Walsh system in Paley ordering, FWHT, kernels, partial sums, Fejér means.

Bit convention: bit j of a cell index (bit 0 = MOST significant of the N-bit
index) is the binary digit of x at place value 2^-(j+1).  Dyadic addition of
points is XOR of cell indices, so adding 2^-(j+1) flips bit j — a no-op on
the grid for j >= N, because grid functions are constant below cell
resolution.  The Rademacher function r_j then reads bit j directly, and
w_n = prod r_k^{n_k} over the binary digits n_k of n.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .spaces import GridFunction
from .martingales import Filtration, Martingale, martingale_transform

__all__ = [
    "WalshSpectrum",
    "walsh_function",
    "rademacher",
    "dyadic_translate",
    "fwht",
    "ifwht",
    "dirichlet_kernel",
    "fejer_kernel",
    "partial_sum",
    "fejer_mean",
    "fejer_maximal",
    "sigma_dyadic_max",
    "partial_sum_via_transform",
    "load_spectrum",
    "save_spectrum",
]


@dataclass(frozen=True, eq=False)
class WalshSpectrum:
    """Coefficients f_hat(n) = E(f w_n) for n < 2^N."""

    resolution: int
    coefficients: np.ndarray

    def __post_init__(self):
        arr = np.array(self.coefficients, dtype=float)
        if arr.shape != (1 << self.resolution,):
            raise ValueError("coefficient array has wrong shape")
        if not np.all(np.isfinite(arr)):
            raise ValueError("coefficients must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "coefficients", arr)


@lru_cache(maxsize=None)
def _bitrev(resolution):
    i = np.arange(1 << resolution)
    rev = np.zeros_like(i)
    for b in range(resolution):
        rev |= ((i >> b) & 1) << (resolution - 1 - b)
    rev.flags.writeable = False
    return rev


def _wht(values):
    """In-place-style Walsh-Hadamard butterfly: y[m] = sum_i (-1)^popcount(m&i) x[i]."""
    v = values.astype(float, copy=True)
    n = v.size
    h = 1
    while h < n:
        v = v.reshape(n // (2 * h), 2, h)
        top = v[:, 0, :] + v[:, 1, :]
        bot = v[:, 0, :] - v[:, 1, :]
        v = np.stack((top, bot), axis=1).reshape(n)
        h *= 2
    return v


def rademacher(j, resolution):
    """r_j: +1 where binary digit j of x is 0, -1 where it is 1."""
    if not 0 <= j < resolution:
        raise ValueError(f"rademacher index {j} out of range for resolution {resolution}")
    i = np.arange(1 << resolution)
    return GridFunction(resolution, 1.0 - 2.0 * ((i >> (resolution - 1 - j)) & 1))


def walsh_function(n, resolution):
    """w_n = prod_k r_k^{n_k} over the binary digits of n; needs n < 2^N."""
    if not 0 <= n < (1 << resolution):
        raise ValueError(f"w_{n} is not resolvable at resolution {resolution}")
    i = np.arange(1 << resolution)
    sign = np.ones(1 << resolution)
    for k in range(resolution):
        if (n >> k) & 1:
            sign *= 1.0 - 2.0 * ((i >> (resolution - 1 - k)) & 1)
    return GridFunction(resolution, sign)


def dyadic_translate(f, j):
    """f(x (+) 2^-(j+1)): flip bit j of the cell index; identity for j >= N."""
    if j < 0:
        raise ValueError("translate index must be >= 0")
    if j >= f.resolution:
        return f
    i = np.arange(1 << f.resolution)
    return GridFunction(f.resolution, f.values[i ^ (1 << (f.resolution - 1 - j))])


# With this module's bit convention w_n(i) = (-1)^popcount(n & rev(i)), and
# popcount(n & rev(i)) = popcount(rev(n) & i), so both transform directions are
# the plain Hadamard butterfly composed with one bit-reversal permutation.


def fwht(f):
    """Walsh-Fourier coefficients f_hat(n) = 2^-N sum_i f_i w_n(i), O(N 2^N)."""
    rev = _bitrev(f.resolution)
    coeffs = _wht(f.values)[rev] * 2.0 ** (-f.resolution)
    return WalshSpectrum(f.resolution, coeffs)


def ifwht(spectrum):
    """Reconstruct f = sum_n f_hat(n) w_n from a spectrum."""
    rev = _bitrev(spectrum.resolution)
    return GridFunction(spectrum.resolution, _wht(spectrum.coefficients)[rev])


def dirichlet_kernel(n, resolution):
    """D_n = sum_{k<n} w_k for 1 <= n <= 2^N."""
    if not 1 <= n <= (1 << resolution):
        raise ValueError(f"Dirichlet index must be in 1..{1 << resolution}")
    c = np.zeros(1 << resolution)
    c[:n] = 1.0
    return ifwht(WalshSpectrum(resolution, c))


def fejer_kernel(n, resolution):
    """K_n = (1/n) sum_{k=1}^n D_k for 1 <= n <= 2^N.

    Exchanging the sums, w_j appears in D_k exactly when k > j, so the j-th
    coefficient of K_n is (n - j)/n for j < n.
    """
    if not 1 <= n <= (1 << resolution):
        raise ValueError(f"Fejer index must be in 1..{1 << resolution}")
    j = np.arange(1 << resolution)
    c = np.where(j < n, (n - j) / n, 0.0)
    return ifwht(WalshSpectrum(resolution, c))


def partial_sum(f, n):
    """s_n f = sum_{k<n} f_hat(k) w_k; for n >= 2^N this is f itself."""
    if n < 1:
        raise ValueError("partial-sum order must be >= 1")
    if n >= (1 << f.resolution):
        return GridFunction(f.resolution, f.values)
    c = fwht(f).coefficients.copy()
    c[n:] = 0.0
    return ifwht(WalshSpectrum(f.resolution, c))


def fejer_mean(f, n):
    """sigma_n f = (1/n) sum_{k=1}^n s_k f.

    Coefficient j enters s_k for k > j, so sigma_n multiplies f_hat(j) by
    (n - j)^+ / n.  This is exact for every n >= 1, including n > 2^N where
    s_k f = f: the multiplier form and the convex-combination closed form
    sigma_n f = (2^N/n) sigma_{2^N} f + (1 - 2^N/n) f agree term by term.
    """
    if n < 1:
        raise ValueError("Fejer order must be >= 1")
    j = np.arange(1 << f.resolution)
    mult = np.maximum(n - j, 0) / n
    c = fwht(f).coefficients * mult
    return ifwht(WalshSpectrum(f.resolution, c))


def _trailing_zeros(size):
    k = np.arange(1, size)
    low = k & -k
    return np.round(np.log2(low)).astype(int)


def fejer_maximal(f):
    """sigma_* f = sup_n |sigma_n f|, computed EXACTLY.

    For n > 2^N every s_k f with k > 2^N equals f, so sigma_n f is the convex
    combination (2^N/n) sigma_{2^N} f + (1 - 2^N/n) f; hence |sigma_n f| <=
    max(|sigma_{2^N} f|, |f|) pointwise, while sigma_n f -> f makes the sup
    reach |f|.  So sup_n |sigma_n f| = max(max_{n <= 2^N} |sigma_n f|, |f|),
    with no truncation error.

    The n <= 2^N scan runs incrementally: s_{k+1} = s_k + f_hat(k) w_k, with
    w_k = w_{k-1} * (r_0 ... r_t) where t counts the trailing zeros of k
    (k-1 XOR k = 2^(t+1) - 1, and w_a w_b = w_{a XOR b}).
    """
    N = f.resolution
    size = 1 << N
    c = fwht(f).coefficients
    if N == 0:
        return GridFunction(N, np.abs(f.values))
    rad = [walsh_function((1 << (t + 1)) - 1, N).values for t in range(N)]
    tz = _trailing_zeros(size)
    w = np.ones(size)
    s = c[0] * w  # s_1
    acc = s.copy()
    best = np.abs(acc)  # |sigma_1|
    for k in range(1, size):
        w = w * rad[tz[k - 1]]
        s = s + c[k] * w
        acc = acc + s
        best = np.maximum(best, np.abs(acc) / (k + 1))
    return GridFunction(N, np.maximum(best, np.abs(f.values)))


def sigma_dyadic_max(f):
    """sup_n |sigma_{2^n} f| over all n, exact by the same convex-combination
    argument as `fejer_maximal` (the tail sup over 2^n > 2^N is max of
    |sigma_{2^N} f| and the limit |f|)."""
    out = np.abs(f.values)
    for n in range(f.resolution + 1):
        out = np.maximum(out, np.abs(fejer_mean(f, 1 << n).values))
    return GridFunction(f.resolution, out)


def partial_sum_via_transform(f, n):
    """s_n f through the martingale-transform identity s_n f = w_n T_0(f w_n),
    T_0 g = sum_{k>=1} n_{k-1} d_k g with the binary digits n_j of n.

    Agrees with `partial_sum` on the dyadic filtration.  n = 2^N returns f
    directly (every coefficient of a grid function sits below 2^N).
    """
    N = f.resolution
    if not 1 <= n <= (1 << N):
        raise ValueError(f"transform path needs 1 <= n <= {1 << N}")
    if n == (1 << N):
        return GridFunction(N, f.values)
    filt = Filtration.dyadic(N)
    w = walsh_function(n, N)
    h = Martingale(filt, GridFunction(N, f.values * w.values))
    digits = [GridFunction.constant((n >> k) & 1, N) for k in range(N)]
    t0 = martingale_transform(h, digits)
    return GridFunction(N, w.values * t0.terminal.values)


# ---------------------------------------------------------------------------
# JSON file format: {"resolution": N, "coefficients": [...]}
# ---------------------------------------------------------------------------


def load_spectrum(source):
    if isinstance(source, dict):
        doc = source
    else:
        with open(source, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    return WalshSpectrum(int(doc["resolution"]), doc["coefficients"])


def save_spectrum(spec, path):
    doc = {"resolution": spec.resolution, "coefficients": list(map(float, spec.coefficients))}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
