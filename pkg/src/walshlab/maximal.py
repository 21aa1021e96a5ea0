"""Geometrically weighted dyadic maximal operators and growth counterexamples.

U_s f(x)          = sup_n sum_{j<n} 2^{(j-n)s} |avg of f over I_n(x) (+) 2^-(j+1)|
V_{alpha,s} f(x)  = sup_n sum_{j<n} sum_{i=j}^{n-1} 2^{(j-n)alpha} 2^{(j-i)s}
                    |avg of f over the translate interval I^{j,i}_n(x)|

where I_n(x) is the level-n dyadic interval of x and I^{j,i}_n(x) is
I_n(x) (+) T_{j,i} with T_{j,i} the dyadic i-interval containing 2^-(j+1):
T_{j,i} = [2^-(j+1), 2^-(j+1) + 2^-i) for i > j and [0, 2^-j) for i = j.
Since |T_{j,i}| >= |I_n(x)|, the XOR set I_n(x) (+) T_{j,i} is itself the
dyadic i-interval containing I_n(x) (+) 2^-(j+1); on prefixes this is "flip
bit j of the n-bit prefix, then truncate to i bits" (for i = j the flipped
bit is truncated away, leaving the i-interval of x itself).

Translate sets are materialized as explicit XOR cell sets in the brute-force
oracles (`translate_set`), which the fast prefix paths are tested against.

U_s includes its n > N tail exactly through a monotone closed form (derived
in `u_op`).  V truncates at n <= N: the truncated operator is a pointwise
lower bound of the full one, and the reports that consume it flag the
truncation in their metadata.
"""

from __future__ import annotations

import numpy as np

from .spaces import GridFunction, modular, lp_norm
from .walsh import fejer_maximal

__all__ = [
    "u_op",
    "u_brute",
    "v_op",
    "v_brute",
    "translate_set",
    "u_counterexample",
    "v_counterexample",
    "sigma_counterexample",
]


def _level_averages(values, resolution):
    """avgs[n][q] = average of f over the level-n interval with prefix q."""
    avgs = [None] * (resolution + 1)
    avgs[resolution] = values.astype(float)
    for n in range(resolution - 1, -1, -1):
        finer = avgs[n + 1]
        avgs[n] = 0.5 * (finer[0::2] + finer[1::2])
    return avgs


def u_op(f, s, max_level=None):
    """U_s f cellwise; `max_level=None` includes the exact n > N tail.

    For n = N + m every translate with j < N covers whole cells of the
    level-N grid and every translate with j >= N stays inside the cell of x,
    so the level value collapses to

        g(m) = 2^{-ms} A(x) + (1 - 2^{-ms}) |f(x)| / (2^s - 1),

    with A(x) the level-N sum (single-cell averages).  g is affine in
    2^{-ms}, hence monotone in m, so the tail sup is max(g(1), limit) with
    limit |f(x)|/(2^s - 1).

    An integer `max_level` restricts the sup to levels n <= max_level with
    no tail; levels above N are then evaluated through the same exact g(m),
    one per level.
    """
    if not s > 0:
        raise ValueError("s must be positive")
    N = f.resolution
    size = 1 << N
    include_tail = max_level is None
    top = N if include_tail else min(int(max_level), N)
    avgs = _level_averages(f.values, N)
    i = np.arange(size)
    best = np.zeros(size)
    level_N_sum = np.zeros(size)
    for n in range(1, top + 1):
        q = i >> (N - n)
        val = np.zeros(size)
        a = np.abs(avgs[n])
        for j in range(n):
            val += 2.0 ** ((j - n) * s) * a[q ^ (1 << (n - 1 - j))]
        best = np.maximum(best, val)
        if n == N:
            level_N_sum = val
    limit = np.abs(f.values) / (2.0 ** s - 1.0)
    if include_tail:
        g1 = 2.0 ** (-s) * level_N_sum + (1.0 - 2.0 ** (-s)) * limit
        best = np.maximum(best, np.maximum(g1, limit))
    else:
        for m in range(1, int(max_level) - N + 1):
            w = 2.0 ** (-m * s)
            best = np.maximum(best, w * level_N_sum + (1.0 - w) * limit)
    return GridFunction(N, best)


def u_brute(f, s, max_level):
    """Literal per-cell evaluation of U_s up to level `max_level` (> N allowed).

    Single-threaded on purpose; the tail levels sum term by term with no
    closed form, so this is an independent oracle for `u_op`.
    """
    if not s > 0:
        raise ValueError("s must be positive")
    N = f.resolution
    size = 1 << N
    avgs = _level_averages(f.values, N)
    out = np.zeros(size)
    for cell in range(size):
        sup = 0.0
        for n in range(1, max_level + 1):
            total = 0.0
            for j in range(n):
                if n <= N:
                    q = cell >> (N - n)
                    total += 2.0 ** ((j - n) * s) * abs(avgs[n][q ^ (1 << (n - 1 - j))])
                elif j < N:
                    # translate hits a whole level-N cell
                    total += 2.0 ** ((j - n) * s) * abs(f.values[cell ^ (1 << (N - 1 - j))])
                else:
                    # translate stays inside the cell of x
                    total += 2.0 ** ((j - n) * s) * abs(f.values[cell])
            sup = max(sup, total)
        out[cell] = sup
    return GridFunction(N, out)


def translate_set(cells, j, i, resolution):
    """I (+) T_{j,i} as an explicit XOR cell set.

    T_{j,i} is the dyadic i-interval containing 2^-(j+1) (prefix
    2^(N-1-j) >> (N-i)); the result is {a XOR b} over both cell sets, exact
    even when the translate crosses ordinary interval boundaries.
    """
    N = resolution
    cells = np.asarray(cells, dtype=int)
    if i < j:
        raise ValueError("need i >= j")
    prefix = (1 << (N - 1 - j)) >> (N - i) if j < N else 0
    t_cells = prefix * (1 << (N - i)) + np.arange(1 << (N - i))
    out = np.unique((cells[:, None] ^ t_cells[None, :]).ravel())
    return out


def v_op(f, alpha, s):
    """V_{alpha,s} f cellwise over levels n <= N (documented truncation).

    Level value at the n-bit prefix q:
        sum_{j<n} sum_{i=j}^{n-1} 2^{(j-n)alpha} 2^{(j-i)s}
                  |avg_i[ (q XOR 2^(n-1-j)) >> (n-i) ]|
    (flip bit j, truncate to i bits; for i = j the flip is truncated away).
    """
    if not (alpha > 0 and s > 0):
        raise ValueError("alpha and s must be positive")
    N = f.resolution
    size = 1 << N
    avgs = [np.abs(a) for a in _level_averages(f.values, N)]
    i_arr = np.arange(size)
    best = np.zeros(size)
    for n in range(1, N + 1):
        q = i_arr >> (N - n)
        val = np.zeros(size)
        for j in range(n):
            flipped = q ^ (1 << (n - 1 - j))
            for lev in range(j, n):
                w = 2.0 ** ((j - n) * alpha + (j - lev) * s)
                val += w * avgs[lev][flipped >> (n - lev)]
        best = np.maximum(best, val)
    return GridFunction(N, best)


def v_brute(f, alpha, s, max_level=None):
    """Literal V_{alpha,s} through materialized XOR translate sets (oracle)."""
    if not (alpha > 0 and s > 0):
        raise ValueError("alpha and s must be positive")
    N = f.resolution
    size = 1 << N
    top = N if max_level is None else min(max_level, N)
    out = np.zeros(size)
    for cell in range(size):
        sup = 0.0
        for n in range(1, top + 1):
            q = cell >> (N - n)
            interval = q * (1 << (N - n)) + np.arange(1 << (N - n))
            total = 0.0
            for j in range(n):
                for i in range(j, n):
                    tset = translate_set(interval, j, i, N)
                    avg = float(np.mean(f.values[tset]))
                    total += 2.0 ** ((j - n) * alpha + (j - i) * s) * abs(avg)
            sup = max(sup, total)
        out[cell] = sup
    return GridFunction(N, out)


def _left_block(n, resolution, offset_blocks=0):
    """Cells of I_{offset_blocks, n} = [offset_blocks 2^-n, (offset_blocks+1) 2^-n)."""
    width = 1 << (resolution - n)
    return np.arange(offset_blocks * width, (offset_blocks + 1) * width)


def u_counterexample(n, exp, s):
    """Growth probe for U_s: modular of U_s applied to the normalized
    indicator of I_{0,n} (+) 2^-1.

    The test function is f = chi_{I_{0,n} (+) 2^-1} * 2^(n/p_-(that set)),
    which has L_{p(.)} norm <= a constant.  When
    1/p_-(I_{0,n} (+) 2^-1) - 1/p_+(I_{0,n}) > s, the modular grows
    geometrically in n (the level-n, j=0 term already delivers
    2^{n(1/p_- - s)} on I_{0,n}, whose cells carry the large exponent).
    """
    N = exp.resolution
    if not 1 <= n <= N:
        raise ValueError(f"need 1 <= n <= {N}")
    support = _left_block(n, N) + (1 << (N - 1))  # flip bit 0: [1/2, 1/2 + 2^-n)
    p_minus = float(exp.values[support].min())
    values = np.zeros(1 << N)
    values[support] = 2.0 ** (n / p_minus)
    f = GridFunction(N, values)
    return modular(u_op(f, s), exp, 1.0)


def v_counterexample(n, exp, alpha, s):
    """Growth probe for V_{alpha,s}: same test function as `u_counterexample`
    (the V unboundedness argument reduces to it through the j=0, i=n-1 term),
    with threshold 1/p_- - 1/p_+ > alpha + s."""
    N = exp.resolution
    if not 1 <= n <= N:
        raise ValueError(f"need 1 <= n <= {N}")
    support = _left_block(n, N) + (1 << (N - 1))
    p_minus = float(exp.values[support].min())
    values = np.zeros(1 << N)
    values[support] = 2.0 ** (n / p_minus)
    f = GridFunction(N, values)
    return modular(v_op(f, alpha, s), exp, 1.0)


def sigma_counterexample(n, exp):
    """||sigma_* a_{n-1}||_{p(.)} for the two-cell atom
    a_{n-1} = 2^((n-1)/p_-(I_{0,n-1})) (chi_{I_{0,n}} - chi_{I_{1,n}}).

    a_{n-1} is an M-style atom at the size boundary: E_m a = 0 for m <= n-1,
    and ||M a||_{p(.)} = 1 exactly when p is constant on I_{0,n-1}.  When
    1/p_-(I_{0,n-1}) - 1/p_+(I_{0,n} (+) 2^-1) > 1 the returned norms grow
    geometrically in n; under 1/p_- - 1/p_+ < 1 they stay bounded.
    """
    N = exp.resolution
    if not 1 <= n <= N:
        raise ValueError(f"need 1 <= n <= {N}")
    parent = _left_block(n - 1, N)
    p_minus = float(exp.values[parent].min())
    amp = 2.0 ** ((n - 1) / p_minus)
    values = np.zeros(1 << N)
    values[_left_block(n, N)] = amp
    values[_left_block(n, N, offset_blocks=1)] = -amp
    a = GridFunction(N, values)
    return lp_norm(fejer_maximal(a), exp)
