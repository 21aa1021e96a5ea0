"""Experiment harness: test-function families, empirical operator norms,
convergence and growth sweeps, and report emission.

Every experiment is driven by an `ExperimentConfig` and produces a `Report`
whose rows/summary are deterministic given (config, seed).  `save_report`
writes the report as CSV and JSON side by side (the CSV is byte-identical
across runs; a created-timestamp lives only in the JSON metadata) and, unless
disabled, renders a PNG figure next to them.

The environment variable WHL_THREADS caps worker threads for the per-case
loops; results are reduced in case-index order, so the output is identical
at any thread count.
"""

from __future__ import annotations

import io
import csv
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import __version__
from .spaces import GridFunction, VariableExponent, lp_norm, lorentz_norm
from .martingales import Filtration, Martingale, doob_maximal, square_function, \
    cond_square_function, martingale_transform
from .walsh import rademacher, walsh_function, dirichlet_kernel, fejer_kernel, \
    dyadic_translate, partial_sum, fejer_mean, fejer_maximal, sigma_dyadic_max
from .maximal import u_op, v_op, u_counterexample, v_counterexample, \
    sigma_counterexample

__all__ = [
    "FAMILY_KINDS",
    "OPERATOR_KINDS",
    "NORM_KINDS",
    "EXPERIMENT_KINDS",
    "ExperimentConfig",
    "Report",
    "generate_family",
    "fitted_slope",
    "empirical_opnorm",
    "run_experiment",
    "report_to_csv",
    "report_to_json",
    "save_report",
]

FAMILY_KINDS = (
    "random-uniform",
    "random-sign",
    "sparse-spikes",
    "dyadic-indicators",
    "rademacher-products",
    "random-martingale-differences",
)

OPERATOR_KINDS = (
    "identity",
    "M",
    "S",
    "s",
    "sigma_star",
    "sigma_dyadic_max",
    "U",
    "V",
    "T_b",
    "partial_sum_sup",
)

NORM_KINDS = ("lp", "lorentz", "hardy-M", "hardy-S", "hardy-s")

EXPERIMENT_KINDS = ("kernel-check", "fejer-converge", "counterexample", "opnorm")


# ---------------------------------------------------------------------------
# parallel map with deterministic reduction
# ---------------------------------------------------------------------------


def _thread_cap():
    raw = os.environ.get("WHL_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_ordered(fn, items):
    """Apply fn to items, in parallel if WHL_THREADS > 1; results keep input
    order, so aggregation never depends on scheduling."""
    items = list(items)
    cap = _thread_cap()
    if cap <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=cap) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# test-function families
# ---------------------------------------------------------------------------


def generate_family(kind, count, seed, resolution):
    """Deterministic pseudo-random family of `count` grid functions."""
    if kind not in FAMILY_KINDS:
        raise ValueError(f"unknown family kind {kind!r}; choose from {FAMILY_KINDS}")
    if count < 1:
        raise ValueError("count must be >= 1")
    N = resolution
    size = 1 << N
    rng = np.random.default_rng(seed)
    out = []
    for index in range(count):
        if kind == "random-uniform":
            vals = rng.uniform(-1.0, 1.0, size)
        elif kind == "random-sign":
            vals = rng.choice([-1.0, 1.0], size)
        elif kind == "sparse-spikes":
            spikes = int(rng.integers(1, 5))  # at most 4 isolated large values
            cells = rng.choice(size, size=min(spikes, size), replace=False)
            vals = np.zeros(size)
            vals[cells] = rng.uniform(4.0, 64.0, len(cells)) * rng.choice([-1.0, 1.0], len(cells))
        elif kind == "dyadic-indicators":
            # cycle through cell indicators in cell-index order
            vals = np.zeros(size)
            vals[index % size] = 1.0
        elif kind == "rademacher-products":
            vals = walsh_function(int(rng.integers(0, size)), N).values
        elif kind == "random-martingale-differences":
            # f = f_0 + sum_n phi_n r_{n-1} with phi_n constant on the
            # level-(n-1) atoms, so each difference is a predictable multiple
            # of a Rademacher function
            vals = np.full(size, rng.uniform(-1.0, 1.0))
            for n in range(1, N + 1):
                phi = rng.uniform(-1.0, 1.0, 1 << (n - 1))
                vals = vals + np.repeat(phi, 1 << (N - n + 1)) * rademacher(n - 1, N).values
        out.append(GridFunction(N, vals))
    return out


def fitted_slope(xs, ys):
    """Ordinary least-squares slope of ys against xs."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) < 2:
        raise ValueError("need at least two points to fit a slope")
    return float(np.polyfit(xs, ys, 1)[0])


# ---------------------------------------------------------------------------
# config and report
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    kind: str
    resolution: int = 10
    seed: int = 0
    count: int = 32
    exponent: VariableExponent | None = None
    family: str = "random-uniform"
    operator: str | None = None
    norm: str = "lp"
    which: str | None = None
    s: float | None = None
    alpha: float | None = None
    q: float | None = None
    t: float | None = None
    n_lo: int | None = None
    n_hi: int | None = None
    threshold: float | None = None
    out: str | None = None
    fmt: str = "csv"
    figure: bool = True

    def __post_init__(self):
        # accept the spelled-out sweep names ("counterexample-u" etc.)
        if self.kind.startswith("counterexample-"):
            self.which = self.kind.split("-", 1)[1]
            self.kind = "counterexample"
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if not 1 <= self.resolution <= 20:
            raise ValueError("resolution must lie in 1..20")
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.fmt not in ("csv", "json"):
            raise ValueError("format must be csv or json")
        if self.kind == "counterexample" and self.which not in ("u", "v", "sigma"):
            raise ValueError("counterexample needs which in {u, v, sigma}")
        if self.kind == "opnorm" and self.operator is None:
            raise ValueError("opnorm needs an operator")
        if self.exponent is not None and self.exponent.resolution != self.resolution:
            raise ValueError("exponent resolution does not match config resolution")

    def echo(self):
        d = asdict(self)
        exp = d.pop("exponent")
        if exp is not None:
            d["exponent"] = [float(v) for v in self.exponent.values]
        else:
            d["exponent"] = None
        return d


@dataclass
class Report:
    kind: str
    columns: list
    rows: list
    summary: dict
    passed: bool
    metadata: dict = field(default_factory=dict)


def _base_metadata(config, exp):
    md = {
        "version": __version__,
        "seed": config.seed,
        "config": config.echo(),
    }
    if exp is not None:
        md["exponent_resolution"] = exp.resolution
        md["exponent_values"] = [float(v) for v in exp.values]
    return md


# ---------------------------------------------------------------------------
# empirical operator norms
# ---------------------------------------------------------------------------


def _require(value, name, operator):
    if value is None:
        raise ValueError(f"operator {operator!r} needs parameter {name}")
    return value


def _partial_sum_orders(resolution, seed):
    """Sampled orders for the sup_n ||s_n f|| study: all powers of two,
    64 seeded uniform draws, and 2^N itself."""
    size = 1 << resolution
    rng = np.random.default_rng(seed)
    ns = {1 << k for k in range(resolution + 1)}
    ns.update(int(v) for v in rng.integers(1, size + 1, 64))
    ns.add(size)
    return sorted(ns)


def _make_operator(name, resolution, *, s=None, alpha=None, seed=0):
    """Map an operator name to a GridFunction -> GridFunction callable.

    `partial_sum_sup` is handled separately by the caller (its natural output
    is a supremum of norms over sampled orders, not a single grid function).
    """
    if name == "identity":
        return lambda f: f

    def mart(f):
        return Martingale(Filtration.dyadic(resolution), f)

    if name == "M":
        return lambda f: doob_maximal(mart(f))
    if name == "S":
        return lambda f: square_function(mart(f))
    if name == "s":
        return lambda f: cond_square_function(mart(f))
    if name == "sigma_star":
        return fejer_maximal
    if name == "sigma_dyadic_max":
        return sigma_dyadic_max
    if name == "U":
        s_val = _require(s, "s", name)
        return lambda f: u_op(f, s_val)
    if name == "V":
        a_val = _require(alpha, "alpha", name)
        s_val = _require(s, "s", name)
        return lambda f: v_op(f, a_val, s_val)
    if name == "T_b":
        # predictable seeded signs, fixed once per study
        rng = np.random.default_rng(seed)
        mults = []
        for k in range(1, resolution + 1):
            signs = rng.choice([-1.0, 1.0], 1 << (k - 1))
            mults.append(np.repeat(signs, 1 << (resolution - k + 1)))
        return lambda f: GridFunction(
            resolution, martingale_transform(mart(f), mults).terminal.values
        )
    raise ValueError(f"unknown operator {name!r}; choose from {OPERATOR_KINDS}")


def _make_norms(norm, exp, resolution, *, q=None):
    """(numerator_norm, denominator_norm) for the requested norm kind.

    lp / lorentz apply the same norm on both sides; the hardy-g kinds measure
    the input through its governing function g in {M, S, s} and the output in
    L_{p(.)}.  A kind whose required parameter is missing (lorentz without q)
    is rejected as an incompatible pairing.
    """
    if norm == "lp":
        f_norm = lambda g: lp_norm(g, exp)
        return f_norm, f_norm
    if norm == "lorentz":
        if q is None:
            raise ValueError("lorentz norm needs q")
        f_norm = lambda g: lorentz_norm(g, exp, q)
        return f_norm, f_norm
    if norm in ("hardy-M", "hardy-S", "hardy-s"):
        inner = {"hardy-M": doob_maximal, "hardy-S": square_function,
                 "hardy-s": cond_square_function}[norm]

        def den(g):
            return lp_norm(inner(Martingale(Filtration.dyadic(resolution), g)), exp)

        return (lambda g: lp_norm(g, exp)), den
    raise ValueError(f"unknown norm kind {norm!r}; choose from {NORM_KINDS}")


def empirical_opnorm(operator, exp, family, norm="lp", *, s=None, alpha=None,
                     q=None, seed=0, config=None):
    """Max over the family of ||T f|| / ||f|| plus the full ratio table.

    Cases with zero denominator are recorded with ratio NaN and excluded from
    the summary maximum.
    """
    if not family:
        raise ValueError("family must be non-empty")
    N = family[0].resolution
    if exp.resolution != N:
        raise ValueError("exponent resolution does not match the family")
    num_norm, den_norm = _make_norms(norm, exp, N, q=q)

    if operator == "partial_sum_sup":
        orders = _partial_sum_orders(N, seed)

        def one(case):
            idx, f = case
            den = den_norm(f)
            num = max(num_norm(partial_sum(f, n)) for n in orders)
            return idx, num, den
    else:
        op = _make_operator(operator, N, s=s, alpha=alpha, seed=seed)

        def one(case):
            idx, f = case
            return idx, num_norm(op(f)), den_norm(f)

    results = _map_ordered(one, list(enumerate(family)))
    rows = []
    ratios = []
    for idx, num, den in results:
        ratio = num / den if den > 0 else float("nan")
        rows.append([idx, num, den, ratio])
        if den > 0:
            ratios.append(ratio)
    if not ratios:
        raise ValueError("every family member had zero norm")
    summary = {
        "operator": operator,
        "norm": norm,
        "max_ratio": max(ratios),
        "min_ratio": min(ratios),
        "mean_ratio": float(np.mean(ratios)),
        "cases": len(rows),
    }
    if config is None:
        config = ExperimentConfig(kind="opnorm", resolution=N, seed=seed,
                                  count=len(family), exponent=exp,
                                  operator=operator, norm=norm, s=s,
                                  alpha=alpha, q=q)
    md = _base_metadata(config, exp)
    if operator == "partial_sum_sup":
        md["sampled_orders"] = _partial_sum_orders(N, seed)
    if operator == "V":
        md["v_op_truncated_at_level"] = N
    threshold = config.threshold
    passed = True if threshold is None else summary["max_ratio"] <= threshold
    if threshold is not None:
        summary["threshold"] = threshold
    return Report(
        kind="opnorm",
        columns=["case", "numerator", "denominator", "ratio"],
        rows=rows,
        summary=summary,
        passed=passed,
        metadata=md,
    )


# ---------------------------------------------------------------------------
# experiment drivers
# ---------------------------------------------------------------------------


def _kernel_check(config):
    """Exact identity checks for the dyadic Dirichlet and Fejer kernels, and
    the cellwise upper bound on |K_n| by weighted sums of translated
    dyadic Dirichlet kernels for every order 1 <= n < 2^N."""
    N = config.resolution
    size = 1 << N
    tol = 1e-12
    rows = []

    # D_{2^n} = 2^n on [0, 2^-n), else 0
    for n in range(0, N + 1):
        d = dirichlet_kernel(1 << n, N)
        expected = np.zeros(size)
        expected[: 1 << (N - n)] = 2.0 ** n
        rows.append(["dirichlet-dyadic", n, float(np.max(np.abs(d.values - expected)))])

    # K_{2^n} = (1/2)(2^-n D_{2^n}(x) + sum_{j=0..n} 2^{j-n} D_{2^n}(x (+) 2^-(j+1)))
    for n in range(0, N + 1):
        k = fejer_kernel(1 << n, N)
        d = dirichlet_kernel(1 << n, N)
        rhs = 2.0 ** (-n) * d.values.copy()
        for j in range(0, n + 1):
            rhs += 2.0 ** (j - n) * dyadic_translate(d, j).values
        rhs *= 0.5
        rows.append(["fejer-dyadic", n, float(np.max(np.abs(k.values - rhs)))])

    # |K_n| <= sum_{j<N'} 2^{j-N'} sum_{i=j..N'-1} (D_{2^i}(x) + D_{2^i}(x (+) 2^-(j+1)))
    # for 2^(N'-1) <= n < 2^N'; the bound depends only on N', so precompute it
    dirichlets = [dirichlet_kernel(1 << i, N) for i in range(N)]
    translated = [[dyadic_translate(dirichlets[i], j).values for i in range(N)] for j in range(N)]
    bounds = {}
    for n_prime in range(1, N + 1):
        b = np.zeros(size)
        for j in range(n_prime):
            inner = np.zeros(size)
            for i in range(j, n_prime):
                inner += dirichlets[i].values + translated[j][i]
            b += 2.0 ** (j - n_prime) * inner
        bounds[n_prime] = b
    for n in range(1, size):
        k = fejer_kernel(n, N)
        excess = np.abs(k.values) - bounds[n.bit_length()]
        violation = float(max(0.0, np.max(excess)))
        rows.append(["fejer-bound", n, violation])

    worst = max(r[2] for r in rows)
    summary = {"worst_error": worst, "tolerance": tol, "checks": len(rows)}
    md = _base_metadata(config, None)
    return Report(
        kind="kernel-check",
        columns=["identity", "n", "max_error"],
        rows=rows,
        summary=summary,
        passed=worst <= tol,
        metadata=md,
    )


def _third_indicator(resolution):
    """Grid discretization of the indicator of [0, 1/3): 1 on every cell whose
    left endpoint is below 1/3."""
    size = 1 << resolution
    vals = (np.arange(size) / size < 1.0 / 3.0).astype(float)
    return GridFunction(resolution, vals)


def _fejer_converge(config):
    """||sigma_{2^k} f - f||_{p(.)} against k; convergence shows up as a
    negative least-squares slope of the log2 errors."""
    N = config.resolution
    exp = config.exponent or VariableExponent.affine(1.0, 1.0, N)
    f = _third_indicator(N)
    base = lp_norm(f, exp)
    ks = list(range(2, N + 1))

    def one(k):
        g = fejer_mean(f, 1 << k)
        return lp_norm(GridFunction(N, g.values - f.values), exp)

    errors = _map_ordered(one, ks)
    logs = [float(np.log2(e)) for e in errors]
    slope = fitted_slope(ks, logs)
    rows = [[k, e, l] for k, e, l in zip(ks, errors, logs)]
    final_ratio = errors[-1] / base
    summary = {
        "fitted_slope": slope,
        "final_error": errors[-1],
        "input_norm": base,
        "final_ratio": final_ratio,
    }
    passed = slope < 0.0 and final_ratio < 0.05
    md = _base_metadata(config, exp)
    md["input"] = "indicator of [0, 1/3) sampled at cell left endpoints"
    md["pass_rule"] = "fitted_slope < 0 and final_error < 0.05 * input_norm"
    return Report(
        kind="fejer-converge",
        columns=["k", "error", "log2_error"],
        rows=rows,
        summary=summary,
        passed=passed,
        metadata=md,
    )


_COUNTEREXAMPLE_DEFAULTS = {
    # which: (exponent builder, default n_lo, default slope threshold)
    "u": (lambda N: VariableExponent.split(8.0, 1.1, N), 4, 2.0),
    "v": (lambda N: VariableExponent.split(8.0, 1.1, N), 4, 2.0),
    "sigma": (lambda N: VariableExponent.split(0.6, 8.0, N), 3, 0.3),
}


def _counterexample(config):
    """Growth sweep: the probe value against n, with an OLS log2 slope.

    Defaults reproduce the unbounded regimes: U at s = 0.5 and V at
    alpha = s = 0.25 under the {8 | 1.1} split both have expected log2 slope
    p_+ (1/p_- - s_total) - 1 = 8 (1/1.1 - 1/2) - 1 ~ 2.27 (modular scale);
    the two-cell-atom sweep under the {0.6 | 8} split has expected norm-scale
    slope (1/0.6 - 1) - 1/8 = 13/24 ~ 0.54.
    """
    which = config.which
    N = config.resolution
    default_exp, default_lo, default_threshold = _COUNTEREXAMPLE_DEFAULTS[which]
    exp = config.exponent or default_exp(N)
    n_lo = config.n_lo if config.n_lo is not None else default_lo
    n_hi = config.n_hi if config.n_hi is not None else min(10, N)
    if not 1 <= n_lo <= n_hi <= N:
        raise ValueError(f"need 1 <= n_lo <= n_hi <= {N}")
    threshold = config.threshold if config.threshold is not None else default_threshold
    s = config.s if config.s is not None else (0.5 if which == "u" else 0.25)
    alpha = config.alpha if config.alpha is not None else 0.25

    if which == "u":
        probe = lambda n: u_counterexample(n, exp, s)
    elif which == "v":
        probe = lambda n: v_counterexample(n, exp, alpha, s)
    else:
        probe = lambda n: sigma_counterexample(n, exp)

    ns = list(range(n_lo, n_hi + 1))
    values = _map_ordered(probe, ns)
    logs = [float(np.log2(v)) for v in values]
    slope = fitted_slope(ns, logs)
    rows = [[n, v, l, slope] for n, v, l in zip(ns, values, logs)]
    summary = {
        "which": which,
        "fitted_slope": slope,
        "threshold": threshold,
        "max_over_min": max(values) / min(values),
    }
    if which in ("u", "v"):
        summary["s"] = s
    if which == "v":
        summary["alpha"] = alpha
    md = _base_metadata(config, exp)
    md["value_scale"] = "modular" if which in ("u", "v") else "norm"
    md["pass_rule"] = "fitted_slope >= threshold"
    if which == "v":
        md["v_op_truncated_at_level"] = N
    return Report(
        kind="counterexample",
        columns=["n", "modular_or_norm", "log2_value", "fitted_slope"],
        rows=rows,
        summary=summary,
        passed=slope >= threshold,
        metadata=md,
    )


def _opnorm_experiment(config):
    N = config.resolution
    exp = config.exponent or VariableExponent.affine(1.0, 1.0, N)
    family = generate_family(config.family, config.count, config.seed, N)
    return empirical_opnorm(
        config.operator, exp, family, config.norm,
        s=config.s, alpha=config.alpha, q=config.q, seed=config.seed,
        config=config,
    )


def run_experiment(config):
    """Dispatch an ExperimentConfig and, when an output path is set, write the
    report (CSV + JSON, and a PNG figure unless disabled)."""
    if config.kind == "kernel-check":
        report = _kernel_check(config)
    elif config.kind == "fejer-converge":
        report = _fejer_converge(config)
    elif config.kind == "counterexample":
        report = _counterexample(config)
    else:
        report = _opnorm_experiment(config)
    if config.out:
        save_report(report, config.out, figure=config.figure)
    return report


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------


def _csv_cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def report_to_csv(report):
    """Header plus rows; floats via repr, no timestamp, byte-stable."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(report.columns)
    for row in report.rows:
        writer.writerow([_csv_cell(v) for v in row])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def report_to_json(report, *, timestamp=True):
    doc = {
        "kind": report.kind,
        "columns": list(report.columns),
        "rows": _jsonable(report.rows),
        "summary": _jsonable(report.summary),
        "passed": bool(report.passed),
        "metadata": _jsonable(report.metadata),
    }
    if timestamp:
        doc["metadata"] = dict(doc["metadata"])
        doc["metadata"]["created"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _out_stem(out):
    root, ext = os.path.splitext(out)
    return root if ext.lower() in (".csv", ".json", ".png") else out


def save_report(report, out, *, figure=True):
    """Write <stem>.csv and <stem>.json (and <stem>.png unless figure=False);
    `out` may be a bare stem or a path ending in .csv/.json/.png."""
    stem = _out_stem(out)
    parent = os.path.dirname(stem)
    if parent:
        os.makedirs(parent, exist_ok=True)
    paths = {"csv": stem + ".csv", "json": stem + ".json"}
    with open(paths["csv"], "w", encoding="utf-8", newline="") as fh:
        fh.write(report_to_csv(report))
    with open(paths["json"], "w", encoding="utf-8") as fh:
        fh.write(report_to_json(report))
    if figure:
        from .figures import render_report

        paths["png"] = stem + ".png"
        render_report(report, paths["png"])
    return paths
