"""Figure rendering for reports: one PNG per report, written next to the
CSV/JSON output.  Uses the Agg backend so it works headless."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_report"]


def _col(report, name):
    i = report.columns.index(name)
    return [row[i] for row in report.rows]


def _render_kernel_check(report, ax):
    idents = sorted({row[0] for row in report.rows})
    for ident in idents:
        ns = [row[1] for row in report.rows if row[0] == ident]
        errs = [max(row[2], 1e-18) for row in report.rows if row[0] == ident]
        ax.semilogy(ns, errs, marker=".", linestyle="none", label=ident)
    ax.axhline(report.summary.get("tolerance", 1e-12), color="red", linewidth=0.8,
               linestyle="--", label="tolerance")
    ax.set_xlabel("kernel order n")
    ax.set_ylabel("max cellwise error (floored at 1e-18)")
    ax.set_title("kernel identity / bound residuals")
    ax.legend(fontsize=8)


def _render_fejer_converge(report, ax):
    ks = _col(report, "k")
    logs = _col(report, "log2_error")
    ax.plot(ks, logs, marker="o", label="log2 error")
    slope = report.summary["fitted_slope"]
    fit = np.polyval(np.polyfit(ks, logs, 1), ks)
    ax.plot(ks, fit, linestyle="--", label=f"OLS slope {slope:.3f}")
    ax.set_xlabel("k  (mean order 2^k)")
    ax.set_ylabel("log2 ||sigma_(2^k) f - f||")
    ax.set_title("Fejer mean convergence")
    ax.legend(fontsize=8)


def _render_counterexample(report, ax):
    ns = _col(report, "n")
    logs = _col(report, "log2_value")
    slope = report.summary["fitted_slope"]
    ax.plot(ns, logs, marker="o", label="log2 value")
    fit = np.polyval(np.polyfit(ns, logs, 1), ns)
    ax.plot(ns, fit, linestyle="--", label=f"OLS slope {slope:.3f}")
    thr = report.summary.get("threshold")
    if thr is not None:
        ax.plot([], [], " ", label=f"slope threshold {thr}")
    ax.set_xlabel("n")
    ax.set_ylabel("log2 of swept value")
    which = report.summary.get("which", "")
    ax.set_title(f"growth sweep ({which})")
    ax.legend(fontsize=8)


def _render_opnorm(report, ax):
    ratios = [r for r in _col(report, "ratio") if np.isfinite(r)]
    ax.hist(ratios, bins=min(32, max(4, len(ratios) // 2)), color="tab:blue")
    ax.axvline(report.summary["max_ratio"], color="red", linewidth=0.8,
               label=f"max {report.summary['max_ratio']:.4g}")
    ax.set_xlabel("||T f|| / ||f||")
    ax.set_ylabel("count")
    op = report.summary.get("operator", "")
    ax.set_title(f"empirical ratio distribution ({op})")
    ax.legend(fontsize=8)


_RENDERERS = {
    "kernel-check": _render_kernel_check,
    "fejer-converge": _render_fejer_converge,
    "counterexample": _render_counterexample,
    "opnorm": _render_opnorm,
}


def render_report(report, path):
    """Render the report's headline plot to `path` (PNG)."""
    renderer = _RENDERERS.get(report.kind)
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=120)
    try:
        if renderer is None:
            ax.axis("off")
            ax.text(0.5, 0.5, f"no figure for kind {report.kind!r}",
                    ha="center", va="center")
        else:
            renderer(report, ax)
        fig.tight_layout()
        fig.savefig(path)
    finally:
        plt.close(fig)
    return path
