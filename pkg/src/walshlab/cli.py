"""Command-line interface.

Query commands (`norm`, `check-condition`, `decompose`) read JSON inputs and
print results.  Experiment commands (`kernel-check`, `fejer-converge`,
`opnorm`, `counterexample`) build an ExperimentConfig, run it, and either
dump the report to stdout (--format csv|json) or, with --out, write
<stem>.csv, <stem>.json and <stem>.png side by side (--no-figure skips the
PNG).  Exit status is 0 iff every configured assertion in the report passed.
"""

from __future__ import annotations

import click

from . import __version__
from .spaces import (
    lp_norm,
    lorentz_norm,
    check_condition_log,
    load_grid_function,
    load_exponent,
)
from .martingales import Filtration, Martingale, load_filtration
from .atoms import decompose as _decompose, verify_atom, atomic_norm, save_bundle
from .lab import (
    ExperimentConfig,
    run_experiment,
    report_to_csv,
    report_to_json,
    _out_stem,
)


@click.group()
@click.version_option(__version__, prog_name="whl")
def main():
    """Variable-exponent dyadic harmonic analysis workbench."""


def _fail(exc):
    raise click.ClickException(str(exc))


# ---------------------------------------------------------------------------
# query commands
# ---------------------------------------------------------------------------


@main.command()
@click.argument("fn_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("exp_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--lorentz", "lorentz_q", type=float, default=None, metavar="Q",
              help="Report the Lorentz quasi-norm with this secondary index.")
def norm(fn_file, exp_file, lorentz_q):
    """Norm of a grid function under a variable exponent."""
    try:
        f = load_grid_function(fn_file)
        exp = load_exponent(exp_file)
        value = lp_norm(f, exp) if lorentz_q is None else lorentz_norm(f, exp, lorentz_q)
    except (ValueError, KeyError) as exc:
        _fail(exc)
    click.echo(repr(float(value)))


@main.command("check-condition")
@click.argument("exp_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--filtration", "filt_file", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Filtration JSON (defaults to the dyadic one).")
def check_condition(exp_file, filt_file):
    """Atom-wise exponent oscillation constant K over a filtration."""
    try:
        exp = load_exponent(exp_file)
        filt = load_filtration(filt_file) if filt_file else Filtration.dyadic(exp.resolution)
        report = check_condition_log(exp, filt)
    except (ValueError, KeyError) as exc:
        _fail(exc)
    level, atom = report.worst_atom
    click.echo(f"K = {repr(float(report.K))}")
    click.echo(f"worst atom: level {level}, atom {atom}")


@main.command("decompose")
@click.argument("fn_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("exp_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--kind", type=click.Choice(["s", "S", "M"]), required=True,
              help="Governing size functional.")
@click.option("--q", "q_val", type=float, default=None, metavar="Q",
              help="Aggregate the coefficient sequence in ell_Q (default: sup).")
@click.option("--t", "t_val", type=float, default=None, metavar="T",
              help="Aggregate through the T-power modular expression instead.")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the bundle as JSON.")
@click.pass_context
def decompose_cmd(ctx, fn_file, exp_file, kind, q_val, t_val, out):
    """Atomic decomposition of the dyadic martingale of a grid function."""
    try:
        f = load_grid_function(fn_file)
        exp = load_exponent(exp_file)
        m = Martingale(Filtration.dyadic(f.resolution), f)
        bundle = _decompose(m, exp, kind)
        if q_val is None and t_val is None:
            q_val = float("inf")
        norm_value = atomic_norm(bundle, exp, q=q_val, t=t_val)
    except (ValueError, KeyError) as exc:
        _fail(exc)
    recon = bundle.reconstruct()
    err = float(abs(recon.values - f.values).max())
    all_ok = True
    for entry in bundle.entries:
        rep = verify_atom(entry.atom, entry.tau, exp, kind)
        if not rep.passed:
            all_ok = False
            click.echo(f"atom k={entry.k}: FAILED ({rep!r})")
    click.echo(f"kind: {kind}")
    click.echo(f"entries: {len(bundle)}")
    click.echo(f"atomic norm: {repr(float(norm_value))}")
    click.echo(f"reconstruction max error: {repr(err)}")
    click.echo(f"atoms verified: {'yes' if all_ok else 'NO'}")
    if out:
        save_bundle(bundle, out)
        click.echo(f"wrote {out}")
    if not all_ok:
        ctx.exit(1)


# ---------------------------------------------------------------------------
# experiment commands
# ---------------------------------------------------------------------------


def _emit(ctx, report, out, fmt, figure):
    if out:
        stem = _out_stem(out)
        click.echo(f"wrote {stem}.csv")
        click.echo(f"wrote {stem}.json")
        if figure:
            click.echo(f"wrote {stem}.png")
        for key, value in report.summary.items():
            click.echo(f"{key}: {value}")
        click.echo(f"passed: {report.passed}")
    else:
        text = report_to_csv(report) if fmt == "csv" else report_to_json(report)
        click.echo(text, nl=False)
    if not report.passed:
        ctx.exit(1)


def _run(ctx, **kwargs):
    try:
        config = ExperimentConfig(**kwargs)
        report = run_experiment(config)
    except (ValueError, KeyError) as exc:
        _fail(exc)
    _emit(ctx, report, config.out, config.fmt, config.figure)


def _load_exp_opt(exp_file, resolution, default_resolution):
    """Resolve (exponent, resolution) from an optional file and flag."""
    exp = load_exponent(exp_file) if exp_file else None
    if resolution is None:
        resolution = exp.resolution if exp is not None else default_resolution
    return exp, resolution


_shared = [
    click.option("--seed", type=int, default=0, show_default=True),
    click.option("--out", type=click.Path(), default=None,
                 help="Output stem or file path; writes CSV+JSON (+PNG)."),
    click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv",
                 show_default=True, help="Stdout format when --out is not given."),
    click.option("--no-figure", "no_figure", is_flag=True, default=False,
                 help="Skip the PNG figure when writing --out."),
]


def _with_shared(fn):
    for opt in reversed(_shared):
        fn = opt(fn)
    return fn


@main.command("kernel-check")
@click.option("--resolution", type=int, default=10, show_default=True)
@_with_shared
@click.pass_context
def kernel_check(ctx, resolution, seed, out, fmt, no_figure):
    """Exact Dirichlet/Fejer kernel identities and the kernel upper bound."""
    _run(ctx, kind="kernel-check", resolution=resolution, seed=seed,
         out=out, fmt=fmt, figure=not no_figure)


@main.command("fejer-converge")
@click.option("--resolution", type=int, default=None,
              help="Grid resolution [default: 10 or the exponent file's].")
@click.option("--exp-file", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Exponent JSON [default: p(x) = 1 + x].")
@_with_shared
@click.pass_context
def fejer_converge(ctx, resolution, exp_file, seed, out, fmt, no_figure):
    """Norm convergence of dyadic-order Fejer means on a step function."""
    try:
        exp, resolution = _load_exp_opt(exp_file, resolution, 10)
    except (ValueError, KeyError) as exc:
        _fail(exc)
    _run(ctx, kind="fejer-converge", resolution=resolution, exponent=exp,
         seed=seed, out=out, fmt=fmt, figure=not no_figure)


@main.command("opnorm")
@click.option("--operator", required=True,
              help="identity | M | S | s | sigma_star | sigma_dyadic_max | U | V"
                   " | T_b | partial_sum_sup")
@click.option("--norm", "norm_kind", default="lp", show_default=True,
              help="lp | lorentz | hardy-M | hardy-S | hardy-s")
@click.option("--family", default="random-uniform", show_default=True)
@click.option("--count", type=int, default=32, show_default=True)
@click.option("--resolution", type=int, default=None,
              help="Grid resolution [default: 8 or the exponent file's].")
@click.option("--exp-file", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Exponent JSON [default: p(x) = 1 + x].")
@click.option("--s", "s_val", type=float, default=None)
@click.option("--alpha", type=float, default=None)
@click.option("--q", "q_val", type=float, default=None)
@click.option("--t", "t_val", type=float, default=None)
@click.option("--threshold", type=float, default=None,
              help="Assert max ratio <= this value.")
@_with_shared
@click.pass_context
def opnorm(ctx, operator, norm_kind, family, count, resolution, exp_file,
           s_val, alpha, q_val, t_val, threshold, seed, out, fmt, no_figure):
    """Empirical operator norm over a seeded family of test functions."""
    try:
        exp, resolution = _load_exp_opt(exp_file, resolution, 8)
    except (ValueError, KeyError) as exc:
        _fail(exc)
    _run(ctx, kind="opnorm", operator=operator, norm=norm_kind, family=family,
         count=count, resolution=resolution, exponent=exp, s=s_val,
         alpha=alpha, q=q_val, t=t_val, threshold=threshold, seed=seed,
         out=out, fmt=fmt, figure=not no_figure)


@main.command("counterexample")
@click.option("--which", type=click.Choice(["u", "v", "sigma"]), required=True)
@click.option("--resolution", type=int, default=None,
              help="Grid resolution [default: 12 or the exponent file's].")
@click.option("--exp-file", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Exponent JSON [default: the growth-regime split exponent].")
@click.option("--s", "s_val", type=float, default=None)
@click.option("--alpha", type=float, default=None)
@click.option("--n-lo", type=int, default=None)
@click.option("--n-hi", type=int, default=None)
@click.option("--threshold", type=float, default=None,
              help="Assert fitted slope >= this value.")
@_with_shared
@click.pass_context
def counterexample(ctx, which, resolution, exp_file, s_val, alpha, n_lo, n_hi,
                   threshold, seed, out, fmt, no_figure):
    """Growth sweep of the maximal-operator probes against level n."""
    try:
        exp, resolution = _load_exp_opt(exp_file, resolution, 12)
    except (ValueError, KeyError) as exc:
        _fail(exc)
    _run(ctx, kind="counterexample", which=which, resolution=resolution,
         exponent=exp, s=s_val, alpha=alpha, n_lo=n_lo, n_hi=n_hi,
         threshold=threshold, seed=seed, out=out, fmt=fmt, figure=not no_figure)


if __name__ == "__main__":
    main()
