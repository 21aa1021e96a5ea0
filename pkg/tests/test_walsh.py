"""Walsh system, transform, kernels, partial sums, Fejér means and maxima."""

import json
import math

import numpy as np
import pytest

from conftest import random_grid
from walshlab import (
    GridFunction,
    WalshSpectrum,
    cond_expectation,
    dirichlet_kernel,
    fejer_kernel,
    fejer_maximal,
    fejer_mean,
    fwht,
    ifwht,
    partial_sum,
    partial_sum_via_transform,
    walsh_function,
)
from walshlab.martingales import Filtration
from walshlab.walsh import (
    dyadic_translate,
    load_spectrum,
    rademacher,
    save_spectrum,
    sigma_dyadic_max,
)


def expectation(g):
    return float(np.mean(g.values))


# ---------------------------------------------------------------------------
# system and transform
# ---------------------------------------------------------------------------


def test_walsh_function_examples():
    assert walsh_function(0, 2).values.tolist() == [1, 1, 1, 1]
    assert walsh_function(1, 2).values.tolist() == [1, 1, -1, -1]
    assert walsh_function(3, 2).values.tolist() == [1, -1, -1, 1]
    with pytest.raises(ValueError):
        walsh_function(4, 2)
    with pytest.raises(ValueError):
        walsh_function(-1, 2)


def test_rademacher_reads_one_bit():
    r1 = rademacher(1, 2)
    assert r1.values.tolist() == [1, -1, 1, -1]
    with pytest.raises(ValueError):
        rademacher(2, 2)


def test_orthonormality_exact():
    for N in range(0, 9):
        size = 1 << N
        rows = np.stack([walsh_function(n, N).values for n in range(size)])
        gram = rows @ rows.T / size
        assert np.array_equal(gram, np.eye(size))


def test_dyadic_translate_is_bit_flip():
    f = GridFunction(2, [10.0, 20.0, 30.0, 40.0])
    assert dyadic_translate(f, 0).values.tolist() == [30, 40, 10, 20]
    assert dyadic_translate(f, 1).values.tolist() == [20, 10, 40, 30]
    # below grid resolution the translate is the identity
    assert dyadic_translate(f, 2).values.tolist() == [10, 20, 30, 40]
    with pytest.raises(ValueError):
        dyadic_translate(f, -1)


def test_fwht_unit_spectra():
    for m in range(8):
        spec = fwht(walsh_function(m, 3))
        want = np.zeros(8)
        want[m] = 1.0
        assert np.allclose(spec.coefficients, want, atol=1e-12)


def test_fwht_half_indicator():
    f = GridFunction.indicator(range(4), 3)
    spec = fwht(f)
    assert spec.coefficients[0] == pytest.approx(0.5, abs=1e-12)
    assert spec.coefficients[1] == pytest.approx(0.5, abs=1e-12)
    assert np.allclose(spec.coefficients[2:], 0.0, atol=1e-12)


def test_round_trip_and_parseval():
    for seed in range(5):
        f = random_grid(6, seed)
        spec = fwht(f)
        assert np.max(np.abs(ifwht(spec).values - f.values)) < 1e-12
        energy = float(np.mean(f.values**2))
        assert energy == pytest.approx(float(np.sum(spec.coefficients**2)), abs=1e-12)


def test_spectrum_validation():
    with pytest.raises(ValueError):
        WalshSpectrum(2, [1.0, 2.0])
    with pytest.raises(ValueError):
        WalshSpectrum(1, [1.0, math.nan])


def test_spectrum_file_round_trip(tmp_path):
    spec = fwht(random_grid(4, 9))
    path = tmp_path / "spec.json"
    save_spectrum(spec, path)
    loaded = load_spectrum(path)
    assert loaded.resolution == 4
    assert np.array_equal(loaded.coefficients, spec.coefficients)
    assert json.loads(path.read_text())["resolution"] == 4


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


def test_dirichlet_examples():
    assert dirichlet_kernel(1, 2).values.tolist() == [1, 1, 1, 1]
    assert dirichlet_kernel(4, 2).values.tolist() == [4, 0, 0, 0]
    assert dirichlet_kernel(3, 2).values.tolist() == [3, 1, 1, -1]
    with pytest.raises(ValueError):
        dirichlet_kernel(0, 2)
    with pytest.raises(ValueError):
        dirichlet_kernel(5, 2)


def test_dirichlet_dyadic_closed_form():
    for N in range(0, 9):
        for n in range(N + 1):
            kernel = dirichlet_kernel(1 << n, N)
            want = np.zeros(1 << N)
            want[: 1 << (N - n)] = float(1 << n)
            assert np.array_equal(kernel.values, want)


def test_fejer_examples():
    assert fejer_kernel(1, 2).values.tolist() == [1, 1, 1, 1]
    assert np.allclose(fejer_kernel(2, 2).values, [1.5, 1.5, 0.5, 0.5], atol=1e-12)
    with pytest.raises(ValueError):
        fejer_kernel(5, 2)


def fejer_dyadic_closed_form(n, N):
    """K_{2^n} from dyadically translated dyadic Dirichlet kernels."""
    d = dirichlet_kernel(1 << n, N)
    acc = 2.0 ** (-n) * d.values
    for j in range(n + 1):
        acc = acc + 2.0 ** (j - n) * dyadic_translate(d, j).values
    return 0.5 * acc


def test_fejer_dyadic_closed_form():
    for N in range(0, 7):
        for n in range(N + 1):
            got = fejer_kernel(1 << n, N).values
            assert np.max(np.abs(got - fejer_dyadic_closed_form(n, N))) < 1e-12
    # spot value: K_2 on [1/2, 3/4) is 1/2
    assert fejer_kernel(2, 2).values[2] == pytest.approx(0.5, abs=1e-12)


def fejer_bound(n, N):
    """Cellwise upper bound for |K_n| built from dyadic Dirichlet kernels."""
    Np = n.bit_length()
    acc = np.zeros(1 << N)
    for j in range(Np):
        inner = np.zeros(1 << N)
        for i in range(j, Np):
            d = dirichlet_kernel(min(1 << i, 1 << N), N)
            inner += d.values + dyadic_translate(d, j).values
        acc += 2.0 ** (j - Np) * inner
    return acc


def test_fejer_kernel_bound_cellwise():
    N = 6
    for n in range(1, (1 << N) + 1):
        kernel = np.abs(fejer_kernel(n, N).values)
        assert np.all(kernel <= fejer_bound(n, N) + 1e-12)


# ---------------------------------------------------------------------------
# partial sums
# ---------------------------------------------------------------------------


def test_partial_sum_examples():
    f = random_grid(4, 11)
    assert np.allclose(partial_sum(f, 1).values, expectation(f), atol=1e-12)
    w2 = walsh_function(2, 4)
    assert np.allclose(partial_sum(w2, 3).values, w2.values, atol=1e-12)
    with pytest.raises(ValueError):
        partial_sum(f, 0)
    # beyond the band the partial sum is the function itself
    assert np.allclose(partial_sum(f, 100).values, f.values, atol=1e-12)


def test_partial_sum_dyadic_is_conditional_expectation():
    f = random_grid(5, 12)
    filt = Filtration.dyadic(5)
    for n in range(6):
        got = partial_sum(f, 1 << n).values
        want = cond_expectation(f, filt, n).values
        assert np.max(np.abs(got - want)) < 1e-12


def test_partial_sum_matches_kernel_convolution():
    # canonical spectral path against the D_n convolution path
    N = 4
    f = random_grid(N, 13)
    size = 1 << N
    for n in (1, 3, 7, 16):
        kernel = dirichlet_kernel(n, N)
        conv = np.empty(size)
        for i in range(size):
            translated = np.array([kernel.values[i ^ k] for k in range(size)])
            conv[i] = float(np.mean(f.values * translated))
        assert np.max(np.abs(partial_sum(f, n).values - conv)) < 1e-12


def test_transform_route_examples():
    f = random_grid(6, 14)
    filt = Filtration.dyadic(6)
    assert np.allclose(partial_sum_via_transform(f, 1).values, expectation(f), atol=1e-12)
    for level in range(7):
        got = partial_sum_via_transform(f, 1 << level).values
        assert np.max(np.abs(got - cond_expectation(f, filt, level).values)) < 1e-12
    for n in (3, 5, 7):
        diff = partial_sum_via_transform(f, n).values - partial_sum(f, n).values
        assert np.max(np.abs(diff)) < 1e-12
    with pytest.raises(ValueError):
        partial_sum_via_transform(f, 0)
    with pytest.raises(ValueError):
        partial_sum_via_transform(f, 65)


def test_transform_route_full_band():
    f = random_grid(4, 15)
    for n in range(1, 17):
        diff = partial_sum_via_transform(f, n).values - partial_sum(f, n).values
        assert np.max(np.abs(diff)) < 1e-10


# ---------------------------------------------------------------------------
# Fejér means and maximal functions
# ---------------------------------------------------------------------------


def test_fejer_mean_examples():
    c = GridFunction.constant(3.25, 3)
    assert np.allclose(fejer_mean(c, 5).values, 3.25, atol=1e-12)
    w1 = walsh_function(1, 3)
    assert np.allclose(fejer_mean(w1, 2).values, 0.5 * w1.values, atol=1e-12)
    for n in (2, 5, 9, 100):
        want = ((n - 1) / n) * w1.values
        assert np.allclose(fejer_mean(w1, n).values, want, atol=1e-12)
    with pytest.raises(ValueError):
        fejer_mean(c, 0)


def test_fejer_mean_matches_average_of_partial_sums():
    f = random_grid(4, 16)
    for n in (1, 2, 3, 5, 8, 16, 40):
        avg = np.mean([partial_sum(f, k).values for k in range(1, n + 1)], axis=0)
        assert np.max(np.abs(fejer_mean(f, n).values - avg)) < 1e-12


def test_fejer_maximal_examples():
    c = GridFunction.constant(-2.0, 3)
    assert np.allclose(fejer_maximal(c).values, 2.0, atol=1e-12)
    w1 = walsh_function(1, 3)
    assert np.allclose(fejer_maximal(w1).values, 1.0, atol=1e-12)
    f = random_grid(3, 17)
    assert np.all(fejer_maximal(f).values >= abs(expectation(f)) - 1e-12)


def test_fejer_maximal_matches_slow_oracle():
    # independent route: rebuild every mean in band from scratch, then account
    # for the tail with the |f| limit term
    for seed in range(4):
        f = random_grid(5, 20 + seed)
        best = np.abs(f.values).copy()
        for n in range(1, 33):
            best = np.maximum(best, np.abs(fejer_mean(f, n).values))
        assert np.max(np.abs(fejer_maximal(f).values - best)) < 1e-12


def test_fejer_maximal_dominates_out_of_band_means():
    f = random_grid(4, 30)
    star = fejer_maximal(f).values
    for n in (17, 40, 1000):
        assert np.all(np.abs(fejer_mean(f, n).values) <= star + 1e-12)


def test_sigma_dyadic_max_below_full_maximal():
    f = random_grid(5, 31)
    dyadic = sigma_dyadic_max(f).values
    full = fejer_maximal(f).values
    assert np.all(dyadic <= full + 1e-12)
    # and it dominates each dyadic-order mean
    for n in range(6):
        assert np.all(np.abs(fejer_mean(f, 1 << n).values) <= dyadic + 1e-12)


def test_fejer_norm_convergence_trend():
    from walshlab import VariableExponent, lp_norm

    N = 8
    f = GridFunction.indicator([i for i in range(1 << N) if i / (1 << N) < 1 / 3], N)
    exp = VariableExponent.affine(1.0, 1.0, N)
    errs = []
    for k in range(2, N + 1):
        diff = GridFunction(N, fejer_mean(f, 1 << k).values - f.values)
        errs.append(lp_norm(diff, exp))
    slope = np.polyfit(range(2, N + 1), errs, 1)[0]
    assert slope < 0
    assert errs[-1] < errs[0]
