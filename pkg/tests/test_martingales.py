"""Filtrations, conditional expectations, M/S/s operators, stopping times,
stopped martingales, regularity, martingale transforms."""

import math

import numpy as np
import pytest

from conftest import random_grid, random_martingale
from walshlab import (
    INF,
    Filtration,
    GridFunction,
    Martingale,
    StoppingTime,
    VariableExponent,
    cond_expectation,
    cond_square_function,
    doob_maximal,
    lp_norm,
    martingale_transform,
    regularity_constant,
    square_function,
    stopped_martingale,
)
from walshlab.martingales import (
    cond_square_levels,
    load_filtration,
    maximal_levels,
    save_filtration,
    square_levels,
)
from walshlab.walsh import rademacher

SQ2 = math.sqrt(2.0)
SQ6 = math.sqrt(6.0)


def spike_martingale():
    return Martingale(Filtration.dyadic(2), GridFunction(2, [4.0, 0.0, 0.0, 0.0]))


# ---------------------------------------------------------------------------
# filtration construction
# ---------------------------------------------------------------------------


def test_dyadic_filtration_shape():
    filt = Filtration.dyadic(3)
    assert [len(level) for level in filt.levels] == [1, 2, 4, 8]
    assert filt.levels[1][1].tolist() == [4, 5, 6, 7]
    assert regularity_constant(filt) == 2.0


def test_filtration_validation():
    size4 = list(range(4))
    with pytest.raises(ValueError):  # wrong level count
        Filtration(2, [[size4], [size4]])
    with pytest.raises(ValueError):  # level 0 not trivial
        Filtration(1, [[[0], [1]], [[0], [1]]])
    with pytest.raises(ValueError):  # overlap
        Filtration(1, [[[0, 1]], [[0, 1], [1]]])
    with pytest.raises(ValueError):  # not covering
        Filtration(1, [[[0, 1]], [[0]]])
    with pytest.raises(ValueError):  # top level must be singletons
        Filtration(1, [[[0, 1]], [[0, 1]]])
    # non-interval atoms are fine as long as each refines its parent
    Filtration(2, [[size4], [[0, 3], [1, 2]], [[0], [1], [2], [3]]])
    with pytest.raises(ValueError):  # refinement broken: {3,4} straddles parents
        Filtration(
            3,
            [
                [list(range(8))],
                [[0, 1, 2, 3], [4, 5, 6, 7]],
                [[0, 1, 2], [3, 4], [5], [6, 7]],
                [[i] for i in range(8)],
            ],
        )


def test_general_filtration_one_shot_split():
    # split the whole interval into cells only at the last step
    levels = [[list(range(4))], [list(range(4))], [[0], [1], [2], [3]]]
    filt = Filtration(2, levels)
    assert regularity_constant(filt) == 4.0


def test_regularity_depth_zero_is_one():
    assert regularity_constant(Filtration.dyadic(0)) == 1.0


def test_filtration_file_round_trip(tmp_path):
    filt = Filtration(2, [[list(range(4))], [[0, 1], [2, 3]], [[0], [1], [2], [3]]])
    path = tmp_path / "filt.json"
    save_filtration(filt, path)
    back = load_filtration(str(path))
    assert [[a.tolist() for a in lv] for lv in back.levels] == [
        [[0, 1, 2, 3]],
        [[0, 1], [2, 3]],
        [[0], [1], [2], [3]],
    ]
    dyadic = load_filtration({"resolution": 3, "kind": "dyadic"})
    assert len(dyadic.levels[3]) == 8


# ---------------------------------------------------------------------------
# conditional expectation and the three operators
# ---------------------------------------------------------------------------


def test_cond_expectation_examples():
    filt = Filtration.dyadic(2)
    f = GridFunction(2, [4.0, 0.0, 0.0, 0.0])
    assert cond_expectation(f, filt, 1).values.tolist() == [2.0, 2.0, 0.0, 0.0]
    assert cond_expectation(f, filt, 2).values.tolist() == f.values.tolist()
    assert cond_expectation(f, filt, 0).values.tolist() == [1.0] * 4
    with pytest.raises(ValueError):
        cond_expectation(f, filt, 3)


def test_doob_maximal_examples():
    m = spike_martingale()
    assert doob_maximal(m).values.tolist() == [4.0, 2.0, 1.0, 1.0]
    assert doob_maximal(m, upto=1).values.tolist() == [2.0, 2.0, 1.0, 1.0]
    const = Martingale(Filtration.dyadic(2), GridFunction.constant(-5.0, 2))
    assert doob_maximal(const).values.tolist() == [5.0] * 4
    # always dominates |E f|
    for seed in range(5):
        m2 = random_martingale(4, seed)
        assert np.all(doob_maximal(m2).values >= np.abs(m2.level_values(0)) - 1e-15)


def test_square_function_examples():
    n1 = Martingale(Filtration.dyadic(1), rademacher(0, 1))
    assert np.allclose(square_function(n1).values, 1.0)
    assert np.allclose(cond_square_function(n1).values, 1.0)
    const = Martingale(Filtration.dyadic(2), GridFunction.constant(-2.0, 2))
    assert np.allclose(square_function(const).values, 2.0)
    assert np.allclose(cond_square_function(const).values, 2.0)
    m = spike_martingale()
    assert np.allclose(square_function(m).values, [SQ6, SQ6, SQ2, SQ2])
    assert np.allclose(cond_square_function(m).values, [SQ6, SQ6, SQ2, SQ2])


def test_difference_telescoping():
    m = random_martingale(5, 11)
    total = np.sum(m.difference_values(), axis=0)
    assert np.allclose(total, m.terminal.values, atol=1e-12)


def test_energy_identity():
    for seed in range(8):
        m = random_martingale(6, seed)
        diffs = m.difference_values()
        energy = sum(float(np.mean(d * d)) for d in diffs)
        s2 = float(np.mean(square_function(m).values ** 2))
        cs2 = float(np.mean(cond_square_function(m).values ** 2))
        assert s2 == pytest.approx(energy, abs=1e-12)
        assert cs2 == pytest.approx(energy, abs=1e-12)


def test_square_bounded_by_cond_square_times_sqrt_regularity():
    for seed in range(8):
        m = random_martingale(6, 50 + seed)
        assert np.all(
            square_function(m).values <= SQ2 * cond_square_function(m).values + 1e-12
        )


def test_running_levels_are_monotone():
    m = random_martingale(5, 21)
    for rows in (maximal_levels(m), square_levels(m), cond_square_levels(m)):
        assert rows.shape == (6, 32)
        assert np.all(np.diff(rows, axis=0) >= -1e-15)


# ---------------------------------------------------------------------------
# stopping times and stopped martingales
# ---------------------------------------------------------------------------


def test_stopping_time_validation():
    filt = Filtration.dyadic(2)
    StoppingTime(filt, [1, 1, INF, INF])  # {tau=1} = left half: measurable
    with pytest.raises(ValueError):  # {tau=0} must be all of the interval
        StoppingTime(filt, [0, 0, INF, INF])
    with pytest.raises(ValueError):  # {tau=1} = {cell 1} is not a half
        StoppingTime(filt, [2, 1, INF, INF])
    with pytest.raises(ValueError):  # -1 must be everywhere or nowhere
        StoppingTime(filt, [-1, 2, 2, 2])
    with pytest.raises(ValueError):  # out of range
        StoppingTime(filt, [5, 5, 5, 5])
    tau = StoppingTime.constant(filt, 0)
    assert tau.values.tolist() == [0, 0, 0, 0]
    assert StoppingTime(filt, [1, 1, INF, INF]).finite_mask().tolist() == [
        True, True, False, False,
    ]


def test_stopped_martingale_examples():
    m = spike_martingale()
    filt = m.filtration
    assert stopped_martingale(m, StoppingTime.constant(filt, INF)).terminal.values.tolist() == [
        4.0, 0.0, 0.0, 0.0,
    ]
    assert stopped_martingale(m, StoppingTime.constant(filt, 0)).terminal.values.tolist() == [
        1.0, 1.0, 1.0, 1.0,
    ]
    tau = StoppingTime(filt, [1, 1, INF, INF])
    assert stopped_martingale(m, tau).terminal.values.tolist() == [2.0, 2.0, 0.0, 0.0]
    pre = StoppingTime.constant(filt, -1)
    assert stopped_martingale(m, pre).terminal.values.tolist() == [0.0] * 4


def test_stopped_martingale_revalidates_foreign_tau():
    # tau stopping at level 1 on the left half is fine for the dyadic
    # filtration but not for one whose level 1 is still trivial
    tau = StoppingTime(Filtration.dyadic(2), [1, 1, INF, INF])
    other = Filtration(2, [[list(range(4))], [list(range(4))], [[0], [1], [2], [3]]])
    m = Martingale(other, GridFunction(2, [4.0, 0.0, 0.0, 0.0]))
    with pytest.raises(ValueError):
        stopped_martingale(m, tau)


# ---------------------------------------------------------------------------
# martingale transforms
# ---------------------------------------------------------------------------


def test_transform_zero_and_identity():
    m = random_martingale(4, 31)
    zeros = [GridFunction.constant(0.0, 4)] * 4
    assert np.allclose(martingale_transform(m, zeros).terminal.values, 0.0)
    ones = [GridFunction.constant(1.0, 4)] * 4
    expect = m.terminal.values - m.level_values(0)
    assert np.allclose(martingale_transform(m, ones).terminal.values, expect, atol=1e-12)


def test_transform_contracts_square_function():
    m = random_martingale(5, 32)
    rng = np.random.default_rng(0)
    mults = []
    for k in range(1, 6):
        vals = rng.uniform(-1.0, 1.0, 1 << (k - 1))
        mults.append(GridFunction(5, np.repeat(vals, 1 << (5 - k + 1))))
    t = martingale_transform(m, mults)
    assert np.all(square_function(t).values <= square_function(m).values + 1e-12)


def test_transform_validation():
    m = random_martingale(3, 33)
    with pytest.raises(ValueError):  # wrong count
        martingale_transform(m, [GridFunction.constant(1.0, 3)] * 2)
    with pytest.raises(ValueError):  # exceeds 1
        martingale_transform(m, [GridFunction.constant(1.5, 3)] * 3)
    bad = [np.ones(8), np.ones(8), np.arange(8) / 8.0]  # last not level-2 measurable
    with pytest.raises(ValueError):
        martingale_transform(m, bad)


# ---------------------------------------------------------------------------
# classical Doob bound, single-resolution sanity versions
# ---------------------------------------------------------------------------


def test_doob_constant_exponent_bound():
    for p in (1.5, 2.0, 4.0):
        exp = VariableExponent.constant(p, 7)
        bound = p / (p - 1.0)
        for seed in range(10):
            m = random_martingale(7, seed)
            ratio = lp_norm(doob_maximal(m), exp) / lp_norm(m.terminal, exp)
            assert ratio <= bound + 1e-9


def test_dual_doob_sum_bounded():
    # sum of conditional expectations of non-negative functions, single N
    exp = VariableExponent.split(8.0, 1.1, 6)
    filt = Filtration.dyadic(6)
    rng = np.random.default_rng(5)
    for _ in range(5):
        thetas = [rng.uniform(0.0, 1.0, 64) for _ in range(7)]
        summed = np.zeros(64)
        for n, th in enumerate(thetas):
            summed += filt.condexp_values(th, n)
        num = lp_norm(GridFunction(6, summed), exp)
        den = lp_norm(GridFunction(6, np.sum(thetas, axis=0)), exp)
        assert num <= 4.0 * den  # loose sanity bound; stability is asserted in acceptance
