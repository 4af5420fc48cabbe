import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fairval.errors import FairvalWarning, GroupSupportError, ParameterError
from fairval.reweighting import Weights, group_reweigh, interpolate, minmax_normalize_to_weights, uniform
from fairval.tabular import Dataset
from fairval.valuation import Valuation


def test_minmax_example():
    w = minmax_normalize_to_weights(Valuation([0.0, 1.0, 3.0], "Acc"))
    assert np.allclose(w.values, [0, 0.75, 2.25], atol=1e-15)
    assert w.values.sum() == pytest.approx(3.0, abs=1e-12)


def test_constant_valuation_is_uniform():
    with pytest.warns(FairvalWarning):
        w = minmax_normalize_to_weights(Valuation([0.2, 0.2, 0.2], "EOp"))
    assert w.values.tolist() == [1.0, 1.0, 1.0]


def test_minmax_needs_two_points():
    with pytest.raises(ParameterError):
        minmax_normalize_to_weights(Valuation([0.5], "Acc"))


finite = st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False)


@settings(max_examples=200, deadline=None)
@given(v=arrays(np.float64, st.integers(2, 40), elements=finite), c=st.floats(-2, 2))
def test_normalization_properties(v, c):
    if np.ptp(v) < 1e-6:
        return
    w = minmax_normalize_to_weights(Valuation(v, "Acc")).values
    assert abs(w.sum() - len(v)) <= 1e-9
    assert np.all(w >= 0) and np.all(w <= len(v))
    # monotone map: no pair swaps order and ties stay tied (tiny gaps may round to a tie)
    sv, sw = np.sign(np.subtract.outer(v, v)), np.sign(np.subtract.outer(w, w))
    assert np.all(sv * sw >= 0) and np.all(sw[sv == 0] == 0)
    shifted = minmax_normalize_to_weights(Valuation(v + c, "Acc")).values
    assert np.allclose(shifted, w, atol=1e-6)


def test_interpolate_examples():
    w = Weights([0.0, 0.75, 2.25])
    assert interpolate(w, 0).values.tolist() == [1.0, 1.0, 1.0]
    assert interpolate(w, 1).values.tolist() == [0.0, 0.75, 2.25]
    assert np.allclose(interpolate(w, 0.5).values, [0.5, 0.875, 1.625], atol=1e-15)
    for bad in (-0.1, 1.1):
        with pytest.raises(ParameterError):
            interpolate(w, bad)


@settings(max_examples=100, deadline=None)
@given(v=arrays(np.float64, st.integers(2, 30), elements=finite), alpha=st.floats(0, 1))
def test_interpolate_keeps_the_sum(v, alpha):
    if np.ptp(v) < 1e-6:
        return
    w = interpolate(minmax_normalize_to_weights(Valuation(v, "Acc")), alpha)
    assert abs(w.values.sum() - len(v)) <= 1e-9 and np.all(w.values >= 0)


def cells(counts):
    a, y = [], []
    for (g, lab), n in counts.items():
        a += [g] * n
        y += [lab] * n
    return Dataset(np.zeros((len(a), 1)), np.array(y), np.array(a))


def test_group_rw_balanced_is_one():
    w = group_reweigh(cells({(0, 0): 5, (0, 1): 5, (1, 0): 5, (1, 1): 5}))
    assert np.allclose(w.values, 1.0)


def test_group_rw_hand_values():
    d = cells({(0, 1): 30, (0, 0): 10, (1, 1): 10, (1, 0): 50})
    w = group_reweigh(d).values
    got = {(g, y): w[(d.protected == g) & (d.labels == y)] for g in (0, 1) for y in (0, 1)}
    assert np.allclose(got[(0, 1)], 8 / 15)
    assert np.allclose(got[(1, 0)], 0.72)
    assert np.allclose(got[(0, 0)], 2.4)
    assert np.allclose(got[(1, 1)], 2.4)
    assert w.sum() == pytest.approx(100.0, abs=1e-9)
    assert group_reweigh(d).source_kind == "group-rw"


def test_group_rw_empty_cell():
    with pytest.raises(GroupSupportError):
        group_reweigh(cells({(0, 0): 3, (0, 1): 3, (1, 1): 3}))


def test_weights_validation():
    with pytest.raises(ParameterError):
        Weights([1.0, -0.1])
    with pytest.raises(ParameterError):
        Weights([1.0, np.inf])
    assert uniform(4).values.tolist() == [1.0] * 4
