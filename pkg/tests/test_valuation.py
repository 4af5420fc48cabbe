import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairval.errors import FairvalWarning, GroupSupportError, KindError
from fairval.knn_shapley import ContributionMatrix, KnnConfig, pairwise_contributions
from fairval.tabular import Dataset
from fairval.valuation import (
    Valuation,
    compute_valuation,
    orient_for_reweighting,
    phi_acc,
    phi_complement,
    phi_eodds,
    phi_eop,
    phi_eop_label_sensitive,
    phi_eop_multigroup,
    phi_rate,
)

from oracles import knn_statistics


def cm(values):
    v = np.asarray(values, float)
    return ContributionMatrix(v, 1, np.arange(v.shape[0]), np.arange(v.shape[1]))


def ref(labels, groups, names=None):
    labels = np.asarray(labels)
    return Dataset(np.zeros((len(labels), 1)), labels, np.asarray(groups), group_names=names or {0: "a", 1: "b"})


def test_phi_acc_examples():
    assert phi_acc(cm([[1.0]])).values.tolist() == [1.0]
    assert np.allclose(phi_acc(cm([[0.2, 0.4], [0.0, 0.2]])).values, [0.3, 0.1])
    assert np.allclose(phi_acc(cm([[1 / 3], [-2 / 3], [1 / 3]])).values, [1 / 3, -2 / 3, 1 / 3])


def test_phi_rate_examples():
    phi = cm([[0.2, 0.4, 0.1, 0.0], [0.0, 0.2, 0.3, 0.1]])
    r = ref([1, 1, 1, 0], [0, 0, 1, 1])
    a = phi_rate(phi, r, y=1, a="a")
    b = phi_rate(phi, r, y=1, a="b")
    assert np.allclose(a.values, [0.3, 0.1]) and a.kind == "TPRa"
    assert np.allclose(b.values, [0.1, 0.3])
    with pytest.raises(GroupSupportError):
        phi_rate(phi, r, y=1, a="c")
    everyone = ref([1, 1], [0, 1])
    p2 = cm([[0.2, 0.4], [0.0, 0.2]])
    assert np.array_equal(phi_rate(p2, everyone, y=1).values, phi_acc(p2).values)


def test_complement_examples():
    v = Valuation([0.25] * 4, "TPR")
    assert np.allclose(phi_complement(v, 4).values, 0.0)
    f = phi_complement(Valuation([0.3, 0.1], "TNRa"), 2)
    assert np.allclose(f.values, [0.2, 0.4]) and f.kind == "FPRa"
    back = phi_complement(f, 2)
    assert back.kind == "TNRa" and np.allclose(back.values, [0.3, 0.1], atol=1e-15)
    with pytest.raises(KindError):
        phi_complement(Valuation([0.1], "EOp"), 1)


def test_label_sensitive_examples():
    # columns: y=1 | y=0, so phi(TPR) and phi(TNR) are the columns
    v = phi_eop_label_sensitive(cm([[0.4, 0.0], [0.0, 0.2]]), ref([1, 0], [1, 0]))
    assert np.allclose(v.values, [0.2, 0.1])
    same = phi_eop_label_sensitive(cm([[0.3, 0.3], [0.1, 0.1]]), ref([1, 0], [1, 0]))
    assert np.allclose(same.values, [0.3, 0.1])
    with pytest.raises(GroupSupportError):
        phi_eop_label_sensitive(cm([[0.3, 0.3]]), Dataset(np.zeros((2, 1)), [1, 1], [0, 0]))


def test_eop_and_eodds_examples():
    phi = cm([[0.2, 0.4, 0.1, 0.0], [0.0, 0.2, 0.3, 0.1]])
    r = ref([1, 1, 1, 0], [0, 0, 1, 1])
    assert np.allclose(phi_eop(phi, r, ("a", "b")).values, [0.2, -0.2])
    # TPR gap [0.2, -0.2], TNR gap [0.1, 0.1]
    phi2 = cm([[0.3, 0.1, 0.2, 0.1], [0.1, 0.3, 0.2, 0.1]])
    r2 = ref([1, 1, 0, 0], [0, 1, 0, 1])
    assert np.allclose(phi_eodds(phi2, r2).values, [0.05, -0.15])
    sym = cm([[0.3, 0.3, 0.1, 0.1]])
    assert np.allclose(phi_eop(sym, r2).values, 0) and np.allclose(phi_eodds(sym, r2).values, 0)


def test_eodds_complement_form_equals_tnr_gap_form():
    rng = np.random.default_rng(0)
    phi = cm(rng.normal(size=(30, 12)))
    r = ref(rng.permutation([0, 1] * 6), rng.permutation([0, 1] * 6))
    ta, tb = (phi_rate(phi, r, 1, g).values for g in (0, 1))
    na, nb = (phi_rate(phi, r, 0, g).values for g in (0, 1))
    assert np.abs(phi_eodds(phi, r).values - 0.5 * ((ta - tb) - (na - nb))).max() <= 1e-12


def test_eodds_needs_all_cells():
    with pytest.raises(GroupSupportError):
        phi_eodds(cm([[0.1, 0.2, 0.3]]), ref([1, 1, 0], [0, 1, 0]))


def test_multigroup_picks_largest_gap():
    # per-group TPRs 0.9, 0.8, 0.2 with sizes 4, 2, 2 give a pooled TPR of 0.7
    cols = [0.9] * 4 + [0.8] * 2 + [0.2] * 2
    phi = cm(np.array([cols]))
    r = Dataset(np.zeros((8, 1)), [1] * 8, [0] * 4 + [1] * 2 + [2] * 2, group_names={0: "x", 1: "y", 2: "z"})
    v = phi_eop_multigroup(phi, r)
    assert phi_rate(phi, r, 1).total == pytest.approx(0.7)
    assert v.group_spec["a"] == 2
    assert v.values[0] == pytest.approx(0.2 - 0.7)


def test_multigroup_two_groups_and_ties():
    rng = np.random.default_rng(1)
    phi = cm(rng.normal(size=(5, 8)))
    r = ref([1] * 8, [0, 0, 0, 1, 1, 1, 1, 1])
    v = phi_eop_multigroup(phi, r)
    pooled = phi_rate(phi, r, 1).total
    tprs = [phi_rate(phi, r, 1, g).total for g in (0, 1)]
    assert abs(v.total) == pytest.approx(max(abs(t - pooled) for t in tprs), abs=1e-12)
    same = phi_eop_multigroup(cm(np.ones((2, 4))), ref([1] * 4, [0, 0, 1, 1]))
    assert same.group_spec["a"] == 0 and np.allclose(same.values, 0)


def test_multigroup_support_rules():
    phi = cm(np.ones((2, 4)))
    r = Dataset(np.zeros((4, 1)), [1, 1, 0, 0], [0, 1, 2, 2], group_names={0: "x", 1: "y", 2: "z"})
    with pytest.warns(FairvalWarning):
        v = phi_eop_multigroup(phi, r)
    assert v.group_spec["a"] in (0, 1)
    r1 = Dataset(np.zeros((4, 1)), [1, 1, 0, 0], [0, 0, 1, 1])
    with pytest.raises(GroupSupportError), warnings.catch_warnings():
        warnings.simplefilter("ignore", FairvalWarning)
        phi_eop_multigroup(phi, r1)


def test_orientation_rules():
    r = ref([1, 1], [0, 1])
    hi_a = cm([[0.6, 0.1], [0.2, 0.1]])  # TPR_a 0.8 > TPR_b 0.2
    v = Valuation([0.2, -0.2], "EOp", {"a": 0, "b": 1})
    o = orient_for_reweighting(v, hi_a, r)
    assert o.values.tolist() == [-0.2, 0.2] and o.oriented
    assert np.array_equal(np.argsort(o.values), np.argsort(v.values)[::-1])
    lo_a = cm([[0.1, 0.6], [0.1, 0.2]])
    o = orient_for_reweighting(v, lo_a, r)
    assert o.values.tolist() == [0.2, -0.2] and o.oriented
    with pytest.warns(FairvalWarning):
        o = orient_for_reweighting(v, cm([[0.5, 0.5], [0.1, 0.1]]), r)
    assert o.values.tolist() == [0.2, -0.2]
    with pytest.raises(KindError):
        orient_for_reweighting(Valuation([0.1, 0.2], "Acc"), hi_a, r)


def random_instance(rng, n, m):
    X, R = rng.normal(size=(n, 2)), rng.normal(size=(m, 2))
    y, a = rng.integers(0, 2, n), rng.integers(0, 2, n)
    # every (label, group) cell of the reference gets at least one point
    yr = np.concatenate([[0, 0, 1, 1], rng.integers(0, 2, m - 4)])
    ar = np.concatenate([[0, 1, 0, 1], rng.integers(0, 2, m - 4)])
    return Dataset(X, y, a), Dataset(R, yr, ar)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 80), m=st.integers(4, 20), k=st.integers(1, 5), seed=st.integers(0, 2**32 - 1))
def test_efficiency_against_direct_votes(n, m, k, seed):
    train, r = random_instance(np.random.default_rng(seed), n, m)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FairvalWarning)
        phi = pairwise_contributions(train, r, KnnConfig(k))
    want = knn_statistics(
        train.features.tolist(), train.labels.tolist(), train.protected.tolist(),
        r.features.tolist(), r.labels.tolist(), r.protected.tolist(), k,
    )
    got = {
        "Acc": phi_acc(phi).total,
        "TPR": phi_rate(phi, r, 1).total,
        "TNR": phi_rate(phi, r, 0).total,
        "TPRa": phi_rate(phi, r, 1, 0).total,
        "TNRa": phi_rate(phi, r, 0, 0).total,
        "EOp": phi_eop(phi, r).total,
        "EOdds": phi_eodds(phi, r).total,
    }
    for key in want:
        assert abs(got[key] - want[key]) <= 1e-9, key
    bal = phi_eop_label_sensitive(phi, r).total
    assert abs(bal - (want["TPR"] + want["TNR"]) / 2) <= 1e-9


def test_linearity_recomputed_from_columns():
    rng = np.random.default_rng(2)
    train, r = random_instance(rng, 30, 10)
    phi = pairwise_contributions(train, r)
    cols_a = (r.labels == 1) & (r.protected == 0)
    cols_b = (r.labels == 1) & (r.protected == 1)
    direct = phi.values[:, cols_a].mean(axis=1) - phi.values[:, cols_b].mean(axis=1)
    assert np.abs(phi_eop(phi, r).values - direct).max() <= 1e-15


def test_additivity_over_reference_partition():
    rng = np.random.default_rng(3)
    train, r = random_instance(rng, 40, 12)
    phi = pairwise_contributions(train, r)
    first = np.arange(12) < 5
    p1 = pairwise_contributions(train, r.subset(np.flatnonzero(first)))
    p2 = pairwise_contributions(train, r.subset(np.flatnonzero(~first)))
    whole = phi_acc(phi).values
    parts = (5 * phi_acc(p1).values + 7 * phi_acc(p2).values) / 12
    assert np.abs(whole - parts).max() <= 1e-12


def test_duplicate_symmetry_reaches_valuations():
    rng = np.random.default_rng(4)
    train, r = random_instance(rng, 20, 8)
    X = np.vstack([train.features, train.features[3]])
    dup = Dataset(X, np.append(train.labels, train.labels[3]), np.append(train.protected, train.protected[3]))
    phi = pairwise_contributions(dup, r)
    for kind in ("acc", "eop", "eodds", "eop-ay"):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", FairvalWarning)
            v = compute_valuation(kind, phi, r).values
        assert abs(v[3] - v[-1]) <= 1e-12


def test_unknown_kind():
    with pytest.raises(KindError):
        compute_valuation("dp", cm([[0.1]]), ref([1], [0]))
    with pytest.raises(KindError):
        Valuation([0.0], "DP")
