import numpy as np
import pytest

from fairval import german
from fairval.errors import ParameterError
from fairval.synthetic import case1_means, synth_case1, synth_two_gaussians


def test_two_gaussians_shape_and_balance():
    d = synth_two_gaussians(50, [[0, 0], [2, 2]], [np.eye(2), np.eye(2)], seed=1)
    assert d.n == 100
    assert np.bincount(d.labels).tolist() == [50, 50]
    assert np.array_equal(d.protected, d.labels)


def test_two_gaussians_reproducible():
    args = (20, [[0, 0], [1, 1]], [np.eye(2), 0.5 * np.eye(2)])
    a, b = synth_two_gaussians(*args, seed=7), synth_two_gaussians(*args, seed=7)
    assert a.features.tobytes() == b.features.tobytes()


def test_two_gaussians_rejects_non_pd():
    with pytest.raises(ParameterError):
        synth_two_gaussians(10, [[0, 0], [1, 1]], [np.eye(2), [[1, 2], [2, 1]]])


def test_identical_classes_are_not_separable():
    from fairval.model import ModelSpec, train_weighted

    d = synth_two_gaussians(2000, [[0, 0], [0, 0]], [np.eye(2), np.eye(2)], seed=3)
    acc = np.mean(train_weighted(ModelSpec(), d).predict(d.features) == d.labels)
    assert abs(acc - 0.5) < 0.05


def test_case1_cells_and_geometry():
    d = synth_case1(400, 0.3, seed=0)
    for g in (0, 1):
        for y in (0, 1):
            assert np.any((d.protected == g) & (d.labels == y))
    m = case1_means(0.3)
    # the overlapping clusters are overlap * (unit-square diagonal) apart
    assert np.linalg.norm(m[(1, 0)] - m[(0, 1)]) == pytest.approx(0.3 * np.sqrt(2))
    assert synth_case1(400, 0.3, 5).features.tobytes() == synth_case1(400, 0.3, 5).features.tobytes()


def test_case1_preconditions():
    with pytest.raises(ParameterError):
        synth_case1(39)
    with pytest.raises(ParameterError):
        synth_case1(100, overlap=1.0)


def test_case1_unweighted_model_favours_group_one():
    from fairval.metrics import fairness_report
    from fairval.model import ModelSpec, train_weighted
    from fairval.tabular import stratified_split

    favoured = 0
    for seed in range(50):
        s = stratified_split(synth_case1(2000, 0.3, seed), seed=seed)
        pred = train_weighted(ModelSpec(), s.train).predict(s.test.features)
        favoured += fairness_report(s.test.labels, pred, s.test.protected, 1, 1, 0).eop > 0
    assert favoured >= 45


def test_german_cell_counts():
    d = german.load_german("sex")
    assert d.n == 1000 and d.d == 11
    counts = {
        (d.group_names[g], d.label_names[y]): int(np.sum((d.protected == g) & (d.labels == y)))
        for g in (0, 1)
        for y in (0, 1)
    }
    assert counts == {("male", "bad"): 191, ("male", "good"): 499, ("female", "bad"): 109, ("female", "good"): 201}
    a = german.load_german("age")
    young = a.group_id("<=25")
    assert int(np.sum((a.protected == young) & (a.labels == 1))) == 110
    assert int(np.sum((a.protected == young) & (a.labels == 0))) == 80
