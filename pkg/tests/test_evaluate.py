import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from entangle_ssl import datagen as dg
from entangle_ssl import evaluate as ev
from entangle_ssl import nn
from oracles import auc_pairs


def _constant_model(d, c, favourite):
    """Network whose output ignores the input and prefers class ``favourite``."""
    m = nn.mlp_new((d, 3, c), 0)
    bias = np.zeros(c)
    bias[favourite] = 5.0
    return nn.Mlp(m.layer_dims, [m.weights[0] * 0, m.weights[1] * 0], [m.biases[0], bias])


def _balanced(n, d=4, c=2, seed=0):
    rng = np.random.default_rng(seed)
    return dg.Dataset(rng.normal(size=(n, d)), np.arange(n) % c, c, "toy", seed)


def _curve_invariants(curve):
    fpr, tpr, alpha = curve.arrays()
    assert (fpr[0], tpr[0]) == (0, 0) and (fpr[-1], tpr[-1]) == (1, 1)
    assert np.all(np.diff(fpr) >= 0) and np.all(np.diff(tpr) >= 0)
    assert np.all(np.diff(alpha) < 0)
    assert 0 <= curve.auc <= 1
    assert abs(curve.auc - np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2)) <= 1e-12


def test_accuracy_of_constant_model():
    test = _balanced(100)
    overall, per = ev.accuracy(_constant_model(4, 2, 0), test)
    assert overall == 0.5 and per == [1.0, 0.0]


def test_accuracy_perfect_model():
    # a network that copies one-hot features into its logits
    x = np.eye(3)[np.arange(30) % 3]
    test = dg.Dataset(x, np.arange(30) % 3, 3, "toy", 0)
    m = nn.Mlp((3, 3, 3), [np.eye(3), np.eye(3)], [np.zeros(3), np.zeros(3)])
    assert ev.accuracy(m, test) == (1.0, [1.0, 1.0, 1.0])
    assert ev.micro_roc(m, test).auc == 1.0


def test_accuracy_is_weighted_mean_of_per_class():
    rng = np.random.default_rng(3)
    labels = rng.integers(0, 3, size=157)
    test = dg.Dataset(rng.normal(size=(157, 5)), labels, 3, "toy", 0)
    m = nn.mlp_new((5, 7, 3), 1)
    overall, per = ev.accuracy(m, test)
    weights = np.bincount(labels, minlength=3) / len(labels)
    assert abs(overall - np.dot(weights, per)) <= 1e-12


def test_accuracy_rejects_empty_and_unlabeled():
    m = nn.mlp_new((4, 3, 2), 0)
    with pytest.raises(ValueError):
        ev.accuracy(m, dg.empty_dataset(4, 2))
    with pytest.raises(ValueError):
        ev.accuracy(m, _balanced(10).without_labels())


def test_accuracy_does_not_mutate():
    test = _balanced(20)
    m = nn.mlp_new((4, 3, 2), 0)
    f, m0 = test.features.copy(), m.copy()
    ev.accuracy(m, test)
    ev.micro_roc(m, test)
    assert np.array_equal(f, test.features) and m.same_as(m0)


def test_roc_examples():
    assert ev.roc_auc([0.9, 0.8, 0.4, 0.3], [1, 1, 0, 0]).auc == 1.0
    assert ev.roc_auc([0.9, 0.8, 0.4, 0.3], [1, 0, 1, 0]).auc == pytest.approx(0.75, abs=1e-15)
    flat = ev.roc_auc([0.5] * 6, [1, 0, 1, 0, 0, 1])
    assert flat.auc == 0.5
    assert [(p[0], p[1]) for p in flat.points] == [(0, 0), (1, 1)]


def test_roc_ties_form_single_steps():
    curve = ev.roc_auc([0.9, 0.5, 0.5, 0.1], [1, 1, 0, 0])
    assert [(p[0], p[1]) for p in curve.points] == [(0, 0), (0, 0.5), (0.5, 1), (1, 1)]
    assert curve.auc == 0.875
    _curve_invariants(curve)


def test_roc_rejects_single_class():
    with pytest.raises(ValueError):
        ev.roc_auc([0.1, 0.2], [1, 1])
    with pytest.raises(ValueError):
        ev.roc_auc([0.1, 0.2], [0, 2])


@pytest.mark.parametrize("seed", range(100))
def test_auc_equals_pair_statistic(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 201))
    labels = rng.integers(0, 2, size=n)
    labels[:2] = [0, 1]
    # coarse scores so that ties actually occur
    scores = np.round(rng.uniform(size=n), int(rng.integers(1, 4)))
    curve = ev.roc_auc(scores, labels)
    assert abs(curve.auc - auc_pairs(scores, labels)) <= 1e-10
    _curve_invariants(curve)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(-40, 40), st.booleans()), min_size=2, max_size=60))
def test_auc_monotone_transform_invariance(pairs):
    # scores on a coarse grid so every transform stays strictly monotone in floating point
    scores = np.array([p[0] for p in pairs]) / 8
    labels = np.array([int(p[1]) for p in pairs])
    if len(set(labels)) < 2:
        labels[0], labels[1] = 0, 1
    base = ev.roc_auc(scores, labels)
    for f in (np.exp, lambda s: 3 * s - 7, np.arctan, lambda s: s**3):
        assert abs(ev.roc_auc(f(scores), labels).auc - base.auc) <= 1e-12
    _curve_invariants(base)


def test_micro_roc_uniform_model_is_chance():
    rng = np.random.default_rng(0)
    test = dg.Dataset(rng.normal(size=(1000, 4)), rng.integers(0, 3, size=1000), 3, "toy", 0)
    m = nn.mlp_new((4, 3, 3), 0)
    flat = nn.Mlp(m.layer_dims, [w * 0 for w in m.weights], m.biases)
    assert abs(ev.micro_roc(flat, test).auc - 0.5) <= 0.02


def test_micro_roc_pools_one_vs_rest_pairs(rng):
    prob = rng.dirichlet(np.ones(3), size=80)
    labels = rng.integers(0, 3, size=80)
    pooled = ev.micro_roc_from_probs(prob, labels)
    onehot = np.eye(3)[labels]
    assert abs(pooled.auc - auc_pairs(prob.ravel(), onehot.ravel())) <= 1e-10
    _curve_invariants(pooled)


def test_micro_roc_binary_is_class_one_roc():
    test = _balanced(60, seed=4)
    m = nn.mlp_new((4, 6, 2), 2)
    p1 = nn.forward(m, test.features)[:, 1]
    assert ev.micro_roc(m, test).points == ev.roc_auc(p1, test.labels).points


def test_pooling_is_not_class_one_roc_for_two_classes():
    # why binary inputs are special-cased: pooling also compares p1 of one
    # sample with p0 of another, which a perfect but uncalibrated ranking fails
    prob = np.array([[0.7, 0.3], [0.8, 0.2]])
    labels = np.array([1, 0])
    assert ev.roc_auc(prob[:, 1], labels).auc == 1.0
    assert ev.roc_auc(prob.ravel(), np.eye(2)[labels].ravel()).auc == 0.75


def test_class_rocs_shape():
    test = _balanced(30, c=3)
    curves = ev.class_rocs(nn.mlp_new((4, 5, 3), 0), test)
    assert len(curves) == 3
    for c in curves:
        _curve_invariants(c)


def test_roc_csv_round_trip(tmp_path, rng):
    curve = ev.roc_auc(rng.uniform(size=50), np.arange(50) % 2)
    ev.write_roc_csv(tmp_path / "roc.csv", curve)
    back = ev.read_roc_csv(tmp_path / "roc.csv")
    assert back.points == curve.points and back.auc == curve.auc
    assert (tmp_path / "roc.csv").read_text().splitlines()[0] == "alpha,fpr,tpr"


def test_relative_error_examples():
    assert ev.relative_error(0.2, 0.2) == 0
    assert round(ev.relative_error(0.2022, 0.2), 3) == 0.011
    assert round(ev.relative_error(0.2262, 0.2), 3) == 0.131
    with pytest.raises(ValueError):
        ev.relative_error(0.1, 0)


def test_oracle_labeler_recovers_threshold():
    est = ev.estimate_bound(lambda p: p > 0.2, 4, 0.0005)
    assert est.n1 == 40 and est.b_hat == pytest.approx(0.2025, abs=1e-15)
    assert abs(est.b_hat - 0.2) <= 0.0025 + 1e-12
    assert est.reference == 0.2
    assert len(est.counts) == 200 and sum(est.counts) == 1600


def test_all_nonseparable_labeler():
    est = ev.estimate_bound(lambda p: np.ones_like(p, dtype=bool), 5)
    assert est.n1 == 0 and est.b_hat == pytest.approx(0.0025, abs=1e-15)


def test_no_bound_found():
    with pytest.raises(ev.NoBoundFound):
        ev.estimate_bound(lambda p: np.zeros_like(p, dtype=bool), 4)


def test_bound_midpoint_identity():
    for p_star in (0.05, 0.1234, 0.37, 0.81):
        est = ev.estimate_bound(lambda p: p > p_star, 6, 0.0005)
        h = est.h
        assert est.b_hat == (10 * est.n1 * h + 10 * (est.n1 + 1) * h) / 2
        # off-grid thresholds can land in the next interval when the crossing one has < 5 hits
        assert abs(est.b_hat - p_star) <= 0.005 + 1e-12


def test_bound_monotone_in_oracle_threshold():
    previous = 0.0
    for p_star in np.linspace(0.01, 0.95, 40):
        a = ev.estimate_bound(lambda p: p > p_star, 4).b_hat
        b = ev.estimate_bound(lambda p: p > p_star + 0.01, 4).b_hat
        assert a <= b and a >= previous
        previous = a


def test_persistent_versus_transient_reading():
    # a single noisy interval early on only fools the transient reading
    def labeler(p):
        out = p > 0.3
        out[100:105] = True  # p in (0.05, 0.0525]
        return out
    assert ev.estimate_bound(labeler, 4).b_hat == pytest.approx(0.3025)
    assert ev.estimate_bound(labeler, 4, persistent=False).b_hat == pytest.approx(0.0525)


def test_sweep_grid_checks_step():
    ps, k = ev.sweep_grid(0.0005)
    assert len(ps) == 2000 and k == 200 and ps[-1] == 1.0
    with pytest.raises(ValueError):
        ev.sweep_grid(0.003)


def test_sweep_states_are_augmented_ghz():
    plain = ev.sweep_states(4, 0.005, seed=1, augment=False)
    aug = ev.sweep_states(4, 0.005, seed=1)
    assert len(aug) == len(plain) == 200
    assert all(p["family"] == "ghz" and "word" in p for p in aug.params)
    # a non-identity Pauli string flips the sign of at least one feature for some p
    assert not np.allclose(aug.features, plain.features)
    assert np.allclose(np.abs(aug.features).max(axis=1) > 0, np.abs(plain.features).max(axis=1) > 0)


def test_estimate_bound_with_network_and_json(tmp_path):
    m = _constant_model(2, 2, 1)
    est = ev.estimate_bound(m, 4, 0.005)
    assert est.n1 == 0
    ev.write_bound_csv(tmp_path / "b.csv", est)
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "interval,count" and lines[1] == "0,10" and len(lines) == 21
