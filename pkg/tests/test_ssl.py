import json
import math

import numpy as np
import pytest

from entangle_ssl import datagen as dg
from entangle_ssl import evaluate as ev
from entangle_ssl import nn
from entangle_ssl import ssl


def _identity_net(c=2):
    """Single softmax layer with W = I, so a feature row is a logit vector."""
    return nn.Mlp((c, c), [np.eye(c)], [np.zeros(c)])


def _views_dataset(logit_rows, per):
    x = np.asarray(logit_rows, dtype=float)
    ds = dg.Dataset(x, np.full(len(x), -1), x.shape[1], "toy", 0)
    ds.augmentations = per - 1
    return ds


def _tiny_cfg(**kw):
    base = dict(T=2, K_labeled=1, K_unlabeled=2, epochs_warm=2, epochs_update=2, hidden=(8,),
                dtype="float64", seed=3, tau=0.9)
    base.update(kw)
    return ssl.TrainConfig(**base)


@pytest.fixture(scope="module")
def tiny_sets():
    lab = dg.gen_labeled_2q(10, "F", 5)
    unl = dg.gen_rho_s_set(12, "F", 5, tag="unlabeled", labeled=False)
    val = dg.gen_rho_s_set(20, "F", 5, tag="validation")
    return lab, unl, val


def test_lambda_schedule_values():
    cfg = ssl.TrainConfig(T=30)
    # exp(-1/225) / (2 pi)
    assert ssl.lambda_u(1, cfg) == pytest.approx(0.1584492, abs=5e-8)
    assert ssl.lambda_u(30, cfg) == pytest.approx(0.0029150, abs=5e-8)
    assert ssl.lambda_u(15, cfg) == pytest.approx(0.058550, abs=5e-7)
    assert ssl.lambda_u(15, cfg) == math.exp(-1) / (2 * math.pi)
    with pytest.raises(ValueError):
        ssl.lambda_u(0, cfg)
    with pytest.raises(ValueError):
        ssl.lambda_u(31, cfg)


@pytest.mark.parametrize("T", [1, 2, 7, 30, 100])
def test_lambda_schedule_strictly_decreasing(T):
    cfg = ssl.TrainConfig(T=T)
    lams = [ssl.lambda_u(t, cfg) for t in range(1, T + 1)]
    assert all(a > b for a, b in zip(lams, lams[1:]))
    assert lams[0] < 1 / (2 * math.pi)


def test_config_validation():
    with pytest.raises(ValueError):
        ssl.TrainConfig(tau=0.85)
    with pytest.raises(ValueError):
        ssl.TrainConfig(T=0)
    with pytest.raises(ValueError):
        ssl.TrainConfig(K_labeled=-1)
    with pytest.raises(ValueError):
        ssl.TrainConfig(lr=0)
    with pytest.raises(ValueError):
        ssl.TrainConfig(feature_scheme="F9")
    with pytest.raises(ValueError):
        ssl.TrainConfig.from_dict({"tau": 0.95, "bogus": 1})


def test_config_round_trip_and_digest():
    cfg = ssl.TrainConfig(hidden=[16, 8], T=3)
    back = ssl.TrainConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert back == cfg and back.digest() == cfg.digest()
    assert ssl.TrainConfig(T=4).digest() != cfg.digest()


def test_layer_dims_follow_scheme():
    assert ssl.TrainConfig().layer_dims(2) == (16, 512, 256, 128, 16, 2)
    assert ssl.TrainConfig(feature_scheme="P3").layer_dims(3) == (64, 512, 256, 128, 16, 3)
    assert ssl.TrainConfig(feature_scheme="GHZ").layer_dims(2) == (2, 64, 32, 2)
    assert ssl.TrainConfig(feature_scheme="F2", hidden=(5,)).layer_dims(2) == (6, 5, 2)


def test_average_predict_examples(rng):
    m = _identity_net()
    views = np.log([[0.9, 0.1], [0.7, 0.3]])
    assert np.allclose(ssl.average_predict(m, views), [0.8, 0.2], atol=1e-15)
    x = rng.normal(size=2)
    assert np.array_equal(ssl.average_predict(m, x[None, :]), nn.forward(m, x))
    assert np.allclose(ssl.average_predict(m, np.stack([x] * 5)), nn.forward(m, x), atol=1e-15)


def test_guess_labels_examples():
    m = _identity_net()
    # three parents, two identical views each
    rows = np.log([[0.97, 0.03]] * 2 + [[0.6, 0.4]] * 2 + [[0.02, 0.98]] * 2)
    ds = _views_dataset(rows, 2)
    out = ssl.guess_labels(m, ds, 0.95)
    assert len(out) == 4
    assert out.labels.tolist() == [0, 0, 1, 1]
    assert all(s == "pseudo" for s in out.sources)


def test_guess_threshold_is_strict():
    m = _identity_net()
    ds = _views_dataset(np.log([[0.95, 0.05]]), 1)
    top = float(ssl.average_predict(m, ds.features[:1]).max())
    assert len(ssl.guess_labels(m, ds, top)) == 0
    assert len(ssl.guess_labels(m, ds, np.nextafter(top, 0))) == 1
    flat = _views_dataset(np.zeros((1, 2)), 1)
    assert len(ssl.guess_labels(m, flat, 0.5)) == 0


def test_guess_ties_go_to_smallest_class():
    m = _identity_net(3)
    ds = _views_dataset([[1.0, 1.0, -50.0]], 1)
    g = ssl.guess(m, ds, 0.4)
    assert g.labels.tolist() == [0]


def test_guess_averages_before_thresholding():
    m = _identity_net()
    # one confident view and one unsure view: the average is below the threshold
    ds = _views_dataset(np.log([[0.99, 0.01], [0.6, 0.4]]), 2)
    assert len(ssl.guess_labels(m, ds, 0.9)) == 0


def test_guess_retention_monotone_in_tau(rng):
    m = nn.mlp_new((4, 6, 2), 0)
    ds = _views_dataset(rng.normal(scale=3, size=(300, 4)), 3)
    counts = [len(ssl.guess(m, ds, tau).parents) for tau in np.linspace(0.5, 1.0, 26)]
    assert all(a >= b for a, b in zip(counts, counts[1:]))
    assert counts[-1] == 0


def test_pseudo_views_share_parent_label(rng):
    m = nn.mlp_new((4, 6, 2), 1)
    ds = _views_dataset(rng.normal(scale=3, size=(120, 4)), 4)
    g = ssl.guess(m, ds, 0.6)
    out = ssl.pseudo_dataset(ds, g)
    assert np.array_equal(out.labels.reshape(-1, 4), np.repeat(g.labels[:, None], 4, axis=1))
    assert np.array_equal(out.features, dg.group_views(ds)[g.parents].reshape(-1, 4))


def test_warm_start_is_plain_training(tiny_sets):
    lab = tiny_sets[0]
    cfg = _tiny_cfg()
    a = ssl.warm_start(lab, cfg).model
    b = nn.train_epochs(ssl._init(cfg, 2), lab, None, 0.0, cfg.epochs_warm, cfg.lr, dg.stream(cfg.seed, "train"))
    assert a.same_as(b)


def test_ssl_run_is_deterministic_and_consistent(tiny_sets):
    lab, unl, val = tiny_sets
    cfg = _tiny_cfg(tau=0.9)
    r1 = ssl.ssl_train(lab, unl, val, cfg)
    r2 = ssl.ssl_train(lab, unl, val, cfg)
    assert len(r1.models) == cfg.T + 1
    assert all(a.same_as(b) for a, b in zip(r1.models, r2.models))
    assert r1.record(cfg) == r2.record(cfg)
    assert r1.validation_accuracy[r1.selected] == max(r1.validation_accuracy)
    assert r1.selected == r1.validation_accuracy.index(max(r1.validation_accuracy))
    assert ev.accuracy(r1.model, val)[0] == r1.validation_accuracy[r1.selected]
    for g, count in zip(r1.guesses, r1.pseudo_counts):
        assert len(g.parents) == count
        assert np.array_equal(g.labels, np.argmax(g.averaged[g.parents], axis=1))
        assert np.all(g.averaged[g.parents].max(axis=1) > cfg.tau)
    json.dumps(r1.record(cfg))


def test_ssl_uses_guess_labels_when_confident(tiny_sets):
    lab, unl, val = tiny_sets
    run = ssl.ssl_train(lab, unl, val, _tiny_cfg(tau=0.9, epochs_warm=150, hidden=(32,)))
    assert sum(run.pseudo_counts) > 0


def test_ssl_ignores_labels_on_unlabeled_input(tiny_sets):
    lab, unl, val = tiny_sets
    labeled_unl = unl.with_labels(unl.truth())
    cfg = _tiny_cfg()
    a = ssl.ssl_train(lab, unl, val, cfg)
    b = ssl.ssl_train(lab, labeled_unl, val, cfg)
    assert a.model.same_as(b.model)


def test_tau_one_reduces_to_supervised_continuation(tiny_sets):
    lab, unl, val = tiny_sets
    cfg = _tiny_cfg(tau=1.0, T=3)
    run = ssl.ssl_train(lab, unl, val, cfg)
    assert run.pseudo_counts == [0, 0, 0]
    assert run.models[-1].same_as(ssl.slk_train(lab, cfg))
    # every intermediate model is a checkpoint of the same supervised run
    x_aug = ssl._augment(lab, cfg.K_labeled, cfg, "augment-labeled")
    rng = dg.stream(cfg.seed, "train")
    fit = nn.fit(ssl._init(cfg, 2), x_aug, None, 0.0, cfg.epochs_warm, cfg.lr, rng)
    assert fit.model.same_as(run.models[0])
    for t in range(1, cfg.T + 1):
        fit = nn.fit(fit.model, x_aug, None, 0.0, cfg.epochs_update, cfg.lr, rng, adam=fit.adam)
        assert fit.model.same_as(run.models[t])


def test_slk_with_no_augmentation_is_sl(tiny_sets):
    cfg = _tiny_cfg(K_labeled=0)
    assert ssl.slk_train(tiny_sets[0], cfg).same_as(ssl.sl_train(tiny_sets[0], cfg))


def test_baselines_are_deterministic_and_differ(tiny_sets):
    cfg = _tiny_cfg()
    assert ssl.sl_train(tiny_sets[0], cfg).same_as(ssl.sl_train(tiny_sets[0], cfg))
    assert not ssl.slk_train(tiny_sets[0], cfg).same_as(ssl.sl_train(tiny_sets[0], cfg))


def test_scheme_mismatch_is_rejected(tiny_sets):
    with pytest.raises(ValueError, match="feature dimension"):
        ssl.sl_train(tiny_sets[0], _tiny_cfg(feature_scheme="F1"))


def test_selection_prefers_earliest_tie():
    assert ssl.select([0.5, 0.9, 0.9, 0.1]) == 1
    assert ssl.select([0.7]) == 0
