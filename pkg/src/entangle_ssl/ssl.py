"""
Semi-supervised training loop with confidence-thresholded guess-labels,
plus the two supervised baselines it is compared against.

The loop: augment the labeled and unlabeled sets once, warm-start a
network on the augmented labeled set, then ``T`` times average the
network's predictions over each unlabeled sample's views, keep the
confident ones with their argmax label, and continue training on both
sets with a decaying unlabeled-loss weight. The candidate with the best
validation accuracy wins.

Training continues from the previous model and optimizer state at every
outer step, with one random stream for the whole run, so a run that never
retains a guess-label is exactly a long supervised run on the augmented
labeled set.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import datagen as dg
from . import evaluate as ev
from . import nn

WIDE_HIDDEN = (512, 256, 128, 16)
NARROW_HIDDEN = (64, 32)


@dataclass(frozen=True)
class TrainConfig:
    tau: float = 0.95
    T: int = 30
    K_labeled: int = 4
    K_unlabeled: int = 4
    schedule_a: float = -1.0
    schedule_b: float = 1.0
    lr: float = 0.003
    epochs_warm: int = 100
    epochs_update: int = 100
    batch: int = nn.BATCH
    seed: int = 0
    feature_scheme: str = "F"
    validation_size: int = 200
    pseudo_ratio: int = nn.PSEUDO_RATIO
    hidden: tuple | None = None
    dtype: str = "float32"
    augment_kind: str | None = None

    def __post_init__(self):
        if not 0.9 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0.9, 1], got {self.tau}")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.K_labeled < 0 or self.K_unlabeled < 0:
            raise ValueError("augmentation counts must be >= 0")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.epochs_warm < 1 or self.epochs_update < 1 or self.batch < 1:
            raise ValueError("epoch counts and batch size must be >= 1")
        if self.feature_scheme not in dg.SCHEME_DIMS:
            raise ValueError(f"unknown feature scheme {self.feature_scheme!r}")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")
        if self.hidden is not None:
            object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @property
    def total_epochs(self):
        return self.epochs_warm + self.T * self.epochs_update

    def layer_dims(self, class_count):
        hidden = self.hidden
        if hidden is None:
            hidden = NARROW_HIDDEN if self.feature_scheme == "GHZ" else WIDE_HIDDEN
        return (dg.SCHEME_DIMS[self.feature_scheme], *hidden, class_count)

    def to_dict(self):
        d = dataclasses.asdict(self)
        if d["hidden"] is not None:
            d["hidden"] = list(d["hidden"])
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown training options {sorted(unknown)}")
        return cls(**d)

    def digest(self):
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def lambda_u(t, cfg):
    """exp(-s_t^2) / (2 pi) with s_t = t |a - b| / T."""
    if not 1 <= t <= cfg.T:
        raise ValueError(f"outer step must lie in 1..{cfg.T}")
    s = t * abs(cfg.schedule_a - cfg.schedule_b) / cfg.T
    return math.exp(-s * s) / (2 * math.pi)


def average_predict(m, views):
    """Mean class probabilities over views; ``views`` is (K+1, d) or (parents, K+1, d)."""
    views = np.asarray(views, dtype=float)
    return nn.forward(m, views).mean(axis=-2)


@dataclass
class Guess:
    """Guess-labels for one outer step (parent indices into the unlabeled set)."""

    parents: np.ndarray
    labels: np.ndarray
    averaged: np.ndarray


def guess(m, unlabeled_aug, tau):
    """Average each parent's views, keep parents whose top probability exceeds ``tau``."""
    views = dg.group_views(unlabeled_aug)
    if len(views) == 0:
        return Guess(np.zeros(0, int), np.zeros(0, int), np.zeros((0, m.class_count)))
    avg = average_predict(m, views)
    keep = np.flatnonzero(avg.max(axis=1) > tau)
    return Guess(keep, np.argmax(avg[keep], axis=1), avg)


def pseudo_dataset(unlabeled_aug, g):
    """The retained views of ``unlabeled_aug`` carrying their parent's guess-label."""
    per = unlabeled_aug.augmentations + 1
    idx = (g.parents[:, None] * per + np.arange(per)).ravel()
    labels = np.repeat(g.labels, per)
    out = unlabeled_aug.subset(idx)
    return out.with_labels(labels, ["pseudo"] * len(idx))


def guess_labels(m, unlabeled_aug, tau):
    """Pseudo-labeled subset of ``unlabeled_aug`` (all views of every confident parent)."""
    return pseudo_dataset(unlabeled_aug, guess(m, unlabeled_aug, tau))


def _init(cfg, class_count):
    dims = cfg.layer_dims(class_count)
    return nn.mlp_new(dims, dg.stream(cfg.seed, "init"), dtype=np.dtype(cfg.dtype))


def _augment(ds, K, cfg, tag):
    return dg.augment_unitary(ds, K, cfg.seed, scheme=cfg.feature_scheme, kind=cfg.augment_kind, tag=tag)


def _check_scheme(cfg, *sets):
    for ds in sets:
        if ds.feature_dim != dg.SCHEME_DIMS[cfg.feature_scheme]:
            raise ValueError(f"dataset has feature dimension {ds.feature_dim}, scheme "
                             f"{cfg.feature_scheme} needs {dg.SCHEME_DIMS[cfg.feature_scheme]}")


def warm_start(labeled_aug, cfg, rng=None):
    """Supervised training for ``epochs_warm`` epochs; returns the fit (model and optimizer state)."""
    if len(labeled_aug) == 0:
        raise ValueError("labeled set is empty")
    rng = rng if rng is not None else dg.stream(cfg.seed, "train")
    return nn.fit(_init(cfg, labeled_aug.class_count), labeled_aug, None, 0.0, cfg.epochs_warm, cfg.lr, rng,
                  batch=cfg.batch, pseudo_ratio=cfg.pseudo_ratio)


def _supervised(labeled, cfg):
    if len(labeled) == 0:
        raise ValueError("labeled set is empty")
    rng = dg.stream(cfg.seed, "train")
    return nn.fit(_init(cfg, labeled.class_count), labeled, None, 0.0, cfg.total_epochs, cfg.lr, rng,
                  batch=cfg.batch, pseudo_ratio=cfg.pseudo_ratio).model


def slk_train(labeled, cfg):
    """Supervised training on the K1-augmented labeled set for the full SSL epoch budget."""
    _check_scheme(cfg, labeled)
    return _supervised(_augment(labeled, cfg.K_labeled, cfg, "augment-labeled"), cfg)


def sl_train(labeled, cfg):
    """Supervised training on the raw labeled set for the full SSL epoch budget."""
    _check_scheme(cfg, labeled)
    return _supervised(labeled, cfg)


@dataclass
class SslRun:
    models: list
    validation_accuracy: list
    selected: int
    pseudo_counts: list
    lambdas: list = field(default_factory=list)
    guesses: list = field(default_factory=list)
    step_seconds: list = field(default_factory=list)
    losses: list = field(default_factory=list)

    @property
    def model(self):
        return self.models[self.selected]

    def record(self, cfg, extra=None):
        """Deterministic JSON-ready summary (no wall-clock values)."""
        out = {
            "config": cfg.to_dict(),
            "config_digest": cfg.digest(),
            "validation_accuracy": self.validation_accuracy,
            "pseudo_counts": self.pseudo_counts,
            "lambda_u": self.lambdas,
            "selected": self.selected,
            "final_epoch_loss": [ls[-1] for ls in self.losses],
        }
        out.update(extra or {})
        return out


def select(validation_accuracy):
    """Index of the best validation accuracy; ties go to the earliest model."""
    return int(np.argmax(validation_accuracy))


def ssl_train(labeled, unlabeled, validation, cfg, progress=None):
    """Run the semi-supervised loop; ``models[0]`` is the warm start, ``models[t]`` the t-th update."""
    _check_scheme(cfg, labeled, unlabeled, validation)
    if not validation.is_labeled:
        raise ValueError("validation set must be labeled")
    x_aug = _augment(labeled, cfg.K_labeled, cfg, "augment-labeled")
    u_aug = _augment(unlabeled.without_labels(), cfg.K_unlabeled, cfg, "augment-unlabeled")
    rng = dg.stream(cfg.seed, "train")
    clock = time.perf_counter()
    fit = warm_start(x_aug, cfg, rng)
    models, accs, counts, lambdas, guesses = [fit.model], [ev.accuracy(fit.model, validation)[0]], [], [], []
    seconds, losses = [time.perf_counter() - clock], [fit.losses]
    for t in range(1, cfg.T + 1):
        clock = time.perf_counter()
        g = guess(fit.model, u_aug, cfg.tau)
        pseudo = pseudo_dataset(u_aug, g)
        lam = lambda_u(t, cfg)
        fit = nn.fit(fit.model, x_aug, pseudo if len(pseudo) else None, lam, cfg.epochs_update, cfg.lr, rng,
                     batch=cfg.batch, pseudo_ratio=cfg.pseudo_ratio, adam=fit.adam)
        models.append(fit.model)
        accs.append(ev.accuracy(fit.model, validation)[0])
        counts.append(len(g.parents))
        lambdas.append(lam)
        guesses.append(g)
        losses.append(fit.losses)
        seconds.append(time.perf_counter() - clock)
        if progress:
            progress(t, accs[-1], counts[-1])
    return SslRun(models, accs, select(accs), counts, lambdas, guesses, seconds, losses)
