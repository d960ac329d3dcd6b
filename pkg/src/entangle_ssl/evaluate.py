"""
Classification metrics (accuracy, ROC staircases and their area, pooled
one-vs-rest ROC for several classes) and the white-noise bound estimator
that sweeps a classifier across the noisy GHZ family.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from . import datagen as dg
from . import nn
from . import qstate as qs


def accuracy(m, test):
    """Overall and per-class accuracy of the argmax prediction."""
    if len(test) == 0:
        raise ValueError("empty test set")
    if not test.is_labeled:
        raise ValueError("test set must be fully labeled")
    pred = nn.predict(m, test.features)
    hit = pred == test.labels
    per_class = [float(np.mean(hit[test.labels == c])) if np.any(test.labels == c) else float("nan")
                 for c in range(test.class_count)]
    return float(np.mean(hit)), per_class


@dataclass
class RocCurve:
    """``points`` rows are ``(fpr, tpr, alpha)``; a sample is positive iff its score exceeds alpha."""

    points: list
    auc: float

    def arrays(self):
        a = np.array(self.points, dtype=float)
        return a[:, 0], a[:, 1], a[:, 2]


def _trapezoid(x, y):
    return float(np.sum((x[1:] - x[:-1]) * (y[1:] + y[:-1]) / 2))


def roc_auc(scores, labels):
    """ROC staircase over every distinct score and its trapezoidal area.

    Thresholds run from the largest score down to a ``-inf`` sentinel, so
    tied scores move the curve in one diagonal step.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(int)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be equal-length vectors")
    if not set(np.unique(y)) <= {0, 1}:
        raise ValueError("labels must be 0 or 1")
    P = int(np.sum(y == 1))
    N = len(y) - P
    if P == 0 or N == 0:
        raise ValueError("ROC needs both classes present")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    # the last index of each run of equal scores
    ends = np.flatnonzero(np.diff(s) != 0)
    ends = np.append(ends, len(s) - 1)
    tp = np.cumsum(y == 1)[ends]
    fp = np.cumsum(y == 0)[ends]
    alphas = list(s[ends[1:]]) + [-np.inf]
    points = [(0.0, 0.0, float(s[0]))]
    points += [(fp[i] / N, tp[i] / P, float(a)) for i, a in enumerate(alphas)]
    fpr = np.array([p[0] for p in points])
    tpr = np.array([p[1] for p in points])
    return RocCurve(points, _trapezoid(fpr, tpr))


def micro_roc(m, test):
    """Pooled one-vs-rest ROC; for two classes this is the class-1 ROC."""
    if test.class_count < 2:
        raise ValueError("need at least two classes")
    prob = nn.forward(m, test.features)
    return micro_roc_from_probs(prob, test.labels)


def micro_roc_from_probs(prob, labels):
    prob = np.asarray(prob, dtype=float)
    labels = np.asarray(labels)
    if prob.shape[1] == 2:
        return roc_auc(prob[:, 1], labels)
    onehot = np.eye(prob.shape[1])[labels]
    return roc_auc(prob.ravel(), onehot.ravel())


def class_rocs(m, test):
    """One-vs-rest curve for each class."""
    prob = nn.forward(m, test.features)
    return [roc_auc(prob[:, c], (test.labels == c).astype(int)) for c in range(test.class_count)]


# --- bound sweep ------------------------------------------------------------------

class NoBoundFound(RuntimeError):
    pass


@dataclass
class BoundEstimate:
    b_hat: float
    n1: int
    counts: list
    h: float
    reference: float | None = None
    relative_error: float | None = None
    persistent: bool = True
    extra: dict = field(default_factory=dict)


def relative_error(b_hat, b_ref):
    if b_ref <= 0:
        raise ValueError("reference bound must be positive")
    return abs(b_hat - b_ref) / b_ref


def sweep_grid(h):
    """p = h, 2h, ..., 1 and the number of 10-sample intervals."""
    total = round(1 / h)
    if abs(total * h - 1) > 1e-12 or total % 10:
        raise ValueError("1/h must be an integer divisible by 10")
    return np.arange(1, total + 1) * h, total // 10


def sweep_states(n, h, seed, augment=True, tag="sweep"):
    """Noisy GHZ sweep as a dataset, each state conjugated once by a random local unitary."""
    ps, _ = sweep_grid(h)
    params = [{"family": "ghz", "n": n, "p": float(p)} for p in ps]
    scheme = "P3" if n == 3 else "GHZ"
    states = [dg.state_from_params(p) for p in params]
    ds = dg.Dataset(dg.featurize(states, scheme), np.full(len(ps), -1), 2, f"ghz{n}-sweep", seed, [],
                    params, states if scheme != "GHZ" else None)
    if not augment:
        return ds
    return dg.augment_once(ds, seed, scheme=scheme, tag=tag)


def first_interval(counts, threshold=5, persistent=True):
    """Index of the first interval with ``count >= threshold`` (for all later ones too if persistent)."""
    ok = np.asarray(counts) >= threshold
    if persistent:
        bad = np.flatnonzero(~ok)
        j = 0 if len(bad) == 0 else int(bad[-1]) + 1
        return j if j < len(ok) else None
    hits = np.flatnonzero(ok)
    return int(hits[0]) if len(hits) else None


def estimate_bound(labeler, n, h=0.0005, *, seed=0, persistent=True, augment=True, k_ref=3,
                   nonseparable_class=None):
    """Locate the separable/nonseparable switch of ``labeler`` along the noisy GHZ line.

    ``labeler`` is a trained :class:`~entangle_ssl.nn.Mlp` (predictions by
    argmax; the last class counts as nonseparable) or a callable mapping an
    array of ``p`` values to booleans (True = nonseparable).
    """
    ps, intervals = sweep_grid(h)
    if isinstance(labeler, nn.Mlp):
        ds = sweep_states(n, h, seed, augment)
        target = labeler.class_count - 1 if nonseparable_class is None else nonseparable_class
        nonsep = nn.predict(labeler, ds.features) == target
    else:
        nonsep = np.asarray(labeler(ps), dtype=bool)
    counts = nonsep.reshape(intervals, 10).sum(axis=1)
    n1 = first_interval(counts, persistent=persistent)
    if n1 is None:
        raise NoBoundFound("no bound found: no interval qualifies")
    b_hat = (10 * n1 * h + 10 * (n1 + 1) * h) / 2
    ref = None
    try:
        ref = qs.bound_k_separable(n, k_ref).value
    except ValueError:
        pass
    rel = relative_error(b_hat, ref) if ref is not None else None
    return BoundEstimate(b_hat, n1, [int(c) for c in counts], h, ref, rel, persistent)


# --- output files ---------------------------------------------------------------

def _fmt(x):
    return format(float(x), ".17g")


def write_roc_csv(path, curve):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", "fpr", "tpr"])
        for fpr, tpr, alpha in curve.points:
            w.writerow([_fmt(alpha), _fmt(fpr), _fmt(tpr)])


def read_roc_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    pts = [(float(r["fpr"]), float(r["tpr"]), float(r["alpha"])) for r in rows]
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    return RocCurve(pts, _trapezoid(x, y))


def write_bound_csv(path, est):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["interval", "count"])
        for i, c in enumerate(est.counts):
            w.writerow([i, c])


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
