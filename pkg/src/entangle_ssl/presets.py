"""
Experiment configurations: one named preset per published experiment and
the resolution of preset + JSON overrides into a fully explicit config.

Preset names:

- ``2q-full-{l}-K{k}``: Ginibre two-qubit states, full features, u = 20 l
- ``2q-partial-{F1|F2}-{l}``: partial features, u = 10 l, K = 4
- ``rho-s-{l}`` / ``rho-s-{F1|F2}-{l}``: general labeled states, rho_s unlabeled and test states
- ``ghz3-{l}``: three-class noisy GHZ, K1 = 2, K2 = 8
- ``ghzN-k{k}-{n}-{l}``: k-separability of n-qubit noisy GHZ, K1 = K2 = 1
- ``bound-n{n}-a{78|34|12}``: fuzzy 3-separability training for the bound sweep
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import re
from dataclasses import dataclass

from . import qstate as qs
from .ssl import TrainConfig

FAMILIES = ("2q", "rho-s", "ghz3", "ghz", "bound")

# epochs per training round, keyed by (K, l)
_EPOCHS_2Q = {(2, 500): 100, (2, 1000): 100, (2, 2000): 150, (2, 4000): 150,
              (4, 500): 150, (4, 1000): 150, (4, 2000): 200, (4, 4000): 250}
_GHZ3_U = {20: 50, 50: 150, 100: 1000, 200: 2000}
_FUZZY_A = {"78": 0.875, "34": 0.75, "12": 0.5}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    family: str
    l: int
    u: int
    validation_size: int
    test_size: int
    seeds: tuple
    train: TrainConfig
    n: int | None = None
    k: int | None = None
    a: float | None = None
    long_running: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if not self.seeds:
            raise ValueError("seed list must not be empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seed list has duplicates")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if min(self.l, self.validation_size, self.test_size) < 2 or self.u < 0:
            raise ValueError("set sizes must be >= 2 (u >= 0)")
        if self.family in ("2q", "rho-s") and self.l % 2:
            raise ValueError("two-qubit labeled sets need an even l")
        if self.family in ("ghz", "bound") and self.train.feature_scheme != "GHZ":
            raise ValueError("n-qubit GHZ tasks use the GHZ feature scheme")
        if self.family == "ghz3" and self.train.feature_scheme != "P3":
            raise ValueError("three-qubit GHZ tasks use the P3 feature scheme")
        if self.family == "ghz":
            qs.bound_k_separable(self.n, self.k)
        if self.family == "bound":
            qs.bound_k_separable(self.n, 3)

    @property
    def class_count(self):
        return 3 if self.family == "ghz3" else 2

    def train_config(self, seed):
        return dataclasses.replace(self.train, seed=int(seed))

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["seeds"] = list(self.seeds)
        d["train"] = self.train.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown experiment options {sorted(unknown)}")
        d["train"] = TrainConfig.from_dict(d.get("train", {}))
        d["seeds"] = tuple(d.get("seeds", ()))
        return cls(**d)

    def digest(self):
        """Digest of everything that shapes a single seed's outputs (seed list and train seed excluded)."""
        d = self.to_dict()
        d.pop("seeds")
        d["train"].pop("seed")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def _cfg(name, family, l, u, test_size, seeds, n=None, k=None, a=None, long_running=False, **train):
    return {"name": name, "family": family, "l": l, "u": u, "validation_size": max(l, 200),
            "test_size": test_size, "seeds": list(seeds), "n": n, "k": k, "a": a,
            "long_running": long_running, "train": train}


def preset(name):
    """Config dictionary for a preset name; raises ValueError for unknown names."""
    m = re.fullmatch(r"2q-full-(\d+)-K([24])", name)
    if m:
        l, K = int(m[1]), int(m[2])
        epochs = _EPOCHS_2Q.get((K, l), 100)
        return _cfg(name, "2q", l, 20 * l, 6000, range(3), long_running=l > 500,
                    K_labeled=K, K_unlabeled=K, epochs_warm=epochs, epochs_update=epochs)
    m = re.fullmatch(r"2q-partial-(F[12])-(\d+)", name)
    if m:
        l = int(m[2])
        epochs = _EPOCHS_2Q.get((4, l), 100)
        return _cfg(name, "2q", l, 10 * l, l, range(3), long_running=l > 500,
                    feature_scheme=m[1], epochs_warm=epochs, epochs_update=epochs)
    m = re.fullmatch(r"rho-s(?:-(F[12]))?-(30|100)", name)
    if m:
        l = int(m[2])
        return _cfg(name, "rho-s", l, 2 * l, 2000, range(5), feature_scheme=m[1] or "F")
    m = re.fullmatch(r"ghz3-(20|50|100|200)", name)
    if m:
        l = int(m[1])
        return _cfg(name, "ghz3", l, _GHZ3_U[l], 6000, range(5), n=3,
                    feature_scheme="P3", K_labeled=2, K_unlabeled=8)
    m = re.fullmatch(r"ghzN-k([234])-(\d+)-(30|100)", name)
    if m:
        k, n, l = int(m[1]), int(m[2]), int(m[3])
        if not 4 <= n <= 10:
            raise ValueError(f"preset {name!r}: n must lie in 4..10")
        try:
            qs.bound_k_separable(n, k)
        except ValueError:
            raise ValueError(f"preset {name!r}: no known {k}-separability bound for n = {n}") from None
        return _cfg(name, "ghz", l, 2 * l, 2000, range(5), n=n, k=k,
                    feature_scheme="GHZ", K_labeled=1, K_unlabeled=1)
    m = re.fullmatch(r"bound-n([4-7])-a(78|34|12)", name)
    if m:
        n = int(m[1])
        return _cfg(name, "bound", 200, 1000, 1000, range(8), n=n, k=3, a=_FUZZY_A[m[2]],
                    feature_scheme="GHZ", K_labeled=5, K_unlabeled=5)
    raise ValueError(f"unknown preset {name!r}")


def preset_names():
    names = [f"2q-full-{l}-K{k}" for k in (2, 4) for l in (500, 1000, 2000, 4000)]
    names += [f"2q-partial-{s}-{l}" for s in ("F1", "F2") for l in (500, 2000)]
    names += [f"rho-s-{l}" for l in (30, 100)] + [f"rho-s-{s}-{l}" for s in ("F1", "F2") for l in (30, 100)]
    names += [f"ghz3-{l}" for l in _GHZ3_U]
    for k in (2, 3, 4):
        for n in range(4, 11):
            try:
                qs.bound_k_separable(n, k)
            except ValueError:
                continue
            names += [f"ghzN-k{k}-{n}-{l}" for l in (30, 100)]
    names += [f"bound-n{n}-a{a}" for n in range(4, 8) for a in _FUZZY_A]
    return names


def _merge(base, over):
    out = dict(base)
    for key, val in over.items():
        if key == "train" and isinstance(val, dict):
            out["train"] = {**base.get("train", {}), **val}
        else:
            out[key] = val
    return out


def resolve(preset_name=None, overrides=None, seeds=None):
    """Fully explicit config from an optional preset, a JSON-style override dict and a seed list.

    Without a preset the overrides must describe the experiment completely.
    Changing ``l`` on top of a preset also moves the default validation size.
    """
    overrides = dict(overrides or {})
    name = preset_name or overrides.pop("preset", None)
    overrides.pop("preset", None)
    overrides.pop("out", None)
    if name is not None:
        base = preset(name)
        if "l" in overrides and "validation_size" not in overrides:
            base["validation_size"] = max(int(overrides["l"]), 200)
        d = _merge(base, overrides)
    else:
        d = overrides
        d.setdefault("name", "custom")
        d.setdefault("validation_size", max(int(d.get("l", 0)), 200))
    if seeds is not None:
        d["seeds"] = list(seeds)
    try:
        return ExperimentConfig.from_dict(d)
    except TypeError as exc:
        raise ValueError(f"incomplete experiment config: {exc}") from None
