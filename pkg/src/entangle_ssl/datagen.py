"""
Labeled / unlabeled dataset construction for every experiment family,
the two lossless augmentations (local unitaries and convex mixing of
separable states) and a line-oriented text format for datasets.

Each sample draws from its own random stream derived from the master seed
and a counter, so results do not depend on generation order or on how many
workers are used.
"""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field

import numpy as np

from . import qstate as qs

MAX_ATTEMPTS = 10**7

SCHEME_DIMS = {"F": 16, "F1": 9, "F2": 6, "P3": 64, "GHZ": 2}

# families whose states can be rebuilt from a few scalar parameters
COMPACT_FAMILIES = ("ghz", "rho_s")


def stream(seed, *key):
    """Independent generator for ``(seed, key...)``; keys may be ints or strings."""
    words = [zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in key]
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(words)))


def featurize(states, scheme):
    """Feature matrix for a sequence of density matrices."""
    if len(states) == 0:
        return np.zeros((0, SCHEME_DIMS[scheme]))
    if scheme == "GHZ":
        return np.array([qs.features_ghz(r) for r in states])
    arr = np.asarray(states)
    if scheme == "F":
        return qs.features_pauli_full(arr, 2)
    if scheme == "P3":
        return qs.features_pauli_full(arr, 3)
    if scheme in ("F1", "F2"):
        return qs.features_partial(arr, scheme)
    raise ValueError(f"unknown feature scheme {scheme!r}")


@dataclass
class Sample:
    features: np.ndarray
    label: np.ndarray | None
    source: str
    params: dict


@dataclass
class Dataset:
    """Column-oriented container; ``labels[i] == -1`` marks an unlabeled sample."""

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    family: str
    seed: int
    sources: list = field(default_factory=list)
    params: list = field(default_factory=list)
    states: list | None = None
    augmentations: int = 0

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=int)
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim != 2:
            self.features = self.features.reshape(len(self.labels), -1)
        if not self.sources:
            self.sources = ["labeled" if y >= 0 else "unlabeled" for y in self.labels]
        if not self.params:
            self.params = [{} for _ in self.labels]
        if self.states is None:
            self.states = [None] * len(self.labels)
        if not (len(self.features) == len(self.labels) == len(self.sources) == len(self.params) == len(self.states)):
            raise ValueError("dataset columns have different lengths")
        if len(self.labels) and (self.labels.max() >= self.class_count or self.labels.min() < -1):
            raise ValueError("label out of range")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("non-finite features")

    def __len__(self):
        return len(self.labels)

    @property
    def feature_dim(self):
        return self.features.shape[1]

    @property
    def onehot(self):
        return np.eye(self.class_count)[self.labels]

    @property
    def is_labeled(self):
        return bool(len(self)) and bool(np.all(self.labels >= 0))

    def sample(self, i):
        y = self.labels[i]
        label = np.eye(self.class_count)[y] if y >= 0 else None
        return Sample(self.features[i], label, self.sources[i], self.params[i])

    def truth(self):
        """Ground-truth classes (labels, or the audited ``truth`` parameter)."""
        return np.array([y if y >= 0 else p.get("truth", -1) for y, p in zip(self.labels, self.params)])

    def state(self, i):
        if self.states[i] is not None:
            return self.states[i]
        return state_from_params(self.params[i])

    def subset(self, idx):
        idx = list(idx)
        return Dataset(
            self.features[idx],
            self.labels[idx],
            self.class_count,
            self.family,
            self.seed,
            [self.sources[i] for i in idx],
            [self.params[i] for i in idx],
            [self.states[i] for i in idx],
            self.augmentations,
        )

    def with_labels(self, labels, sources=None):
        return Dataset(
            self.features, labels, self.class_count, self.family, self.seed,
            list(sources or self.sources), self.params, self.states, self.augmentations,
        )

    def without_labels(self):
        params = [dict(p, truth=int(y)) if y >= 0 else p for p, y in zip(self.params, self.labels)]
        return Dataset(
            self.features, np.full(len(self), -1), self.class_count, self.family, self.seed,
            ["unlabeled"] * len(self), params, self.states, self.augmentations,
        )


def empty_dataset(feature_dim, class_count, family="empty", seed=0):
    return Dataset(np.zeros((0, feature_dim)), np.zeros(0, dtype=int), class_count, family, seed)


def concat(datasets):
    first = datasets[0]
    return Dataset(
        np.concatenate([d.features for d in datasets]),
        np.concatenate([d.labels for d in datasets]),
        first.class_count,
        first.family,
        first.seed,
        [s for d in datasets for s in d.sources],
        [p for d in datasets for p in d.params],
        [s for d in datasets for s in d.states],
        first.augmentations,
    )


def state_from_params(params):
    fam = params.get("family")
    if "rho" in params:
        return params["rho"]
    if fam == "ghz":
        rho = qs.ghz_noisy(int(params["n"]), float(params["p"]))
        if "word" in params:
            rho = qs.pauli_string_conjugate(rho, params["word"])
        return rho
    if fam == "rho_s":
        return qs.rho_s(float(params["p"]), float(params.get("theta", np.pi / 8)))
    raise ValueError(f"cannot reconstruct a state from {params}")


# --- two-qubit families --------------------------------------------------------------

def random_separable_2q(rng):
    """Random convex mixture of 1..16 pure product states of two qubits."""
    m = int(rng.integers(1, 17))
    weights = rng.dirichlet(np.ones(m))
    rho = np.zeros((4, 4), dtype=complex)
    for w in weights:
        a = qs.random_pure_state(2, rng)
        b = qs.random_pure_state(2, rng)
        rho += w * qs.pure_product_density([a, b])
    return 0.5 * (rho + rho.conj().T)


def augment_mix(separables, count, rng):
    """Pairwise convex mixes lam * rho_a + (1 - lam) * rho_b of distinct inputs."""
    if len(separables) < 2:
        raise ValueError("need at least two separable states to mix")
    out = []
    for _ in range(count):
        a, b = rng.choice(len(separables), size=2, replace=False)
        lam = rng.uniform(0, 1)
        out.append(lam * separables[a] + (1 - lam) * separables[b])
    return out


def _ginibre_draws(seed, tag, targets, *, label_of=None):
    """Rejection-sample Ginibre states until each class has its target count.

    Returns per-class lists of (draw index, state).
    """
    label_of = label_of or (lambda r: int(qs.is_ppt_entangled(r)))
    got = [[] for _ in targets]
    j = 0
    while any(len(g) < t for g, t in zip(got, targets)):
        if j >= MAX_ATTEMPTS * len(targets):
            raise RuntimeError("rejection sampling exceeded its attempt budget")
        rho = qs.random_ginibre_density(4, stream(seed, tag, j))
        c = label_of(rho)
        if len(got[c]) < targets[c]:
            got[c].append((j, rho))
        j += 1
    return got


def _interleave(per_class):
    """Round-robin merge so classes alternate in the output order."""
    out = []
    for i in range(max(len(c) for c in per_class)):
        for c in per_class:
            if i < len(c):
                out.append(c[i])
    return out


def _from_states(states, labels, scheme, family, seed, class_count, params, sources=None):
    return Dataset(featurize(states, scheme), labels, class_count, family, seed,
                   sources or [], params, list(states))


def gen_labeled_2q(l, scheme, seed, tag="labeled"):
    """``l`` Ginibre two-qubit states, half separable and half entangled by PPT."""
    if l % 2:
        raise ValueError("l must be even")
    got = _ginibre_draws(seed, tag, [l // 2, l // 2])
    rows = _interleave([[(c, j, r) for j, r in got[c]] for c in (0, 1)])
    states = [r for _, _, r in rows]
    labels = [c for c, _, _ in rows]
    params = [{"family": "ginibre", "draw": j} for _, j, _ in rows]
    return _from_states(states, labels, scheme, f"2q-{scheme}", seed, 2, params)


def gen_unlabeled_2q(u, scheme, seed, tag="unlabeled"):
    """Ginibre states topped up with extra separable states to a 50/50 ground truth."""
    if u < 2:
        raise ValueError("u must be >= 2")
    n_sep, n_ent = u // 2, u - u // 2
    # draw until the entangled quota is met; keep separable draws on the way
    got = [[], []]
    j = 0
    while len(got[1]) < n_ent:
        if j >= MAX_ATTEMPTS:
            raise RuntimeError("rejection sampling exceeded its attempt budget")
        rho = qs.random_ginibre_density(4, stream(seed, tag, j))
        c = int(qs.is_ppt_entangled(rho))
        if len(got[c]) < (n_sep, n_ent)[c]:
            got[c].append(({"family": "ginibre", "draw": j}, rho))
        j += 1
    deficit = n_sep - len(got[0])
    n_rand = math.ceil(deficit / 2)
    for i in range(n_rand):
        got[0].append(({"family": "separable", "draw": i}, random_separable_2q(stream(seed, tag, "sep", i))))
    n_mix = deficit - n_rand
    if n_mix:
        pool = [r for _, r in got[0]]
        mixed = augment_mix(pool, n_mix, stream(seed, tag, "mix"))
        got[0].extend(({"family": "mix"}, r) for r in mixed)
    rows = _interleave([[(c, p, r) for p, r in got[c]] for c in (0, 1)])
    states = [r for _, _, r in rows]
    params = [dict(p, truth=c) for c, p, _ in rows]
    return _from_states(states, [-1] * len(rows), scheme, f"2q-{scheme}", seed, 2, params)


def gen_rho_s_set(size, scheme, seed, tag="rho_s", labeled=True, theta=np.pi / 8):
    """Balanced rho_s states with p uniform on [0, 1], classes by PPT."""
    targets = [size // 2, size - size // 2]
    got = [[], []]
    j = 0
    while any(len(g) < t for g, t in zip(got, targets)):
        if j >= MAX_ATTEMPTS:
            raise RuntimeError("rejection sampling exceeded its attempt budget")
        p = float(stream(seed, tag, j).uniform(0, 1))
        rho = qs.rho_s(p, theta)
        c = int(qs.is_ppt_entangled(rho))
        if len(got[c]) < targets[c]:
            got[c].append(({"family": "rho_s", "p": p, "theta": theta}, rho))
        j += 1
    rows = _interleave([[(c, p, r) for p, r in got[c]] for c in (0, 1)])
    states = [r for _, _, r in rows]
    if labeled:
        labels = [c for c, _, _ in rows]
        params = [p for _, p, _ in rows]
    else:
        labels = [-1] * len(rows)
        params = [dict(p, truth=c) for c, p, _ in rows]
    return _from_states(states, labels, scheme, f"rho_s-{scheme}", seed, 2, params)


# --- noisy GHZ families ------------------------------------------------------------

@dataclass(frozen=True)
class GhzTask:
    """Labelling task on the noisy GHZ family.

    ``mode`` is ``"three-class"`` (n = 3 only), ``"binary"`` (k-separable vs
    not, for the given ``k``) or ``"fuzzy"`` (3-separability with loosened
    intervals controlled by ``a``).
    """

    n: int
    mode: str = "binary"
    k: int = 2
    a: float = 0.875

    def __post_init__(self):
        if self.mode == "three-class" and self.n != 3:
            raise ValueError("three-class task is defined for n = 3")
        if self.mode == "fuzzy" and not 4 <= self.n <= 7:
            raise ValueError("fuzzy task is defined for n in 4..7")
        if self.mode not in ("three-class", "binary", "fuzzy"):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def class_count(self):
        return 3 if self.mode == "three-class" else 2

    @property
    def scheme(self):
        return "P3" if self.n == 3 else "GHZ"

    @property
    def tag(self):
        if self.mode == "three-class":
            return f"ghz{self.n}-3class"
        if self.mode == "fuzzy":
            return f"ghz{self.n}-fuzzy-a{self.a:g}"
        return f"ghz{self.n}-k{self.k}"

    def intervals(self):
        """Per-class p-intervals (closed on the left for class 0)."""
        n = self.n
        if self.mode == "three-class":
            b3, b2 = qs.bound_k_separable(n, 3).value, qs.bound_k_separable(n, 2).value
            return [(0.0, b3), (b3, b2), (b2, 1.0)]
        if self.mode == "binary":
            b = qs.bound_k_separable(n, self.k).value
            return [(0.0, b), (b, 1.0)]
        return list(fuzzy_intervals(n, self.a))


def fuzzy_intervals(n, a):
    """Loosened 3-separable / 3-nonseparable p-intervals around the unknown b_3."""
    b2 = qs.bound_k_separable(n, 2).value
    b4 = qs.bound_k_separable(n, 4).value
    sep_hi = b4 + a * (b2 - b4) / 4
    nonsep_lo = b2 - a * 2 * (b2 - b4) / 3
    if not sep_hi < nonsep_lo:
        raise ValueError(f"fuzzy intervals overlap for a={a}")
    return (0.0, sep_hi), (nonsep_lo, 1.0)


def label_ghz(n, p, task):
    """Class index of the noisy GHZ state with weight ``p`` under ``task``."""
    if task.n != n:
        raise ValueError("task is for a different qubit count")
    ivs = task.intervals()
    if task.mode == "fuzzy":
        for c, (lo, hi) in enumerate(ivs):
            if lo <= p <= hi:
                return c
        raise ValueError(f"p={p} lies between the fuzzy intervals")
    for c, (_, hi) in enumerate(ivs):
        if p <= hi:
            return c
    return len(ivs) - 1


def _ghz_sample(n, p, **extra):
    return dict({"family": "ghz", "n": n, "p": float(p)}, **extra)


def _draw_in_class(task, c, rng):
    lo, hi = task.intervals()[c]
    while True:
        p = float(rng.uniform(lo, hi))
        if label_ghz(task.n, p, task) == c:
            return p


def _ghz_dataset(task, rows, seed, labeled, states=False):
    n = task.n
    params = []
    for c, prm in rows:
        prm = dict(prm)
        if not labeled:
            prm["truth"] = c
        params.append(prm)
    mats = [state_from_params(p) for p in params] if (states or task.scheme != "GHZ") else None
    if task.scheme == "GHZ":
        feats = np.array([_ghz_features(p) for p in params]) if params else np.zeros((0, 2))
    else:
        feats = featurize(mats, task.scheme)
    labels = [c if labeled else -1 for c, _ in rows]
    return Dataset(feats, labels, task.class_count, task.tag, seed, [], params,
                   mats if mats is not None else None)


def _ghz_features(params):
    # noisy GHZ under a Pauli string is cheap to write down but the matrix is
    # still built here to keep the featurisation path uniform
    return qs.features_ghz(state_from_params(params))


def gen_ghz_labeled(task, size, seed, tag="labeled"):
    """Equal class counts; when ``size`` is not a multiple of the class count the lower classes get one more."""
    C = task.class_count
    counts = [size // C + (1 if c < size % C else 0) for c in range(C)]
    per = [[(c, _ghz_sample(task.n, _draw_in_class(task, c, stream(seed, tag, c, i))))
            for i in range(counts[c])] for c in range(C)]
    return _ghz_dataset(task, _interleave(per), seed, labeled=True)


def gen_ghz_unlabeled(task, u, seed, tag="unlabeled"):
    """Uniform p (on [0, 1], or on the fuzzy intervals) balanced to equal class counts.

    Short separable classes are filled half by convex mixes of their own
    members and half by fresh draws from the class interval; the most
    entangled class only gets fresh draws.
    """
    C = task.class_count
    ivs = task.intervals()
    targets = [u // C + (1 if c < u % C else 0) for c in range(C)]
    rng = stream(seed, tag, "raw")
    got = [[] for _ in range(C)]
    for _ in range(u):
        if task.mode == "fuzzy":
            lengths = np.array([hi - lo for lo, hi in ivs])
            c0 = int(rng.choice(C, p=lengths / lengths.sum()))
            p = float(rng.uniform(*ivs[c0]))
        else:
            p = float(rng.uniform(0, 1))
        try:
            c = label_ghz(task.n, p, task)
        except ValueError:
            continue
        if len(got[c]) < targets[c]:
            got[c].append(_ghz_sample(task.n, p))
    for c in range(C):
        deficit = targets[c] - len(got[c])
        if deficit <= 0:
            continue
        separable = c < C - 1
        n_mix = deficit // 2 if separable and len(got[c]) >= 2 else 0
        for i in range(deficit - n_mix):
            got[c].append(_ghz_sample(task.n, _draw_in_class(task, c, stream(seed, tag, "fill", c, i))))
        if n_mix:
            ps = [s["p"] for s in got[c]]
            mrng = stream(seed, tag, "mix", c)
            for _ in range(n_mix):
                a, b = mrng.choice(len(ps), size=2, replace=False)
                lam = mrng.uniform(0, 1)
                # lam rho(p_a) + (1 - lam) rho(p_b) = rho(lam p_a + (1 - lam) p_b)
                got[c].append(_ghz_sample(task.n, lam * ps[a] + (1 - lam) * ps[b], mixed=1))
    rows = _interleave([[(c, s) for s in got[c]] for c in range(C)])
    return _ghz_dataset(task, rows, seed, labeled=False)


def gen_ghz_sets(task, l, u, seed):
    """(labeled, unlabeled) datasets for a noisy GHZ task."""
    return gen_ghz_labeled(task, l, seed), gen_ghz_unlabeled(task, u, seed)


def gen_fuzzy_3sep(n, a, l, u, seed):
    return gen_ghz_sets(GhzTask(n, "fuzzy", 3, a), l, u, seed)


def ghz_class_test_set(size, seed, n=3, tag="ghz-class"):
    """Noisy 3-qubit GHZ states, each rotated once by random single-qubit unitaries."""
    task = GhzTask(n, "three-class")
    C = task.class_count
    rows = []
    per = [[] for _ in range(C)]
    for c in range(C):
        for i in range(size // C):
            rng = stream(seed, tag, c, i)
            p = _draw_in_class(task, c, rng)
            rho = qs.ghz_noisy(n, p)
            us = [qs.random_unitary(2, rng) for _ in range(n)]
            rho = qs.local_unitary_conjugate(rho, us)
            per[c].append((c, {"family": "ghz-lu", "n": n, "p": p, "rho": rho}, rho))
    rows = _interleave(per)
    states = [r for _, _, r in rows]
    return _from_states(states, [c for c, _, _ in rows], task.scheme, task.tag + "-lu", seed, C,
                        [p for _, p, _ in rows])


# --- local-unitary augmentation -------------------------------------------------------

def random_pauli_word(n, rng):
    """Uniformly random non-identity Pauli string of length n."""
    code = int(rng.integers(1, 4**n))
    return tuple((code >> (2 * (n - 1 - q))) & 3 for q in range(n))


def augment_unitary(ds, K, seed, scheme=None, kind=None, tag="augment"):
    """(K + 1) views per sample, grouped by parent; view 0 is the original.

    ``kind`` is ``"haar"`` (independent Haar unitary per qubit) or ``"pauli"``
    (a random non-identity Pauli string); the default is Pauli for the
    two-number GHZ features and Haar otherwise.
    """
    scheme = scheme or _scheme_of(ds)
    kind = kind or ("pauli" if scheme == "GHZ" else "haar")
    if K == 0:
        return ds
    feats, labels, sources, params, states = [], [], [], [], []
    for i in range(len(ds)):
        base = ds.params[i]
        if base.get("family") is None and ds.states[i] is None:
            raise ValueError(f"sample {i} carries no state to augment")
        rho = ds.state(i)
        n = rho.shape[0].bit_length() - 1
        views, vparams = [rho], [base]
        for k in range(1, K + 1):
            rng = stream(seed, tag, i, k)
            if kind == "pauli":
                word = random_pauli_word(n, rng)
                if base.get("family") in COMPACT_FAMILIES and "rho" not in base:
                    if "word" in base:
                        # P2 P1 rho P1^+ P2^+ only depends on P2 P1 up to a phase
                        word = _compose_words(base["word"], word)
                    root = {kk: vv for kk, vv in base.items() if kk not in ("word", "parent", "view")}
                    vp = dict(root, word=word, parent=i, view=k)
                    view = state_from_params(vp)
                else:
                    view = qs.pauli_string_conjugate(rho, word)
                    vp = {"family": "view", "parent": i, "view": k}
            else:
                us = [qs.random_unitary(2, rng) for _ in range(n)]
                view = qs.local_unitary_conjugate(rho, us)
                vp = {"family": "view", "parent": i, "view": k}
            if "truth" in base:
                vp["truth"] = base["truth"]
            views.append(view)
            vparams.append(vp)
        feats.append(featurize(views, scheme))
        labels.extend([ds.labels[i]] * (K + 1))
        sources.extend([ds.sources[i]] + [f"augmented-from:{i}"] * K)
        params.extend(vparams)
        keep = kind != "pauli" or base.get("family") not in COMPACT_FAMILIES
        states.extend(views if keep else [ds.states[i]] + [None] * K)
    return Dataset(np.concatenate(feats), labels, ds.class_count, ds.family, ds.seed, sources, params, states,
                   ds.augmentations + K)


def _compose_words(w1, w2):
    # sigma_a sigma_b is proportional to sigma_{a xor b} in the (x=1, z=3, y=2) encoding
    # with x <-> 01, z <-> 10, y <-> 11 bit pairs
    enc = {0: 0, 1: 1, 3: 2, 2: 3}
    dec = {v: k for k, v in enc.items()}
    return tuple(dec[enc[a] ^ enc[b]] for a, b in zip(w1, w2))


def _scheme_of(ds):
    for scheme, d in SCHEME_DIMS.items():
        if d == ds.feature_dim:
            return scheme
    raise ValueError(f"no feature scheme has dimension {ds.feature_dim}")


def augment_once(ds, seed, scheme=None, kind=None, tag="view"):
    """Each sample replaced by one random local-unitary view of itself."""
    aug = augment_unitary(ds, 1, seed, scheme=scheme, kind=kind, tag=tag)
    out = aug.subset(range(1, len(aug), 2))
    out.augmentations = ds.augmentations
    out.sources = [s if s.startswith("augmented") else "augmented-once" for s in out.sources]
    return out


def group_views(ds):
    """Reshape a parent-grouped augmented dataset to (parents, K + 1, d)."""
    per = ds.augmentations + 1
    if len(ds) % per:
        raise ValueError("dataset is not grouped by parent")
    return ds.features.reshape(len(ds) // per, per, ds.feature_dim)


# --- text format ------------------------------------------------------------------------

class DatasetParseError(ValueError):
    def __init__(self, line, msg):
        super().__init__(f"line {line}: {msg}")
        self.line = line


def _fmt(x):
    return format(float(x), ".17g")


def _encode_value(v):
    if isinstance(v, np.ndarray):
        flat = np.asarray(v, dtype=complex).ravel()
        return f"c{v.shape[0]}:" + ":".join(f"{_fmt(z.real)}:{_fmt(z.imag)}" for z in flat)
    if isinstance(v, tuple):
        return "w" + "".join(str(int(x)) for x in v)
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return _fmt(v)
    s = str(v)
    if any(ch in s for ch in ",;= \n"):
        raise ValueError(f"value {s!r} cannot be written")
    return s


def _decode_value(key, s):
    if s.startswith("c") and ":" in s:
        d, *nums = s[1:].split(":")
        d = int(d)
        vals = np.array([float(x) for x in nums])
        if len(vals) != 2 * d * d:
            raise ValueError("matrix payload has the wrong length")
        return (vals[0::2] + 1j * vals[1::2]).reshape(d, d)
    if s.startswith("w") and s[1:].isdigit():
        return tuple(int(ch) for ch in s[1:])
    if key in ("p", "theta", "lam"):
        return float(s)
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def _params_for_file(params, state):
    out = dict(params)
    if out.get("family") not in COMPACT_FAMILIES and "rho" not in out and state is not None:
        out["rho"] = state
    return out


def dumps_dataset(ds, extra=None):
    head = (f"dataset-v1 feature_dim={ds.feature_dim} classes={ds.class_count} "
            f"family={ds.family} seed={int(ds.seed)} samples={len(ds)}")
    if ds.augmentations:
        head += f" augment={ds.augmentations}"
    for k, v in (extra or {}).items():
        head += f" {k}={v}"
    lines = [head]
    for i in range(len(ds)):
        feats = ",".join(_fmt(x) for x in ds.features[i])
        label = str(ds.labels[i]) if ds.labels[i] >= 0 else "-"
        prm = _params_for_file(ds.params[i], ds.states[i])
        ptxt = ",".join(f"{k}={_encode_value(v)}" for k, v in prm.items()) or "-"
        lines.append(f"features={feats}; label={label}; source={ds.sources[i]}; params={ptxt}")
    return "\n".join(lines) + "\n"


def save_dataset(ds, path, extra=None):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(dumps_dataset(ds, extra))


def _header_fields(line, magic):
    tokens = line.split()
    if not tokens or tokens[0] != magic:
        raise DatasetParseError(1, f"expected '{magic}' header")
    fields = {}
    for tok in tokens[1:]:
        if "=" not in tok:
            raise DatasetParseError(1, f"malformed header token {tok!r}")
        k, v = tok.split("=", 1)
        fields[k] = v
    return fields


def loads_dataset(text):
    lines = text.split("\n")
    if not text.endswith("\n"):
        raise DatasetParseError(len(lines), "file does not end with a newline (truncated?)")
    lines = lines[:-1]
    if not lines:
        raise DatasetParseError(1, "empty file")
    head = _header_fields(lines[0], "dataset-v1")
    try:
        d, c = int(head["feature_dim"]), int(head["classes"])
        family, seed = head["family"], int(head["seed"])
        count = int(head["samples"])
    except (KeyError, ValueError) as exc:
        raise DatasetParseError(1, f"bad header: {exc}") from None
    if len(lines) - 1 != count:
        raise DatasetParseError(len(lines), f"expected {count} samples, found {len(lines) - 1}")
    feats, labels, sources, params, states = [], [], [], [], []
    for ln, line in enumerate(lines[1:], start=2):
        parts = line.split("; ")
        if len(parts) != 4 or not all(p.startswith(k + "=") for p, k in
                                      zip(parts, ("features", "label", "source", "params"))):
            raise DatasetParseError(ln, "expected 'features=...; label=...; source=...; params=...'")
        try:
            x = [float(v) for v in parts[0][len("features="):].split(",")]
            lab = parts[1][len("label="):]
            y = -1 if lab == "-" else int(lab)
            prm = {}
            ptxt = parts[3][len("params="):]
            if ptxt != "-":
                for kv in ptxt.split(","):
                    k, v = kv.split("=", 1)
                    prm[k] = _decode_value(k, v)
        except ValueError as exc:
            raise DatasetParseError(ln, str(exc)) from None
        if len(x) != d:
            raise DatasetParseError(ln, f"expected {d} features, got {len(x)}")
        if not -1 <= y < c:
            raise DatasetParseError(ln, f"label {y} out of range")
        feats.append(x)
        labels.append(y)
        sources.append(parts[2][len("source="):])
        params.append(prm)
        states.append(prm.get("rho"))
    features = np.array(feats, dtype=float).reshape(len(feats), d)
    ds = Dataset(features, np.array(labels, dtype=int), c, family, seed, sources, params, states,
                 int(head.get("augment", 0)))
    return ds


def load_dataset(path):
    with open(path, encoding="ascii") as fh:
        return loads_dataset(fh.read())
