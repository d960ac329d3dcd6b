"""
Fully connected ReLU network with a softmax head, written out by hand:
forward pass, cross-entropy losses over a labeled and a pseudo-labeled
batch, exact backpropagation and the Adam optimizer.

Weights are stored as ``(fan_in, fan_out)`` matrices so a batch ``X`` of
row vectors maps to ``X @ W + b``. A network computes in the dtype of its
parameters (float64 by default, float32 for faster training runs).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MODEL_MAGIC = "mlp-v1"
PROB_FLOOR = 1e-12
BATCH = 64
# pseudo samples per step are capped at PSEUDO_RATIO * batch
PSEUDO_RATIO = 2


class NonFiniteError(ArithmeticError):
    """Raised when an optimizer step would write NaN or infinity into a model."""


class ModelParseError(ValueError):
    def __init__(self, line, msg):
        super().__init__(f"line {line}: {msg}")
        self.line = line


@dataclass
class Mlp:
    layer_dims: tuple
    weights: list
    biases: list

    def __post_init__(self):
        self.layer_dims = tuple(int(d) for d in self.layer_dims)
        if len(self.layer_dims) < 2 or min(self.layer_dims) < 1:
            raise ValueError(f"bad layer dims {self.layer_dims}")
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("wrong number of parameter tensors")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            shape = (self.layer_dims[i], self.layer_dims[i + 1])
            if w.shape != shape or b.shape != (shape[1],):
                raise ValueError(f"layer {i}: expected W{shape}, b({shape[1]},), got {w.shape}, {b.shape}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise NonFiniteError(f"layer {i} has non-finite parameters")

    @property
    def dtype(self):
        return self.weights[0].dtype

    @property
    def input_dim(self):
        return self.layer_dims[0]

    @property
    def class_count(self):
        return self.layer_dims[-1]

    @property
    def param_count(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def params(self):
        """Parameter tensors in the order W0, b0, W1, b1, ..."""
        return [t for wb in zip(self.weights, self.biases) for t in wb]

    def copy(self):
        return Mlp(self.layer_dims, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def same_as(self, other):
        """Bitwise parameter equality."""
        return self.layer_dims == other.layer_dims and all(
            np.array_equal(a, b) for a, b in zip(self.params(), other.params()))


def _from_params(dims, params):
    return Mlp(dims, list(params[0::2]), list(params[1::2]))


def mlp_new(layer_dims, seed, dtype=np.float64):
    """He-normal weights and zero biases."""
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2 or min(dims) < 1:
        raise ValueError(f"bad layer dims {dims}")
    rng = np.random.default_rng(seed)
    weights = [rng.normal(0.0, math.sqrt(2.0 / a), size=(a, b)).astype(dtype)
               for a, b in zip(dims[:-1], dims[1:])]
    biases = [np.zeros(b, dtype=dtype) for b in dims[1:]]
    return Mlp(dims, weights, biases)


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def as_dtype(m, dtype):
    return Mlp(m.layer_dims, [w.astype(dtype) for w in m.weights], [b.astype(dtype) for b in m.biases])


def _check_input(m, x):
    x = np.asarray(x, dtype=m.dtype)
    if x.shape[-1] != m.input_dim:
        raise ValueError(f"input has dimension {x.shape[-1]}, model expects {m.input_dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input")
    return x


def logits(m, x):
    h = _check_input(m, x)
    last = len(m.weights) - 1
    for i, (w, b) in enumerate(zip(m.weights, m.biases)):
        h = h @ w + b
        if i < last:
            h = np.maximum(h, 0.0)
    return h


def forward(m, x):
    """Class probabilities for one feature vector or a batch of rows."""
    return softmax(logits(m, x))


def predict(m, x):
    """Argmax class; ties go to the smallest index."""
    return np.argmax(forward(m, x), axis=-1)


def cross_entropy(target, predicted):
    """-sum_c target_c ln(predicted_c), with predicted clamped to [1e-12, 1]; batched over rows."""
    p = np.clip(np.asarray(predicted, dtype=float), PROB_FLOOR, 1.0)
    return -np.sum(np.asarray(target, dtype=float) * np.log(p), axis=-1)


@dataclass(frozen=True)
class LossReport:
    total: float
    supervised: float
    unsupervised: float
    lambda_u: float


def _as_xy(batch, class_count, dtype=np.float64):
    """Accept ``(X, Y)`` pairs, datasets, or None; returns arrays of ``dtype``."""
    if batch is None:
        return np.zeros((0, 0), dtype=dtype), np.zeros((0, class_count), dtype=dtype)
    x, y = (batch.features, batch.onehot) if hasattr(batch, "features") else batch
    return np.asarray(x, dtype=dtype), np.asarray(y, dtype=dtype)


def loss_and_grad(m, labeled, pseudo, lambda_u):
    """Loss L_s + lambda_u L_u and its gradient (same order as ``m.params()``).

    Both terms are per-sample means. Gradients come from the log-softmax
    form, which equals the clamped loss wherever no probability is below
    the clamp.
    """
    xs, ys = _as_xy(labeled, m.class_count, m.dtype)
    xu, yu = _as_xy(pseudo, m.class_count, m.dtype)
    if len(xs) == 0:
        raise ValueError("labeled batch is empty")
    ns, nu = len(xs), len(xu)
    x = np.concatenate([xs, xu]) if nu else xs
    y = np.concatenate([ys, yu]) if nu else ys
    x = _check_input(m, x)
    y = np.asarray(y, dtype=m.dtype)

    acts = [x]
    h = x
    last = len(m.weights) - 1
    for i, (w, b) in enumerate(zip(m.weights, m.biases)):
        h = h @ w + b
        if i < last:
            h = np.maximum(h, 0.0)
        acts.append(h)
    p = softmax(acts[-1])
    ce = cross_entropy(y, p)
    ls = float(np.mean(ce[:ns]))
    lu = float(np.mean(ce[ns:])) if nu else 0.0
    report = LossReport(ls + lambda_u * lu, ls, lu, float(lambda_u))

    weight = np.full(len(x), 1.0 / ns, dtype=m.dtype)
    if nu:
        weight[ns:] = lambda_u / nu
    # d(-sum y log softmax z)/dz = p * sum(y) - y
    delta = (p * y.sum(axis=1, keepdims=True) - y) * weight[:, None]
    grads = [None] * (2 * len(m.weights))
    for i in range(last, -1, -1):
        grads[2 * i] = acts[i].T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        if i:
            delta = (delta @ m.weights[i].T) * (acts[i] > 0)
    return report, grads


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_new(model):
    return AdamState([np.zeros_like(p) for p in model.params()], [np.zeros_like(p) for p in model.params()])


def _check_grads(params, grads, t):
    if len(grads) != len(params) or any(g.shape != p.shape for g, p in zip(grads, params)):
        raise ValueError("gradient shapes do not match the model")
    for i, g in enumerate(grads):
        # a NaN or infinity anywhere makes the sum non-finite
        if not np.isfinite(g.sum()):
            raise NonFiniteError(f"non-finite gradient in tensor {i} at step {t}")


def _adam_inplace(params, grads, state, lr):
    """Advance ``state`` and ``params`` by one Adam step, overwriting both."""
    b1, b2, eps = state.beta1, state.beta2, state.eps
    state.t += 1
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for p, g, m1, v1 in zip(params, grads, state.m, state.v):
        m1 *= b1
        m1 += (1 - b1) * g
        v1 *= b2
        v1 += (1 - b2) * (g * g)
        denom = v1 * (1 / c2)
        np.sqrt(denom, out=denom)
        denom += eps
        step = m1 * (lr / c1)
        step /= denom
        p -= step


def adam_step(model, grads, state, lr):
    """One bias-corrected Adam update; returns a new model and a new state."""
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    params = [p.copy() for p in model.params()]
    _check_grads(params, grads, state.t + 1)
    new = AdamState([m.copy() for m in state.m], [v.copy() for v in state.v], state.t,
                    state.beta1, state.beta2, state.eps)
    _adam_inplace(params, grads, new, lr)
    return _from_params(model.layer_dims, params), new


@dataclass
class FitResult:
    model: Mlp
    adam: AdamState
    losses: list = field(default_factory=list)


def fit(model, labeled, pseudo, lambda_u, epochs, lr, rng, *, batch=BATCH, pseudo_ratio=PSEUDO_RATIO,
        adam=None):
    """Mini-batch Adam over ``epochs`` passes of the labeled set.

    Each epoch shuffles both sets. Every labeled mini-batch is paired with a
    slice of the shuffled pseudo set of size ``ceil(|pseudo| / steps)``,
    capped at ``pseudo_ratio * batch``, so a small pseudo set is covered once
    per epoch and a large one is subsampled. Returns the model, the final
    optimizer state and the mean step loss of every epoch.
    """
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    xs, ys = _as_xy(labeled, model.class_count, model.dtype)
    xu, yu = _as_xy(pseudo, model.class_count, model.dtype)
    ns, nu = len(xs), len(xu)
    if ns == 0:
        raise ValueError("labeled set is empty")
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    steps = math.ceil(ns / batch)
    q = min(math.ceil(nu / steps), pseudo_ratio * batch) if nu else 0
    adam = adam or adam_new(model)
    # work on private copies so the caller's model and state stay untouched
    model = model.copy()
    adam = AdamState([m.copy() for m in adam.m], [v.copy() for v in adam.v], adam.t,
                     adam.beta1, adam.beta2, adam.eps)
    params = model.params()
    losses = []
    for _ in range(epochs):
        order = rng.permutation(ns)
        porder = rng.permutation(nu) if nu else None
        total = 0.0
        for s in range(steps):
            idx = order[s * batch:(s + 1) * batch]
            pb = None
            if q:
                pidx = porder[np.arange(s * q, (s + 1) * q) % nu]
                pb = (xu[pidx], yu[pidx])
            report, grads = loss_and_grad(model, (xs[idx], ys[idx]), pb, lambda_u)
            _check_grads(params, grads, adam.t + 1)
            _adam_inplace(params, grads, adam, lr)
            total += report.total
        losses.append(total / steps)
    # re-validate (finite parameters, shapes) once at the end
    return FitResult(_from_params(model.layer_dims, params), adam, losses)


def train_epochs(model, labeled, pseudo, lambda_u, epochs, lr, rng, **kw):
    """Train for ``epochs`` passes from a fresh optimizer state; see :func:`fit`."""
    return fit(model, labeled, pseudo, lambda_u, epochs, lr, rng, **kw).model


def mean_loss(model, labeled, pseudo=None, lambda_u=0.0):
    return loss_and_grad(model, labeled, pseudo, lambda_u)[0]


# --- text format ---------------------------------------------------------------

def _fmt(x):
    return format(float(x), ".17g")


def dumps_model(model, extra=None):
    head = [MODEL_MAGIC, "dims=" + ",".join(map(str, model.layer_dims)), "activation=relu", "output=softmax"]
    if model.dtype != np.float64:
        head.append(f"dtype={model.dtype.name}")
    head += [f"{k}={v}" for k, v in (extra or {}).items()]
    lines = [" ".join(head)]
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        lines.append(f"W{i}=" + ",".join(map(_fmt, w.ravel())))
        lines.append(f"b{i}=" + ",".join(map(_fmt, b)))
    return "\n".join(lines) + "\n"


def save_model(model, path, extra=None):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(dumps_model(model, extra))


def model_header(text):
    """``key=value`` fields of a model file's first line."""
    first = text.split("\n", 1)[0].split()
    if not first or first[0] != MODEL_MAGIC:
        raise ModelParseError(1, f"expected {MODEL_MAGIC!r} header, got {first[0] if first else ''!r}")
    fields = {}
    for tok in first[1:]:
        k, sep, v = tok.partition("=")
        if not sep:
            raise ModelParseError(1, f"malformed header token {tok!r}")
        fields[k] = v
    return fields


def loads_model(text):
    fields = model_header(text)
    if fields.get("activation") != "relu" or fields.get("output") != "softmax":
        raise ModelParseError(1, "only relu/softmax networks are supported")
    try:
        dims = tuple(int(d) for d in fields["dims"].split(","))
    except (KeyError, ValueError):
        raise ModelParseError(1, "missing or malformed dims") from None
    if len(dims) < 2 or min(dims) < 1:
        raise ModelParseError(1, f"bad dims {dims}")
    dtype = fields.get("dtype", "float64")
    if dtype not in ("float64", "float32"):
        raise ModelParseError(1, f"unsupported dtype {dtype!r}")
    if not text.endswith("\n"):
        raise ModelParseError(text.count("\n") + 1, "truncated file (no final newline)")
    lines = text.split("\n")[1:-1]
    nl = len(dims) - 1
    if len(lines) != 2 * nl:
        raise ModelParseError(len(lines) + 1, f"expected {2 * nl} tensor lines, found {len(lines)}")
    params = []
    for j, line in enumerate(lines):
        i, kind = j // 2, "Wb"[j % 2]
        name, sep, body = line.partition("=")
        if not sep or name != f"{kind}{i}":
            raise ModelParseError(j + 2, f"expected {kind}{i}=")
        try:
            vals = np.array([float(v) for v in body.split(",")])
        except ValueError:
            raise ModelParseError(j + 2, "malformed number") from None
        shape = (dims[i], dims[i + 1]) if kind == "W" else (dims[i + 1],)
        if vals.size != math.prod(shape):
            raise ModelParseError(j + 2, f"{name} has {vals.size} values, expected {math.prod(shape)}")
        if not np.all(np.isfinite(vals)):
            raise ModelParseError(j + 2, "non-finite parameter")
        params.append(vals.reshape(shape).astype(dtype))
    return _from_params(dims, params)


def load_model(path):
    with open(path, encoding="ascii") as fh:
        return loads_model(fh.read())
