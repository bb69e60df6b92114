"""Minimal differentiable classifiers on flat parameter vectors.

Two model kinds: multinomial logistic regression and a ReLU MLP. Parameters
live in a single float64 vector so the round engine can mix, average and
perturb models without knowing the architecture. Batch reductions are
canonicalized (sort + dedup with counts) which makes loss/gradient values
bit-identical under batch shuffling and sample duplication.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericFailure
from .rng import substream

MODEL_KINDS = ("logistic", "mlp")


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description; parameter count is a pure function of it."""

    kind: str
    input_dim: int
    num_classes: int
    hidden: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"model kind {self.kind!r} not one of {MODEL_KINDS}")
        if self.input_dim < 1:
            raise ConfigError("input_dim must be positive")
        if self.num_classes < 2:
            raise ConfigError("num_classes must be at least 2")
        if self.kind == "logistic" and self.hidden:
            raise ConfigError("logistic model takes no hidden layers")
        if self.kind == "mlp" and (not self.hidden or any(h < 1 for h in self.hidden)):
            raise ConfigError("mlp needs a non-empty list of positive hidden sizes")

    def layer_dims(self) -> list[tuple[int, int]]:
        sizes = [self.input_dim, *self.hidden, self.num_classes]
        return list(zip(sizes[:-1], sizes[1:]))

    @property
    def dim(self) -> int:
        return sum(fi * fo + fo for fi, fo in self.layer_dims())


def init_params(spec: ModelSpec, seed: int) -> np.ndarray:
    """Xavier-uniform weights, zero biases; bit-identical for equal (spec, seed)."""
    rng = substream(seed, "init")
    chunks = []
    for fan_in, fan_out in spec.layer_dims():
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        chunks.append(rng.uniform(-bound, bound, size=fan_in * fan_out))
        chunks.append(np.zeros(fan_out))
    return np.concatenate(chunks)


def unpack(spec: ModelSpec, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Read-only (W, b) views into the flat vector, one pair per layer."""
    if params.shape != (spec.dim,):
        raise ValueError(f"params length {params.shape} != model dim {spec.dim}")
    layers, at = [], 0
    for fan_in, fan_out in spec.layer_dims():
        w = params[at : at + fan_in * fan_out].reshape(fan_in, fan_out)
        at += fan_in * fan_out
        b = params[at : at + fan_out]
        at += fan_out
        layers.append((w, b))
    return layers


def _forward(spec: ModelSpec, params: np.ndarray, features: np.ndarray):
    """Returns (logits, activations); activations[k] feeds layer k."""
    layers = unpack(spec, params)
    acts = [features]
    h = features
    for w, b in layers[:-1]:
        h = np.maximum(h @ w + b, 0.0)
        acts.append(h)
    w, b = layers[-1]
    return h @ w + b, acts


def logits(spec: ModelSpec, params: np.ndarray, features: np.ndarray) -> np.ndarray:
    return _forward(spec, params, features)[0]


def _canonical_batch(features: np.ndarray, labels: np.ndarray):
    """Sorted unique samples with multiplicities.

    Weighting by count/B makes the batch mean exactly invariant to shuffling
    and to duplicating every sample (count/B is unchanged by doubling).
    """
    n = len(labels)
    keys = [(int(labels[k]), features[k].tobytes()) for k in range(n)]
    order = sorted(range(n), key=keys.__getitem__)
    uniq_rows, counts = [], []
    prev = None
    for k in order:
        if keys[k] == prev:
            counts[-1] += 1
        else:
            uniq_rows.append(k)
            counts.append(1)
            prev = keys[k]
    return features[uniq_rows], labels[uniq_rows], np.asarray(counts, dtype=np.float64)


def loss_and_grad(
    spec: ModelSpec, params: np.ndarray, features: np.ndarray, labels: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its analytic gradient."""
    if len(labels) == 0:
        raise ValueError("empty batch")
    batch_size = float(len(labels))
    xs, ys, counts = _canonical_batch(np.asarray(features), np.asarray(labels))

    z, acts = _forward(spec, params, xs)
    zmax = z.max(axis=1, keepdims=True)
    shifted = z - zmax
    expz = np.exp(shifted)
    sumexp = expz.sum(axis=1)
    # per-sample loss: logsumexp(z) - z[y]
    rows = np.arange(len(ys))
    losses = np.log(sumexp) - shifted[rows, ys]
    loss = float(np.dot(counts, losses) / batch_size)
    if not np.isfinite(loss):
        raise NumericFailure("non-finite loss")

    probs = expz / sumexp[:, None]
    dz = probs
    dz[rows, ys] -= 1.0
    dz *= (counts / batch_size)[:, None]

    layers = unpack(spec, params)
    grads: list[np.ndarray] = [None] * len(layers)
    delta = dz
    for k in range(len(layers) - 1, -1, -1):
        w, _ = layers[k]
        gw = acts[k].T @ delta
        gb = delta.sum(axis=0)
        grads[k] = np.concatenate([gw.ravel(), gb])
        if k > 0:
            delta = (delta @ w.T) * (acts[k] > 0.0)
    grad = np.concatenate(grads)
    if not np.all(np.isfinite(grad)):
        raise NumericFailure("non-finite gradient")
    return loss, grad


def accuracy(spec: ModelSpec, params: np.ndarray, features: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of argmax-correct samples; ties break to the lowest class."""
    if len(labels) == 0:
        raise ValueError("empty sample set")
    preds = np.argmax(logits(spec, params, features), axis=1)
    return float(np.mean(preds == labels))


def finite_diff_grad(
    spec: ModelSpec,
    params: np.ndarray,
    features: np.ndarray,
    labels: np.ndarray,
    eps: float = 1e-5,
) -> np.ndarray:
    """Central-difference gradient oracle, one coordinate at a time."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    grad = np.empty_like(params)
    probe = params.copy()
    for k in range(len(params)):
        orig = probe[k]
        probe[k] = orig + eps
        up, _ = loss_and_grad(spec, probe, features, labels)
        probe[k] = orig - eps
        down, _ = loss_and_grad(spec, probe, features, labels)
        probe[k] = orig
        grad[k] = (up - down) / (2.0 * eps)
    return grad
