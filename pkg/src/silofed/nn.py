"""Small dense-network core: float64 MLPs with softmax output.

Parameters live in one flat vector so that aggregation, checkpointing, and
finite-difference checks can treat a model as a point in R^n. The forward and
backward passes are exact analytic implementations; no autodiff framework is
involved.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .rng import generator

ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description: layer widths plus hidden activation."""

    layer_sizes: tuple[int, ...]
    activation: str = "relu"

    def __post_init__(self) -> None:
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ValueError("layer_sizes needs at least an input and an output width")
        if any(s < 1 for s in sizes):
            raise ValueError(f"layer widths must be >= 1, got {sizes}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    @property
    def flat_size(self) -> int:
        return _layout(self)[-1][1].stop


@lru_cache(maxsize=None)
def _layout(spec: ModelSpec) -> tuple[tuple[slice, slice], ...]:
    """Per-layer (weight, bias) slices into the flat parameter vector."""
    slices = []
    offset = 0
    for n_in, n_out in zip(spec.layer_sizes, spec.layer_sizes[1:]):
        w = slice(offset, offset + n_in * n_out)
        b = slice(w.stop, w.stop + n_out)
        slices.append((w, b))
        offset = b.stop
    return tuple(slices)


class ModelParams:
    """Immutable view of a model's parameters as one flat float64 vector."""

    __slots__ = ("spec", "flat")

    def __init__(self, spec: ModelSpec, flat: np.ndarray):
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (spec.flat_size,):
            raise ValueError(f"expected flat shape ({spec.flat_size},), got {flat.shape}")
        if not np.isfinite(flat).all():
            raise ValueError("parameters must be finite")
        flat = flat.copy()
        flat.setflags(write=False)
        object.__setattr__(self, "spec", spec)
        object.__setattr__(self, "flat", flat)

    def __setattr__(self, name: str, value) -> None:
        raise AttributeError("ModelParams is immutable")

    def __eq__(self, other) -> bool:
        if not isinstance(other, ModelParams):
            return NotImplemented
        return self.spec == other.spec and self.flat.tobytes() == other.flat.tobytes()

    def __hash__(self) -> int:
        return hash((self.spec, self.flat.tobytes()))

    def __repr__(self) -> str:
        return f"ModelParams(spec={self.spec}, n={self.flat.size})"

    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Read-only (W, b) views; W has shape (n_in, n_out)."""
        out = []
        for (w_sl, b_sl), (n_in, n_out) in zip(_layout(self.spec), _shapes(self.spec)):
            out.append((self.flat[w_sl].reshape(n_in, n_out), self.flat[b_sl]))
        return out


def _shapes(spec: ModelSpec) -> list[tuple[int, int]]:
    return list(zip(spec.layer_sizes, spec.layer_sizes[1:]))


@dataclass(frozen=True)
class Batch:
    """A labelled sample block: features (n, d) float64, labels (n,) ints."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        f = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if f.ndim != 2 or f.shape[0] < 1:
            raise ValueError(f"features must be a non-empty 2-D array, got shape {f.shape}")
        if y.shape != (f.shape[0],):
            raise ValueError(f"labels shape {y.shape} does not match {f.shape[0]} rows")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class HyperParams:
    """Local-training knobs shared by clients and server-side proxies.

    eta may be zero (useful for identity-update diagnostics); everything else
    is strictly positive. tau_prime is the proxy step count and defaults to
    tau so proxies mirror real clients unless configured otherwise.
    """

    eta: float
    tau: int
    tau_prime: int
    batch_size: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.eta) or self.eta < 0:
            raise ValueError(f"eta must be finite and >= 0, got {self.eta}")
        if self.tau < 1:
            raise ValueError(f"tau must be >= 1, got {self.tau}")
        if self.tau_prime < 1:
            raise ValueError(f"tau_prime must be >= 1, got {self.tau_prime}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


def init_params(spec: ModelSpec, seed: int) -> ModelParams:
    """Uniform(-l, l) weights with l = sqrt(6 / (n_in + n_out)), zero biases."""
    rng = generator(seed)
    flat = np.zeros(spec.flat_size, dtype=np.float64)
    for (w_sl, _), (n_in, n_out) in zip(_layout(spec), _shapes(spec)):
        limit = np.sqrt(6.0 / (n_in + n_out))
        flat[w_sl] = rng.uniform(-limit, limit, size=n_in * n_out)
    return ModelParams(spec, flat)


def _forward(spec: ModelSpec, flat: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Logits only; used by evaluate and predict_proba."""
    a = x
    layers = [(flat[w].reshape(ni, no), flat[b]) for (w, b), (ni, no) in zip(_layout(spec), _shapes(spec))]
    for w, b in layers[:-1]:
        z = a @ w + b
        a = np.maximum(z, 0.0) if spec.activation == "relu" else np.tanh(z)
    w, b = layers[-1]
    return a @ w + b


def _loss_and_grad_flat(
    spec: ModelSpec, flat: np.ndarray, features: np.ndarray, labels: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and its exact gradient, both in float64.

    The loss is computed in log-sum-exp form so extreme logits neither
    overflow nor produce log(0).
    """
    layout = _layout(spec)
    shapes = _shapes(spec)
    layers = [(flat[w].reshape(ni, no), flat[b]) for (w, b), (ni, no) in zip(layout, shapes)]
    n = features.shape[0]

    acts = [features]
    zs = []
    a = features
    for w, b in layers[:-1]:
        z = a @ w + b
        zs.append(z)
        a = np.maximum(z, 0.0) if spec.activation == "relu" else np.tanh(z)
        acts.append(a)
    w_out, b_out = layers[-1]
    logits = a @ w_out + b_out

    zmax = logits.max(axis=1, keepdims=True)
    shifted = logits - zmax
    exps = np.exp(shifted)
    sumexp = exps.sum(axis=1, keepdims=True)
    rows = np.arange(n)
    loss = float(np.mean(np.log(sumexp[:, 0]) - shifted[rows, labels]))

    # d(loss)/d(logits) for mean cross-entropy: (softmax - onehot) / n
    delta = exps / sumexp
    delta[rows, labels] -= 1.0
    delta /= n

    grad = np.zeros_like(flat)
    for i in range(len(layers) - 1, -1, -1):
        w_sl, b_sl = layout[i]
        w, _ = layers[i]
        grad[w_sl] = (acts[i].T @ delta).ravel()
        grad[b_sl] = delta.sum(axis=0)
        if i > 0:
            upstream = delta @ w.T
            if spec.activation == "relu":
                delta = upstream * (zs[i - 1] > 0.0)
            else:
                delta = upstream * (1.0 - acts[i] ** 2)
    return loss, grad


def _check_batch(spec: ModelSpec, features: np.ndarray, labels: np.ndarray) -> None:
    if features.shape[0] == 0:
        raise ValueError("empty batch")
    if features.shape[1] != spec.input_dim:
        raise ValueError(f"feature width {features.shape[1]} does not match input dim {spec.input_dim}")
    if not np.isfinite(features).all():
        raise ValueError("features contain NaN or Inf")
    bad = np.flatnonzero((labels < 0) | (labels >= spec.output_dim))
    if bad.size:
        raise ValueError(f"label {int(labels[bad[0]])} at row {int(bad[0])} outside [0, {spec.output_dim})")


def loss_and_grad(params: ModelParams, batch: Batch) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch plus the flat gradient vector."""
    _check_batch(params.spec, batch.features, batch.labels)
    return _loss_and_grad_flat(params.spec, params.flat, batch.features, batch.labels)


def predict_proba(params: ModelParams, features: np.ndarray) -> np.ndarray:
    """Softmax class probabilities, one row per sample."""
    features = np.asarray(features, dtype=np.float64)
    logits = _forward(params.spec, params.flat, features)
    shifted = logits - logits.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=1, keepdims=True)


def sgd_steps(params: ModelParams, data: Batch, hp: HyperParams, n_steps: int, seed: int) -> ModelParams:
    """Run n_steps of minibatch SGD and return the updated parameters.

    Batches are drawn uniformly with replacement from `data` (any object with
    features/labels arrays) using a counter-based stream keyed by `seed`, so
    the whole call is a pure function of its arguments.
    """
    spec = params.spec
    _check_batch(spec, data.features, data.labels)
    if n_steps < 0:
        raise ValueError(f"n_steps must be >= 0, got {n_steps}")
    rng = generator(seed)
    flat = params.flat.copy()
    n = data.features.shape[0]
    for _ in range(n_steps):
        idx = rng.integers(0, n, size=hp.batch_size)
        _, grad = _loss_and_grad_flat(spec, flat, data.features[idx], data.labels[idx])
        flat -= hp.eta * grad
    return ModelParams(spec, flat)


def evaluate(params: ModelParams, test: Batch) -> float:
    """Argmax accuracy on a test block; logit ties resolve to the lowest class."""
    _check_batch(params.spec, test.features, test.labels)
    logits = _forward(params.spec, params.flat, test.features)
    preds = np.argmax(logits, axis=1)
    return float(np.mean(preds == test.labels))
