"""Small numpy MLP trainer with per-batch weight-norm projection.

The polynomial expansion is only accurate when every hidden neuron's
synaptic potential stays near zero, so hidden-layer weight vectors (bias
included) are projected back onto the unit l1 or l2 ball after every batch.
The output layer is left unconstrained.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .activations import ActivationKind, apply_activation
from .network import NetworkSpec
from .polynomial import Polynomial, eval_poly

log = logging.getLogger(__name__)

DEFAULT_PROJECTION_EPS = 1e-7

LOSSES = ("mse", "softmax_cross_entropy")
CONSTRAINTS = ("none", "l1_norm", "l2_norm")
OPTIMIZERS = ("sgd", "adam")


class TrainingError(RuntimeError):
    pass


class TrainingDivergedError(TrainingError):
    def __init__(self, epoch: int, batch: int):
        super().__init__(f"loss became NaN/inf at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    loss: str = "mse"
    constraint: str = "l1_norm"
    projection_eps: float = DEFAULT_PROJECTION_EPS
    seed: int = 0
    validation_split: float = 0.0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")
        if self.constraint not in CONSTRAINTS:
            raise ValueError(f"constraint must be one of {CONSTRAINTS}")
        if not 0.0 <= self.validation_split < 1.0:
            raise ValueError("validation_split must lie in [0, 1)")


@dataclass
class DatasetSpec:
    """Features ``X`` (n x p) and responses ``Y``.

    For regression ``Y`` is n x c floats; for classification it is an
    n x 1 column of integer labels ``0..c-1``. ``scaling`` holds per-column
    ``center``/``scale`` arrays when the data were mapped to [-1, 1].
    """

    X: np.ndarray
    Y: np.ndarray
    classification: bool = False
    scaling: dict | None = field(default=None)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        Y = np.asarray(self.Y)
        if Y.ndim == 1:
            Y = Y.reshape(-1, 1)
        self.Y = Y.astype(np.int64) if self.classification else Y.astype(np.float64)
        if self.X.shape[0] != self.Y.shape[0]:
            raise ValueError(f"X has {self.X.shape[0]} rows but Y has {self.Y.shape[0]}")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "DatasetSpec":
        return DatasetSpec(self.X[idx], self.Y[idx], self.classification, self.scaling)


def norm_of(w: np.ndarray, norm: str, axis=None) -> np.ndarray:
    if norm in ("l1", "l1_norm"):
        return np.sum(np.abs(w), axis=axis)
    if norm in ("l2", "l2_norm"):
        return np.sqrt(np.sum(w * w, axis=axis))
    raise ValueError(f"unknown norm {norm!r}")


def constraint_project(w, norm: str, epsilon: float = DEFAULT_PROJECTION_EPS) -> np.ndarray:
    """Rescale ``w`` by ``c(|w|) / (|w| + eps)`` where ``c(x) = min(x, 1)``.

    A 2-D ``w`` is treated column by column (one weight vector per neuron).
    """
    w = np.asarray(w, dtype=np.float64)
    nrm = norm_of(w, norm, axis=0)
    return w * (np.minimum(nrm, 1.0) / (nrm + epsilon))


def gen_poly_data(poly: Polynomial, n: int, noise_sd: float = 0.0, seed: int = 0) -> DatasetSpec:
    """Standard-normal features and ``Y = poly(X) + noise``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if noise_sd < 0:
        raise ValueError("noise_sd must be non-negative")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, poly.p))
    Y = eval_poly(poly, X) + noise_sd * rng.standard_normal((n, poly.n_channels))
    return DatasetSpec(X, Y)


def gen_blob_data(
    n: int, p: int, n_classes: int, seed: int = 0, separation: float = 4.0, sd: float = 1.0
) -> DatasetSpec:
    """Gaussian blobs, one per class, with random centres ``separation`` apart on average."""
    rng = np.random.default_rng(seed)
    centres = rng.standard_normal((n_classes, p))
    centres *= separation / np.linalg.norm(centres, axis=1, keepdims=True)
    labels = np.arange(n) % n_classes
    rng.shuffle(labels)
    X = centres[labels] + sd * rng.standard_normal((n, p))
    return DatasetSpec(X, labels, classification=True)


def _unit_scaling(M: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Scaled copy of ``M`` plus the per-column ``center`` and ``scale``."""
    mins, maxs = M.min(axis=0), M.max(axis=0)
    if np.any(maxs <= mins):
        cols = np.flatnonzero(maxs <= mins).tolist()
        raise ValueError(f"cannot scale constant column(s) {cols}")
    # This form maps min and max exactly onto -1 and 1 and never overshoots.
    scaled = 2.0 * ((M - mins) / (maxs - mins)) - 1.0
    return scaled, mins + (maxs - mins) / 2, (maxs - mins) / 2


def scale_to_unit(data: DatasetSpec, scale_response: bool | None = None) -> DatasetSpec:
    """Map each column affinely so its min goes to -1 and its max to +1.

    Responses are scaled too for regression unless ``scale_response`` is
    False; class labels are never scaled.
    """
    if scale_response is None:
        scale_response = not data.classification
    if data.n == 0:
        raise ValueError("cannot scale an empty dataset")
    X, xc, xs = _unit_scaling(data.X)
    record = {"x_center": xc, "x_scale": xs}
    Y = data.Y
    if scale_response and not data.classification:
        Y, yc, ys = _unit_scaling(data.Y)
        record.update(y_center=yc, y_scale=ys)
    return DatasetSpec(X, Y, data.classification, record)


def train_test_split(data: DatasetSpec, train_fraction: float = 0.75, seed: int = 0):
    rng = np.random.default_rng(seed)
    perm = rng.permutation(data.n)
    k = int(round(train_fraction * data.n))
    return data.subset(np.sort(perm[:k])), data.subset(np.sort(perm[k:]))


def parse_architecture(spec: str) -> list[tuple[int, str]]:
    """Parse ``"50:tanh,100:tanh,1:linear"`` into ``[(50, "tanh"), ...]``."""
    layers = []
    for chunk in spec.split(","):
        chunk = chunk.strip()
        try:
            width, act = chunk.split(":")
            width = int(width)
        except ValueError:
            raise ValueError(f"bad layer spec {chunk!r}; expected WIDTH:ACTIVATION") from None
        if width < 1:
            raise ValueError(f"layer width must be positive in {chunk!r}")
        layers.append((width, ActivationKind.parse(act.strip()).value))
    if not layers:
        raise ValueError("architecture needs at least one layer")
    return layers


def init_weights(p: int, architecture, rng: np.random.Generator) -> list[np.ndarray]:
    """Glorot-uniform kernels, zero biases."""
    weights = []
    fan_in = p
    for width, _ in architecture:
        limit = math.sqrt(6.0 / (fan_in + width))
        W = np.zeros((fan_in + 1, width))
        W[1:] = rng.uniform(-limit, limit, size=(fan_in, width))
        weights.append(W)
        fan_in = width
    return weights


def _softmax(Z: np.ndarray) -> np.ndarray:
    Z = Z - Z.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


def loss_and_gradients(weights, activations, X, Y, loss: str):
    """Loss value and per-layer gradients for bias-first weight matrices."""
    acts = [ActivationKind.parse(a) for a in activations]
    inputs, pres, posts = [], [], []
    y = X
    for W, act in zip(weights, acts):
        inputs.append(y)
        u = W[0] + y @ W[1:]
        y = apply_activation(act, u)
        pres.append(u)
        posts.append(y)
    n = X.shape[0]
    if loss == "mse":
        diff = y - Y
        value = float(np.mean(diff * diff))
        grad_y = 2.0 * diff / diff.size
    elif loss == "softmax_cross_entropy":
        labels = Y.ravel().astype(np.int64)
        Z = y - y.max(axis=1, keepdims=True)
        logsum = np.log(np.exp(Z).sum(axis=1))
        value = float(np.mean(logsum - Z[np.arange(n), labels]))
        grad_y = _softmax(y)
        grad_y[np.arange(n), labels] -= 1.0
        grad_y /= n
    else:
        raise ValueError(f"unknown loss {loss!r}")

    grads = [None] * len(weights)
    for l in range(len(weights) - 1, -1, -1):
        delta = grad_y * acts[l].derivative(pres[l], posts[l])
        g = np.empty_like(weights[l])
        g[0] = delta.sum(axis=0)
        g[1:] = inputs[l].T @ delta
        grads[l] = g
        if l:
            grad_y = delta @ weights[l][1:].T
    return value, grads


class _Adam:
    def __init__(self, shapes, lr, b1, b2, eps):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, weights, grads):
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for W, g, m, v in zip(weights, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            W -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class _SGD:
    def __init__(self, lr):
        self.lr = lr

    def step(self, weights, grads):
        for W, g in zip(weights, grads):
            W -= self.lr * g


@dataclass
class History:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,val_loss"]
        for i, tl in enumerate(self.train_loss):
            vl = repr(self.val_loss[i]) if i < len(self.val_loss) else ""
            lines.append(f"{i + 1},{tl!r},{vl}")
        return "\n".join(lines) + "\n"


def _check_targets(data: DatasetSpec, architecture, config: TrainConfig):
    width_out, act_out = architecture[-1]
    if config.loss == "softmax_cross_entropy":
        if not data.classification:
            raw = np.asarray(data.Y, dtype=np.float64)
            if not np.all(raw == np.round(raw)):
                raise ValueError("softmax_cross_entropy needs integer class labels")
        if act_out != "linear":
            raise ValueError("softmax_cross_entropy expects a linear output layer (logits)")
        labels = np.asarray(data.Y).ravel()
        if labels.min() < 0 or labels.max() >= width_out:
            raise ValueError(f"class labels must lie in 0..{width_out - 1}")
    elif data.Y.shape[1] != width_out:
        raise ValueError(f"output width {width_out} does not match {data.Y.shape[1]} response columns")


def train(data: DatasetSpec, architecture: Sequence[tuple[int, str]], config: TrainConfig):
    """Fit an MLP; returns ``(NetworkSpec, History)``.

    Deterministic for a fixed ``config.seed``. With a constraint, hidden
    weight vectors are projected at initialisation and after every batch.
    """
    architecture = [(int(w), ActivationKind.parse(a).value) for w, a in architecture]
    _check_targets(data, architecture, config)
    rng = np.random.default_rng(config.seed)

    order = rng.permutation(data.n)
    n_val = int(math.floor(config.validation_split * data.n))
    train_idx, val_idx = order[: data.n - n_val], order[data.n - n_val :]
    if len(train_idx) == 0:
        raise TrainingError("empty training split")
    if config.batch_size > len(train_idx):
        raise ValueError(
            f"batch_size {config.batch_size} exceeds training set size {len(train_idx)}"
        )
    X, Y = data.X[train_idx], data.Y[train_idx]
    Xv, Yv = data.X[val_idx], data.Y[val_idx]
    acts = [a for _, a in architecture]

    weights = init_weights(data.p, architecture, rng)
    constrained = config.constraint != "none"
    hidden = range(len(weights) - 1)

    def project():
        for l in hidden:
            weights[l][...] = constraint_project(weights[l], config.constraint, config.projection_eps)

    if constrained:
        project()

    if config.optimizer == "adam":
        opt = _Adam([W.shape for W in weights], config.learning_rate,
                    config.beta1, config.beta2, config.adam_eps)
    else:
        opt = _SGD(config.learning_rate)

    history = History()
    n_train = len(train_idx)
    for epoch in range(1, config.epochs + 1):
        perm = rng.permutation(n_train)
        for b, start in enumerate(range(0, n_train, config.batch_size), start=1):
            idx = perm[start : start + config.batch_size]
            value, grads = loss_and_gradients(weights, acts, X[idx], Y[idx], config.loss)
            if not math.isfinite(value):
                raise TrainingDivergedError(epoch, b)
            opt.step(weights, grads)
            if constrained:
                project()
        tl, _ = loss_and_gradients(weights, acts, X, Y, config.loss)
        if not math.isfinite(tl):
            raise TrainingDivergedError(epoch, b)
        history.train_loss.append(tl)
        if len(val_idx):
            history.val_loss.append(loss_and_gradients(weights, acts, Xv, Yv, config.loss)[0])
        if epoch % 100 == 0:
            log.info("epoch %d: train loss %.6g", epoch, tl)

    return NetworkSpec.from_matrices(weights, acts), history


def training_loss(net: NetworkSpec, data: DatasetSpec, loss: str = "mse") -> float:
    weights = [layer.weights for layer in net.layers]
    acts = [layer.activation for layer in net.layers]
    return loss_and_gradients(weights, acts, data.X, data.Y, loss)[0]
