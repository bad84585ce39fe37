"""Framework-agnostic MLP description: bias-first weight matrices per layer."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .activations import ActivationKind, UnsupportedActivationError, apply_activation
from .polynomial import atomic_write_text


class NetworkError(ValueError):
    pass


@dataclass(frozen=True)
class Layer:
    """One dense layer. ``weights`` has shape ``(1 + fan_in, width)``, bias row first."""

    activation: ActivationKind
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "activation", ActivationKind.parse(self.activation))
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] < 2 or w.shape[1] < 1:
            raise NetworkError(f"weight matrix must be (1 + fan_in) x width, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise NetworkError("weight matrix contains non-finite values")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def fan_in(self) -> int:
        return self.weights.shape[0] - 1

    @property
    def width(self) -> int:
        return self.weights.shape[1]

    @property
    def bias(self) -> np.ndarray:
        return self.weights[0]

    @property
    def kernel(self) -> np.ndarray:
        return self.weights[1:]


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple[Layer, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise NetworkError("network needs at least one layer")
        for i in range(len(layers) - 1):
            if layers[i].width != layers[i + 1].fan_in:
                raise NetworkError(
                    f"layer {i + 1} has {layers[i].width} outputs but layer {i + 2} "
                    f"expects {layers[i + 1].fan_in} inputs (weights shape "
                    f"{layers[i + 1].weights.shape})"
                )
        object.__setattr__(self, "layers", layers)

    @classmethod
    def from_matrices(cls, matrices: Sequence, activations: Sequence) -> "NetworkSpec":
        if len(matrices) != len(activations):
            raise NetworkError("one activation per weight matrix is required")
        return cls(tuple(Layer(a, w) for w, a in zip(matrices, activations)))

    @property
    def n_inputs(self) -> int:
        return self.layers[0].fan_in

    @property
    def n_outputs(self) -> int:
        return self.layers[-1].width

    @property
    def widths(self) -> list[int]:
        return [layer.width for layer in self.layers]

    def to_dict(self) -> dict:
        return {
            "layers": [
                {"activation": layer.activation.value, "weights": layer.weights.tolist()}
                for layer in self.layers
            ]
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "NetworkSpec":
        try:
            raw_layers = obj["layers"]
        except (KeyError, TypeError):
            raise NetworkError("network object needs a 'layers' array") from None
        layers = []
        for i, entry in enumerate(raw_layers, start=1):
            try:
                act = entry["activation"]
                weights = entry["weights"]
            except (KeyError, TypeError):
                raise NetworkError(f"layer {i}: needs 'activation' and 'weights'") from None
            try:
                rows = np.array(weights, dtype=np.float64)
            except ValueError:
                raise NetworkError(f"layer {i}: ragged weight rows") from None
            try:
                layers.append(Layer(act, rows))
            except (NetworkError, UnsupportedActivationError) as exc:
                raise type(exc)(f"layer {i}: {exc}") from None
        return cls(tuple(layers))

    def __eq__(self, other):
        if not isinstance(other, NetworkSpec) or len(self.layers) != len(other.layers):
            return NotImplemented if not isinstance(other, NetworkSpec) else False
        return all(
            a.activation is b.activation
            and a.weights.shape == b.weights.shape
            and np.array_equal(a.weights, b.weights)
            for a, b in zip(self.layers, other.layers)
        )

    __hash__ = None


def forward(net: NetworkSpec, X, return_hidden: bool = False):
    """Standard forward pass; returns the ``n x c`` output.

    With ``return_hidden`` a list of ``(pre_activation, post_activation)``
    per layer is returned instead.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.n_inputs:
        raise NetworkError(f"input has shape {X.shape}, network expects {net.n_inputs} columns")
    y = X
    trace = []
    for layer in net.layers:
        u = layer.bias + y @ layer.kernel
        y = apply_activation(layer.activation, u)
        trace.append((u, y))
    return trace if return_hidden else y


def save_network(net: NetworkSpec, path) -> None:
    # json emits repr() floats, which round-trip float64 exactly.
    atomic_write_text(path, json.dumps(net.to_dict()))


def load_network(path) -> NetworkSpec:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise NetworkError(f"{path}: invalid JSON ({exc})") from None
    return NetworkSpec.from_dict(obj)


def column_norms(layer: Layer, norm: str = "l1") -> np.ndarray:
    """Norm of each incoming weight vector (bias included)."""
    ord_ = {"l1": 1, "l2": 2}[norm]
    return np.linalg.norm(layer.weights, ord=ord_, axis=0)
