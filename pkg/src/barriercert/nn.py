"""ReLU network containers: evaluation, composition, local affine maps.

All networks are alternating affine maps with optional elementwise
``max(., 0)`` activations.  A *shallow* network is one hidden ReLU layer
followed by a scalar linear output; its activation boundaries are
hyperplanes, which is what the region-enumeration machinery relies on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "AffineMap",
    "LayerKind",
    "Layer",
    "NeuralNetwork",
    "ShallowNN",
    "HyperRectangle",
    "compose",
    "activation_hyperplanes",
    "local_affine",
    "load_network",
    "save_network",
    "network_from_dict",
    "network_to_dict",
    "SchemaError",
]


class SchemaError(ValueError):
    """Malformed or dimensionally inconsistent network description."""


def _as_matrix(W) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    if W.ndim != 2:
        raise ValueError(f"weight must be a matrix, got shape {W.shape}")
    return W


def _as_vector(b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.ndim != 1:
        raise ValueError(f"bias must be a vector, got shape {b.shape}")
    return b


@dataclass(frozen=True)
class AffineMap:
    """x -> W x + b."""

    W: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "W", _as_matrix(self.W))
        object.__setattr__(self, "b", _as_vector(self.b))
        if self.W.shape[0] != self.b.shape[0]:
            raise ValueError(
                f"inconsistent dims: W has {self.W.shape[0]} rows, b has {self.b.shape[0]}"
            )
        self.W.setflags(write=False)
        self.b.setflags(write=False)

    @property
    def in_dim(self) -> int:
        return self.W.shape[1]

    @property
    def out_dim(self) -> int:
        return self.W.shape[0]

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.W @ x + self.b

    def scalar(self, x) -> float:
        """Evaluate a single-output map to a float."""
        if self.out_dim != 1:
            raise ValueError("scalar() requires a single-output map")
        return float(self.W[0] @ np.asarray(x, dtype=float) + self.b[0])

    def row(self, i: int) -> "AffineMap":
        return AffineMap(self.W[i : i + 1], self.b[i : i + 1])

    def negate(self) -> "AffineMap":
        return AffineMap(-self.W, -self.b)

    @staticmethod
    def identity(n: int) -> "AffineMap":
        return AffineMap(np.eye(n), np.zeros(n))


class LayerKind(str, Enum):
    LINEAR = "linear"
    RELU = "relu"


@dataclass(frozen=True)
class Layer:
    map: AffineMap
    kind: LayerKind = LayerKind.LINEAR

    def __call__(self, x) -> np.ndarray:
        z = self.map(x)
        if self.kind is LayerKind.RELU:
            return np.maximum(z, 0.0)
        return z


@dataclass(frozen=True)
class NeuralNetwork:
    """Composition of layers with chained dimensions."""

    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("network needs at least one layer")
        for a, b in zip(layers, layers[1:]):
            if a.map.out_dim != b.map.in_dim:
                raise ValueError(
                    f"layer dims do not chain: {a.map.out_dim} -> {b.map.in_dim}"
                )
        object.__setattr__(self, "layers", layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].map.in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].map.out_dim

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.in_dim,):
            raise ValueError(f"expected input of shape ({self.in_dim},), got {x.shape}")
        for layer in self.layers:
            x = layer(x)
        return x

    def batch(self, X: np.ndarray) -> np.ndarray:
        """Evaluate on rows of an (m, in_dim) array."""
        X = np.asarray(X, dtype=float)
        for layer in self.layers:
            X = X @ layer.map.W.T + layer.map.b
            if layer.kind is LayerKind.RELU:
                np.maximum(X, 0.0, out=X)
        return X


@dataclass(frozen=True)
class ShallowNN:
    """One hidden ReLU layer, one scalar linear output layer."""

    hidden: Layer
    output: Layer

    def __post_init__(self):
        if self.hidden.kind is not LayerKind.RELU:
            raise ValueError("hidden layer must be a ReLU layer")
        if self.output.kind is not LayerKind.LINEAR:
            raise ValueError("output layer must be linear")
        if self.output.map.out_dim != 1:
            raise ValueError("shallow network must have scalar output")
        if self.hidden.map.out_dim != self.output.map.in_dim:
            raise ValueError("hidden/output dims do not chain")

    @property
    def in_dim(self) -> int:
        return self.hidden.map.in_dim

    @property
    def width(self) -> int:
        return self.hidden.map.out_dim

    def __call__(self, x) -> float:
        return float(self.output(self.hidden(x))[0])

    def as_network(self) -> NeuralNetwork:
        return NeuralNetwork((self.hidden, self.output))

    @staticmethod
    def from_network(net: NeuralNetwork) -> "ShallowNN":
        if len(net.layers) != 2:
            raise ValueError("shallow network must have exactly two layers")
        return ShallowNN(net.layers[0], net.layers[1])


@dataclass(frozen=True)
class HyperRectangle:
    """Axis-aligned box {x : lo <= x <= hi}."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lo/hi must be vectors of equal length")
        if np.any(lo > hi):
            raise ValueError("lo must not exceed hi")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def max_side(self) -> float:
        return float(np.max(self.hi - self.lo))

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(m, self.dim))

    def split(self) -> list:
        """Split at the midpoint along every axis into 2^n children."""
        mid = self.center
        children = []
        for mask in range(1 << self.dim):
            lo = self.lo.copy()
            hi = mid.copy()
            for i in range(self.dim):
                if mask >> i & 1:
                    lo[i] = mid[i]
                    hi[i] = self.hi[i]
            children.append(HyperRectangle(lo, hi))
        return children

    def corners(self) -> Iterator[np.ndarray]:
        for mask in range(1 << self.dim):
            c = self.lo.copy()
            for i in range(self.dim):
                if mask >> i & 1:
                    c[i] = self.hi[i]
            yield c


def compose(outer: NeuralNetwork, inner: NeuralNetwork) -> NeuralNetwork:
    """outer(inner(x)) as a single network.

    The final linear layer of ``inner`` is merged with the first affine map
    of ``outer``, so the result has len(outer) + len(inner) - 1 layers.
    """
    if inner.out_dim != outer.in_dim:
        raise ValueError(
            f"cannot compose: inner outputs {inner.out_dim}, outer expects {outer.in_dim}"
        )
    if inner.layers[-1].kind is not LayerKind.LINEAR:
        raise ValueError("inner network must end with a linear layer")
    last = inner.layers[-1].map
    first = outer.layers[0]
    merged = Layer(
        AffineMap(first.map.W @ last.W, first.map.W @ last.b + first.map.b),
        first.kind,
    )
    return NeuralNetwork(inner.layers[:-1] + (merged,) + outer.layers[1:])


def activation_hyperplanes(net: ShallowNN) -> list:
    """The N scalar functionals whose zero sets bound the hidden activations."""
    m = net.hidden.map
    return [m.row(i) for i in range(m.out_dim)]


def local_affine(net: ShallowNN, flips: Iterable[int]) -> AffineMap:
    """Affine map the network equals on the region with the given flip set.

    Neuron i is active exactly when hyperplane i is flipped (functional
    positive); inactive neurons are nulled.
    """
    gate = np.zeros(net.width)
    for i in flips:
        gate[i] = 1.0
    W1, b1 = net.hidden.map.W, net.hidden.map.b
    W2, b2 = net.output.map.W, net.output.map.b
    W = (W2 * gate) @ W1
    b = (W2 * gate) @ b1 + b2
    return AffineMap(W, b)


# --- JSON serialization -----------------------------------------------------

def network_to_dict(net: NeuralNetwork) -> dict:
    return {
        "layers": [
            {
                "W": layer.map.W.tolist(),
                "b": layer.map.b.tolist(),
                "kind": layer.kind.value,
            }
            for layer in net.layers
        ]
    }


def network_from_dict(data: dict) -> NeuralNetwork:
    if not isinstance(data, dict) or "layers" not in data:
        raise SchemaError("network JSON must be an object with a 'layers' list")
    raw = data["layers"]
    if not isinstance(raw, list) or not raw:
        raise SchemaError("'layers' must be a non-empty list")
    layers = []
    for k, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise SchemaError(f"layer {k} is not an object")
        missing = {"W", "b", "kind"} - set(entry)
        if missing:
            raise SchemaError(f"layer {k} is missing fields {sorted(missing)}")
        try:
            kind = LayerKind(entry["kind"])
        except ValueError:
            raise SchemaError(f"layer {k} has unknown kind {entry['kind']!r}") from None
        try:
            layers.append(Layer(AffineMap(entry["W"], entry["b"]), kind))
        except ValueError as exc:
            raise SchemaError(f"layer {k}: {exc}") from None
    try:
        return NeuralNetwork(tuple(layers))
    except ValueError as exc:
        raise SchemaError(str(exc)) from None


def load_network(path) -> NeuralNetwork:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON ({exc})") from None
    return network_from_dict(data)


def save_network(net: NeuralNetwork, path) -> None:
    with open(path, "w") as fh:
        json.dump(network_to_dict(net), fh, sort_keys=True)
        fh.write("\n")
