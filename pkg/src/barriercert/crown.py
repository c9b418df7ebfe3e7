"""Sound linear relaxations of ReLU networks over boxes.

Bounds are computed by backward propagation of linear coefficients: each
unstable neuron (pre-activation interval straddling zero) is replaced by a
pair of bounding lines, stable neurons pass through exactly.  Pre-activation
intervals for each layer come from running the same backward pass on the
network prefix ending at that layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lp import box_bounds
from .nn import AffineMap, HyperRectangle, LayerKind, NeuralNetwork

__all__ = ["LinearBounds", "BoundMatrix", "linear_relax", "get_fn_bd"]


@dataclass(frozen=True)
class LinearBounds:
    """A_lo x + b_lo <= net(x) <= A_up x + b_up for all x in domain."""

    A_up: np.ndarray
    b_up: np.ndarray
    A_lo: np.ndarray
    b_lo: np.ndarray
    domain: HyperRectangle

    def concretize(self):
        lo, _ = box_bounds(AffineMap(self.A_lo, self.b_lo), self.domain)
        _, hi = box_bounds(AffineMap(self.A_up, self.b_up), self.domain)
        return lo, hi


@dataclass(frozen=True)
class BoundMatrix:
    """(m, 2) matrix of [lower, upper] output bounds."""

    E: np.ndarray

    def __post_init__(self):
        E = np.asarray(self.E, dtype=float)
        if E.ndim != 2 or E.shape[1] != 2:
            raise ValueError("bound matrix must have shape (m, 2)")
        if np.any(E[:, 0] > E[:, 1]):
            raise ValueError("lower bound exceeds upper bound")
        E.setflags(write=False)
        object.__setattr__(self, "E", E)

    @property
    def lower(self) -> np.ndarray:
        return self.E[:, 0]

    @property
    def upper(self) -> np.ndarray:
        return self.E[:, 1]


def _relu_lines(l: np.ndarray, u: np.ndarray):
    """Per-neuron bounding lines (upper slope/intercept, lower slope).

    Unstable neurons get the chord u(z - l)/(u - l) above and a zero-intercept
    line of slope alpha below, with alpha = 1 when u >= |l| else 0.
    """
    n = l.shape[0]
    up_s = np.zeros(n)
    up_t = np.zeros(n)
    lo_s = np.zeros(n)
    active = l >= 0.0
    up_s[active] = 1.0
    lo_s[active] = 1.0
    unstable = (l < 0.0) & (u > 0.0)
    if np.any(unstable):
        lu, uu = l[unstable], u[unstable]
        s = uu / (uu - lu)
        up_s[unstable] = s
        up_t[unstable] = -s * lu
        lo_s[unstable] = (uu >= -lu).astype(float)
    return up_s, up_t, lo_s


def _backward(layers, preacts, k, box):
    """Linear bounds on the affine output of layer k as a function of x."""
    A_up = layers[k].map.W.copy()
    b_up = layers[k].map.b.copy()
    A_lo = A_up.copy()
    b_lo = b_up.copy()
    for j in range(k - 1, -1, -1):
        if layers[j].kind is LayerKind.RELU:
            l, u = preacts[j]
            up_s, up_t, lo_s = _relu_lines(l, u)
            lo_t = np.zeros_like(up_t)
            # upper output bound: positive coefficients take the upper line
            pos = A_up > 0.0
            slope = np.where(pos, up_s, lo_s)
            icpt = np.where(pos, up_t, lo_t)
            b_up = b_up + (A_up * icpt).sum(axis=1)
            A_up = A_up * slope
            # lower output bound: positive coefficients take the lower line
            pos = A_lo > 0.0
            slope = np.where(pos, lo_s, up_s)
            icpt = np.where(pos, lo_t, up_t)
            b_lo = b_lo + (A_lo * icpt).sum(axis=1)
            A_lo = A_lo * slope
        W, bb = layers[j].map.W, layers[j].map.b
        b_up = b_up + A_up @ bb
        A_up = A_up @ W
        b_lo = b_lo + A_lo @ bb
        A_lo = A_lo @ W
    return A_up, b_up, A_lo, b_lo


def _preactivation_bounds(net: NeuralNetwork, box: HyperRectangle):
    """Interval bounds of every layer's affine output over the box."""
    preacts = []
    for k in range(len(net.layers)):
        A_up, b_up, A_lo, b_lo = _backward(net.layers, preacts, k, box)
        lo, _ = box_bounds(AffineMap(A_lo, b_lo), box)
        _, hi = box_bounds(AffineMap(A_up, b_up), box)
        preacts.append((lo, hi))
    return preacts


def linear_relax(net: NeuralNetwork, box: HyperRectangle) -> LinearBounds:
    """Sound affine envelopes of the network over the box."""
    if net.in_dim != box.dim:
        raise ValueError(f"network expects dim {net.in_dim}, box has dim {box.dim}")
    preacts = _preactivation_bounds(net, box)
    k = len(net.layers) - 1
    A_up, b_up, A_lo, b_lo = _backward(net.layers, preacts, k, box)
    if net.layers[-1].kind is LayerKind.RELU:
        # gate the final activation with its own interval
        l, u = preacts[k]
        up_s, up_t, lo_s = _relu_lines(l, u)
        A_up = A_up * up_s[:, None]
        b_up = b_up * up_s + up_t
        A_lo = A_lo * lo_s[:, None]
        b_lo = b_lo * lo_s
    return LinearBounds(A_up=A_up, b_up=b_up, A_lo=A_lo, b_lo=b_lo, domain=box)


def get_fn_bd(net: NeuralNetwork, box: HyperRectangle) -> BoundMatrix:
    """Sound interval enclosure of the network image over the box."""
    lb = linear_relax(net, box)
    lo, hi = lb.concretize()
    return BoundMatrix(np.stack([lo, hi], axis=1))
