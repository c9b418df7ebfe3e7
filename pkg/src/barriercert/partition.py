"""Recursive box partitioning to find where the barrier decreases.

Starting from a test box, each box is kept when the interval bounds prove
both upper(B o f) <= 0 and lower(B) <= 0; boxes failing only the first
condition are split at their midpoint into 2^n children (until the minimum
side length is reached); everything else is dropped.  The returned union
is contained in the zero-sub-level set of B o f - gamma * B for
gamma = min over boxes of upper(B o f) / lower(B).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .crown import get_fn_bd
from .nn import HyperRectangle, NeuralNetwork, ShallowNN, compose

__all__ = ["PartitionResult", "get_neg_d_set", "get_extents", "compute_gamma", "partition_safe_set"]


class EmptyPartition(RuntimeError):
    """No box could be certified."""


@dataclass(frozen=True)
class PartitionResult:
    boxes: tuple
    gamma: float
    per_box_ratios: tuple
    valid: bool  # gamma strictly positive


def get_extents(box: HyperRectangle) -> np.ndarray:
    """(n, 2) matrix of [lo_i, hi_i] rows."""
    return np.stack([box.lo, box.hi], axis=1)


def _box_gate(comp: NeuralNetwork, n_bf_net: NeuralNetwork, box: HyperRectangle):
    l_bf = float(get_fn_bd(n_bf_net, box).lower[0])
    u_f = float(get_fn_bd(comp, box).upper[0])
    return l_bf, u_f


def get_neg_d_set(
    X_t: HyperRectangle,
    n_bf: ShallowNN,
    n_f: NeuralNetwork,
    eps: float,
) -> list:
    """All certified sub-boxes of X_t, in lexicographic order of lower corners."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if n_f.in_dim != n_f.out_dim or n_f.out_dim != n_bf.in_dim:
        raise ValueError("dynamics must map the barrier's input space to itself")
    comp = compose(n_bf.as_network(), n_f)
    n_bf_net = n_bf.as_network()
    out: list[HyperRectangle] = []

    def recurse(box: HyperRectangle):
        l_bf, u_f = _box_gate(comp, n_bf_net, box)
        if l_bf <= 0.0 and u_f <= 0.0:
            out.append(box)
            return
        if l_bf <= 0.0 and u_f > 0.0 and box.max_side > eps:
            for child in box.split():
                recurse(child)
        # otherwise: barrier provably positive here or box too small; drop

    recurse(X_t)
    out.sort(key=lambda b: tuple(b.lo))
    return out


def compute_gamma(boxes, n_bf: ShallowNN, n_f: NeuralNetwork):
    """Single decrease rate valid on every box: min of per-box ratios.

    Each ratio is upper(B o f)/lower(B) over the box (both non-positive by
    the partition gate).  A box with lower(B) = 0 forces gamma = 0, which is
    reported with valid=False since the problem demands gamma > 0.
    """
    boxes = list(boxes)
    if not boxes:
        raise EmptyPartition("no certified boxes: cannot compute gamma")
    comp = compose(n_bf.as_network(), n_f)
    n_bf_net = n_bf.as_network()
    ratios = []
    for box in boxes:
        l_bf, u_f = _box_gate(comp, n_bf_net, box)
        if l_bf > 0.0 or u_f > 0.0:
            raise ValueError("box does not satisfy the partition gate")
        if l_bf == 0.0:
            ratios.append(0.0)
        else:
            ratios.append(u_f / l_bf)
    gamma = min(ratios)
    return gamma, gamma > 0.0, ratios


def partition_safe_set(
    X_s: HyperRectangle,
    n_bf: ShallowNN,
    n_f: NeuralNetwork,
    eps: float,
) -> PartitionResult:
    boxes = get_neg_d_set(X_s, n_bf, n_f, eps)
    gamma, valid, ratios = compute_gamma(boxes, n_bf, n_f)
    return PartitionResult(
        boxes=tuple(boxes), gamma=gamma, per_box_ratios=tuple(ratios), valid=valid
    )
