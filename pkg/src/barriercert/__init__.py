"""Certification of shallow ReLU barrier networks.

Given a ReLU-network dynamics model, a shallow ReLU barrier candidate and a
box of safe states, this package computes a certified forward-invariant
subset of the state space.  The pipeline combines linear bound propagation
over input boxes with a connected-region enumeration of the barrier
network's zero-sub-level set.
"""

from .nn import (
    AffineMap,
    HyperRectangle,
    Layer,
    NeuralNetwork,
    ShallowNN,
    compose,
    load_network,
    save_network,
)
from .certify import Certificate, ProblemInstance, Verdict, certify

__all__ = [
    "AffineMap",
    "HyperRectangle",
    "Layer",
    "NeuralNetwork",
    "ShallowNN",
    "compose",
    "load_network",
    "save_network",
    "Certificate",
    "ProblemInstance",
    "Verdict",
    "certify",
]

__version__ = "0.1.0"
