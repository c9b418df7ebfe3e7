"""Torch models and export to the network JSON schema.

The schema is the certification package's external interface: a "layers"
list of {"W", "b", "kind"} entries with kind "relu" or "linear".  The
closed-loop network N_O(x, N_c(x)) is exported as a single three-layer ReLU
network: the first layer carries x through a relu(x)/relu(-x) split next to
the controller's hidden layer, the second layer is the open-loop hidden
layer with the controller's output map folded in, and the third is the
open-loop output map.
"""

import json

import numpy as np
import torch
import torch.nn as nn


class Shallow(nn.Module):
    """One hidden ReLU layer, linear output."""

    def __init__(self, in_dim, width, out_dim):
        super().__init__()
        self.hidden = nn.Linear(in_dim, width)
        self.out = nn.Linear(width, out_dim)

    def forward(self, x):
        return self.out(torch.relu(self.hidden(x)))


def layer_dict(W, b, kind):
    return {"W": np.asarray(W, dtype=float).tolist(), "b": np.asarray(b, dtype=float).tolist(), "kind": kind}


def shallow_to_dict(model: Shallow) -> dict:
    W1 = model.hidden.weight.detach().numpy()
    b1 = model.hidden.bias.detach().numpy()
    W2 = model.out.weight.detach().numpy()
    b2 = model.out.bias.detach().numpy()
    return {"layers": [layer_dict(W1, b1, "relu"), layer_dict(W2, b2, "linear")]}


def closed_loop_to_dict(open_loop: Shallow, controller: Shallow, n: int) -> dict:
    """Single-network form of x -> N_O(x, N_c(x)).

    Layer 1 (relu): [relu(x); relu(-x); relu(Wc1 x + bc1)], width 2n + h_c.
    Layer 2 (relu): open-loop hidden on (x, u) with x = relu(x) - relu(-x)
    and u = Wc2 h_c + bc2 substituted.
    Layer 3 (linear): open-loop output map.
    """
    Wc1 = controller.hidden.weight.detach().numpy()
    bc1 = controller.hidden.bias.detach().numpy()
    Wc2 = controller.out.weight.detach().numpy()
    bc2 = controller.out.bias.detach().numpy()
    WO1 = open_loop.hidden.weight.detach().numpy()
    bO1 = open_loop.hidden.bias.detach().numpy()
    WO2 = open_loop.out.weight.detach().numpy()
    bO2 = open_loop.out.bias.detach().numpy()

    h_c = Wc1.shape[0]
    eye = np.eye(n)
    W_first = np.vstack([eye, -eye, Wc1])
    b_first = np.concatenate([np.zeros(2 * n), bc1])

    A = WO1[:, :n]  # acts on the state part
    Bu = WO1[:, n:]  # acts on the control part
    W_second = np.hstack([A, -A, Bu @ Wc2])
    b_second = bO1 + Bu @ bc2

    return {
        "layers": [
            layer_dict(W_first, b_first, "relu"),
            layer_dict(W_second, b_second, "relu"),
            layer_dict(WO2, bO2, "linear"),
        ]
    }


def eval_network(doc: dict, X: np.ndarray) -> np.ndarray:
    """Reference forward pass of an exported network on rows of X."""
    out = np.asarray(X, dtype=float)
    for layer in doc["layers"]:
        out = out @ np.asarray(layer["W"]).T + np.asarray(layer["b"])
        if layer["kind"] == "relu":
            out = np.maximum(out, 0.0)
    return out


def save_json(doc: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")
