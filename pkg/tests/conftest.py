"""Shared generators and independent oracles for the test suite.

The oracles here deliberately avoid the library's enumeration machinery:
region existence is decided by raw sign-pattern LPs built directly on the
weight matrices, and sub-level connectivity by an explicit adjacency graph
over those patterns.  They are slow but simple, and serve as ground truth.
"""

import numpy as np
import pytest
from scipy.optimize import linprog

from barriercert.nn import (
    AffineMap,
    Layer,
    LayerKind,
    NeuralNetwork,
    ShallowNN,
)

ORACLE_TAU = 1e-7


def make_rng(seed):
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# generators


def random_affine(rng, in_dim, out_dim, scale=1.0):
    W = rng.standard_normal((out_dim, in_dim)) * scale
    b = rng.standard_normal(out_dim) * scale
    return AffineMap(W, b)


def random_relu_network(rng, dims, final_relu=False):
    """Alternating linear/ReLU network with the given layer widths."""
    layers = []
    for k in range(len(dims) - 1):
        last = k == len(dims) - 2
        kind = LayerKind.RELU if (not last or final_relu) else LayerKind.LINEAR
        layers.append(Layer(random_affine(rng, dims[k], dims[k + 1]), kind))
    return NeuralNetwork(tuple(layers))


def random_shallow(rng, dim, width, negative_at=None, margin=(0.5, 1.5)):
    """Random shallow net; optionally shift the output bias so the value at
    ``negative_at`` is strictly negative."""
    hidden = Layer(random_affine(rng, dim, width), LayerKind.RELU)
    out = Layer(random_affine(rng, width, 1), LayerKind.LINEAR)
    net = ShallowNN(hidden, out)
    if negative_at is not None:
        x0 = np.asarray(negative_at, dtype=float)
        shift = net(x0) + rng.uniform(*margin)
        out = Layer(AffineMap(out.map.W, out.map.b - shift), LayerKind.LINEAR)
        net = ShallowNN(hidden, out)
    return net


def random_hyperplanes(rng, n_planes, dim):
    W = rng.standard_normal((n_planes, dim))
    b = rng.standard_normal(n_planes)
    return W, b


# ---------------------------------------------------------------------------
# sign-pattern region oracle


def _pattern_lp(W, b, signs, tau=ORACLE_TAU):
    """Is there x with signs[j] * (W_j x + b_j) >= delta for some delta > tau?

    Variables (x, delta); maximize delta, delta capped at 1 so the LP is
    always bounded.
    """
    k, n = W.shape
    A_ub = np.zeros((k, n + 1))
    A_ub[:, :n] = -(signs[:, None] * W)
    A_ub[:, n] = 1.0
    b_ub = signs * b
    c = np.zeros(n + 1)
    c[n] = -1.0
    bounds = [(None, None)] * n + [(0.0, 1.0)]
    res = _solve_oracle_lp(c, A_ub, b_ub, None, None, bounds)
    if res.status == 2:
        return False
    assert res.status == 0, f"oracle LP failed with status {res.status}"
    return -res.fun > tau


def _solve_oracle_lp(c, A_ub, b_ub, A_eq, b_eq, bounds):
    for method in ("highs", "highs-ds", "highs-ipm"):
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method=method)
        if res.status in (0, 2):
            return res
    return res


def _sample_box(W, b, pad=2.0):
    norms = np.linalg.norm(W, axis=1)
    norms[norms == 0] = 1.0
    r = float(np.max(np.abs(b) / norms)) + pad
    return r


def exhaustive_sign_patterns(W, b, rng=None, n_samples=4000, tau=ORACLE_TAU):
    """All feasible open-cell sign patterns of the hyperplanes W x + b = 0.

    Equivalent to testing every one of the 2^N patterns with a feasibility
    LP; patterns are pruned prefix-wise (a pattern is feasible only if every
    prefix is) and patterns carrying a sampled witness with margin skip the
    LP.  Returns a set of frozensets of +1 indices.
    """
    W = np.asarray(W, dtype=float)
    b = np.asarray(b, dtype=float)
    n_planes, dim = W.shape
    rng = rng if rng is not None else np.random.default_rng(0)
    r = _sample_box(W, b)
    pts = rng.uniform(-r, r, size=(n_samples, dim))
    vals = pts @ W.T + b
    margin = 1e-6 * max(1.0, float(np.max(np.abs(vals))))
    sample_signs = np.where(vals > 0, 1, -1)
    clear = np.abs(vals) > margin

    found = []

    def recurse(k, signs, mask):
        if k == n_planes:
            found.append(frozenset(int(i) for i in np.flatnonzero(signs > 0)))
            return
        for s in (-1, 1):
            signs[k] = s
            sub = mask & (sample_signs[:, k] == s) & clear[:, k]
            if np.any(sub) or _pattern_lp(W[: k + 1], b[: k + 1], signs[: k + 1], tau):
                recurse(k + 1, signs, sub)
        signs[k] = 0

    recurse(0, np.zeros(n_planes, dtype=int), np.ones(n_samples, dtype=bool))
    return set(found)


# ---------------------------------------------------------------------------
# sub-level component oracle


def shallow_weights(net: ShallowNN):
    W1 = net.hidden.map.W
    b1 = net.hidden.map.b
    c = net.output.map.W[0]
    c0 = net.output.map.b[0]
    return W1, b1, c, c0


def gated_affine(net: ShallowNN, flips):
    """Affine map the shallow net equals on the region with the given
    active set, computed directly from the weights."""
    W1, b1, c, c0 = shallow_weights(net)
    gate = np.zeros(len(b1))
    for i in flips:
        gate[i] = 1.0
    w = (c * gate) @ W1
    off = float((c * gate) @ b1 + c0)
    return w, off


def _region_rows(W, b, flips, exclude=None):
    """(A, c) rows meaning A x >= c + delta for strict membership."""
    rows_A = []
    rows_c = []
    for j in range(len(b)):
        if j == exclude:
            continue
        s = 1.0 if j in flips else -1.0
        rows_A.append(s * W[j])
        rows_c.append(-s * b[j])
    return np.array(rows_A), np.array(rows_c)


def _strict_lp(A, c, eqs=(), tau=ORACLE_TAU):
    """max delta s.t. A x >= c + delta, eq rows hold exactly, delta in [0,1]."""
    n = A.shape[1]
    A_ub = np.hstack([-A, np.ones((A.shape[0], 1))])
    b_ub = -c
    A_eq = None
    b_eq = None
    if eqs:
        A_eq = np.array([np.append(w, 0.0) for w, off in eqs])
        b_eq = np.array([-off for w, off in eqs])
    obj = np.zeros(n + 1)
    obj[n] = -1.0
    bounds = [(None, None)] * n + [(0.0, 1.0)]
    res = _solve_oracle_lp(obj, A_ub, b_ub, A_eq, b_eq, bounds)
    if res.status == 2:
        return False
    assert res.status == 0, f"oracle LP failed with status {res.status}"
    return -res.fun > tau


def oracle_sublevel_component(net: ShallowNN, x0, confinement_rows=None):
    """Regions meeting the connected component of {net < 0} around x0.

    Brute force: enumerate all feasible sign patterns, keep those whose open
    cell meets the open sub-level set, link pairs differing in one sign when
    the shared face meets the open sub-level set, and return the flip sets
    in the seed's graph component.  ``confinement_rows`` is an optional
    (A, c) pair meaning A x >= c strictly inside.
    """
    import networkx as nx

    W1, b1, _, _ = shallow_weights(net)
    x0 = np.asarray(x0, dtype=float)
    assert net(x0) < 0
    regions = exhaustive_sign_patterns(W1, b1)
    seed = frozenset(int(i) for i in np.flatnonzero(W1 @ x0 + b1 > 0))
    assert seed in regions

    def with_conf(A, c):
        if confinement_rows is None:
            return A, c
        CA, cc = confinement_rows
        return np.vstack([A, CA]), np.concatenate([c, cc])

    # regions whose open cell meets {net < 0} (and the confinement)
    neg = set()
    for flips in regions:
        A, c = _region_rows(W1, b1, flips)
        w, off = gated_affine(net, flips)
        A2, c2 = with_conf(np.vstack([A, -w[None, :]]), np.append(c, off))
        if _strict_lp(A2, c2):
            neg.add(flips)
    assert seed in neg

    g = nx.Graph()
    g.add_nodes_from(neg)
    for flips in neg:
        for i in range(len(b1)):
            other = flips ^ {i}
            if other not in neg or (flips, other) in g.edges:
                continue
            A, c = _region_rows(W1, b1, flips, exclude=i)
            w, off = gated_affine(net, flips)
            A2, c2 = with_conf(np.vstack([A, -w[None, :]]), np.append(c, off))
            if _strict_lp(A2, c2, eqs=[(W1[i], b1[i])]):
                g.add_edge(flips, other)
    return nx.node_connected_component(g, seed)


# ---------------------------------------------------------------------------
# misc helpers


def box_rows(lo, hi):
    """(A, c) meaning A x >= c for the box interior (strict via oracle LPs)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = len(lo)
    A = np.vstack([np.eye(n), -np.eye(n)])
    c = np.concatenate([lo, -hi])
    return A, c


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
