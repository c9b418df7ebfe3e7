import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from barriercert.nn import (
    AffineMap,
    HyperRectangle,
    Layer,
    LayerKind,
    NeuralNetwork,
    SchemaError,
    ShallowNN,
    activation_hyperplanes,
    compose,
    load_network,
    local_affine,
    network_from_dict,
    network_to_dict,
    save_network,
)
from conftest import random_relu_network, random_shallow


def test_affine_map_eval():
    f = AffineMap([[1.0, 2.0], [0.0, -1.0]], [3.0, 0.5])
    assert np.allclose(f([1.0, 1.0]), [6.0, -0.5])
    assert f.in_dim == 2 and f.out_dim == 2


def test_affine_map_scalar_and_row():
    f = AffineMap([[1.0, 2.0], [0.0, -1.0]], [3.0, 0.5])
    r = f.row(1)
    assert r.scalar([2.0, 4.0]) == pytest.approx(-3.5)
    with pytest.raises(ValueError):
        f.scalar([0.0, 0.0])


def test_affine_map_negate_identity():
    f = AffineMap([[2.0, -1.0]], [1.0])
    g = f.negate()
    assert g.scalar([1.0, 1.0]) == pytest.approx(-f.scalar([1.0, 1.0]))
    assert np.allclose(AffineMap.identity(3)([1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])


def test_affine_map_bad_shapes():
    with pytest.raises(ValueError):
        AffineMap(np.zeros(3), np.zeros(3))
    with pytest.raises(ValueError):
        AffineMap(np.zeros((2, 3)), np.zeros(3))


def test_layer_relu():
    layer = Layer(AffineMap([[1.0]], [-1.0]), LayerKind.RELU)
    assert layer([0.5]) == pytest.approx([0.0])
    assert layer([3.0]) == pytest.approx([2.0])


def test_network_chain_validation():
    good = Layer(AffineMap(np.ones((3, 2)), np.zeros(3)), LayerKind.RELU)
    bad = Layer(AffineMap(np.ones((1, 2)), np.zeros(1)))
    with pytest.raises(ValueError):
        NeuralNetwork((good, bad))
    with pytest.raises(ValueError):
        NeuralNetwork(())


def test_network_eval_matches_manual(rng):
    net = random_relu_network(rng, [2, 5, 3, 1])
    x = rng.standard_normal(2)
    z = x
    for layer in net.layers:
        z = layer.map.W @ z + layer.map.b
        if layer.kind is LayerKind.RELU:
            z = np.maximum(z, 0.0)
    assert np.allclose(net(x), z)


def test_network_batch_matches_loop(rng):
    net = random_relu_network(rng, [3, 6, 2])
    X = rng.standard_normal((17, 3))
    out = net.batch(X)
    for i in range(17):
        assert np.allclose(out[i], net(X[i]))


def test_shallow_validation(rng):
    hidden = Layer(AffineMap(np.ones((4, 2)), np.zeros(4)), LayerKind.RELU)
    out = Layer(AffineMap(np.ones((1, 4)), np.zeros(1)))
    ShallowNN(hidden, out)
    with pytest.raises(ValueError):
        ShallowNN(out, out)
    wide = Layer(AffineMap(np.ones((2, 4)), np.zeros(2)))
    with pytest.raises(ValueError):
        ShallowNN(hidden, wide)


def test_shallow_roundtrip(rng):
    net = random_shallow(rng, 3, 7)
    again = ShallowNN.from_network(net.as_network())
    x = rng.standard_normal(3)
    assert again(x) == pytest.approx(net(x))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_compose_matches_sequential(seed):
    rng = np.random.default_rng(seed)
    inner = random_relu_network(rng, [2, 4, 3])
    outer = random_relu_network(rng, [3, 5, 1])
    whole = compose(outer, inner)
    assert len(whole.layers) == len(outer.layers) + len(inner.layers) - 1
    for _ in range(5):
        x = rng.standard_normal(2)
        assert np.allclose(whole(x), outer(inner(x)), atol=1e-10)


def test_compose_dim_mismatch(rng):
    inner = random_relu_network(rng, [2, 3])
    outer = random_relu_network(rng, [4, 1])
    with pytest.raises(ValueError):
        compose(outer, inner)


def test_activation_hyperplanes(rng):
    net = random_shallow(rng, 2, 5)
    planes = activation_hyperplanes(net)
    assert len(planes) == 5
    x = rng.standard_normal(2)
    pre = net.hidden.map(x)
    for i, f in enumerate(planes):
        assert f.scalar(x) == pytest.approx(pre[i])


def test_local_affine_matches_network(rng):
    net = random_shallow(rng, 2, 6)
    for _ in range(20):
        x = rng.standard_normal(2) * 2
        pre = net.hidden.map(x)
        flips = {int(i) for i in np.flatnonzero(pre > 0)}
        T = local_affine(net, flips)
        assert T.scalar(x) == pytest.approx(net(x), abs=1e-10)


def test_hyperrectangle_basics():
    box = HyperRectangle([0.0, -2.0], [1.0, 3.0])
    assert np.allclose(box.center, [0.5, 0.5])
    assert np.allclose(box.widths, [1.0, 5.0])
    assert box.max_side == pytest.approx(5.0)
    assert box.volume == pytest.approx(5.0)
    assert box.contains([0.5, 0.0])
    assert not box.contains([1.5, 0.0])
    with pytest.raises(ValueError):
        HyperRectangle([1.0], [0.0])


def test_hyperrectangle_split_tiles():
    box = HyperRectangle([0.0, 0.0], [2.0, 4.0])
    kids = box.split()
    assert len(kids) == 4
    assert sum(k.volume for k in kids) == pytest.approx(box.volume)
    for k in kids:
        assert box.contains(k.lo) and box.contains(k.hi)


def test_hyperrectangle_corners():
    box = HyperRectangle([0.0, 1.0], [1.0, 2.0])
    corners = {tuple(c) for c in box.corners()}
    assert corners == {(0.0, 1.0), (1.0, 1.0), (0.0, 2.0), (1.0, 2.0)}


def test_json_roundtrip(tmp_path, rng):
    net = random_relu_network(rng, [2, 4, 4, 1])
    path = tmp_path / "net.json"
    save_network(net, path)
    again = load_network(path)
    x = rng.standard_normal(2)
    assert np.allclose(again(x), net(x))
    assert network_to_dict(again) == network_to_dict(net)


def test_json_schema_errors(tmp_path):
    with pytest.raises(SchemaError):
        network_from_dict({"nope": []})
    with pytest.raises(SchemaError):
        network_from_dict({"layers": []})
    with pytest.raises(SchemaError):
        network_from_dict({"layers": [{"W": [[1.0]], "b": [0.0]}]})
    with pytest.raises(SchemaError):
        network_from_dict({"layers": [{"W": [[1.0]], "b": [0.0], "kind": "tanh"}]})
    with pytest.raises(SchemaError):
        network_from_dict(
            {
                "layers": [
                    {"W": [[1.0]], "b": [0.0], "kind": "relu"},
                    {"W": [[1.0, 2.0]], "b": [0.0], "kind": "linear"},
                ]
            }
        )
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(SchemaError):
        load_network(bad)
