import numpy as np
import pytest

from barriercert.nn import (
    AffineMap,
    HyperRectangle,
    Layer,
    LayerKind,
    NeuralNetwork,
    ShallowNN,
    compose,
)
from barriercert.partition import (
    EmptyPartition,
    compute_gamma,
    get_extents,
    get_neg_d_set,
    partition_safe_set,
)
from conftest import make_rng, random_shallow


def constant_barrier(dim, value):
    """Shallow net with zero hidden weights and output bias = value."""
    hidden = Layer(AffineMap(np.zeros((1, dim)), np.zeros(1)), LayerKind.RELU)
    out = Layer(AffineMap(np.zeros((1, 1)), [value]), LayerKind.LINEAR)
    return ShallowNN(hidden, out)


def identity_dynamics(dim):
    return NeuralNetwork((Layer(AffineMap(np.eye(dim), np.zeros(dim))),))


def contraction(dim, rate=0.5):
    return NeuralNetwork((Layer(AffineMap(rate * np.eye(dim), np.zeros(dim))),))


def square_barrier(bias):
    """B(x) = sum_i relu(x_i - 1) + relu(-x_i - 1) + bias, negative near 0."""
    W1 = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    b1 = -np.ones(4)
    hidden = Layer(AffineMap(W1, b1), LayerKind.RELU)
    out = Layer(AffineMap(np.ones((1, 4)), [bias]), LayerKind.LINEAR)
    return ShallowNN(hidden, out)


def test_get_extents():
    box = HyperRectangle([0.0, -2.0], [1.0, 3.0])
    assert np.allclose(get_extents(box), [[0.0, 1.0], [-2.0, 3.0]])
    thin = HyperRectangle([1.0], [1.0])
    assert np.allclose(get_extents(thin), [[1.0, 1.0]])


def test_constant_negative_barrier_returns_whole_box():
    box = HyperRectangle([-1.0, -1.0], [1.0, 1.0])
    boxes = get_neg_d_set(box, constant_barrier(2, -1.0), identity_dynamics(2), 0.1)
    assert len(boxes) == 1
    assert np.allclose(boxes[0].lo, box.lo) and np.allclose(boxes[0].hi, box.hi)


def test_constant_positive_barrier_returns_nothing():
    box = HyperRectangle([-1.0, -1.0], [1.0, 1.0])
    boxes = get_neg_d_set(box, constant_barrier(2, 1.0), identity_dynamics(2), 0.1)
    assert boxes == []


def test_split_produces_disjoint_cover():
    net = square_barrier(-0.3)
    box = HyperRectangle([-1.4, -1.4], [1.4, 1.4])
    boxes = get_neg_d_set(box, net, contraction(2), 0.2)
    assert boxes
    vol = sum(b.volume for b in boxes)
    assert vol <= box.volume + 1e-9
    # pairwise interior-disjoint
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            lo = np.maximum(boxes[i].lo, boxes[j].lo)
            hi = np.minimum(boxes[i].hi, boxes[j].hi)
            assert np.any(hi - lo <= 1e-12)
    for b in boxes:
        assert box.contains(b.lo, tol=1e-12) and box.contains(b.hi, tol=1e-12)


def test_result_sorted_lexicographically():
    net = square_barrier(-0.3)
    box = HyperRectangle([-1.4, -1.4], [1.4, 1.4])
    boxes = get_neg_d_set(box, net, contraction(2), 0.2)
    keys = [tuple(b.lo) for b in boxes]
    assert keys == sorted(keys)


def test_eps_validation():
    with pytest.raises(ValueError):
        get_neg_d_set(
            HyperRectangle([0.0], [1.0]), constant_barrier(1, -1.0), identity_dynamics(1), 0.0
        )


def test_dim_validation():
    with pytest.raises(ValueError):
        get_neg_d_set(
            HyperRectangle([0.0], [1.0]),
            constant_barrier(1, -1.0),
            NeuralNetwork((Layer(AffineMap(np.ones((2, 1)), np.zeros(2))),)),
            0.1,
        )


def test_compute_gamma_simple_ratio():
    # B = -1 constant, f identity: u_f = l_bf = -1, gamma = 1
    box = HyperRectangle([0.0], [1.0])
    gamma, valid, ratios = compute_gamma([box], constant_barrier(1, -1.0), identity_dynamics(1))
    assert gamma == pytest.approx(1.0)
    assert valid
    assert ratios == [pytest.approx(1.0)]


def test_compute_gamma_takes_min():
    net = square_barrier(-0.3)
    dyn = contraction(2)
    boxes = get_neg_d_set(HyperRectangle([-1.4, -1.4], [1.4, 1.4]), net, dyn, 0.2)
    gamma, valid, ratios = compute_gamma(boxes, net, dyn)
    assert gamma == pytest.approx(min(ratios))
    assert valid == (gamma > 0)


def test_compute_gamma_zero_flagged():
    """A barrier with upper bound exactly 0 somewhere yields gamma = 0, invalid."""
    box = HyperRectangle([0.0], [1.0])
    gamma, valid, _ = compute_gamma([box], constant_barrier(1, 0.0), identity_dynamics(1))
    assert gamma == 0.0
    assert not valid


def test_compute_gamma_rejects_ungated_box():
    with pytest.raises(ValueError):
        compute_gamma(
            [HyperRectangle([0.0], [1.0])], constant_barrier(1, 1.0), identity_dynamics(1)
        )


def test_compute_gamma_empty():
    with pytest.raises(EmptyPartition):
        compute_gamma([], constant_barrier(1, -1.0), identity_dynamics(1))


def test_partition_safe_set_wrapper():
    net = square_barrier(-0.3)
    dyn = contraction(2)
    res = partition_safe_set(HyperRectangle([-1.0, -1.0], [1.0, 1.0]), net, dyn, 0.2)
    assert res.valid
    assert res.gamma == pytest.approx(min(res.per_box_ratios))
    assert len(res.boxes) == len(res.per_box_ratios)


def test_membership_soundness_sampled():
    """Sampled decrease check on every returned box (the set the partition
    certifies is exactly {B(f(x)) - gamma B(x) <= 0})."""
    rng = make_rng(5)
    net = square_barrier(-0.3)
    dyn = contraction(2)
    res = partition_safe_set(HyperRectangle([-1.4, -1.4], [1.4, 1.4]), net, dyn, 0.2)
    for box in res.boxes:
        for x in box.sample(rng, 200):
            fx = dyn(x)
            assert net(fx) - res.gamma * net(x) <= 1e-7


def test_eps_refinement_monotone():
    """Halving eps never loses certified volume."""
    rng = make_rng(9)
    for trial in range(5):
        net = random_shallow(rng, 2, 6, negative_at=np.zeros(2))
        dyn = contraction(2, rate=0.4)
        box = HyperRectangle([-1.0, -1.0], [1.0, 1.0])
        coarse = get_neg_d_set(box, net, dyn, 0.5)
        fine = get_neg_d_set(box, net, dyn, 0.25)
        vol_c = sum(b.volume for b in coarse)
        vol_f = sum(b.volume for b in fine)
        assert vol_f >= vol_c - 1e-9
