import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from barriercert.lp import (
    Constraint,
    LinearProgram,
    LpStatus,
    Relation,
    box_bounds,
    solve,
)
from barriercert.nn import AffineMap, HyperRectangle


def le(w, off):
    return Constraint(AffineMap(np.atleast_2d(w), [off]), Relation.LE)


def test_solve_simple_box():
    # max x1 + x2 over the unit square
    cons = (
        le([1.0, 0.0], -1.0),
        le([-1.0, 0.0], 0.0),
        le([0.0, 1.0], -1.0),
        le([0.0, -1.0], 0.0),
    )
    res = solve(LinearProgram(np.array([1.0, 1.0]), cons))
    assert res.status is LpStatus.OPTIMAL
    assert res.cost == pytest.approx(2.0)
    assert np.allclose(res.x_opt, [1.0, 1.0])


def test_solve_negative_variables_allowed():
    # the minimizer is at x = -3; the default linprog bounds would clip it
    cons = (Constraint(AffineMap([[1.0]], [3.0]), Relation.GE),)
    res = solve(LinearProgram(np.array([-1.0]), cons))
    assert res.status is LpStatus.OPTIMAL
    assert res.cost == pytest.approx(3.0)
    assert res.x_opt[0] == pytest.approx(-3.0)


def test_solve_infeasible():
    # x <= -1 together with x >= 2
    cons = (le([1.0], 1.0), Constraint(AffineMap([[1.0]], [-2.0]), Relation.GE))
    res = solve(LinearProgram(np.array([1.0]), cons))
    assert res.status is LpStatus.INFEASIBLE
    assert res.x_opt is None


def test_solve_unbounded():
    res = solve(LinearProgram(np.array([1.0]), (le([-1.0], 0.0),)))
    assert res.status is LpStatus.UNBOUNDED


def test_solve_equality():
    cons = (
        Constraint(AffineMap([[1.0, 1.0]], [-1.0]), Relation.EQ),
        le([-1.0, 0.0], 0.0),
        le([0.0, -1.0], 0.0),
    )
    res = solve(LinearProgram(np.array([1.0, 0.0]), cons))
    assert res.status is LpStatus.OPTIMAL
    assert res.cost == pytest.approx(1.0)


def test_constraint_requires_scalar():
    with pytest.raises(ValueError):
        Constraint(AffineMap(np.eye(2), np.zeros(2)))


def test_lp_dimension_check():
    with pytest.raises(ValueError):
        LinearProgram(np.zeros(3), (le([1.0], 0.0),))


def test_box_bounds_known():
    f = AffineMap([[1.0, -2.0]], [0.5])
    box = HyperRectangle([0.0, 0.0], [1.0, 1.0])
    lo, hi = box_bounds(f, box)
    assert lo[0] == pytest.approx(-1.5)
    assert hi[0] == pytest.approx(1.5)


def test_box_bounds_dim_mismatch():
    with pytest.raises(ValueError):
        box_bounds(AffineMap([[1.0]], [0.0]), HyperRectangle([0.0, 0.0], [1.0, 1.0]))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_box_bounds_tight_at_corners(seed):
    """The interval image of an affine map over a box is attained at corners."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    f = AffineMap(rng.standard_normal((2, n)), rng.standard_normal(2))
    lo_c = rng.uniform(-2, 2, n)
    box = HyperRectangle(lo_c, lo_c + rng.uniform(0, 3, n))
    lo, hi = box_bounds(f, box)
    vals = np.array([f(c) for c in box.corners()])
    assert np.allclose(vals.min(axis=0), lo, atol=1e-9)
    assert np.allclose(vals.max(axis=0), hi, atol=1e-9)
    samples = box.sample(rng, 50)
    for x in samples:
        v = f(x)
        assert np.all(v >= lo - 1e-9) and np.all(v <= hi + 1e-9)
