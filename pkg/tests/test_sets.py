import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from monostop._random import BulkTape
from monostop.core import StoppingRule
from monostop.laws import Discrete, Exponential, Uniform
from monostop.problems import BurglarParams, BurglarProduct, load_problem
from monostop.sets import (BallComplement, ExpSum, FSum, HalfSpace, Polyhedron, ProductH, ProductUniform,
                           boundary_csv, boundary_svg, descriptor_from_dict, descriptor_to_dict)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
TOL = 1e-9
BERN = Discrete((0.0, 1.0), (0.5, 0.5))
MIXED = (Discrete((0.0, 0.5, 1.0), (0.3, 0.4, 0.3)), Discrete((0.2, 0.6, 0.9), (0.5, 0.3, 0.2)))

DESCRIPTORS = [
    BallComplement(0.3), ExpSum(1.0), Polyhedron((BERN, BERN), 0.2), Polyhedron(MIXED, 0.15),
    FSum((Uniform(), Exponential()), 0.4), ProductUniform(0.9),
    ProductH((Exponential(), Exponential()), (1.0, 1.0), 0.5),
    HalfSpace((1.2, 0.8), 1.0, ">="), HalfSpace((0.08, 0.06), 0.1, "<=", upper=(1.0, 1.0)),
]


@pytest.mark.parametrize("s", DESCRIPTORS, ids=lambda s: s.variant)
def test_boundary_points_satisfy_equality(s):
    pts = s.boundary_sample(200)
    assert len(pts) > 10
    assert np.all(np.isfinite(pts))
    assert np.max(np.abs(s.equality_residual(pts))) <= 1e-8
    lo, hi = s.box
    assert np.all(pts >= lo - TOL) and np.all(pts <= hi + TOL)


@pytest.mark.parametrize("s", DESCRIPTORS, ids=lambda s: s.variant)
def test_membership_is_margin_sign(s):
    lo, hi = s.box
    rng = np.random.default_rng(1)
    pts = lo + (hi - lo) * rng.uniform(0.01, 0.99, size=(2000, 2))
    np.testing.assert_array_equal(s.membership(pts), s.margin(pts) <= 0.0)


@pytest.mark.parametrize("s", DESCRIPTORS, ids=lambda s: s.variant)
def test_dict_round_trip(s):
    assert descriptor_from_dict(descriptor_to_dict(s)) == s


@pytest.mark.parametrize("s", DESCRIPTORS, ids=lambda s: s.variant)
def test_normal_is_unit(s):
    pts = s.boundary_sample(50)
    n = s.outward_normal(pts)
    np.testing.assert_allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-12)


def test_ball_radius_and_scaling():
    b = BallComplement(0.3)
    assert b.radius == pytest.approx(math.sqrt(0.6))
    assert b.scaled(2.0).radius == pytest.approx(2 * math.sqrt(0.6))
    assert bool(b.membership([[1.0, 1.0]])[0])
    assert not bool(b.membership([[0.0, 0.0]])[0])


def test_ball_slice_reduces_dimension():
    b3 = BallComplement(0.3, dim=3)
    s = b3.slice2([0.8])
    pts = s.boundary_sample(50)
    full = np.column_stack((pts, np.full(len(pts), 0.8)))
    np.testing.assert_allclose(b3.equality_residual(full), 0.0, atol=TOL)


def test_exp_sum_slice():
    e3 = ExpSum(1.0, dim=3)
    pts = e3.slice2([2.0]).boundary_sample(50)
    full = np.column_stack((pts, np.full(len(pts), 2.0)))
    np.testing.assert_allclose(e3.margin(full), 0.0, atol=TOL)


def test_polyhedron_vertices_bernoulli():
    # f(z) = (1 - z)/2 on [0, 1]: boundary is the segment z1 + z2 = 2 - 2c
    p = Polyhedron((BERN, BERN), 0.2)
    pts = p.boundary_sample(100)
    np.testing.assert_allclose(pts.sum(axis=1), 1.6, atol=TOL)


def test_halfspace_validation():
    with pytest.raises(ValueError):
        HalfSpace((1.0, 1.0), 1.0, "==")


def test_product_uniform_threshold():
    assert ProductUniform(0.9).threshold == pytest.approx((0.45) ** -2)
    assert ProductUniform(0.9).scaled(1.1).level == pytest.approx(1.1)


def test_boundary_csv_and_svg():
    pts = BallComplement(0.3).boundary_sample(20)
    text = boundary_csv(pts, "hdr")
    lines = text.splitlines()
    assert lines[0] == "# hdr" and lines[1] == "x,y"
    back = np.array([[float(v) for v in ln.split(",")] for ln in lines[2:]])
    np.testing.assert_array_equal(back, pts)
    svg = boundary_svg(pts, BallComplement(0.3).box, "hdr")
    assert svg.startswith("<svg") or svg.startswith("<?xml")
    assert "polyline" in svg or "path" in svg


def _random_states(problem, n, seed=3):
    """States reached after a few steps (discrete) or events (continuous)."""
    tape = BulkTape(seed, problem.n_streams)
    local = np.arange(n)
    if problem.time_axis == "discrete":
        state = problem.initial(tape.next(local))
        for k in range(1, 4):
            state = problem.step(state, k, tape.next(local))
        return state, 4
    state = problem.start(tape, local)
    for _ in range(3):
        state = problem.jump(problem.flow(state, problem.next_event_time(state)), tape, local)
    return state, None


@pytest.mark.parametrize("name", ["uniform_house_sum", "exponential_house_sum", "discrete_house_sum_mixed",
                                  "uniform_house_product", "burglar_product", "disorder", "investment"])
def test_myopic_set_agrees_with_signal(name):
    problem = load_problem(CONFIGS / f"{name}.json")[0]
    state, n = _random_states(problem, 10_000)
    sig = problem.myopic_signal(state, n) if n else problem.myopic_signal(state)
    via_set = StoppingRule.first_entry(problem.myopic_set()).signal(problem, state, n if n else state["t"])
    np.testing.assert_array_equal(sig <= 0, via_set <= 0)


@given(y1=st.floats(0.01, 5), y2=st.floats(0.01, 5))
def test_product_h_margin_matches_h(y1, y2):
    laws = (Exponential(), Exponential())
    s = ProductH(laws, (1.0, 1.0), 0.5)
    expect = 0.5 * (1 + 1 / y1) * (1 + 1 / y2) - 1.0
    assert float(s.margin([[y1, y2]])[0]) == pytest.approx(expect, rel=1e-9, abs=1e-12)
