import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from monostop.core import INFINITE, StoppingRule, compensator, first_violation, multiplicative_compensator, \
    myopic_time
from monostop.core.rules import parse_rule
from monostop.problems import HouseParams, HouseSum
from monostop.laws import Uniform
from monostop.sets import BallComplement

finite = st.floats(-10, 10, allow_nan=False)


def test_myopic_time_first_nonpositive():
    assert myopic_time([0.3, 0.1, -0.2, 0.5]) == 3


def test_myopic_time_tie_stops():
    assert myopic_time([0.3, 0.0, -1.0]) == 2


def test_myopic_time_never_crosses():
    assert myopic_time([1.0, 2.0]) == INFINITE
    assert myopic_time([1.0, 2.0], horizon=5) == 5


def test_myopic_time_truncated():
    assert myopic_time([1.0, 1.0, -1.0], horizon=2) == 2


def test_myopic_time_errors():
    with pytest.raises(ValueError):
        myopic_time([])
    with pytest.raises(ValueError):
        myopic_time([1.0], horizon=0)


def test_compensator_cumulates():
    np.testing.assert_allclose(compensator([0.5, -0.25, 1.0]), [0.0, 0.5, 0.25, 1.25])


def test_multiplicative_compensator():
    np.testing.assert_allclose(multiplicative_compensator([2.0, 0.5, 3.0]), [1.0, 2.0, 1.0, 3.0])


def test_first_violation():
    assert first_violation([1.0, -0.25, 0.15]) == 3
    assert first_violation([1.0, 0.5, -0.1, -0.2]) is None
    assert first_violation([-1.0, 0.0, 0.0]) is None


@given(st.lists(finite, min_size=1, max_size=40))
def test_compensator_increments_recover_y(y):
    a = compensator(y)
    np.testing.assert_allclose(np.diff(a), y, atol=1e-9)


@given(st.lists(st.floats(0.01, 5), min_size=1, max_size=20), st.lists(st.floats(-5, 0), min_size=1, max_size=20))
def test_monotone_sequence_maximizes_compensator_at_myopic_time(pos, neg):
    # monotone case: positive increments then non-positive ones
    y = pos + neg
    tau = myopic_time(y)
    a = compensator(y)
    assert tau == len(pos) + 1
    assert first_violation(y) is None
    assert a[tau - 1] == pytest.approx(a.max())


@given(st.lists(finite, min_size=1, max_size=40), st.integers(1, 50))
def test_truncation_is_min(y, L):
    assert myopic_time(y, L) == min(myopic_time(y), L)


def test_rule_ids_and_horizons():
    myo = StoppingRule.myopic()
    assert myo.rule_id == "myopic" and myo.horizon == math.inf
    assert StoppingRule.constant_time(3).rule_id == "constant:3"
    tr = StoppingRule.truncated(myo, 7)
    assert tr.rule_id == "truncated:7:myopic" and tr.horizon == 7
    assert StoppingRule.truncated(StoppingRule.constant_time(2), 7).horizon == 2
    assert StoppingRule.first_entry(BallComplement(0.3), label="x").rule_id == "x"


def test_truncated_signal_is_min_of_inner_and_time():
    p = HouseSum(HouseParams.identical(1, Uniform(), c=0.3))
    view = {"S": np.array([[0.1], [0.9]])}
    rule = StoppingRule.truncated(StoppingRule.myopic(), 5)
    np.testing.assert_allclose(rule.signal(p, view, 2), np.minimum(p.myopic_signal(view, 2), 3.0))
    assert rule.stops(p, view, 5).all()


def test_parse_rule():
    p = HouseSum(HouseParams.identical(2, Uniform(), c=0.3))
    assert parse_rule("myopic", p) == StoppingRule.myopic()
    assert parse_rule("constant:4", p).horizon == 4
    assert parse_rule("truncated:3", p).inner == StoppingRule.myopic()
    assert parse_rule("truncated:3:constant:2", p).horizon == 2
    entry = parse_rule("entry:1.3", p)
    assert entry.stopping_set == BallComplement(0.3).scaled(1.3)
    for bad in ("sometimes", "constant:x", "truncated"):
        with pytest.raises(ValueError):
            parse_rule(bad, p)
