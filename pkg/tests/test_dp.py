import numpy as np
import pytest
from scipy import sparse

from monostop.core import StoppingRule
from monostop.dp import (ChainTooLargeError, FiniteChain, agreement_report, build_chain, chain_is_monotone,
                         discretize, dp_csv, dp_solve, policy_value, quantize)
from monostop.laws import Discrete, Exponential, Uniform

BERN = {"m": 1, "distribution": {"type": "discrete", "values": [0, 1], "probs": [0.5, 0.5]}, "c": 0.2}


def bernoulli_myopic_value(L, c=0.2):
    # stop at the first offer of 1, or at L; P(first 1 at step k) = 2^-k
    v = sum(2.0 ** -k * (1 - c * k) for k in range(1, L))
    return v + 2.0 ** -(L - 1) * (0.5 - c * L)


def test_bernoulli_spot_values():
    chain = discretize("house-sum", BERN, horizon=2)
    assert dp_solve(chain).value == pytest.approx(0.45, abs=1e-12)
    assert policy_value(chain, StoppingRule.constant_time(1)) == pytest.approx(0.3, abs=1e-12)


def test_bernoulli_high_cost_stops_at_once():
    chain = discretize("house-sum", {**BERN, "c": 1.0}, horizon=6)
    assert dp_solve(chain).value == pytest.approx(-0.5, abs=1e-12)


@pytest.mark.parametrize("L", range(1, 13))
def test_bernoulli_closed_form(L):
    chain = discretize("house-sum", BERN, horizon=L)
    assert dp_solve(chain).value == pytest.approx(bernoulli_myopic_value(L), abs=1e-12)


def test_quantized_uniform_agreement():
    chain = discretize("house-sum", {"m": 2, "distribution": {"type": "uniform"}, "c": 0.3}, grid=11, horizon=5)
    recs = agreement_report(chain, range(1, 6))
    assert all(abs(r.gap) <= 1e-10 and r.monotone and not r.note for r in recs)


def test_burglar_product_agreement():
    params = {"m": 2, "p": 0.6, "distribution": {"type": "discrete", "values": [0.5, 1.0, 3.0],
                                                 "probs": [0.3, 0.4, 0.3]}}
    chain = discretize("burglar-product", params, horizon=6)
    assert chain_is_monotone(chain)
    assert all(abs(r.gap) <= 1e-10 for r in agreement_report(chain, range(1, 7)))


def test_burglar_sum_flagged():
    params = {"m": 2, "p": 0.5, "distribution": {"type": "discrete", "values": [0.2, 0.5, 2.0],
                                                 "probs": [0.3, 0.4, 0.3]}}
    chain = discretize("burglar-sum", params, horizon=5)
    assert not chain_is_monotone(chain)
    assert all(r.note == "monotone precondition unmet" for r in agreement_report(chain, [3, 5]))


def test_quantize():
    q = quantize(Uniform(0.0, 2.0), 5)
    np.testing.assert_allclose(q.values, [0, 0.5, 1.0, 1.5, 2.0])
    np.testing.assert_allclose(q.probs, 0.2)
    d = Discrete((0.0, 1.0), (0.5, 0.5))
    assert quantize(d, 5) is d
    with pytest.raises(ValueError):
        quantize(Exponential(), 5)
    with pytest.raises(ValueError):
        quantize(Uniform(), 1)


def test_discretize_rejects_continuous_families():
    with pytest.raises(ValueError):
        discretize("disorder", {"lam": 1.0}, horizon=3)


def test_chain_too_large():
    with pytest.raises(ChainTooLargeError):
        build_chain(discretize("house-sum", BERN, horizon=1).problem, 50, max_entries=10)


def test_chain_validation():
    chain = discretize("house-sum", BERN, horizon=2)
    bad = sparse.csr_matrix(chain.transitions[0].toarray() * 0.9)
    with pytest.raises(ValueError):
        FiniteChain(chain.problem, 2, chain.layers, [bad], chain.rewards, chain.initial)
    with pytest.raises(ValueError):
        chain.truncate(3)


def test_ties_resolve_to_stop():
    # with c = 0.5 and S = 0, f(0) - c = 0: continuing and stopping tie at L = 2
    chain = discretize("house-sum", {**BERN, "c": 0.5}, horizon=2)
    res = dp_solve(chain)
    assert res.actions[0].all()


def test_dp_csv():
    chain = discretize("house-sum", BERN, horizon=3)
    text = dp_csv(chain, dp_solve(chain), "hdr")
    lines = text.splitlines()
    assert lines[0] == "# hdr" and lines[1] == "state,time,value,action"
    assert len(lines) == 2 + chain.n_entries
    assert {ln.rsplit(",", 1)[1] for ln in lines[2:]} <= {"stop", "continue"}
