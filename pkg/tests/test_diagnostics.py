from pathlib import Path

import numpy as np
import pytest

from monostop.core.diagnostics import (MonotoneReport, increment_consistency_check, measure_change_diagnostic,
                                       monotone_violation_scan)
from monostop.core.problem import InvalidProblemError
from monostop.laws import Uniform
from monostop.problems import HouseParams, HouseProduct, load_problem

from helpers import ConstantProblem, OscillatingProblem

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_scan_clean_on_house_sum():
    rep = monotone_violation_scan(load_problem(CONFIGS / "uniform_house_sum.json")[0], 2000, 30, 1)
    assert rep.monotone and rep.witness_path is None and rep.paths_scanned == 2000


def test_scan_finds_deterministic_violation():
    rep = monotone_violation_scan(OscillatingProblem(), 10, 6, 1)
    assert rep.violations == 10 and rep.witness_index == 2.0 and rep.witness_path_index == 0
    np.testing.assert_array_equal(rep.witness_path.y_values[:3], [-1.0, 1.0, -1.0])
    assert rep.to_dict()["witness_y_values"][:2] == [-1.0, 1.0]


def test_scan_finds_burglar_sum_violations():
    rep = monotone_violation_scan(load_problem(CONFIGS / "burglar_sum_two_gangs.json")[0], 5000, 20, 1)
    assert not rep.monotone
    y = rep.witness_path.y_values
    k = int(rep.witness_index)
    assert y[k - 1] > 0 and np.any(y[:k - 1] <= 0)


def test_scan_batches_agree():
    p = load_problem(CONFIGS / "burglar_sum_two_gangs.json")[0]
    a = monotone_violation_scan(p, 600, 10, 3, batch=600)
    b = monotone_violation_scan(p, 600, 10, 3, batch=47)
    assert (a.violations, a.witness_path_index, a.witness_index) == (b.violations, b.witness_path_index,
                                                                     b.witness_index)


def test_scan_length_validation():
    with pytest.raises(ValueError):
        monotone_violation_scan(OscillatingProblem(), 10, 1, 1)


def test_report_invariant():
    with pytest.raises(ValueError):
        MonotoneReport(10, 3)


def test_increment_check_detects_wrong_analytic():
    class Biased(HouseProduct):
        def y_increment(self, state, n):
            return super().y_increment(state, n) + 0.05

    p = Biased(HouseParams.identical(2, Uniform(), rho=0.9))
    state = {"S": np.array([[0.5, 0.5]])}
    assert not increment_consistency_check(p, state, 1, 50_000, 3).passed
    assert increment_consistency_check(HouseProduct(p.params), state, 1, 50_000, 3).passed


def test_increment_check_sample_floor():
    p = HouseProduct(HouseParams.identical(2, Uniform(), rho=0.9))
    with pytest.raises(ValueError):
        increment_consistency_check(p, {"S": np.array([[0.5, 0.5]])}, 1, 10, 3)


def test_measure_change_passes_for_discounted_product():
    p = HouseProduct(HouseParams.identical(2, Uniform(), rho=0.5))
    rep = measure_change_diagnostic(p, [5, 10, 20], 20_000, 1)
    assert rep.passed and rep.estimates[-1] < 0.01


def test_measure_change_fails_for_constant():
    rep = measure_change_diagnostic(ConstantProblem(), [5, 10, 20], 100, 1)
    assert not rep.passed and rep.estimates == [1.0, 1.0, 1.0]


def test_measure_change_rejects_nonpositive_rewards():
    with pytest.raises(InvalidProblemError):
        measure_change_diagnostic(load_problem(CONFIGS / "uniform_house_sum.json")[0], [2, 4], 1000, 1)
