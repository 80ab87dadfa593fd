"""Sampling-based checks of the monotone-case structure.

All of these are falsification tools: a clean scan is evidence, not proof.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .._random import BulkTape, StepTape, StreamTape
from .problem import EventPath, InvalidProblemError, repeat, take
from .rules import StoppingRule

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass
class MonotoneReport:
    paths_scanned: int
    violations: int
    witness_path: EventPath | None = None
    witness_index: float | None = None   # 1-based step, or time for continuous problems
    witness_path_index: int | None = None

    def __post_init__(self):
        if (self.violations == 0) != (self.witness_path is None):
            raise ValueError("a witness is recorded exactly when violations were found")

    @property
    def monotone(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict[str, Any]:
        d = {"paths_scanned": self.paths_scanned, "violations": self.violations,
             "witness_index": self.witness_index, "witness_path_index": self.witness_path_index}
        if self.witness_path is not None:
            d["witness_y_values"] = self.witness_path.y_values.tolist()
            d["witness_times"] = self.witness_path.times.tolist()
        return d


class _Tracker:
    """Streaming check that a signal never turns positive after being <= 0."""

    def __init__(self, n: int):
        self.seen = np.zeros(n, bool)
        self.first = np.full(n, np.nan)

    def update(self, local, signal, at):
        bad = self.seen[local] & (signal > 0.0) & np.isnan(self.first[local])
        self.first[local[bad]] = np.broadcast_to(at, local.shape)[bad]
        self.seen[local] |= signal <= 0.0


def _scan_discrete(problem, rows, seed, length, tracker):
    tape = StepTape(seed, rows, problem.n_streams)
    local = np.arange(len(rows))
    state = problem.initial(tape.next(local))
    for n in range(1, length + 1):
        tracker.update(local, problem.myopic_signal(state, n), float(n))
        if n < length:
            state = problem.step(state, n, tape.next(local))


def _scan_continuous(problem, rows, seed, t_end, tracker):
    tape = StreamTape(seed, rows, problem.n_streams)
    local = np.arange(len(rows))
    state = problem.start(tape, local)
    tracker.update(local, problem.myopic_signal(state), state["t"])
    while len(local):
        te = np.minimum(problem.next_event_time(state), t_end)
        for frac in (0.5, 1.0):  # interior point, then the left limit at the event
            at = state["t"] + frac * (te - state["t"])
            tracker.update(local, problem.myopic_signal(problem.flow(state, at)), at)
        live = te < t_end
        local = local[live]
        if not len(local):
            break
        state = problem.jump(problem.flow(take(state, live), te[live]), tape, local)
        tracker.update(local, problem.myopic_signal(state), state["t"])


def monotone_violation_scan(problem, path_count: int, length: float, seed: int,
                            batch: int = 10_000) -> MonotoneReport:
    """Check on simulated paths that once the myopic signal is <= 0 it stays <= 0.

    ``length`` is the number of steps for discrete problems and the time window
    for continuous ones (which are checked after every event, at the left limit
    before it and half way in between).
    """
    from ..mc import simulate_path

    discrete = problem.time_axis == "discrete"
    if discrete and length < 2:
        raise ValueError("length must be at least 2")
    first = []
    for s in range(0, path_count, batch):
        rows = np.arange(s, min(s + batch, path_count))
        tr = _Tracker(len(rows))
        if discrete:
            _scan_discrete(problem, rows, seed, int(length), tr)
        else:
            _scan_continuous(problem, rows, seed, float(length), tr)
        first.append(tr.first)
    first = np.concatenate(first)
    bad = np.flatnonzero(~np.isnan(first))
    if not bad.size:
        return MonotoneReport(path_count, 0)
    k = int(bad[0])
    path, _, _ = simulate_path(problem, StoppingRule.constant_time(length), seed, k, horizon=length)
    return MonotoneReport(path_count, int(bad.size), path, float(first[k]), k)


@dataclass
class IncrementReport:
    analytic: float
    estimate: float
    stderr: float
    sample_count: int
    passed: bool

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


def _single(state) -> dict:
    s = {k: np.asarray(v) for k, v in state.items()}
    return s if all(v.ndim >= 1 and len(v) == 1 for v in s.values()) else {k: v[None, ...] for k, v in s.items()}


def increment_consistency_check(problem, state, time, sample_count: int, seed: int,
                                h: float = 1.0) -> IncrementReport:
    """Compare the analytic one-step advantage (or drift rate) with a Monte Carlo estimate.

    Discrete: mean X_{n+1} - X_n over fresh one-step draws.  Continuous: the
    compensated increment (X_{t+h} - X_t - int_t^{t+h} (Y_s - Y_t) ds) / h,
    whose mean is exactly Y_t; the integral is evaluated per inter-event
    segment with 8-point Gauss-Legendre.  Passes within 4 standard errors.
    """
    if sample_count < 100:
        raise ValueError("sample_count must be at least 100")
    one = _single(state)
    if problem.time_axis == "discrete":
        n = int(time)
        analytic = float(problem.y_increment(one, n)[0])
        tape = BulkTape(seed, problem.n_streams)
        batch = repeat(one, sample_count)
        nxt = problem.step(batch, n, tape.next(np.arange(sample_count)))
        delta = problem.reward(nxt, n + 1) - problem.reward(one, n)[0]
    else:
        analytic = float(problem.y_rate(_at_time(one, time))[0])
        delta = _compensated_increments(problem, _at_time(one, time), sample_count, seed, h)
    mean = math.fsum(delta.tolist()) / sample_count
    se = float(np.std(delta, ddof=1)) / math.sqrt(sample_count)
    tol = 4.0 * se + 1e-12 * (1.0 + abs(analytic))
    return IncrementReport(analytic, mean, se, sample_count, abs(mean - analytic) <= tol)


def _at_time(state, time):
    s = dict(state)
    s["t"] = np.full(1, float(time))
    return s


def _compensated_increments(problem, one, count, seed, h):
    tape = BulkTape(seed, problem.n_streams + 1)
    local = np.arange(count)
    state = problem.resume(repeat(one, count), tape, local)
    x0 = problem.reward(state)
    y0 = problem.y_rate(state)
    t_end = state["t"] + h
    integral = np.zeros(count)
    x1 = np.empty(count)
    idx = local
    while len(idx):
        te = np.minimum(problem.next_event_time(state), t_end[idx])
        t0 = state["t"]
        half = 0.5 * (te - t0)
        for x, w in zip(GL_NODES, GL_WEIGHTS):
            at = t0 + half * (x + 1.0)
            integral[idx] += w * half * (problem.y_rate(problem.flow(state, at)) - y0[idx])
        done = te >= t_end[idx]
        if done.any():
            x1[idx[done]] = problem.reward(problem.flow(take(state, done), te[done]))
        idx = idx[~done]
        if not len(idx):
            break
        state = problem.jump(problem.flow(take(state, ~done), te[~done]), tape, idx)
    return (x1 - x0 - integral) / h


@dataclass
class MeasureChangeReport:
    indices: list[int]
    estimates: list[float]
    stderrs: list[float]
    path_count: int
    eps: float
    passed: bool

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


def measure_change_diagnostic(problem, indices: Sequence[int], path_count: int, seed: int,
                              eps: float = 0.01) -> MeasureChangeReport:
    """Estimate e_n = E[X_n 1{tau* > n}] for a positive (multiplicative) problem.

    The verdict passes when the last estimate is below ``eps`` and either
    below the first one or exactly zero.
    """
    idx = sorted(int(i) for i in indices)
    if not idx or idx[0] < 1:
        raise ValueError("indices must be positive")
    rows = np.arange(path_count)
    tape = StepTape(seed, rows, problem.n_streams)
    local = rows.copy()
    state = problem.initial(tape.next(local))
    alive = np.ones(path_count, bool)
    values = {}
    for n in range(1, idx[-1] + 1):
        x = problem.reward(state, n)
        if np.any(x <= 0):
            raise InvalidProblemError(f"{problem.family}: non-positive reward at step {n}")
        alive &= ~(problem.myopic_signal(state, n) <= 0.0)
        if n in idx:
            values[n] = np.where(alive, x, 0.0)
        if n < idx[-1]:
            state = problem.step(state, n, tape.next(local))
    est, se = [], []
    for n in idx:
        v = values[n]
        est.append(math.fsum(v.tolist()) / path_count)
        se.append(float(np.std(v, ddof=1)) / math.sqrt(path_count))
    passed = est[-1] < eps and (est[-1] < est[0] or est[-1] == 0.0)
    return MeasureChangeReport(idx, est, se, path_count, eps, bool(passed))
