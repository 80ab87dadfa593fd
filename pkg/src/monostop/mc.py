"""Seeded Monte Carlo evaluation of stopping rules.

Path ``k`` of a run with root seed ``s`` always consumes the random streams
keyed by ``(s, k)``, so estimates do not depend on batch size, and all rules
handed to ``compare_rules`` see the same realizations (common random
numbers).  Continuous-time problems are simulated event to event with the
closed-form flow between events; a rule's crossing inside an interval is
located by bisection on its signal.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from ._random import StepTape, StreamTape
from .core.problem import MAXIMIZE, EventPath, take
from .core.rules import StoppingRule

DISCRETE_CAP = 10_000
BATCH = 10_000
TIME_TOL = 1e-12
CSV_COLUMNS = ("rule_id", "mean", "stderr", "n_paths", "seed", "truncated_frac")


@dataclass
class EstimateReport:
    rule_id: str
    mean: float
    stderr: float
    n_paths: int
    seed: int
    truncated_frac: float
    horizon: float
    direction: str = MAXIMIZE
    mean_stop_time: float = math.nan

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def csv_row(self) -> list:
        return [self.rule_id, repr(self.mean), repr(self.stderr), self.n_paths, self.seed, repr(self.truncated_frac)]


@dataclass
class Difference:
    rule_a: str
    rule_b: str
    diff: float  # mean(reward_a - reward_b), stored orientation
    stderr: float


@dataclass
class ComparisonReport:
    estimates: list[EstimateReport]
    differences: list[Difference] = field(default_factory=list)
    direction: str = MAXIMIZE

    def estimate(self, rule_id: str) -> EstimateReport:
        return next(e for e in self.estimates if e.rule_id == rule_id)

    def difference(self, a: str, b: str) -> Difference:
        for d in self.differences:
            if (d.rule_a, d.rule_b) == (a, b):
                return d
            if (d.rule_a, d.rule_b) == (b, a):
                return Difference(a, b, -d.diff, d.stderr)
        raise KeyError((a, b))

    def advantage(self, a: str, b: str) -> tuple[float, float]:
        """How much better rule a does than rule b in the maximizing orientation, with its s.e."""
        d = self.difference(a, b)
        return (d.diff if self.direction == MAXIMIZE else -d.diff), d.stderr

    def dominates(self, a: str, b: str, n_se: float = 2.0) -> bool:
        adv, se = self.advantage(a, b)
        return adv >= -n_se * se

    def to_dict(self) -> dict[str, Any]:
        return {"direction": self.direction,
                "estimates": [e.to_dict() for e in self.estimates],
                "differences": [asdict(d) for d in self.differences]}


def reports_csv(reports: Sequence[EstimateReport], header: str | None = None) -> str:
    buf = io.StringIO()
    if header:
        buf.write(f"# {header}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()


# --------------------------------------------------------------------- runners

@dataclass
class _Outcome:
    stop: np.ndarray       # (rules, paths)
    reward: np.ndarray
    truncated: np.ndarray
    trace: list = field(default_factory=list)


def _view(problem, state):
    return problem.observable(state)


def _run_discrete(problem, rules, seed, rows, cap, record=False) -> _Outcome:
    n_rows, R = len(rows), len(rules)
    tape = StepTape(seed, rows, problem.n_streams)
    out = _Outcome(np.full((R, n_rows), np.nan), np.full((R, n_rows), np.nan), np.zeros((R, n_rows), bool))
    pending = np.ones((R, n_rows), bool)
    local = np.arange(n_rows)
    state = problem.initial(tape.next(local))
    n = 1
    while True:
        view = _view(problem, state)
        reward = problem.reward(state, n)
        if record:
            out.trace.append((n, take(state, 0), float(reward[0]), float(problem.y_increment(state, n)[0])))
        for k, rule in enumerate(rules):
            p = pending[k, local]
            if not p.any():
                continue
            hit = p & rule.stops(problem, view, n)
            if n >= cap:
                out.truncated[k, local[p & ~hit]] = True
                hit = p
            idx = local[hit]
            out.stop[k, idx] = n
            out.reward[k, idx] = reward[hit]
            pending[k, idx] = False
        keep = pending[:, local].any(axis=0)
        if not keep.any():
            return out
        local = local[keep]
        state = problem.step(take(state, keep), n, tape.next(local))
        n += 1


def _bisect(problem, rule, state, hi):
    """First time in (state t, hi] where the rule's signal is <= 0, to TIME_TOL."""
    lo = state["t"].copy()
    hi = np.minimum(hi, np.where(rule.horizon >= lo, rule.horizon, hi))
    for _ in range(200):
        open_ = hi - lo > TIME_TOL
        if not open_.any():
            break
        mid = np.where(open_, 0.5 * (lo + hi), hi)
        sig = rule.signal(problem, _view(problem, problem.flow(state, mid)), mid)
        below = sig <= 0.0
        hi = np.where(open_ & below, mid, hi)
        lo = np.where(open_ & ~below, mid, lo)
    return hi


def _run_continuous(problem, rules, seed, rows, t_max, record=False) -> _Outcome:
    n_rows, R = len(rows), len(rules)
    tape = StreamTape(seed, rows, problem.n_streams)
    out = _Outcome(np.full((R, n_rows), np.nan), np.full((R, n_rows), np.nan), np.zeros((R, n_rows), bool))
    pending = np.ones((R, n_rows), bool)
    local = np.arange(n_rows)
    state = problem.start(tape, local)

    def point_check(state, local):
        t = state["t"]
        view = _view(problem, state)
        reward = None
        for k, rule in enumerate(rules):
            p = pending[k, local]
            if not p.any():
                continue
            hit = p & rule.stops(problem, view, t)
            if hit.any():
                reward = problem.reward(state) if reward is None else reward
                out.stop[k, local[hit]] = t[hit]
                out.reward[k, local[hit]] = reward[hit]
                pending[k, local[hit]] = False

    def snap(state):
        if record:
            out.trace.append((float(state["t"][0]), take(state, 0), float(problem.reward(state)[0]),
                              float(problem.y_rate(state)[0])))

    snap(state)
    point_check(state, local)
    while True:
        keep = pending[:, local].any(axis=0)
        if not keep.any():
            return out
        local, state = local[keep], take(state, keep)
        te = problem.next_event_time(state)
        seg_end = np.minimum(te, t_max)
        left = problem.flow(state, seg_end)
        view = _view(problem, left)
        stopped_in_segment = []
        for k, rule in enumerate(rules):
            p = pending[k, local]
            if not p.any():
                continue
            cross = p & (rule.signal(problem, view, seg_end) <= 0.0)
            if cross.any():
                sub = take(state, cross)
                t_hit = _bisect(problem, rule, sub, seg_end[cross])
                at = problem.flow(sub, t_hit)
                out.stop[k, local[cross]] = t_hit
                out.reward[k, local[cross]] = problem.reward(at)
                pending[k, local[cross]] = False
                if record:
                    stopped_in_segment.append(at)
            forced = p & ~cross & (seg_end >= t_max)
            if forced.any():
                out.stop[k, local[forced]] = t_max
                out.reward[k, local[forced]] = problem.reward(take(left, forced))
                out.truncated[k, local[forced]] = True
                pending[k, local[forced]] = False
        live = pending[:, local].any(axis=0) & (te < t_max)
        if record and not live.any():
            if stopped_in_segment:
                snap(stopped_in_segment[0])
            elif seg_end[0] > state["t"][0]:
                snap(left)
        if not live.any():
            return out
        local = local[live]
        state = problem.jump(take(left, live), tape, local)
        snap(state)
        point_check(state, local)


def _default_horizon(problem, horizon):
    if horizon is not None:
        return float(horizon)
    return float(DISCRETE_CAP) if problem.time_axis == "discrete" else float(problem.default_tmax())


def _run(problem, rules, seed, rows, horizon, record=False) -> _Outcome:
    if problem.time_axis == "discrete":
        return _run_discrete(problem, rules, seed, rows, int(horizon), record)
    return _run_continuous(problem, rules, seed, rows, horizon, record)


def _run_all(problem, rules, path_count, seed, horizon, batch=BATCH):
    parts = [_run(problem, rules, seed, np.arange(s, min(s + batch, path_count)), horizon)
             for s in range(0, path_count, batch)]
    cat = lambda name: np.concatenate([getattr(p, name) for p in parts], axis=1)
    return cat("stop"), cat("reward"), cat("truncated")


# --------------------------------------------------------------------- public API

def _mean_se(x: np.ndarray) -> tuple[float, float]:
    n = len(x)
    mean = math.fsum(x.tolist()) / n
    var = math.fsum(((x - mean) ** 2).tolist()) / (n - 1)
    return mean, math.sqrt(var / n)


def simulate_path(problem, rule: StoppingRule, seed: int, path_index: int = 0,
                  horizon: float | None = None) -> tuple[EventPath, float, float]:
    """Simulate one path until ``rule`` stops (or the horizon cap forces a stop)."""
    h = _default_horizon(problem, horizon)
    o = _run(problem, [rule], seed, np.array([path_index]), h, record=True)
    stop, reward, trunc = float(o.stop[0, 0]), float(o.reward[0, 0]), bool(o.truncated[0, 0])
    times, states, rewards, ys = [], [], [], []
    for t, s, r, y in o.trace:
        if t > stop or (times and t <= times[-1]):
            continue
        times.append(t)
        states.append({k: v.tolist() if isinstance(v, np.ndarray) else v for k, v in s.items()})
        rewards.append(r)
        ys.append(y)
    path = EventPath(times, states, rewards, ys, truncated=trunc,
                     meta={"seed": seed, "path_index": path_index, "rule_id": rule.rule_id, "horizon": h})
    return path, stop, reward


def estimate_value(problem, rule: StoppingRule, path_count: int, seed: int,
                   horizon: float | None = None) -> EstimateReport:
    return compare_rules(problem, [rule], path_count, seed, horizon, _allow_single=True).estimates[0]


def compare_rules(problem, rules: Sequence[StoppingRule], path_count: int, seed: int,
                  horizon: float | None = None, _allow_single: bool = False) -> ComparisonReport:
    """Evaluate every rule on the same paths; differences use pathwise standard errors."""
    if path_count < 2:
        raise ValueError("path_count must be at least 2")
    if len(rules) < 2 and not _allow_single:
        raise ValueError("compare_rules needs at least two rules")
    h = _default_horizon(problem, horizon)
    stop, reward, trunc = _run_all(problem, list(rules), path_count, seed, h)
    ests = []
    for k, rule in enumerate(rules):
        mean, se = _mean_se(reward[k])
        ests.append(EstimateReport(rule.rule_id, mean, se, path_count, int(seed),
                                   float(np.count_nonzero(trunc[k])) / path_count, h,
                                   problem.direction, math.fsum(stop[k].tolist()) / path_count))
    diffs = []
    for i in range(len(rules)):
        for j in range(i + 1, len(rules)):
            d, se = _mean_se(reward[i] - reward[j])
            diffs.append(Difference(ests[i].rule_id, ests[j].rule_id, d, se))
    return ComparisonReport(ests, diffs, problem.direction)


def stop_times(problem, rule: StoppingRule, path_count: int, seed: int,
               horizon: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-path stop times and rewards (path order), for cross-checks."""
    stop, reward, _ = _run_all(problem, [rule], path_count, seed, _default_horizon(problem, horizon))
    return stop[0], reward[0]
