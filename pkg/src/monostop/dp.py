"""Exact finite-horizon backward induction on finitely supported problems.

A ``FiniteChain`` enumerates, layer by layer, every state reachable at
times 1..L together with the exact transition probabilities, so the Bellman
recursion and the evaluation of any (state, time) rule are exact up to
floating point.  Uniform offers are handled by quantizing them onto an
equally weighted grid; the comparison is then about the quantized problem
itself, not an approximation of the continuous one.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import sparse

from .core.problem import MAXIMIZE, take
from .core.rules import StoppingRule
from .laws import Discrete, Uniform, law_from_spec
from .problems.config import build_problem

MAX_ENTRIES = 1_000_000
MAX_EXPANSION = 5_000_000  # (state, outcome) rows materialized in one step
ROW_SUM_TOL = 1e-12
TIE_TOL = 1e-12


class ChainTooLargeError(RuntimeError):
    pass


def _keys(state) -> np.ndarray:
    cols = [np.asarray(v, dtype=float).reshape(len(v), -1) for _, v in sorted(state.items())]
    return np.concatenate(cols, axis=1)


def _unique(state):
    keys = _keys(state)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    return take(state, first), inverse.reshape(-1)


@dataclass
class FiniteChain:
    problem: Any
    horizon: int
    layers: list[dict]               # batched state per time 1..L
    transitions: list[sparse.csr_matrix]  # layer n -> n+1, for n = 1..L-1
    rewards: list[np.ndarray]
    initial: np.ndarray              # distribution over layer 1

    def __post_init__(self):
        for n, P in enumerate(self.transitions, start=1):
            if P.nnz and P.data.min() < 0:
                raise ValueError(f"negative transition probability at time {n}")
            rows = np.asarray(P.sum(axis=1)).ravel()
            if np.max(np.abs(rows - 1.0)) > ROW_SUM_TOL:
                raise ValueError(f"transition rows at time {n} do not sum to 1")

    @property
    def n_entries(self) -> int:
        return sum(len(r) for r in self.rewards)

    def truncate(self, horizon: int) -> "FiniteChain":
        if not 1 <= horizon <= self.horizon:
            raise ValueError(f"horizon must lie in 1..{self.horizon}")
        return FiniteChain(self.problem, horizon, self.layers[:horizon], self.transitions[:horizon - 1],
                           self.rewards[:horizon], self.initial)

    def orientation(self) -> float:
        return 1.0 if self.problem.direction == MAXIMIZE else -1.0


def build_chain(problem, horizon: int, max_entries: int = MAX_ENTRIES) -> FiniteChain:
    """Enumerate the reachable states of a finitely supported discrete problem up to ``horizon``."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    probs, u_rows = problem.finite_outcomes()
    K = len(probs)
    layer, inv = _unique(problem.initial(u_rows))
    init = np.bincount(inv, weights=probs, minlength=len(next(iter(layer.values()))))
    layers, rewards, trans = [layer], [problem.reward(layer, 1)], []
    total = len(rewards[0])
    for n in range(1, horizon):
        S = len(rewards[-1])
        if S * K > MAX_EXPANSION:
            raise ChainTooLargeError(f"one-step expansion at time {n} needs {S * K} rows (limit {MAX_EXPANSION}); "
                                     "use a coarser grid or a shorter horizon")
        batch = {k: np.repeat(v, K, axis=0) for k, v in layer.items()}
        nxt = problem.step(batch, n, np.tile(u_rows, (S, 1)))
        layer, inv = _unique(nxt)
        size = len(next(iter(layer.values())))
        total += size
        if total > max_entries:
            raise ChainTooLargeError(f"chain exceeds {max_entries} (state x time) entries at time {n + 1}; "
                                     "use a coarser grid or a shorter horizon")
        P = sparse.coo_matrix((np.tile(probs, S), (np.repeat(np.arange(S), K), inv)), shape=(S, size)).tocsr()
        trans.append(P)
        layers.append(layer)
        rewards.append(problem.reward(layer, n + 1))
    return FiniteChain(problem, horizon, layers, trans, rewards, init)


def quantize(law, grid: int):
    """Uniform law -> equally weighted grid of ``grid`` points; finite laws pass through."""
    if isinstance(law, Uniform):
        if grid < 2:
            raise ValueError("grid resolution must be at least 2")
        vals = np.linspace(law.low, law.high, grid)
        return Discrete(tuple(vals), tuple(np.full(grid, 1.0 / grid)))
    if isinstance(law, Discrete) or law.kind == "point":
        return law
    raise ValueError(f"cannot discretize a law of type {law.kind!r}")


def discretize(family: str, params: dict, grid: int = 21, horizon: int = 12) -> FiniteChain:
    """FiniteChain for a house-selling or burglar instance given as a config ``params`` dict."""
    if family not in ("house-sum", "house-product", "burglar-sum", "burglar-product"):
        raise ValueError(f"family {family!r} does not support discretization")
    params = dict(params)
    for key in ("distribution", "distributions"):
        if key in params:
            laws = params[key] if key.endswith("s") else [params[key]]
            q = [quantize(law_from_spec(x), grid).spec() for x in laws]
            params[key] = q if key.endswith("s") else q[0]
    return build_chain(build_problem({"family": family, "params": params}), horizon)


@dataclass
class DPResult:
    values: list[np.ndarray]
    actions: list[np.ndarray]       # True = stop
    continuation: list[np.ndarray]  # nan at the horizon
    value: float

    def to_csv(self, chain: FiniteChain, header: str | None = None) -> str:
        return dp_csv(chain, self, header)


def dp_solve(chain: FiniteChain) -> DPResult:
    """Bellman recursion in the maximizing orientation; ties resolve to stop."""
    sgn = chain.orientation()
    L = chain.horizon
    values, actions, cont = [None] * L, [None] * L, [None] * L
    values[-1] = sgn * chain.rewards[-1]
    actions[-1] = np.ones(len(values[-1]), bool)
    cont[-1] = np.full(len(values[-1]), np.nan)
    for n in range(L - 2, -1, -1):
        stop = sgn * chain.rewards[n]
        c = chain.transitions[n] @ values[n + 1]
        actions[n] = stop >= c
        values[n] = np.where(actions[n], stop, c)
        cont[n] = c
    value = float(chain.initial @ values[0])
    return DPResult([sgn * v for v in values], actions, [sgn * c for c in cont], sgn * value)


def rule_actions(chain: FiniteChain, rule: StoppingRule) -> list[np.ndarray]:
    p = chain.problem
    acts = [np.asarray(rule.stops(p, p.observable(layer), n), bool) for n, layer in enumerate(chain.layers, 1)]
    acts[-1] = np.ones_like(acts[-1])  # the chain ends at its horizon
    return acts


def policy_value(chain: FiniteChain, rule) -> float:
    """Exact expected reward of a rule (or a per-layer stop table) on the chain."""
    acts = rule if isinstance(rule, list) else rule_actions(chain, rule)
    w = chain.rewards[-1]
    for n in range(chain.horizon - 2, -1, -1):
        w = np.where(acts[n], chain.rewards[n], chain.transitions[n] @ w)
    return float(chain.initial @ w)


def chain_is_monotone(chain: FiniteChain) -> bool:
    """Exact check on the chain: no reachable step leads from signal <= 0 to signal > 0."""
    p = chain.problem
    sig = [p.myopic_signal(layer, n) for n, layer in enumerate(chain.layers, 1)]
    for n, P in enumerate(chain.transitions):
        bad = (sig[n] <= 0.0).astype(float) @ P.astype(bool).astype(float)
        if np.any((bad > 0) & (sig[n + 1] > 0.0)):
            return False
    return True


@dataclass
class AgreementRecord:
    horizon: int
    dp_value: float
    myopic_value: float
    gap: float
    action_mismatches: int
    monotone: bool
    note: str = ""

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


def agreement_report(chain: FiniteChain, horizons: Sequence[int]) -> list[AgreementRecord]:
    """DP value against the truncated myopic rule at each horizon."""
    monotone = chain_is_monotone(chain)
    note = "" if monotone else "monotone precondition unmet"
    out = []
    for L in horizons:
        sub = chain.truncate(int(L))
        res = dp_solve(sub)
        acts = rule_actions(sub, StoppingRule.truncated(StoppingRule.myopic(), L))
        myo = policy_value(sub, acts)
        sgn = sub.orientation()
        mismatches = 0
        for n in range(L - 1):
            untied = np.abs(sub.rewards[n] - res.continuation[n]) > TIE_TOL
            mismatches += int(np.count_nonzero((acts[n] != res.actions[n]) & untied))
        out.append(AgreementRecord(int(L), res.value, myo, sgn * (res.value - myo), mismatches, monotone, note))
    return out


def _label(state, i) -> str:
    parts = []
    for k, v in sorted(state.items()):
        row = np.asarray(v[i]).ravel()
        parts.append(f"{k}=" + ";".join(repr(float(x)) if x.dtype.kind == "f" else str(int(x)) for x in row))
    return "|".join(parts)


def dp_csv(chain: FiniteChain, result: DPResult, header: str | None = None) -> str:
    buf = io.StringIO()
    if header:
        buf.write(f"# {header}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["state", "time", "value", "action"])
    for n, layer in enumerate(chain.layers):
        for i in range(len(result.values[n])):
            w.writerow([_label(layer, i), n + 1, repr(float(result.values[n][i])),
                        "stop" if result.actions[n][i] else "continue"])
    return buf.getvalue()
