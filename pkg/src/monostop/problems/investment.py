"""Optimal investment with m costs driven by negative subordinators.

Maximize E e^{-r tau} (1 - sum_i y_i e^{L^i_tau}) where each L^i is a drift
a_i <= 0 plus an optional compound Poisson process with negative jumps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from ..core.problem import ContinuousProblem, InvalidProblemError
from ..sets import HalfSpace

TAIL_TOL = 1e-8


@dataclass(frozen=True)
class JumpModel:
    """Compound Poisson jumps: rate and either a fixed size or an exponential magnitude.

    ``size`` is the (negative) jump of L for point-mass jumps; ``mean`` is the
    mean magnitude for jumps -E with E exponential.
    """

    rate: float
    size: float | None = None
    mean: float | None = None

    def __post_init__(self):
        if not self.rate > 0:
            raise InvalidProblemError("jump rate must be positive")
        if (self.size is None) == (self.mean is None):
            raise InvalidProblemError("give exactly one of a point jump size or an exponential mean")
        if self.size is not None and not self.size < 0:
            raise InvalidProblemError("jumps must be negative (non-increasing costs)")
        if self.mean is not None and not self.mean > 0:
            raise InvalidProblemError("exponential jump magnitude needs a positive mean")

    def levy_integral(self) -> float:
        """Integral of (e^z - 1) against the Levy measure."""
        if self.size is not None:
            return self.rate * math.expm1(self.size)
        return -self.rate * self.mean / (1.0 + self.mean)

    def sample(self, u):
        u = np.asarray(u, dtype=float)
        if self.size is not None:
            return np.full(u.shape, self.size)
        return self.mean * np.log(u)

    def spec(self) -> dict[str, Any]:
        if self.size is not None:
            return {"rate": self.rate, "size": self.size}
        return {"rate": self.rate, "mean": self.mean}


def jump_from_spec(spec) -> JumpModel | None:
    if spec is None or isinstance(spec, JumpModel):
        return spec
    if spec in ("none", {}):
        return None
    if not isinstance(spec, dict):
        raise InvalidProblemError(f"cannot read jump model {spec!r}")
    return JumpModel(float(spec["rate"]), spec.get("size"), spec.get("mean"))


def investment_coeff(y: float, r: float, a: float, jump=None) -> float:
    """c = y (r - a - int (e^z - 1) Pi(dz))."""
    if not r > 0:
        raise ValueError("discount r must be positive")
    if a > 0:
        raise InvalidProblemError("drift a must be non-positive")
    jump = jump_from_spec(jump)
    levy = 0.0 if jump is None else jump.levy_integral()
    return y * (r - a - levy)


@dataclass(frozen=True)
class InvestmentParams:
    r: float
    y: tuple[float, ...]
    a: tuple[float, ...]
    jumps: tuple[JumpModel | None, ...] = ()

    def __post_init__(self):
        m = max(np.size(self.y), np.size(self.a), len(self.jumps))
        y = tuple(float(v) for v in np.broadcast_to(np.asarray(self.y, dtype=float), (m,)))
        a = tuple(float(v) for v in np.broadcast_to(np.asarray(self.a, dtype=float), (m,)))
        jumps = tuple(jump_from_spec(j) for j in self.jumps) or (None,) * m
        if len(jumps) != m:
            raise ValueError("need one jump model (or none) per coordinate")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "jumps", jumps)
        if not self.r > 0:
            raise ValueError("discount r must be positive")
        if any(v <= 0 for v in y):
            raise ValueError("weights y must be positive")
        if any(v > 0 for v in a):
            raise InvalidProblemError("drifts a must be non-positive")

    @property
    def m(self) -> int:
        return len(self.y)

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([investment_coeff(y, self.r, a, j) for y, a, j in zip(self.y, self.a, self.jumps)])


class InvestmentProblem(ContinuousProblem):
    family = "investment"

    def __init__(self, params: InvestmentParams):
        self.params = params
        self.dim = params.m
        self.n_streams = 2 * params.m  # arrival times, magnitudes
        self.r = params.r
        self.y = np.asarray(params.y)
        self.a = np.asarray(params.a)
        self.jumps = params.jumps
        self.coeff = params.coefficients
        self._set = HalfSpace(tuple(self.coeff), self.r, "<=", upper=(1.0,) * self.dim)
        self._w = np.asarray(self._set.weights)

    def _arrival(self, tape, local, i, t):
        j = self.jumps[i]
        if j is None:
            return np.full(len(local), np.inf)
        return t - np.log(tape.take(i, local)) / j.rate

    def start(self, tape, local):
        n = len(local)
        t = np.zeros(n)
        nxt = np.stack([self._arrival(tape, local, i, t) for i in range(self.dim)], axis=-1)
        return {"t": t, "L": np.zeros((n, self.dim)), "nxt": nxt}

    def resume(self, state, tape, local):
        t = np.asarray(state["t"], dtype=float)
        nxt = np.stack([self._arrival(tape, local, i, t) for i in range(self.dim)], axis=-1)
        return {"t": t, "L": np.asarray(state["L"], dtype=float), "nxt": nxt}

    def next_event_time(self, state):
        return np.min(state["nxt"], axis=-1)

    def flow(self, state, t):
        t = np.asarray(t, dtype=float)
        out = dict(state)
        out["t"] = t
        out["L"] = state["L"] + self.a * (t - state["t"])[:, None]
        return out

    def jump(self, state, tape, local):
        t = state["t"]
        who = np.argmin(state["nxt"], axis=-1)
        out = {k: v.copy() for k, v in state.items()}
        for i in range(self.dim):
            sel = who == i
            if sel.any():
                out["L"][sel, i] += self.jumps[i].sample(tape.take(self.dim + i, local[sel]))
                out["nxt"][sel, i] = self._arrival(tape, local[sel], i, t[sel])
        return out

    def features(self, state):
        return np.exp(state["L"])

    def reward(self, state):
        return np.exp(-self.r * state["t"]) * (1.0 - np.sum(self.y * np.exp(state["L"]), axis=-1))

    def y_rate(self, state):
        return np.exp(-self.r * state["t"]) * self._set.margin(self.features(state))

    def myopic_signal(self, state):
        # the common factor e^{-rt} > 0 does not change the sign
        return self._set.margin(self.features(state))

    def myopic_set(self):
        return self._set

    def deterministic_stop_time(self) -> float:
        """Myopic stop time for m = 1 without jumps: ln(r / c) / a."""
        if self.dim != 1 or self.jumps[0] is not None:
            raise ValueError("only defined for one coordinate without jumps")
        c, a = float(self.coeff[0]), float(self.a[0])
        if c <= self.r:
            return 0.0
        if a == 0:
            return math.inf
        return math.log(self.r / c) / a

    def tail_bound(self, t_max: float) -> float:
        return math.exp(-self.r * t_max) * max(1.0, float(np.sum(self.y)) - 1.0)

    def default_tmax(self) -> float:
        return math.log(max(1.0, float(np.sum(self.y)) - 1.0) / TAIL_TOL) / self.r * (1.0 + 1e-9)


def make_investment_problem(params: InvestmentParams) -> InvestmentProblem:
    return InvestmentProblem(params)
