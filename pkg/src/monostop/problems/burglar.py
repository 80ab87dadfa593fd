"""Multidimensional burglar's problem: gang sum (not monotone in general) and geometric product."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from ..core.problem import DiscreteProblem, InvalidProblemError
from ..laws import Law, is_finite, law_from_spec
from ..sets import ProductH


def burglar_y(S, alive, p: float, a: float):
    """One-step advantage of a single gang: S(p - 1) + a p while free, 0 once caught."""
    S = np.asarray(S, dtype=float)
    if np.any(S < 0):
        raise ValueError("accumulated gain S must be nonnegative")
    return np.where(np.asarray(alive, dtype=bool), S * (p - 1.0) + a * p, 0.0)


def burglar_h(distribution, alpha: float, y):
    """E (1 + Z / y)^alpha for y > 0."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValueError("burglar_h needs y > 0")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return law_from_spec(distribution).h(y, alpha)


@dataclass(frozen=True)
class BurglarParams:
    p: tuple[float, ...]
    laws: tuple[Law, ...]
    shared_delta: bool = False
    alphas: tuple[float, ...] | None = None

    def __post_init__(self):
        laws = tuple(law_from_spec(x) for x in self.laws)
        p = tuple(float(x) for x in np.broadcast_to(self.p, (len(laws),)))
        object.__setattr__(self, "laws", laws)
        object.__setattr__(self, "p", p)
        if not laws:
            raise ValueError("burglar problem needs at least one gang")
        if any(not 0.0 < x < 1.0 for x in p):
            raise ValueError("survival probabilities p must lie in (0, 1)")
        if self.shared_delta and len(set(p)) != 1:
            raise ValueError("a shared catch indicator needs a common p")
        if any(law.support[0] < 0 for law in laws):
            raise ValueError("gains must be nonnegative")
        if self.alphas is not None:
            alphas = tuple(float(x) for x in np.broadcast_to(self.alphas, (len(laws),)))
            if any(not x > 0 for x in alphas):
                raise ValueError("exponents alpha must be positive")
            object.__setattr__(self, "alphas", alphas)

    @property
    def m(self) -> int:
        return len(self.laws)

    @property
    def a(self) -> tuple[float, ...]:
        return tuple(law.mean for law in self.laws)

    @property
    def lam(self) -> float:
        """Probability that no gang is caught in one step."""
        return self.p[0] if self.shared_delta else float(np.prod(self.p))


class _Burglar(DiscreteProblem):
    def __init__(self, params: BurglarParams):
        self.params = params
        self.laws = params.laws
        self.dim = params.m
        self.p = np.asarray(params.p)
        self.a = np.asarray(params.a)
        self.n_catch = 1 if params.shared_delta else params.m
        self.n_streams = params.m + self.n_catch

    def _survive(self, u):
        free = u[:, self.dim:] < self.p[: self.n_catch]
        return np.broadcast_to(free, (len(u), self.dim))

    def _gains(self, u):
        return np.stack([law.sample(u[:, i]) for i, law in enumerate(self.laws)], axis=-1)

    def initial(self, u):
        alive = self._survive(u).copy()
        # a caught gang forfeits its haul, so S is kept at 0 once caught
        return {"S": np.where(alive, self._gains(u), 0.0), "alive": alive}

    def step(self, state, n, u):
        alive = state["alive"] & self._survive(u)
        return {"S": np.where(alive, state["S"] + self._gains(u), 0.0), "alive": alive}

    def features(self, state):
        return state["S"]

    def finite_outcomes(self):
        if not all(is_finite(l) for l in self.laws):
            raise InvalidProblemError(f"{self.family}: gains are not finitely supported")
        per = [l.outcomes() for l in self.laws]
        for k in range(self.n_catch):
            pk = self.p[k]
            per.append((np.array([pk, 1.0 - pk]), np.array([0.5 * pk, 0.5 * (1.0 + pk)])))
        probs, rows = [], []
        for combo in itertools.product(*[range(len(q)) for q, _ in per]):
            probs.append(np.prod([per[i][0][k] for i, k in enumerate(combo)]))
            rows.append([per[i][1][k] for i, k in enumerate(combo)])
        return np.asarray(probs), np.asarray(rows)


class BurglarSum(_Burglar):
    """X_n = sum_i S^i_n * (gang i still free); Y_n = sum_i burglar_y(S^i_n, free^i_n)."""

    family = "burglar-sum"

    def reward(self, state, n):
        return np.sum(state["S"], axis=-1)

    def y_increment(self, state, n):
        return np.sum(burglar_y(state["S"], state["alive"], self.p, self.a), axis=-1)

    def absorbed(self, state):
        return ~np.any(state["alive"], axis=-1)


class BurglarProduct(_Burglar):
    """X_n = prod_i (S^i_n)^alpha_i while every gang is free, 0 once any gang is caught."""

    family = "burglar-product"

    def __init__(self, params: BurglarParams):
        if params.alphas is None:
            params = BurglarParams(params.p, params.laws, params.shared_delta, (1.0,) * params.m)
        super().__init__(params)
        self.alphas = np.asarray(params.alphas)
        self.lam = params.lam
        self._set = ProductH(self.laws, params.alphas, self.lam)

    def reward(self, state, n):
        free = np.all(state["alive"], axis=-1)
        return np.where(free, np.prod(state["S"] ** self.alphas, axis=-1), 0.0)

    def _shifted_moments(self, S):
        # E (S + Z)^alpha per coordinate: S^alpha h(S) for S > 0, E Z^alpha at S = 0
        cols = []
        for i, (law, a) in enumerate(zip(self.laws, self.alphas)):
            s = S[:, i]
            pos = s > 0
            safe = np.where(pos, s, 1.0)
            cols.append(np.where(pos, safe ** a * law.h(safe, a), law.moment(a)))
        return np.stack(cols, axis=-1)

    def y_increment(self, state, n):
        free = np.all(state["alive"], axis=-1)
        nxt = self.lam * np.prod(self._shifted_moments(state["S"]), axis=-1)
        return np.where(free, nxt, 0.0) - self.reward(state, n)

    def ratio(self, state, n):
        free = np.all(state["alive"], axis=-1)
        S = state["S"]
        pos = np.all(S > 0, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = self.lam * np.prod(np.stack([law.h(np.where(pos, S[:, i], 1.0), a) for i, (law, a)
                                             in enumerate(zip(self.laws, self.alphas))], axis=-1), axis=-1)
        return np.where(free, np.where(pos, r, np.inf), 0.0)

    def myopic_signal(self, state, n):
        return np.where(self.absorbed(state), -1.0, self._set.margin(state["S"]))

    def absorbed(self, state):
        return ~np.all(state["alive"], axis=-1)

    def myopic_set(self):
        return self._set


def make_burglar_problem(params: BurglarParams, variant: str = "sum") -> DiscreteProblem:
    if variant == "sum":
        return BurglarSum(params)
    if variant == "product":
        return BurglarProduct(params)
    raise ValueError(f"unknown burglar variant {variant!r}")


def make_burglar_product(params: BurglarParams) -> BurglarProduct:
    return BurglarProduct(params)


@dataclass
class Witness:
    """Outcome of the deterministic two-step search for a monotonicity violation."""

    found: bool
    index: int | None = None
    y_values: list[float] = field(default_factory=list)
    gains: list[list[float]] = field(default_factory=list)
    survival: list[list[int]] = field(default_factory=list)
    reason: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {"found": self.found, "index": self.index, "y_values": self.y_values,
                "gains": self.gains, "survival": self.survival, "reason": self.reason}


def burglar_sum_witness(p: float, z_values: Sequence[Sequence[float | None]], a: float = 1.0,
                        shared_delta: bool = False) -> Witness:
    """Search the catch patterns of step 2 for Y_1 <= 0 < Y_2 on the given gains.

    ``z_values[i]`` lists gang i's gains at steps 1 and 2 (a missing second gain is
    irrelevant, since it only matters if the gang is caught).  Every gang is free
    after step 1.  With a shared catch indicator the gangs are caught together.
    """
    z = [[float(v) if v is not None else 0.0 for v in (list(zi) + [None])[:2]] for zi in z_values]
    m = len(z)
    if m == 0:
        raise ValueError("need at least one gang")
    S1 = np.array([zi[0] for zi in z])
    y1 = float(np.sum(burglar_y(S1, np.ones(m, bool), p, a)))
    if y1 > 0:
        return Witness(False, y_values=[y1], reason="no witness: the first advantage is positive")
    patterns = [(1,) * m, (0,) * m] if shared_delta else list(itertools.product((1, 0), repeat=m))
    for pattern in patterns:
        alive = np.array(pattern, dtype=bool)
        S2 = np.where(alive, S1 + np.array([zi[1] for zi in z]), 0.0)
        y2 = float(np.sum(burglar_y(S2, alive, p, a)))
        if y2 > 0:
            return Witness(True, 2, [y1, y2], [list(zi) for zi in z], [[1] * m, list(pattern)])
    why = "shared catch indicator reduces the problem to one dimension" if shared_delta else \
        "no catch pattern makes the second advantage positive"
    return Witness(False, y_values=[y1], reason=f"no witness: {why}")
