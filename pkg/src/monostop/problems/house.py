"""Multidimensional house-selling: sum with observation cost, discounted product."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..core.problem import DiscreteProblem, InvalidProblemError
from ..laws import Exponential, Law, Uniform, is_finite, law_from_spec
from ..sets import BallComplement, ExpSum, FSum, Polyhedron, ProductUniform, uniform_product_ratio


def house_f(distribution, z):
    """E (Z - z)^+ for one offer law."""
    return law_from_spec(distribution).f(z)


def house_g(distribution, z):
    """E max(1, Z / z), z > 0."""
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ValueError("house_g needs z > 0")
    return law_from_spec(distribution).g(z)


@dataclass(frozen=True)
class HouseParams:
    laws: tuple[Law, ...]
    c: float | None = None
    rho: float | None = None
    cost_per_coordinate: bool = False

    def __post_init__(self):
        laws = tuple(law_from_spec(x) for x in self.laws)
        object.__setattr__(self, "laws", laws)
        if not laws:
            raise ValueError("house problem needs at least one coordinate")
        if self.c is not None and not self.c > 0:
            raise ValueError("cost c must be positive")
        if self.rho is not None and not 0.0 < self.rho < 1.0:
            raise ValueError("discount rho must lie in (0, 1)")

    @property
    def m(self) -> int:
        return len(self.laws)

    @classmethod
    def identical(cls, m: int, distribution, **kw) -> "HouseParams":
        return cls(tuple([law_from_spec(distribution)] * m), **kw)


class HouseSum(DiscreteProblem):
    """X_n = sum_i max(Z^i_1..Z^i_n) - c n, one-step advantage sum_i f_i(S^i) - c."""

    family = "house-sum"

    def __init__(self, params: HouseParams):
        if params.c is None:
            raise ValueError("house-sum needs a cost c")
        self.params = params
        self.laws = params.laws
        self.dim = params.m
        self.n_streams = params.m
        self.cost = params.c * params.m if params.cost_per_coordinate else params.c

    def initial(self, u):
        return {"S": self._draw(u)}

    def _draw(self, u):
        return np.stack([law.sample(u[:, i]) for i, law in enumerate(self.laws)], axis=-1)

    def step(self, state, n, u):
        return {"S": np.maximum(state["S"], self._draw(u))}

    def reward(self, state, n):
        return np.sum(state["S"], axis=-1) - self.cost * n

    def f_values(self, S):
        return np.stack([law.f(S[:, i]) for i, law in enumerate(self.laws)], axis=-1)

    def y_increment(self, state, n):
        return np.sum(self.f_values(state["S"]), axis=-1) - self.cost

    def features(self, state):
        return state["S"]

    def myopic_set(self):
        laws, m = self.laws, self.dim
        if all(isinstance(l, Uniform) and l.is_standard for l in laws):
            return BallComplement(self.cost, m)
        if all(isinstance(l, Exponential) and l.mean == 1.0 for l in laws):
            return ExpSum(self.cost, m)
        if all(is_finite(l) for l in laws):
            return Polyhedron(laws, self.cost)
        return FSum(laws, self.cost)

    def finite_outcomes(self):
        return _product_outcomes(self.laws, self.family)


class HouseProduct(DiscreteProblem):
    """X_n = prod_i rho^n max(Z^i_1..Z^i_n); one-step ratio rho^m prod_i g_i(S^i)."""

    family = "house-product"

    def __init__(self, params: HouseParams):
        if params.rho is None:
            raise ValueError("house-product needs a discount rho")
        for law in params.laws:
            if law.support[0] < 0 or (law.support[0] == 0 and not isinstance(law, (Uniform, Exponential))):
                raise ValueError("house-product needs offers that are positive almost surely")
        self.params = params
        self.laws = params.laws
        self.rho = params.rho
        self.dim = params.m
        self.n_streams = params.m
        self._uniform = all(isinstance(l, Uniform) and l.is_standard for l in self.laws)

    def initial(self, u):
        return {"S": np.stack([law.sample(u[:, i]) for i, law in enumerate(self.laws)], axis=-1)}

    def step(self, state, n, u):
        z = np.stack([law.sample(u[:, i]) for i, law in enumerate(self.laws)], axis=-1)
        return {"S": np.maximum(state["S"], z)}

    def reward(self, state, n):
        return (self.rho ** n) ** self.dim * np.prod(state["S"], axis=-1)

    def ratio(self, state, n):
        S = state["S"]
        if self._uniform:
            return uniform_product_ratio(S, self.rho)
        g = np.stack([law.g(S[:, i]) for i, law in enumerate(self.laws)], axis=-1)
        return self.rho ** self.dim * np.prod(g, axis=-1)

    def y_increment(self, state, n):
        return self.reward(state, n) * (self.ratio(state, n) - 1.0)

    def myopic_signal(self, state, n):
        # sign of X (ratio - 1) with X > 0, without underflow for large n
        return self.ratio(state, n) - 1.0

    def features(self, state):
        return state["S"]

    def myopic_set(self):
        return ProductUniform(self.rho, self.dim) if self._uniform else None

    def finite_outcomes(self):
        return _product_outcomes(self.laws, self.family)


def _product_outcomes(laws, family):
    if not all(is_finite(l) for l in laws):
        raise InvalidProblemError(f"{family}: offers are not finitely supported")
    per = [l.outcomes() for l in laws]
    probs, rows = [], []
    for combo in itertools.product(*[range(len(p)) for p, _ in per]):
        probs.append(np.prod([per[i][0][k] for i, k in enumerate(combo)]))
        rows.append([per[i][1][k] for i, k in enumerate(combo)])
    return np.asarray(probs), np.asarray(rows)


def make_house_problem(params: HouseParams, variant: str = "sum") -> DiscreteProblem:
    if variant == "sum":
        return HouseSum(params)
    if variant == "product":
        return HouseProduct(params)
    raise ValueError(f"unknown house variant {variant!r}")
