"""Small problems defined only for tests."""
from __future__ import annotations

import numpy as np

from monostop.core.problem import DiscreteProblem


class ConstantProblem(DiscreteProblem):
    """X_n = 1 forever with a fixed claimed advantage y (never stops for y > 0, stops at once for y <= 0)."""

    family = "constant"

    def __init__(self, y: float = 0.1):
        self.y = y

    def initial(self, u):
        return {"x": np.ones(len(u))}

    def step(self, state, n, u):
        return {"x": state["x"].copy()}

    def reward(self, state, n):
        return state["x"].copy()

    def y_increment(self, state, n):
        return np.full(len(state["x"]), self.y)

    def features(self, state):
        return state["x"][:, None]


class OscillatingProblem(DiscreteProblem):
    """Deterministic X_n with Y = -1, +1, -1, ...: not monotone, witness at step 2."""

    family = "oscillating"

    def initial(self, u):
        return {"x": np.zeros(len(u))}

    def step(self, state, n, u):
        return {"x": state["x"] + np.where(n % 2 == 1, -1.0, 1.0)}

    def reward(self, state, n):
        return state["x"].copy()

    def y_increment(self, state, n):
        return np.full(len(state["x"]), -1.0 if n % 2 == 1 else 1.0)

    def features(self, state):
        return state["x"][:, None]
