"""Problem abstractions shared by the simulator, the oracle and the diagnostics.

States are dicts of numpy arrays whose leading axis indexes paths, so one
problem object evaluates a whole batch of paths at once.  A single state is
simply a batch of length one.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

MAXIMIZE = "max"
MINIMIZE = "min"

State = dict[str, np.ndarray]


class InvalidProblemError(ValueError):
    """Raised when a problem instance violates a structural requirement."""


def take(state: State, idx) -> State:
    return {k: v[idx] for k, v in state.items()}


def repeat(state: State, n: int) -> State:
    """Broadcast a single-row state to ``n`` identical rows."""
    return {k: np.repeat(np.asarray(v)[:1], n, axis=0) for k, v in state.items()}


def as_state(state: dict[str, Any]) -> State:
    """Add the path axis to a single, unbatched state."""
    return {k: np.asarray(v)[None, ...] for k, v in state.items()}


class DiscreteProblem:
    """A stopping problem in discrete time n = 1, 2, ...

    Subclasses supply ``initial``, ``step``, ``reward`` and ``y_increment``.
    ``y_increment`` is E(X_{n+1} | A_n) - X_n for the *stored* reward, whatever
    the direction; rules always work on ``myopic_signal`` which is oriented so
    that a non-positive value means "stop".
    """

    time_axis = "discrete"
    direction = MAXIMIZE
    n_streams = 1
    dim = 1
    family = "discrete"
    hidden_keys: frozenset[str] = frozenset()
    terminal_value = "liminf"  # X_inf convention; simulations truncate instead

    def initial(self, u: np.ndarray) -> State:
        raise NotImplementedError

    def step(self, state: State, n: int, u: np.ndarray) -> State:
        raise NotImplementedError

    def reward(self, state: State, n: int) -> np.ndarray:
        raise NotImplementedError

    def y_increment(self, state: State, n: int) -> np.ndarray:
        raise NotImplementedError

    def ratio(self, state: State, n: int) -> np.ndarray | None:
        """E(X_{n+1}/X_n | A_n) for multiplicative problems, else None."""
        return None

    def myopic_signal(self, state: State, n: int) -> np.ndarray:
        y = self.y_increment(state, n)
        return y if self.direction == MAXIMIZE else -y

    def features(self, state: State) -> np.ndarray:
        """Coordinates in which the closed-form stopping set is expressed."""
        raise NotImplementedError

    def absorbed(self, state: State) -> np.ndarray:
        first = next(iter(state.values()))
        return np.zeros(len(first), dtype=bool)

    def myopic_set(self):
        return None

    def finite_outcomes(self):
        """(probs, u_rows) spanning the one-step randomness when it is finite."""
        raise InvalidProblemError(f"{self.family}: randomness is not finitely supported")

    def observable(self, state: State) -> State:
        return {k: v for k, v in state.items() if k not in self.hidden_keys}


class ContinuousProblem:
    """An event-driven stopping problem in continuous time.

    Between events the state moves along a closed-form flow; ``jump`` applies
    the event at ``next_event_time``.  ``y_rate`` is the density of the
    compensator against ds (the only integrator supported).
    """

    time_axis = "continuous"
    direction = MAXIMIZE
    n_streams = 1
    dim = 1
    family = "continuous"
    hidden_keys: frozenset[str] = frozenset()

    def start(self, tape, local: np.ndarray) -> State:
        raise NotImplementedError

    def resume(self, state: State, tape, local: np.ndarray) -> State:
        """Complete observable states (rows) into full simulation states at their time t.

        Hidden quantities are drawn from their conditional law given the
        observations; pending event clocks are drawn afresh.
        """
        raise NotImplementedError

    def next_event_time(self, state: State) -> np.ndarray:
        raise NotImplementedError

    def flow(self, state: State, t: np.ndarray) -> State:
        raise NotImplementedError

    def jump(self, state: State, tape, local: np.ndarray) -> State:
        raise NotImplementedError

    def reward(self, state: State) -> np.ndarray:
        raise NotImplementedError

    def y_rate(self, state: State) -> np.ndarray:
        raise NotImplementedError

    def myopic_signal(self, state: State) -> np.ndarray:
        y = self.y_rate(state)
        return y if self.direction == MAXIMIZE else -y

    def features(self, state: State) -> np.ndarray:
        raise NotImplementedError

    def absorbed(self, state: State) -> np.ndarray:
        return np.zeros(len(state["t"]), dtype=bool)

    def myopic_set(self):
        return None

    def tail_bound(self, t_max: float) -> float:
        raise NotImplementedError

    def default_tmax(self) -> float:
        raise NotImplementedError

    def observable(self, state: State) -> State:
        return {k: v for k, v in state.items() if k not in self.hidden_keys}


@dataclass
class EventPath:
    """One simulated trajectory sampled at its event times."""

    times: np.ndarray
    states: list[dict[str, Any]]
    rewards: np.ndarray
    y_values: np.ndarray
    truncated: bool = False
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.rewards = np.asarray(self.rewards, dtype=float)
        self.y_values = np.asarray(self.y_values, dtype=float)
        n = len(self.times)
        if not (len(self.states) == len(self.rewards) == len(self.y_values) == n):
            raise ValueError("EventPath arrays must have equal length")
        if n > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("EventPath times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)
