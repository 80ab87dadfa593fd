from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

MYOPIC = "myopic"
FIRST_ENTRY = "first-entry"
CONSTANT = "constant-time"
TRUNCATED = "truncated"


@dataclass(frozen=True)
class StoppingRule:
    """A decision map (state, time) -> stop/continue.

    Every rule is evaluated through a signed ``signal``; the rule stops as
    soon as the signal is <= 0, so ties stop.  For continuous problems the
    signal must be continuous along the inter-event flow, which lets the
    simulator bisect for the crossing time.
    """

    kind: str
    stopping_set: Any = None
    time: float | None = None
    inner: "StoppingRule | None" = None
    label: str | None = None

    @classmethod
    def myopic(cls) -> "StoppingRule":
        return cls(MYOPIC)

    @classmethod
    def first_entry(cls, stopping_set, label: str | None = None) -> "StoppingRule":
        return cls(FIRST_ENTRY, stopping_set=stopping_set, label=label)

    @classmethod
    def constant_time(cls, t: float) -> "StoppingRule":
        return cls(CONSTANT, time=float(t))

    @classmethod
    def truncated(cls, inner: "StoppingRule", horizon: float) -> "StoppingRule":
        return cls(TRUNCATED, time=float(horizon), inner=inner)

    @property
    def rule_id(self) -> str:
        if self.label:
            return self.label
        if self.kind == MYOPIC:
            return "myopic"
        if self.kind == CONSTANT:
            return f"constant:{self.time:g}"
        if self.kind == TRUNCATED:
            return f"truncated:{self.time:g}:{self.inner.rule_id}"
        return f"entry:{self.stopping_set.variant}"

    @property
    def horizon(self) -> float:
        """Latest time by which the rule is guaranteed to stop (inf if none)."""
        if self.kind == TRUNCATED:
            return min(self.time, self.inner.horizon)
        if self.kind == CONSTANT:
            return self.time
        return np.inf

    def signal(self, problem, view, t) -> np.ndarray:
        if self.kind == MYOPIC:
            if problem.time_axis == "discrete":
                return np.asarray(problem.myopic_signal(view, t), dtype=float)
            return np.asarray(problem.myopic_signal(view), dtype=float)
        if self.kind == FIRST_ENTRY:
            margin = self.stopping_set.margin(problem.features(view))
            return np.where(problem.absorbed(view), -1.0, margin)
        n = len(next(iter(view.values())))
        t = np.broadcast_to(np.asarray(t, dtype=float), (n,))
        if self.kind == CONSTANT:
            return self.time - t
        if self.kind == TRUNCATED:
            return np.minimum(self.inner.signal(problem, view, t), self.time - t)
        raise ValueError(f"unknown rule kind {self.kind!r}")

    def stops(self, problem, view, t) -> np.ndarray:
        return self.signal(problem, view, t) <= 0.0


def parse_rule(spec: str, problem=None) -> StoppingRule:
    """Parse the CLI rule syntax.

    ``myopic`` | ``constant:T`` | ``truncated:L`` (truncated myopic) |
    ``truncated:L:<inner spec>`` | ``entry`` | ``entry:FACTOR`` (the problem's
    own closed-form set, optionally with a perturbed threshold).
    """
    head, _, rest = spec.strip().partition(":")
    if head == "myopic" and not rest:
        return StoppingRule.myopic()
    if head == "constant" and rest:
        return StoppingRule.constant_time(float(rest))
    if head == "truncated" and rest:
        horizon, _, inner = rest.partition(":")
        inner_rule = parse_rule(inner, problem) if inner else StoppingRule.myopic()
        return StoppingRule.truncated(inner_rule, float(horizon))
    if head == "entry":
        if problem is None or problem.myopic_set() is None:
            raise ValueError("entry rule needs a problem with a closed-form stopping set")
        factor = float(rest) if rest else 1.0
        s = problem.myopic_set() if factor == 1.0 else problem.myopic_set().scaled(factor)
        return StoppingRule.first_entry(s, label=f"entry:{factor:g}")
    raise ValueError(f"cannot parse rule spec {spec!r}")
