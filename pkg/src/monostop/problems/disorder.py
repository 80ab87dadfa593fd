"""Multidimensional Poisson disorder (quickest detection of m independent rate changes).

Coordinate i observes a Poisson process N^i whose intensity moves from mu0 to
mu1 at a hidden exponential(lam) time sigma^i.  The likelihood-ratio process
phi^i obeys, between arrivals,

    d phi / dt = kappa phi + lam,      kappa = lam + mu0 - mu1 >= 0,

and is multiplied by mu1 / mu0 at each arrival; the posterior is
pi = phi / (1 + phi).  The loss at stop time t is
sum_i [1{sigma^i >= t} + c_i (t - sigma^i)^+], to be minimized.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize

from ..core.problem import MINIMIZE, ContinuousProblem, InvalidProblemError
from ..sets import HalfSpace


def _vec(x, m: int) -> tuple[float, ...]:
    arr = np.broadcast_to(np.asarray(x, dtype=float), (m,))
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class DisorderParams:
    lam: tuple[float, ...]
    mu0: tuple[float, ...]
    mu1: tuple[float, ...]
    c: tuple[float, ...]

    def __post_init__(self):
        m = max(np.size(self.lam), np.size(self.mu0), np.size(self.mu1), np.size(self.c))
        for name in ("lam", "mu0", "mu1", "c"):
            object.__setattr__(self, name, _vec(getattr(self, name), m))
        if any(v <= 0 for v in self.lam + self.mu0 + self.mu1 + self.c):
            raise ValueError("rates lam, mu0, mu1 and costs c must be positive")
        for i in range(m):
            gap = self.mu1[i] - self.mu0[i]
            if not (self.lam[i] >= gap >= 0.0):
                raise InvalidProblemError(
                    f"coordinate {i}: parameters must satisfy lam >= mu1 - mu0 >= 0 "
                    f"(got lam={self.lam[i]}, mu1 - mu0={gap}); outside this region the "
                    "myopic rule is not optimal and the problem is not supported")

    @property
    def m(self) -> int:
        return len(self.lam)

    @property
    def kappa(self) -> np.ndarray:
        return np.asarray(self.lam) + np.asarray(self.mu0) - np.asarray(self.mu1)

    @property
    def jump_factor(self) -> np.ndarray:
        return np.asarray(self.mu1) / np.asarray(self.mu0)


def _flow_phi(phi, lam, kappa, dt):
    """phi after dt time units without arrivals."""
    dt = np.asarray(dt, dtype=float)
    safe = np.where(kappa > 0, kappa, 1.0)
    grown = phi * np.exp(kappa * dt) + lam / safe * np.expm1(kappa * dt)
    return np.where(kappa > 0, grown, phi + lam * dt)


def disorder_phi(jump_times: Sequence[float], params: DisorderParams | tuple, t: float) -> float:
    """Likelihood ratio phi_t of one coordinate given its arrival times up to t.

    ``params`` is a one-dimensional DisorderParams or a tuple (lam, mu0, mu1).
    """
    if isinstance(params, DisorderParams):
        lam, mu0, mu1 = params.lam[0], params.mu0[0], params.mu1[0]
    else:
        lam, mu0, mu1 = (float(v) for v in params)
    times = np.asarray(jump_times, dtype=float)
    if np.any(np.diff(times) < 0):
        raise ValueError("jump times must be sorted")
    if times.size and (times[0] < 0 or times[-1] > t):
        raise ValueError("jump times must lie in [0, t]")
    kappa, r = lam + mu0 - mu1, mu1 / mu0
    phi, last = 0.0, 0.0
    for s in times:
        phi = float(_flow_phi(phi, lam, kappa, s - last)) * r
        last = s
    return float(_flow_phi(phi, lam, kappa, t - last))


def disorder_pi(phi):
    phi = np.asarray(phi, dtype=float)
    return phi / (1.0 + phi)


def disorder_y(pi, lam, c):
    """Drift of the expected loss of coordinate i: -lam + (c + lam) pi."""
    pi = np.asarray(pi, dtype=float)
    if np.any((pi < 0) | (pi > 1)):
        raise ValueError("posterior pi must lie in [0, 1]")
    return -lam + (c + lam) * pi


class DisorderProblem(ContinuousProblem):
    family = "disorder"
    direction = MINIMIZE
    hidden_keys = frozenset({"sigma", "post"})

    def __init__(self, params: DisorderParams):
        self.params = params
        self.dim = params.m
        # streams: pre-change arrivals, post-change arrivals, change time
        self.n_streams = 3 * params.m
        self.lam = np.asarray(params.lam)
        self.mu0 = np.asarray(params.mu0)
        self.mu1 = np.asarray(params.mu1)
        self.c = np.asarray(params.c)
        self.kappa = params.kappa
        self.r = params.jump_factor
        self._set = HalfSpace(tuple(self.c + self.lam), float(np.sum(self.lam)), ">=")
        self._w = np.asarray(self._set.weights)

    def _stream(self, tape, kind: int, i: int, local):
        return tape.take(kind * self.dim + i, local)

    def _arrival(self, tape, local, i, t, sigma, post):
        """Next arrival of coordinate i after t (memoryless restart at sigma)."""
        nxt = np.empty(len(local))
        pre = ~post
        spill = np.zeros(len(local), bool)
        if pre.any():
            cand = t[pre] - np.log(self._stream(tape, 0, i, local[pre])) / self.mu0[i]
            nxt[pre] = cand
            spill[pre] = cand > sigma[pre]
        redo = post | spill
        if redo.any():
            ub = self._stream(tape, 1, i, local[redo])
            base = np.where(post[redo], t[redo], sigma[redo])
            nxt[redo] = base - np.log(ub) / self.mu1[i]
        return nxt

    def start(self, tape, local):
        n, m = len(local), self.dim
        sigma = np.stack([-np.log(self._stream(tape, 2, i, local)) / self.lam[i] for i in range(m)], axis=-1)
        t = np.zeros(n)
        post = np.zeros((n, m), bool)
        nxt = np.stack([self._arrival(tape, local, i, t, sigma[:, i], post[:, i]) for i in range(m)], axis=-1)
        return {"t": t, "phi": np.zeros((n, m)), "N": np.zeros((n, m), np.int64),
                "nxt": nxt, "sigma": sigma, "post": post}

    def resume(self, state, tape, local):
        t = np.asarray(state["t"], dtype=float)
        phi = np.asarray(state["phi"], dtype=float)
        pi = disorder_pi(phi)
        sig, post, nxt = (np.empty_like(phi) for _ in range(3))
        post = post.astype(bool)
        for i in range(self.dim):
            changed = self._stream(tape, 2, i, local) < pi[:, i]
            u = self._stream(tape, 2, i, local)
            # given no change by t the change time is t + exponential(lam) (memoryless prior)
            sig[:, i] = np.where(changed, t * u, t - np.log(u) / self.lam[i])
            post[:, i] = changed
            nxt[:, i] = self._arrival(tape, local, i, t, sig[:, i], post[:, i])
        return {"t": t, "phi": phi, "N": np.asarray(state.get("N", np.zeros(phi.shape, np.int64))),
                "nxt": nxt, "sigma": sig, "post": post}

    def next_event_time(self, state):
        return np.min(state["nxt"], axis=-1)

    def flow(self, state, t):
        t = np.asarray(t, dtype=float)
        dt = (t - state["t"])[:, None]
        out = dict(state)
        out["t"] = t
        out["phi"] = _flow_phi(state["phi"], self.lam, self.kappa, dt)
        return out

    def jump(self, state, tape, local):
        # state has already been flowed to the event time
        t = state["t"]
        who = np.argmin(state["nxt"], axis=-1)
        out = {k: v.copy() for k, v in state.items()}
        rows = np.arange(len(t))
        out["phi"][rows, who] *= self.r[who]
        out["N"][rows, who] += 1
        out["post"] = out["post"] | (t[:, None] >= out["sigma"])
        for i in range(self.dim):
            sel = who == i
            if sel.any():
                out["nxt"][sel, i] = self._arrival(tape, local[sel], i, t[sel], out["sigma"][sel, i],
                                                   out["post"][sel, i])
        return out

    def pi(self, state):
        return disorder_pi(state["phi"])

    def features(self, state):
        return self.pi(state)

    def reward(self, state):
        t = state["t"][:, None]
        sigma = state["sigma"]
        return np.sum((sigma >= t) + self.c * np.maximum(t - sigma, 0.0), axis=-1)

    def y_rate(self, state):
        # sum_i (-lam_i + (c_i + lam_i) pi_i), arranged like the half-space margin
        return np.sum(self._w * self.pi(state), axis=-1) - self._set.b

    def myopic_signal(self, state):
        return self._set.margin(self.pi(state))

    def myopic_set(self):
        return self._set

    def deterministic_stop_bound(self) -> float:
        """Time by which the myopic rule has stopped on every path.

        Arrivals multiply phi by mu1/mu0 >= 1, so phi is never below its
        arrival-free trajectory; the rule stops no later than that trajectory
        enters the half-space.
        """
        def gap(t):
            phi = _flow_phi(np.zeros(self.dim), self.lam, self.kappa, t)
            return float(np.sum(self._w * disorder_pi(phi)) - self._set.b)

        if gap(0.0) >= 0:
            return 0.0
        hi = 1.0
        while gap(hi) < 0:
            hi *= 2.0
        return optimize.brentq(gap, 0.0, hi, xtol=1e-14)

    def uninformative_stop_time(self) -> float:
        """Myopic stop time when mu0 == mu1 in every coordinate (pi = 1 - e^{-lam t})."""
        if not np.all(self.mu0 == self.mu1):
            raise ValueError("only defined for uninformative observations")
        return self.deterministic_stop_bound()

    def default_tmax(self) -> float:
        return max(100.0 / float(np.min(self.lam)), 2.0 * self.deterministic_stop_bound())

    def tail_bound(self, t_max: float) -> float:
        # the myopic rule is never forced to stop once t_max exceeds the deterministic bound
        return 0.0 if t_max >= self.deterministic_stop_bound() else math.inf


def make_disorder_problem(params: DisorderParams) -> DisorderProblem:
    return DisorderProblem(params)
