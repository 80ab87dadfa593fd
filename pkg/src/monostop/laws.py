"""One-dimensional offer / gain distributions with closed-form expectations.

Each law exposes the functionals the examples need:

* ``f(z) = E (Z - z)^+``           (house-selling sum)
* ``g(z) = E max(1, Z / z)``       (house-selling product), via g = 1 + f(z)/z
* ``h(y, a) = E (1 + Z / y)^a``    (burglar product)

``sample(u)`` maps uniforms in (0, 1) to draws by inverse transform, so a
problem's step is a deterministic function of its uniforms.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import integrate, special

QUAD_EPSABS = 1e-10
_EXP_CLOSED_FORM_MAX = 600.0


def _arr(z) -> np.ndarray:
    return np.asarray(z, dtype=float)


@dataclass(frozen=True)
class Uniform:
    low: float = 0.0
    high: float = 1.0
    kind = "uniform"

    def __post_init__(self):
        if not self.high > self.low:
            raise ValueError("uniform law needs high > low")

    @property
    def mean(self) -> float:
        return 0.5 * (self.low + self.high)

    @property
    def support(self) -> tuple[float, float]:
        return (self.low, self.high)

    @property
    def is_standard(self) -> bool:
        return self.low == 0.0 and self.high == 1.0

    def sample(self, u):
        if self.is_standard:
            return _arr(u)
        return self.low + (self.high - self.low) * _arr(u)

    def f(self, z):
        z = _arr(z)
        inside = (self.high - np.clip(z, self.low, self.high)) ** 2 / (2.0 * (self.high - self.low))
        return np.where(z < self.low, self.mean - z, inside)

    def g(self, z):
        z = _arr(z)
        if self.is_standard:
            zc = np.minimum(z, 1.0)
            return np.where(z >= 1.0, 1.0, (1.0 + zc ** 2) / (2.0 * zc))
        return 1.0 + self.f(z) / z

    def h(self, y, alpha: float):
        y = _arr(y)
        width = self.high - self.low
        a1 = alpha + 1.0
        return y * ((1.0 + self.high / y) ** a1 - (1.0 + self.low / y) ** a1) / (a1 * width)

    def moment(self, alpha: float) -> float:
        a1 = alpha + 1.0
        return (self.high ** a1 - self.low ** a1) / (a1 * (self.high - self.low))

    def spec(self) -> dict[str, Any]:
        if self.is_standard:
            return {"type": "uniform"}
        return {"type": "uniform", "low": self.low, "high": self.high}


@dataclass(frozen=True)
class Exponential:
    mean: float = 1.0
    kind = "exponential"

    def __post_init__(self):
        if not self.mean > 0:
            raise ValueError("exponential law needs a positive mean")

    @property
    def support(self) -> tuple[float, float]:
        return (0.0, np.inf)

    def sample(self, u):
        return -self.mean * np.log(_arr(u))

    def f(self, z):
        z = _arr(z)
        return np.where(z >= 0.0, self.mean * np.exp(-np.maximum(z, 0.0) / self.mean), self.mean - z)

    def g(self, z):
        z = _arr(z)
        return 1.0 + self.f(z) / z

    def h(self, y, alpha: float):
        y = _arr(y)
        if alpha == 1.0:
            return 1.0 + self.mean / y
        # E(1 + Z/y)^a = x^-a e^x Gamma(a+1, x) with x = y / mean
        x = y / self.mean
        a1 = alpha + 1.0
        safe = np.minimum(x, _EXP_CLOSED_FORM_MAX)
        out = safe ** (-alpha) * np.exp(safe) * special.gamma(a1) * special.gammaincc(a1, safe)
        big = np.atleast_1d(x > _EXP_CLOSED_FORM_MAX)
        if big.any():
            out = np.array(out, dtype=float, ndmin=1)
            yb = np.atleast_1d(y)
            for i in np.flatnonzero(big):
                out[i] = self._h_quad(float(yb[i]), alpha)
            out = out.reshape(np.shape(y))
        return out

    def _h_quad(self, y: float, alpha: float) -> float:
        m = self.mean
        val, _ = integrate.quad(lambda z: (1.0 + z / y) ** alpha * np.exp(-z / m) / m,
                                0.0, np.inf, epsabs=QUAD_EPSABS, limit=200)
        return val

    def moment(self, alpha: float) -> float:
        return float(self.mean ** alpha * special.gamma(alpha + 1.0))

    def spec(self) -> dict[str, Any]:
        return {"type": "exponential", "mean": self.mean}


@dataclass(frozen=True)
class Discrete:
    values: tuple[float, ...]
    probs: tuple[float, ...]
    kind = "discrete"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if v.ndim != 1 or v.size == 0 or v.shape != p.shape:
            raise ValueError("discrete law needs equally long, non-empty values and probs")
        if np.any(np.diff(v) <= 0):
            raise ValueError("discrete values must be strictly increasing")
        if np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("discrete probabilities must be positive and sum to 1")
        object.__setattr__(self, "values", tuple(float(x) for x in v))
        object.__setattr__(self, "probs", tuple(float(x) for x in p))

    @property
    def _v(self) -> np.ndarray:
        return np.asarray(self.values)

    @property
    def _p(self) -> np.ndarray:
        return np.asarray(self.probs)

    @property
    def mean(self) -> float:
        return float(np.dot(self._v, self._p))

    @property
    def support(self) -> tuple[float, float]:
        return (self.values[0], self.values[-1])

    def _cdf_edges(self) -> np.ndarray:
        c = np.cumsum(self._p)
        c[-1] = 1.0
        return c

    def sample(self, u):
        idx = np.searchsorted(self._cdf_edges(), _arr(u), side="right")
        return self._v[np.minimum(idx, len(self.values) - 1)]

    def outcomes(self) -> tuple[np.ndarray, np.ndarray]:
        """Atom probabilities and a representative uniform for each atom."""
        hi = self._cdf_edges()
        lo = np.concatenate(([0.0], hi[:-1]))
        return self._p.copy(), 0.5 * (lo + hi)

    def f(self, z):
        z = _arr(z)
        gaps = np.maximum(self._v - z[..., None], 0.0)
        return np.sum(gaps * self._p, axis=-1)

    def f_inverse(self, level: float) -> float:
        """Smallest z with f(z) = level (f is piecewise linear and non-increasing)."""
        v, p = self._v, self._p
        if level <= 0.0:
            return float(v[-1])
        f_at = self.f(v)
        if level >= f_at[0]:
            return float(v[0] - (level - f_at[0]))
        for l in range(len(v) - 1):
            if f_at[l + 1] <= level <= f_at[l]:
                return float(v[l] + (f_at[l] - level) / p[l + 1:].sum())
        return float(v[-1])

    def f_left_slope(self, z):
        """Left derivative of f, -P(Z >= z)."""
        z = _arr(z)
        return -np.sum(np.where(self._v >= z[..., None], self._p, 0.0), axis=-1)

    def g(self, z):
        z = _arr(z)
        return 1.0 + self.f(z) / z

    def h(self, y, alpha: float):
        y = _arr(y)
        return np.sum((1.0 + self._v / y[..., None]) ** alpha * self._p, axis=-1)

    def moment(self, alpha: float) -> float:
        return float(np.sum(self._v ** alpha * self._p))

    def spec(self) -> dict[str, Any]:
        return {"type": "discrete", "values": list(self.values), "probs": list(self.probs)}


@dataclass(frozen=True)
class PointMass:
    value: float
    kind = "point"

    @property
    def mean(self) -> float:
        return self.value

    @property
    def support(self) -> tuple[float, float]:
        return (self.value, self.value)

    def sample(self, u):
        return np.full(np.shape(u), self.value, dtype=float)

    def outcomes(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array([1.0]), np.array([0.5])

    def f(self, z):
        return np.maximum(self.value - _arr(z), 0.0)

    def g(self, z):
        z = _arr(z)
        return np.maximum(1.0, self.value / z)

    def h(self, y, alpha: float):
        return (1.0 + self.value / _arr(y)) ** alpha

    def moment(self, alpha: float) -> float:
        return self.value ** alpha

    def spec(self) -> dict[str, Any]:
        return {"type": "point", "value": self.value}


Law = Uniform | Exponential | Discrete | PointMass


def law_from_spec(spec) -> Law:
    if isinstance(spec, (Uniform, Exponential, Discrete, PointMass)):
        return spec
    if not isinstance(spec, dict) or "type" not in spec:
        raise ValueError(f"distribution spec must be an object with a 'type': {spec!r}")
    kind = spec["type"]
    if kind == "uniform":
        return Uniform(float(spec.get("low", 0.0)), float(spec.get("high", 1.0)))
    if kind == "exponential":
        return Exponential(float(spec.get("mean", 1.0)))
    if kind == "discrete":
        return Discrete(tuple(spec["values"]), tuple(spec["probs"]))
    if kind in ("point", "point-mass", "point_mass"):
        return PointMass(float(spec["value"]))
    raise ValueError(f"unsupported distribution type {kind!r}")


def is_finite(law: Law) -> bool:
    return isinstance(law, (Discrete, PointMass))
