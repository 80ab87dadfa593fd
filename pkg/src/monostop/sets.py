"""Closed-form stopping regions and their boundaries.

Every descriptor exposes a signed ``margin``: a point is in the stopping
region iff ``margin <= 0`` (boundary points stop).  The margin of each
descriptor is written with the same arithmetic as the matching problem's
one-step advantage, so first entry into the set and the myopic rule agree
bit for bit.

``equality_residual`` evaluates the defining equality in its textbook form
(e.g. ``sum (1 - z_i)^2 - 2c``), which is what figure exports are checked
against.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy import optimize

from .laws import Discrete, Exponential, Law, PointMass, Uniform, law_from_spec

ROOT_XTOL = 1e-12


def _points(points, dim: int) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    if p.ndim == 1:
        p = p[None, :]
    if p.shape[-1] != dim:
        raise ValueError(f"point dimension {p.shape[-1]} does not match set dimension {dim}")
    return p


class StoppingSetDescriptor:
    variant = "abstract"
    dim: int

    @property
    def box(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def margin(self, points) -> np.ndarray:
        raise NotImplementedError

    def membership(self, points) -> np.ndarray:
        """Boolean per point; a single point returns a 0-d array."""
        p = np.asarray(points, dtype=float)
        out = self.margin(_points(p, self.dim)) <= 0.0
        return out[0] if p.ndim == 1 else out

    def equality_residual(self, points) -> np.ndarray:
        return self.margin(_points(points, self.dim))

    def outward_normal(self, points) -> np.ndarray:
        raise NotImplementedError

    def scaled(self, factor: float) -> "StoppingSetDescriptor":
        """The same family of region with its threshold perturbed by ``factor``."""
        raise NotImplementedError

    def slice2(self, fixed: Sequence[float]) -> "StoppingSetDescriptor":
        """Two-dimensional slice with coordinates 3..m held at ``fixed``."""
        raise NotImplementedError

    def _curve(self, resolution: int) -> np.ndarray:
        raise NotImplementedError

    def boundary_sample(self, resolution: int = 200, fixed: Sequence[float] | None = None) -> np.ndarray:
        """Points on the boundary curve, ordered along it and clipped to the support box.

        Only defined for m = 2; for m > 2 pass ``fixed`` to sample the slice
        through the remaining coordinates.
        """
        if resolution < 8:
            raise ValueError("resolution must be at least 8")
        if self.dim != 2:
            if fixed is None or len(fixed) != self.dim - 2:
                raise ValueError("boundary curves need m = 2 (or a slice via `fixed`)")
            return self.slice2(fixed).boundary_sample(resolution)
        pts = self._curve(resolution)
        if len(pts) == 0:
            raise ValueError(f"{self.variant}: boundary does not meet the support box")
        return self._snap_inside(pts)

    def _snap_inside(self, pts: np.ndarray) -> np.ndarray:
        # rounding may leave a boundary point a few ulps outside
        pts = pts.copy()
        lo, hi = self.box
        for i in range(len(pts)):
            if self.margin(pts[i:i + 1])[0] <= 0.0:
                continue
            n = self.outward_normal(pts[i:i + 1])[0]
            step = 1e-15 * max(1.0, float(np.max(np.abs(pts[i]))))
            for _ in range(60):
                cand = np.clip(pts[i] - step * n, lo, hi)
                if self.margin(cand[None, :])[0] <= 0.0:
                    pts[i] = cand
                    break
                step *= 2.0
        return pts


def _unit(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / np.where(norm > 0, norm, 1.0)


@dataclass(frozen=True)
class BallComplement(StoppingSetDescriptor):
    """{z in [0,1]^m : sum (1 - z_i)^2 <= 2c}: ball of radius sqrt(2c) about (1,...,1)."""

    c: float
    dim: int = 2
    radius_factor: float = 1.0
    variant = "ball_complement"

    @property
    def two_c(self) -> float:
        return 2.0 * self.c * self.radius_factor ** 2

    @property
    def radius(self) -> float:
        return math.sqrt(self.two_c)

    @property
    def box(self):
        return np.zeros(self.dim), np.ones(self.dim)

    def margin(self, points):
        z = _points(points, self.dim)
        s = np.sum((1.0 - z) ** 2, axis=-1) - self.two_c
        in_box = np.all((z >= 0.0) & (z <= 1.0), axis=-1)
        return np.where(in_box, s, np.inf)

    def equality_residual(self, points):
        z = _points(points, self.dim)
        return np.sum((1.0 - z) ** 2, axis=-1) - self.two_c

    def outward_normal(self, points):
        z = _points(points, self.dim)
        return _unit(z - 1.0)

    def scaled(self, factor):
        return replace(self, radius_factor=self.radius_factor * factor)

    def slice2(self, fixed):
        rest = float(np.sum((1.0 - np.asarray(fixed, dtype=float)) ** 2))
        two_c = self.two_c - rest
        if two_c < 0:
            raise ValueError("slice misses the ball")
        return BallComplement(c=two_c / 2.0, dim=2)

    def _curve(self, resolution):
        r = self.radius
        if r == 0:
            return np.empty((0, 2))
        th_lo = math.acos(min(1.0, 1.0 / r))
        th_hi = math.asin(min(1.0, 1.0 / r))
        if th_lo > th_hi:
            return np.empty((0, 2))
        th = np.linspace(th_lo, th_hi, resolution)
        return np.column_stack((1.0 - r * np.cos(th), 1.0 - r * np.sin(th)))


@dataclass(frozen=True)
class ExpSum(StoppingSetDescriptor):
    """{z >= 0 : sum exp(-z_i) <= c} (mean-one exponential offers)."""

    c: float
    dim: int = 2
    view_max: float = 5.0
    variant = "exp_sum"

    @property
    def box(self):
        return np.zeros(self.dim), np.full(self.dim, self.view_max)

    def margin(self, points):
        z = _points(points, self.dim)
        return np.sum(np.exp(-z), axis=-1) - self.c

    def outward_normal(self, points):
        return _unit(-np.exp(-_points(points, self.dim)))

    def scaled(self, factor):
        return replace(self, c=self.c * factor)

    def slice2(self, fixed):
        return ExpSum(c=self.c - float(np.sum(np.exp(-np.asarray(fixed, dtype=float)))), dim=2,
                      view_max=self.view_max)

    def _curve(self, resolution):
        c, zmax = self.c, self.view_max
        # z2 = -ln(c - e^{-z1}); keep z2 in [0, zmax]
        if c - math.exp(-zmax) <= 0:
            return np.empty((0, 2))
        lo = max(0.0, -math.log(c - math.exp(-zmax)))
        hi = zmax if c <= 1.0 else min(zmax, -math.log(c - 1.0))
        if lo > hi:
            return np.empty((0, 2))
        z1 = np.linspace(lo, hi, resolution)
        z2 = -np.log(c - np.exp(-z1))
        return np.column_stack((z1, np.clip(z2, 0.0, zmax)))


@dataclass(frozen=True)
class Polyhedron(StoppingSetDescriptor):
    """{z : sum_i f_i(z_i) <= c} for finitely supported offer laws (piecewise-linear f_i)."""

    laws: tuple[Law, ...]
    c: float
    variant = "polyhedron"

    @property
    def dim(self) -> int:
        return len(self.laws)

    @property
    def box(self):
        lo = np.array([law.support[0] for law in self.laws])
        hi = np.array([law.support[1] for law in self.laws])
        return lo, hi

    def margin(self, points):
        z = _points(points, self.dim)
        fs = np.stack([law.f(z[:, i]) for i, law in enumerate(self.laws)], axis=-1)
        return np.sum(fs, axis=-1) - self.c

    def outward_normal(self, points):
        z = _points(points, self.dim)
        grad = np.stack([_as_discrete(law).f_left_slope(z[:, i]) for i, law in enumerate(self.laws)], axis=-1)
        return _unit(grad)

    def scaled(self, factor):
        return replace(self, c=self.c * factor)

    def slice2(self, fixed):
        rest = sum(float(law.f(x)) for law, x in zip(self.laws[2:], fixed))
        return Polyhedron(self.laws[:2], self.c - rest)

    def _curve(self, resolution):
        l1, l2 = (_as_discrete(law) for law in self.laws)
        lo, hi = self.box
        top2 = float(l2.f(lo[1]))
        x_lo = max(lo[0], l1.f_inverse(self.c))
        x_hi = min(hi[0], l1.f_inverse(max(self.c - top2, 0.0)))
        if x_lo > x_hi or self.c < 0:
            return np.empty((0, 2))
        xs = set(np.linspace(x_lo, x_hi, resolution).tolist())
        xs.update(v for v in l1.values if x_lo <= v <= x_hi)
        for v in l2.values:
            x = l1.f_inverse(self.c - float(l2.f(v)))
            if x_lo <= x <= x_hi:
                xs.add(x)
        x = np.array(sorted(xs))
        y = np.array([l2.f_inverse(self.c - float(l1.f(xi))) for xi in x])
        keep = (y >= lo[1]) & (y <= hi[1])
        return np.column_stack((x[keep], y[keep]))


def _as_discrete(law) -> Discrete:
    if isinstance(law, PointMass):
        return Discrete((law.value,), (1.0,))
    if not isinstance(law, Discrete):
        raise ValueError("polyhedral sets need finitely supported laws")
    return law


@dataclass(frozen=True)
class FSum(StoppingSetDescriptor):
    """{z : sum_i f_i(z_i) <= c} for a mixture of offer laws without a dedicated variant."""

    laws: tuple[Law, ...]
    c: float
    view_max: float = 5.0
    variant = "f_sum"

    @property
    def dim(self) -> int:
        return len(self.laws)

    @property
    def box(self):
        lo = np.array([law.support[0] for law in self.laws])
        hi = np.array([min(law.support[1], self.view_max) for law in self.laws])
        return lo, hi

    def margin(self, points):
        z = _points(points, self.dim)
        fs = np.stack([law.f(z[:, i]) for i, law in enumerate(self.laws)], axis=-1)
        return np.sum(fs, axis=-1) - self.c

    def outward_normal(self, points):
        z = _points(points, self.dim)
        eps = 1e-7
        grad = np.stack([(law.f(z[:, i] + eps) - law.f(z[:, i] - eps)) / (2 * eps)
                         for i, law in enumerate(self.laws)], axis=-1)
        return _unit(grad)

    def scaled(self, factor):
        return replace(self, c=self.c * factor)

    def slice2(self, fixed):
        rest = sum(float(law.f(x)) for law, x in zip(self.laws[2:], fixed))
        return FSum(self.laws[:2], self.c - rest, self.view_max)

    def _curve(self, resolution):
        return _ray_curve(self, resolution)


def uniform_product_ratio(z: np.ndarray, rho: float) -> np.ndarray:
    """rho^m prod g(z_i) with g(z) = (1 + z^2)/(2z): one-step ratio of the uniform product problem."""
    return rho ** z.shape[-1] * np.prod(Uniform().g(z), axis=-1)


@dataclass(frozen=True)
class ProductUniform(StoppingSetDescriptor):
    """{z in (0,1]^m : prod (1 + z_i^2)/z_i <= (rho/2)^(-m)}.

    The margin uses the equivalent form rho^m * prod g(z_i) - level with
    g(z) = (1 + z^2)/(2z), i.e. the one-step ratio of the discounted product
    problem minus one.
    """

    rho: float
    dim: int = 2
    level: float = 1.0
    variant = "product_uniform"

    @property
    def box(self):
        return np.zeros(self.dim), np.ones(self.dim)

    def margin(self, points):
        z = _points(points, self.dim)
        in_box = np.all((z > 0.0) & (z <= 1.0), axis=-1)
        safe = np.where(in_box[:, None], z, 1.0)
        return np.where(in_box, uniform_product_ratio(safe, self.rho) - self.level, np.inf)

    @property
    def threshold(self) -> float:
        return (self.rho / 2.0) ** (-self.dim) * self.level

    def equality_residual(self, points):
        z = _points(points, self.dim)
        return np.prod((1.0 + z ** 2) / z, axis=-1) - self.threshold

    def outward_normal(self, points):
        z = _points(points, self.dim)
        return _unit((z ** 2 - 1.0) / (z * (1.0 + z ** 2)))

    def scaled(self, factor):
        return replace(self, level=self.level * factor)

    def slice2(self, fixed):
        f = np.asarray(fixed, dtype=float)
        rest = float(np.prod(self.rho * (1.0 + f ** 2) / (2.0 * f)))
        return ProductUniform(self.rho, 2, self.level / rest)

    def _curve(self, resolution):
        k = self.threshold
        # (1+y^2)/y = q with q = k x / (1 + x^2); the root in (0, 1] is 2 / (q + sqrt(q^2 - 4))
        if k < 4.0:
            return np.empty((0, 2))
        x_lo = 4.0 / (k + math.sqrt(k * k - 16.0))
        x = np.linspace(x_lo, 1.0, resolution)
        q = k * x / (1.0 + x ** 2)
        y = 2.0 / (q + np.sqrt(np.maximum(q * q - 4.0, 0.0)))
        return np.column_stack((x, np.minimum(y, 1.0)))


@dataclass(frozen=True)
class ProductH(StoppingSetDescriptor):
    """{y : lam * prod h_i(y_i) <= level}, i.e. prod h_i(y_i) <= 1/lam at level 1."""

    laws: tuple[Law, ...]
    alphas: tuple[float, ...]
    lam: float
    level: float = 1.0
    view_max: float = 10.0
    variant = "product_h"

    @property
    def dim(self) -> int:
        return len(self.laws)

    @property
    def box(self):
        return np.zeros(self.dim), np.full(self.dim, self.view_max)

    def _h(self, y):
        return np.stack([law.h(y[:, i], a) for i, (law, a) in enumerate(zip(self.laws, self.alphas))], axis=-1)

    def margin(self, points):
        y = _points(points, self.dim)
        pos = np.all(y > 0.0, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = self.lam * np.prod(self._h(np.where(y > 0.0, y, 1.0)), axis=-1) - self.level
        return np.where(pos, val, np.inf)

    def equality_residual(self, points):
        y = _points(points, self.dim)
        return np.prod(self._h(y), axis=-1) - self.level / self.lam

    def outward_normal(self, points):
        y = _points(points, self.dim)
        eps = 1e-7 * np.maximum(1.0, y)
        grad = np.stack([(np.log(law.h(y[:, i] + eps[:, i], a)) - np.log(law.h(y[:, i] - eps[:, i], a)))
                         / (2 * eps[:, i]) for i, (law, a) in enumerate(zip(self.laws, self.alphas))], axis=-1)
        return _unit(grad)

    def scaled(self, factor):
        return replace(self, level=self.level * factor)

    def slice2(self, fixed):
        f = np.asarray(fixed, dtype=float)[None, :]
        rest = float(np.prod(np.stack([law.h(f[:, i], a) for i, (law, a)
                                       in enumerate(zip(self.laws[2:], self.alphas[2:]))], axis=-1)))
        return ProductH(self.laws[:2], self.alphas[:2], self.lam * rest, self.level, self.view_max)

    def _curve(self, resolution):
        return _ray_curve(self, resolution)


@dataclass(frozen=True)
class HalfSpace(StoppingSetDescriptor):
    """{z : w.z >= b} (sense '>=') or {z : w.z <= b} (sense '<='), clipped to a box."""

    weights: tuple[float, ...]
    b: float
    sense: str = ">="
    lower: tuple[float, ...] | None = None
    upper: tuple[float, ...] | None = None
    variant = "halfspace"

    def __post_init__(self):
        if self.sense not in (">=", "<="):
            raise ValueError("sense must be '>=' or '<='")
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    @property
    def dim(self) -> int:
        return len(self.weights)

    @property
    def box(self):
        lo = np.zeros(self.dim) if self.lower is None else np.asarray(self.lower, dtype=float)
        hi = np.ones(self.dim) if self.upper is None else np.asarray(self.upper, dtype=float)
        return lo, hi

    def margin(self, points):
        z = _points(points, self.dim)
        dot = np.sum(np.asarray(self.weights) * z, axis=-1)
        return self.b - dot if self.sense == ">=" else dot - self.b

    def outward_normal(self, points):
        z = _points(points, self.dim)
        w = np.asarray(self.weights)
        n = -w if self.sense == ">=" else w
        return np.broadcast_to(_unit(n), z.shape).copy()

    def scaled(self, factor):
        return replace(self, b=self.b * factor)

    def slice2(self, fixed):
        rest = float(np.dot(self.weights[2:], fixed))
        lo, hi = self.box
        return HalfSpace(self.weights[:2], self.b - rest, self.sense,
                         tuple(lo[:2]), tuple(hi[:2]))

    def _curve(self, resolution):
        (w1, w2), b = self.weights, self.b
        lo, hi = self.box
        if w2 == 0:
            if w1 == 0:
                return np.empty((0, 2))
            x = b / w1
            if not lo[0] <= x <= hi[0]:
                return np.empty((0, 2))
            return np.column_stack((np.full(resolution, x), np.linspace(lo[1], hi[1], resolution)))
        # x-range where y = (b - w1 x)/w2 stays inside the box
        ys = np.array([lo[1], hi[1]])
        xs = np.sort((b - w2 * ys) / w1) if w1 != 0 else np.array([lo[0], hi[0]])
        x_lo, x_hi = max(lo[0], xs[0]), min(hi[0], xs[1])
        if x_lo > x_hi:
            return np.empty((0, 2))
        x = np.linspace(x_lo, x_hi, resolution)
        y = np.clip((b - w1 * x) / w2, lo[1], hi[1])
        return np.column_stack((x, y))


def _ray_curve(s: StoppingSetDescriptor, resolution: int) -> np.ndarray:
    """Boundary of a coordinate-wise monotone set by root-finding along vertical rays."""
    lo, hi = s.box
    floor = lo + 1e-9 * (hi - lo)  # some margins blow up on the lower edge

    def m(x, y):
        return s.margin(np.array([[x, y]]))[0]

    out = []
    for x in np.linspace(floor[0], hi[0], resolution):
        a, b = m(x, floor[1]), m(x, hi[1])
        if np.isfinite(a) and a > 0 and b <= 0:
            out.append((x, optimize.brentq(lambda y: m(x, y), floor[1], hi[1], xtol=ROOT_XTOL)))
    return np.array(out).reshape(-1, 2)


def descriptor_from_dict(d: dict) -> StoppingSetDescriptor:
    """Rebuild a descriptor from the JSON form written by ``descriptor_to_dict``."""
    v = d["variant"]
    if v == "ball_complement":
        return BallComplement(d["c"], d.get("dim", 2), d.get("radius_factor", 1.0))
    if v == "exp_sum":
        return ExpSum(d["c"], d.get("dim", 2))
    if v == "polyhedron":
        return Polyhedron(tuple(law_from_spec(x) for x in d["laws"]), d["c"])
    if v == "f_sum":
        return FSum(tuple(law_from_spec(x) for x in d["laws"]), d["c"], d.get("view_max", 5.0))
    if v == "product_uniform":
        return ProductUniform(d["rho"], d.get("dim", 2), d.get("level", 1.0))
    if v == "product_h":
        return ProductH(tuple(law_from_spec(x) for x in d["laws"]), tuple(d["alphas"]), d["lam"],
                        d.get("level", 1.0), d.get("view_max", 10.0))
    if v == "halfspace":
        bounds = {k: tuple(d[k]) for k in ("lower", "upper") if d.get(k) is not None}
        return HalfSpace(tuple(d["weights"]), d["b"], d.get("sense", ">="), **bounds)
    raise ValueError(f"unsupported descriptor variant {v!r}")


def descriptor_to_dict(s: StoppingSetDescriptor) -> dict:
    if isinstance(s, BallComplement):
        return {"variant": s.variant, "c": s.c, "dim": s.dim, "radius_factor": s.radius_factor}
    if isinstance(s, ExpSum):
        return {"variant": s.variant, "c": s.c, "dim": s.dim}
    if isinstance(s, Polyhedron):
        return {"variant": s.variant, "laws": [law.spec() for law in s.laws], "c": s.c}
    if isinstance(s, FSum):
        return {"variant": s.variant, "laws": [law.spec() for law in s.laws], "c": s.c, "view_max": s.view_max}
    if isinstance(s, ProductUniform):
        return {"variant": s.variant, "rho": s.rho, "dim": s.dim, "level": s.level}
    if isinstance(s, ProductH):
        return {"variant": s.variant, "laws": [law.spec() for law in s.laws],
                "alphas": list(s.alphas), "lam": s.lam, "level": s.level, "view_max": s.view_max}
    if isinstance(s, HalfSpace):
        return {"variant": s.variant, "weights": list(s.weights), "b": s.b, "sense": s.sense,
                "lower": None if s.lower is None else list(s.lower),
                "upper": None if s.upper is None else list(s.upper)}
    raise TypeError(type(s))


def boundary_csv(points: np.ndarray, header: str | None = None) -> str:
    buf = io.StringIO()
    if header:
        buf.write(f"# {header}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y"])
    for x, y in points:
        w.writerow([repr(float(x)), repr(float(y))])
    return buf.getvalue()


def boundary_svg(points: np.ndarray, box: tuple[np.ndarray, np.ndarray], header: str | None = None,
                 size: int = 400) -> str:
    """Polyline in a unit-square viewport; the support box is mapped onto [0,1]^2."""
    lo, hi = (np.asarray(b, dtype=float)[:2] for b in box)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    u = (np.asarray(points)[:, :2] - lo) / span
    coords = " ".join(f"{x:.6f},{1.0 - y:.6f}" for x, y in u)
    lines = ['<?xml version="1.0" encoding="UTF-8"?>']
    if header:
        lines.append(f"<!-- {header} -->")
    lines += [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 1 1">',
        '  <rect x="0" y="0" width="1" height="1" fill="none" stroke="black" stroke-width="0.004"/>',
        f'  <polyline points="{coords}" fill="none" stroke="#1f5fbf" stroke-width="0.006"/>',
        "</svg>",
    ]
    return "\n".join(lines) + "\n"
