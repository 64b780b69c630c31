"""Weighting functions on the Preisach plane and their integrals.

Every weighting function exposes four exact primitives, all restricted to
``P = {alpha > beta}`` and to the compact support:

* ``integrate_box``          -- double integral over a box
* ``integrate_box_weighted`` -- same with the extra factor ``(alpha - beta)``
* ``cumulative_beta``        -- antiderivative along a line of fixed alpha
* ``cumulative_alpha``       -- antiderivative along a line of fixed beta

Everything else in the package (operator output, crossover integrals, loop
areas, slope bounds) is assembled from these.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import optimize

EPS = np.finfo(float).eps


class UnboundedSupport(ValueError):
    pass


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle ``a_lo < alpha < a_hi, b_lo < beta < b_hi``."""

    a_lo: float
    a_hi: float
    b_lo: float
    b_hi: float

    def intersect(self, other: "Box") -> "Box":
        return Box(
            max(self.a_lo, other.a_lo),
            min(self.a_hi, other.a_hi),
            max(self.b_lo, other.b_lo),
            min(self.b_hi, other.b_hi),
        )

    @property
    def empty(self) -> bool:
        return not (self.a_hi > self.a_lo and self.b_hi > self.b_lo)

    @property
    def bounded(self) -> bool:
        return all(math.isfinite(x) for x in (self.a_lo, self.a_hi, self.b_lo, self.b_hi))

    def translated(self, da: float, db: float) -> "Box":
        return Box(self.a_lo + da, self.a_hi + da, self.b_lo + db, self.b_hi + db)


class RegionIntegralResult(NamedTuple):
    value: float
    abs_error_estimate: float


# --------------------------------------------------------------------------
# geometry helpers


def clip_halfplane(poly: np.ndarray, n: tuple[float, float], c: float) -> np.ndarray:
    """Sutherland-Hodgman step keeping the part of ``poly`` with ``n . p <= c``."""
    if len(poly) == 0:
        return poly
    d = poly @ np.asarray(n, dtype=float) - c
    out = []
    k = len(poly)
    for i in range(k):
        p, q = poly[i], poly[(i + 1) % k]
        dp, dq = d[i], d[(i + 1) % k]
        if dp <= 0:
            out.append(p)
        if (dp < 0 < dq) or (dq < 0 < dp):
            t = dp / (dp - dq)
            out.append(p + t * (q - p))
    return np.array(out) if out else np.empty((0, 2))


def clip_to_box_in_plane(poly: np.ndarray, box: Box) -> np.ndarray:
    """Clip a polygon in (alpha, beta) coordinates to ``box`` and to P."""
    if math.isfinite(box.a_lo):
        poly = clip_halfplane(poly, (-1.0, 0.0), -box.a_lo)
    if math.isfinite(box.a_hi):
        poly = clip_halfplane(poly, (1.0, 0.0), box.a_hi)
    if math.isfinite(box.b_lo):
        poly = clip_halfplane(poly, (0.0, -1.0), -box.b_lo)
    if math.isfinite(box.b_hi):
        poly = clip_halfplane(poly, (0.0, 1.0), box.b_hi)
    return clip_halfplane(poly, (-1.0, 1.0), 0.0)


def polygon_moments(poly: np.ndarray) -> tuple[float, float, float]:
    """(area, integral of alpha, integral of beta) of a simple polygon."""
    if len(poly) < 3:
        return 0.0, 0.0, 0.0
    x, y = poly[:, 0], poly[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = cross.sum() / 2.0
    mx = ((x + xn) * cross).sum() / 6.0
    my = ((y + yn) * cross).sum() / 6.0
    if area < 0:
        return -area, -mx, -my
    return area, mx, my


def box_diag_moments(a0, a1, b0, b1):
    """Area and integral of (alpha - beta) over ``[a0,a1]x[b0,b1]`` intersected with P.

    Vectorised over array arguments.
    """
    a0, a1, b0, b1 = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (a0, a1, b0, b1)))
    valid = (a1 > a0) & (b1 > b0)
    # rows entirely left of the diagonal cut: full width
    p1, q1 = b0, np.minimum(b1, a0)
    full = valid & (q1 > p1)
    w = a1 - a0
    area1 = np.where(full, w * (q1 - p1), 0.0)
    mom1 = np.where(full, 0.5 * w * ((a1 + a0) * (q1 - p1) - (q1 * q1 - p1 * p1)), 0.0)
    # rows cut by the diagonal: width a1 - beta
    p2, q2 = np.maximum(b0, a0), np.minimum(b1, a1)
    cut = valid & (q2 > p2)
    r1, r2 = a1 - p2, a1 - q2
    area2 = np.where(cut, 0.5 * (r1 * r1 - r2 * r2), 0.0)
    mom2 = np.where(cut, (r1**3 - r2**3) / 6.0, 0.0)
    return area1 + area2, mom1 + mom2


def diag_poly_moment(a0, a1, b0, b1, i: int, j: int):
    """``int alpha^i beta^j`` over ``[a0, a1] x [b0, b1]`` intersected with ``alpha > beta``.

    Vectorised; empty or inverted boxes give 0.
    """
    a0, a1, b0, b1 = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (a0, a1, b0, b1)))
    ok = (a1 > a0) & (b1 > b0)
    pa = lambda x: x ** (i + 1) / (i + 1)
    pb = lambda x, k: x ** (k + 1) / (k + 1)
    # beta below a0: full alpha range
    m1 = np.maximum(b0, np.minimum(b1, a0))
    part1 = (pa(a1) - pa(a0)) * (pb(m1, j) - pb(b0, j))
    # beta inside [a0, a1]: alpha from beta to a1
    p2 = np.maximum(b0, a0)
    q2 = np.maximum(p2, np.minimum(b1, a1))
    part2 = pa(a1) * (pb(q2, j) - pb(p2, j)) - (pb(q2, i + j + 1) - pb(p2, i + j + 1)) / (i + 1)
    return np.where(ok, part1 + part2, 0.0)


def _gauss_legendre(n: int):
    return np.polynomial.legendre.leggauss(n)


def _pl_cumulative(xk: np.ndarray, fk: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Integral from ``xk[0]`` to ``x`` of the piecewise-linear interpolant (0 outside)."""
    x = np.clip(np.asarray(x, dtype=float), xk[0], xk[-1])
    if len(xk) < 2:
        return np.zeros_like(x)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (fk[1:] + fk[:-1]) * np.diff(xk))])
    idx = np.clip(np.searchsorted(xk, x, side="right") - 1, 0, len(xk) - 2)
    fx = np.interp(x, xk, fk)
    return cum[idx] + 0.5 * (fk[idx] + fx) * (x - xk[idx])


# --------------------------------------------------------------------------
# base class


class WeightingFunction(ABC):
    """Compactly supported density mu(alpha, beta) on the Preisach plane."""

    kind: str = "abstract"
    name: str = "custom"
    support: Box

    @abstractmethod
    def density(self, alpha, beta) -> np.ndarray: ...

    @abstractmethod
    def integrate_box(self, a_lo: float, a_hi: float, b_lo: float, b_hi: float) -> float: ...

    @abstractmethod
    def integrate_box_weighted(self, a_lo: float, a_hi: float, b_lo: float, b_hi: float) -> float: ...

    @abstractmethod
    def cumulative_beta(self, alpha: float, betas) -> np.ndarray:
        """``int_{-inf}^{beta} mu(alpha, s) ds`` for each entry of ``betas``."""

    @abstractmethod
    def cumulative_alpha(self, beta: float, alphas) -> np.ndarray:
        """``int_{-inf}^{alpha} mu(s, beta) ds`` for each entry of ``alphas``."""

    @property
    @abstractmethod
    def max_abs(self) -> float: ...

    def breakpoints(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates where line integrals have kinks (alpha values, beta values)."""
        return np.empty(0), np.empty(0)

    def total(self) -> float:
        """Integral of mu over all of P (cached; weightings are immutable)."""
        cached = self.__dict__.get("_total")
        if cached is None:
            s = self.support
            cached = self.__dict__["_total"] = self.integrate_box(s.a_lo, s.a_hi, s.b_lo, s.b_hi)
        return cached

    def roundoff(self, box: Box | None = None) -> float:
        s = self.support if box is None else box.intersect(self.support)
        if s.empty:
            return 0.0
        area = (s.a_hi - s.a_lo) * (s.b_hi - s.b_lo)
        return 64 * EPS * max(self.max_abs, 1e-300) * max(area, 1.0)

    def describe(self) -> dict:
        return {"kind": self.kind, "name": self.name}


# --------------------------------------------------------------------------
# piecewise-constant regions


def _check_edges(poly: np.ndarray, tol: float = 1e-12) -> None:
    d = np.roll(poly, -1, axis=0) - poly
    for da, db in d:
        scale = max(abs(da), abs(db), 1.0)
        if abs(da) <= tol * scale or abs(db) <= tol * scale:
            continue
        if abs(abs(da) - abs(db)) <= tol * scale:
            continue
        raise ValueError(
            "region edges must be axis-aligned or have slope +-1, got direction "
            f"({da}, {db})"
        )


class RegionWeighting(WeightingFunction):
    """Sum of constant densities on polygons with axis-aligned or diagonal edges.

    Polygons are given in ``(alpha, beta)`` coordinates and are implicitly
    intersected with P.  Overlapping regions add up.
    """

    kind = "piecewise_constant_regions"

    def __init__(
        self,
        regions: Sequence[tuple[Sequence[Sequence[float]], float]],
        support: Box | None = None,
        name: str = "regions",
    ):
        self.regions: list[tuple[np.ndarray, float]] = []
        for verts, dens in regions:
            poly = np.asarray(verts, dtype=float)
            if poly.ndim != 2 or poly.shape[1] != 2 or len(poly) < 3:
                raise ValueError("each region needs at least three (alpha, beta) vertices")
            _check_edges(poly)
            self.regions.append((poly, float(dens)))
        self.name = name
        if support is None:
            if self.regions:
                allv = np.vstack([p for p, _ in self.regions])
                support = Box(allv[:, 0].min(), allv[:, 0].max(), allv[:, 1].min(), allv[:, 1].max())
            else:
                support = Box(0.0, 0.0, 0.0, 0.0)
        self.support = support

    @property
    def max_abs(self) -> float:
        return sum(abs(d) for _, d in self.regions)

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "name": self.name,
            "regions": [
                {"vertices": poly.tolist(), "density": dens} for poly, dens in self.regions
            ],
        }

    def translated(self, da: float, db: float) -> "RegionWeighting":
        shift = np.array([da, db])
        return RegionWeighting(
            [(p + shift, d) for p, d in self.regions],
            support=self.support.translated(da, db),
            name=self.name,
        )

    def density(self, alpha, beta) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=float)
        beta = np.asarray(beta, dtype=float)
        out = np.zeros(np.broadcast(alpha, beta).shape)
        for poly, dens in self.regions:
            inside = np.zeros(out.shape, dtype=bool)
            k = len(poly)
            for i in range(k):
                (x1, y1), (x2, y2) = poly[i], poly[(i + 1) % k]
                if y1 == y2:
                    continue
                crosses = (y1 <= beta) != (y2 <= beta)
                x_int = x1 + (beta - y1) * (x2 - x1) / (y2 - y1)
                inside ^= crosses & (alpha < x_int)
            out += np.where(inside, dens, 0.0)
        return np.where(alpha > beta, out, 0.0)

    def _moments(self, box: Box) -> tuple[float, float]:
        val = 0.0
        wval = 0.0
        for poly, dens in self.regions:
            clipped = clip_to_box_in_plane(poly, box)
            area, ma, mb = polygon_moments(clipped)
            val += dens * area
            wval += dens * (ma - mb)
        return val, wval

    def integrate_box(self, a_lo, a_hi, b_lo, b_hi) -> float:
        return self._moments(Box(a_lo, a_hi, b_lo, b_hi))[0]

    def integrate_box_weighted(self, a_lo, a_hi, b_lo, b_hi) -> float:
        return self._moments(Box(a_lo, a_hi, b_lo, b_hi))[1]

    @staticmethod
    def _line_intervals(poly: np.ndarray, x: float, axis: int) -> list[tuple[float, float]]:
        # half-open rule [min, max) on the fixed coordinate: the right-hand limit
        other = 1 - axis
        hits = []
        k = len(poly)
        for i in range(k):
            p, q = poly[i], poly[(i + 1) % k]
            lo, hi = min(p[axis], q[axis]), max(p[axis], q[axis])
            if lo == hi or not (lo <= x < hi):
                continue
            t = (x - p[axis]) / (q[axis] - p[axis])
            hits.append(p[other] + t * (q[other] - p[other]))
        hits.sort()
        return [(hits[i], hits[i + 1]) for i in range(0, len(hits) - 1, 2)]

    def cumulative_beta(self, alpha, betas) -> np.ndarray:
        betas = np.asarray(betas, dtype=float)
        out = np.zeros(betas.shape)
        for poly, dens in self.regions:
            for lo, hi in self._line_intervals(poly, float(alpha), axis=0):
                hi = min(hi, alpha)
                if hi <= lo:
                    continue
                out += dens * np.clip(betas - lo, 0.0, hi - lo)
        return out

    def cumulative_alpha(self, beta, alphas) -> np.ndarray:
        alphas = np.asarray(alphas, dtype=float)
        out = np.zeros(alphas.shape)
        for poly, dens in self.regions:
            for lo, hi in self._line_intervals(poly, float(beta), axis=1):
                lo = max(lo, beta)
                if hi <= lo:
                    continue
                out += dens * np.clip(alphas - lo, 0.0, hi - lo)
        return out

    def breakpoints(self):
        if not self.regions:
            return np.empty(0), np.empty(0)
        allv = np.vstack([p for p, _ in self.regions])
        return np.unique(allv[:, 0]), np.unique(allv[:, 1])


# --------------------------------------------------------------------------
# closed-form sine weighting


class SineWeighting(WeightingFunction):
    """``sin(2 pi (a - b)) + sin(2 pi (a + b))`` on ``{-c < b < a < c}``.

    Uses the product form ``2 sin(2 pi a) cos(2 pi b)``, which separates.
    """

    kind = "analytic_builtin"
    name = "multiloop_sin"

    def __init__(self, extent: float = 1.0):
        if extent <= 0:
            raise ValueError("extent must be positive")
        self.extent = float(extent)
        c = self.extent
        self.support = Box(-c, c, -c, c)

    @property
    def max_abs(self) -> float:
        return 2.0

    def describe(self) -> dict:
        return {"kind": self.kind, "name": self.name, "params": {"extent": self.extent}}

    def density(self, alpha, beta) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=float)
        beta = np.asarray(beta, dtype=float)
        c = self.extent
        val = np.sin(2 * np.pi * (alpha - beta)) + np.sin(2 * np.pi * (alpha + beta))
        inside = (alpha > beta) & (beta > -c) & (alpha < c)
        return np.where(inside, val, 0.0)

    @staticmethod
    def _S(a):
        # antiderivative of 2 sin(2 pi a)
        return -np.cos(2 * np.pi * a) / np.pi

    @staticmethod
    def _sin_int(p, q):
        # int_p^q cos(2 pi b) db
        return (np.sin(2 * np.pi * q) - np.sin(2 * np.pi * p)) / (2 * np.pi)

    def _clip(self, a_lo, a_hi, b_lo, b_hi) -> Box:
        return Box(a_lo, a_hi, b_lo, b_hi).intersect(self.support)

    def integrate_box(self, a_lo, a_hi, b_lo, b_hi) -> float:
        bx = self._clip(a_lo, a_hi, b_lo, b_hi)
        if bx.empty:
            return 0.0
        a0, a1, b0, b1 = bx.a_lo, bx.a_hi, bx.b_lo, bx.b_hi
        S = self._S
        total = 0.0
        p, q = b0, min(b1, a0)
        if q > p:
            total += (S(a1) - S(a0)) * self._sin_int(p, q)
        p, q = max(b0, a0), min(b1, a1)
        if q > p:
            # int cos(2 pi b) [S(a1) - S(b)] db, with -cos*S = cos^2 / pi
            cos2 = (q - p) / 2 + (np.sin(4 * np.pi * q) - np.sin(4 * np.pi * p)) / (8 * np.pi)
            total += S(a1) * self._sin_int(p, q) + cos2 / np.pi
        return float(total)

    def _weighted_gl(self, bx: Box, n: int) -> float:
        x, w = _gauss_legendre(n)
        a0, a1, b0, b1 = bx.a_lo, bx.a_hi, bx.b_lo, bx.b_hi
        total = 0.0
        for p, q in ((b0, min(b1, a0)), (max(b0, a0), min(b1, a1))):
            if q <= p:
                continue
            bb = 0.5 * (q - p) * x + 0.5 * (q + p)
            lo = np.maximum(a0, bb)
            # inner nodes: shape (n_beta, n_alpha)
            aa = 0.5 * (a1 - lo)[:, None] * x[None, :] + 0.5 * (a1 + lo)[:, None]
            f = 2 * np.sin(2 * np.pi * aa) * np.cos(2 * np.pi * bb)[:, None] * (aa - bb[:, None])
            inner = 0.5 * (a1 - lo) * (f @ w)
            total += 0.5 * (q - p) * (inner @ w)
        return float(total)

    def integrate_box_weighted(self, a_lo, a_hi, b_lo, b_hi) -> float:
        bx = self._clip(a_lo, a_hi, b_lo, b_hi)
        if bx.empty:
            return 0.0
        return self._weighted_gl(bx, 40)

    def weighted_error_estimate(self, a_lo, a_hi, b_lo, b_hi) -> float:
        bx = self._clip(a_lo, a_hi, b_lo, b_hi)
        if bx.empty:
            return 0.0
        return abs(self._weighted_gl(bx, 40) - self._weighted_gl(bx, 28)) + self.roundoff(bx)

    def cumulative_beta(self, alpha, betas) -> np.ndarray:
        betas = np.asarray(betas, dtype=float)
        c = self.extent
        if not (-c < alpha < c):
            return np.zeros(betas.shape)
        top = np.clip(betas, -c, min(alpha, c))
        return 2 * np.sin(2 * np.pi * alpha) * self._sin_int(-c, top)

    def cumulative_alpha(self, beta, alphas) -> np.ndarray:
        alphas = np.asarray(alphas, dtype=float)
        c = self.extent
        if not (-c < beta < c):
            return np.zeros(alphas.shape)
        lo = max(beta, -c)
        top = np.clip(alphas, lo, c)
        return np.cos(2 * np.pi * beta) * (self._S(top) - self._S(lo))


# --------------------------------------------------------------------------
# sampled grids


class GridWeighting(WeightingFunction):
    """Cell-centred samples on the support rectangle.

    ``values[i, j]`` is the density at the centre of cell ``i`` along alpha and
    cell ``j`` along beta.  ``interpolation`` is ``"nearest"`` (piecewise
    constant per cell) or ``"bilinear"`` (linear between centres, constant in
    the outer half cells).
    """

    kind = "sampled_grid"

    def __init__(self, support: Box, values, interpolation: str = "nearest", name: str = "grid"):
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or min(values.shape) < 1:
            raise ValueError("grid values must be a non-empty 2-D array")
        if interpolation not in ("nearest", "bilinear"):
            raise ValueError(f"unknown interpolation {interpolation!r}")
        if not support.bounded or support.empty:
            raise UnboundedSupport("grid weighting needs a bounded, non-empty support box")
        self.support = support
        self.values = values
        self.interpolation = interpolation
        self.name = name
        na, nb = values.shape
        self.a_edges = np.linspace(support.a_lo, support.a_hi, na + 1)
        self.b_edges = np.linspace(support.b_lo, support.b_hi, nb + 1)
        self.a_centers = 0.5 * (self.a_edges[1:] + self.a_edges[:-1])
        self.b_centers = 0.5 * (self.b_edges[1:] + self.b_edges[:-1])

    @property
    def max_abs(self) -> float:
        return float(np.abs(self.values).max())

    def describe(self) -> dict:
        s = self.support
        return {
            "kind": self.kind,
            "name": self.name,
            "interpolation": self.interpolation,
            "support": [s.a_lo, s.a_hi, s.b_lo, s.b_hi],
            "shape": list(self.values.shape),
        }

    def translated(self, da: float, db: float) -> "GridWeighting":
        return GridWeighting(self.support.translated(da, db), self.values, self.interpolation, self.name)

    @classmethod
    def from_function(
        cls, fn: Callable, support: Box, n: int, interpolation: str = "nearest", name: str = "grid"
    ) -> "GridWeighting":
        ac = support.a_lo + (np.arange(n) + 0.5) * (support.a_hi - support.a_lo) / n
        bc = support.b_lo + (np.arange(n) + 0.5) * (support.b_hi - support.b_lo) / n
        A, B = np.meshgrid(ac, bc, indexing="ij")
        return cls(support, fn(A, B), interpolation, name)

    def _in_support(self, alpha, beta):
        s = self.support
        return (alpha > s.a_lo) & (alpha < s.a_hi) & (beta > s.b_lo) & (beta < s.b_hi) & (alpha > beta)

    def density(self, alpha, beta) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=float)
        beta = np.asarray(beta, dtype=float)
        alpha, beta = np.broadcast_arrays(alpha, beta)
        if self.interpolation == "nearest":
            i = np.clip(np.searchsorted(self.a_edges, alpha, side="right") - 1, 0, len(self.a_centers) - 1)
            j = np.clip(np.searchsorted(self.b_edges, beta, side="right") - 1, 0, len(self.b_centers) - 1)
            val = self.values[i, j]
        else:
            val = self._bilinear(alpha, beta)
        return np.where(self._in_support(alpha, beta), val, 0.0)

    def _bilinear(self, alpha, beta):
        ac, bc, v = self.a_centers, self.b_centers, self.values
        a = np.clip(alpha, ac[0], ac[-1])
        b = np.clip(beta, bc[0], bc[-1])
        if len(ac) == 1 or len(bc) == 1:
            if len(ac) == 1 and len(bc) == 1:
                return np.full(np.shape(a), v[0, 0])
            if len(ac) == 1:
                return np.interp(b, bc, v[0])
            return np.interp(a, ac, v[:, 0])
        i = np.clip(np.searchsorted(ac, a, side="right") - 1, 0, len(ac) - 2)
        j = np.clip(np.searchsorted(bc, b, side="right") - 1, 0, len(bc) - 2)
        ta = (a - ac[i]) / (ac[i + 1] - ac[i])
        tb = (b - bc[j]) / (bc[j + 1] - bc[j])
        return (
            v[i, j] * (1 - ta) * (1 - tb)
            + v[i + 1, j] * ta * (1 - tb)
            + v[i, j + 1] * (1 - ta) * tb
            + v[i + 1, j + 1] * ta * tb
        )

    # -- nearest: exact cell sums ------------------------------------------

    def _nearest_moments(self, box: Box) -> tuple[float, float]:
        bx = box.intersect(self.support)
        if bx.empty:
            return 0.0, 0.0
        a0 = np.clip(self.a_edges[:-1], bx.a_lo, bx.a_hi)[:, None]
        a1 = np.clip(self.a_edges[1:], bx.a_lo, bx.a_hi)[:, None]
        b0 = np.clip(self.b_edges[:-1], bx.b_lo, bx.b_hi)[None, :]
        b1 = np.clip(self.b_edges[1:], bx.b_lo, bx.b_hi)[None, :]
        area, mom = box_diag_moments(a0, a1, b0, b1)
        return float((area * self.values).sum()), float((mom * self.values).sum())

    # -- bilinear: exact piecewise-polynomial integration -------------------

    def _row_values(self, beta: float) -> np.ndarray:
        # density at the alpha centres on the line of fixed beta
        bc = self.b_centers
        if len(bc) == 1:
            return self.values[:, 0].copy()
        return np.array([np.interp(beta, bc, row) for row in self.values])

    def _col_values(self, alpha: float) -> np.ndarray:
        ac = self.a_centers
        if len(ac) == 1:
            return self.values[0].copy()
        return np.array([np.interp(alpha, ac, col) for col in self.values.T])

    def _knots(self, centers, lo, hi):
        inner = centers[(centers > lo) & (centers < hi)]
        return np.concatenate([[lo], inner, [hi]])

    def _patches(self):
        # bilinear patches between centres, padded with constant outer half cells
        if not hasattr(self, "_patch_cache"):
            s = self.support
            ka = np.concatenate([[s.a_lo], self.a_centers, [s.a_hi]])
            kb = np.concatenate([[s.b_lo], self.b_centers, [s.b_hi]])
            V = np.pad(self.values, 1, mode="edge")
            x0, x1 = ka[:-1, None], ka[1:, None]
            y0, y1 = kb[None, :-1], kb[None, 1:]
            hx, hy = x1 - x0, y1 - y0
            v00, v10, v01, v11 = V[:-1, :-1], V[1:, :-1], V[:-1, 1:], V[1:, 1:]
            d = (v00 - v10 - v01 + v11) / (hx * hy)
            gx, gy = (v10 - v00) / hx, (v01 - v00) / hy
            coef = (
                v00 - gx * x0 - gy * y0 + d * x0 * y0,  # 1
                gx - d * y0,  # alpha
                gy - d * x0,  # beta
                d,  # alpha * beta
            )
            self._patch_cache = (ka, kb, coef)
        return self._patch_cache

    def _bilinear_integral(self, box: Box, weighted: bool) -> float:
        bx = box.intersect(self.support)
        if bx.empty:
            return 0.0
        ka, kb, (c00, c10, c01, c11) = self._patches()
        A0 = np.clip(ka[:-1], bx.a_lo, bx.a_hi)[:, None]
        A1 = np.clip(ka[1:], bx.a_lo, bx.a_hi)[:, None]
        B0 = np.clip(kb[:-1], bx.b_lo, bx.b_hi)[None, :]
        B1 = np.clip(kb[1:], bx.b_lo, bx.b_hi)[None, :]
        M = lambda i, j: diag_poly_moment(A0, A1, B0, B1, i, j)
        if weighted:
            terms = (
                c00 * (M(1, 0) - M(0, 1))
                + c10 * (M(2, 0) - M(1, 1))
                + c01 * (M(1, 1) - M(0, 2))
                + c11 * (M(2, 1) - M(1, 2))
            )
        else:
            terms = c00 * M(0, 0) + c10 * M(1, 0) + c01 * M(0, 1) + c11 * M(1, 1)
        return math.fsum(terms.ravel())

    def integrate_box(self, a_lo, a_hi, b_lo, b_hi) -> float:
        box = Box(a_lo, a_hi, b_lo, b_hi)
        if self.interpolation == "nearest":
            return self._nearest_moments(box)[0]
        return self._bilinear_integral(box, weighted=False)

    def integrate_box_weighted(self, a_lo, a_hi, b_lo, b_hi) -> float:
        box = Box(a_lo, a_hi, b_lo, b_hi)
        if self.interpolation == "nearest":
            return self._nearest_moments(box)[1]
        return self._bilinear_integral(box, weighted=True)

    def cumulative_beta(self, alpha, betas) -> np.ndarray:
        betas = np.asarray(betas, dtype=float)
        s = self.support
        if not (s.a_lo < alpha < s.a_hi):
            return np.zeros(betas.shape)
        top = min(s.b_hi, alpha)
        if top <= s.b_lo:
            return np.zeros(betas.shape)
        if self.interpolation == "nearest":
            i = min(np.searchsorted(self.a_edges, alpha, side="right") - 1, len(self.a_centers) - 1)
            col = self.values[i]
            lens = np.clip(np.minimum(self.b_edges[1:], top) - self.b_edges[:-1], 0.0, None)
            cum = np.concatenate([[0.0], np.cumsum(col * lens)])
            b = np.clip(betas, s.b_lo, top)
            j = np.clip(np.searchsorted(self.b_edges, b, side="right") - 1, 0, len(col) - 1)
            return cum[j] + col[j] * (b - self.b_edges[j])
        xk = self._knots(self.b_centers, s.b_lo, top)
        fk = np.interp(xk, self.b_centers, self._col_values(alpha))
        return _pl_cumulative(xk, fk, betas)

    def cumulative_alpha(self, beta, alphas) -> np.ndarray:
        alphas = np.asarray(alphas, dtype=float)
        s = self.support
        if not (s.b_lo < beta < s.b_hi):
            return np.zeros(alphas.shape)
        lo = max(s.a_lo, beta)
        if s.a_hi <= lo:
            return np.zeros(alphas.shape)
        if self.interpolation == "nearest":
            j = min(np.searchsorted(self.b_edges, beta, side="right") - 1, len(self.b_centers) - 1)
            row = self.values[:, j]
            lens = np.clip(self.a_edges[1:] - np.maximum(self.a_edges[:-1], lo), 0.0, None)
            cum = np.concatenate([[0.0], np.cumsum(row * lens)])
            a = np.clip(alphas, lo, s.a_hi)
            i = np.clip(np.searchsorted(self.a_edges, a, side="right") - 1, 0, len(row) - 1)
            return cum[i] + row[i] * (a - np.maximum(self.a_edges[i], lo))
        xk = self._knots(self.a_centers, lo, s.a_hi)
        fk = np.interp(xk, self.a_centers, self._row_values(beta))
        return _pl_cumulative(xk, fk, alphas)

    def breakpoints(self):
        return self.a_edges.copy(), self.b_edges.copy()


# --------------------------------------------------------------------------
# builtins


def butterfly_sym(beta1: float = 1.0) -> RegionWeighting:
    """-1 below the anti-diagonal, +1 above it, on the triangle ``-b1 < beta < alpha < b1``."""
    b1 = float(beta1)
    if b1 <= 0:
        raise ValueError("beta1 must be positive")
    neg = [(-b1, -b1), (b1, -b1), (0.0, 0.0)]
    pos = [(0.0, 0.0), (b1, -b1), (b1, b1)]
    w = RegionWeighting([(neg, -1.0), (pos, 1.0)], support=Box(-b1, b1, -b1, b1), name="butterfly_sym")
    w.params = {"beta1": b1}
    return w


def double_loop_same_orientation(beta1: float = 1.0) -> RegionWeighting:
    """+1 on the triangle ``-b1 < beta < alpha < b1`` except a -1 patch below ``alpha = beta + b1``."""
    b1 = float(beta1)
    if b1 <= 0:
        raise ValueError("beta1 must be positive")
    tri = [(-b1, -b1), (b1, -b1), (b1, b1)]
    patch = [(0.0, -b1), (b1, 0.0), (0.0, 0.0)]
    w = RegionWeighting(
        [(tri, 1.0), (patch, -2.0)], support=Box(-b1, b1, -b1, b1), name="double_loop_same_orientation"
    )
    w.params = {"beta1": b1}
    return w


def multiloop_sin(extent: float = 1.0) -> SineWeighting:
    return SineWeighting(extent)


def uniform_square(value: float = 1.0, half_width: float = 1.0) -> RegionWeighting:
    """Constant density on the square ``[-h, h]^2`` (restricted to P)."""
    h = float(half_width)
    if h <= 0:
        raise ValueError("half_width must be positive")
    sq = [(-h, -h), (h, -h), (h, h), (-h, h)]
    w = RegionWeighting([(sq, float(value))], support=Box(-h, h, -h, h), name="uniform_square")
    w.params = {"value": float(value), "half_width": h}
    return w


def zero() -> RegionWeighting:
    """Identically zero density; the operator output is always 0."""
    w = RegionWeighting([], name="zero")
    w.params = {}
    return w


@dataclass(frozen=True)
class BuiltinSpec:
    factory: Callable[..., WeightingFunction]
    params: dict
    summary: str


BUILTINS: dict[str, BuiltinSpec] = {
    "butterfly_sym": BuiltinSpec(
        butterfly_sym, {"beta1": 1.0}, "anti-symmetric two-sided density; symmetric butterfly loops"
    ),
    "double_loop_same_orientation": BuiltinSpec(
        double_loop_same_orientation,
        {"beta1": 1.0},
        "crossover at (0, 0) with two equally oriented subloops",
    ),
    "multiloop_sin": BuiltinSpec(
        multiloop_sin, {"extent": 1.0}, "sin(2pi(a-b)) + sin(2pi(a+b)); four subloops on [-1, 1]"
    ),
    "uniform_square": BuiltinSpec(
        uniform_square, {"value": 1.0, "half_width": 1.0}, "constant density on a square"
    ),
    "zero": BuiltinSpec(zero, {}, "identically zero density"),
}


def make_builtin(name: str, **params) -> WeightingFunction:
    try:
        spec = BUILTINS[name]
    except KeyError:
        raise KeyError(f"unknown builtin weighting {name!r}; known: {sorted(BUILTINS)}") from None
    unknown = set(params) - set(spec.params)
    if unknown:
        raise TypeError(f"{name} does not take parameters {sorted(unknown)}")
    return spec.factory(**{**spec.params, **params})


# --------------------------------------------------------------------------
# module-level operations


def eval_mu(mu: WeightingFunction, p: Sequence[float]) -> float:
    return float(mu.density(float(p[0]), float(p[1])))


def integrate_rectangle(mu: WeightingFunction, rect: Box) -> RegionIntegralResult:
    """Double integral of mu over ``rect`` intersected with P and the support."""
    value = mu.integrate_box(rect.a_lo, rect.a_hi, rect.b_lo, rect.b_hi)
    return RegionIntegralResult(value, mu.roundoff(rect))


def integrate_triangle_weighted(mu: WeightingFunction, u_min: float, u_max: float) -> float:
    """``2 * int_{beta > u_min, alpha < u_max} mu (alpha - beta)``: the loop area of a min/max cycle."""
    if u_max <= u_min:
        return 0.0
    return 2.0 * mu.integrate_box_weighted(u_min, u_max, u_min, u_max)


def _family_values(mu: WeightingFunction, gammas, kappas, which: int) -> np.ndarray:
    """Line integrals on the lattice, entry ``[i, j]`` for ``(gammas[i], kappas[j])``."""
    out = np.zeros((len(gammas), len(kappas)))
    if which == 1:
        # int_kappa^gamma mu(gamma, beta) dbeta
        for i, g in enumerate(gammas):
            top = mu.cumulative_beta(g, np.array([g]))[0]
            out[i] = top - mu.cumulative_beta(g, kappas)
    else:
        # int_kappa^gamma mu(alpha, kappa) dalpha
        for j, k in enumerate(kappas):
            out[:, j] = mu.cumulative_alpha(k, gammas) - mu.cumulative_alpha(k, np.array([k]))[0]
    mask = np.asarray(gammas)[:, None] > np.asarray(kappas)[None, :]
    return np.where(mask, out, 0.0)


def _line_value(mu: WeightingFunction, gamma: float, kappa: float, which: int) -> float:
    if gamma <= kappa:
        return 0.0
    if which == 1:
        c = mu.cumulative_beta(gamma, np.array([kappa, gamma]))
    else:
        c = mu.cumulative_alpha(kappa, np.array([kappa, gamma]))
    return float(c[1] - c[0])


def lambda_bounds(mu: WeightingFunction, grid_n: int = 256) -> tuple[float, float]:
    """Extremal line integrals of mu, i.e. the bounds on dy/du of the operator.

    Lattice search over ``(gamma, kappa)`` (augmented with the density's
    breakpoints, each probed from both sides), then a local Nelder-Mead polish
    from the best lattice points of each family.
    """
    if grid_n < 64:
        raise ValueError("grid_n must be at least 64")
    s = mu.support
    if not s.bounded:
        raise UnboundedSupport("lambda_bounds needs a compactly supported weighting function")
    lo, hi = min(s.a_lo, s.b_lo), max(s.a_hi, s.b_hi)
    if hi <= lo:
        return 0.0, 0.0
    eps = 1e-12 * (hi - lo)
    ba, bb = mu.breakpoints()
    base = np.linspace(lo, hi, grid_n)
    extra = np.concatenate([ba, bb])
    extra = extra[(extra >= lo) & (extra <= hi)]
    pts = np.unique(np.concatenate([base, extra]))
    probes = np.unique(np.clip(np.concatenate([pts - eps, pts + eps]), lo, hi))

    step = (hi - lo) / grid_n
    extremes = []
    for which in (1, 2):
        vals = _family_values(mu, probes, probes, which)
        for sign in (1.0, -1.0):
            f = sign * vals
            best = float(f.max())
            for idx in np.argsort(f, axis=None)[-4:]:
                i, j = np.unravel_index(idx, f.shape)
                if probes[i] <= probes[j]:
                    continue

                def obj(x, which=which, sign=sign):
                    g = min(max(x[0], lo), hi)
                    k = min(max(x[1], lo), g)
                    return -sign * _line_value(mu, g, k, which)

                g0, k0 = probes[i], probes[j]
                simplex = np.array([[g0, k0], [g0 + step, k0], [g0, k0 - step]])
                res = optimize.minimize(
                    obj,
                    simplex[0],
                    method="Nelder-Mead",
                    options={"initial_simplex": simplex, "xatol": 1e-13, "fatol": 1e-16, "maxiter": 4000},
                )
                best = max(best, -float(res.fun))
            extremes.append(sign * best)
    lam_max = max(0.0, *(e for e in extremes if e >= 0), 0.0)
    lam_min = min(0.0, *(e for e in extremes if e <= 0), 0.0)
    return 2.0 * lam_min, 2.0 * lam_max
