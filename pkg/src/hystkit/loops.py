"""Hysteresis loops: extraction, signed areas, crossover points, classification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize

from .errors import MomentExhausted, NoLoop
from .operator import PreisachState, SampledSignal
from .weighting import GridWeighting, WeightingFunction, integrate_triangle_weighted


@dataclass(frozen=True)
class HysteresisLoop:
    """One steady-state period, split at the input maximum.

    ``ascending`` runs from ``u_min`` to ``u_max``, ``descending`` back; both
    are ``(n, 2)`` arrays of ``(u, y)`` rows sharing their end points.
    """

    ascending: np.ndarray
    descending: np.ndarray
    u_min: float
    u_max: float
    period_info: tuple[float, float, float]

    def polygon(self) -> np.ndarray:
        return np.vstack([self.ascending, self.descending[1:]])

    def trace(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(t, u, y)`` over the recorded period, unit input speed."""
        pts = self.polygon()
        t = self.period_info[0] + np.concatenate([[0.0], np.cumsum(np.abs(np.diff(pts[:, 0])))])
        return t, pts[:, 0], pts[:, 1]


@dataclass(frozen=True)
class CrossoverSet:
    points: list[tuple[float, float]]
    segments: list[tuple[float, float]]
    maximal_components: int
    certified: list[bool] = field(default_factory=list)

    @property
    def interior_count(self) -> int:
        return self.maximal_components - 2


@dataclass(frozen=True)
class LoopClassification:
    kind: str
    subloop_count: int
    subloop_areas: list[float]
    total_area: float
    crossovers: CrossoverSet
    loop: HysteresisLoop

    @property
    def zero_area(self) -> bool:
        return self.kind == "butterfly" or abs(self.total_area) == 0.0


KINDS = ("simple_cw", "simple_ccw", "butterfly", "multi_loop", "degenerate_line")


def _grid(lo: float, hi: float, n: int, extra: Sequence[float]) -> np.ndarray:
    pts = np.linspace(lo, hi, n)
    extra = [x for x in extra if lo < x < hi]
    if extra:
        pts = np.union1d(pts, extra)
    pts[0], pts[-1] = lo, hi
    return pts


def run_periodic(
    state: PreisachState,
    u_min: float,
    u_max: float,
    samples_per_branch: int = 4001,
    extra_points: Sequence[float] = (),
) -> HysteresisLoop:
    """Drive a triangle wave between ``u_min`` and ``u_max`` and record one period.

    The first period (current value -> u_max -> u_min) is discarded as
    transient.  ``extra_points`` are added to both branches, e.g. crossover
    abscissae so the loop can be split exactly there.
    """
    if not u_min < u_max:
        raise ValueError("need u_min < u_max")
    if samples_per_branch < 2:
        raise ValueError("samples_per_branch must be at least 2")
    st = state.advance(u_max).advance(u_min)
    grid = _grid(u_min, u_max, samples_per_branch, extra_points)
    asc = np.empty((len(grid), 2))
    for k, v in enumerate(grid):
        st = st.advance(v)
        asc[k] = v, st.current_output
    desc = np.empty((len(grid), 2))
    for k, v in enumerate(grid[::-1]):
        st = st.advance(v)
        desc[k] = v, st.current_output
    span = u_max - u_min
    t1 = (abs(u_max - state.value) + span) if u_max != state.value else span
    return HysteresisLoop(asc, desc, float(u_min), float(u_max), (t1, t1 + span, 2 * span))


def shoelace(points: np.ndarray) -> float:
    """Signed area of a closed polyline; counter-clockwise is positive."""
    x, y = points[:, 0], points[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * math.fsum(x * yn - xn * y)


def signed_area(loop: HysteresisLoop) -> float:
    return shoelace(loop.polygon())


def io_polyline(u: SampledSignal, y: SampledSignal, t0: float | None = None, t1: float | None = None) -> np.ndarray:
    """The ``(u, y)`` path over ``[t0, t1]`` as a polyline.

    Step outputs (``interpolation="previous"``) contribute both the value
    before and after each jump, so relay switches appear as vertical edges.
    """
    t0 = u.times[0] if t0 is None else t0
    t1 = u.times[-1] if t1 is None else t1
    ts = np.union1d(u.times, y.times)
    ts = np.union1d(ts[(ts >= t0) & (ts <= t1)], [t0, t1])
    pts = []
    for t in ts:
        uv = float(u.at(t))
        if y.interpolation == "previous":
            k = np.searchsorted(y.times, t, side="left")
            if 0 < k < len(y.times) and y.times[k] == t and t > t0:
                pts.append((uv, float(y.values[k - 1])))
        pts.append((uv, float(y.at(t))))
    return np.array(pts)


def crossover_integral(mu: WeightingFunction, u_min: float, u_max: float, u_c: float) -> float:
    """Integral of mu over ``u_c < alpha < u_max, u_min < beta < u_c``.

    Zero exactly at the abscissae where the two loop branches meet.
    """
    if u_c <= u_min or u_c >= u_max:
        return 0.0
    return mu.integrate_box(u_c, u_max, u_min, u_c)


def _branch_output(state: PreisachState, u_min: float, u_max: float, u: float) -> float:
    return state.advance(u_max).advance(u_min).advance(u).current_output


def find_crossovers(
    mu: WeightingFunction,
    u_min: float,
    u_max: float,
    scan_n: int = 256,
    tol: float = 1e-12,
    state: PreisachState | None = None,
) -> CrossoverSet:
    """Locate interior crossover points from the zeros of :func:`crossover_integral`.

    Sign changes on the scan lattice are polished by bisection to ``tol`` in
    ``u``; touching zeros (no sign change) are found by minimising ``|F|``
    around lattice local minima.  Consecutive lattice zeros form coincidence
    segments.  ``y_c`` is read from the ascending branch.
    """
    if scan_n < 64:
        raise ValueError("scan_n must be at least 64")
    if not u_min < u_max:
        raise ValueError("need u_min < u_max")
    if state is None:
        state = PreisachState.from_value(mu, u_min)
    F = lambda x: crossover_integral(mu, u_min, u_max, x)
    x = np.linspace(u_min, u_max, scan_n + 1)
    f = np.array([F(v) for v in x])
    scale = float(np.abs(f).max())
    zero_tol = max(tol * scale, mu.roundoff())
    is_zero = np.abs(f) <= zero_tol
    is_zero[0] = is_zero[-1] = True

    roots: list[float] = []
    segments: list[tuple[float, float]] = []

    def refine_edge(inside: float, outside: float) -> float:
        # bisection on the predicate |F| <= zero_tol
        while abs(outside - inside) > tol * max(1.0, abs(inside)):
            mid = 0.5 * (inside + outside)
            if abs(F(mid)) <= zero_tol:
                inside = mid
            else:
                outside = mid
        return inside

    # runs of zeros on the lattice
    i = 1
    n = len(x)
    while i < n - 1:
        if not is_zero[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and is_zero[j + 1]:
            j += 1
        if i == 1 or j == n - 1:
            # contiguous with an end point: part of that trivial component
            i = j + 1
            continue
        if j == i:
            roots.append(float(x[i]))
        else:
            lo = refine_edge(x[i], x[i - 1])
            hi = refine_edge(x[j], x[j + 1])
            segments.append((lo, hi))
        i = j + 1

    # sign changes between non-zero neighbours
    for k in range(1, n - 2):
        if is_zero[k] or is_zero[k + 1]:
            continue
        if f[k] * f[k + 1] < 0:
            r = optimize.bisect(F, x[k], x[k + 1], xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=200)
            roots.append(float(r))

    # touching zeros: local minima of |F| without a sign change
    af = np.abs(f)
    for k in range(2, n - 2):
        if is_zero[k - 1] or is_zero[k] or is_zero[k + 1]:
            continue
        if not (af[k] < af[k - 1] and af[k] <= af[k + 1]):
            continue
        if not (np.sign(f[k - 1]) == np.sign(f[k]) == np.sign(f[k + 1])):
            continue
        res = optimize.minimize_scalar(
            lambda v: abs(F(v)), bounds=(x[k - 1], x[k + 1]), method="bounded",
            options={"xatol": tol},
        )
        if abs(res.fun) <= zero_tol:
            roots.append(float(res.x))

    roots.sort()
    delta = (u_max - u_min) / scan_n
    certified = []
    for r in roots:
        lo, hi = r - delta, r + delta
        ok = lo > u_min and hi < u_max and abs(F(lo)) > zero_tol and abs(F(hi)) > zero_tol
        certified.append(bool(ok))
    points = [(r, float(_branch_output(state, u_min, u_max, r))) for r in roots]
    components = 2 + len(roots) + len(segments)
    return CrossoverSet(points, sorted(segments), components, certified)


def _default_area_tol(mu: WeightingFunction, u_min: float, u_max: float) -> float:
    if isinstance(mu, GridWeighting):
        return 1e-6 * (u_max - u_min) ** 2
    return 1e-9


def subloop_areas(loop: HysteresisLoop, splits: Sequence[float]) -> list[float]:
    """Shoelace areas of the pieces between consecutive split abscissae."""
    asc, desc = loop.ascending, loop.descending
    cuts = [loop.u_min, *sorted(s for s in splits if loop.u_min < s < loop.u_max), loop.u_max]
    areas = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        a = asc[(asc[:, 0] >= lo) & (asc[:, 0] <= hi)]
        d = desc[(desc[:, 0] >= lo) & (desc[:, 0] <= hi)]
        areas.append(shoelace(np.vstack([a, d])))
    return areas


def classify(
    mu: WeightingFunction,
    u_min: float,
    u_max: float,
    scan_n: int = 256,
    tol: float = 1e-12,
    area_tol: float | None = None,
    samples_per_branch: int = 4001,
    state: PreisachState | None = None,
) -> LoopClassification:
    """Classify the loop of a single min/max periodic input.

    ``multi_loop`` needs an interior crossover component certified by
    non-zero flanking probes; ``butterfly`` is the two-subloop case with zero
    total area.  Without interior crossovers the loop is simple (orientation
    from the area sign) or a degenerate line.
    """
    if state is None:
        state = PreisachState.from_value(mu, u_min)
    if area_tol is None:
        area_tol = _default_area_tol(mu, u_min, u_max)
    cs = find_crossovers(mu, u_min, u_max, scan_n, tol, state)
    splits = [p[0] for p in cs.points]
    for lo, hi in cs.segments:
        splits += [lo, hi]
    loop = run_periodic(state, u_min, u_max, samples_per_branch, splits)
    y = loop.polygon()[:, 1]
    if float(np.ptp(y)) <= max(mu.roundoff(), 1e-14):
        raise NoLoop(f"constant output {y[0]!r} over [{u_min}, {u_max}]")
    total = signed_area(loop)
    pieces = subloop_areas(loop, splits)
    seg_idx = set()
    cuts = [u_min, *sorted(s for s in splits if u_min < s < u_max), u_max]
    for k, (lo, hi) in enumerate(zip(cuts[:-1], cuts[1:])):
        if any(abs(lo - s0) <= tol and abs(hi - s1) <= tol for s0, s1 in cs.segments):
            seg_idx.add(k)
    areas = [a for k, a in enumerate(pieces) if k not in seg_idx]
    interior = any(cs.certified) or bool(cs.segments)
    if interior:
        if abs(total) <= area_tol and len(areas) == 2:
            kind = "butterfly"
        else:
            kind = "multi_loop"
    elif abs(total) <= area_tol:
        kind = "degenerate_line"
    else:
        kind = "simple_ccw" if total > 0 else "simple_cw"
    return LoopClassification(kind, len(areas), areas, total, cs, loop)


def design_zero_area_input(
    mu: WeightingFunction, alpha1: float, beta1: float, tol: float = 1e-12, scan_n: int = 512
) -> tuple[float, float]:
    """Widen ``[beta1, alpha1]`` until the loop's signed area vanishes.

    Negative-dominated areas are cancelled by raising ``u_max``, positive ones
    by lowering ``u_min``; the root is bracketed on a scan and bisected.
    """
    if not alpha1 > beta1:
        raise ValueError("need alpha1 > beta1")
    s = mu.support
    width = alpha1 - beta1
    scale = max(mu.max_abs, 1e-300) * max(width, 1.0) ** 3
    area = lambda lo, hi: integrate_triangle_weighted(mu, lo, hi)
    a0 = area(beta1, alpha1)
    if abs(a0) <= tol * scale:
        return float(beta1), float(alpha1)
    if a0 < 0:
        limit = max(s.a_hi, alpha1)
        h = lambda lam: area(beta1, lam)
        lams = np.linspace(alpha1, limit, scan_n + 1)
    else:
        limit = min(s.b_lo, beta1)
        h = lambda lam: area(lam, alpha1)
        lams = np.linspace(beta1, limit, scan_n + 1)
    prev = a0
    for lo_l, hi_l in zip(lams[:-1], lams[1:]):
        cur = h(hi_l)
        if abs(cur) <= tol * scale:
            root = hi_l
            break
        if np.sign(cur) != np.sign(prev):
            root = optimize.bisect(h, lo_l, hi_l, xtol=tol * max(1.0, abs(hi_l)), maxiter=200)
            break
        prev = cur
    else:
        raise MomentExhausted(
            f"area {a0:.6g} of [{beta1}, {alpha1}] cannot be cancelled inside the support"
        )
    if a0 < 0:
        return float(beta1), float(root)
    return float(root), float(alpha1)
