"""Preisach half-plane geometry and the memory interface.

The interface is stored by its outer (dominant) corners: points ``(a_k, b_k)``
with strictly decreasing ``a`` and strictly increasing ``b``.  A relay at
``(alpha, beta)`` is in the +1 state iff some corner dominates it, i.e.
``alpha <= a_k`` and ``beta <= b_k``.  The first corner also carries the tail
of the staircase (the vertical ray ``alpha = a_0, beta -> -inf``); a first
corner with ``a_0 = +inf`` encodes a horizontal tail instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

MERGE_TOL = 1e-12


class InterfaceError(ValueError):
    """Raised for staircases that do not describe a valid memory interface."""


class NonMonotoneStaircase(InterfaceError):
    pass


class PlanePoint(NamedTuple):
    alpha: float
    beta: float


@dataclass(frozen=True)
class MemoryInterface:
    """Monotonically decreasing staircase splitting P into +1 / -1 relays.

    ``corners`` are the outer corners, ``value`` the current input; the
    staircase ends on the diagonal at ``(value, value)``.
    """

    corners: tuple[tuple[float, float], ...]
    value: float

    def __post_init__(self):
        if not self.corners:
            raise InterfaceError("interface needs at least one corner")
        for (a1, b1), (a2, b2) in zip(self.corners, self.corners[1:]):
            if not (a2 < a1 and b2 > b1):
                raise NonMonotoneStaircase(
                    f"corners ({a1}, {b1}) -> ({a2}, {b2}) are not a decreasing staircase"
                )
        a, b = self.corners[-1]
        v = self.value
        on_diag = abs(a - v) <= MERGE_TOL and abs(b - v) <= MERGE_TOL
        after_down = abs(b - v) <= MERGE_TOL and a > v
        if not (on_diag or after_down):
            raise InterfaceError(
                f"last corner ({a}, {b}) inconsistent with current input {v}"
            )

    def vertices(self) -> list[PlanePoint]:
        """Full staircase polyline, alternating horizontal and vertical moves."""
        out = [PlanePoint(*self.corners[0])]
        for a, b in self.corners[1:]:
            out.append(PlanePoint(a, out[-1].beta))
            out.append(PlanePoint(a, b))
        if out[-1] != (self.value, self.value):
            out.append(PlanePoint(self.value, self.value))
        return out

    def plus_boxes(self) -> list[tuple[float, float, float, float]]:
        """Disjoint boxes ``(a_lo, a_hi, b_lo, b_hi)`` whose union with P is P+."""
        boxes = []
        b_prev = -math.inf
        for a, b in self.corners:
            boxes.append((-math.inf, a, b_prev, b))
            b_prev = b
        return boxes

    def relay_states(self, alpha, beta) -> np.ndarray:
        """Vectorised relay state (+1/-1) for points of P."""
        alpha = np.asarray(alpha, dtype=float)
        beta = np.asarray(beta, dtype=float)
        plus = np.zeros(np.broadcast(alpha, beta).shape, dtype=bool)
        for a, b in self.corners:
            plus |= (alpha <= a) & (beta <= b)
        return np.where(plus, 1, -1)

    def update(self, v_new: float) -> "MemoryInterface":
        return interface_update(self, v_new)


def initial_interface_from_value(v: float) -> MemoryInterface:
    """Virgin interface through ``(v, v)``: relays with ``alpha <= v`` are +1."""
    v = float(v)
    return MemoryInterface(((v, v),), v)


def _outer_corners(points: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    kept: list[tuple[float, float]] = []
    for a, b in points:
        # drop anything dominated by the new point, then skip if dominated itself
        while kept and kept[-1][0] <= a + MERGE_TOL and kept[-1][1] <= b + MERGE_TOL:
            kept.pop()
        if kept and kept[-1][0] >= a - MERGE_TOL and kept[-1][1] >= b - MERGE_TOL:
            continue
        kept.append((a, b))
    return kept


def interface_from_staircase(corners: Iterable[Sequence[float]]) -> MemoryInterface:
    """Build an interface from staircase vertices ending on the diagonal.

    Vertices must be ordered along the staircase: alpha non-increasing and
    beta non-decreasing.  Zero-length segments and inner vertices are dropped.
    """
    pts = [(float(a), float(b)) for a, b in corners]
    if not pts:
        raise InterfaceError("empty staircase")
    for (a1, b1), (a2, b2) in zip(pts, pts[1:]):
        if a2 > a1 + MERGE_TOL or b2 < b1 - MERGE_TOL:
            raise NonMonotoneStaircase(
                f"vertex ({a2}, {b2}) after ({a1}, {b1}) breaks the decreasing staircase"
            )
    a_last, b_last = pts[-1]
    if abs(a_last - b_last) > MERGE_TOL:
        raise InterfaceError(
            f"staircase must end on the diagonal (u0, u0), got ({a_last}, {b_last})"
        )
    v = b_last
    pts[-1] = (v, v)
    for a, b in pts:
        if a < b - MERGE_TOL:
            raise InterfaceError(f"vertex ({a}, {b}) lies outside P")
    outer = _outer_corners(pts)
    a, b = outer[-1]
    if abs(b - v) <= MERGE_TOL:
        outer[-1] = (max(a, v), v)
    return MemoryInterface(tuple(outer), v)


def interface_update(L: MemoryInterface, v_new: float) -> MemoryInterface:
    """Apply a monotone input move from ``L.value`` to ``v_new`` (wiping-out)."""
    v_new = float(v_new)
    v = L.value
    if v_new == v:
        return L
    if v_new > v:
        kept = [c for c in L.corners if c[0] > v_new + MERGE_TOL]
        kept.append((v_new, v_new))
        return MemoryInterface(tuple(kept), v_new)
    kept = []
    for a, b in L.corners:
        if b < v_new - MERGE_TOL:
            kept.append((a, b))
        else:
            # first corner reaching above v_new is clipped, the rest are wiped
            kept.append((a, v_new))
            break
    return MemoryInterface(tuple(kept), v_new)


def relay_state_at(L: MemoryInterface, p: Sequence[float]) -> int:
    """+1 iff the interface meets the closed upper-right quadrant of ``p``."""
    alpha, beta = float(p[0]), float(p[1])
    return 1 if any(alpha <= a and beta <= b for a, b in L.corners) else -1
