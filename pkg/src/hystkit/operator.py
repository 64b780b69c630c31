"""Relay operators and Preisach operator evaluation.

Two independent evaluation paths are provided: :func:`preisach_eval` works
on the memory interface with exact region integrals, and
:func:`preisach_eval_oracle` simulates a lattice of individual relays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .plane import MemoryInterface, initial_interface_from_value, interface_update
from .weighting import WeightingFunction


class InitialValueMismatch(ValueError):
    """Input does not start on the interface's diagonal point."""


@dataclass(frozen=True)
class SampledSignal:
    """Time-stamped scalar signal.

    ``interpolation`` is ``"linear"`` for inputs and Preisach outputs, and
    ``"previous"`` (right-continuous steps) for relay outputs.
    """

    times: np.ndarray
    values: np.ndarray
    interpolation: Literal["linear", "previous"] = "linear"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or v.ndim != 1 or len(t) != len(v):
            raise ValueError("times and values must be 1-D sequences of equal length")
        if len(t) == 0:
            raise ValueError("signal must not be empty")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_values(cls, values: Sequence[float], dt: float = 1.0) -> "SampledSignal":
        values = np.asarray(values, dtype=float)
        return cls(np.arange(len(values)) * dt, values)

    def __len__(self) -> int:
        return len(self.times)

    def at(self, t):
        if self.interpolation == "linear":
            return np.interp(t, self.times, self.values)
        idx = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 1)
        return self.values[idx]

    def truncated(self, tau: float) -> "SampledSignal":
        """The signal on ``[t0, tau]``, with an interpolated end sample."""
        keep = self.times < tau
        times = np.append(self.times[keep], tau)
        values = np.append(self.values[keep], self.at(tau))
        return SampledSignal(times, values, self.interpolation)


# --------------------------------------------------------------------------
# relays


@dataclass(frozen=True)
class RelayConfig:
    alpha: float
    beta: float
    orientation: Literal["ccw", "cw"] = "ccw"
    r0: int = -1

    def __post_init__(self):
        if not self.alpha > self.beta:
            raise ValueError("relay needs alpha > beta")
        if self.r0 not in (-1, 1):
            raise ValueError("r0 must be -1 or +1")
        if self.orientation not in ("ccw", "cw"):
            raise ValueError("orientation must be 'ccw' or 'cw'")


def relay_eval(cfg: RelayConfig, u: SampledSignal) -> SampledSignal:
    """Step output of a single relay; switches happen strictly past a threshold."""
    hi_val = 1.0 if cfg.orientation == "ccw" else -1.0
    lo_val = -hi_val
    v0 = u.values[0]
    if v0 > cfg.alpha:
        state = hi_val
    elif v0 < cfg.beta:
        state = lo_val
    else:
        state = float(cfg.r0) if cfg.orientation == "ccw" else -float(cfg.r0)
    times, values = [u.times[0]], [state]
    for (t0, t1), (a, b) in zip(
        zip(u.times[:-1], u.times[1:]), zip(u.values[:-1], u.values[1:])
    ):
        target = None
        if b > a and b > cfg.alpha and state != hi_val:
            level, target = cfg.alpha, hi_val
        elif b < a and b < cfg.beta and state != lo_val:
            level, target = cfg.beta, lo_val
        if target is not None:
            frac = min(max((level - a) / (b - a), 0.0), 1.0)
            ts = t0 + frac * (t1 - t0)
            state = target
            if ts > times[-1]:
                times.append(ts)
                values.append(state)
            else:
                values[-1] = state
        if t1 > times[-1]:
            times.append(t1)
            values.append(state)
    return SampledSignal(np.array(times), np.array(values), "previous")


# --------------------------------------------------------------------------
# Preisach operator


def preisach_output(mu: WeightingFunction, L: MemoryInterface) -> float:
    """Operator output for a given interface: ``int_{P+} mu - int_{P-} mu``."""
    plus = math.fsum(mu.integrate_box(*box) for box in L.plus_boxes())
    return 2.0 * plus - mu.total()


@dataclass(frozen=True)
class PreisachState:
    mu: WeightingFunction
    interface: MemoryInterface
    current_output: float = field(default=float("nan"))

    def __post_init__(self):
        if math.isnan(self.current_output):
            object.__setattr__(self, "current_output", preisach_output(self.mu, self.interface))

    @classmethod
    def from_value(cls, mu: WeightingFunction, v: float) -> "PreisachState":
        return cls(mu, initial_interface_from_value(v))

    @property
    def value(self) -> float:
        return self.interface.value

    def advance(self, v_new: float) -> "PreisachState":
        L = interface_update(self.interface, v_new)
        if L is self.interface:
            return self
        return PreisachState(self.mu, L, preisach_output(self.mu, L))


def _default_step(mu: WeightingFunction) -> float:
    s = mu.support
    width = max(s.a_hi - s.a_lo, s.b_hi - s.b_lo)
    return width / 256 if math.isfinite(width) and width > 0 else math.inf


def preisach_eval(
    state: PreisachState, u: SampledSignal, max_step: float | None = None
) -> tuple[SampledSignal, PreisachState]:
    """Evaluate the operator along ``u`` starting from ``state``.

    The output is sampled at every input breakpoint and at extra sub-steps so
    that no step moves the input by more than ``max_step`` (default: 1/256 of
    the support width).  Each output value is a function of the current
    interface only, so the result is independent of the sampling.
    """
    v0 = float(u.values[0])
    if abs(v0 - state.value) > 1e-12 * max(1.0, abs(v0)):
        raise InitialValueMismatch(
            f"input starts at {v0} but the interface ends at ({state.value}, {state.value})"
        )
    if max_step is None:
        max_step = _default_step(state.mu)
    times = [u.times[0]]
    out = [state.current_output]
    for (t0, t1), (a, b) in zip(
        zip(u.times[:-1], u.times[1:]), zip(u.values[:-1], u.values[1:])
    ):
        n = 1 if b == a else max(1, math.ceil(abs(b - a) / max_step))
        for k in range(1, n + 1):
            if k == n:
                tk, vk = t1, b
            else:
                frac = k / n
                tk, vk = t0 + frac * (t1 - t0), a + frac * (b - a)
            state = state.advance(vk)
            times.append(tk)
            out.append(state.current_output)
    return SampledSignal(np.array(times), np.array(out)), state


def preisach_eval_oracle(
    mu: WeightingFunction, L0: MemoryInterface, u: SampledSignal, grid_n: int = 128
) -> SampledSignal:
    """Midpoint-rule relay lattice over the support: the independent reference path.

    Each cell of a ``grid_n x grid_n`` lattice on the support box whose centre
    lies in P carries one counter-clockwise relay, initialised from ``L0`` and
    weighted by ``mu(centre) * cell_area``.  Output is sampled at ``u.times``.
    """
    if grid_n < 16:
        raise ValueError("grid_n must be at least 16")
    s = mu.support
    if not (s.bounded and not s.empty):
        return SampledSignal(u.times, np.zeros(len(u)))
    ac = s.a_lo + (np.arange(grid_n) + 0.5) * (s.a_hi - s.a_lo) / grid_n
    bc = s.b_lo + (np.arange(grid_n) + 0.5) * (s.b_hi - s.b_lo) / grid_n
    A, B = np.meshgrid(ac, bc, indexing="ij")
    keep = A > B
    alpha, beta = A[keep], B[keep]
    cell = (s.a_hi - s.a_lo) * (s.b_hi - s.b_lo) / grid_n**2
    weights = mu.density(alpha, beta) * cell
    state = L0.relay_states(alpha, beta).astype(float)
    out = np.empty(len(u))
    for k, v in enumerate(u.values):
        state[alpha < v] = 1.0
        state[beta > v] = -1.0
        out[k] = np.sum(weights * state)
    return SampledSignal(u.times, out)
