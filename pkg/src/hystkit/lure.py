"""Lur'e systems with Preisach feedback: frequency-domain check and simulation.

The plant is ``x' = A x + B w, z = C x`` closed with ``u = z, w = -y`` where
``y`` is the Preisach output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import SingularAtFrequency, StepSizeUnderflow
from .operator import InitialValueMismatch, PreisachState
from .plane import MemoryInterface, interface_from_staircase, interface_update
from .weighting import WeightingFunction


def _kalman_rank(K: np.ndarray) -> int:
    s = np.linalg.svd(K, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > 1e-10 * s[0]))


@dataclass(frozen=True)
class LtiSystem:
    """Single-input single-output state-space plant; B and C are stored flat."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float).reshape(-1)
        C = np.asarray(self.C, dtype=float).reshape(-1)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got shape {A.shape}")
        if B.shape != (n,) or C.shape != (n,):
            raise ValueError(f"B and C must have {n} entries, got {B.size} and {C.size}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B)) and np.all(np.isfinite(C))):
            raise ValueError("system matrices must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def order(self) -> int:
        return self.A.shape[0]

    @property
    def controllable(self) -> bool:
        cols = [self.B]
        for _ in range(self.order - 1):
            cols.append(self.A @ cols[-1])
        return _kalman_rank(np.column_stack(cols)) == self.order

    @property
    def observable(self) -> bool:
        rows = [self.C]
        for _ in range(self.order - 1):
            rows.append(rows[-1] @ self.A)
        return _kalman_rank(np.vstack(rows)) == self.order


def transfer_function(sys: LtiSystem, omega: float) -> complex:
    """``G(j omega) = C (j omega I - A)^-1 B``."""
    n = sys.order
    M = 1j * omega * np.eye(n) - sys.A
    if np.min(np.abs(np.linalg.eigvals(sys.A) - 1j * omega)) <= 1e-12 * (1.0 + np.linalg.norm(sys.A)):
        raise SingularAtFrequency(f"j*{omega} is an eigenvalue of A")
    try:
        v = np.linalg.solve(M, sys.B.astype(complex))
    except np.linalg.LinAlgError as exc:
        raise SingularAtFrequency(f"(j*{omega} I - A) is singular") from exc
    return complex(sys.C @ v)


def gbar(sys: LtiSystem, lambda_m: float, lambda_M: float, omega: float) -> complex:
    """Sector-transformed transfer function ``(1 + lM G) / (1 + lm G)``."""
    G = transfer_function(sys, omega)
    den = 1.0 + lambda_m * G
    if den == 0:
        raise SingularAtFrequency(f"1 + lambda_m G vanishes at omega={omega}")
    return (1.0 + lambda_M * G) / den


@dataclass(frozen=True)
class StabilityReport:
    lambda_m: float
    lambda_M: float
    spr_ok: bool
    min_real_part: float
    omega_at_min: float
    omega_grid: dict
    hypothesis_flags: dict
    closed_loop_poles: list[complex]
    poles_stable: bool
    infinity_limit: float
    poles_on_grid: list[float] = field(default_factory=list)


def spr_check(
    sys: LtiSystem,
    lambda_m: float,
    lambda_M: float,
    omega_max: float = 1e3,
    grid_n: int = 4000,
) -> StabilityReport:
    """Frequency-domain sector condition on ``Gbar``.

    ``Re Gbar(j omega)`` is scanned on a log plus linear grid over
    ``[0, omega_max]`` and each local minimum is polished.  The poles of
    ``Gbar`` are the eigenvalues of ``A - lambda_m B C``; they must lie in the
    open left half-plane.  ``G`` is strictly proper, so ``Gbar -> 1`` as
    ``omega -> inf``.
    """
    if omega_max <= 0 or grid_n < 16:
        raise ValueError("need omega_max > 0 and grid_n >= 16")
    flags = {
        "controllable": sys.controllable,
        "observable": sys.observable,
        "lambda_M_positive": lambda_M > 0,
        "lambda_m_negative": lambda_m < 0,
    }
    poles = np.linalg.eigvals(sys.A - lambda_m * np.outer(sys.B, sys.C))
    poles_stable = bool(np.all(poles.real < 0))

    half = grid_n // 2
    lo_exp = -4.0
    omegas = np.unique(np.concatenate([
        [0.0], np.logspace(lo_exp, math.log10(omega_max), half), np.linspace(0.0, omega_max, half)
    ]))
    on_grid: list[float] = []

    def re_gbar(w: float) -> float:
        try:
            return gbar(sys, lambda_m, lambda_M, w).real
        except SingularAtFrequency:
            on_grid.append(float(w))
            return -math.inf

    vals = np.array([re_gbar(w) for w in omegas])
    best_w, best = float(omegas[np.argmin(vals)]), float(vals.min())
    interior = np.nonzero((vals[1:-1] <= vals[:-2]) & (vals[1:-1] <= vals[2:]))[0] + 1
    for k in interior:
        if not math.isfinite(vals[k]):
            continue
        res = optimize.minimize_scalar(
            re_gbar, bounds=(omegas[k - 1], omegas[k + 1]), method="bounded", options={"xatol": 1e-12}
        )
        if res.fun < best:
            best, best_w = float(res.fun), float(res.x)
    inf_limit = 1.0
    if inf_limit < best:
        best, best_w = inf_limit, math.inf
    ok = all(flags.values()) and poles_stable and best > 0 and inf_limit > 0 and not on_grid
    return StabilityReport(
        lambda_m=float(lambda_m),
        lambda_M=float(lambda_M),
        spr_ok=bool(ok),
        min_real_part=best,
        omega_at_min=best_w,
        omega_grid={"omega_max": omega_max, "points": int(len(omegas)), "log_from": 10.0**lo_exp,
                    "refined_minima": int(len(interior))},
        hypothesis_flags=flags,
        closed_loop_poles=[complex(p) for p in poles],
        poles_stable=poles_stable,
        infinity_limit=inf_limit,
        poles_on_grid=sorted(set(on_grid)),
    )


# --------------------------------------------------------------------------
# simulation


@dataclass(frozen=True)
class LureTrajectory:
    times: np.ndarray
    state_matrix: np.ndarray
    u_trace: np.ndarray
    y_trace: np.ndarray
    interface_snapshots: list[tuple[float, MemoryInterface]]
    equilibrium_residual_trace: np.ndarray
    converged: bool
    converged_at: float
    tolerance: float
    reversals: int

    @property
    def final_residual(self) -> float:
        return float(self.equilibrium_residual_trace[-1])


def example_initial_interface() -> MemoryInterface:
    """Interface with tail at alpha = 1, a flat step at beta = -0.9 and a drop to (0, 0)."""
    return interface_from_staircase([(1.0, -0.9), (0.0, -0.9), (0.0, 0.0)])


def _rk4(f, x, h):
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def simulate_lure(
    sys: LtiSystem,
    x0,
    mu: WeightingFunction,
    L0: MemoryInterface,
    t_final: float,
    dt_max: float = 1e-2,
    residual_tol: float = 1e-6,
    hold_fraction: float = 0.05,
    snapshot_every: int = 100,
) -> LureTrajectory:
    """Integrate the closed loop with classical RK4 and reversal splitting.

    Within a step every stage advances a frozen copy of the interface to its
    own ``u = C x``; the committed interface moves once per accepted step.
    When ``d(Cx)/dt`` changes sign over a step, the reversal instant is
    bisected and the step is split there so each step is monotone in ``u``.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (sys.order,):
        raise ValueError(f"x0 must have {sys.order} entries")
    if not (t_final > 0 and dt_max > 0):
        raise ValueError("t_final and dt_max must be positive")
    u0 = float(sys.C @ x0)
    if abs(u0 - L0.value) > 1e-9 * max(1.0, abs(u0)):
        raise InitialValueMismatch(f"C x0 = {u0} but the interface ends at {L0.value}")
    A, B, C = sys.A, sys.B, sys.C
    state = PreisachState(mu, L0)
    h_min = 1e-12 * t_final

    def rhs_from(frozen: PreisachState):
        return lambda x: A @ x - B * frozen.advance(float(C @ x)).current_output

    def udot(x, st: PreisachState) -> float:
        return float(C @ (A @ x - B * st.current_output))

    scale_u = 1e-12 * (1.0 + float(np.linalg.norm(x0)) * float(np.linalg.norm(C)))
    times, xs, us, ys, res = [0.0], [x0], [u0], [state.current_output], []
    res.append(float(np.linalg.norm(A @ x0 - B * state.current_output)))
    snaps = [(0.0, state.interface)]
    t, x = 0.0, x0
    reversals = 0
    tiny_run = 0
    while t < t_final - h_min:
        h = min(dt_max, t_final - t)
        f = rhs_from(state)
        x_new = _rk4(f, x, h)
        st_new = state.advance(float(C @ x_new))
        d0, d1 = udot(x, state), udot(x_new, st_new)
        if d0 * d1 < 0 and abs(d0) > scale_u and abs(d1) > scale_u:
            lo, hi = 0.0, h
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                xm = _rk4(f, x, mid)
                dm = udot(xm, state.advance(float(C @ xm)))
                if dm * d0 > 0:
                    lo = mid
                else:
                    hi = mid
                if hi - lo <= 1e-14 * max(1.0, t):
                    break
            if hi > h_min:
                h = hi
                x_new = _rk4(f, x, h)
                st_new = state.advance(float(C @ x_new))
                reversals += 1
            if h <= h_min:
                tiny_run += 1
                if tiny_run > 1000:
                    raise StepSizeUnderflow(f"reversal splitting stalled at t={t}")
            else:
                tiny_run = 0
        t, x, state = t + h, x_new, st_new
        y = state.current_output
        times.append(t)
        xs.append(x)
        us.append(float(C @ x))
        ys.append(y)
        res.append(float(np.linalg.norm(A @ x - B * y)))
        if len(times) % snapshot_every == 0:
            snaps.append((t, state.interface))
    if snaps[-1][0] != t:
        snaps.append((t, state.interface))

    times_a = np.array(times)
    res_a = np.array(res)
    tol = residual_tol * (1.0 + float(np.linalg.norm(x0)))
    above = np.nonzero(res_a >= tol)[0]
    start = 0 if above.size == 0 else above[-1] + 1
    if start < len(times_a):
        converged_at = float(times_a[start])
        converged = (times_a[-1] - converged_at) >= hold_fraction * t_final
    else:
        converged_at, converged = math.inf, False
    return LureTrajectory(
        times=times_a,
        state_matrix=np.vstack(xs),
        u_trace=np.array(us),
        y_trace=np.array(ys),
        interface_snapshots=snaps,
        equilibrium_residual_trace=res_a,
        converged=bool(converged),
        converged_at=converged_at,
        tolerance=tol,
        reversals=reversals,
    )


EXAMPLE_A = [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-26.0, -28.0, -3.0]]
EXAMPLE_B = [0.0, 0.0, -26.0]
EXAMPLE_C = [1.0, 0.0, 0.0]
EXAMPLE_X0 = [0.8, -1.0, -1.0]


def example_plant() -> LtiSystem:
    return LtiSystem(np.array(EXAMPLE_A), np.array(EXAMPLE_B), np.array(EXAMPLE_C))


def example_start_interface(x0=EXAMPLE_X0) -> MemoryInterface:
    """:func:`example_initial_interface` moved to the plant's initial output ``C x0``.

    That staircase ends at 0 while ``C x0 = 0.8``; applying the input jump
    0 -> 0.8 switches the relays below ``alpha = 0.8`` as they would be at
    ``t = 0``.
    """
    L = example_initial_interface()
    return interface_update(L, float(np.asarray(EXAMPLE_C) @ np.asarray(x0, dtype=float)))
