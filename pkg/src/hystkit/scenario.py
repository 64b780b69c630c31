"""Declarative scenarios: validation, construction and task execution."""

from __future__ import annotations

from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from . import loops, lure
from .operator import PreisachState, SampledSignal, preisach_eval
from .plane import MemoryInterface, initial_interface_from_value, interface_from_staircase, interface_update
from .weighting import (
    BUILTINS,
    Box,
    GridWeighting,
    RegionWeighting,
    WeightingFunction,
    lambda_bounds,
    make_builtin,
)

TASKS = ("eval", "loop", "crossover", "classify", "design", "bounds", "spr", "lure")

NAMED_INTERFACES = {
    "lure_example": (
        "tail at alpha=1, step at beta=-0.9, drop to (0,0)",
        lure.example_initial_interface,
    ),
}


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class BuiltinWeightingSpec(_Strict):
    kind: Literal["builtin"]
    name: str
    params: dict[str, float] = {}

    @field_validator("name")
    @classmethod
    def _known(cls, v: str) -> str:
        if v not in BUILTINS:
            raise ValueError(f"unknown builtin {v!r}; known: {sorted(BUILTINS)}")
        return v

    @model_validator(mode="after")
    def _params(self):
        unknown = set(self.params) - set(BUILTINS[self.name].params)
        if unknown:
            raise ValueError(f"{self.name} takes no parameters {sorted(unknown)}")
        return self


class RegionSpec(_Strict):
    vertices: list[tuple[float, float]] = Field(min_length=3)
    density: float


class RegionsWeightingSpec(_Strict):
    kind: Literal["regions"]
    regions: list[RegionSpec]
    support: Optional[tuple[float, float, float, float]] = None


class GridWeightingSpec(_Strict):
    kind: Literal["grid"]
    support: tuple[float, float, float, float]
    values: list[list[float]]
    interpolation: Literal["nearest", "bilinear"] = "nearest"


WeightingSpec = Annotated[
    Union[BuiltinWeightingSpec, RegionsWeightingSpec, GridWeightingSpec], Field(discriminator="kind")
]


class InterfaceSpec(_Strict):
    value: Optional[float] = None
    staircase: Optional[list[tuple[float, float]]] = None
    named: Optional[Literal["lure_example"]] = None

    @model_validator(mode="after")
    def _exactly_one(self):
        given = [k for k in ("value", "staircase", "named") if getattr(self, k) is not None]
        if len(given) != 1:
            raise ValueError("interface needs exactly one of value, staircase, named")
        return self


class InputSpec(_Strict):
    values: list[float] = Field(min_length=1)
    times: Optional[list[float]] = None
    dt: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def _lengths(self):
        if self.times is not None and len(self.times) != len(self.values):
            raise ValueError("times and values must have the same length")
        return self


class PlantSpec(_Strict):
    A: list[list[float]]
    B: list[float]
    C: list[float]

    @model_validator(mode="after")
    def _dims(self):
        n = len(self.A)
        if n == 0 or any(len(row) != n for row in self.A):
            raise ValueError("A must be a non-empty square matrix")
        if len(self.B) != n or len(self.C) != n:
            raise ValueError(f"B and C must have {n} entries")
        return self


class Scenario(_Strict):
    name: str = Field(pattern=r"^[A-Za-z0-9_.-]+$")
    task: Literal["eval", "loop", "crossover", "classify", "design", "bounds", "spr", "lure"]
    weighting: WeightingSpec
    interface: Optional[InterfaceSpec] = None
    align_interface: bool = False
    input: Optional[InputSpec] = None
    u_min: Optional[float] = None
    u_max: Optional[float] = None
    alpha1: Optional[float] = None
    beta1: Optional[float] = None
    samples_per_branch: int = Field(default=4001, ge=2)
    scan_n: int = Field(default=256, ge=64)
    tol: float = Field(default=1e-12, gt=0)
    area_tol: Optional[float] = Field(default=None, gt=0)
    bounds_grid_n: int = Field(default=256, ge=64)
    max_step: Optional[float] = Field(default=None, gt=0)
    plant: Optional[PlantSpec] = None
    lambda_m: Optional[float] = None
    lambda_M: Optional[float] = None
    omega_max: float = Field(default=1e3, gt=0)
    omega_grid_n: int = Field(default=4000, ge=16)
    x0: Optional[list[float]] = None
    t_final: float = Field(default=50.0, gt=0)
    dt_max: float = Field(default=1e-2, gt=0)
    residual_tol: float = Field(default=1e-6, gt=0)
    output: Optional[str] = None

    @model_validator(mode="after")
    def _task_fields(self):
        need = {
            "eval": ["input"],
            "loop": ["u_min", "u_max"],
            "crossover": ["u_min", "u_max"],
            "classify": ["u_min", "u_max"],
            "design": ["alpha1", "beta1"],
            "bounds": [],
            "spr": ["plant"],
            "lure": ["plant", "x0"],
        }[self.task]
        missing = [k for k in need if getattr(self, k) is None]
        if missing:
            raise ValueError(f"task {self.task!r} needs {missing}")
        if self.u_min is not None and self.u_max is not None and not self.u_min < self.u_max:
            raise ValueError("need u_min < u_max")
        if self.alpha1 is not None and self.beta1 is not None and not self.alpha1 > self.beta1:
            raise ValueError("need alpha1 > beta1")
        if self.task == "lure" and len(self.x0) != len(self.plant.A):
            raise ValueError(f"x0 must have {len(self.plant.A)} entries")
        return self


# --------------------------------------------------------------------------
# construction


def build_weighting(spec) -> WeightingFunction:
    if spec.kind == "builtin":
        return make_builtin(spec.name, **spec.params)
    if spec.kind == "regions":
        support = Box(*spec.support) if spec.support is not None else None
        return RegionWeighting([(r.vertices, r.density) for r in spec.regions], support=support)
    return GridWeighting(Box(*spec.support), np.array(spec.values, dtype=float), spec.interpolation)


def build_interface(spec: InterfaceSpec | None, default_value: float) -> MemoryInterface:
    if spec is None:
        return initial_interface_from_value(default_value)
    if spec.value is not None:
        return initial_interface_from_value(spec.value)
    if spec.staircase is not None:
        return interface_from_staircase(spec.staircase)
    return NAMED_INTERFACES[spec.named][1]()


def build_plant(spec: PlantSpec) -> lure.LtiSystem:
    return lure.LtiSystem(np.array(spec.A), np.array(spec.B), np.array(spec.C))


# --------------------------------------------------------------------------
# tasks; each returns (results dict, trace columns dict)


def _loop_trace(loop: loops.HysteresisLoop) -> dict:
    t, u, y = loop.trace()
    return {"t": t, "u": u, "y": y}


def _crossover_dict(cs: loops.CrossoverSet) -> dict:
    return {
        "points": [[u, y] for u, y in cs.points],
        "segments": [list(s) for s in cs.segments],
        "maximal_components": cs.maximal_components,
        "certified": list(cs.certified),
    }


def _start_state(sc: Scenario, mu, default_value: float) -> PreisachState:
    L = build_interface(sc.interface, default_value)
    if sc.align_interface:
        L = interface_update(L, default_value)
    return PreisachState(mu, L)


def _task_eval(sc, mu):
    inp = sc.input
    sig = SampledSignal(inp.times, inp.values) if inp.times is not None else SampledSignal.from_values(inp.values, inp.dt)
    state = _start_state(sc, mu, sig.values[0])
    y, final = preisach_eval(state, sig, sc.max_step)
    u = np.interp(y.times, sig.times, sig.values)
    res = {
        "samples": len(y),
        "y_final": float(final.current_output),
        "y_min": float(y.values.min()),
        "y_max": float(y.values.max()),
        "final_interface": [list(c) for c in final.interface.corners],
    }
    return res, {"t": y.times, "u": u, "y": y.values}


def _task_loop(sc, mu):
    state = _start_state(sc, mu, sc.u_min)
    loop = loops.run_periodic(state, sc.u_min, sc.u_max, sc.samples_per_branch)
    res = {"total_area": loops.signed_area(loop), "period_info": list(loop.period_info)}
    return res, _loop_trace(loop)


def _task_crossover(sc, mu):
    state = _start_state(sc, mu, sc.u_min)
    cs = loops.find_crossovers(mu, sc.u_min, sc.u_max, sc.scan_n, sc.tol, state)
    extra = [p[0] for p in cs.points] + [x for s in cs.segments for x in s]
    loop = loops.run_periodic(state, sc.u_min, sc.u_max, sc.samples_per_branch, extra)
    return {"crossovers": _crossover_dict(cs)}, _loop_trace(loop)


def _classification_dict(c: loops.LoopClassification) -> dict:
    return {
        "kind": c.kind,
        "subloop_count": c.subloop_count,
        "subloop_areas": list(c.subloop_areas),
        "total_area": c.total_area,
        "zero_area": c.zero_area,
        "crossovers": _crossover_dict(c.crossovers),
    }


def _task_classify(sc, mu):
    state = _start_state(sc, mu, sc.u_min)
    c = loops.classify(mu, sc.u_min, sc.u_max, sc.scan_n, sc.tol, sc.area_tol, sc.samples_per_branch, state)
    return {"classification": _classification_dict(c), "total_area": c.total_area}, _loop_trace(c.loop)


def _task_design(sc, mu):
    u_min, u_max = loops.design_zero_area_input(mu, sc.alpha1, sc.beta1, sc.tol)
    state = _start_state(sc, mu, u_min)
    loop = loops.run_periodic(state, u_min, u_max, sc.samples_per_branch)
    res = {"u_min": u_min, "u_max": u_max, "total_area": loops.signed_area(loop)}
    return res, _loop_trace(loop)


def _bounds(sc, mu) -> tuple[float, float]:
    if sc.lambda_m is not None and sc.lambda_M is not None:
        return sc.lambda_m, sc.lambda_M
    return lambda_bounds(mu, sc.bounds_grid_n)


def _task_bounds(sc, mu):
    lm, lM = _bounds(sc, mu)
    return {"lambda_m": lm, "lambda_M": lM}, {}


def _spr_dict(r: lure.StabilityReport) -> dict:
    return {
        "lambda_m": r.lambda_m,
        "lambda_M": r.lambda_M,
        "spr_ok": r.spr_ok,
        "min_real_part": r.min_real_part,
        "omega_at_min": r.omega_at_min,
        "omega_grid": r.omega_grid,
        "hypothesis_flags": r.hypothesis_flags,
        "poles_stable": r.poles_stable,
        "closed_loop_poles": [[p.real, p.imag] for p in r.closed_loop_poles],
        "infinity_limit": r.infinity_limit,
        "poles_on_grid": r.poles_on_grid,
    }


def _task_spr(sc, mu):
    lm, lM = _bounds(sc, mu)
    r = lure.spr_check(build_plant(sc.plant), lm, lM, sc.omega_max, sc.omega_grid_n)
    return {"spr": _spr_dict(r)}, {}


def _task_lure(sc, mu):
    plant = build_plant(sc.plant)
    x0 = np.array(sc.x0, dtype=float)
    u0 = float(plant.C @ x0)
    L = build_interface(sc.interface, u0)
    if sc.align_interface:
        L = interface_update(L, u0)
    spr = lure.spr_check(plant, *_bounds(sc, mu), sc.omega_max, sc.omega_grid_n)
    tr = lure.simulate_lure(plant, x0, mu, L, sc.t_final, sc.dt_max, sc.residual_tol)
    res = {
        "spr": _spr_dict(spr),
        "converged": tr.converged,
        "converged_at": tr.converged_at,
        "final_residual": tr.final_residual,
        "residual_tolerance": tr.tolerance,
        "final_state": list(tr.state_matrix[-1]),
        "final_output": float(tr.y_trace[-1]),
        "steps": len(tr.times) - 1,
        "reversals": tr.reversals,
        "initial_interface": [list(c) for c in L.corners],
    }
    trace = {"t": tr.times, "u": tr.u_trace, "y": tr.y_trace}
    for k in range(plant.order):
        trace[f"x{k + 1}"] = tr.state_matrix[:, k]
    return res, trace


_TASKS = {
    "eval": _task_eval,
    "loop": _task_loop,
    "crossover": _task_crossover,
    "classify": _task_classify,
    "design": _task_design,
    "bounds": _task_bounds,
    "spr": _task_spr,
    "lure": _task_lure,
}


def run_task(sc: Scenario) -> tuple[dict, dict]:
    mu = build_weighting(sc.weighting)
    return _TASKS[sc.task](sc, mu)
