"""Preisach hysteresis operators: butterfly and multi-loop analysis, Lur'e stability."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .errors import MomentExhausted, NoLoop, NumericalFailure, SingularAtFrequency, StepSizeUnderflow
from .loops import (
    CrossoverSet,
    HysteresisLoop,
    LoopClassification,
    classify,
    crossover_integral,
    design_zero_area_input,
    find_crossovers,
    run_periodic,
    signed_area,
)
from .lure import LtiSystem, LureTrajectory, StabilityReport, simulate_lure, spr_check, transfer_function
from .operator import (
    InitialValueMismatch,
    PreisachState,
    RelayConfig,
    SampledSignal,
    preisach_eval,
    preisach_eval_oracle,
    relay_eval,
)
from .plane import (
    InterfaceError,
    MemoryInterface,
    NonMonotoneStaircase,
    PlanePoint,
    initial_interface_from_value,
    interface_from_staircase,
    interface_update,
    relay_state_at,
)
from .weighting import (
    BUILTINS,
    Box,
    GridWeighting,
    RegionWeighting,
    SineWeighting,
    UnboundedSupport,
    WeightingFunction,
    eval_mu,
    integrate_rectangle,
    integrate_triangle_weighted,
    lambda_bounds,
    make_builtin,
)
