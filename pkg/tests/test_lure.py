import math

import numpy as np
import pytest
from scipy.linalg import expm

from hystkit.errors import SingularAtFrequency
from hystkit.lure import (
    EXAMPLE_X0,
    LtiSystem,
    gbar,
    example_initial_interface,
    example_start_interface,
    example_plant,
    simulate_lure,
    spr_check,
    transfer_function,
)
from hystkit.operator import InitialValueMismatch, PreisachState
from hystkit.plane import initial_interface_from_value
from hystkit.weighting import lambda_bounds, make_builtin

LM_SIN = (-1 / (2 * math.pi), 4 / math.pi)


def first_order():
    return LtiSystem(np.array([[-1.0]]), np.array([1.0]), np.array([1.0]))


@pytest.fixture(scope="module")
def example_run():
    return simulate_lure(
        example_plant(), EXAMPLE_X0, make_builtin("multiloop_sin"), example_start_interface(), 50.0, 1e-2
    )


# -- plant --------------------------------------------------------------------


def test_system_shape_checks():
    with pytest.raises(ValueError):
        LtiSystem(np.eye(2), np.ones(3), np.ones(2))
    with pytest.raises(ValueError):
        LtiSystem(np.ones((2, 3)), np.ones(2), np.ones(2))


def test_example_plant_is_minimal():
    s = example_plant()
    assert s.controllable and s.observable


def test_uncontrollable_plant_detected():
    s = LtiSystem(np.diag([-1.0, -2.0]), np.array([1.0, 0.0]), np.array([1.0, 1.0]))
    assert not s.controllable and s.observable


def test_dc_gain_of_example_plant():
    # characteristic polynomial s^3 + 3 s^2 + 28 s + 26 with numerator -26
    assert transfer_function(example_plant(), 0.0) == pytest.approx(-1.0, abs=1e-14)
    w = 1.7
    s = 1j * w
    assert transfer_function(example_plant(), w) == pytest.approx(-26 / (s**3 + 3 * s**2 + 28 * s + 26), abs=1e-14)


def test_first_order_values():
    assert transfer_function(first_order(), 0.0) == 1.0
    assert abs(transfer_function(example_plant(), 1e8)) < 1e-20


def test_singular_frequency():
    osc = LtiSystem(np.array([[0.0, 1.0], [-4.0, 0.0]]), np.array([0.0, 1.0]), np.array([1.0, 0.0]))
    with pytest.raises(SingularAtFrequency):
        transfer_function(osc, 2.0)


# -- sector condition ---------------------------------------------------------


def test_rational_example_matches_hand_formula():
    sys = first_order()
    for w in np.concatenate([[0.0], np.logspace(-3, 3, 50)]):
        assert gbar(sys, -0.5, 1.0, w).real == pytest.approx((w**2 + 1) / (w**2 + 0.25), abs=1e-12)
    r = spr_check(sys, -0.5, 1.0)
    assert r.spr_ok
    # the infimum is the limit at infinite frequency
    assert r.min_real_part == 1.0 and r.omega_at_min == math.inf
    assert r.infinity_limit == 1.0


def test_zero_upper_bound_flags_hypothesis():
    r = spr_check(first_order(), -0.5, 0.0)
    assert r.hypothesis_flags["lambda_M_positive"] is False
    assert not r.spr_ok


def test_spr_ok_implies_positive_minimum_and_flags():
    rng = np.random.default_rng(3)
    for _ in range(20):
        sys = random_hurwitz(rng)
        r = spr_check(sys, -rng.uniform(0, 1), rng.uniform(0.1, 2), grid_n=400)
        if r.spr_ok:
            assert r.min_real_part > 0 and all(r.hypothesis_flags.values()) and r.poles_stable


def test_example_plant_sector_condition_at_zero_frequency():
    # G(0) = -1, so Re Gbar(0) = (1 - lM) / (1 - lm) which is negative for lM = 4/pi
    lm, lM = LM_SIN
    expected = (1 - lM) / (1 - lm)
    r = spr_check(example_plant(), lm, lM)
    assert gbar(example_plant(), lm, lM, 0.0).real == pytest.approx(expected, abs=1e-14)
    assert r.min_real_part <= expected + 1e-12
    assert r.spr_ok is False


def test_sign_flipped_example_plant_passes():
    s = example_plant()
    flipped = LtiSystem(s.A, -s.B, s.C)
    r = spr_check(flipped, *LM_SIN)
    assert r.spr_ok
    assert r.min_real_part > 0.3


# -- simulation ---------------------------------------------------------------


def test_example_interface_matches_initial_output():
    L = example_start_interface()
    assert L.value == pytest.approx(0.8)
    assert example_initial_interface().corners == ((1.0, -0.9), (0.0, 0.0))


def test_initial_output_mismatch_is_rejected():
    with pytest.raises(InitialValueMismatch):
        simulate_lure(example_plant(), EXAMPLE_X0, make_builtin("zero"), example_initial_interface(), 1.0)


def test_example_scenario_converges(example_run):
    tr = example_run
    assert tr.converged
    assert tr.final_residual < 1e-6
    assert tr.converged_at < 50.0


def test_trajectory_interconnection(example_run):
    tr = example_run
    C = example_plant().C
    assert np.array_equal(tr.u_trace, tr.state_matrix @ C)
    A, B = example_plant().A, example_plant().B
    res = np.linalg.norm(tr.state_matrix @ A.T - np.outer(tr.y_trace, B), axis=1)
    assert np.allclose(res, tr.equilibrium_residual_trace, rtol=0, atol=1e-12)


def test_trajectory_output_matches_operator(example_run):
    tr = example_run
    st_ = PreisachState(make_builtin("multiloop_sin"), example_start_interface())
    idx = np.linspace(0, len(tr.times) - 1, 60).astype(int)
    k0 = 0
    for k in idx:
        for v in tr.u_trace[k0 + 1 : k + 1]:
            st_ = st_.advance(v)
        k0 = k
        assert st_.current_output == tr.y_trace[k]


def test_trajectory_slopes_within_bounds(example_run):
    tr = example_run
    bound = max(abs(LM_SIN[0]), LM_SIN[1])
    assert np.all(np.abs(np.diff(tr.y_trace)) <= bound * np.abs(np.diff(tr.u_trace)) + 1e-12)


@pytest.mark.parametrize("dt", [0.02, 0.01])
def test_linear_plant_matches_matrix_exponential(dt):
    sys = example_plant()
    tr = simulate_lure(sys, EXAMPLE_X0, make_builtin("zero"), initial_interface_from_value(0.8), 5.0, dt)
    ref = np.array([expm(sys.A * t) @ EXAMPLE_X0 for t in tr.times])
    # fourth-order global error with a constant that covers the example plant
    assert np.abs(tr.state_matrix - ref).max() <= 1.0 * dt**4 * 1e3


def test_linear_plant_integrator_order():
    sys = example_plant()
    errs = []
    for dt in (0.04, 0.02, 0.01):
        tr = simulate_lure(sys, EXAMPLE_X0, make_builtin("zero"), initial_interface_from_value(0.8), 5.0, dt)
        errs.append(np.abs(tr.state_matrix[-1] - expm(5.0 * sys.A) @ EXAMPLE_X0).max())
    order = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(order > 3.5)


def test_start_on_equilibrium():
    sys = example_plant()
    mu = make_builtin("multiloop_sin")
    L0 = initial_interface_from_value(0.0)
    assert PreisachState(mu, L0).current_output == pytest.approx(0.0, abs=1e-15)
    tr = simulate_lure(sys, [0.0, 0.0, 0.0], mu, L0, 2.0)
    assert np.all(tr.equilibrium_residual_trace <= 1e-15)
    assert tr.converged and tr.converged_at == 0.0


def test_reversals_are_split_and_still_converge():
    s = example_plant()
    flipped = LtiSystem(s.A, -s.B, s.C)
    tr = simulate_lure(flipped, EXAMPLE_X0, make_builtin("multiloop_sin"), example_start_interface(), 50.0)
    assert tr.reversals > 0
    assert tr.converged
    bound = max(abs(LM_SIN[0]), LM_SIN[1])
    assert np.all(np.abs(np.diff(tr.y_trace)) <= bound * np.abs(np.diff(tr.u_trace)) + 1e-12)


def random_hurwitz(rng, n=3):
    poles = -rng.uniform(0.3, 3.0, n)
    V = rng.normal(size=(n, n))
    A = V @ np.diag(poles) @ np.linalg.inv(V)
    return LtiSystem(A, rng.normal(size=n), rng.normal(size=n))


def test_random_spr_plants_reach_equilibrium():
    rng = np.random.default_rng(11)
    mu = make_builtin("multiloop_sin")
    lm, lM = LM_SIN
    found = 0
    while found < 10:
        sys = random_hurwitz(rng)
        if not spr_check(sys, lm, lM, grid_n=400).spr_ok:
            continue
        found += 1
        x0 = rng.uniform(-0.3, 0.3, 3)
        L0 = initial_interface_from_value(float(sys.C @ x0))
        tr = simulate_lure(sys, x0, mu, L0, 40.0, 2e-2)
        assert tr.converged, f"plant {found} residual {tr.final_residual}"
        # once below tolerance the residual stays there
        below = np.flatnonzero(tr.equilibrium_residual_trace < tr.tolerance)
        assert np.all(tr.equilibrium_residual_trace[below[0]:] < tr.tolerance)


def test_sine_bounds_used_by_lure_tests():
    assert lambda_bounds(make_builtin("multiloop_sin"), 64) == pytest.approx(LM_SIN, abs=1e-9)
