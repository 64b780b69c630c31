import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from hystkit.weighting import (
    BUILTINS,
    Box,
    GridWeighting,
    RegionWeighting,
    SineWeighting,
    UnboundedSupport,
    box_diag_moments,
    diag_poly_moment,
    eval_mu,
    integrate_rectangle,
    integrate_triangle_weighted,
    lambda_bounds,
    make_builtin,
)

from conftest import SQUARE, random_rect_weighting, rect_weightings, seeds


def midpoint(mu, box, n=2000, weighted=False):
    """Cell-centre Riemann sum over a box, the independent quadrature oracle."""
    a = box.a_lo + (np.arange(n) + 0.5) * (box.a_hi - box.a_lo) / n
    b = box.b_lo + (np.arange(n) + 0.5) * (box.b_hi - box.b_lo) / n
    A, B = np.meshgrid(a, b, indexing="ij")
    f = mu.density(A, B)
    if weighted:
        f = f * (A - B)
    return float(f.sum()) * (box.a_hi - box.a_lo) * (box.b_hi - box.b_lo) / n**2


# -- point evaluation ---------------------------------------------------------


def test_eval_examples():
    assert eval_mu(make_builtin("butterfly_sym"), (0.5, -0.8)) == -1.0
    assert eval_mu(make_builtin("multiloop_sin"), (0.25, -0.25)) == pytest.approx(0.0, abs=1e-15)
    for name in BUILTINS:
        assert eval_mu(make_builtin(name), (0.0, 1.0)) == 0.0


def test_density_vanishes_outside_support():
    for name in ("butterfly_sym", "double_loop_same_orientation", "multiloop_sin", "uniform_square"):
        mu = make_builtin(name)
        assert eval_mu(mu, (1.5, 0.0)) == 0.0
        assert eval_mu(mu, (0.0, -1.5)) == 0.0


def test_sine_formula():
    mu = make_builtin("multiloop_sin")
    a, b = 0.3, -0.55
    expected = math.sin(2 * math.pi * (a - b)) + math.sin(2 * math.pi * (a + b))
    assert eval_mu(mu, (a, b)) == pytest.approx(expected, abs=1e-14)


# -- rectangle integrals ------------------------------------------------------


def test_sine_omega_regions():
    mu = make_builtin("multiloop_sin")
    zero = integrate_rectangle(mu, Box(0.0, 1.0, -1.0, 0.0))
    assert zero.value == pytest.approx(0.0, abs=1e-14)
    assert zero.abs_error_estimate >= 0
    shifted = integrate_rectangle(mu, Box(0.25, 1.0, -1.0, 0.25))
    assert abs(shifted.value) > 1e-3


def test_butterfly_cancels_on_lower_right_square():
    assert make_builtin("butterfly_sym").integrate_box(0.0, 1.0, -1.0, 0.0) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize(
    "box", [(-1, 1, -1, 1), (-0.3, 0.8, -0.9, 0.5), (0.1, 0.6, -0.2, 0.4), (0.2, 0.9, -0.7, -0.1)]
)
def test_sine_closed_form_matches_adaptive_quadrature(box):
    mu = SineWeighting()
    a_lo, a_hi, b_lo, b_hi = box
    ref = integrate.dblquad(
        lambda b, a: float(mu.density(a, b)), a_lo, a_hi, lambda a: b_lo, lambda a: min(b_hi, a),
        epsabs=1e-13, epsrel=1e-13,
    )[0]
    refw = integrate.dblquad(
        lambda b, a: float(mu.density(a, b)) * (a - b), a_lo, a_hi, lambda a: b_lo, lambda a: min(b_hi, a),
        epsabs=1e-13, epsrel=1e-13,
    )[0]
    assert mu.integrate_box(*box) == pytest.approx(ref, abs=1e-11)
    assert mu.integrate_box_weighted(*box) == pytest.approx(refw, abs=1e-11)


def test_region_integrals_against_riemann(rng):
    for _ in range(5):
        mu = random_rect_weighting(rng)
        box = Box(*np.sort(rng.uniform(-1.2, 1.2, 2)), *np.sort(rng.uniform(-1.2, 1.2, 2)))
        assert mu.integrate_box(box.a_lo, box.a_hi, box.b_lo, box.b_hi) == pytest.approx(
            midpoint(mu, box), abs=5e-3
        )


def test_diagonal_regions_exact():
    tri = RegionWeighting([([(0, 0), (1, -1), (1, 1)], 3.0)])
    # triangle of area 1 inside P
    assert tri.integrate_box(-5, 5, -5, 5) == pytest.approx(3.0, abs=1e-15)
    assert tri.total() == pytest.approx(3.0, abs=1e-15)


def test_edges_must_be_axis_or_diagonal():
    with pytest.raises(ValueError):
        RegionWeighting([([(0, 0), (1, -0.5), (1, 0.3)], 1.0)])


@given(mu=rect_weightings(), seed=seeds)
def test_rectangle_additivity(mu, seed):
    rng = np.random.default_rng(seed)
    a0, a1 = np.sort(rng.uniform(-1.2, 1.2, 2))
    b0, b1 = np.sort(rng.uniform(-1.2, 1.2, 2))
    am, bm = rng.uniform(a0, a1), rng.uniform(b0, b1)
    whole = mu.integrate_box(a0, a1, b0, b1)
    split_a = mu.integrate_box(a0, am, b0, b1) + mu.integrate_box(am, a1, b0, b1)
    split_b = mu.integrate_box(a0, a1, b0, bm) + mu.integrate_box(a0, a1, bm, b1)
    tol = 3 * mu.roundoff() + 1e-14
    assert abs(whole - split_a) <= tol
    assert abs(whole - split_b) <= tol


def test_diag_moments_against_quadrature():
    for i in range(3):
        for j in range(3):
            f = lambda b, a: a**i * b**j
            # split at the kink of the upper beta limit
            ref = (
                integrate.dblquad(f, -0.3, 0.4, -0.5, lambda a: a, epsabs=1e-14)[0]
                + integrate.dblquad(f, 0.4, 0.7, -0.5, 0.4, epsabs=1e-14)[0]
            )
            assert float(diag_poly_moment(-0.3, 0.7, -0.5, 0.4, i, j)) == pytest.approx(ref, abs=1e-13)
    area, mom = box_diag_moments(-0.3, 0.7, -0.5, 0.4)
    assert float(area) == pytest.approx(float(diag_poly_moment(-0.3, 0.7, -0.5, 0.4, 0, 0)), abs=1e-15)


@pytest.mark.parametrize("interp,tol", [("nearest", 5e-4), ("bilinear", 2e-6)])
def test_grid_integrals_against_riemann(interp, tol):
    g = GridWeighting.from_function(lambda a, b: np.sin(3 * a) * np.cos(2 * b) + 0.3, SQUARE, 7, interp)
    for box in [Box(-0.3, 0.8, -0.9, 0.5), Box(0.1, 0.6, -0.2, 0.4), Box(-2, 2, 0.3, 0.35)]:
        v = g.integrate_box(box.a_lo, box.a_hi, box.b_lo, box.b_hi)
        w = g.integrate_box_weighted(box.a_lo, box.a_hi, box.b_lo, box.b_hi)
        # cell jumps limit the Riemann oracle to O(h) for nearest sampling
        assert v == pytest.approx(midpoint(g, box, 3000), abs=tol)
        assert w == pytest.approx(midpoint(g, box, 3000, weighted=True), abs=tol)


def test_grid_nearest_is_cellwise_exact():
    vals = np.array([[1.0, 2.0], [3.0, 4.0]])
    g = GridWeighting(Box(0.0, 2.0, -2.0, 0.0), vals)
    # whole support lies in P
    assert g.integrate_box(0, 2, -2, 0) == pytest.approx(10.0, abs=1e-14)
    assert g.integrate_box(0, 1, -2, -1) == pytest.approx(1.0, abs=1e-14)


# -- weighted triangle --------------------------------------------------------


def test_triangle_weighted_examples():
    assert integrate_triangle_weighted(make_builtin("butterfly_sym"), -1, 1) == pytest.approx(0.0, abs=1e-15)
    mu = make_builtin("double_loop_same_orientation")
    assert abs(integrate_triangle_weighted(mu, 0.3 - 1e-9, 0.3)) < 1e-15


def test_sine_triangle_weighted_against_riemann():
    mu = make_builtin("multiloop_sin")
    ref = 2 * midpoint(mu, SQUARE, 2000, weighted=True)
    assert integrate_triangle_weighted(mu, -1, 1) == pytest.approx(ref, abs=1e-4)


# -- slope bounds -------------------------------------------------------------


def test_sine_bounds_match_published_values():
    lm, lM = lambda_bounds(make_builtin("multiloop_sin"))
    assert lm == pytest.approx(-1 / (2 * math.pi), abs=1e-9)
    assert lM == pytest.approx(4 / math.pi, abs=1e-9)


def test_uniform_square_bounds():
    assert lambda_bounds(make_builtin("uniform_square")) == pytest.approx((0.0, 4.0), abs=1e-12)


def test_zero_bounds():
    assert lambda_bounds(make_builtin("zero")) == (0.0, 0.0)


def test_bounds_preconditions():
    with pytest.raises(ValueError):
        lambda_bounds(make_builtin("uniform_square"), grid_n=32)
    unbounded = RegionWeighting([([(0, -1), (1, -1), (1, 0), (0, 0)], 1.0)], support=Box(-np.inf, 1, -1, 0))
    with pytest.raises(UnboundedSupport):
        lambda_bounds(unbounded)


def brute_family_extremes(mu, n=400):
    """Both line-integral families on a lattice of segment endpoints, by cumulative sums."""
    s = mu.support
    lo, hi = min(s.a_lo, s.b_lo), max(s.a_hi, s.b_hi)
    x = np.linspace(lo, hi, n + 1)
    xm = 0.5 * (x[1:] + x[:-1])
    h = x[1] - x[0]
    ext = []
    for k, g in enumerate(x):
        # fixed alpha = g, beta from kappa up to g
        col = mu.density(np.full(k, g), xm[:k]) * h
        ext += list(np.cumsum(col[::-1]))
        # fixed beta = g, alpha from g up to gamma
        row = mu.density(xm[k:], np.full(n - k, g)) * h
        ext += list(np.cumsum(row))
    ext = np.array(ext + [0.0])
    return 2 * ext.min(), 2 * ext.max()


def test_bounds_against_brute_force(rng):
    for _ in range(4):
        mu = random_rect_weighting(rng)
        lm, lM = lambda_bounds(mu)
        bm, bM = brute_family_extremes(mu)
        h = 2.0 / 400
        slack = 4 * mu.max_abs * h
        assert abs(lm - bm) <= slack and abs(lM - bM) <= slack
        # exact line integrals at random segments never leave the bounds
        g = rng.uniform(-1, 1, 300)
        k = g - rng.uniform(0, 2, 300)
        for gamma, kappa in zip(g, k):
            v1 = mu.cumulative_beta(gamma, [kappa, gamma])
            v2 = mu.cumulative_alpha(kappa, [kappa, gamma])
            for v in (v1[1] - v1[0], v2[1] - v2[0]):
                assert lm - 1e-12 <= 2 * v <= lM + 1e-12


def test_bounds_sign_pattern():
    for name in ("butterfly_sym", "double_loop_same_orientation", "multiloop_sin"):
        lm, lM = lambda_bounds(make_builtin(name))
        assert lm <= 0 <= lM


@settings(max_examples=15)
@given(mu=rect_weightings(), shift=st.floats(-3, 3))
def test_bounds_translation_invariant(mu, shift):
    # a shift along the diagonal maps P onto itself and preserves line integrals
    moved = mu.translated(shift, shift)
    a = lambda_bounds(mu, grid_n=64)
    b = lambda_bounds(moved, grid_n=64)
    assert a == pytest.approx(b, abs=1e-9)


def test_grid_translation_invariant():
    g = GridWeighting.from_function(lambda a, b: np.sin(3 * a) * np.cos(2 * b), SQUARE, 16, "bilinear")
    assert lambda_bounds(g, 64) == pytest.approx(lambda_bounds(g.translated(0.5, 0.5), 64), abs=1e-9)


# -- registry -----------------------------------------------------------------


def test_builtin_registry():
    assert {"butterfly_sym", "double_loop_same_orientation", "multiloop_sin"} <= set(BUILTINS)
    with pytest.raises(KeyError):
        make_builtin("nope")
    with pytest.raises(TypeError):
        make_builtin("butterfly_sym", gamma=2.0)
    mu = make_builtin("butterfly_sym", beta1=2.0)
    assert mu.support == Box(-2.0, 2.0, -2.0, 2.0)
