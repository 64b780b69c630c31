import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from hystkit import Box, RegionWeighting, SampledSignal

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

SQUARE = Box(-1.0, 1.0, -1.0, 1.0)


def random_rect_weighting(rng, n_max=4, positive=False, support=SQUARE):
    """Sum of 1..n_max random rectangles with random densities inside ``support``."""
    regs = []
    for _ in range(rng.integers(1, n_max + 1)):
        a = np.sort(rng.uniform(support.a_lo, support.a_hi, 2))
        b = np.sort(rng.uniform(support.b_lo, support.b_hi, 2))
        d = rng.uniform(0.1, 2.0) if positive else rng.uniform(-2.0, 2.0)
        regs.append(([(a[0], b[0]), (a[1], b[0]), (a[1], b[1]), (a[0], b[1])], d))
    return RegionWeighting(regs, support=support)


def reversal_values(rng, reversals=3, lo=-1.0, hi=1.0, per_leg=40):
    """Piecewise-linear samples with ``reversals`` direction changes inside ``[lo, hi]``."""
    ext = [rng.uniform(lo, hi)]
    up = bool(rng.integers(0, 2))
    for _ in range(reversals + 1):
        ext.append(rng.uniform(ext[-1], hi) if up else rng.uniform(lo, ext[-1]))
        up = not up
    legs = [np.linspace(p, q, per_leg, endpoint=False) for p, q in zip(ext[:-1], ext[1:])]
    return np.concatenate(legs + [[ext[-1]]])


def reversal_signal(rng, reversals=3, **kw) -> SampledSignal:
    return SampledSignal.from_values(reversal_values(rng, reversals, **kw), 0.01)


@st.composite
def rect_weightings(draw, positive=False):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_rect_weighting(np.random.default_rng(seed), positive=positive)


seeds = st.integers(0, 2**32 - 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def butterfly_closed_form(u, rising, u_max=1.0):
    """Steady-state output of the symmetric butterfly weighting over [-u_max, u_max]."""
    u = np.asarray(u, dtype=float)
    if rising:
        return np.where(u < 0, -((u_max + u) ** 2), -(u_max - u) * (u_max + 3 * u))
    return np.where(u >= 0, -((u_max - u) ** 2), -(u_max + u) * (u_max - 3 * u))


def butterfly_period(n=201, u_max=1.0):
    """One steady period -u_max -> u_max -> -u_max after a transient period."""
    up = np.linspace(-u_max, u_max, n)
    values = np.concatenate([up, up[::-1][1:], up[1:], up[::-1][1:]])
    rising = np.concatenate([np.ones(n, bool), np.zeros(n - 1, bool), np.ones(n - 1, bool), np.zeros(n - 1, bool)])
    return values, rising, 2 * n - 2


ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        verdict, title, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"[{verdict}] {k}. {title}: {detail}")
