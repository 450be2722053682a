import itertools
import sys

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from ewens_pitman.martingale import CountState
from ewens_pitman.params import ModelParams

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

GRID_ALPHA = (0.3, 0.5, 0.8)
GRID_THETA = (-0.1, 0.0, 1.0)
GRID = [ModelParams(a, t) for a, t in itertools.product(GRID_ALPHA, GRID_THETA)]


@pytest.fixture(params=GRID, ids=lambda p: f"a{p.alpha}-t{p.theta}")
def grid_params(request):
    return request.param


@st.composite
def model_params(draw, positive_alpha=True):
    lo = 0.01 if positive_alpha else 0.0
    alpha = draw(st.floats(min_value=lo, max_value=0.95))
    theta = draw(st.floats(min_value=-alpha + 0.01, max_value=5.0))
    return ModelParams(alpha, theta)


@st.composite
def block_sizes(draw, max_n=400):
    """A multiset of block sizes, i.e. a valid partition state."""
    k = draw(st.integers(min_value=1, max_value=40))
    return draw(st.lists(st.integers(min_value=1, max_value=max_n // 40), min_size=k, max_size=k))


@st.composite
def count_states(draw, max_n=400):
    return CountState.from_sizes(draw(block_sizes(max_n)))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in range(1, 13):
        terminalreporter.write_line(mod.RESULTS.get(num, f"C{num:<2} NOT RUN"))
