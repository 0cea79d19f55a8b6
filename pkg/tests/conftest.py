import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from parisian_ruin import PAPER_PARAMS, ModelParams, OccupationValue, ValueFunction  # noqa: E402

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def model_params(draw, rho=None):
    r = draw(st.floats(0.01, 0.08))
    sigma = draw(st.floats(0.1, 0.4))
    sharpe = draw(st.floats(0.1, 0.6))
    return ModelParams(
        r=r, mu=r + sharpe * sigma, sigma=sigma,
        lam=draw(st.floats(0.005, 0.05)),
        rho=draw(st.floats(0.002, 0.1)) if rho is None else rho,
        c=draw(st.floats(0.5, 3.0)),
        L=draw(st.floats(5.0, 300.0)),
    )


@pytest.fixture(scope="session")
def paper():
    return PAPER_PARAMS


@pytest.fixture(scope="session")
def vf():
    return ValueFunction.build(PAPER_PARAMS)


@pytest.fixture(scope="session")
def occ():
    return OccupationValue.build(PAPER_PARAMS)
