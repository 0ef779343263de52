import pytest
from hypothesis import HealthCheck, settings

from gsf.config import Config
from gsf.ring import get_context

settings.register_profile(
    "gsf", deadline=None, max_examples=60, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("gsf")


@pytest.fixture(scope="session")
def ctx():
    return get_context(Config())


@pytest.fixture(scope="session")
def exp_ctx():
    return get_context(Config(gauge="exp"))
