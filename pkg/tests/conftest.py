import pytest
from hypothesis import HealthCheck, settings

from embedfar.bem import build_system
from embedfar.geometry import preset_shape

settings.register_profile(
    "suite",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def square_k5():
    """Moderately refined unit square at k=5, shared across test modules."""
    return build_system(
        preset_shape("square"), 5.0, elements_per_wavelength=8.0
    )


@pytest.fixture(scope="session")
def square_k5_fine():
    """Reference refinement of the same problem for defect measurements."""
    return build_system(
        preset_shape("square"), 5.0, elements_per_wavelength=32.0
    )
