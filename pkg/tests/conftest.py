import pytest

from vanetmarket import generate_synthetic


@pytest.fixture(scope="session")
def fleet():
    """Medium synthetic fleet shared across tests; regenerating is cheap but wasteful."""
    return generate_synthetic(40, 90, seed=11)


@pytest.fixture(scope="session")
def small_fleet():
    return generate_synthetic(8, 45, seed=3)
