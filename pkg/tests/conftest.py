import pytest

from fracheat import DomainSpec, assemble_operator, build_grid


@pytest.fixture(scope="session")
def interval_grid():
    return build_grid(DomainSpec.interval(1.0), 1.0 / 64.0)


@pytest.fixture(scope="session")
def interval_op(interval_grid):
    return assemble_operator(interval_grid, 0.5)
