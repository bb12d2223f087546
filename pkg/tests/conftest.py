import pytest

from penrose_fife import default_problem, run


@pytest.fixture(scope="session")
def default_spec():
    return default_problem()


@pytest.fixture(scope="session")
def default_traj(default_spec):
    return run(default_spec, 64)


@pytest.fixture(scope="session")
def short_traj():
    """A cheap trajectory for tests that only need some nontrivial data."""
    return run(default_problem(nodes=33, T=0.25), 16)
