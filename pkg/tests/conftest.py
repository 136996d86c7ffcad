import pytest

from hybridoc import Dynamics, Hilbert, Model
from hybridoc.Liouville import ControlSystem


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
                     help='also run the pi-pulse and optimizer reproduction runs')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope='session')
def set1():
    return Model.SET1


@pytest.fixture(scope='session')
def space():
    return Hilbert.Space(cavity_dim=3, osc_dim=3)


@pytest.fixture(scope='session')
def system(set1, space):
    return ControlSystem(set1, space)


@pytest.fixture(scope='session')
def steady(system):
    return Dynamics.steady_state(system)


@pytest.fixture(scope='session')
def drift_steady(system):
    return Dynamics.steady_state(system, frame=Dynamics.DRIFT)
