import pytest

from tvwave.discretization.mesh_fem import Mesh, Rectangle
from tvwave.scenario.builder import Scenario
from tvwave.scenario.config import ScenarioConfig


def tiny_config(sources=True, **sections):
    data = {
        'name': 'tiny',
        'domain': {'bounds': [-1., 1., -1., 1.]},
        'mesh': {'nx': 3, 'ny': 3},
        'time': {'final_time': 2., 'num_steps': 4, 'sigma': 0.25},
        'control': {'region': [-1., 1., -1., 0.], 'offset': 1., 'levels': [0., 0.1, 0.2, 0.3, 0.4]},
        'observation': {'kind': 'restriction', 'region': [-1., 1., 0., 1.]},
        'forcing': {'sources': [{'location': [0.2, -0.4], 'frequency': 1., 'delay': 0.5}] if sources else []},
        'noise': {'kind': 'none'},
        'solver': {'gamma_f': 0.1, 'gamma_g': 1., 'tol': 1e-8, 'max_iter': 50, 'check_every': 5},
    }
    data.update(sections)
    return ScenarioConfig.from_dict(data)


@pytest.fixture
def unit_mesh():
    return Mesh(Rectangle(0., 1., 0., 1.), 3, 3)


@pytest.fixture
def tiny_scenario():
    return Scenario(tiny_config())


@pytest.fixture
def silent_scenario():
    return Scenario(tiny_config(sources=False))


@pytest.fixture
def small_scenario():
    return Scenario(ScenarioConfig.preset('small'))


@pytest.fixture
def small_patch_scenario():
    return Scenario(ScenarioConfig.preset('small_patches'))
