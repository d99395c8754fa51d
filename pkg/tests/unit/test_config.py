import os
import tempfile

import pytest

from tvwave.discretization.mesh_fem import build_rect_mesh
from tvwave.scenario.builder import Scenario
from tvwave.scenario.config import ScenarioConfig
from tvwave.scenario.presets import PRESETS, get_preset
from tvwave.utils.errors import ValidationError
from tests.conftest import tiny_config


def test_yaml_round_trip():
    config = ScenarioConfig.preset('small_patches')
    with tempfile.TemporaryDirectory() as tmpdir:
        path = os.path.join(tmpdir, 'config.yaml')
        config.to_yaml(path)
        loaded = ScenarioConfig.from_yaml(path)
    assert loaded == config
    assert loaded.name == 'small_patches'
    assert loaded.config_hash() == config.config_hash()


def test_hash_is_stable_and_tracks_changes():
    config = ScenarioConfig.preset('small')
    assert config.config_hash() == ScenarioConfig.preset('small').config_hash()
    assert len(config.config_hash()) == 16
    assert config.with_overrides(seed=1).config_hash() != config.config_hash()
    assert config.with_overrides(seed=0).config_hash() == config.config_hash()


def test_overrides():
    config = ScenarioConfig.preset('small', seed=3, max_iter=7, tol=1e-3, alpha=0., beta=2e-4)
    assert config['noise']['seed'] == 3
    assert config['solver']['max_iter'] == 7
    assert config['solver']['tol'] == 1e-3
    assert config['regularization'] == {'alpha': 0., 'beta': 2e-4}
    assert ScenarioConfig.preset('small')['solver']['max_iter'] == 200


def test_sources_are_completed_with_defaults():
    config = tiny_config()
    source = config['forcing']['sources'][0]
    assert source['amplitude'] == 2.
    assert source['placement'] == 'interior'
    with pytest.raises(ValidationError):
        tiny_config(forcing={'sources': [{'frequency': 1.}]})


@pytest.mark.parametrize('name', sorted(PRESETS))
def test_presets_validate_against_their_mesh(name):
    config = get_preset(name)
    config.validate(build_rect_mesh(config.domain, config['mesh']['nx'], config['mesh']['ny']))
    assert config.name == name


def test_preset_contents():
    assert len(get_preset('transmission')['forcing']['sources']) == 38
    reflection = get_preset('reflection')
    assert len(reflection.patches) == 10
    assert len(reflection['forcing']['sources']) == 21
    assert reflection['regularization']['alpha'] == 0.
    assert get_preset('transmission_misspecified')['control']['levels'][-1] == pytest.approx(0.44)
    with pytest.raises(ValidationError):
        get_preset('refraction')


@pytest.mark.parametrize('sections', [
    {'mesh': {'nx': 3, 'ny': 3, 'nz': 3}},
    {'solver_settings': {}},
    {'control': {'levels': [0.2, 0.1]}},
    {'control': {'levels': [0.1]}},
    {'control': {'offset': 1., 'levels': [-2., 0.]}},
    {'time': {'final_time': 0.}},
    {'time': {'num_steps': 0}},
    {'observation': {'kind': 'boundary'}},
    {'observation': {'kind': 'patch_mean', 'patches': []}},
    {'noise': {'kind': 'uniform'}},
    {'noise': {'kind': 'structured_cosine', 'level': 0.05}},
    {'regularization': {'alpha': -1., 'beta': 0.}},
    {'solver': {'gamma_f': 0.}},
    {'exact_coefficient': {'background': 0.5}},
    {'exact_coefficient': {'background': 0., 'boxes': [{'bounds': [-0.5, 0.5, 0.5, 0.8], 'value': 0.1}]}},
])
def test_invalid_configurations(sections):
    with pytest.raises(ValidationError):
        tiny_config(**sections).validate()


def test_misaligned_regions_need_the_mesh():
    config = tiny_config(control={'region': [-1., 1., -1., 0.3]})
    config.validate()
    with pytest.raises(ValidationError):
        config.validate(build_rect_mesh(config.domain, 3, 3))


def test_missing_or_broken_file():
    with tempfile.TemporaryDirectory() as tmpdir:
        with pytest.raises(ValidationError):
            ScenarioConfig.from_yaml(os.path.join(tmpdir, 'missing.yaml'))
        path = os.path.join(tmpdir, 'broken.yaml')
        with open(path, 'w') as f:
            f.write('mesh: [1, 2\n')
        with pytest.raises(ValidationError):
            ScenarioConfig.from_yaml(path)


@pytest.mark.parametrize('name', ['reflection', 'reflection_half'])
def test_reflection_observes_ten_series(name):
    scenario = Scenario(get_preset(name))
    assert scenario.observation_op.shape == (scenario.grid.num_steps + 1, 10)
    assert scenario.observation_op.column_names()[-1] == 'patch_9'


@pytest.mark.parametrize('name, hx, hy', [('transmission', 2 / 63, 3 / 63), ('reflection', 1 / 60, 1 / 60),
                                          ('reflection_half', 1 / 60, 1 / 60)])
def test_preset_steps_are_stated_in_the_lumped_geometry(name, hx, hy):
    assert get_preset(name)['solver']['gamma_g'] == pytest.approx(1e3 * hx * hy, rel=1e-12)


def test_data_hash_ignores_solver_and_regularization():
    config = ScenarioConfig.preset('small')
    solve_variant = config.with_overrides(max_iter=3, tol=1e-2, alpha=0., beta=0.)
    assert solve_variant.data_hash() == config.data_hash()
    assert solve_variant.config_hash() != config.config_hash()
    assert config.with_overrides(seed=5).data_hash() != config.data_hash()
    assert config.with_resolution(num_steps=16).data_hash() != config.data_hash()


def test_with_resolution():
    config = get_preset('transmission').with_resolution(11, 16, 32)
    assert config['mesh'] == {'nx': 11, 'ny': 16}
    assert config['time']['num_steps'] == 32
    assert config['solver'] == get_preset('transmission')['solver']
    config.validate(build_rect_mesh(config.domain, 11, 16))
