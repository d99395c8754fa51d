import filecmp
import os
import tempfile

import numpy as np
import pytest

from tvwave.cli import EXIT_OK, main
from tvwave.discretization.mesh_fem import Rectangle
from tvwave.scenario.builder import Scenario
from tvwave.scenario.config import ScenarioConfig
from tvwave.utils.general import jaccard, level_attainment


def _synthetic_data(scenario):
    return scenario.noise_model.apply(scenario.forward_op.apply_S(scenario.exact_control()))


@pytest.mark.slow
def test_transmission_reconstruction():
    plain = Scenario(ScenarioConfig.preset('transmission', beta=0.))
    y_d = _synthetic_data(plain)
    without_tv = plain.solver(y_d).run()
    assert without_tv.converged
    assert 1000 <= without_tv.iterations <= 15000
    _, attained = level_attainment(without_tv.u, plain.levels.values)
    assert attained >= 0.9

    with_tv = Scenario(ScenarioConfig.preset('transmission')).solver(y_d).run()
    assert with_tv.converged
    assert 150 <= with_tv.iterations <= 3000
    assert with_tv.iterations < without_tv.iterations


@pytest.mark.slow
def test_reflection_half_scale_localizes_shallow_inclusions():
    scenario = Scenario(ScenarioConfig.preset('reflection_half'))
    result = scenario.solver(_synthetic_data(scenario)).run()
    assert result.converged
    assert scenario.levels.is_feasible(result.u)

    cs = scenario.control_space
    recovered = scenario.forward_op.coefficient(result.u)[cs.control_node_indices] > 1.5
    shallow = Rectangle(-0.8, -0.5, 0.2, 0.6).contains(cs.node_coordinates) | \
        Rectangle(-0.2, 0.2, 0.3, 0.5).contains(cs.node_coordinates)
    assert jaccard(recovered, shallow) >= 0.25


@pytest.mark.slow
def test_small_reconstruction_is_reproducible():
    runs = []
    for _ in range(2):
        scenario = Scenario(ScenarioConfig.preset('small'))
        runs.append(scenario.solver(_synthetic_data(scenario)).run())
    assert np.array_equal(runs[0].u, runs[1].u)
    assert runs[0].iterations == runs[1].iterations
    assert runs[0].history.equals(runs[1].history)


@pytest.mark.slow
def test_transmission_with_tv_history_files_are_identical():
    with tempfile.TemporaryDirectory() as tmpdir:
        data = os.path.join(tmpdir, 'data')
        assert main(['generate-data', '--preset', 'transmission', '--out', data]) == EXIT_OK
        histories = []
        for run in ('first', 'second'):
            out = os.path.join(tmpdir, run)
            assert main(['solve', '--preset', 'transmission', '--data', data, '--out', out]) == EXIT_OK
            histories.append(os.path.join(out, 'history.csv'))
        assert filecmp.cmp(*histories, shallow=False)


@pytest.mark.slow
def test_reflection_full_scale():
    scenario = Scenario(ScenarioConfig.preset('reflection'))
    result = scenario.solver(_synthetic_data(scenario)).run()
    assert result.converged
    assert 300 <= result.iterations <= 5000
    assert scenario.levels.is_feasible(result.u)
