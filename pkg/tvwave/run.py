import os

from tvwave.pipeline.adjoint_test import AdjointTest
from tvwave.pipeline.data_generation import DataGenerator
from tvwave.pipeline.reconstruction import Reconstruction
from tvwave.scenario.builder import Scenario
from tvwave.scenario.config import ScenarioConfig


def generate_data(config: ScenarioConfig, output_dir):
    scenario = Scenario(config)
    generating = DataGenerator(scenario, output_dir)
    generating.run()
    return generating


def solve(config: ScenarioConfig, data_dir, output_dir):
    scenario = Scenario(config)
    reconstructing = Reconstruction(scenario, data_dir, output_dir)
    reconstructing.run()
    return reconstructing


def adjoint_test(config: ScenarioConfig, seed=0, corrupt_adjoint=False):
    scenario = Scenario(config)
    testing = AdjointTest(scenario, seed=seed, corrupt_adjoint=corrupt_adjoint)
    testing.run()
    return testing


def run(config: ScenarioConfig, output_dir):
    """Synthetic data and reconstruction in one go, data in output_dir/data, results in output_dir/solution."""
    data_dir = os.path.join(output_dir, 'data')
    generate_data(config, data_dir)
    return solve(config, data_dir, os.path.join(output_dir, 'solution'))


if __name__ == "__main__":
    run(ScenarioConfig.preset('small'), 'tvwave_output')
