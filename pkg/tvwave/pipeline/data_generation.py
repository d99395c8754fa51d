import pandas as pd

from tvwave import logger
from tvwave.scenario.builder import Scenario
from tvwave.utils.export import write_csv, write_field_csv, write_field_vtk, write_observation
from tvwave.utils.general import get_pipeline_paths


class DataGenerator:
    """Synthetic measurements: forward solve at the exact coefficient, observation, noise."""

    def __init__(self, scenario: Scenario, output_dir):
        self.scenario = scenario
        self.output_dir = output_dir
        self.pipeline_paths = None

        self.exact_control = None
        self.clean = None
        self.noisy = None

    def _header(self):
        return {'config_hash': self.scenario.config.config_hash(), 'data_hash': self.scenario.config.data_hash(),
                'seed': self.scenario.seed}

    def _solve_exact(self):
        logger.info('Solving the state equation at the exact coefficient.')
        self.exact_control = self.scenario.exact_control()
        self.clean = self.scenario.forward_op.apply_S(self.exact_control)
        self.noisy = self.scenario.noise_model.apply(self.clean)

    def _save(self):
        header = self._header()
        paths = self.pipeline_paths
        scenario = self.scenario
        self.scenario.config.to_yaml(paths['config'])
        write_observation(self.clean, paths['observation_clean'], header)
        write_observation(self.noisy, paths['observation'], header)

        cs = scenario.control_space
        control_df = pd.DataFrame({'node': cs.control_node_indices, 'x': cs.node_coordinates[:, 0],
                                   'y': cs.node_coordinates[:, 1], 'u': self.exact_control})
        write_csv(control_df, paths['exact_control'], header)
        coefficient = scenario.forward_op.coefficient(self.exact_control)
        write_field_csv(scenario.mesh, coefficient, paths['exact_coefficient'], name='coefficient', header=header)
        write_field_vtk(scenario.mesh, coefficient, paths['exact_coefficient_vtk'], name='coefficient',
                        title=f'exact coefficient config {header["config_hash"]} seed {header["seed"]}')
        logger.info(f'Wrote synthetic data to {self.output_dir}.')

    def run(self):
        self.pipeline_paths = get_pipeline_paths(self.output_dir)
        self._solve_exact()
        self._save()
        return self.noisy
