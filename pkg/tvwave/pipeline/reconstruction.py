import os

import numpy as np
import pandas as pd

from tvwave import logger
from tvwave.optimization.pdps import HISTORY_COLUMNS
from tvwave.scenario.builder import Scenario
from tvwave.utils.errors import ValidationError
from tvwave.utils.export import CsvRowWriter, read_observation, write_csv, write_field_csv, write_field_vtk, \
    write_summary
from tvwave.utils.general import get_pipeline_paths, level_attainment


class Reconstruction:
    def __init__(self, scenario: Scenario, data_dir, output_dir):
        self.scenario = scenario
        self.data_dir = data_dir
        self.output_dir = output_dir
        self.pipeline_paths = None

        self.y_d = None
        self.data_header = None
        self.opnorm = None
        self.result = None
        self.summary = None

    def _load_data(self):
        data_paths = get_pipeline_paths(self.data_dir, create=False)
        if not os.path.exists(data_paths['observation']):
            raise ValidationError(f'No observation file found in {self.data_dir}.')
        self.y_d, self.data_header = read_observation(data_paths['observation'], self.scenario.observation_op)
        data_hash = self.data_header.get('data_hash')
        if data_hash != self.scenario.config.data_hash():
            logger.warning(f'Data were generated from scenario data {data_hash}, '
                           f'solving with {self.scenario.config.data_hash()}.')

    def _check_step_sizes(self):
        iterations = self.scenario.config['solver']['norm_iterations']
        if iterations < 1:
            return
        logger.info(f'Estimating the operator norm with {iterations} power iterations.')
        self.opnorm = self.scenario.forward_op.estimate_opnorm(self.scenario.control_space.zeros(),
                                                               iterations=iterations, seed=self.scenario.seed)
        self.scenario.step_sizes().check(self.opnorm)

    def _header(self):
        return {'config_hash': self.scenario.config.config_hash(), 'data_hash': self.scenario.config.data_hash(),
                'seed': self.scenario.seed}

    def _summarize(self):
        result = self.result
        levels = self.scenario.levels.values
        per_level, attained = level_attainment(result.u, levels)
        report = result.report
        self.summary = {
            'config_hash': self.scenario.config.config_hash(),
            'seed': int(self.scenario.seed),
            'converged': bool(result.converged),
            'iterations': int(result.iterations),
            'returned_iteration': int(result.best_iteration),
            'objective': report.objective if report else None,
            'residual': {'primal': report.primal, 'observation': report.observation, 'dual': report.dual,
                         'total': report.total} if report else None,
            'operator_norm': self.opnorm,
            'level_attainment': {'per_level': per_level, 'overall': attained, 'tolerance': 1e-3},
            'control_range': [float(np.min(result.u)), float(np.max(result.u))],
            'wall_time': float(result.wall_time),
        }

    def _save(self):
        paths = self.pipeline_paths
        header = self._header()
        cs = self.scenario.control_space
        mesh = self.scenario.mesh
        control_df = pd.DataFrame({'node': cs.control_node_indices, 'x': cs.node_coordinates[:, 0],
                                   'y': cs.node_coordinates[:, 1], 'u': self.result.u})
        write_csv(control_df, paths['control'], header)
        write_field_csv(mesh, self.result.coefficient, paths['coefficient'], name='coefficient', header=header)
        write_field_vtk(mesh, self.result.coefficient, paths['coefficient_vtk'], name='coefficient',
                        title=f'reconstructed coefficient config {header["config_hash"]} seed {header["seed"]}')
        write_summary(self.summary, paths['summary'])
        self.scenario.config.to_yaml(paths['config'])
        logger.info(f'Wrote reconstruction to {self.output_dir}.')

    def run(self):
        self._load_data()
        self.pipeline_paths = get_pipeline_paths(self.output_dir)
        self._check_step_sizes()
        with CsvRowWriter(self.pipeline_paths['history'], HISTORY_COLUMNS, self._header()) as history:
            self.result = self.scenario.solver(self.y_d).run(on_check=history.write)
        self._summarize()
        self._save()
        return self.result
