import os

import numpy as np
import pandas as pd
import yaml

from tvwave import logger
from tvwave.discretization.mesh_fem import Mesh
from tvwave.observation.observe import Observation, ObservationOperator
from tvwave.utils.errors import ValidationError

FLOAT_FORMAT = '%.17g'


def _header_lines(header):
    return [f'# {key}: {value}\n' for key, value in header.items()]


def write_csv(df: pd.DataFrame, path, header=None):
    """CSV with '#'-prefixed key: value lines in front of the column row."""
    with open(path, 'w', encoding='utf-8', newline='') as f:
        f.writelines(_header_lines(header or {}))
        df.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    logger.debug(f'Wrote {len(df)} rows to {path}.')
    return path


class CsvRowWriter:
    """Same layout as write_csv, one row at a time; every row is flushed so the file can be followed during a run."""

    def __init__(self, path, columns, header=None):
        self.path = path
        self.columns = list(columns)
        self.header = header or {}
        self.num_rows = 0
        self._file = None

    def __enter__(self):
        self._file = open(self.path, 'w', encoding='utf-8', newline='')
        self._file.writelines(_header_lines(self.header))
        pd.DataFrame(columns=self.columns).to_csv(self._file, index=False, lineterminator='\n')
        self._file.flush()
        return self

    def write(self, row):
        pd.DataFrame([row], columns=self.columns).to_csv(self._file, index=False, header=False,
                                                         float_format=FLOAT_FORMAT, lineterminator='\n')
        self._file.flush()
        self.num_rows += 1

    def __exit__(self, exc_type, exc_value, traceback):
        self._file.close()
        logger.debug(f'Wrote {self.num_rows} rows to {self.path}.')
        return False


def read_header(path):
    header = {}
    with open(path, 'r', encoding='utf-8') as f:
        for line in f:
            if not line.startswith('#'):
                break
            key, _, value = line[1:].strip().partition(':')
            header[key.strip()] = value.strip()
    return header


def read_csv(path):
    if not os.path.exists(path):
        raise ValidationError(f'Data file {path} does not exist.')
    header = read_header(path)
    return pd.read_csv(path, comment='#'), header


def observation_frame(o: Observation):
    df = pd.DataFrame(o.values, columns=o.operator.column_names())
    df.insert(0, 'time', o.times)
    return df


def write_observation(o: Observation, path, header=None):
    return write_csv(observation_frame(o), path, header)


def read_observation(path, operator: ObservationOperator):
    df, header = read_csv(path)
    expected = ['time'] + operator.column_names()
    if list(df.columns) != expected or len(df) != operator.grid.num_nodes:
        raise ValidationError(f'Observation file {path} has {len(df)} rows and columns {list(df.columns)[:4]}..., '
                              f'expected {operator.grid.num_nodes} rows and columns {expected[:4]}...')
    if not np.allclose(df['time'].to_numpy(), operator.grid.times, rtol=0, atol=1e-12):
        raise ValidationError(f'Time nodes in {path} do not match the configured time grid.')
    return Observation(operator, df[expected[1:]].to_numpy(dtype=float)), header


def field_frame(mesh: Mesh, values, name='value'):
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.num_nodes,):
        raise ValidationError(f'Field has shape {values.shape}, expected ({mesh.num_nodes},).')
    return pd.DataFrame({'x': mesh.nodes[:, 0], 'y': mesh.nodes[:, 1], name: values})


def write_field_csv(mesh: Mesh, values, path, name='value', header=None):
    return write_csv(field_frame(mesh, values, name), path, header)


def write_field_vtk(mesh: Mesh, values, path, name='value', title='tvwave field'):
    """Legacy ASCII VTK structured-points file; nodes are already ordered x-fastest."""
    values = field_frame(mesh, values, name)[name].to_numpy()
    lines = ['# vtk DataFile Version 3.0', title, 'ASCII', 'DATASET STRUCTURED_POINTS',
             f'DIMENSIONS {mesh.nx} {mesh.ny} 1',
             f'ORIGIN {mesh.domain.x0!r} {mesh.domain.y0!r} 0',
             f'SPACING {mesh.hx!r} {mesh.hy!r} 1',
             f'POINT_DATA {mesh.num_nodes}',
             f'SCALARS {name} double 1',
             'LOOKUP_TABLE default']
    lines += [FLOAT_FORMAT % v for v in values]
    with open(path, 'w', encoding='utf-8', newline='') as f:
        f.write('\n'.join(lines) + '\n')
    return path


def write_summary(summary, path):
    with open(path, 'w', encoding='utf-8') as f:
        yaml.safe_dump(summary, f, sort_keys=False)
    return path


def read_summary(path):
    with open(path, 'r', encoding='utf-8') as f:
        return yaml.safe_load(f)
