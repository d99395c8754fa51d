import os

import numpy as np

from tvwave import logger

PIPELINE_FILES = {
    'config': 'config.yaml',
    'observation': 'observation.csv',
    'observation_clean': 'observation_clean.csv',
    'exact_control': 'exact_control.csv',
    'exact_coefficient': 'exact_coefficient.csv',
    'exact_coefficient_vtk': 'exact_coefficient.vtk',
    'control': 'control.csv',
    'coefficient': 'coefficient.csv',
    'coefficient_vtk': 'coefficient.vtk',
    'history': 'history.csv',
    'summary': 'summary.yaml',
}


def get_pipeline_paths(output_dir, create=True):
    if create and not os.path.exists(output_dir):
        logger.debug(f'Creating output directory {output_dir}.')
        os.makedirs(output_dir)
    return {key: os.path.join(output_dir, filename) for key, filename in PIPELINE_FILES.items()}


def level_attainment(u, levels, tol=1e-3):
    """Fraction of entries within tol of each level, and of any level."""
    u = np.asarray(u)
    if u.size == 0:
        return {}, 0.
    close = np.abs(u[:, None] - np.asarray(levels)[None, :]) <= tol
    per_level = {float(level): float(frac) for level, frac in zip(levels, close.mean(axis=0))}
    return per_level, float(close.any(axis=1).mean())


def jaccard(mask_a, mask_b):
    mask_a = np.asarray(mask_a, dtype=bool)
    mask_b = np.asarray(mask_b, dtype=bool)
    union = np.count_nonzero(mask_a | mask_b)
    if union == 0:
        return 1.
    return np.count_nonzero(mask_a & mask_b) / union
