"""
Named scenarios.

transmission: sources below the control region, state recorded on the strip above it.
reflection: sources and ten mean-value receivers along the top edge, control region underneath.
small: 9x9 mesh with eight time steps, for diagnostics and tests.
"""
from tvwave.scenario.config import ScenarioConfig
from tvwave.utils.errors import ValidationError


def _lumped_step(euclidean_step, bounds, nx, ny):
    """gamma_G in the lumped-mass geometry that moves interior nodes as far as euclidean_step does without it."""
    x0, x1, y0, y1 = bounds
    return euclidean_step * (x1 - x0) / (nx - 1) * (y1 - y0) / (ny - 1)


def _transmission_sources():
    first_row = [{'location': [i / 10, -0.9]} for i in range(-9, 10)]
    second_row = [{'location': [0.05 + i / 10, -0.8]} for i in range(-9, 10)]
    return first_row + second_row


def transmission():
    return ScenarioConfig.from_dict({
        'name': 'transmission',
        'domain': {'bounds': [-1., 1., -1., 2.]},
        'mesh': {'nx': 64, 'ny': 64},
        'time': {'final_time': 3., 'num_steps': 128, 'sigma': 0.25},
        'control': {'region': [-1., 1., 0., 1.], 'offset': 1., 'levels': [0., 0.1, 0.2, 0.3, 0.4]},
        'observation': {'kind': 'restriction', 'region': [-1., 1., 1., 2.]},
        'forcing': {'sources': _transmission_sources()},
        'exact_coefficient': {'background': 0., 'boxes': [
            {'bounds': [-0.8, -0.3, 0.2, 0.8], 'value': 0.2},
            {'bounds': [0.2, 0.7, 0.1, 0.4], 'value': 0.4},
            {'bounds': [0.3, 0.8, 0.55, 0.85], 'value': 0.1},
            {'bounds': [-0.2, 0.1, 0.4, 0.7], 'value': 0.3},
            {'bounds': [-0.6, -0.45, 0.35, 0.6], 'value': 0.4},
        ]},
        'noise': {'kind': 'gaussian_relative', 'level': 0.1, 'seed': 0},
        'regularization': {'alpha': 1e-5, 'beta': 1e-4},
        'solver': {'gamma_f': 0.1, 'gamma_g': _lumped_step(1e3, [-1., 1., -1., 2.], 64, 64), 'tol': 1e-6,
                   'max_iter': 15000, 'check_every': 10},
    })


def transmission_misspecified():
    """Desired values 10 % above the values the exact coefficient takes."""
    data = transmission().to_dict()
    data['name'] = 'transmission_misspecified'
    data['control']['levels'] = [1.1 * i / 10 for i in range(5)]
    return ScenarioConfig.from_dict(data)


def _reflection(name, nodes, num_steps):
    # 121 nodes (h = 1/60) resolve both y = 0.7 and the 0.2-wide patches; 129 does not
    return ScenarioConfig.from_dict({
        'name': name,
        'domain': {'bounds': [-1., 1., -1., 1.]},
        'mesh': {'nx': nodes, 'ny': nodes},
        'time': {'final_time': 3., 'num_steps': num_steps, 'sigma': 0.25},
        # upper level 3 matches the largest exact value
        'control': {'region': [-1., 1., -1., 0.7], 'offset': 1., 'levels': [0., 1., 2., 3.]},
        'observation': {'kind': 'patch_mean', 'region': None,
                        'patches': [[o / 10, o / 10 + 0.2, 0.8, 1.] for o in range(-10, 10, 2)]},
        'forcing': {'sources': [{'location': [-1. + 0.1 * k, 1.], 'placement': 'boundary'} for k in range(21)],
                    'boundary_segment': [-1., 1., 1., 1.]},
        'exact_coefficient': {'background': 0., 'boxes': [
            {'bounds': [0.4, 0.6, 0.1, 0.4], 'value': 3.},
            {'bounds': [-0.8, -0.5, 0.2, 0.6], 'value': 2.},
            {'bounds': [-0.2, 0.2, 0.3, 0.5], 'value': 1.},
        ]},
        'noise': {'kind': 'structured_cosine', 'level': 0.05, 'num_terms': 10, 'seed': 0},
        'regularization': {'alpha': 0., 'beta': 1e-4},
        # same step on both resolutions, taken from the 121-node mesh
        'solver': {'gamma_f': 0.1, 'gamma_g': _lumped_step(1e3, [-1., 1., -1., 1.], 121, 121), 'tol': 1e-4,
                   'max_iter': 5000, 'check_every': 10},
    })


def reflection():
    return _reflection('reflection', 121, 129)


def reflection_half():
    return _reflection('reflection_half', 61, 65)


def small():
    return ScenarioConfig.from_dict({
        'name': 'small',
        'domain': {'bounds': [-1., 1., -1., 1.]},
        'mesh': {'nx': 9, 'ny': 9},
        'time': {'final_time': 2., 'num_steps': 8, 'sigma': 0.25},
        'control': {'region': [-1., 1., -1., 0.5], 'offset': 1., 'levels': [0., 0.1, 0.2, 0.3, 0.4]},
        'observation': {'kind': 'restriction', 'region': [-1., 1., 0.5, 1.]},
        'forcing': {'sources': [{'location': [x, -0.8], 'frequency': 1., 'delay': 0.5} for x in (-0.5, 0., 0.5)]},
        'exact_coefficient': {'background': 0., 'boxes': [{'bounds': [-0.5, 0.5, -0.5, 0.25], 'value': 0.2}]},
        'noise': {'kind': 'gaussian_relative', 'level': 0.01, 'seed': 0},
        'regularization': {'alpha': 1e-5, 'beta': 1e-4},
        'solver': {'gamma_f': 0.1, 'gamma_g': 10., 'tol': 1e-6, 'max_iter': 200, 'check_every': 10},
    })


def small_patches():
    data = small().to_dict()
    data['name'] = 'small_patches'
    data['observation'] = {'kind': 'patch_mean', 'region': None,
                           'patches': [[-1., -0.5, 0.5, 1.], [-0.5, 0., 0.5, 1.], [0., 0.5, 0.5, 1.], [0.5, 1., 0.5, 1.]]}
    data['noise'] = {'kind': 'structured_cosine', 'level': 0.05, 'num_terms': 10, 'seed': 0}
    return ScenarioConfig.from_dict(data)


PRESETS = {
    'transmission': transmission,
    'transmission_misspecified': transmission_misspecified,
    'reflection': reflection,
    'reflection_half': reflection_half,
    'small': small,
    'small_patches': small_patches,
}


def get_preset(name):
    if name not in PRESETS:
        raise ValidationError(f'Unknown preset {name!r}, expected one of {sorted(PRESETS)}.')
    return PRESETS[name]()
