import copy
import hashlib
import os

import numpy as np
import yaml

from tvwave import logger
from tvwave.discretization.mesh_fem import Mesh, Rectangle
from tvwave.observation.noise import NOISE_KINDS
from tvwave.observation.observe import OBSERVATION_KINDS
from tvwave.utils.errors import ValidationError

DEFAULTS = {
    'domain': {'bounds': [-1., 1., -1., 1.]},
    'mesh': {'nx': 9, 'ny': 9},
    'time': {'final_time': 2., 'num_steps': 8, 'sigma': 0.25, 'allow_cfl_violation': False},
    'control': {'region': [-1., 1., -1., 0.5], 'offset': 1., 'levels': [0., 0.1, 0.2, 0.3, 0.4]},
    'observation': {'kind': 'restriction', 'region': [-1., 1., 0.5, 1.], 'patches': []},
    'forcing': {'sources': [], 'boundary_segment': None},
    'exact_coefficient': {'background': 0., 'boxes': []},
    'noise': {'kind': 'none', 'level': 0., 'num_terms': 10, 'seed': 0},
    'regularization': {'alpha': 1e-5, 'beta': 1e-4},
    'solver': {'gamma_f': 0.1, 'gamma_g': 1e3, 'tol': 1e-6, 'max_iter': 5000, 'check_every': 10,
               'riesz_map': True, 'norm_iterations': 10},
}

RECONSTRUCTION_SECTIONS = ('regularization', 'solver')

SOURCE_DEFAULTS = {'amplitude': 2., 'frequency': 5., 'delay': 0.1, 'placement': 'interior'}


def _merge(defaults, overrides, path=''):
    merged = copy.deepcopy(defaults)
    for key, value in (overrides or {}).items():
        if key not in defaults:
            raise ValidationError(f'Unknown configuration key {path + key!r}.')
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ValidationError(f'Configuration section {path + key!r} must be a mapping.')
            merged[key] = _merge(defaults[key], value, path + key + '.')
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _to_builtin(value):
    """Plain python scalars and lists so the canonical form dumps the same way from numpy or yaml input."""
    if isinstance(value, dict):
        return {str(k): _to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_to_builtin(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    return value


class ScenarioConfig:
    """
    Sectioned scenario description: geometry, discretization, forcing, exact coefficient, noise,
    regularization and solver settings.
    """

    def __init__(self, sections=None, name=None):
        self.name = name
        self.sections = _merge(DEFAULTS, sections)
        self.sections['forcing']['sources'] = [self._complete_source(s) for s in self.sections['forcing']['sources']]
        self.sections = _to_builtin(self.sections)

    @staticmethod
    def _complete_source(source):
        if 'location' not in source:
            raise ValidationError(f'Source {source} has no location.')
        return _merge({**SOURCE_DEFAULTS, 'location': None}, source, 'forcing.sources.')

    def __getitem__(self, section):
        return self.sections[section]

    def __eq__(self, other):
        return isinstance(other, ScenarioConfig) and self.to_dict() == other.to_dict()

    @classmethod
    def from_dict(cls, data, name=None):
        data = dict(data or {})
        name = data.pop('name', name)
        return cls(data, name=name)

    def to_dict(self):
        data = copy.deepcopy(self.sections)
        if self.name is not None:
            data['name'] = self.name
        return data

    def to_yaml(self, path=None):
        text = yaml.safe_dump(self.to_dict(), sort_keys=True, default_flow_style=None)
        if path is not None:
            with open(path, 'w', encoding='utf-8') as f:
                f.write(text)
        return text

    @classmethod
    def from_yaml(cls, path):
        if not os.path.exists(path):
            raise ValidationError(f'Configuration file {path} does not exist.')
        with open(path, 'r', encoding='utf-8') as f:
            try:
                data = yaml.safe_load(f)
            except yaml.YAMLError as e:
                raise ValidationError(f'Could not parse {path}: {e}') from e
        if data is not None and not isinstance(data, dict):
            raise ValidationError(f'Configuration file {path} must contain a mapping.')
        logger.debug(f'Loaded configuration from {path}.')
        return cls.from_dict(data)

    @classmethod
    def preset(cls, name, **overrides):
        from tvwave.scenario.presets import get_preset
        return get_preset(name).with_overrides(**overrides)

    def config_hash(self):
        canonical = yaml.safe_dump(self.to_dict(), sort_keys=True, default_flow_style=None)
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()[:16]

    def data_hash(self):
        """Hash of everything the synthetic data depends on; solver and regularization settings are left out."""
        data = {key: value for key, value in self.sections.items() if key not in RECONSTRUCTION_SECTIONS}
        canonical = yaml.safe_dump(data, sort_keys=True, default_flow_style=None)
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()[:16]

    def with_resolution(self, nx=None, ny=None, num_steps=None):
        data = self.to_dict()
        if nx is not None:
            data['mesh']['nx'] = int(nx)
        if ny is not None:
            data['mesh']['ny'] = int(ny)
        if num_steps is not None:
            data['time']['num_steps'] = int(num_steps)
        return ScenarioConfig.from_dict(data)

    def with_overrides(self, seed=None, max_iter=None, tol=None, alpha=None, beta=None):
        data = self.to_dict()
        if seed is not None:
            data['noise']['seed'] = int(seed)
        if max_iter is not None:
            data['solver']['max_iter'] = int(max_iter)
        if tol is not None:
            data['solver']['tol'] = float(tol)
        if alpha is not None:
            data['regularization']['alpha'] = float(alpha)
        if beta is not None:
            data['regularization']['beta'] = float(beta)
        return ScenarioConfig.from_dict(data)

    def rect(self, section, key):
        bounds = self.sections[section][key]
        return None if bounds is None else Rectangle.from_bounds(bounds)

    @property
    def domain(self):
        return self.rect('domain', 'bounds')

    @property
    def control_region(self):
        return self.rect('control', 'region')

    @property
    def observation_region(self):
        return self.rect('observation', 'region')

    @property
    def patches(self):
        return [Rectangle.from_bounds(p) for p in self.sections['observation']['patches']]

    @property
    def boundary_segment(self):
        return self.rect('forcing', 'boundary_segment')

    @property
    def exact_boxes(self):
        return [(Rectangle.from_bounds(box['bounds']), float(box['value']))
                for box in self.sections['exact_coefficient']['boxes']]

    def _check_positive(self, section, key, allow_zero=False):
        value = self.sections[section][key]
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ValidationError(f'{section}.{key} must be a number, got {value!r}.')
        if value < 0 or (value == 0 and not allow_zero):
            raise ValidationError(f'{section}.{key} must be {"nonnegative" if allow_zero else "positive"}, '
                                  f'got {value}.')

    def _check_inside(self, rect: Rectangle, container: Rectangle, name):
        if not (container.contains([[rect.x0, rect.y0], [rect.x1, rect.y1]]).all()):
            raise ValidationError(f'{name} {rect} is not inside {container}.')

    def validate(self, mesh: Mesh = None):
        """Check every constraint that does not need a solve; with a mesh also check geometry alignment."""
        s = self.sections
        domain = self.domain
        if domain.is_degenerate:
            raise ValidationError(f'Domain {domain} has zero width or height.')
        for key in ('nx', 'ny'):
            if int(s['mesh'][key]) < 2:
                raise ValidationError(f'mesh.{key} must be at least 2, got {s["mesh"][key]}.')
        self._check_positive('time', 'final_time')
        if int(s['time']['num_steps']) < 1:
            raise ValidationError(f'time.num_steps must be at least 1, got {s["time"]["num_steps"]}.')
        self._check_positive('time', 'sigma', allow_zero=True)

        from tvwave.optimization.prox_reg import MultiBangLevels
        levels = MultiBangLevels(s['control']['levels'])
        self._check_positive('control', 'offset')
        if s['control']['offset'] + levels.lower <= 0:
            raise ValidationError('Offset plus the lowest level must be positive so the coefficient stays positive.')
        control = self.control_region
        if control.is_degenerate:
            raise ValidationError(f'Control region {control} has zero area.')
        self._check_inside(control, domain, 'Control region')

        kind = s['observation']['kind']
        if kind not in OBSERVATION_KINDS:
            raise ValidationError(f'Unknown observation kind {kind!r}, expected one of {OBSERVATION_KINDS}.')
        if kind == 'restriction':
            if self.observation_region is None:
                raise ValidationError('Restriction observation needs observation.region.')
            self._check_inside(self.observation_region, domain, 'Observation region')
        elif not self.patches:
            raise ValidationError('Patch-mean observation needs at least one patch.')
        for num, patch in enumerate(self.patches):
            self._check_inside(patch, domain, f'Observation patch {num}')

        for num, source in enumerate(s['forcing']['sources']):
            if source['placement'] not in ('interior', 'boundary'):
                raise ValidationError(f'Source {num} has unknown placement {source["placement"]!r}.')
            if source['placement'] == 'boundary' and self.boundary_segment is None:
                raise ValidationError('Boundary sources need forcing.boundary_segment.')
            if not domain.contains(source['location'])[0]:
                raise ValidationError(f'Source {num} at {source["location"]} lies outside the domain.')

        background = s['exact_coefficient']['background']
        for num, (rect, value) in enumerate([(None, background)] + self.exact_boxes):
            if rect is not None:
                self._check_inside(rect, control, f'Exact-coefficient box {num - 1}')
            if not levels.lower <= value <= levels.upper:
                raise ValidationError(f'Exact-coefficient value {value} is outside [{levels.lower}, {levels.upper}].')

        noise = s['noise']
        if noise['kind'] not in NOISE_KINDS:
            raise ValidationError(f'Unknown noise kind {noise["kind"]!r}, expected one of {NOISE_KINDS}.')
        self._check_positive('noise', 'level', allow_zero=True)
        if noise['kind'] == 'structured_cosine':
            if kind != 'patch_mean':
                raise ValidationError('Cosine noise needs a patch-mean observation.')
            if noise['level'] > 1:
                raise ValidationError(f'Cosine noise level must lie in [0, 1], got {noise["level"]}.')
        if int(noise['num_terms']) < 1:
            raise ValidationError(f'noise.num_terms must be at least 1, got {noise["num_terms"]}.')

        self._check_positive('regularization', 'alpha', allow_zero=True)
        self._check_positive('regularization', 'beta', allow_zero=True)
        self._check_positive('solver', 'gamma_f')
        self._check_positive('solver', 'gamma_g')
        self._check_positive('solver', 'tol')
        for key in ('max_iter', 'check_every'):
            if int(s['solver'][key]) < 1:
                raise ValidationError(f'solver.{key} must be at least 1, got {s["solver"][key]}.')
        if int(s['solver']['norm_iterations']) < 0:
            raise ValidationError('solver.norm_iterations must be nonnegative.')

        if mesh is not None:
            self._validate_alignment(mesh)

    def _validate_alignment(self, mesh: Mesh):
        mesh.check_aligned(self.control_region, name='Control region')
        if self.sections['observation']['kind'] == 'restriction':
            mesh.check_aligned(self.observation_region, name='Observation region')
        for num, patch in enumerate(self.patches):
            mesh.check_aligned(patch, name=f'Observation patch {num}')
