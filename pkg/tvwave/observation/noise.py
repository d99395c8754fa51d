import numpy as np

from tvwave import logger
from tvwave.observation.observe import Observation
from tvwave.utils.errors import ValidationError

NOISE_KINDS = ('none', 'gaussian_relative', 'structured_cosine')


def add_noise_gaussian(o: Observation, level, seed):
    """o + level * max|o| * xi with independent standard normal xi."""
    if level < 0:
        raise ValidationError(f'Noise level must be nonnegative, got {level}.')
    if level == 0:
        return o.copy()
    xi = np.random.default_rng(seed).standard_normal(o.values.shape)
    return o + level * o.max_abs() * xi


def add_noise_cosine(o: Observation, delta, num_terms=10, seed=0):
    """
    Structured disturbance delta * eta_k * sum_i m_ik / i * cos(4 pi t - s_ik pi) on every series k.

    eta_k scales the disturbance of series k to the sup norm of the series itself; sup norms are
    taken over the time nodes.
    """
    if o.kind != 'patch_mean':
        raise ValidationError('Cosine noise is defined for patch-mean observations only.')
    if not 0 <= delta <= 1:
        raise ValidationError(f'Relative noise level must lie in [0, 1], got {delta}.')
    if delta == 0:
        return o.copy()
    rng = np.random.default_rng(seed)
    num_series = o.values.shape[1]
    magnitudes = rng.uniform(0., 1., size=(num_terms, num_series))
    shifts = rng.uniform(0., 1., size=(num_terms, num_series))

    t = o.times[:, None, None]
    i = np.arange(1, num_terms + 1)[None, :, None]
    disturbance = np.sum(magnitudes[None] / i * np.cos(4 * np.pi * t - shifts[None] * np.pi), axis=1)

    disturbance_sup = np.max(np.abs(disturbance), axis=0)
    if np.any(disturbance_sup == 0):
        raise ValidationError('Cosine disturbance vanishes on a series; its normalization is undefined.')
    eta = np.max(np.abs(o.values), axis=0) / disturbance_sup
    return o + delta * disturbance * eta[None, :]


class NoiseModel:
    def __init__(self, kind='none', level=0., num_terms=10, seed=0):
        if kind not in NOISE_KINDS:
            raise ValidationError(f'Unknown noise kind {kind!r}, expected one of {NOISE_KINDS}.')
        self.kind = kind
        self.level = float(level)
        self.num_terms = int(num_terms)
        self.seed = int(seed)

    def apply(self, o: Observation):
        logger.info(f'Adding {self.kind} noise, level {self.level}, seed {self.seed}.')
        if self.kind == 'gaussian_relative':
            return add_noise_gaussian(o, self.level, self.seed)
        if self.kind == 'structured_cosine':
            return add_noise_cosine(o, self.level, self.num_terms, self.seed)
        return o.copy()
