import numpy as np

from tvwave.observation.observe import Observation
from tvwave.utils.errors import ValidationError


class MultiBangLevels:
    """Strictly increasing desired values u_1 < ... < u_m; u_1 and u_m double as box constraints."""

    def __init__(self, levels):
        levels = np.asarray(levels, dtype=float).ravel()
        if len(levels) < 2:
            raise ValidationError(f'Need at least two multi-bang levels, got {levels.tolist()}.')
        if not np.all(np.isfinite(levels)):
            raise ValidationError(f'Multi-bang levels must be finite, got {levels.tolist()}.')
        if np.any(np.diff(levels) <= 0):
            raise ValidationError(f'Multi-bang levels must be strictly increasing, got {levels.tolist()}.')
        self.values = levels

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    @property
    def lower(self):
        return float(self.values[0])

    @property
    def upper(self):
        return float(self.values[-1])

    def tolerance(self):
        return 1e-12 * max(1., np.max(np.abs(self.values)))

    def is_feasible(self, u):
        tol = self.tolerance()
        u = np.asarray(u)
        return bool(np.all((u >= self.lower - tol) & (u <= self.upper + tol)))


def _as_levels(levels):
    return levels if isinstance(levels, MultiBangLevels) else MultiBangLevels(levels)


def multibang_scalar(t, levels):
    """Pointwise penalty g: 1/2 ((u_i + u_{i+1}) t - u_i u_{i+1}) on [u_i, u_{i+1}], +inf outside [u_1, u_m]."""
    levels = _as_levels(levels)
    u = levels.values
    t = np.asarray(t, dtype=float)
    tol = levels.tolerance()
    clipped = np.clip(t, u[0], u[-1])
    segment = np.clip(np.searchsorted(u, clipped, side='right') - 1, 0, len(u) - 2)
    lo, hi = u[segment], u[segment + 1]
    value = 0.5 * ((lo + hi) * clipped - lo * hi)
    return np.where((t < u[0] - tol) | (t > u[-1] + tol), np.inf, value)


def multibang_value(u, levels, weights):
    """sum_i d_i g(u_i); +inf if any entry leaves [u_1, u_m]."""
    return float(np.sum(np.asarray(weights) * multibang_scalar(u, levels)))


def multibang_penalty(u, alpha, levels, weights):
    """alpha * G(u) with 0 * inf read as the indicator of the box, so alpha = 0 keeps the constraints."""
    if alpha == 0:
        return 0. if _as_levels(levels).is_feasible(u) else np.inf
    return alpha * multibang_value(u, levels, weights)


def multibang_prox(v, gamma_alpha, levels):
    """
    Proximal map of gamma_alpha * g applied componentwise.

    The lumped weights d_i cancel, so the same map is the prox of gamma_alpha * G in the lumped inner
    product. Plateaus are closed: a value on the border between a plateau and a sloped piece maps to
    the level.
    """
    if gamma_alpha < 0:
        raise ValidationError(f'Prox parameter must be nonnegative, got {gamma_alpha}.')
    u = _as_levels(levels).values
    v = np.asarray(v, dtype=float)
    half = 0.5 * gamma_alpha
    w = np.full_like(v, u[0])
    for lo, hi in zip(u[:-1], u[1:]):
        shift = half * (lo + hi)
        above = v > lo + shift
        w = np.where(above, np.minimum(v - shift, hi), w)
    return w


def tv_value(u, gradient_op):
    """Isotropic discrete total variation sum_K |(A_h u)_K|_2."""
    return float(np.sum(np.linalg.norm((gradient_op @ u).reshape(-1, 2), axis=1)))


def project_dual_ball(psi, beta):
    """Radial projection of every per-triangle 2-vector onto the closed beta-ball."""
    if beta < 0:
        raise ValidationError(f'TV weight must be nonnegative, got {beta}.')
    psi = np.asarray(psi, dtype=float)
    shape = psi.shape
    vectors = psi.reshape(-1, 2)
    if beta == 0:
        return np.zeros(shape)
    norms = np.linalg.norm(vectors, axis=1)
    scale = beta / np.maximum(beta, norms)
    return (vectors * scale[:, None]).reshape(shape)


def prox_Fstar_residual(r: Observation, gamma_f, y_new: Observation, y_d: Observation):
    """Resolvent of the conjugate tracking term: (r + gamma_f (y_new - y_d)) / (1 + gamma_f)."""
    if gamma_f < 0:
        raise ValidationError(f'Dual step must be nonnegative, got {gamma_f}.')
    return (r + gamma_f * (y_new - y_d)) / (1. + gamma_f)
