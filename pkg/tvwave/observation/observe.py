import numpy as np

from tvwave import logger
from tvwave.discretization.mesh_fem import Mesh, Rectangle, assemble_mass, patch_mean_weights
from tvwave.discretization.wave_stepper import TimeGrid
from tvwave.utils.errors import ValidationError

OBSERVATION_KINDS = ('restriction', 'patch_mean')


class ObservationOperator:
    """
    Observation operator B with its adjoint and the observation-space inner product.

    restriction: nodal values on the closed observation region, inner product M_tau (x) M_o where
        M_o is the mass matrix of the triangles inside the region.
    patch_mean: one mean-value time series per patch, inner product M_tau on every series.
    """

    def __init__(self, mesh: Mesh, grid: TimeGrid, kind, region: Rectangle = None, patches=None):
        if kind not in OBSERVATION_KINDS:
            raise ValidationError(f'Unknown observation kind {kind!r}, expected one of {OBSERVATION_KINDS}.')
        self.mesh = mesh
        self.grid = grid
        self.kind = kind
        self.region = region
        self.patches = list(patches or [])
        self.temporal_mass = grid.mass_matrix()

        self.nodes = None
        self.spatial_mass = None
        self.weights = None
        if kind == 'restriction':
            self._build_restriction()
        else:
            self._build_patch_means()

    def _build_restriction(self):
        if self.region is None or self.region.is_degenerate:
            raise ValidationError('Restriction observation needs a non-degenerate region.')
        self.mesh.check_aligned(self.region, name='observation region')
        self.nodes = self.mesh.nodes_in(self.region)
        tris = self.mesh.triangles_in(self.region)
        mass = assemble_mass(self.mesh, tris)
        self.spatial_mass = mass[self.nodes][:, self.nodes].tocsr()
        logger.debug(f'Restriction observation on {len(self.nodes)} nodes, {len(tris)} triangles.')

    def _build_patch_means(self):
        if not self.patches:
            raise ValidationError('Patch-mean observation needs at least one patch.')
        self.weights = np.stack([patch_mean_weights(self.mesh, patch) for patch in self.patches])
        logger.debug(f'Patch-mean observation with {len(self.patches)} patches.')

    @property
    def size(self):
        return len(self.nodes) if self.kind == 'restriction' else len(self.patches)

    @property
    def shape(self):
        return self.grid.num_nodes, self.size

    def zeros(self):
        return Observation(self, np.zeros(self.shape))

    def observe(self, y):
        y = np.asarray(y)
        if y.shape != (self.grid.num_nodes, self.mesh.num_nodes):
            raise ValidationError(f'Trajectory shape {y.shape} does not match '
                                  f'{(self.grid.num_nodes, self.mesh.num_nodes)}.')
        if self.kind == 'restriction':
            return Observation(self, y[:, self.nodes].copy())
        return Observation(self, y @ self.weights.T)

    def _apply_spatial_mass(self, values):
        if self.kind == 'restriction':
            return (self.spatial_mass @ values.T).T
        return values

    def inner(self, o1, o2):
        self._check(o1)
        self._check(o2)
        return float(np.sum(o1.values * (self.temporal_mass @ self._apply_spatial_mass(o2.values))))

    def adjoint_observe(self, o):
        """Loads G^i with sum_i <y^i, G^i> = <B y, o>_O for every trajectory y."""
        self._check(o)
        weighted = self._apply_spatial_mass(self.temporal_mass @ o.values)
        if self.kind == 'restriction':
            loads = np.zeros((self.grid.num_nodes, self.mesh.num_nodes))
            loads[:, self.nodes] = weighted
            return loads
        return weighted @ self.weights

    def _check(self, o):
        if o.operator is not self and (o.kind != self.kind or o.values.shape != self.shape):
            raise ValidationError(f'Observation of kind {o.kind} with shape {o.values.shape} does not belong '
                                  f'to this {self.kind} space of shape {self.shape}.')

    def column_names(self):
        if self.kind == 'restriction':
            return [f'node_{n}' for n in self.nodes]
        return [f'patch_{k}' for k in range(len(self.patches))]


class Observation:
    """Element of the discrete observation space; values has one row per time node."""

    def __init__(self, operator: ObservationOperator, values):
        values = np.asarray(values, dtype=float)
        if values.shape != operator.shape:
            raise ValidationError(f'Observation values of shape {values.shape} do not match {operator.shape}.')
        self.operator = operator
        self.values = values

    @property
    def kind(self):
        return self.operator.kind

    @property
    def times(self):
        return self.operator.grid.times

    def _other_values(self, other):
        if isinstance(other, Observation):
            if other.kind != self.kind or other.values.shape != self.values.shape:
                raise ValidationError(f'Cannot combine observations of shapes {self.values.shape} '
                                      f'and {other.values.shape}.')
            return other.values
        return other

    def __add__(self, other):
        return Observation(self.operator, self.values + self._other_values(other))

    def __sub__(self, other):
        return Observation(self.operator, self.values - self._other_values(other))

    def __mul__(self, scalar):
        return Observation(self.operator, self.values * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Observation(self.operator, self.values / scalar)

    def __neg__(self):
        return Observation(self.operator, -self.values)

    def inner(self, other):
        return self.operator.inner(self, other)

    def norm(self):
        return np.sqrt(max(self.inner(self), 0.))

    def max_abs(self):
        return float(np.max(np.abs(self.values))) if self.values.size else 0.

    def copy(self):
        return Observation(self.operator, self.values.copy())
