import hashlib
from collections import OrderedDict

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu
from scipy.special import roots_legendre

from tvwave import logger
from tvwave.discretization.mesh_fem import Mesh, Rectangle, assemble_load, assemble_mass, assemble_stiffness, \
    point_source_load
from tvwave.utils.errors import InstabilityError, SolverError, ValidationError


class TimeGrid:
    def __init__(self, final_time, num_steps):
        if final_time <= 0:
            raise ValidationError(f'Final time must be positive, got {final_time}.')
        if num_steps < 1:
            raise ValidationError(f'Need at least one time step, got {num_steps}.')
        self.final_time = float(final_time)
        self.num_steps = int(num_steps)
        self.tau = self.final_time / self.num_steps
        self.times = np.linspace(0., self.final_time, self.num_steps + 1)

    @property
    def num_nodes(self):
        return self.num_steps + 1

    def mass_matrix(self):
        """P1 temporal mass matrix; row sums are tau in the interior and tau/2 at the ends."""
        n = self.num_nodes
        main = np.full(n, 2 * self.tau / 3)
        main[[0, -1]] = self.tau / 3
        off = np.full(n - 1, self.tau / 6)
        return sparse.diags([off, main, off], [-1, 0, 1], format='csr')

    def stiffness_matrix(self):
        n = self.num_nodes
        main = np.full(n, 2 / self.tau)
        main[[0, -1]] = 1 / self.tau
        off = np.full(n - 1, -1 / self.tau)
        return sparse.diags([off, main, off], [-1, 0, 1], format='csr')


def ricker(t, a, h, t0):
    arg = (np.pi * h * (np.asarray(t, dtype=float) - t0)) ** 2
    return a * (1 - 2 * arg) * np.exp(-arg)


class PointSource:
    """Point source with a Ricker time signature, or any amplitude function of time."""

    def __init__(self, location, amplitude=2., frequency=5., delay=0.1, placement='interior',
                 amplitude_fn=None):
        if placement not in ('interior', 'boundary'):
            raise ValidationError(f"Source placement must be 'interior' or 'boundary', got {placement!r}.")
        self.location = np.asarray(location, dtype=float)
        self.amplitude = amplitude
        self.frequency = frequency
        self.delay = delay
        self.placement = placement
        self.amplitude_fn = amplitude_fn

    def __call__(self, t):
        if self.amplitude_fn is not None:
            return np.asarray(self.amplitude_fn(t), dtype=float) * np.ones_like(t, dtype=float)
        return ricker(t, self.amplitude, self.frequency, self.delay)


class ForcingSpec:
    def __init__(self, sources=(), boundary_segment: Rectangle = None):
        self.sources = list(sources)
        self.boundary_segment = boundary_segment

    def validate(self, mesh: Mesh):
        for num, source in enumerate(self.sources):
            if not mesh.domain.contains(source.location)[0]:
                raise ValidationError(f'Source {num} at {source.location.tolist()} lies outside the domain.')
            if source.placement == 'boundary':
                if self.boundary_segment is None:
                    raise ValidationError('Boundary sources need a boundary segment.')
                if not self.boundary_segment.contains(source.location)[0]:
                    raise ValidationError(f'Source {num} at {source.location.tolist()} is not on the boundary '
                                          f'segment {self.boundary_segment}.')

    def spatial_loads(self, mesh: Mesh):
        """(num_sources, num_nodes) array of point loads phi_i(x_k)."""
        self.validate(mesh)
        if not self.sources:
            return np.zeros((0, mesh.num_nodes))
        return np.stack([point_source_load(mesh, source.location) for source in self.sources])


def hat_integrals(amplitude, grid: TimeGrid, order=5):
    """int amplitude(t) e_i(t) dt for every temporal hat e_i, by Gauss quadrature on each sub-interval."""
    points, weights = roots_legendre(order)
    left = grid.times[:-1]
    s = (points + 1) / 2
    t = left[:, None] + grid.tau * s[None, :]
    w = grid.tau / 2 * weights
    values = amplitude(t) * w[None, :]
    result = np.zeros(grid.num_nodes)
    # rising half of e_{i+1} and falling half of e_i on [t_i, t_{i+1}]
    result[1:] += values @ s
    result[:-1] += values @ (1 - s)
    return result


def temporal_force_loads(forcing: ForcingSpec, grid: TimeGrid, mesh: Mesh, order=5):
    """Loads F^0 ... F^{N-1} as a (num_steps, num_nodes) array."""
    loads = np.zeros((grid.num_steps, mesh.num_nodes))
    if not forcing.sources:
        return loads
    spatial = forcing.spatial_loads(mesh)
    temporal = np.stack([hat_integrals(source, grid, order=order)[:-1] for source in forcing.sources], axis=1)
    return temporal @ spatial


class StepperWorkspace:
    """Operators of the three-term recursion for one coefficient, with the factorized system matrix."""

    def __init__(self, mass, stiffness, tau, sigma):
        self.mass = mass
        self.stiffness = stiffness
        self.sigma = sigma
        tau_sq = tau ** 2
        self.system = (mass + sigma * tau_sq * stiffness).tocsc()
        self.middle = (-2 * mass + (1 - 2 * sigma) * tau_sq * stiffness).tocsr()
        self.first = (-mass + (0.5 - sigma) * tau_sq * stiffness).tocsr()
        try:
            self.lu = splu(self.system)
        except RuntimeError as e:
            raise SolverError(f'Factorization of the stepping matrix failed: {e}') from e

    def solve(self, rhs):
        return self.lu.solve(rhs)


class WaveStepper:
    """
    Forward, adjoint and linearized sweeps of the stabilized space-time scheme.

    Row e of the (tau-scaled) stepping system reads
        S y^{e+1} + C y^e + S y^{e-1} = b_e,   S = M + sigma tau^2 A,  C = -2M + (1 - 2 sigma) tau^2 A,
    with the first row S y^1 + (-M + (1/2 - sigma) tau^2 A) y^0 = b_0. The adjoint sweep solves the
    transposed block system backwards with the same factorization.
    """

    def __init__(self, mesh: Mesh, grid: TimeGrid, sigma=0.25,
                 cfl_safety=0.9, allow_cfl_violation=False, cache_size=2):
        if sigma < 0:
            raise ValidationError(f'Stabilization parameter must be nonnegative, got {sigma=}.')
        self.mesh = mesh
        self.grid = grid
        self.sigma = float(sigma)
        self.cfl_safety = cfl_safety
        self.allow_cfl_violation = allow_cfl_violation
        self.cache_size = cache_size

        self.mass = assemble_mass(mesh)
        self._mass_lu = None
        self._workspaces = OrderedDict()
        self._cfl_checked = set()

        self.num_factorizations = 0
        self.num_forward = 0
        self.num_adjoint = 0
        self.num_linearized = 0

    def _key(self, coeff):
        return hashlib.sha1(np.ascontiguousarray(coeff, dtype=float).tobytes()).hexdigest()

    def workspace(self, coeff):
        key = self._key(coeff)
        if key in self._workspaces:
            self._workspaces.move_to_end(key)
            return self._workspaces[key]
        stiffness = assemble_stiffness(self.mesh, coeff)
        if self.sigma < 0.25 and key not in self._cfl_checked:
            self.check_cfl(stiffness)
            self._cfl_checked.add(key)
        logger.debug(f'Factorizing stepping matrix ({self.mesh.num_nodes} nodes).')
        workspace = StepperWorkspace(self.mass, stiffness, self.grid.tau, self.sigma)
        self.num_factorizations += 1
        self._workspaces[key] = workspace
        while len(self._workspaces) > self.cache_size:
            self._workspaces.popitem(last=False)
        return workspace

    def _solve_mass(self, rhs):
        if self._mass_lu is None:
            self._mass_lu = splu(self.mass.tocsc())
        return self._mass_lu.solve(rhs)

    def spectral_radius(self, stiffness, iterations=100, rtol=1e-8, seed=0):
        """Power-iteration estimate of the largest eigenvalue of M^{-1} A."""
        v = np.random.default_rng(seed).standard_normal(self.mesh.num_nodes)
        v /= np.sqrt(v @ (self.mass @ v))
        estimate = 0.
        for _ in range(iterations):
            av = stiffness @ v
            new_estimate = v @ av
            w = self._solve_mass(av)
            v = w / np.sqrt(w @ (self.mass @ w))
            converged = abs(new_estimate - estimate) <= rtol * abs(new_estimate)
            estimate = new_estimate
            if converged:
                break
        return float(estimate)

    def cfl_limit(self, stiffness):
        if self.sigma >= 0.25:
            return np.inf
        return 2. / np.sqrt((1 - 4 * self.sigma) * self.spectral_radius(stiffness))

    def check_cfl(self, stiffness):
        limit = self.cfl_limit(stiffness)
        if self.grid.tau <= self.cfl_safety * limit:
            return
        message = (f'Time step {self.grid.tau:.4g} exceeds {self.cfl_safety} x CFL limit {limit:.4g} '
                   f'for sigma={self.sigma}.')
        if not self.allow_cfl_violation:
            raise ValidationError(message)
        logger.warning(message + ' Continuing because the CFL check is overridden.')

    def project_initial(self, y0):
        """L2 projection onto the P1 space; y0 may be None, a nodal vector, or a callable f(x, y)."""
        if y0 is None:
            return np.zeros(self.mesh.num_nodes)
        if callable(y0):
            return self._solve_mass(assemble_load(self.mesh, y0))
        return np.array(y0, dtype=float)

    def velocity_load(self, y1):
        if y1 is None:
            return np.zeros(self.mesh.num_nodes)
        if callable(y1):
            return assemble_load(self.mesh, y1)
        return self.mass @ np.asarray(y1, dtype=float)

    def _forward_sweep(self, workspace, rows, y0):
        num_steps = self.grid.num_steps
        y = np.zeros((num_steps + 1, self.mesh.num_nodes))
        y[0] = y0
        for e in range(num_steps):
            if e == 0:
                rhs = rows[0] - workspace.first @ y0
            else:
                rhs = rows[e] - workspace.middle @ y[e] - workspace.system @ y[e - 1]
            y[e + 1] = workspace.solve(rhs)
            if not np.all(np.isfinite(y[e + 1])):
                raise InstabilityError(f'Non-finite state at time step {e + 1}.', step=e + 1)
        return y

    def sweep(self, coeff, rows, y0=None):
        """Solve the stepping system for arbitrary row right-hand sides b_0 ... b_{N-1}."""
        workspace = self.workspace(coeff)
        y0 = np.zeros(self.mesh.num_nodes) if y0 is None else y0
        return self._forward_sweep(workspace, rows, y0)

    def forward_solve(self, coeff, force_loads=None, y0=None, y1=None):
        """State trajectory (N+1, num_nodes) for a nodal coefficient field."""
        self.num_forward += 1
        tau = self.grid.tau
        rows = np.zeros((self.grid.num_steps, self.mesh.num_nodes))
        if force_loads is not None:
            rows += tau * force_loads
        rows[0] += tau * self.velocity_load(y1)
        return self.sweep(coeff, rows, self.project_initial(y0))

    def adjoint_solve(self, coeff, loads):
        """
        Multipliers lambda of the transposed stepping system for loads G^1 ... G^N.

        loads has shape (N+1, num_nodes); loads[0] is ignored because y^0 does not depend on the
        coefficient. The result has lambda^N = 0.
        """
        self.num_adjoint += 1
        workspace = self.workspace(coeff)
        num_steps = self.grid.num_steps
        lam = np.zeros((num_steps + 2, self.mesh.num_nodes))
        for j in range(num_steps, 0, -1):
            rhs = loads[j] - workspace.middle @ lam[j] - workspace.system @ lam[j + 1]
            lam[j - 1] = workspace.solve(rhs)
            if not np.all(np.isfinite(lam[j - 1])):
                raise InstabilityError(f'Non-finite adjoint at time step {j - 1}.', step=j - 1)
        return lam[:-1]

    def coefficient_rows(self, delta_coeff, y):
        """Right-hand sides -tau^2 dA w_e of the linearized recursion, dA = A(delta_coeff)."""
        sigma = self.sigma
        weighted = np.empty((self.grid.num_steps, self.mesh.num_nodes))
        weighted[0] = sigma * y[1] + (0.5 - sigma) * y[0]
        weighted[1:] = sigma * y[2:] + (1 - 2 * sigma) * y[1:-1] + sigma * y[:-2]
        d_stiffness = assemble_stiffness(self.mesh, delta_coeff, check=False)
        return -self.grid.tau ** 2 * (d_stiffness @ weighted.T).T

    def linearized_solve(self, coeff, delta_coeff, y):
        self.num_linearized += 1
        rows = self.coefficient_rows(delta_coeff, y)
        return self.sweep(coeff, rows)

    def counters(self):
        return {'factorizations': self.num_factorizations, 'forward': self.num_forward,
                'adjoint': self.num_adjoint, 'linearized': self.num_linearized}
