import numpy as np
from scipy import sparse

from tvwave import logger
from tvwave.discretization.mesh_fem import ControlSpace
from tvwave.discretization.wave_stepper import TimeGrid, WaveStepper
from tvwave.observation.observe import Observation, ObservationOperator
from tvwave.utils.errors import ValidationError


def temporal_k_matrix(grid: TimeGrid, sigma):
    """K = (1/6 - sigma) tau^2 A_tau + M_tau, tridiagonal, diagonal for sigma = 0."""
    n = grid.num_nodes
    main = np.full(n, (1 - 2 * sigma) * grid.tau)
    main[[0, -1]] = (0.5 - sigma) * grid.tau
    off = np.full(n - 1, sigma * grid.tau)
    return sparse.diags([off, main, off], [-1, 0, 1], format='csr')


class GradientField:
    """Per-control-triangle representation of dS(u)* o and its nodal lumped-mass Riesz representative."""

    def __init__(self, raw, dual, nodal):
        self.raw = raw
        self.dual = dual
        self.nodal = nodal


class ForwardOperator:
    """
    Control-to-observation map u -> B y(offset + E u), its derivative and adjoint derivative.

    The control space carries the lumped-mass inner product with weights d_i, the observation space
    the inner product of the observation operator.
    """

    def __init__(self, control_space: ControlSpace, stepper: WaveStepper, observation_op: ObservationOperator,
                 offset=1., force_loads=None, y0=None, y1=None):
        self.control_space = control_space
        self.stepper = stepper
        self.observation_op = observation_op
        self.mesh = control_space.mesh
        self.grid = stepper.grid
        self.offset = np.broadcast_to(np.asarray(offset, dtype=float), (self.mesh.num_nodes,)).copy()
        self.force_loads = force_loads
        self.y0 = y0
        self.y1 = y1
        self.k_matrix = temporal_k_matrix(self.grid, stepper.sigma)
        self._control_triangles = self.mesh.triangles[control_space.control_triangle_indices]
        self._control_gradients = self.mesh.basis_gradients[control_space.control_triangle_indices]

    def coefficient(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape != (self.control_space.num_dofs,):
            raise ValidationError(f'Control vector has shape {u.shape}, expected ({self.control_space.num_dofs},).')
        return self.offset + self.control_space.extend(u)

    def solve_state(self, u):
        return self.stepper.forward_solve(self.coefficient(u), self.force_loads, self.y0, self.y1)

    def apply_S(self, u, state=None):
        if state is None:
            state = self.solve_state(u)
        return self.observation_op.observe(state)

    def admissible_floor(self, lower):
        """Half the smallest coefficient offset + E u takes for controls u >= lower; positive for a valid setup."""
        offset = float(self.offset.min())
        return 0.5 * min(offset, offset + lower)

    def apply_S_clipped(self, u, floor):
        """S(u) with the coefficient cut off from below at floor, for controls that may leave the box."""
        coeff = self.coefficient(u)
        clipped = coeff < floor
        if np.any(clipped):
            logger.debug(f'Clipping the coefficient at {np.count_nonzero(clipped)} nodes to {floor:g}.')
            coeff = np.maximum(coeff, floor)
        state = self.stepper.forward_solve(coeff, self.force_loads, self.y0, self.y1)
        return self.observation_op.observe(state)

    def apply_dS(self, u, du, state=None):
        if state is None:
            state = self.solve_state(u)
        d_state = self.stepper.linearized_solve(self.coefficient(u), self.control_space.extend(du), state)
        return self.observation_op.observe(d_state)

    def _triangle_gradients(self, trajectory):
        """(num_times, M_c, 2) gradients of every time level on the control triangles."""
        return np.einsum('tka,kad->tkd', trajectory[:, self._control_triangles], self._control_gradients)

    def contract(self, state, adjoint):
        """Per-triangle values sum_{i,l} K_il grad y^i . grad p^l with p = -tau * lambda."""
        grad_y = self._triangle_gradients(state)
        grad_p = -self.grid.tau * self._triangle_gradients(adjoint)
        shape = grad_p.shape
        k_grad_p = (self.k_matrix @ grad_p.reshape(shape[0], -1)).reshape(shape)
        return np.einsum('tkd,tkd->k', grad_y, k_grad_p)

    def apply_dS_adjoint(self, u, o: Observation, state=None):
        if state is None:
            state = self.solve_state(u)
        loads = self.observation_op.adjoint_observe(o)
        adjoint = self.stepper.adjoint_solve(self.coefficient(u), loads)
        raw = self.contract(state, adjoint)
        dual = self.control_space.lump_triangle_field(raw)
        return GradientField(raw, dual, self.control_space.riesz(dual))

    def tracking_value(self, u, y_d: Observation, state=None):
        residual = self.apply_S(u, state) - y_d
        return 0.5 * residual.inner(residual)

    def tracking_gradient(self, u, y_d: Observation):
        state = self.solve_state(u)
        residual = self.apply_S(u, state) - y_d
        return self.apply_dS_adjoint(u, residual, state)

    def _normal_operator(self, u, v, state):
        """T* T v for T = (dS(u), A_h) in the lumped control and (M_O, Euclidean) range geometry."""
        grad_op = self.control_space.gradient_op
        d_obs = self.apply_dS(u, v, state)
        adjoint = self.apply_dS_adjoint(u, d_obs, state).nodal
        return adjoint + self.control_space.riesz(grad_op.T @ (grad_op @ v))

    def estimate_opnorm(self, u, iterations=20, seed=0):
        """Power-iteration estimate of the norm of u -> (dS(u) du, A_h du); nondecreasing in iterations."""
        if iterations < 1:
            raise ValidationError(f'Need at least one power iteration, got {iterations}.')
        cs = self.control_space
        state = self.solve_state(u)
        v = np.random.default_rng(seed).standard_normal(cs.num_dofs)
        v /= cs.norm(v)
        estimate = 0.
        for num in range(iterations):
            w = self._normal_operator(u, v, state)
            w_norm = cs.norm(w)
            if w_norm == 0:
                return 0.
            estimate = np.sqrt(w_norm)
            v = w / w_norm
            logger.debug(f'Operator norm power iteration {num + 1}/{iterations}: {estimate:.6g}')
        return float(estimate)
