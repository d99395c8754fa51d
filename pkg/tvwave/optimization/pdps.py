import time

import numpy as np
import pandas as pd

from tvwave import logger
from tvwave.observation.observe import Observation
from tvwave.optimization.forward_op import ForwardOperator
from tvwave.optimization.prox_reg import MultiBangLevels, multibang_penalty, multibang_prox, \
    project_dual_ball, prox_Fstar_residual, tv_value
from tvwave.utils.errors import SolverError, TvwaveError, ValidationError

HISTORY_COLUMNS = ['iteration', 'objective', 'tracking', 'multibang', 'tv',
                   'primal_residual', 'observation_residual', 'dual_residual', 'residual']


class StepSizes:
    def __init__(self, gamma_f, gamma_g):
        if not gamma_f > 0 or not gamma_g > 0:
            raise ValidationError(f'Step sizes must be positive, got {gamma_f=}, {gamma_g=}.')
        self.gamma_f = float(gamma_f)
        self.gamma_g = float(gamma_g)

    def products(self, opnorm):
        """gamma_F gamma_G ||K'|| and gamma_F gamma_G ||K'||^2."""
        product = self.gamma_f * self.gamma_g
        return product * opnorm, product * opnorm ** 2

    def check(self, opnorm):
        linear, squared = self.products(opnorm)
        logger.info(f'Step-size condition: gamma_F*gamma_G*||K|| = {linear:.4g}, '
                    f'gamma_F*gamma_G*||K||^2 = {squared:.4g} (operator norm {opnorm:.4g}).')
        if squared >= 1:
            logger.warning('Step sizes do not satisfy gamma_F*gamma_G*||K||^2 < 1; convergence is not guaranteed.')
        return squared < 1


class PDPSState:
    def __init__(self, u, u_bar, r: Observation, psi, iteration=0, u_prev=None):
        self.u = u
        self.u_bar = u_bar
        self.r = r
        self.psi = psi
        self.iteration = iteration
        self.u_prev = u if u_prev is None else u_prev


class ResidualReport:
    def __init__(self, primal, observation, dual, objective, tracking, multibang, tv):
        self.primal = float(primal)
        self.observation = float(observation)
        self.dual = float(dual)
        self.objective = float(objective)
        self.tracking = float(tracking)
        self.multibang = float(multibang)
        self.tv = float(tv)

    @property
    def total(self):
        return self.primal + self.observation + self.dual

    def as_row(self, iteration):
        return {'iteration': iteration, 'objective': self.objective, 'tracking': self.tracking,
                'multibang': self.multibang, 'tv': self.tv, 'primal_residual': self.primal,
                'observation_residual': self.observation, 'dual_residual': self.dual, 'residual': self.total}


class PDPSResult:
    def __init__(self, u, coefficient, history: pd.DataFrame, converged, iterations, report: ResidualReport,
                 wall_time, best_iteration):
        self.u = u
        self.coefficient = coefficient
        self.history = history
        self.converged = converged
        self.iterations = iterations
        self.report = report
        self.wall_time = wall_time
        self.best_iteration = best_iteration


class PDPS:
    """
    Nonlinear primal-dual proximal splitting for
        min_u 1/2 ||S(u) - y_d||_O^2 + alpha G(u) + beta TV(u).

    Every iteration costs two forward solves and one adjoint solve; iterations on which the residual is
    checked cost one more forward solve.
    """

    def __init__(self, forward_op: ForwardOperator, y_d: Observation, levels, alpha, beta, steps: StepSizes,
                 tol=1e-6, max_iter=1000, check_every=10, riesz_map=True):
        if alpha < 0 or beta < 0:
            raise ValidationError(f'Regularization weights must be nonnegative, got {alpha=}, {beta=}.')
        if check_every < 1 or max_iter < 1:
            raise ValidationError(f'Need check_every >= 1 and max_iter >= 1, got {check_every}, {max_iter}.')
        self.forward_op = forward_op
        self.control_space = forward_op.control_space
        self.gradient_op = self.control_space.gradient_op
        self.y_d = y_d
        self.levels = levels if isinstance(levels, MultiBangLevels) else MultiBangLevels(levels)
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.steps = steps
        self.tol = tol
        self.max_iter = int(max_iter)
        self.check_every = int(check_every)
        self.riesz_map = riesz_map
        self.coefficient_floor = forward_op.admissible_floor(self.levels.lower)

    def initial_state(self, u0=None):
        cs = self.control_space
        u = cs.zeros() if u0 is None else np.asarray(u0, dtype=float).copy()
        psi = np.zeros((cs.num_triangles, 2))
        return PDPSState(u, u.copy(), self.y_d.operator.zeros(), psi)

    def _to_primal(self, dual):
        return self.control_space.riesz(dual) if self.riesz_map else dual

    def step(self, state: PDPSState):
        gamma_f, gamma_g = self.steps.gamma_f, self.steps.gamma_g
        iteration = state.iteration + 1
        try:
            grad = self.forward_op.apply_dS_adjoint(state.u, state.r)
            tv_part = self.gradient_op.T @ state.psi.ravel()
            direction = self._to_primal(grad.dual) + self._to_primal(tv_part)
            u_new = multibang_prox(state.u - gamma_g * direction, gamma_g * self.alpha, self.levels)
            u_bar = 2 * u_new - state.u
            # the extrapolated control may leave [u_1, u_m]
            y_bar = self.forward_op.apply_S_clipped(u_bar, self.coefficient_floor)
        except TvwaveError as e:
            raise SolverError(f'PDPS iteration {iteration} failed: {e}', iteration=iteration) from e
        r_new = prox_Fstar_residual(state.r, gamma_f, y_bar, self.y_d)
        psi_new = project_dual_ball(state.psi + gamma_f * (self.gradient_op @ u_bar).reshape(-1, 2), self.beta)
        return PDPSState(u_new, u_bar, r_new, psi_new, iteration, u_prev=state.u)

    def objective_parts(self, u, observation: Observation):
        misfit = observation - self.y_d
        tracking = 0.5 * misfit.inner(misfit)
        multibang = multibang_penalty(u, self.alpha, self.levels, self.control_space.lumped_weights)
        tv = self.beta * tv_value(u, self.gradient_op) if self.beta > 0 else 0.
        return tracking, multibang, tv

    def residuals(self, state: PDPSState):
        cs = self.control_space
        try:
            observation = self.forward_op.apply_S(state.u)
        except TvwaveError as e:
            raise SolverError(f'Residual evaluation failed at iteration {state.iteration}: {e}',
                              iteration=state.iteration) from e
        primal = cs.norm(state.u_prev - state.u)
        obs_defect = state.r - (observation - self.y_d)
        q = state.psi + self.steps.gamma_f * (self.gradient_op @ state.u).reshape(-1, 2)
        dual = np.linalg.norm(state.psi - project_dual_ball(q, self.beta))
        tracking, multibang, tv = self.objective_parts(state.u, observation)
        objective = tracking + multibang + tv
        if not np.isfinite(objective):
            raise SolverError(f'Objective is not finite at iteration {state.iteration}.', iteration=state.iteration)
        return ResidualReport(primal, obs_defect.norm(), dual, objective, tracking, multibang, tv)

    def run(self, u0=None, on_check=None):
        """Iterate until the residual drops below tol; on_check receives every history row as it is computed."""
        logger.info(f'Running PDPS: alpha={self.alpha:g}, beta={self.beta:g}, gamma_F={self.steps.gamma_f:g}, '
                    f'gamma_G={self.steps.gamma_g:g}, tol={self.tol:g}, max_iter={self.max_iter}.')
        start = time.perf_counter()
        state = self.initial_state(u0)
        rows = []
        best_u, best_total, best_iteration, report = state.u, np.inf, 0, None
        converged = False
        while state.iteration < self.max_iter:
            state = self.step(state)
            if state.iteration % self.check_every and state.iteration != self.max_iter:
                continue
            report = self.residuals(state)
            rows.append(report.as_row(state.iteration))
            if on_check is not None:
                on_check(rows[-1])
            logger.info(f'Iteration {state.iteration}: objective {report.objective:.6e}, residual {report.total:.3e} '
                        f'(primal {report.primal:.2e}, observation {report.observation:.2e}, dual {report.dual:.2e}).')
            if report.total < best_total:
                best_u, best_total, best_iteration = state.u, report.total, state.iteration
            if report.total <= self.tol:
                converged = True
                break

        if converged:
            u = state.u
        else:
            logger.warning(f'PDPS did not reach tol={self.tol:g} within {self.max_iter} iterations; '
                           f'returning the iterate of iteration {best_iteration} (residual {best_total:.3e}).')
            u = best_u
        history = pd.DataFrame(rows, columns=HISTORY_COLUMNS)
        return PDPSResult(u, self.forward_op.coefficient(u), history, converged, state.iteration, report,
                          time.perf_counter() - start, state.iteration if converged else best_iteration)
