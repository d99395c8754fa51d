import numpy as np
import pytest

from tvwave.discretization.wave_stepper import TimeGrid
from tvwave.observation.observe import Observation
from tvwave.optimization.forward_op import temporal_k_matrix
from tvwave.utils.errors import ValidationError


def _random_control(scenario, rng):
    return rng.uniform(0., 0.4, scenario.control_space.num_dofs)


def _random_observation(scenario, rng):
    op = scenario.observation_op
    return Observation(op, rng.standard_normal(op.shape))


@pytest.mark.parametrize('sigma', [0., 0.25, 0.4])
def test_k_matrix(sigma):
    grid = TimeGrid(3., 6)
    k = temporal_k_matrix(grid, sigma).toarray()
    expected = (1 / 6 - sigma) * grid.tau ** 2 * grid.stiffness_matrix().toarray() + grid.mass_matrix().toarray()
    assert np.allclose(k, expected, rtol=0, atol=1e-15)
    assert np.array_equal(k, k.T)
    rows = k.sum(axis=1)
    assert np.allclose(rows[1:-1], grid.tau)
    assert np.allclose(rows[[0, -1]], grid.tau / 2)
    if sigma == 0:
        assert np.count_nonzero(k - np.diag(np.diag(k))) == 0


def test_zero_control_without_forcing_gives_zero_observation(silent_scenario):
    o = silent_scenario.forward_op.apply_S(silent_scenario.control_space.zeros())
    assert np.all(o.values == 0)


def test_forward_map_is_deterministic(small_scenario):
    u = _random_control(small_scenario, np.random.default_rng(0))
    first = small_scenario.forward_op.apply_S(u)
    second = small_scenario.forward_op.apply_S(u)
    assert np.array_equal(first.values, second.values)


def test_derivative_is_linear(small_scenario):
    rng = np.random.default_rng(1)
    op = small_scenario.forward_op
    u, du = _random_control(small_scenario, rng), rng.standard_normal(small_scenario.control_space.num_dofs)
    single = op.apply_dS(u, du)
    doubled = op.apply_dS(u, 2 * du)
    assert np.allclose(doubled.values, 2 * single.values, rtol=1e-12, atol=1e-14 * np.abs(single.values).max())
    assert np.all(op.apply_dS(u, np.zeros_like(du)).values == 0)


def test_zero_observation_gives_zero_gradient(small_scenario):
    u = _random_control(small_scenario, np.random.default_rng(2))
    grad = small_scenario.forward_op.apply_dS_adjoint(u, small_scenario.observation_op.zeros())
    assert np.all(grad.nodal == 0)
    assert grad.raw.shape == (small_scenario.control_space.num_triangles,)
    assert grad.nodal.shape == (small_scenario.control_space.num_dofs,)


@pytest.mark.parametrize('name', ['small_scenario', 'small_patch_scenario', 'tiny_scenario'])
def test_adjoint_identity(name, request):
    scenario = request.getfixturevalue(name)
    rng = np.random.default_rng(3)
    op = scenario.forward_op
    u, du = _random_control(scenario, rng), rng.standard_normal(scenario.control_space.num_dofs)
    o = _random_observation(scenario, rng)
    lhs = op.apply_dS(u, du).inner(o)
    rhs = scenario.control_space.inner(du, op.apply_dS_adjoint(u, o).nodal)
    assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), abs(rhs))


def test_adjoint_matches_transposed_jacobian(tiny_scenario):
    rng = np.random.default_rng(4)
    op = tiny_scenario.forward_op
    cs = tiny_scenario.control_space
    u = _random_control(tiny_scenario, rng)
    o = _random_observation(tiny_scenario, rng)
    state = op.solve_state(u)
    grad = op.apply_dS_adjoint(u, o, state)
    # column k of the Jacobian tested against o gives d_k g_k
    for k, unit in enumerate(np.eye(cs.num_dofs)):
        column = op.apply_dS(u, unit, state).inner(o)
        assert cs.lumped_weights[k] * grad.nodal[k] == pytest.approx(column, rel=1e-10, abs=1e-14)


def test_taylor_remainder_is_second_order(small_scenario):
    rng = np.random.default_rng(5)
    op = small_scenario.forward_op
    u, du = _random_control(small_scenario, rng), rng.uniform(-0.2, 0.2, small_scenario.control_space.num_dofs)
    base = op.apply_S(u)
    derivative = op.apply_dS(u, du)
    epsilons = np.array([1e-2, 1e-3, 1e-4, 1e-5])
    remainders = [(op.apply_S(u + eps * du) - base - eps * derivative).norm() for eps in epsilons]
    slope = np.polyfit(np.log(epsilons), np.log(remainders), 1)[0]
    assert 1.9 <= slope <= 2.1


def test_gradient_matches_central_differences(small_scenario):
    rng = np.random.default_rng(6)
    op = small_scenario.forward_op
    cs = small_scenario.control_space
    u, du = _random_control(small_scenario, rng), rng.uniform(-0.2, 0.2, cs.num_dofs)
    y_d = _random_observation(small_scenario, rng)
    directional = cs.inner(op.tracking_gradient(u, y_d).nodal, du)
    errors = []
    for eps in (1e-3, 1e-4, 1e-5):
        difference = (op.tracking_value(u + eps * du, y_d) - op.tracking_value(u - eps * du, y_d)) / (2 * eps)
        errors.append(abs(difference - directional) / abs(directional))
    assert min(errors) < 1e-6


def test_opnorm_estimate_is_monotone(small_scenario):
    op = small_scenario.forward_op
    u = small_scenario.control_space.zeros()
    for k in (1, 3, 5):
        assert op.estimate_opnorm(u, iterations=k + 5) >= op.estimate_opnorm(u, iterations=k) - 1e-12


def test_opnorm_matches_dense_eigenvalue(tiny_scenario):
    op = tiny_scenario.forward_op
    cs = tiny_scenario.control_space
    u = cs.zeros() + 0.1
    state = op.solve_state(u)
    columns = [op.apply_dS(u, unit, state) for unit in np.eye(cs.num_dofs)]
    gram = np.array([[a.inner(b) for b in columns] for a in columns])
    grad_op = cs.gradient_op.toarray()
    normal = gram + grad_op.T @ grad_op
    scale = 1 / np.sqrt(cs.lumped_weights)
    largest = np.linalg.eigvalsh(scale[:, None] * normal * scale[None, :]).max()
    assert op.estimate_opnorm(u, iterations=200) == pytest.approx(np.sqrt(largest), rel=1e-6)


def test_opnorm_needs_an_iteration(small_scenario):
    with pytest.raises(ValidationError):
        small_scenario.forward_op.estimate_opnorm(small_scenario.control_space.zeros(), iterations=0)


def test_exact_control_reproduces_clean_data(small_scenario):
    op = small_scenario.forward_op
    u_e = small_scenario.exact_control()
    coefficient = op.coefficient(u_e)
    assert coefficient.min() >= 1.
    assert np.isclose(coefficient.max(), 1.2)
    assert np.array_equal(op.apply_S(u_e).values, op.apply_S(u_e.copy()).values)
