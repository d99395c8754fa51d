import numpy as np
import pytest

from tvwave.discretization.mesh_fem import Mesh, Rectangle
from tvwave.discretization.wave_stepper import TimeGrid
from tvwave.observation.noise import NoiseModel, add_noise_cosine, add_noise_gaussian
from tvwave.observation.observe import Observation, ObservationOperator
from tvwave.utils.errors import ValidationError


@pytest.fixture
def mesh():
    return Mesh(Rectangle(-1., 1., -1., 1.), 9, 9)


@pytest.fixture
def grid():
    return TimeGrid(2., 8)


@pytest.fixture
def patches():
    return [Rectangle(o, o + 0.5, 0.5, 1.) for o in (-1., -0.5, 0., 0.5)]


def test_restriction_observes_region_nodes(mesh, grid):
    op = ObservationOperator(mesh, grid, 'restriction', region=Rectangle(-1., 1., 0.5, 1.))
    assert op.size == 3 * 9
    y = np.random.default_rng(0).standard_normal((grid.num_nodes, mesh.num_nodes))
    o = op.observe(y)
    assert o.values.shape == (grid.num_nodes, op.size)
    assert np.array_equal(o.values, y[:, op.nodes])


def test_restriction_norm_of_constant(mesh, grid):
    op = ObservationOperator(mesh, grid, 'restriction', region=Rectangle(-1., 1., 0.5, 1.))
    o = op.observe(np.ones((grid.num_nodes, mesh.num_nodes)))
    # T * |region| = 2 * (2 * 0.5)
    assert o.inner(o) == pytest.approx(2.)


@pytest.mark.parametrize('kind', ['restriction', 'patch_mean'])
def test_adjoint_observe(mesh, grid, patches, kind):
    rng = np.random.default_rng(1)
    op = ObservationOperator(mesh, grid, kind, region=Rectangle(-1., 1., 0.5, 1.), patches=patches)
    y = rng.standard_normal((grid.num_nodes, mesh.num_nodes))
    o = Observation(op, rng.standard_normal(op.shape))
    loads = op.adjoint_observe(o)
    assert loads.shape == y.shape
    assert np.sum(y * loads) == pytest.approx(op.observe(y).inner(o), rel=1e-12)


def test_patch_means(mesh, grid, patches):
    op = ObservationOperator(mesh, grid, 'patch_mean', patches=patches)
    y = np.tile(mesh.nodes[:, 0], (grid.num_nodes, 1))
    o = op.observe(y)
    assert np.allclose(o.values, [[-0.75, -0.25, 0.25, 0.75]] * grid.num_nodes)
    assert op.column_names() == ['patch_0', 'patch_1', 'patch_2', 'patch_3']


def test_inner_product_is_symmetric_and_positive(mesh, grid, patches):
    rng = np.random.default_rng(2)
    op = ObservationOperator(mesh, grid, 'patch_mean', patches=patches)
    a, b = Observation(op, rng.standard_normal(op.shape)), Observation(op, rng.standard_normal(op.shape))
    assert a.inner(b) == pytest.approx(b.inner(a), rel=1e-14)
    assert a.inner(a) > 0
    assert (a - a).norm() == 0


def test_observation_arithmetic(mesh, grid, patches):
    op = ObservationOperator(mesh, grid, 'patch_mean', patches=patches)
    a = Observation(op, np.ones(op.shape))
    assert np.all((2 * a + a).values == 3)
    assert np.all((-a / 2).values == -0.5)
    with pytest.raises(ValidationError):
        Observation(op, np.ones((grid.num_nodes, op.size + 1)))


def test_invalid_operators(mesh, grid):
    with pytest.raises(ValidationError):
        ObservationOperator(mesh, grid, 'boundary')
    with pytest.raises(ValidationError):
        ObservationOperator(mesh, grid, 'patch_mean', patches=[])
    with pytest.raises(ValidationError):
        ObservationOperator(mesh, grid, 'restriction', region=Rectangle(-1., 1., 0.6, 1.))


def test_gaussian_noise(mesh, grid, patches):
    op = ObservationOperator(mesh, grid, 'patch_mean', patches=patches)
    o = Observation(op, np.random.default_rng(3).standard_normal(op.shape))
    assert np.array_equal(add_noise_gaussian(o, 0., seed=1).values, o.values)
    first = add_noise_gaussian(o, 0.1, seed=1)
    second = add_noise_gaussian(o, 0.1, seed=1)
    assert np.array_equal(first.values, second.values)
    assert not np.array_equal(first.values, add_noise_gaussian(o, 0.1, seed=2).values)


def test_gaussian_noise_is_scaled_by_the_sup_norm(mesh):
    region = Rectangle(-1., 1., -1., 1.)
    op = ObservationOperator(mesh, TimeGrid(1., 1249), 'restriction', region=region)
    assert op.grid.num_nodes * op.size >= 10 ** 5
    o = Observation(op, np.ones(op.shape))
    scaled = (add_noise_gaussian(o, 0.1, seed=11) - o).values / 0.1
    assert 0.95 <= scaled.std() <= 1.05
    assert abs(scaled.mean()) < 0.02


def test_restriction_inner_product_matches_quadrature(mesh, grid):
    region = Rectangle(-1., 1., 0.5, 1.)
    op = ObservationOperator(mesh, grid, 'restriction', region=region)
    rng = np.random.default_rng(9)
    a, b = Observation(op, rng.standard_normal(op.shape)), Observation(op, rng.standard_normal(op.shape))

    def interpolant_at_edge_midpoints(o):
        full = np.zeros((grid.num_nodes, mesh.num_nodes))
        full[:, op.nodes] = o.values
        vertex_values = full[:, mesh.triangles[mesh.triangles_in(region)]]
        return 0.5 * (vertex_values + np.roll(vertex_values, -1, axis=2))

    # two-point Gauss in time and edge midpoints in space integrate the product exactly
    areas = mesh.areas[mesh.triangles_in(region)]
    a_mid, b_mid = interpolant_at_edge_midpoints(a), interpolant_at_edge_midpoints(b)
    expected = 0.
    for s in (0.5 - 0.5 / np.sqrt(3), 0.5 + 0.5 / np.sqrt(3)):
        a_t = (1 - s) * a_mid[:-1] + s * a_mid[1:]
        b_t = (1 - s) * b_mid[:-1] + s * b_mid[1:]
        expected += grid.tau / 2 * np.sum(areas[None, :, None] / 3 * a_t * b_t)
    assert a.inner(b) == pytest.approx(expected, rel=1e-12)


def test_cosine_noise_sup_norm_per_series(mesh, grid, patches):
    op = ObservationOperator(mesh, grid, 'patch_mean', patches=patches)
    rng = np.random.default_rng(4)
    o = Observation(op, rng.standard_normal(op.shape))
    noisy = add_noise_cosine(o, 0.05, num_terms=10, seed=7)
    disturbance_sup = np.abs((noisy - o).values).max(axis=0)
    assert np.allclose(disturbance_sup, 0.05 * np.abs(o.values).max(axis=0), rtol=1e-12)


def test_cosine_noise_requires_patch_means(mesh, grid):
    op = ObservationOperator(mesh, grid, 'restriction', region=Rectangle(-1., 1., 0.5, 1.))
    with pytest.raises(ValidationError):
        add_noise_cosine(op.zeros(), 0.05)


def test_noise_model(mesh, grid, patches):
    op = ObservationOperator(mesh, grid, 'patch_mean', patches=patches)
    o = Observation(op, np.ones(op.shape))
    assert np.array_equal(NoiseModel('none').apply(o).values, o.values)
    with pytest.raises(ValidationError):
        NoiseModel('uniform')
