import numpy as np
from scipy import sparse

from tvwave import logger
from tvwave.utils.errors import ValidationError

# local P1 mass matrix on a triangle of unit area
_LOCAL_MASS = np.array([[2., 1., 1.],
                        [1., 2., 1.],
                        [1., 1., 2.]]) / 12.

# edge-midpoint rule on the reference triangle, exact for quadratics
_MIDPOINT_BARY = np.array([[0.5, 0.5, 0.0],
                           [0.0, 0.5, 0.5],
                           [0.5, 0.0, 0.5]])


class Rectangle:
    """Closed axis-aligned rectangle [x0, x1] x [y0, y1]. Degenerate rectangles describe segments."""

    def __init__(self, x0, x1, y0, y1):
        self.x0, self.x1, self.y0, self.y1 = float(x0), float(x1), float(y0), float(y1)
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise ValidationError(f'Rectangle bounds are reversed: {self.bounds}.')

    @classmethod
    def from_bounds(cls, bounds):
        if len(bounds) != 4:
            raise ValidationError(f'Expected 4 bounds (x0, x1, y0, y1), got {bounds}.')
        return cls(*bounds)

    @property
    def bounds(self):
        return [self.x0, self.x1, self.y0, self.y1]

    @property
    def width(self):
        return self.x1 - self.x0

    @property
    def height(self):
        return self.y1 - self.y0

    @property
    def area(self):
        return self.width * self.height

    @property
    def is_degenerate(self):
        return self.width <= 0 or self.height <= 0

    def contains(self, points, tol=1e-10):
        points = np.atleast_2d(points)
        scale = tol * max(1., abs(self.x0), abs(self.x1), abs(self.y0), abs(self.y1))
        return ((points[:, 0] >= self.x0 - scale) & (points[:, 0] <= self.x1 + scale) &
                (points[:, 1] >= self.y0 - scale) & (points[:, 1] <= self.y1 + scale))

    def intersect(self, other):
        return Rectangle(max(self.x0, other.x0), max(min(self.x1, other.x1), max(self.x0, other.x0)),
                         max(self.y0, other.y0), max(min(self.y1, other.y1), max(self.y0, other.y0)))

    def __repr__(self):
        return f'Rectangle({self.x0}, {self.x1}, {self.y0}, {self.y1})'


class Mesh:
    """
    Structured triangulation of a rectangle with P1 nodal basis.

    Nodes are numbered x-fastest, node (i, j) has index j * nx + i. Every grid cell is split
    along its lower-left to upper-right diagonal into two positively oriented triangles.
    """

    def __init__(self, domain: Rectangle, nx, ny):
        if nx < 2 or ny < 2:
            raise ValidationError(f'Need at least 2 nodes per direction, got {nx=}, {ny=}.')
        if domain.is_degenerate:
            raise ValidationError(f'Domain {domain} has zero width or height.')
        self.domain = domain
        self.nx = int(nx)
        self.ny = int(ny)

        self.xs = np.linspace(domain.x0, domain.x1, self.nx)
        self.ys = np.linspace(domain.y0, domain.y1, self.ny)
        self.hx = domain.width / (self.nx - 1)
        self.hy = domain.height / (self.ny - 1)

        self.nodes = None
        self.triangles = None
        self.boundary_node_flags = None
        self.areas = None
        self.basis_gradients = None
        self._local_stiffness = None
        self._rows = None
        self._cols = None

        self._build()

    @property
    def num_nodes(self):
        return self.nx * self.ny

    @property
    def num_triangles(self):
        return len(self.triangles)

    def _build(self):
        logger.debug(f'Building structured mesh with {self.nx}x{self.ny} nodes on {self.domain}.')
        xx, yy = np.meshgrid(self.xs, self.ys)
        self.nodes = np.column_stack([xx.ravel(), yy.ravel()])

        i, j = np.meshgrid(np.arange(self.nx - 1), np.arange(self.ny - 1))
        n0 = (j * self.nx + i).ravel()
        n1 = n0 + 1
        n2 = n0 + self.nx + 1
        n3 = n0 + self.nx
        lower = np.column_stack([n0, n1, n2])
        upper = np.column_stack([n0, n2, n3])
        # lower and upper triangle of a cell are stored next to each other
        self.triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)

        boundary = np.zeros((self.ny, self.nx), dtype=bool)
        boundary[0, :] = boundary[-1, :] = True
        boundary[:, 0] = boundary[:, -1] = True
        self.boundary_node_flags = boundary.ravel()

        self._compute_geometry()

    def _compute_geometry(self):
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        if np.any(det <= 0):
            raise ValidationError('Mesh contains triangles with non-positive orientation.')
        self.areas = det / 2

        grads = np.empty((self.num_triangles, 3, 2))
        grads[:, 0, 0] = p[:, 1, 1] - p[:, 2, 1]
        grads[:, 0, 1] = p[:, 2, 0] - p[:, 1, 0]
        grads[:, 1, 0] = p[:, 2, 1] - p[:, 0, 1]
        grads[:, 1, 1] = p[:, 0, 0] - p[:, 2, 0]
        grads[:, 2, 0] = p[:, 0, 1] - p[:, 1, 1]
        grads[:, 2, 1] = p[:, 1, 0] - p[:, 0, 0]
        self.basis_gradients = grads / det[:, None, None]

        self._local_stiffness = self.areas[:, None, None] * np.einsum('kad,kbd->kab', self.basis_gradients,
                                                                     self.basis_gradients)
        self._rows = np.repeat(self.triangles, 3, axis=1)
        self._cols = np.tile(self.triangles, (1, 3))

    def centroids(self, triangle_indices=None):
        tris = self.triangles if triangle_indices is None else self.triangles[triangle_indices]
        return self.nodes[tris].mean(axis=1)

    def is_aligned(self, rect: Rectangle, tol=1e-9):
        """True if every edge of rect (clipped to the domain) lies on a mesh line."""
        clipped = rect.intersect(self.domain)
        for value, lines, h in ((clipped.x0, self.xs, self.hx), (clipped.x1, self.xs, self.hx),
                                (clipped.y0, self.ys, self.hy), (clipped.y1, self.ys, self.hy)):
            if np.min(np.abs(lines - value)) > tol * h:
                return False
        return True

    def check_aligned(self, rect: Rectangle, name='region'):
        if not self.is_aligned(rect):
            raise ValidationError(f'{name} {rect} is not resolved by the {self.nx}x{self.ny} mesh: '
                                  f'its boundary cuts through triangles.')

    def triangles_in(self, rect: Rectangle):
        """Indices of triangles inside rect. The caller is responsible for alignment."""
        return np.flatnonzero(rect.contains(self.centroids()))

    def nodes_in(self, rect: Rectangle):
        return np.flatnonzero(rect.contains(self.nodes))

    def locate(self, point):
        """Containing triangle and barycentric coordinates of a point in the closed domain."""
        point = np.asarray(point, dtype=float)
        if not self.domain.contains(point)[0]:
            raise ValidationError(f'Point {point.tolist()} lies outside the domain {self.domain}.')
        sx = (point[0] - self.domain.x0) / self.hx
        sy = (point[1] - self.domain.y0) / self.hy
        i = int(np.clip(np.floor(sx), 0, self.nx - 2))
        j = int(np.clip(np.floor(sy), 0, self.ny - 2))
        xi = np.clip(sx - i, 0., 1.)
        eta = np.clip(sy - j, 0., 1.)
        cell = j * (self.nx - 1) + i
        if eta <= xi:
            return 2 * cell, np.array([1. - xi, xi - eta, eta])
        return 2 * cell + 1, np.array([1. - eta, xi, eta - xi])

    def interpolate(self, func):
        return np.asarray(func(self.nodes[:, 0], self.nodes[:, 1]), dtype=float) * np.ones(self.num_nodes)

    def assemble_from_local(self, local, triangle_indices=None):
        if triangle_indices is None:
            triangle_indices = slice(None)
        rows = self._rows[triangle_indices].ravel()
        cols = self._cols[triangle_indices].ravel()
        data = local.ravel()
        return sparse.coo_matrix((data, (rows, cols)), shape=(self.num_nodes, self.num_nodes)).tocsr()


def build_rect_mesh(domain: Rectangle, nx, ny):
    return Mesh(domain, nx, ny)


def assemble_mass(mesh: Mesh, triangle_indices=None):
    areas = mesh.areas if triangle_indices is None else mesh.areas[triangle_indices]
    local = areas[:, None, None] * _LOCAL_MASS[None]
    return mesh.assemble_from_local(local, triangle_indices)


def assemble_stiffness(mesh: Mesh, coeff, check=True):
    """
    Stiffness matrix of the bilinear form (coeff grad y, grad v).

    With check=False any real coefficient is accepted, which is what the derivative with respect to
    the coefficient needs.
    """
    coeff = np.broadcast_to(np.asarray(coeff, dtype=float), (mesh.num_nodes,))
    if check and not np.all(coeff > 0):
        bad = np.flatnonzero(~(coeff > 0))
        raise ValidationError(f'Coefficient must be positive at every node; {len(bad)} nodes violate this '
                              f'(min value {np.nanmin(coeff):.3g}).')
    # vertex average is exact for a P1 coefficient against element-constant gradients
    mean_coeff = coeff[mesh.triangles].mean(axis=1)
    return mesh.assemble_from_local(mean_coeff[:, None, None] * mesh._local_stiffness)


def assemble_load(mesh: Mesh, func):
    """Load vector (func, phi_i) for a callable func(x, y), by the edge-midpoint rule."""
    p = mesh.nodes[mesh.triangles]
    quad_points = np.einsum('qa,kad->kqd', _MIDPOINT_BARY, p)
    values = np.asarray(func(quad_points[..., 0], quad_points[..., 1]), dtype=float)
    values = np.broadcast_to(values, quad_points.shape[:2])
    local = mesh.areas[:, None] / 3 * np.einsum('kq,qa->ka', values, _MIDPOINT_BARY)
    return np.bincount(mesh.triangles.ravel(), weights=local.ravel(), minlength=mesh.num_nodes)


def point_source_load(mesh: Mesh, point):
    """Entries phi_i(point); used both for interior Dirac sources and for point sources on the boundary."""
    triangle, bary = mesh.locate(point)
    load = np.zeros(mesh.num_nodes)
    np.add.at(load, mesh.triangles[triangle], bary)
    return load


def patch_mean_weights(mesh: Mesh, patch: Rectangle):
    """Weights w with w @ y equal to the mean of the P1 function y over the patch."""
    if patch.is_degenerate:
        raise ValidationError(f'Observation patch {patch} has zero area.')
    mesh.check_aligned(patch, name='observation patch')
    tris = mesh.triangles_in(patch)
    if len(tris) == 0:
        raise ValidationError(f'Observation patch {patch} contains no triangles.')
    contrib = np.repeat(mesh.areas[tris] / 3, 3)
    weights = np.bincount(mesh.triangles[tris].ravel(), weights=contrib, minlength=mesh.num_nodes)
    return weights / mesh.areas[tris].sum()


class ControlSpace:
    """
    Nodal control space on the control rectangle.

    The degrees of freedom are the nodes whose whole basis support lies in the closed control
    rectangle, so extension by zero outside the rectangle stays continuous.
    """

    def __init__(self, mesh: Mesh, control_rect: Rectangle):
        self.mesh = mesh
        self.control_rect = control_rect
        if control_rect.is_degenerate:
            raise ValidationError(f'Control region {control_rect} has zero area.')
        mesh.check_aligned(control_rect, name='control region')

        self.control_triangle_indices = mesh.triangles_in(control_rect)
        outside = np.ones(mesh.num_triangles, dtype=bool)
        outside[self.control_triangle_indices] = False
        touches_outside = np.zeros(mesh.num_nodes, dtype=bool)
        touches_outside[mesh.triangles[outside].ravel()] = True
        touches_control = np.zeros(mesh.num_nodes, dtype=bool)
        touches_control[mesh.triangles[self.control_triangle_indices].ravel()] = True
        self.control_node_indices = np.flatnonzero(touches_control & ~touches_outside)
        if len(self.control_node_indices) == 0:
            raise ValidationError(f'Control region {control_rect} contains no interior degrees of freedom.')

        self.local_index = np.full(mesh.num_nodes, -1)
        self.local_index[self.control_node_indices] = np.arange(self.num_dofs)

        node_weights = np.bincount(mesh.triangles.ravel(), weights=np.repeat(mesh.areas / 3, 3),
                                   minlength=mesh.num_nodes)
        self.lumped_weights = node_weights[self.control_node_indices]
        self._gradient_op = None
        logger.debug(f'Control space: {self.num_dofs} nodes, {self.num_triangles} triangles.')

    @property
    def num_dofs(self):
        return len(self.control_node_indices)

    @property
    def num_triangles(self):
        return len(self.control_triangle_indices)

    @property
    def node_coordinates(self):
        return self.mesh.nodes[self.control_node_indices]

    def zeros(self):
        return np.zeros(self.num_dofs)

    def extend(self, u):
        """Nodal field on the whole mesh, zero outside the control dofs."""
        full = np.zeros(self.mesh.num_nodes)
        full[self.control_node_indices] = u
        return full

    def restrict(self, nodal):
        return np.asarray(nodal)[..., self.control_node_indices]

    def inner(self, u, v):
        return float(np.sum(self.lumped_weights * u * v))

    def norm(self, u):
        return np.sqrt(self.inner(u, u))

    def lump_triangle_field(self, raw):
        """Euclidean dual vector sum_{K containing i} |K|/3 raw_K over control triangles."""
        tris = self.control_triangle_indices
        contrib = np.repeat(self.mesh.areas[tris] * raw / 3, 3)
        full = np.bincount(self.mesh.triangles[tris].ravel(), weights=contrib, minlength=self.mesh.num_nodes)
        return full[self.control_node_indices]

    def riesz(self, dual):
        """Representative of a Euclidean dual vector in the lumped-mass inner product."""
        return dual / self.lumped_weights

    def interpolate_boxes(self, boxes, background=0.):
        """Control vector taking box values at control nodes; later boxes win on overlaps."""
        values = np.full(self.num_dofs, float(background))
        coords = self.node_coordinates
        for rect, value in boxes:
            values[rect.contains(coords)] = value
        return values

    @property
    def gradient_op(self):
        if self._gradient_op is None:
            self._gradient_op = assemble_gradient_op(self)
        return self._gradient_op


def assemble_gradient_op(cs: ControlSpace):
    """
    Sparse (2 M_c x N_c) matrix with rows (2k, 2k+1) holding |K| grad u_h on control triangle k.

    Vertices that are not control dofs carry zero value and drop out.
    """
    mesh = cs.mesh
    tris = cs.control_triangle_indices
    local = cs.local_index[mesh.triangles[tris]]
    weighted = mesh.areas[tris, None, None] * mesh.basis_gradients[tris]
    k = np.arange(len(tris))
    rows = (2 * k[:, None, None] + np.arange(2)[None, None, :]) * np.ones((1, 3, 1), dtype=int)
    cols = np.broadcast_to(local[:, :, None], rows.shape)
    keep = cols >= 0
    return sparse.coo_matrix((weighted[keep], (rows[keep], cols[keep])),
                             shape=(2 * len(tris), cs.num_dofs)).tocsr()
