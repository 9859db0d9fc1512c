"""Discrete spaces on active meshes: continuous Q1 and interface P0.

Q1 spaces carry one DOF per vertex referenced by an active cell, shared
across cells; numbering follows ascending background vertex index, so
identical inputs always produce identical DOF maps. P0 spaces carry one
DOF per active cell (interface multiplier space).

Dirichlet data lives only on the outer box boundary (the box is
mesh-fitted); imposition happens later by row/column elimination in the
assembly layer, this module just records (dof, value) pairs.
"""

import numpy as np

Q1_CONTINUOUS = "Q1_continuous"
P0_DISCONTINUOUS = "P0_discontinuous"


class FESpace:
    """DOF map + basis evaluation for one family on one active mesh."""

    def __init__(self, active, family, cell_dof_table, n_dofs,
                 dof_coords=None, constrained=None):
        self.active = active
        self.mesh = active.parent
        self.family = family
        # (n_active_cells, 4) for Q1, (n_active_cells, 1) for P0,
        # row order = active.cells order
        self.cell_dof_table = cell_dof_table
        self.n_dofs = n_dofs
        self.dof_coords = dof_coords        # (n_dofs, 2) for Q1
        self.constrained = constrained if constrained is not None else {}

    def cell_dofs(self, cell):
        """Global DOFs of one background cell (must be active)."""
        pos = self.active.position(cell)
        if pos < 0:
            raise ValueError("cell %d not in active mesh" % cell)
        return self.cell_dof_table[pos]

    def free_dofs(self):
        mask = np.ones(self.n_dofs, dtype=bool)
        for d in self.constrained:
            mask[d] = False
        return np.nonzero(mask)[0]


def build_space(active, family, dirichlet=None):
    """Construct an FESpace.

    dirichlet, if given, is a callable (x, y) -> value (or a constant)
    applied at active vertices on the outer box boundary; only valid for
    Q1 spaces.
    """
    mesh = active.parent
    if family == P0_DISCONTINUOUS:
        if dirichlet is not None:
            raise ValueError("Dirichlet constraints are undefined for P0")
        table = np.arange(len(active.cells), dtype=np.int64)[:, None]
        centers = np.array([mesh.cell_center(c) for c in active.cells])
        return FESpace(active, family, table, len(active.cells), centers)
    if family != Q1_CONTINUOUS:
        raise ValueError("unknown family %r" % (family,))

    cell_verts = mesh.cell_vertices(active.cells)          # (n, 4)
    verts = np.unique(cell_verts)
    dof_of_vertex = np.full(mesh.n_vertices, -1, dtype=np.int64)
    dof_of_vertex[verts] = np.arange(len(verts))
    table = dof_of_vertex[cell_verts]
    coords = mesh.vertex_coords(verts)

    constrained = {}
    if dirichlet is not None:
        value = dirichlet if callable(dirichlet) else (lambda x, y: np.full_like(x, float(dirichlet)))
        on_boundary = np.isin(verts, mesh.boundary_vertices())
        bdofs = np.nonzero(on_boundary)[0]
        if len(bdofs):
            xy = coords[bdofs]
            vals = np.asarray(value(xy[:, 0], xy[:, 1]), dtype=float)
            vals = np.broadcast_to(vals, (len(bdofs),))
            constrained = {int(d): float(v) for d, v in zip(bdofs, vals)}
    return FESpace(active, family, table, len(verts), coords, constrained)


def q1_shape(box, pts):
    """Bilinear shape values/gradients at physical points of one cell.

    Returns (values (k, 4), grads (k, 4, 2)) in local vertex order
    (SW, SE, NW, NE) matching BackgroundMesh.cell_vertices.
    """
    x0, y0, x1, y1 = box
    hx, hy = x1 - x0, y1 - y0
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    xi = (pts[:, 0] - x0) / hx
    eta = (pts[:, 1] - y0) / hy
    vals = np.column_stack([
        (1 - xi) * (1 - eta), xi * (1 - eta), (1 - xi) * eta, xi * eta])
    dxi = np.column_stack([-(1 - eta), (1 - eta), -eta, eta]) / hx
    deta = np.column_stack([-(1 - xi), -xi, (1 - xi), xi]) / hy
    return vals, np.stack([dxi, deta], axis=-1)


def eval_basis(space, cell, point):
    """Shape values and gradients of all local DOFs at one point.

    Q1 returns 4 partition-of-unity bilinear values with physical
    gradients; P0 returns ([1.0], [(0, 0)]). The point must lie in the
    closed cell up to 1e-10*h.
    """
    mesh = space.mesh
    if space.active.position(cell) < 0:
        raise ValueError("cell %d not in active mesh" % cell)
    x0, y0, x1, y1 = mesh.cell_box(cell)
    px, py = float(point[0]), float(point[1])
    slack = 1e-10 * mesh.h
    if not (x0 - slack <= px <= x1 + slack and y0 - slack <= py <= y1 + slack):
        raise ValueError("point %r outside cell %d" % (point, cell))
    if space.family == P0_DISCONTINUOUS:
        return np.array([1.0]), np.zeros((1, 2))
    vals, grads = q1_shape((x0, y0, x1, y1), [(px, py)])
    return vals[0], grads[0]


def interpolate(space, f):
    """Nodal interpolation of a callable (Q1) or cellwise values (P0)."""
    if space.family == Q1_CONTINUOUS:
        x, y = space.dof_coords[:, 0], space.dof_coords[:, 1]
        return np.asarray(f(x, y), dtype=float) + np.zeros(space.n_dofs)
    centers = space.dof_coords
    return np.asarray(f(centers[:, 0], centers[:, 1]), dtype=float) + np.zeros(space.n_dofs)
