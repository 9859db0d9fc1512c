"""Q1/P0 spaces: DOF maps, constraints, basis evaluation.

The DOF map oracle is set arithmetic: Q1 DOFs are exactly the vertices
referenced by an active cell, P0 DOFs are the active cells themselves.
Basis correctness rides on bilinear reproduction: interpolating
a + bx + cy + dxy must evaluate back exactly anywhere in the mesh.
"""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cutemi.levelset import build_cut_topology, make_circle
from cutemi.mesh import (TAG_EXTRACELLULAR, TAG_INTERFACE, TAG_INTRACELLULAR,
                         active_mesh, build_cartesian_mesh)
from cutemi.spaces import (P0_DISCONTINUOUS, Q1_CONTINUOUS, build_space,
                           eval_basis, interpolate, q1_shape)

BOUNDS = (-1.0, -1.0, 1.0, 1.0)


def make_active(N=8, tag=TAG_INTRACELLULAR):
    mesh = build_cartesian_mesh(N, N, BOUNDS)
    topo = build_cut_topology(make_circle(0.5, center=(0.01, 0.0)), mesh)
    return mesh, topo, active_mesh(mesh, topo, tag)


class TestDofMaps:
    def test_q1_dofs_are_active_vertices(self):
        mesh, topo, am = make_active()
        space = build_space(am, Q1_CONTINUOUS)
        expect = set()
        for cell in am.cells:
            expect.update(int(v) for v in mesh.cell_vertices(int(cell)))
        assert space.n_dofs == len(expect)
        coords = mesh.vertex_coords(np.array(sorted(expect)))
        assert space.dof_coords == pytest.approx(coords)

    def test_q1_shared_dofs_between_neighbors(self):
        mesh, topo, am = make_active()
        space = build_space(am, Q1_CONTINUOUS)
        c0 = int(am.cells[0])
        nb = mesh.neighbor(c0, 0, +1)
        if am.contains(nb):
            d0 = space.cell_dofs(c0)
            d1 = space.cell_dofs(nb)
            # east edge of c0 is the west edge of its +x neighbor
            assert d0[1] == d1[0] and d0[3] == d1[2]

    def test_p0_one_dof_per_cell(self):
        mesh, topo, am = make_active(tag=TAG_INTERFACE)
        space = build_space(am, P0_DISCONTINUOUS)
        assert space.n_dofs == len(am)
        for pos, cell in enumerate(am.cells):
            assert space.cell_dofs(int(cell))[0] == pos

    def test_inactive_cell_rejected(self):
        mesh, topo, am = make_active()
        space = build_space(am, Q1_CONTINUOUS)
        inactive = [c for c in range(mesh.n_cells) if not am.contains(c)]
        with pytest.raises(ValueError):
            space.cell_dofs(inactive[0])

    def test_unknown_family_rejected(self):
        mesh, topo, am = make_active()
        with pytest.raises(ValueError):
            build_space(am, "Q2_continuous")


class TestDirichlet:
    def test_constraints_on_boundary_vertices_only(self):
        mesh, topo, am = make_active(tag=TAG_EXTRACELLULAR)
        space = build_space(am, Q1_CONTINUOUS, dirichlet=lambda x, y: x + y)
        boundary = set(int(v) for v in mesh.boundary_vertices())
        active_vertices = set()
        for cell in am.cells:
            active_vertices.update(int(v) for v in mesh.cell_vertices(int(cell)))
        expect = boundary & active_vertices
        # map global vertex -> dof through the coordinates
        assert len(space.constrained) == len(expect)
        for dof, val in space.constrained.items():
            x, y = space.dof_coords[dof]
            assert val == pytest.approx(x + y)
            assert (np.isclose(abs(x), 1.0) or np.isclose(abs(y), 1.0))

    def test_constant_dirichlet(self):
        mesh, topo, am = make_active(tag=TAG_EXTRACELLULAR)
        space = build_space(am, Q1_CONTINUOUS, dirichlet=2.5)
        assert all(v == 2.5 for v in space.constrained.values())
        free = space.free_dofs()
        assert len(free) == space.n_dofs - len(space.constrained)
        assert not (set(free) & set(space.constrained))

    def test_interior_subdomain_has_no_constraints(self):
        # the cell is strictly inside the box, so a Dirichlet request on
        # the i space constrains nothing
        mesh, topo, am = make_active(tag=TAG_INTRACELLULAR)
        space = build_space(am, Q1_CONTINUOUS, dirichlet=0.0)
        assert space.constrained == {}

    def test_p0_rejects_dirichlet(self):
        mesh, topo, am = make_active(tag=TAG_INTERFACE)
        with pytest.raises(ValueError):
            build_space(am, P0_DISCONTINUOUS, dirichlet=0.0)


class TestBasis:
    def test_q1_shape_partition_of_unity(self):
        box = (0.0, 0.0, 0.5, 0.25)
        pts = np.random.default_rng(3).uniform(0, 0.25, size=(20, 2))
        vals, grads = q1_shape(box, pts)
        assert np.sum(vals, axis=1) == pytest.approx(np.ones(20), abs=1e-14)
        assert np.sum(grads, axis=1) == pytest.approx(
            np.zeros((20, 2)), abs=1e-12)

    @given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
    def test_bilinear_reproduction(self, a, b, c, d):
        mesh, topo, am = make_active()
        space = build_space(am, Q1_CONTINUOUS)
        f = lambda x, y: a + b * x + c * y + d * x * y
        coeffs = interpolate(space, f)
        rng = np.random.default_rng(11)
        for cell in am.cells[rng.integers(0, len(am), 5)]:
            x0, y0, x1, y1 = mesh.cell_box(int(cell))
            pt = (rng.uniform(x0, x1), rng.uniform(y0, y1))
            vals, grads = eval_basis(space, int(cell), pt)
            dofs = space.cell_dofs(int(cell))
            got = np.dot(vals, coeffs[dofs])
            assert got == pytest.approx(f(*pt), rel=1e-12, abs=1e-12)
            # gradient of the interpolant is exact for bilinears too
            assert np.dot(grads[:, 0], coeffs[dofs]) == pytest.approx(
                b + d * pt[1], rel=1e-11, abs=1e-11)
            assert np.dot(grads[:, 1], coeffs[dofs]) == pytest.approx(
                c + d * pt[0], rel=1e-11, abs=1e-11)

    def test_interpolate_evaluates_at_dof_coords(self):
        mesh, topo, am = make_active()
        space = build_space(am, Q1_CONTINUOUS)
        f = lambda x, y: np.sin(x) * np.cos(y)
        coeffs = interpolate(space, f)
        assert coeffs == pytest.approx(
            f(space.dof_coords[:, 0], space.dof_coords[:, 1]))

    def test_p0_piecewise_constant(self):
        mesh, topo, am = make_active(tag=TAG_INTERFACE)
        space = build_space(am, P0_DISCONTINUOUS)
        coeffs = np.arange(space.n_dofs, dtype=float)
        for cell in am.cells[:4]:
            cx, cy = mesh.cell_center(int(cell))
            vals, grads = eval_basis(space, int(cell), (cx, cy))
            dofs = space.cell_dofs(int(cell))
            assert np.dot(vals, coeffs[dofs]) == pytest.approx(
                float(space.cell_dofs(int(cell))[0]))
            assert grads == pytest.approx(np.zeros((1, 2)))
