"""Assembly of the cut-FEM operators for the two-domain membrane problem.

Builds, from a CutTopology and FE spaces, the bulk stiffness blocks, the
ghost penalties, the interface couplings of both formulations (the
single-dimensional jump mass and the multi-dimensional saddle-point
blocks with multiplier stabilization), the stabilized surface mass
matrices of the membrane ODE projection, and load vectors.

Assembled operators are returned over the full concatenated block
numbering, symmetric and without boundary conditions imposed; Dirichlet
elimination (row/column reduction plus right-hand-side lift) is exposed
on AssembledSystem so time loops can re-lift changing boundary data
without reassembly.

All quadrature-built local matrices are formed as B^T B with the square
roots of the weights folded into B, so symmetric blocks come out exactly
symmetric in floating point.
"""

import numpy as np

from .linalg import SparseMatrix
from .mesh import CUT, INSIDE, OUTSIDE, ghost_faces, interior_faces
from .quadrature import bulk_rule, gauss_1d, surface_rule, tensor_rule_unit
from .spaces import P0_DISCONTINUOUS, Q1_CONTINUOUS, q1_shape

__all__ = [
    "EmiParams", "DofLayout", "AssembledSystem",
    "SurfaceQuadrature", "build_surface_quadrature", "surface_eval_matrix",
    "BulkQuadrature", "build_bulk_quadrature", "bulk_eval_matrix",
    "assemble_ghost_penalty", "assemble_stiffness", "assemble_bulk_mass",
    "assemble_surface_mass", "assemble_load",
    "assemble_single_dim", "assemble_multi_dim",
]


class EmiParams:
    """Physical and discretization constants of the coupled problem.

    Parameters
    ----------
    sigma_i, sigma_e : float
        Conductivities (uS/um).
    C_m : float
        Membrane capacitance per area (nF/um^2).
    dt : float
        Time step (ms).
    gamma : float
        Ghost-penalty coefficient, default 0.1.
    gamma_b : float
        Surface-stabilization coefficient, default 0.1.
    """

    def __init__(self, sigma_i, sigma_e, C_m, dt, gamma=0.1, gamma_b=0.1):
        vals = dict(sigma_i=sigma_i, sigma_e=sigma_e, C_m=C_m, dt=dt,
                    gamma=gamma, gamma_b=gamma_b)
        for name, v in vals.items():
            if not (float(v) > 0.0):
                raise ValueError("%s must be > 0, got %r" % (name, v))
        self.sigma_i = float(sigma_i)
        self.sigma_e = float(sigma_e)
        self.C_m = float(C_m)
        self.dt = float(dt)
        self.gamma = float(gamma)
        self.gamma_b = float(gamma_b)


class DofLayout:
    """Concatenated block numbering over a list of (name, space) pairs.

    Block DOF d of block k maps to full index offset_k + d. Constrained
    DOFs (Dirichlet vertices recorded on the spaces) keep their assembled
    rows; elimination happens in AssembledSystem.
    """

    def __init__(self, blocks):
        self.blocks = list(blocks)
        names = [n for n, _ in self.blocks]
        if len(set(names)) != len(names):
            raise ValueError("duplicate block names %r" % (names,))
        sizes = np.array([sp.n_dofs for _, sp in self.blocks], dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(sizes)])
        self.n_full = int(self.offsets[-1])

        cons, vals = [], []
        for (name, sp), off in zip(self.blocks, self.offsets[:-1]):
            for d in sorted(sp.constrained):
                cons.append(off + d)
                vals.append(sp.constrained[d])
        self.constrained = np.array(cons, dtype=np.int64)
        self.constrained_values = np.array(vals, dtype=float)
        mask = np.ones(self.n_full, dtype=bool)
        mask[self.constrained] = False
        self.free = np.nonzero(mask)[0]

    @property
    def n_free(self):
        return len(self.free)

    def index(self, name):
        for k, (n, _) in enumerate(self.blocks):
            if n == name:
                return k
        raise KeyError("no block named %r" % (name,))

    def space(self, name):
        return self.blocks[self.index(name)][1]

    def block_slice(self, name):
        k = self.index(name)
        return slice(int(self.offsets[k]), int(self.offsets[k + 1]))

    def extract(self, full, name):
        """Block sub-vector of a full-length vector."""
        return np.asarray(full)[self.block_slice(name)]


class AssembledSystem:
    """Full symmetric block operator plus Dirichlet bookkeeping.

    matrix/rhs live on the full concatenated numbering (dimension = sum
    of block sizes). reduced() drops constrained rows/columns; the kept
    free-by-constrained coupling lets reduced_rhs() lift time-dependent
    boundary values without reassembly.
    """

    def __init__(self, matrix, rhs, dof_layout):
        self.matrix = matrix
        self.rhs = np.asarray(rhs, dtype=float)
        self.dof_layout = dof_layout
        self._reduced = None

    def reduced(self):
        """(A_ff, A_fc) with constrained rows and columns eliminated."""
        if self._reduced is None:
            lay = self.dof_layout
            csr = self.matrix.csr
            a_ff = csr[lay.free][:, lay.free]
            a_fc = csr[lay.free][:, lay.constrained]
            self._reduced = (SparseMatrix(a_ff), SparseMatrix(a_fc))
        return self._reduced

    def reduced_rhs(self, rhs_full=None, constrained_values=None):
        """Free-DOF right-hand side with the Dirichlet lift applied."""
        lay = self.dof_layout
        b = self.rhs if rhs_full is None else np.asarray(rhs_full, dtype=float)
        vals = lay.constrained_values if constrained_values is None \
            else np.asarray(constrained_values, dtype=float)
        out = b[lay.free]
        if len(lay.constrained):
            _, a_fc = self.reduced()
            out = out - a_fc @ vals
        return out

    def expand(self, x_free, constrained_values=None):
        """Scatter a free-DOF solution back to the full numbering."""
        lay = self.dof_layout
        vals = lay.constrained_values if constrained_values is None \
            else np.asarray(constrained_values, dtype=float)
        full = np.zeros(lay.n_full)
        full[lay.free] = x_free
        if len(lay.constrained):
            full[lay.constrained] = vals
        return full


# ---------------------------------------------------------------------------
# coordinate-list staging

class _CooBuilder:
    def __init__(self, n_rows, n_cols):
        self.n_rows = n_rows
        self.n_cols = n_cols
        self._rows = []
        self._cols = []
        self._vals = []

    def add_block(self, rdofs, cdofs, local):
        """One dense local block scattered to global (row, col) pairs."""
        rdofs = np.asarray(rdofs, dtype=np.int64)
        cdofs = np.asarray(cdofs, dtype=np.int64)
        self._rows.append(np.repeat(rdofs, len(cdofs)))
        self._cols.append(np.tile(cdofs, len(rdofs)))
        self._vals.append(np.asarray(local, dtype=float).ravel())

    def add_batch(self, rdofs, cdofs, locals_):
        """Many blocks at once: rdofs (n, a), cdofs (n, b), locals (n, a, b)."""
        rdofs = np.asarray(rdofs, dtype=np.int64)
        cdofs = np.asarray(cdofs, dtype=np.int64)
        n, a = rdofs.shape
        b = cdofs.shape[1]
        self._rows.append(np.repeat(rdofs, b, axis=1).ravel())
        self._cols.append(np.tile(cdofs, (1, a)).ravel())
        self._vals.append(np.broadcast_to(locals_, (n, a, b)).ravel())

    def build(self):
        if self._rows:
            rows = np.concatenate(self._rows)
            cols = np.concatenate(self._cols)
            vals = np.concatenate(self._vals)
        else:
            rows = cols = np.zeros(0, dtype=np.int64)
            vals = np.zeros(0)
        return SparseMatrix.from_coo(self.n_rows, self.n_cols, rows, cols, vals)


# ---------------------------------------------------------------------------
# quadrature packs and evaluation operators

class SurfaceQuadrature:
    """Concatenated interface rule over the cut cells of a topology.

    cells holds the interface active cells in ascending order; points of
    cell t occupy rows offsets[t]:offsets[t+1] (cells whose interface
    degenerated away contribute empty chunks). normals are n_i.
    """

    def __init__(self, cells, offsets, points, weights, normals):
        self.cells = cells
        self.offsets = offsets
        self.points = points
        self.weights = weights
        self.normals = normals

    def __len__(self):
        return len(self.weights)

    def chunk(self, t):
        return slice(int(self.offsets[t]), int(self.offsets[t + 1]))


def build_surface_quadrature(topo, order=2):
    """Collect surface_rule over all cut cells into one indexed pack."""
    cells = topo.cells_with(CUT)
    rules = [surface_rule(c, topo, order) for c in cells]
    counts = np.array([len(r) for r in rules], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    if len(rules):
        pts = np.vstack([r.points for r in rules])
        wts = np.concatenate([r.weights for r in rules])
        nrm = np.vstack([r.normals for r in rules])
    else:
        pts = np.zeros((0, 2))
        wts = np.zeros(0)
        nrm = np.zeros((0, 2))
    return SurfaceQuadrature(cells, offsets, pts, wts, nrm)


class BulkQuadrature:
    """Concatenated bulk rule over the active cells of one subdomain."""

    def __init__(self, cells, offsets, points, weights):
        self.cells = cells
        self.offsets = offsets
        self.points = points
        self.weights = weights

    def __len__(self):
        return len(self.weights)


def build_bulk_quadrature(topo, side, cells, order=2):
    """Quadrature over Omega_side restricted to the given background cells.

    Uncut matching cells get the full tensor rule (filled vectorized);
    cut cells get their polygon rules; opposite-side cells contribute
    empty chunks, so `cells` can simply be a bulk active mesh's cells.
    """
    mesh = topo.mesh
    cells = np.asarray(cells, dtype=np.int64)
    loc = topo.location[cells]
    matching = INSIDE if side == "i" else OUTSIDE
    ref_pts, ref_w = tensor_rule_unit(order)
    q = len(ref_w)

    counts = np.zeros(len(cells), dtype=np.int64)
    counts[loc == matching] = q
    cut_rules = {}
    for t in np.nonzero(loc == CUT)[0]:
        r = bulk_rule(int(cells[t]), topo, side, order)
        cut_rules[t] = r
        counts[t] = len(r)
    offsets = np.concatenate([[0], np.cumsum(counts)])

    pts = np.zeros((int(offsets[-1]), 2))
    wts = np.zeros(int(offsets[-1]))
    full = np.nonzero(loc == matching)[0]
    if len(full):
        i, j = mesh.cell_ij(cells[full])
        x0 = mesh.bounds[0] + i * mesh.hx
        y0 = mesh.bounds[1] + j * mesh.hy
        rows = (offsets[full][:, None] + np.arange(q)[None, :]).ravel()
        pts[rows, 0] = (x0[:, None] + ref_pts[None, :, 0] * mesh.hx).ravel()
        pts[rows, 1] = (y0[:, None] + ref_pts[None, :, 1] * mesh.hy).ravel()
        wts[rows] = np.tile(ref_w * (mesh.hx * mesh.hy), len(full))
    for t, r in cut_rules.items():
        s = slice(int(offsets[t]), int(offsets[t + 1]))
        pts[s] = r.points
        wts[s] = r.weights
    return BulkQuadrature(cells, offsets, pts, wts)


def _pack_eval_matrix(space, cells, offsets, points, derivative):
    """Sparse evaluation operator E: (coeffs -> values at pack points).

    derivative None gives function values; 0/1 give d/dx, d/dy (zero for
    P0). Rows follow the pack's point order; every point is evaluated
    through its own cell's basis, so fields discontinuous across cells
    (P0) are handled per chunk.
    """
    mesh = space.mesh
    counts = np.diff(offsets)
    cop = np.repeat(np.arange(len(cells), dtype=np.int64), counts)
    cell_of_point = np.asarray(cells, dtype=np.int64)[cop]
    n_pts = len(points)
    if n_pts == 0:
        return SparseMatrix.from_coo(0, space.n_dofs, [], [], [])
    pos = space.active.position(cell_of_point)
    if np.any(pos < 0):
        raise ValueError("pack references cells outside the active mesh")

    if space.family == P0_DISCONTINUOUS:
        cols = space.cell_dof_table[pos, 0]
        vals = np.zeros(n_pts) if derivative is not None else np.ones(n_pts)
        return SparseMatrix.from_coo(n_pts, space.n_dofs,
                                     np.arange(n_pts), cols, vals)

    i, j = mesh.cell_ij(cell_of_point)
    xi = (points[:, 0] - (mesh.bounds[0] + i * mesh.hx)) / mesh.hx
    eta = (points[:, 1] - (mesh.bounds[1] + j * mesh.hy)) / mesh.hy
    if derivative is None:
        sh = np.column_stack([(1 - xi) * (1 - eta), xi * (1 - eta),
                              (1 - xi) * eta, xi * eta])
    elif derivative == 0:
        sh = np.column_stack([-(1 - eta), (1 - eta), -eta, eta]) / mesh.hx
    elif derivative == 1:
        sh = np.column_stack([-(1 - xi), -xi, (1 - xi), xi]) / mesh.hy
    else:
        raise ValueError("derivative must be None, 0 or 1")
    cols = space.cell_dof_table[pos]
    rows = np.repeat(np.arange(n_pts, dtype=np.int64), 4)
    return SparseMatrix.from_coo(n_pts, space.n_dofs, rows, cols.ravel(), sh.ravel())


def surface_eval_matrix(space, sq, derivative=None):
    """Evaluation operator of a space at surface quadrature points."""
    return _pack_eval_matrix(space, sq.cells, sq.offsets, sq.points, derivative)


def bulk_eval_matrix(space, bq, derivative=None):
    """Evaluation operator of a space at bulk quadrature points."""
    return _pack_eval_matrix(space, bq.cells, bq.offsets, bq.points, derivative)


def _field_evaluator(field):
    """Normalize a coupling datum to fn(cell, pts) -> values.

    Accepts a vectorized callable (x, y) -> values or a (space, coeffs)
    pair (Q1 or P0) evaluated through the discrete basis.
    """
    if callable(field):
        return lambda cell, pts: np.asarray(
            field(pts[:, 0], pts[:, 1]), dtype=float) + np.zeros(len(pts))
    space, coeffs = field
    coeffs = np.asarray(coeffs, dtype=float)
    if space.family == P0_DISCONTINUOUS:
        def ev(cell, pts):
            dof = space.cell_dofs(cell)[0]
            return np.full(len(pts), coeffs[dof])
    else:
        def ev(cell, pts):
            vals, _ = q1_shape(space.mesh.cell_box(cell), pts)
            return vals @ coeffs[space.cell_dofs(cell)]
    return ev


# ---------------------------------------------------------------------------
# elementary operators

def _reference_cell_matrices(mesh, order):
    """(stiffness, mass) 4x4 local matrices of one full cell.

    The grid is uniform, so one reference pair serves every uncut cell.
    """
    box = (0.0, 0.0, mesh.hx, mesh.hy)
    pts, w = tensor_rule_unit(order)
    phys = np.column_stack([pts[:, 0] * mesh.hx, pts[:, 1] * mesh.hy])
    vals, grads = q1_shape(box, phys)
    sw = np.sqrt(w * mesh.hx * mesh.hy)
    bg = grads * sw[:, None, None]
    bv = vals * sw[:, None]
    return np.tensordot(bg, bg, axes=([0, 2], [0, 2])), bv.T @ bv


def _cut_local(space_box, rule, with_grads):
    """Local mass or stiffness block over an arbitrary positive rule."""
    vals, grads = q1_shape(space_box, rule.points)
    sw = np.sqrt(rule.weights)
    if with_grads:
        b = grads * sw[:, None, None]
        return np.tensordot(b, b, axes=([0, 2], [0, 2]))
    b = vals * sw[:, None]
    return b.T @ b


def _bulk_operator(coo, space, topo, side, coeff, order, with_grads, offset=0):
    """Scatter coeff * (stiffness or mass) of one subdomain into coo."""
    mesh = space.mesh
    cells = space.active.cells
    loc = topo.location[cells]
    matching = INSIDE if side == "i" else OUTSIDE
    k_ref, m_ref = _reference_cell_matrices(mesh, order)
    local_ref = coeff * (k_ref if with_grads else m_ref)

    full = np.nonzero(loc == matching)[0]
    if len(full):
        dofs = space.cell_dof_table[full] + offset
        coo.add_batch(dofs, dofs, local_ref[None, :, :])
    for t in np.nonzero(loc == CUT)[0]:
        cell = int(cells[t])
        rule = bulk_rule(cell, topo, side, order)
        if len(rule) == 0:
            continue
        local = coeff * _cut_local(mesh.cell_box(cell), rule, with_grads)
        dofs = space.cell_dof_table[t] + offset
        coo.add_block(dofs, dofs, local)


def assemble_stiffness(space, topo, side, coeff=1.0, order=2):
    """coeff * (grad u, grad v) over Omega_side for one Q1 space."""
    coo = _CooBuilder(space.n_dofs, space.n_dofs)
    _bulk_operator(coo, space, topo, side, coeff, order, with_grads=True)
    return coo.build()


def assemble_bulk_mass(space, topo, side=None, order=2):
    """(u, v) over Omega_side, or over all whole active cells if side is None.

    The side=None variant integrates every active cell in full (the
    L2-norm of the active mesh, denominator of the ghost-penalty norm
    equivalence); with a side it uses cut quadrature (physical norm).
    """
    coo = _CooBuilder(space.n_dofs, space.n_dofs)
    if side is None:
        _, m_ref = _reference_cell_matrices(space.mesh, order)
        dofs = space.cell_dof_table
        coo.add_batch(dofs, dofs, m_ref[None, :, :])
    else:
        _bulk_operator(coo, space, topo, side, 1.0, order, with_grads=False)
    return coo.build()


def _face_jump_matrix(mesh, axis, order):
    """8x8 face integral of [d_n u][d_n v] for a cell pair across one face.

    Same matrix for every face of a given axis on the uniform grid; DOF
    order = (plus cell SW,SE,NW,NE | minus cell SW,SE,NW,NE). Includes
    the ds measure but no penalty scaling.
    """
    hx, hy = mesh.hx, mesh.hy
    if axis == 0:
        box_p, box_m = (0, 0, hx, hy), (hx, 0, 2 * hx, hy)
        t, w = gauss_1d(order)
        pts = np.column_stack([np.full_like(t, hx), t * hy])
        w = w * hy
        n = 0
    else:
        box_p, box_m = (0, 0, hx, hy), (0, hy, hx, 2 * hy)
        t, w = gauss_1d(order)
        pts = np.column_stack([t * hx, np.full_like(t, hy)])
        w = w * hx
        n = 1
    _, g_p = q1_shape(box_p, pts)
    _, g_m = q1_shape(box_m, pts)
    jump = np.hstack([g_p[:, :, n], -g_m[:, :, n]])
    b = jump * np.sqrt(w)[:, None]
    return b.T @ b


def _scatter_face_jumps(coo, space, fs, scale_by_axis, order, offset=0):
    """Add scale * face-jump blocks for every face of a FaceSet."""
    if len(fs) == 0:
        return
    pos = space.active.position(fs.faces[:, 0])
    pos_m = space.active.position(fs.faces[:, 1])
    if np.any(pos < 0) or np.any(pos_m < 0):
        raise ValueError("face set references cells outside the active mesh")
    dofs8 = np.hstack([space.cell_dof_table[pos],
                       space.cell_dof_table[pos_m]]) + offset
    for axis in (0, 1):
        sel = fs.faces[:, 2] == axis
        if not np.any(sel):
            continue
        local = scale_by_axis[axis] * _face_jump_matrix(space.mesh, axis, order)
        coo.add_batch(dofs8[sel], dofs8[sel], local[None, :, :])


def assemble_ghost_penalty(space, gf, params, order=2):
    """Ghost penalty gamma h^3 ([d_n u],[d_n v]) over the given faces.

    For continuous Q1 only the first-derivative term survives (the m=0
    jump vanishes identically); symmetric positive semidefinite.
    """
    coo = _CooBuilder(space.n_dofs, space.n_dofs)
    scale = params.gamma * space.mesh.h ** 3
    _scatter_face_jumps(coo, space, gf, (scale, scale), order)
    return coo.build()


def assemble_surface_mass(space, topo, params, stab="none", order=2):
    """Interface mass (u, v)_Gamma with optional stabilization.

    stab selects the projection stabilization: "s1" adds the face-jump
    term gamma_b h_F^2 ([d_n u],[d_n v]) over interior faces of the
    interface mesh; "s2" adds the whole-cell normal-gradient term
    gamma_b h (d_nGamma u, d_nGamma v) with n_Gamma = grad phi /
    |grad phi|; "none" is the plain (often ill-conditioned) mass.
    """
    if stab not in ("none", "s1", "s2"):
        raise ValueError("stab must be one of none/s1/s2, got %r" % (stab,))
    if space.family != Q1_CONTINUOUS:
        raise ValueError("surface mass expects a Q1 space on the interface mesh")
    mesh = space.mesh
    coo = _CooBuilder(space.n_dofs, space.n_dofs)

    sq = build_surface_quadrature(topo, order)
    for t, cell in enumerate(sq.cells):
        sl = sq.chunk(t)
        if sl.stop == sl.start:
            continue
        vals, _ = q1_shape(mesh.cell_box(int(cell)), sq.points[sl])
        b = vals * np.sqrt(sq.weights[sl])[:, None]
        dofs = space.cell_dof_table[space.active.position(int(cell))]
        coo.add_block(dofs, dofs, b.T @ b)

    if stab == "s1":
        fs = interior_faces(space.active)
        scale = (params.gamma_b * mesh.hy ** 2, params.gamma_b * mesh.hx ** 2)
        _scatter_face_jumps(coo, space, fs, scale, order)
    elif stab == "s2":
        ls = topo.levelset
        step = 1e-6 * mesh.h
        pts_ref, w_ref = tensor_rule_unit(order)
        for t, cell in enumerate(space.active.cells):
            box = mesh.cell_box(int(cell))
            pts = np.column_stack([box[0] + pts_ref[:, 0] * mesh.hx,
                                   box[1] + pts_ref[:, 1] * mesh.hy])
            w = w_ref * mesh.hx * mesh.hy
            _, grads = q1_shape(box, pts)
            gx, gy = ls.gradient(pts[:, 0], pts[:, 1], step=step)
            nrm = np.hypot(gx, gy)
            safe = np.where(nrm > 0, nrm, 1.0)
            nx = np.where(nrm > 0, gx / safe, 0.0)
            ny = np.where(nrm > 0, gy / safe, 0.0)
            dn = grads[:, :, 0] * nx[:, None] + grads[:, :, 1] * ny[:, None]
            b = dn * np.sqrt(params.gamma_b * mesh.h * w)[:, None]
            dofs = space.cell_dof_table[t]
            coo.add_block(dofs, dofs, b.T @ b)
    return coo.build()


def assemble_load(space, topo, f, side, order=2):
    """(f, v) over Omega_side; f is a vectorized callable (x, y) -> values."""
    bq = build_bulk_quadrature(topo, side, space.active.cells, order)
    out = np.zeros(space.n_dofs)
    if len(bq) == 0:
        return out
    ev = bulk_eval_matrix(space, bq)
    vals = np.asarray(f(bq.points[:, 0], bq.points[:, 1]), dtype=float)
    vals = vals + np.zeros(len(bq))
    return ev.transpose() @ (bq.weights * vals)


# ---------------------------------------------------------------------------
# coupled systems

def _check_bulk_pair(spaces):
    v_i, v_e = spaces
    for sp, tag in ((v_i, "intracellular"), (v_e, "extracellular")):
        if sp.family != Q1_CONTINUOUS:
            raise ValueError("bulk spaces must be Q1, got %r" % (sp.family,))
        if sp.active.domain_tag != tag:
            raise ValueError("expected a %s space, got %r" % (tag, sp.active.domain_tag))
    return v_i, v_e


def _surface_jump_shapes(v_i, v_e, cell, pts):
    """(k, 8) rows of (v_i - v_e) basis values at surface points of a cell."""
    box = v_i.mesh.cell_box(cell)
    vals, _ = q1_shape(box, pts)
    return np.hstack([vals, -vals])


def _jump_dofs(v_i, v_e, cell, off_i, off_e):
    return np.concatenate([v_i.cell_dofs(cell) + off_i,
                           v_e.cell_dofs(cell) + off_e])


def assemble_single_dim(spaces, topo, params, g, f_i=None, f_e=None, order=2):
    """Single-dimensional operator: stiffness + ghost + interface jump mass.

    Implements sigma_j (grad u_j, grad v_j)_{Omega_j} summed over both
    sides plus (C_m/dt) (u_i - u_e, v_i - v_e)_Gamma, with ghost
    penalties on both bulk spaces; rhs (C_m/dt)(g, v_i - v_e)_Gamma plus
    optional bulk sources. g is a callable or (space, coeffs) pair.
    """
    v_i, v_e = _check_bulk_pair(spaces)
    layout = DofLayout([("u_i", v_i), ("u_e", v_e)])
    off_i, off_e = int(layout.offsets[0]), int(layout.offsets[1])
    coo = _CooBuilder(layout.n_full, layout.n_full)

    _bulk_operator(coo, v_i, topo, "i", params.sigma_i, order, True, off_i)
    _bulk_operator(coo, v_e, topo, "e", params.sigma_e, order, True, off_e)
    scale = params.gamma * topo.mesh.h ** 3
    _scatter_face_jumps(coo, v_i, ghost_faces(v_i.active, topo), (scale, scale), order, off_i)
    _scatter_face_jumps(coo, v_e, ghost_faces(v_e.active, topo), (scale, scale), order, off_e)

    ratio = params.C_m / params.dt
    sq = build_surface_quadrature(topo, order)
    g_ev = _field_evaluator(g)
    rhs = np.zeros(layout.n_full)
    for t, cell in enumerate(sq.cells):
        sl = sq.chunk(t)
        if sl.stop == sl.start:
            continue
        cell = int(cell)
        jump = _surface_jump_shapes(v_i, v_e, cell, sq.points[sl])
        w = sq.weights[sl]
        dofs = _jump_dofs(v_i, v_e, cell, off_i, off_e)
        b = jump * np.sqrt(ratio * w)[:, None]
        coo.add_block(dofs, dofs, b.T @ b)
        rhs[dofs] += ratio * ((w * g_ev(cell, sq.points[sl])) @ jump)

    if f_i is not None:
        rhs[layout.block_slice("u_i")] += assemble_load(v_i, topo, f_i, "i", order)
    if f_e is not None:
        rhs[layout.block_slice("u_e")] += assemble_load(v_e, topo, f_e, "e", order)
    return AssembledSystem(coo.build(), rhs, layout)


def assemble_multi_dim(spaces, q_space, topo, params, g, f_i=None, f_e=None,
                       stabilized=True, order=2):
    """Multi-dimensional saddle-point operator with the current unknown.

    Blocks [[A + G, B^T], [B, -(dt/C_m) C - S]] over (u_i, u_e, I_m):
    A the bulk stiffness, G the ghost penalties, B the jump coupling
    (v_i - v_e, I)_Gamma, C the P0 surface mass, and S the multiplier
    face-jump stabilization phi ([I],[j])_F with phi = max(dt/C_m, h).
    stabilized=False drops both G and S (the sensitivity-study baseline).
    rhs carries (g, j)_Gamma in the multiplier block plus bulk sources.
    """
    v_i, v_e = _check_bulk_pair(spaces)
    if q_space.family != P0_DISCONTINUOUS:
        raise ValueError("multiplier space must be P0 on the interface mesh")
    layout = DofLayout([("u_i", v_i), ("u_e", v_e), ("I_m", q_space)])
    off_i, off_e, off_q = (int(layout.offsets[k]) for k in range(3))
    coo = _CooBuilder(layout.n_full, layout.n_full)
    mesh = topo.mesh

    _bulk_operator(coo, v_i, topo, "i", params.sigma_i, order, True, off_i)
    _bulk_operator(coo, v_e, topo, "e", params.sigma_e, order, True, off_e)
    if stabilized:
        scale = params.gamma * mesh.h ** 3
        _scatter_face_jumps(coo, v_i, ghost_faces(v_i.active, topo), (scale, scale), order, off_i)
        _scatter_face_jumps(coo, v_e, ghost_faces(v_e.active, topo), (scale, scale), order, off_e)

    tau = params.dt / params.C_m
    sq = build_surface_quadrature(topo, order)
    g_ev = _field_evaluator(g)
    rhs = np.zeros(layout.n_full)
    for t, cell in enumerate(sq.cells):
        sl = sq.chunk(t)
        if sl.stop == sl.start:
            continue
        cell = int(cell)
        w = sq.weights[sl]
        jump = _surface_jump_shapes(v_i, v_e, cell, sq.points[sl])
        u_dofs = _jump_dofs(v_i, v_e, cell, off_i, off_e)
        q_dof = q_space.cell_dofs(cell)[0] + off_q
        b_row = w @ jump
        coo.add_block([q_dof], u_dofs, b_row[None, :])
        coo.add_block(u_dofs, [q_dof], b_row[:, None])
        coo.add_block([q_dof], [q_dof], np.array([[-tau * np.sum(w)]]))
        rhs[q_dof] += w @ g_ev(cell, sq.points[sl])

    if stabilized:
        fs = interior_faces(q_space.active)
        phi = max(tau, mesh.h)
        pair = np.array([[1.0, -1.0], [-1.0, 1.0]])
        for axis, h_f in ((0, mesh.hy), (1, mesh.hx)):
            sel = fs.faces[:, 2] == axis
            if not np.any(sel):
                continue
            pos_p = q_space.active.position(fs.faces[sel, 0])
            pos_m = q_space.active.position(fs.faces[sel, 1])
            dofs = np.column_stack([q_space.cell_dof_table[pos_p, 0],
                                    q_space.cell_dof_table[pos_m, 0]]) + off_q
            coo.add_batch(dofs, dofs, (-phi * h_f) * pair[None, :, :])

    if f_i is not None:
        rhs[layout.block_slice("u_i")] += assemble_load(v_i, topo, f_i, "i", order)
    if f_e is not None:
        rhs[layout.block_slice("u_e")] += assemble_load(v_e, topo, f_e, "e", order)
    return AssembledSystem(coo.build(), rhs, layout)
