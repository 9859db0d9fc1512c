"""Implicit membrane geometry: level sets, cell classification, cut cells.

The membrane Gamma is the zero contour of a scalar level-set function
phi, with the intracellular domain Omega_i = {phi < 0}. Each background
cell is classified inside/outside/cut; cut cells get a polygonal
decomposition of both sides plus straight interface segments obtained
from linear interpolation of phi along cell edges (marching squares,
geometry error O(h^2)).

Normals: n_i is the unit normal pointing out of Omega_i (aligned with
grad phi); n_e = -n_i.
"""

import numpy as np

from .mesh import INSIDE, OUTSIDE, CUT

# vertex values closer to zero than SNAP_TOL*h are pushed to +SNAP_TOL*h,
# so edge roots never sit exactly on vertices and the all-zero cell
# cannot occur after snapping
SNAP_TOL = 1e-12


class DegenerateCutError(Exception):
    """All four vertex values of a cell are within tolerance of zero."""


class LevelSet:
    """Scalar field phi with optional analytic gradient.

    Parameters
    ----------
    eval_fn : callable
        Vectorized map (x, y) -> phi.
    grad_fn : callable, optional
        Vectorized map (x, y) -> (dphi/dx, dphi/dy). When omitted,
        gradient() falls back to central differences; callers near a
        mesh pass step = 1e-6*h.
    """

    def __init__(self, eval_fn, grad_fn=None):
        self._eval = eval_fn
        self._grad = grad_fn

    def evaluate(self, x, y):
        return self._eval(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def gradient(self, x, y, step=1e-8):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self._grad is not None:
            gx, gy = self._grad(x, y)
            return np.asarray(gx, dtype=float), np.asarray(gy, dtype=float)
        gx = (self._eval(x + step, y) - self._eval(x - step, y)) / (2 * step)
        gy = (self._eval(x, y + step) - self._eval(x, y - step)) / (2 * step)
        return gx, gy


def make_circle(radius, center=(0.0, 0.0)):
    cx, cy = center
    r2 = radius * radius
    return LevelSet(
        lambda x, y: (x - cx) ** 2 + (y - cy) ** 2 - r2,
        lambda x, y: (2 * (x - cx), 2 * (y - cy)),
    )


def make_ellipse(a, b, center=(0.0, 0.0)):
    cx, cy = center
    return LevelSet(
        lambda x, y: ((x - cx) / a) ** 2 + ((y - cy) / b) ** 2 - 1.0,
        lambda x, y: (2 * (x - cx) / a**2, 2 * (y - cy) / b**2),
    )


def make_levelset1():
    """phi = x^2 + y^2 + y*sin((x+1)^2) - 1.5 with its analytic gradient."""

    def f(x, y):
        return x**2 + y**2 + y * np.sin((x + 1.0) ** 2) - 1.5

    def g(x, y):
        return (
            2 * x + 2 * y * (x + 1.0) * np.cos((x + 1.0) ** 2),
            2 * y + np.sin((x + 1.0) ** 2),
        )

    return LevelSet(f, g)


def make_union(parts):
    """Union of sub-shapes: pointwise min of the member level sets.

    The gradient follows the active (minimizing) branch, which is the
    analytic gradient almost everywhere.
    """

    def f(x, y):
        return np.minimum.reduce([p.evaluate(x, y) for p in parts])

    def g(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        vals = np.stack([p.evaluate(x, y) for p in parts])
        winner = np.argmin(vals, axis=0)
        gxs, gys = zip(*[p.gradient(x, y) for p in parts])
        gx = np.choose(winner, [np.broadcast_to(v, x.shape) for v in gxs])
        gy = np.choose(winner, [np.broadcast_to(v, x.shape) for v in gys])
        return gx, gy

    return LevelSet(f, g)


def make_two_lobes(center_a=(-8.0, 0.0), semi_a=(13.0, 8.0),
                   center_b=(8.0, 0.0), semi_b=(13.0, 8.0)):
    """Two overlapping ellipses joined into one cell-like shape."""
    return make_union([
        make_ellipse(semi_a[0], semi_a[1], center_a),
        make_ellipse(semi_b[0], semi_b[1], center_b),
    ])


def translated_circle(radius, delta=None, N=32, M_delta=100, m=None):
    """Circle of the sensitivity sweeps, center S = delta*(1/N, 1/N).

    Either pass delta directly, or pass m with M_delta to get
    delta = m/M_delta. 0 <= m <= M_delta required.
    """
    if m is not None:
        if not (0 <= m <= M_delta):
            raise ValueError("m must lie in [0, M_delta]")
        delta = m / M_delta
    if delta is None:
        raise ValueError("need delta or m")
    s = delta / N
    return make_circle(radius, center=(s, s))


NAMED_GEOMETRIES = {
    "levelset1": make_levelset1,
    "circle": make_circle,
    "ellipse": make_ellipse,
    "two_lobes": make_two_lobes,
}


def make_levelset(name, **params):
    """Construct one of the built-in geometries by config name."""
    try:
        factory = NAMED_GEOMETRIES[name]
    except KeyError:
        raise ValueError("unknown geometry %r (have %s)"
                         % (name, sorted(NAMED_GEOMETRIES))) from None
    return factory(**params)


def _snap(values, h):
    """Push near-zero samples to +SNAP_TOL*h (copy)."""
    values = np.array(values, dtype=float)
    small = np.abs(values) < SNAP_TOL * h
    values[small] = SNAP_TOL * h
    return values


class CutCell:
    """Geometry of one cut cell.

    polys_in / polys_out are lists of CCW-ordered (k, 2) vertex arrays
    (convex by construction: each piece is the square clipped by one or
    two half planes). segments is a list of (a, b, n_i) with endpoints
    a, b and the unit normal n_i pointing out of Omega_i.
    """

    def __init__(self, polys_in, polys_out, segments):
        self.polys_in = polys_in
        self.polys_out = polys_out
        self.segments = segments


class CutTopology:
    """Per-cell location tags plus cut-cell geometry for a (mesh, phi) pair."""

    def __init__(self, mesh, levelset, location, cut_cells):
        self.mesh = mesh
        self.levelset = levelset
        self.location = location          # int array over background cells
        self.cut_cells = cut_cells        # dict: cell index -> CutCell

    def cells_with(self, loc):
        return np.nonzero(self.location == loc)[0]


def classify_cell(ls, mesh, cell, tol=SNAP_TOL):
    """Classify one cell against the zero contour.

    Samples phi at the 4 vertices and the 4 edge midpoints (midpoints
    guard against an interface arc entering and leaving through a single
    edge on coarse meshes). All samples < -tol*h -> inside; all >
    tol*h -> outside; otherwise cut.
    """
    if tol < 0:
        raise ValueError("tol must be >= 0")
    x0, y0, x1, y1 = mesh.cell_box(cell)
    xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    xs = np.array([x0, x1, x0, x1, xm, x1, xm, x0])
    ys = np.array([y0, y0, y1, y1, y0, ym, y1, ym])
    vals = _snap(ls.evaluate(xs, ys), mesh.h)
    if np.all(vals < -tol * mesh.h):
        return INSIDE
    if np.all(vals > tol * mesh.h):
        return OUTSIDE
    return CUT


def _poly_area(poly):
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


def _segment_normal(a, b, ls, step):
    """Unit normal of segment (a, b), sign-aligned with grad phi (= n_i)."""
    d = np.asarray(b) - np.asarray(a)
    n = np.array([d[1], -d[0]])
    nrm = np.hypot(n[0], n[1])
    if nrm == 0.0:
        return None
    n /= nrm
    mp = 0.5 * (np.asarray(a) + np.asarray(b))
    gx, gy = ls.gradient(mp[0], mp[1], step=step)
    if n[0] * gx + n[1] * gy < 0:
        n = -n
    return n


def cut_cell_geometry(ls, mesh, cell, vertex_values=None, center_value=None):
    """Decompose a cut cell into side polygons and interface segments.

    Walks the cell boundary counterclockwise, inserting the linear root
    on each sign-changing edge; the inside (outside) polygon is the
    cyclic subsequence of inside (outside) corners plus roots. The
    four-root saddle is split by the sign of phi at the cell center into
    two chords. Cells flagged cut by midpoint sampling alone (no vertex
    sign change) degrade to a full cell on the majority side with no
    segments.
    """
    x0, y0, x1, y1 = mesh.cell_box(cell)
    # CCW corner walk: SW, SE, NE, NW
    corners = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    if vertex_values is None:
        raw = ls.evaluate(corners[:, 0], corners[:, 1])
    else:
        raw = np.asarray(vertex_values, dtype=float)
    if np.all(np.abs(raw) < SNAP_TOL * mesh.h):
        raise DegenerateCutError("cell %d: all vertex values ~ 0" % cell)
    vals = _snap(raw, mesh.h)
    neg = vals < 0
    grad_step = 1e-6 * mesh.h

    if neg.all() or (~neg).all():
        # cut only via midpoint sampling; keep the cell whole
        poly = [corners.copy()]
        if neg.all():
            return CutCell(poly, [], [])
        return CutCell([], poly, [])

    # boundary walk: corners interleaved with edge roots
    pts, kinds = [], []   # kind: -1 inside corner, +1 outside corner, 0 root
    roots = []
    for k in range(4):
        pts.append(corners[k])
        kinds.append(-1 if neg[k] else 1)
        k2 = (k + 1) % 4
        if neg[k] != neg[k2]:
            t = vals[k] / (vals[k] - vals[k2])
            r = corners[k] + t * (corners[k2] - corners[k])
            roots.append(len(pts))
            pts.append(r)
            kinds.append(0)
    pts = np.array(pts)
    kinds = np.array(kinds)

    if len(roots) == 2:
        poly_in = pts[kinds <= 0]
        poly_out = pts[kinds >= 0]
        a, b = pts[roots[0]], pts[roots[1]]
        n = _segment_normal(a, b, ls, grad_step)
        segments = [(a, b, n)] if n is not None else []
        return CutCell([poly_in], [poly_out], segments)

    # saddle: four roots r0..r3 follow corners c0..c3 on the walk
    if center_value is None:
        center_value = float(ls.evaluate(0.5 * (x0 + x1), 0.5 * (y0 + y1)))
    r = [pts[i] for i in roots]
    c = corners
    if neg[0]:
        in_a, in_b = 0, 2   # corners c0, c2 inside
    else:
        in_a, in_b = 1, 3
    center_inside = center_value < 0
    if center_inside:
        # inside hexagon connects the two inside corners through the center
        hexagon = np.array([c[in_a], r[in_a], r[(in_a + 1) % 4],
                            c[in_b], r[in_b], r[(in_b + 1) % 4]])
        tri1 = np.array([r[in_a], c[(in_a + 1) % 4], r[(in_a + 1) % 4]])
        tri2 = np.array([r[in_b], c[(in_b + 1) % 4], r[(in_b + 1) % 4]])
        polys_in, polys_out = [hexagon], [tri1, tri2]
        chords = [(r[in_a], r[(in_a + 1) % 4]), (r[in_b], r[(in_b + 1) % 4])]
    else:
        tri1 = np.array([c[in_a], r[in_a], r[(in_a + 3) % 4]])
        tri2 = np.array([c[in_b], r[in_b], r[(in_b + 3) % 4]])
        out_a = (in_a + 1) % 4
        out_b = (in_b + 1) % 4
        hexagon = np.array([c[out_a], r[out_a], r[(out_a + 1) % 4],
                            c[out_b], r[out_b], r[(out_b + 1) % 4]])
        polys_in, polys_out = [tri1, tri2], [hexagon]
        chords = [(r[in_a], r[(in_a + 3) % 4]), (r[in_b], r[(in_b + 3) % 4])]
    segments = []
    for a, b in chords:
        n = _segment_normal(a, b, ls, grad_step)
        if n is not None:
            segments.append((a, b, n))
    return CutCell(polys_in, polys_out, segments)


def build_cut_topology(ls, mesh, tol=SNAP_TOL):
    """Classify every cell and build geometry for the cut ones.

    Vectorizes the phi sampling over the whole grid (vertices, edge
    midpoints, cell centers); only cut cells are visited in Python.
    """
    nx, ny = mesh.nx, mesh.ny
    x0, y0, _, _ = mesh.bounds
    xv = x0 + np.arange(nx + 1) * mesh.hx
    yv = y0 + np.arange(ny + 1) * mesh.hy
    xm = x0 + (np.arange(nx) + 0.5) * mesh.hx
    ym = y0 + (np.arange(ny) + 0.5) * mesh.hy

    X, Y = np.meshgrid(xv, yv)
    vert = _snap(ls.evaluate(X, Y), mesh.h)            # (ny+1, nx+1)
    XH, YH = np.meshgrid(xm, yv)
    hmid = _snap(ls.evaluate(XH, YH), mesh.h)          # horizontal edges
    XV, YV = np.meshgrid(xv, ym)
    vmid = _snap(ls.evaluate(XV, YV), mesh.h)          # vertical edges
    XC, YC = np.meshgrid(xm, ym)
    cent = ls.evaluate(XC, YC)

    th = tol * mesh.h
    samples = np.stack([
        vert[:-1, :-1], vert[:-1, 1:], vert[1:, :-1], vert[1:, 1:],
        hmid[:-1, :], hmid[1:, :], vmid[:, :-1], vmid[:, 1:],
    ])                                                  # (8, ny, nx)
    all_in = np.all(samples < -th, axis=0)
    all_out = np.all(samples > th, axis=0)
    location = np.full((ny, nx), CUT, dtype=np.int64)
    location[all_in] = INSIDE
    location[all_out] = OUTSIDE
    location = location.ravel()

    cut_cells = {}
    for cell in np.nonzero(location == CUT)[0]:
        i, j = cell % nx, cell // nx
        vv = np.array([vert[j, i], vert[j, i + 1],
                       vert[j + 1, i + 1], vert[j + 1, i]])
        cut_cells[int(cell)] = cut_cell_geometry(
            ls, mesh, cell, vertex_values=vv, center_value=float(cent[j, i]))
    return CutTopology(mesh, ls, location, cut_cells)
