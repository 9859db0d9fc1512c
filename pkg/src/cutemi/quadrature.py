"""Quadrature on uncut cells, cut-cell polygons, interface segments, faces.

Bulk rules are tensor Gauss on uncut cells; on cut cells the side
polygon (convex) is fan-triangulated about its centroid and a symmetric
triangle rule is mapped to each piece. Surface rules are 1D Gauss mapped
to the straight interface segments, carrying the segment normal n_i.
Ghost-penalty face rules always cover the full face, even when Gamma
crosses it: the penalty lives on faces of the active mesh, not on
physical sub-faces.

"order n" means an n-point Gauss rule per axis; rules of order p
integrate total degree <= p exactly on their domains. All weights are
positive.
"""

from functools import lru_cache
from itertools import permutations

import numpy as np

from .mesh import CUT, INSIDE, OUTSIDE


class QuadratureRule:
    """Points (k, 2), weights (k,), optional per-point normals (k, 2)."""

    def __init__(self, points, weights, normals=None):
        self.points = np.asarray(points, dtype=float).reshape(-1, 2)
        self.weights = np.asarray(weights, dtype=float).reshape(-1)
        self.normals = None if normals is None else \
            np.asarray(normals, dtype=float).reshape(-1, 2)

    def __len__(self):
        return len(self.weights)

    @staticmethod
    def empty(with_normals=False):
        n = np.zeros((0, 2)) if with_normals else None
        return QuadratureRule(np.zeros((0, 2)), np.zeros(0), n)

    @staticmethod
    def concatenate(rules, with_normals=False):
        rules = [r for r in rules if len(r)]
        if not rules:
            return QuadratureRule.empty(with_normals)
        pts = np.vstack([r.points for r in rules])
        wts = np.concatenate([r.weights for r in rules])
        nrm = None
        if with_normals:
            nrm = np.vstack([r.normals for r in rules])
        return QuadratureRule(pts, wts, nrm)


@lru_cache(maxsize=None)
def gauss_1d(order):
    """order-point Gauss-Legendre nodes/weights on [0, 1]."""
    if order < 1:
        raise ValueError("order must be >= 1")
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


# symmetric triangle rules in barycentric form, all weights positive;
# keyed by the polynomial degree they integrate exactly
_TRI_ORBITS = {
    1: [(1.0, (1 / 3, 1 / 3, 1 / 3))],
    2: [(1 / 3, (2 / 3, 1 / 6, 1 / 6))],
    4: [
        (0.223381589678011, (0.108103018168070, 0.445948490915965, 0.445948490915965)),
        (0.109951743655322, (0.816847572980459, 0.091576213509771, 0.091576213509771)),
    ],
    5: [
        (0.225, (1 / 3, 1 / 3, 1 / 3)),
        (0.132394152788506, (0.059715871789770, 0.470142064105115, 0.470142064105115)),
        (0.125939180544827, (0.797426985353087, 0.101286507323456, 0.101286507323456)),
    ],
}


@lru_cache(maxsize=None)
def triangle_rule(order):
    """Barycentric points (k, 3) and weights (k,) summing to 1, degree >= order."""
    degree = {1: 1, 2: 2, 3: 4, 4: 4, 5: 5}.get(order)
    if degree is None:
        raise ValueError("unsupported bulk order %s (max 5)" % order)
    bary, wts = [], []
    for w, orbit in _TRI_ORBITS[degree]:
        for p in sorted(set(permutations(orbit))):
            bary.append(p)
            wts.append(w)
    return np.array(bary), np.array(wts)


@lru_cache(maxsize=None)
def tensor_rule_unit(order):
    """Tensor Gauss points (order^2, 2) and weights on [0, 1]^2."""
    x, w = gauss_1d(order)
    X, Y = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    return np.column_stack([X.ravel(), Y.ravel()]), W.ravel()


def _tensor_rule_box(box, order):
    x0, y0, x1, y1 = box
    pts, wts = tensor_rule_unit(order)
    phys = np.column_stack([x0 + pts[:, 0] * (x1 - x0), y0 + pts[:, 1] * (y1 - y0)])
    return QuadratureRule(phys, wts * (x1 - x0) * (y1 - y0))


def _triangle_points(tri, order):
    bary, wts = triangle_rule(order)
    a, b, c = tri
    pts = np.outer(bary[:, 0], a) + np.outer(bary[:, 1], b) + np.outer(bary[:, 2], c)
    area = 0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    return pts, wts * area


def polygon_rule(poly, order):
    """Rule over a convex CCW polygon via centroid fan triangulation."""
    poly = np.asarray(poly, dtype=float)
    k = len(poly)
    if k < 3:
        return QuadratureRule.empty()
    if k == 3:
        tris = [poly]
    else:
        centroid = poly.mean(axis=0)
        tris = [np.array([centroid, poly[m], poly[(m + 1) % k]]) for m in range(k)]
    pts, wts = [], []
    for tri in tris:
        p, w = _triangle_points(tri, order)
        pts.append(p)
        wts.append(w)
    return QuadratureRule(np.vstack(pts), np.concatenate(wts))


def bulk_rule(cell, topo, side, order=2):
    """Quadrature over T cap Omega_side for one background cell.

    Uncut cells on the matching side get the tensor rule over the whole
    cell; the opposite side (and cut cells whose polygon collapsed after
    snapping) get an empty rule.
    """
    if side not in ("i", "e"):
        raise ValueError("side must be 'i' or 'e'")
    mesh = topo.mesh
    loc = topo.location[cell]
    matching = INSIDE if side == "i" else OUTSIDE
    if loc == matching:
        return _tensor_rule_box(mesh.cell_box(cell), order)
    if loc != CUT:  # uncut, other side
        return QuadratureRule.empty()
    cc = topo.cut_cells[int(cell)]
    polys = cc.polys_in if side == "i" else cc.polys_out
    if not polys:
        return QuadratureRule.empty()
    return QuadratureRule.concatenate([polygon_rule(p, order) for p in polys])


def surface_rule(cell, topo, order=2):
    """Quadrature over Gamma cap T with per-point normals n_i."""
    cc = topo.cut_cells.get(int(cell))
    if cc is None or not cc.segments:
        return QuadratureRule.empty(with_normals=True)
    t, w = gauss_1d(order)
    pts, wts, nrms = [], [], []
    for a, b, n in cc.segments:
        a = np.asarray(a)
        b = np.asarray(b)
        length = np.hypot(*(b - a))
        pts.append(a[None, :] + t[:, None] * (b - a)[None, :])
        wts.append(w * length)
        nrms.append(np.repeat(n[None, :], len(t), axis=0))
    return QuadratureRule(np.vstack(pts), np.concatenate(wts), np.vstack(nrms))


def face_rule(fs, k, order=2):
    """Quadrature on interior face k of a FaceSet (always the full face)."""
    (xa, ya), (xb, yb) = fs.face_segment(k)
    t, w = gauss_1d(order)
    pts = np.column_stack([xa + t * (xb - xa), ya + t * (yb - ya)])
    length = np.hypot(xb - xa, yb - ya)
    return QuadratureRule(pts, w * length)
