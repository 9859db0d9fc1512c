"""Structured Cartesian background mesh and active-mesh/face bookkeeping.

The background mesh covers the computational box with nx*ny axis-aligned
cells. Everything downstream (cut classification, FE spaces, assembly)
works with plain integer cell/vertex indices into this grid, so all
connectivity here is closed-form lexicographic arithmetic.

Indexing conventions:
  cell (i, j)   -> index j*nx + i          (i along x, j along y)
  vertex (i, j) -> index j*(nx+1) + i
  local vertex order per cell: (SW, SE, NW, NE), i.e. tensor order
  matching the bilinear shape functions in spaces.py.

Faces are oriented axis-aligned: axis 0 faces have normal +x and join
cell (i,j) to (i+1,j); axis 1 faces have normal +y and join (i,j) to
(i,j+1). The face normal always points from cell_plus to cell_minus.
"""

import numpy as np

INSIDE, OUTSIDE, CUT = 0, 1, 2

TAG_INTRACELLULAR = "intracellular"
TAG_EXTRACELLULAR = "extracellular"
TAG_INTERFACE = "interface"


class BackgroundMesh:
    """Uniform Cartesian grid of square (in practice) cells.

    Parameters
    ----------
    nx, ny : int
        Cell counts per axis, >= 1.
    bounds : tuple
        (x0, y0, x1, y1) with x1 > x0, y1 > y0.
    """

    def __init__(self, nx, ny, bounds):
        if nx < 1 or ny < 1:
            raise ValueError("cell counts must be >= 1, got (%s, %s)" % (nx, ny))
        x0, y0, x1, y1 = bounds
        if not (x1 > x0 and y1 > y0):
            raise ValueError("degenerate bounds %r" % (bounds,))
        self.nx = int(nx)
        self.ny = int(ny)
        self.bounds = (float(x0), float(y0), float(x1), float(y1))
        self.hx = (x1 - x0) / nx
        self.hy = (y1 - y0) / ny
        # penalty length scale; equals hx for the square cells used throughout
        self.h = max(self.hx, self.hy)
        self.n_cells = self.nx * self.ny
        self.n_vertices = (self.nx + 1) * (self.ny + 1)

    def cell_index(self, i, j):
        return j * self.nx + i

    def cell_ij(self, cells):
        cells = np.asarray(cells)
        return cells % self.nx, cells // self.nx

    def vertex_index(self, i, j):
        return j * (self.nx + 1) + i

    def vertex_coords(self, vertices):
        """Physical coordinates of vertex indices, shape (..., 2)."""
        vertices = np.asarray(vertices)
        i = vertices % (self.nx + 1)
        j = vertices // (self.nx + 1)
        x0, y0, _, _ = self.bounds
        return np.stack([x0 + i * self.hx, y0 + j * self.hy], axis=-1)

    def cell_vertices(self, cells):
        """Global vertex indices per cell in (SW, SE, NW, NE) order.

        Accepts a scalar or an array of cell indices; returns shape
        (..., 4) int array.
        """
        cells = np.asarray(cells)
        i, j = cells % self.nx, cells // self.nx
        sw = j * (self.nx + 1) + i
        return np.stack([sw, sw + 1, sw + self.nx + 1, sw + self.nx + 2], axis=-1)

    def cell_box(self, cell):
        """(x0, y0, x1, y1) of one cell."""
        i, j = cell % self.nx, cell // self.nx
        bx0, by0, _, _ = self.bounds
        x0 = bx0 + i * self.hx
        y0 = by0 + j * self.hy
        return (x0, y0, x0 + self.hx, y0 + self.hy)

    def cell_center(self, cell):
        x0, y0, x1, y1 = self.cell_box(cell)
        return (0.5 * (x0 + x1), 0.5 * (y0 + y1))

    def locate(self, x, y):
        """Cell index containing the point (clamped to the grid)."""
        bx0, by0, _, _ = self.bounds
        i = min(max(int((x - bx0) / self.hx), 0), self.nx - 1)
        j = min(max(int((y - by0) / self.hy), 0), self.ny - 1)
        return self.cell_index(i, j)

    def neighbor(self, cell, axis, direction):
        """Neighbor cell index across a face, or -1 at the grid boundary.

        axis 0/1, direction -1/+1.
        """
        i, j = cell % self.nx, cell // self.nx
        if axis == 0:
            i += direction
            if i < 0 or i >= self.nx:
                return -1
        else:
            j += direction
            if j < 0 or j >= self.ny:
                return -1
        return self.cell_index(i, j)

    def boundary_vertices(self):
        """Indices of vertices on the outer box boundary."""
        i, j = np.meshgrid(np.arange(self.nx + 1), np.arange(self.ny + 1))
        on = (i == 0) | (i == self.nx) | (j == 0) | (j == self.ny)
        return (j[on] * (self.nx + 1) + i[on]).ravel()


class ActiveMesh:
    """Subset of background cells carrying one of the physical subdomains.

    cells is a sorted int array of background cell indices; domain_tag is
    one of the TAG_* strings.
    """

    def __init__(self, parent, cells, domain_tag):
        self.parent = parent
        self.cells = np.unique(np.asarray(cells, dtype=np.int64))
        self.domain_tag = domain_tag
        # membership map: background cell -> position in self.cells, or -1
        self._pos = np.full(parent.n_cells, -1, dtype=np.int64)
        self._pos[self.cells] = np.arange(len(self.cells))

    def __len__(self):
        return len(self.cells)

    def contains(self, cell):
        return self._pos[cell] >= 0

    def position(self, cell):
        """Index of cell within this active mesh's ordering (-1 if absent)."""
        return self._pos[cell]


class FaceSet:
    """Interior faces of an active mesh.

    faces: int array (n, 3) of (cell_plus, cell_minus, axis), sorted by
    (cell_plus, axis) for deterministic assembly. The unit normal is +x
    for axis 0 and +y for axis 1, pointing from cell_plus to cell_minus.
    face_measure is the face length h_F.
    """

    def __init__(self, mesh, faces):
        self.mesh = mesh
        faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        if len(faces):
            order = np.lexsort((faces[:, 2], faces[:, 0]))
            faces = faces[order]
        self.faces = faces

    def __len__(self):
        return len(self.faces)

    def face_measure(self, k):
        return self.mesh.hy if self.faces[k, 2] == 0 else self.mesh.hx

    def face_normal(self, k):
        return (1.0, 0.0) if self.faces[k, 2] == 0 else (0.0, 1.0)

    def face_segment(self, k):
        """Endpoints ((xa, ya), (xb, yb)) of face k."""
        cp, _, axis = self.faces[k]
        x0, y0, x1, y1 = self.mesh.cell_box(cp)
        if axis == 0:
            return (x1, y0), (x1, y1)
        return (x0, y1), (x1, y1)


def build_cartesian_mesh(nx, ny, bounds):
    """Build the structured background mesh; see BackgroundMesh."""
    return BackgroundMesh(nx, ny, bounds)


def active_mesh(mesh, topo, tag):
    """Collect the active cells for one subdomain.

    Bulk tags take cells with location in {their inside tag, cut}; the
    interface tag takes exactly the cut cells.
    """
    if topo.mesh is not mesh:
        raise ValueError("topology was built on a different mesh")
    loc = topo.location
    if tag == TAG_INTRACELLULAR:
        cells = np.nonzero((loc == INSIDE) | (loc == CUT))[0]
    elif tag == TAG_EXTRACELLULAR:
        cells = np.nonzero((loc == OUTSIDE) | (loc == CUT))[0]
    elif tag == TAG_INTERFACE:
        cells = np.nonzero(loc == CUT)[0]
    else:
        raise ValueError("unknown domain tag %r" % (tag,))
    return ActiveMesh(mesh, cells, tag)


def interior_faces(am):
    """All faces whose two neighbor cells both belong to the active mesh.

    Each face appears once, keyed by its cell on the -x/-y side
    (cell_plus), so the normal points in the +axis direction.
    """
    mesh = am.parent
    active = np.zeros(mesh.n_cells, dtype=bool)
    active[am.cells] = True
    i, j = mesh.cell_ij(am.cells)
    faces = []
    # +x neighbor
    ok = i < mesh.nx - 1
    right = am.cells[ok] + 1
    keep = active[right]
    for cp, cm in zip(am.cells[ok][keep], right[keep]):
        faces.append((cp, cm, 0))
    # +y neighbor
    ok = j < mesh.ny - 1
    up = am.cells[ok] + mesh.nx
    keep = active[up]
    for cp, cm in zip(am.cells[ok][keep], up[keep]):
        faces.append((cp, cm, 1))
    return FaceSet(mesh, np.array(faces, dtype=np.int64).reshape(-1, 3))


def ghost_faces(am, topo):
    """Interior faces with at least one cut neighbor (penalty face set)."""
    base = interior_faces(am)
    if len(base) == 0:
        return base
    loc = topo.location
    cut = (loc[base.faces[:, 0]] == CUT) | (loc[base.faces[:, 1]] == CUT)
    return FaceSet(am.parent, base.faces[cut])
