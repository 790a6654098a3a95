"""Structured simplicial meshes of intervals and squares.

Vertices are kept in lexicographic coordinate order so that every matrix
assembled on a mesh is reproducible run to run. Free vertices (the
degrees of freedom of the P1 space with homogeneous Dirichlet data) are
listed in that induced order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Mesh",
    "build_interval_mesh",
    "build_square_mesh",
    "refine_uniform",
    "shape_regularity",
    "cell_measures",
    "prolongation",
    "dump_mesh",
    "load_mesh",
]


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable simplicial mesh in one or two dimensions.

    Parameters
    ----------
    vertices : ndarray, shape (n_vertices, dim)
    cells : ndarray, shape (n_cells, dim + 1)
        Vertex indices of each simplex, counter-clockwise in 2D.
    box : tuple of float
        ``(lo, hi)`` of the generating interval / square.
    level : int
        Number of uniform refinements applied since construction.
    parent_vertices : ndarray, shape (n_vertices, 2), optional
        For a refined mesh, the pair of parent vertex indices whose
        midpoint is each vertex (a repeated index marks an inherited
        vertex). ``None`` on a freshly built mesh.
    """

    vertices: np.ndarray
    cells: np.ndarray
    box: tuple[float, float]
    level: int = 0
    parent_vertices: np.ndarray | None = None
    parent: Mesh | None = field(default=None, repr=False)

    def __post_init__(self):
        self.vertices.setflags(write=False)
        self.cells.setflags(write=False)
        measures = cell_measures(self)
        if np.any(measures <= 0.0):
            raise ValueError("mesh contains degenerate or inverted cells")
        lo, hi = self.box
        scale = hi - lo
        on_bdry = np.any(
            (np.abs(self.vertices - lo) <= 1e-12 * scale)
            | (np.abs(self.vertices - hi) <= 1e-12 * scale),
            axis=1,
        )
        object.__setattr__(self, "_boundary_mask", on_bdry)
        object.__setattr__(self, "_measures", measures)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def boundary_vertices(self) -> frozenset[int]:
        return frozenset(np.flatnonzero(self._boundary_mask).tolist())

    @property
    def boundary_mask(self) -> np.ndarray:
        return self._boundary_mask

    @property
    def free_vertices(self) -> np.ndarray:
        return np.flatnonzero(~self._boundary_mask)

    @property
    def n_free(self) -> int:
        return int(np.count_nonzero(~self._boundary_mask))

    @property
    def measures(self) -> np.ndarray:
        return self._measures

    @property
    def h_max(self) -> float:
        return float(np.max(cell_diameters(self)))

    @property
    def gamma(self) -> float:
        return shape_regularity(self)

    def __repr__(self):
        return (f"Mesh(dim={self.dim}, n_vertices={self.n_vertices}, "
                f"n_cells={self.n_cells}, h_max={self.h_max:.6g})")


def _sorted_mesh(vertices, cells, box, level=0, parent_vertices=None,
                 parent=None):
    # lexicographic in (x1, x2): last key of lexsort is the primary one
    order = np.lexsort(vertices.T[::-1])
    inverse = np.empty_like(order)
    inverse[order] = np.arange(order.size)
    vertices = vertices[order]
    cells = inverse[cells]
    if parent_vertices is not None:
        parent_vertices = parent_vertices[order]
    return Mesh(np.ascontiguousarray(vertices), np.ascontiguousarray(cells),
                box, level, parent_vertices, parent)


def build_interval_mesh(n_cells: int, a: float = 0.0, b: float = 1.0) -> Mesh:
    """Uniform partition of ``[a, b]`` into ``n_cells`` segments."""
    if int(n_cells) != n_cells or n_cells < 2:
        raise ValueError(
            f"need at least 2 cells for an interior degree of freedom, got {n_cells}")
    if not a < b:
        raise ValueError(f"empty interval [{a}, {b}]")
    n_cells = int(n_cells)
    x = np.linspace(a, b, n_cells + 1)
    cells = np.column_stack([np.arange(n_cells), np.arange(1, n_cells + 1)])
    return _sorted_mesh(x[:, None], cells, (float(a), float(b)))


def build_square_mesh(n_per_side: int, x0: float = 0.0, x1: float = 1.0,
                      quadrant_aligned: bool = False) -> Mesh:
    """Structured triangulation of ``[x0, x1]^2``.

    Each of the ``n_per_side**2`` squares is cut along its
    lower-left/upper-right diagonal. With an even ``n_per_side`` the
    midlines of the square are mesh edges; pass ``quadrant_aligned=True``
    to make that a hard requirement.
    """
    if int(n_per_side) != n_per_side or n_per_side < 2:
        raise ValueError(f"n_per_side must be an integer >= 2, got {n_per_side}")
    if not x0 < x1:
        raise ValueError(f"empty square [{x0}, {x1}]^2")
    n = int(n_per_side)
    if quadrant_aligned and n % 2:
        raise ValueError(
            f"quadrant-aligned meshes need an even n_per_side, got {n}")
    s = np.linspace(x0, x1, n + 1)
    X, Y = np.meshgrid(s, s, indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    v00 = idx[:-1, :-1].ravel()
    v10 = idx[1:, :-1].ravel()
    v01 = idx[:-1, 1:].ravel()
    v11 = idx[1:, 1:].ravel()
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    cells = np.vstack([lower, upper])
    return _sorted_mesh(vertices, cells, (float(x0), float(x1)))


def refine_uniform(m: Mesh) -> Mesh:
    """Bisect every segment (1D) or red-refine every triangle (2D)."""
    if m.dim == 1:
        c = m.cells
        nv = m.n_vertices
        mids = 0.5 * (m.vertices[c[:, 0]] + m.vertices[c[:, 1]])
        mid_idx = nv + np.arange(m.n_cells)
        vertices = np.vstack([m.vertices, mids])
        cells = np.vstack([np.column_stack([c[:, 0], mid_idx]),
                           np.column_stack([mid_idx, c[:, 1]])])
        parents = np.vstack([np.column_stack([np.arange(nv)] * 2), c])
    else:
        c = m.cells
        edges = np.vstack([c[:, [0, 1]], c[:, [1, 2]], c[:, [2, 0]]])
        edges.sort(axis=1)
        unique, inv = np.unique(edges, axis=0, return_inverse=True)
        inv = inv.ravel()
        nv = m.n_vertices
        mids = 0.5 * (m.vertices[unique[:, 0]] + m.vertices[unique[:, 1]])
        vertices = np.vstack([m.vertices, mids])
        nc = m.n_cells
        e01 = nv + inv[:nc]
        e12 = nv + inv[nc:2 * nc]
        e20 = nv + inv[2 * nc:]
        cells = np.vstack([
            np.column_stack([c[:, 0], e01, e20]),
            np.column_stack([e01, c[:, 1], e12]),
            np.column_stack([e20, e12, c[:, 2]]),
            np.column_stack([e01, e12, e20]),
        ])
        parents = np.vstack([np.column_stack([np.arange(nv)] * 2), unique])
    return _sorted_mesh(vertices, cells, m.box, m.level + 1, parents, m)


def cell_measures(m: Mesh) -> np.ndarray:
    """Length (1D) or area (2D) of every cell; signed in 2D."""
    v = m.vertices[m.cells]
    if v.shape[2] == 1:
        return v[:, 1, 0] - v[:, 0, 0]
    d1 = v[:, 1] - v[:, 0]
    d2 = v[:, 2] - v[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _edge_lengths(m: Mesh) -> np.ndarray:
    v = m.vertices[m.cells]
    return np.stack([np.linalg.norm(v[:, 1] - v[:, 0], axis=1),
                     np.linalg.norm(v[:, 2] - v[:, 1], axis=1),
                     np.linalg.norm(v[:, 0] - v[:, 2], axis=1)], axis=1)


def cell_diameters(m: Mesh) -> np.ndarray:
    if m.dim == 1:
        return np.abs(cell_measures(m))
    return _edge_lengths(m).max(axis=1)


def shape_regularity(m: Mesh) -> float:
    """Smallest ratio of inscribed radius to diameter over all cells.

    A segment's inscribed radius is taken as half its length, which
    pins the 1D value at 1/2.
    """
    if m.dim == 1:
        return 0.5
    lengths = _edge_lengths(m)
    inradius = 2.0 * np.abs(m.measures) / lengths.sum(axis=1)
    return float(np.min(inradius / lengths.max(axis=1)))


def prolongation(coarse: Mesh, fine: Mesh):
    """Sparse matrix interpolating P1 functions from ``coarse`` to ``fine``.

    ``fine`` must descend from ``coarse`` through ``refine_uniform``.
    Acts on full vertex vectors, shape ``(fine.n_vertices, coarse.n_vertices)``.
    """
    import scipy.sparse as sp

    chain = []
    m = fine
    while m is not coarse:
        if m.parent is None:
            raise ValueError("fine mesh does not descend from coarse mesh")
        chain.append(m)
        m = m.parent
    P = sp.identity(coarse.n_vertices, format="csr")
    for child in reversed(chain):
        pv = child.parent_vertices
        rows = np.repeat(np.arange(child.n_vertices), 2)
        step = sp.csr_matrix((np.full(rows.size, 0.5), (rows, pv.ravel())),
                             shape=(child.n_vertices, child.parent.n_vertices))
        P = step @ P
    return P.tocsr()


def dump_mesh(m: Mesh, path) -> None:
    """Write ``m`` in the plain-text format read by :func:`load_mesh`."""
    Path(path).write_text(format_mesh(m))


def format_mesh(m: Mesh) -> str:
    lines = [f"{m.dim} {m.n_vertices} {m.n_cells}"]
    lines += [" ".join(f"{x:.17g}" for x in v) for v in m.vertices]
    lines += [" ".join(str(int(i)) for i in c) for c in m.cells]
    return "\n".join(lines) + "\n"


def parse_mesh(lines, box=None) -> Mesh:
    dim, nv, nc = (int(tok) for tok in lines[0].split())
    vertices = np.array([[float(tok) for tok in ln.split()]
                         for ln in lines[1:1 + nv]]).reshape(nv, dim)
    cells = np.array([[int(tok) for tok in ln.split()]
                      for ln in lines[1 + nv:1 + nv + nc]], dtype=np.int64)
    if box is None:
        box = (float(vertices.min()), float(vertices.max()))
    return Mesh(vertices, cells.reshape(nc, dim + 1), box)


def load_mesh(path, box=None) -> Mesh:
    """Read a mesh written by :func:`dump_mesh`.

    The bounding box defaults to the vertex extent, which recovers the
    boundary of intervals and squares.
    """
    return parse_mesh(Path(path).read_text().splitlines(), box)
