"""Structured triangulations of rectangles with full edge topology.

Meshes are immutable after construction. Every edge knows its adjacent
cells (K-, K+), its unit normal (pointing from K- into K+ for interior
edges, outward for boundary edges) and its length, which is exactly the
information interior-penalty assembly needs.
"""

from dataclasses import dataclass, field

import numpy as np

BOUNDARY = -1


class MeshError(Exception):
    """Invalid mesh construction request or topology query."""


@dataclass(frozen=True)
class EdgeInfo:
    """Per-edge view assembled from the mesh arrays."""

    endpoints: tuple
    length: float
    normal: np.ndarray
    cell_minus: int
    cell_plus: int  # BOUNDARY for boundary edges

    @property
    def is_boundary(self) -> bool:
        return self.cell_plus == BOUNDARY


@dataclass(frozen=True)
class TriMesh:
    """Conforming triangulation of an axis-aligned rectangle.

    vertices : (nv, 2) coordinates
    cells : (nc, 3) vertex indices, counterclockwise
    edge_vertices : (ne, 2) vertex indices, sorted pairs
    edge_cells : (ne, 2) adjacent cells (cell_plus == BOUNDARY on the boundary)
    edge_normals : (ne, 2) unit normals, K- -> K+ / outward
    edge_lengths : (ne,)
    cell_edges : (nc, 3) edge ids of local edges (v0,v1), (v1,v2), (v2,v0)
    """

    vertices: np.ndarray
    cells: np.ndarray
    edge_vertices: np.ndarray
    edge_cells: np.ndarray
    edge_normals: np.ndarray
    edge_lengths: np.ndarray
    cell_edges: np.ndarray
    h_max: float
    # structured-grid metadata used for O(1) point location
    lx: float = 0.0
    ly: float = 0.0
    nx: int = 0
    ny: int = 0

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return len(self.edge_vertices)

    @property
    def interior_edges(self) -> np.ndarray:
        return np.nonzero(self.edge_cells[:, 1] != BOUNDARY)[0]

    @property
    def boundary_edges(self) -> np.ndarray:
        return np.nonzero(self.edge_cells[:, 1] == BOUNDARY)[0]

    def edge_info(self, e: int) -> EdgeInfo:
        return EdgeInfo(
            endpoints=tuple(self.edge_vertices[e]),
            length=float(self.edge_lengths[e]),
            normal=self.edge_normals[e].copy(),
            cell_minus=int(self.edge_cells[e, 0]),
            cell_plus=int(self.edge_cells[e, 1]),
        )

    def cell_coords(self, c) -> np.ndarray:
        return self.vertices[self.cells[c]]

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.cells]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edge_midpoints(self) -> np.ndarray:
        return 0.5 * (self.vertices[self.edge_vertices[:, 0]]
                      + self.vertices[self.edge_vertices[:, 1]])

    def locate_cell(self, points: np.ndarray) -> np.ndarray:
        """Containing cell for each query point (structured grids only)."""
        if self.nx == 0:
            raise MeshError("point location requires a structured mesh")
        pts = np.atleast_2d(points)
        dx = self.lx / self.nx
        dy = self.ly / self.ny
        i = np.clip(np.floor(pts[:, 0] / dx).astype(int), 0, self.nx - 1)
        j = np.clip(np.floor(pts[:, 1] / dy).astype(int), 0, self.ny - 1)
        # lower triangle of each rectangle lies below the diagonal y/dy = x/dx
        xr = pts[:, 0] / dx - i
        yr = pts[:, 1] / dy - j
        upper = yr > xr + 1e-13
        return 2 * (j * self.nx + i) + upper.astype(int)


def build_rect_mesh(lx: float, ly: float, nx: int, ny: int) -> TriMesh:
    """Uniform nx x ny grid of rectangles on (0,lx) x (0,ly), each split
    along the lower-left to upper-right diagonal into two triangles."""
    if lx <= 0 or ly <= 0:
        raise MeshError(f"domain dimensions must be positive, got ({lx}, {ly})")
    if nx < 1 or ny < 1:
        raise MeshError(f"subdivision counts must be >= 1, got ({nx}, {ny})")

    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny))
    ii = ii.ravel()
    jj = jj.ravel()
    v00 = vid(ii, jj)
    v10 = vid(ii + 1, jj)
    v01 = vid(ii, jj + 1)
    v11 = vid(ii + 1, jj + 1)
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    cells = np.empty((2 * nx * ny, 3), dtype=int)
    cells[0::2] = lower
    cells[1::2] = upper

    return _finish_mesh(vertices, cells, lx=lx, ly=ly, nx=nx, ny=ny)


def _finish_mesh(vertices, cells, lx=0.0, ly=0.0, nx=0, ny=0) -> TriMesh:
    nc = len(cells)
    # unique sorted vertex pairs over all local edges
    local = np.stack([cells[:, [0, 1]], cells[:, [1, 2]], cells[:, [2, 0]]], axis=1)
    pairs = np.sort(local.reshape(-1, 2), axis=1)
    edge_vertices, inverse = np.unique(pairs, axis=0, return_inverse=True)
    ne = len(edge_vertices)
    cell_edges = inverse.reshape(nc, 3)

    edge_cells = np.full((ne, 2), BOUNDARY, dtype=int)
    # cells visit edges in increasing cell index, so the first writer is K-
    for c in range(nc):
        for e in cell_edges[c]:
            if edge_cells[e, 0] == BOUNDARY:
                edge_cells[e, 0] = c
            else:
                edge_cells[e, 1] = c

    p0 = vertices[edge_vertices[:, 0]]
    p1 = vertices[edge_vertices[:, 1]]
    tang = p1 - p0
    edge_lengths = np.linalg.norm(tang, axis=1)
    normals = np.column_stack([tang[:, 1], -tang[:, 0]]) / edge_lengths[:, None]

    centroids = vertices[cells].mean(axis=1)
    midpoints = 0.5 * (p0 + p1)
    interior = edge_cells[:, 1] != BOUNDARY
    # interior: orient from K- into K+; boundary: away from the single cell
    ref = np.where(interior[:, None],
                   centroids[np.where(interior, edge_cells[:, 1], 0)] - centroids[edge_cells[:, 0]],
                   midpoints - centroids[edge_cells[:, 0]])
    flip = np.einsum("ij,ij->i", normals, ref) < 0
    normals[flip] *= -1.0

    p = vertices[cells]
    diam = np.maximum(
        np.linalg.norm(p[:, 1] - p[:, 0], axis=1),
        np.maximum(np.linalg.norm(p[:, 2] - p[:, 1], axis=1),
                   np.linalg.norm(p[:, 0] - p[:, 2], axis=1)))

    return TriMesh(vertices=vertices, cells=cells,
                   edge_vertices=edge_vertices, edge_cells=edge_cells,
                   edge_normals=normals, edge_lengths=edge_lengths,
                   cell_edges=cell_edges, h_max=float(diam.max()),
                   lx=lx, ly=ly, nx=nx, ny=ny)


def flip_edge_orientation(mesh: TriMesh, edge: int) -> TriMesh:
    """Swap K-/K+ of an interior edge and negate its normal.

    The assembled forms must be invariant under this relabeling; the
    operation exists only so tests can assert that.
    """
    if mesh.edge_cells[edge, 1] == BOUNDARY:
        raise MeshError(f"edge {edge} is a boundary edge; orientation is fixed")
    edge_cells = mesh.edge_cells.copy()
    edge_cells[edge] = edge_cells[edge, ::-1]
    normals = mesh.edge_normals.copy()
    normals[edge] *= -1.0
    return TriMesh(vertices=mesh.vertices, cells=mesh.cells,
                   edge_vertices=mesh.edge_vertices, edge_cells=edge_cells,
                   edge_normals=normals, edge_lengths=mesh.edge_lengths,
                   cell_edges=mesh.cell_edges, h_max=mesh.h_max,
                   lx=mesh.lx, ly=mesh.ly, nx=mesh.nx, ny=mesh.ny)
