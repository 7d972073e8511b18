"""P1/P2 Lagrange spaces, reference bases with second derivatives,
and quadrature rules for cells and edges."""

from dataclasses import dataclass

import numpy as np

from .mesh import TriMesh

MAX_CELL_DEGREE = 12
MAX_EDGE_DEGREE = 20


class FeError(Exception):
    pass


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray   # (nq, 2) reference triangle coords, or (nq,) on [0,1]
    weights: np.ndarray  # (nq,)


def cell_quadrature(min_degree: int) -> QuadRule:
    """Rule exact for bivariate polynomials of total degree <= min_degree
    on the reference triangle {x, y >= 0, x + y <= 1}.

    Built as a collapsed (Duffy) tensor Gauss rule: with the substitution
    (x, y) = (u, v (1 - u)) the integrand gains a factor (1 - u), so a
    degree-d polynomial needs Gauss orders covering degree d+1 in u and
    degree d in v. Weights are positive by construction and sum to 1/2.
    """
    if not 1 <= min_degree <= MAX_CELL_DEGREE:
        raise FeError(f"unsupported cell quadrature degree {min_degree}")
    nu = (min_degree + 3) // 2
    nv = (min_degree + 2) // 2
    xu, wu = np.polynomial.legendre.leggauss(nu)
    xv, wv = np.polynomial.legendre.leggauss(nv)
    # map from [-1,1] to [0,1]
    xu = 0.5 * (xu + 1.0)
    wu = 0.5 * wu
    xv = 0.5 * (xv + 1.0)
    wv = 0.5 * wv
    U, V = np.meshgrid(xu, xv)
    WU, WV = np.meshgrid(wu, wv)
    x = U.ravel()
    y = (V * (1.0 - U)).ravel()
    w = (WU * WV * (1.0 - U)).ravel()
    return QuadRule(points=np.column_stack([x, y]), weights=w)


def edge_quadrature(min_degree: int) -> QuadRule:
    """Gauss-Legendre rule on [0,1] exact for degree <= min_degree."""
    if not 1 <= min_degree <= MAX_EDGE_DEGREE:
        raise FeError(f"unsupported edge quadrature degree {min_degree}")
    n = (min_degree + 2) // 2
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadRule(points=0.5 * (x + 1.0), weights=0.5 * w)


def ref_basis_p1(points: np.ndarray):
    """Barycentric P1 basis. Returns (values (n,3), grads (n,3,2),
    hessians (n,3,2,2))."""
    pts = np.atleast_2d(points)
    n = len(pts)
    x, y = pts[:, 0], pts[:, 1]
    vals = np.column_stack([1.0 - x - y, x, y])
    grads = np.broadcast_to(
        np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]), (n, 3, 2)).copy()
    hess = np.zeros((n, 3, 2, 2))
    return vals, grads, hess


def ref_basis_p2(points: np.ndarray):
    """Standard 6-node quadratic Lagrange basis on the reference triangle.

    Node order: vertices (0,0), (1,0), (0,1), then midpoints of edges
    (v0,v1), (v1,v2), (v2,v0). Returns (values (n,6), grads (n,6,2),
    hessians (n,6,2,2)); Hessians are constant in the point.
    """
    pts = np.atleast_2d(points)
    n = len(pts)
    x, y = pts[:, 0], pts[:, 1]
    l0 = 1.0 - x - y
    l1 = x
    l2 = y
    vals = np.column_stack([
        l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
        4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0])

    grads = np.empty((n, 6, 2))
    g0 = np.array([-1.0, -1.0])
    g1 = np.array([1.0, 0.0])
    g2 = np.array([0.0, 1.0])
    grads[:, 0] = (4 * l0 - 1)[:, None] * g0
    grads[:, 1] = (4 * l1 - 1)[:, None] * g1
    grads[:, 2] = (4 * l2 - 1)[:, None] * g2
    grads[:, 3] = 4 * (l1[:, None] * g0 + l0[:, None] * g1)
    grads[:, 4] = 4 * (l2[:, None] * g1 + l1[:, None] * g2)
    grads[:, 5] = 4 * (l0[:, None] * g2 + l2[:, None] * g0)

    def outer_sym(a, b):
        return np.outer(a, b) + np.outer(b, a)

    hess_const = np.empty((6, 2, 2))
    hess_const[0] = 2 * np.outer(g0, g0) * 2
    hess_const[1] = 2 * np.outer(g1, g1) * 2
    hess_const[2] = 2 * np.outer(g2, g2) * 2
    hess_const[3] = 4 * outer_sym(g0, g1)
    hess_const[4] = 4 * outer_sym(g1, g2)
    hess_const[5] = 4 * outer_sym(g2, g0)
    hess = np.broadcast_to(hess_const, (n, 6, 2, 2)).copy()
    return vals, grads, hess


def ref_basis(degree: int, points: np.ndarray):
    if degree == 1:
        return ref_basis_p1(points)
    if degree == 2:
        return ref_basis_p2(points)
    raise FeError(f"unsupported degree {degree}")


@dataclass(frozen=True)
class FeSpace:
    """Lagrange space of degree 1 or 2 on a TriMesh."""

    mesh: TriMesh
    degree: int
    dof_coords: np.ndarray
    cell_dofs: np.ndarray

    @property
    def n_dofs(self) -> int:
        return len(self.dof_coords)

    @property
    def n_local(self) -> int:
        return self.cell_dofs.shape[1]


def build_space(mesh: TriMesh, degree: int) -> FeSpace:
    """P1: vertex dofs. P2: vertex dofs then edge-midpoint dofs ordered
    by mesh edge id (deterministic)."""
    if degree == 1:
        return FeSpace(mesh=mesh, degree=1, dof_coords=mesh.vertices.copy(),
                       cell_dofs=mesh.cells.copy())
    if degree == 2:
        nv = mesh.n_vertices
        dof_coords = np.vstack([mesh.vertices, mesh.edge_midpoints()])
        cell_dofs = np.hstack([mesh.cells, nv + mesh.cell_edges])
        return FeSpace(mesh=mesh, degree=2, dof_coords=dof_coords,
                       cell_dofs=cell_dofs)
    raise FeError(f"unsupported degree {degree}")


@dataclass(frozen=True)
class BasisEval:
    """Tabulated basis data at quadrature points of one cell: values
    (nq, nb), physical gradients (nq, nb, 2), physical Hessians
    (nq, nb, 2, 2), physical weights (nq,)."""

    values: np.ndarray
    grads: np.ndarray
    hessians: np.ndarray
    weights: np.ndarray


def cell_jacobians(mesh: TriMesh):
    """Affine map data for all cells: (J, detJ, Jinv)."""
    p = mesh.vertices[mesh.cells]
    J = np.empty((mesh.n_cells, 2, 2))
    J[:, :, 0] = p[:, 1] - p[:, 0]
    J[:, :, 1] = p[:, 2] - p[:, 0]
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    if np.any(det <= 0):
        raise FeError("degenerate or negatively oriented cell")
    Jinv = np.empty_like(J)
    Jinv[:, 0, 0] = J[:, 1, 1] / det
    Jinv[:, 0, 1] = -J[:, 0, 1] / det
    Jinv[:, 1, 0] = -J[:, 1, 0] / det
    Jinv[:, 1, 1] = J[:, 0, 0] / det
    return J, det, Jinv


def push_forward(grads_ref, hess_ref, Jinv):
    """Physical derivatives through an affine map. grads_ref (..., 2),
    hess_ref (..., 2, 2), Jinv (2, 2) or batched (n, 2, 2) with matching
    leading axis."""
    if Jinv.ndim == 2:
        grads = grads_ref @ Jinv
        hess = np.einsum("ji,...jk,kl->...il", Jinv, hess_ref, Jinv)
    else:
        grads = np.einsum("c...j,cji->c...i", grads_ref, Jinv)
        hess = np.einsum("cji,c...jk,ckl->c...il", Jinv, hess_ref, Jinv)
    return grads, hess


def tabulate(space: FeSpace, cell: int, rule: QuadRule) -> BasisEval:
    """Basis values/gradients/Hessians at the physical quadrature points
    of one cell, plus Jacobian-scaled weights."""
    J, det, Jinv = cell_jacobians(space.mesh)
    vals, gr, hr = ref_basis(space.degree, rule.points)
    grads, hess = push_forward(gr, hr, Jinv[cell])
    return BasisEval(values=vals, grads=grads, hessians=hess,
                     weights=rule.weights * det[cell])


def evaluate_field(space: FeSpace, coeffs: np.ndarray, points: np.ndarray,
                   derivative: int = 0) -> np.ndarray:
    """Evaluate a coefficient vector at physical points.

    derivative=0 gives values (n,), 1 gives gradients (n, 2),
    2 gives Hessians (n, 2, 2).
    """
    if len(coeffs) != space.n_dofs:
        raise FeError("coefficient vector does not match space")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    mesh = space.mesh
    cells = mesh.locate_cell(pts)
    J, det, Jinv = cell_jacobians(mesh)
    x0 = mesh.vertices[mesh.cells[cells, 0]]
    ref = np.einsum("nij,nj->ni", Jinv[cells], pts - x0)
    vals, gr, hr = ref_basis(space.degree, ref)
    local = coeffs[space.cell_dofs[cells]]  # (n, nb)
    if derivative == 0:
        out = np.einsum("nb,nb->n", vals, local)
    elif derivative == 1:
        grads = np.einsum("nbj,nji->nbi", gr, Jinv[cells])
        out = np.einsum("nbi,nb->ni", grads, local)
    elif derivative == 2:
        hess = np.einsum("nji,nbjk,nkl->nbil", Jinv[cells], hr, Jinv[cells])
        out = np.einsum("nbil,nb->nil", hess, local)
    else:
        raise FeError(f"unsupported derivative order {derivative}")
    return out if np.ndim(points) > 1 else out[0]
