"""Matrix and vector assembly: mass, stiffness, the C0 interior penalty
bilinear form with its consistency and penalty edge terms, the cubic
nonlinearity, and the action of the penalty form on smooth closures.

Edge convention (matching the mesh): on an interior edge the normal n_e
points from K- into K+, the jump of the normal derivative of v is
n_e . (grad v|K+ - grad v|K-) and the average of the second normal
derivative is the arithmetic mean of n_e^T (hess v) n_e from both sides.
On a boundary edge n_e is the outward normal, the jump is -n_e . grad v
and the average is the one-sided n_e^T (hess v) n_e.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fespace import (FeSpace, QuadRule, cell_jacobians, cell_quadrature,
                      edge_quadrature, push_forward, ref_basis)
from .mesh import BOUNDARY, TriMesh

DEFAULT_CELL_DEGREE = 6
DEFAULT_EDGE_DEGREE = 5


class FormError(Exception):
    pass


def _check_same_mesh(a: FeSpace, b: FeSpace):
    if a.mesh is not b.mesh:
        raise FormError("spaces must be built on the same mesh")


def _scatter(rows_dofs, cols_dofs, blocks, shape) -> sp.csr_matrix:
    """Accumulate per-entity local blocks (n, ri, ci) into a CSR matrix."""
    ri = rows_dofs.shape[1]
    ci = cols_dofs.shape[1]
    rows = np.repeat(rows_dofs, ci, axis=1).ravel()
    cols = np.tile(cols_dofs, ri).ravel()
    data = blocks.ravel()
    return sp.coo_matrix((data, (rows, cols)), shape=shape).tocsr()


class CellContext:
    """Cached cell tabulation shared by all cell-based assembly.

    Holds physical quadrature weights (nc, nq), basis values (nq, nb),
    physical gradients (nc, nq, nb, 2) and Hessians (nc, nq, nb, 2, 2).
    """

    def __init__(self, space: FeSpace, degree: int = DEFAULT_CELL_DEGREE):
        self.space = space
        self.rule = cell_quadrature(degree)
        J, det, Jinv = cell_jacobians(space.mesh)
        self.det = det
        self.Jinv = Jinv
        self.weights = np.outer(det, self.rule.weights)  # (nc, nq)
        vals, gr, hr = ref_basis(space.degree, self.rule.points)
        self.values = vals  # (nq, nb)
        gr_b = np.broadcast_to(gr, (space.mesh.n_cells,) + gr.shape)
        hr_b = np.broadcast_to(hr, (space.mesh.n_cells,) + hr.shape)
        self.grads, self.hessians = push_forward(gr_b, hr_b, Jinv)
        # physical quadrature points, used by load vectors
        x0 = space.mesh.vertices[space.mesh.cells[:, 0]]
        self.points = x0[:, None, :] + np.einsum(
            "cij,qj->cqi", J, self.rule.points)

    def field_values(self, coeffs: np.ndarray) -> np.ndarray:
        """Field values at all quadrature points, shape (nc, nq)."""
        local = coeffs[self.space.cell_dofs]  # (nc, nb)
        return np.einsum("qb,cb->cq", self.values, local)

    def integrate(self, pointwise: np.ndarray) -> float:
        """Integrate an (nc, nq) array of point values over the domain."""
        return float(np.einsum("cq,cq->", self.weights, pointwise))


def assemble_mass(rows: FeSpace, cols: FeSpace | None = None,
                  quad_degree: int = DEFAULT_CELL_DEGREE) -> sp.csr_matrix:
    """M[i,j] = integral of chi_i^rows * chi_j^cols."""
    cols = cols if cols is not None else rows
    _check_same_mesh(rows, cols)
    rule = cell_quadrature(quad_degree)
    _, det, _ = cell_jacobians(rows.mesh)
    vr, _, _ = ref_basis(rows.degree, rule.points)
    vc, _, _ = ref_basis(cols.degree, rule.points)
    ref_block = np.einsum("q,qi,qj->ij", rule.weights, vr, vc)
    blocks = det[:, None, None] * ref_block
    return _scatter(rows.cell_dofs, cols.cell_dofs, blocks,
                    (rows.n_dofs, cols.n_dofs))


def assemble_stiffness(space: FeSpace) -> sp.csr_matrix:
    """K[i,j] = integral of grad chi_i . grad chi_j."""
    degree = max(1, 2 * (space.degree - 1))
    ctx = CellContext(space, degree)
    blocks = np.einsum("cq,cqid,cqjd->cij", ctx.weights, ctx.grads, ctx.grads)
    return _scatter(space.cell_dofs, space.cell_dofs, blocks,
                    (space.n_dofs, space.n_dofs))


def assemble_hessian_matrix(space: FeSpace) -> sp.csr_matrix:
    """Broken Hessian Gram matrix: integral of hess chi_i : hess chi_j
    summed over cells (the cell part of both the penalty form and the
    mesh-dependent norm)."""
    ctx = CellContext(space, 2)
    blocks = np.einsum("cq,cqikl,cqjkl->cij", ctx.weights, ctx.hessians,
                       ctx.hessians)
    return _scatter(space.cell_dofs, space.cell_dofs, blocks,
                    (space.n_dofs, space.n_dofs))


@dataclass(frozen=True)
class EdgeTrace:
    """Traces at the quadrature points of one edge.

    jump : (nq, nb_total) jump of the normal derivative of each local
        basis function (first 6 columns: K- side, next 6: K+ side for
        interior edges; 6 columns for boundary edges)
    avg : (nq, nb_total) average of the second normal derivative
    dofs : (nb_total,) global dof indices
    weights : (nq,) physical quadrature weights
    length : edge length
    """

    jump: np.ndarray
    avg: np.ndarray
    dofs: np.ndarray
    weights: np.ndarray
    length: float


class EdgeContext:
    """Vectorized traces for a batch of edges of the same kind."""

    def __init__(self, space: FeSpace, edge_ids: np.ndarray,
                 rule: QuadRule, Jinv: np.ndarray):
        mesh = space.mesh
        self.edge_ids = edge_ids
        self.interior = bool(len(edge_ids)) and \
            mesh.edge_cells[edge_ids[0], 1] != BOUNDARY
        p0 = mesh.vertices[mesh.edge_vertices[edge_ids, 0]]
        p1 = mesh.vertices[mesh.edge_vertices[edge_ids, 1]]
        t = np.asarray(rule.points)
        self.x = p0[:, None, :] + t[None, :, None] * (p1 - p0)[:, None, :]
        self.lengths = mesh.edge_lengths[edge_ids]
        self.normals = mesh.edge_normals[edge_ids]
        self.weights = rule.weights[None, :] * self.lengths[:, None]

        sides = [(mesh.edge_cells[edge_ids, 0], -1.0)]
        if self.interior:
            sides.append((mesh.edge_cells[edge_ids, 1], +1.0))
        jumps, avgs, dofs = [], [], []
        n = self.normals
        for cells_s, sign in sides:
            x0 = mesh.vertices[mesh.cells[cells_s, 0]]
            ref = np.einsum("eij,eqj->eqi", Jinv[cells_s],
                            self.x - x0[:, None, :])
            shp = ref.shape[:2]
            vals, gr, hr = ref_basis(space.degree, ref.reshape(-1, 2))
            nb = vals.shape[1]
            gr = gr.reshape(shp + (nb, 2))
            hr = hr.reshape(shp + (nb, 2, 2))
            grads = np.einsum("eqbj,eji->eqbi", gr, Jinv[cells_s])
            hess = np.einsum("eji,eqbjk,ekl->eqbil", Jinv[cells_s], hr,
                             Jinv[cells_s])
            ndg = np.einsum("eqbi,ei->eqb", grads, n)
            nhn = np.einsum("ei,eqbij,ej->eqb", n, hess, n)
            if self.interior:
                jumps.append(sign * ndg)
                avgs.append(0.5 * nhn)
            else:
                jumps.append(-ndg)
                avgs.append(nhn)
            dofs.append(space.cell_dofs[cells_s])
        self.jump = np.concatenate(jumps, axis=2)   # (ne, nq, nbt)
        self.avg = np.concatenate(avgs, axis=2)
        self.dofs = np.concatenate(dofs, axis=1)    # (ne, nbt)


def _edge_contexts(space: FeSpace, edge_degree: int):
    mesh = space.mesh
    rule = edge_quadrature(edge_degree)
    _, _, Jinv = cell_jacobians(mesh)
    out = []
    for ids in (mesh.interior_edges, mesh.boundary_edges):
        if len(ids):
            out.append(EdgeContext(space, ids, rule, Jinv))
    return out


def edge_traces(space: FeSpace, edge: int, rule: QuadRule) -> EdgeTrace:
    """Normal-derivative jump and second-normal-derivative average of all
    local basis functions on one edge."""
    _, _, Jinv = cell_jacobians(space.mesh)
    ctx = EdgeContext(space, np.array([edge]), rule, Jinv)
    return EdgeTrace(jump=ctx.jump[0], avg=ctx.avg[0], dofs=ctx.dofs[0],
                     weights=ctx.weights[0], length=float(ctx.lengths[0]))


def assemble_edge_operators(space: FeSpace,
                            edge_degree: int = DEFAULT_EDGE_DEGREE):
    """Edge parts of the penalty form over all edges (boundary included):

    C[i,j] = sum_e int_e avg(d2 chi_i / dn2) jump(d chi_j / dn)
    P[i,j] = sum_e (1/|e|) int_e jump(d chi_i / dn) jump(d chi_j / dn)
    """
    n = space.n_dofs
    C = sp.csr_matrix((n, n))
    P = sp.csr_matrix((n, n))
    for ctx in _edge_contexts(space, edge_degree):
        cb = np.einsum("eq,eqi,eqj->eij", ctx.weights, ctx.avg, ctx.jump)
        pb = np.einsum("eq,eqi,eqj->eij",
                       ctx.weights / ctx.lengths[:, None],
                       ctx.jump, ctx.jump)
        C = C + _scatter(ctx.dofs, ctx.dofs, cb, (n, n))
        P = P + _scatter(ctx.dofs, ctx.dofs, pb, (n, n))
    return C, P


def assemble_aip(space: FeSpace, alpha: float,
                 edge_degree: int = DEFAULT_EDGE_DEGREE) -> sp.csr_matrix:
    """The full interior penalty bilinear form: cellwise Hessian product,
    both consistency edge terms, and the alpha-scaled jump penalty."""
    if alpha < 1:
        raise FormError(f"penalty parameter alpha must be >= 1, got {alpha}")
    if space.degree != 2:
        raise FormError("penalty form requires the P2 space")
    H = assemble_hessian_matrix(space)
    C, P = assemble_edge_operators(space, edge_degree)
    return (H + C + C.T + alpha * P).tocsr()


def assemble_norm_gram(space: FeSpace, alpha: float,
                       edge_degree: int = DEFAULT_EDGE_DEGREE) -> sp.csr_matrix:
    """Gram matrix of the mesh-dependent norm: broken H2 seminorm plus
    the alpha/|e|-scaled jump penalty (no consistency terms)."""
    H = assemble_hessian_matrix(space)
    _, P = assemble_edge_operators(space, edge_degree)
    return (H + alpha * P).tocsr()


def assemble_cubic_residual(ctx: CellContext, phi: np.ndarray) -> np.ndarray:
    """b[i] = integral of phi^3 chi_i, by the context's quadrature."""
    if len(phi) != ctx.space.n_dofs:
        raise FormError("coefficient vector does not match space")
    v3 = ctx.field_values(phi) ** 3  # (nc, nq)
    local = np.einsum("cq,cq,qb->cb", ctx.weights, v3, ctx.values)
    out = np.zeros(ctx.space.n_dofs)
    np.add.at(out, ctx.space.cell_dofs, local)
    return out


def assemble_cubic_jacobian(ctx: CellContext, phi: np.ndarray) -> sp.csr_matrix:
    """W[i,j] = integral of 3 phi^2 chi_i chi_j."""
    if len(phi) != ctx.space.n_dofs:
        raise FormError("coefficient vector does not match space")
    v2 = 3.0 * ctx.field_values(phi) ** 2
    blocks = np.einsum("cq,cq,qi,qj->cij", ctx.weights, v2, ctx.values,
                       ctx.values)
    n = ctx.space.n_dofs
    return _scatter(ctx.space.cell_dofs, ctx.space.cell_dofs, blocks, (n, n))


def assemble_load(ctx: CellContext, f) -> np.ndarray:
    """b[i] = integral of f chi_i for a callable f(points (n,2)) -> (n,)."""
    fv = f(ctx.points.reshape(-1, 2)).reshape(ctx.weights.shape)
    local = np.einsum("cq,cq,qb->cb", ctx.weights, fv, ctx.values)
    out = np.zeros(ctx.space.n_dofs)
    np.add.at(out, ctx.space.cell_dofs, local)
    return out


def aip_action_smooth(space: FeSpace, alpha: float, field,
                      cell_degree: int = DEFAULT_CELL_DEGREE,
                      edge_degree: int = DEFAULT_EDGE_DEGREE) -> np.ndarray:
    """g[j] = a_IP(f, chi_j) for a smooth closure f with value/grad/hess.

    A C1 function has no interior normal-derivative jumps, so only the
    cell Hessian term, the interior-edge consistency term pairing f's
    second normal derivative with the test jump, and the full one-sided
    boundary terms contribute.
    """
    ctx = CellContext(space, cell_degree)
    hf = field.hess(ctx.points.reshape(-1, 2)).reshape(
        ctx.weights.shape + (2, 2))
    local = np.einsum("cq,cqkl,cqbkl->cb", ctx.weights, hf, ctx.hessians)
    out = np.zeros(space.n_dofs)
    np.add.at(out, space.cell_dofs, local)

    for ectx in _edge_contexts(space, edge_degree):
        xs = ectx.x.reshape(-1, 2)
        hfe = field.hess(xs).reshape(ectx.weights.shape + (2, 2))
        n = ectx.normals
        f_d2n = np.einsum("ei,eqij,ej->eq", n, hfe, n)
        # avg(d2 f/dn2) * jump(d chi/dn) on every edge
        loc = np.einsum("eq,eq,eqb->eb", ectx.weights, f_d2n, ectx.jump)
        if not ectx.interior:
            gfe = field.grad(xs).reshape(ectx.weights.shape + (2,))
            f_jump = -np.einsum("eqi,ei->eq", gfe, n)
            loc += np.einsum("eq,eq,eqb->eb", ectx.weights, f_jump, ectx.avg)
            loc += alpha * np.einsum("eq,e,eq,eqb->eb", ectx.weights,
                                     1.0 / ectx.lengths, f_jump, ectx.jump)
        np.add.at(out, ectx.dofs, loc)
    return out


def interpolate(space: FeSpace, f) -> np.ndarray:
    """Nodal (Lagrange) interpolant of f(points (n,2)) -> (n,)."""
    return f(space.dof_coords)
