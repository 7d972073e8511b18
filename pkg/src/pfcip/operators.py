"""Per-mesh bundle of assembled constant operators shared by the time
stepper and the diagnostics."""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import forms
from .fespace import FeSpace, build_space
from .mesh import TriMesh


def sym_factor(A) -> spla.SuperLU:
    """Sparse LU tuned for symmetric (possibly indefinite) matrices:
    MMD ordering on A + A^T with relaxed diagonal pivoting, several times
    faster than the default ordering on these meshes."""
    return spla.splu(A.tocsc(), permc_spec="MMD_AT_PLUS_A",
                     options=dict(SymmetricMode=True, DiagPivotThresh=1e-3))


@dataclass
class Operators:
    """Constant matrices for one mesh: the penalty form A and norm Gram N
    on the P2 space, masses and stiffnesses of both spaces, and the mixed
    P2 x P1 mass coupling them."""

    mesh: TriMesh
    Z: FeSpace          # P2, phase field
    V: FeSpace          # P1, chemical potential
    alpha: float
    A: sp.csr_matrix    # interior penalty form on Z
    N: sp.csr_matrix    # mesh-dependent norm Gram on Z
    M_Z: sp.csr_matrix
    K_Z: sp.csr_matrix
    M_V: sp.csr_matrix
    K_V: sp.csr_matrix
    M_ZV: sp.csr_matrix  # (mu, psi): rows Z, cols V
    ctx: forms.CellContext
    cell_degree: int
    edge_degree: int
    _tz_factor: object = field(default=None, repr=False)
    _tv_factor: object = field(default=None, repr=False)

    @property
    def area(self) -> float:
        return float(self.mesh.signed_areas().sum())

    @property
    def mass_vec_Z(self) -> np.ndarray:
        return np.asarray(self.M_Z @ np.ones(self.Z.n_dofs))

    @property
    def mass_vec_V(self) -> np.ndarray:
        return np.asarray(self.M_V @ np.ones(self.V.n_dofs))

    def mean(self, phi: np.ndarray) -> float:
        return float(self.mass_vec_Z @ phi) / self.area

    def bordered_solve_Z(self, rhs: np.ndarray) -> np.ndarray:
        """Solve K_Z u = rhs on the zero-mean subspace of Z via a single
        Lagrange multiplier row/column; returns the zero-mean solution."""
        if self._tz_factor is None:
            m = self.mass_vec_Z
            B = sp.bmat([[self.K_Z, m[:, None]], [m[None, :], None]],
                        format="csc")
            self._tz_factor = sym_factor(B)
        sol = self._tz_factor.solve(np.append(rhs, 0.0))
        return sol[:-1]

    def bordered_solve_V(self, rhs: np.ndarray) -> np.ndarray:
        """Same mean-constrained solve with the P1 stiffness."""
        if self._tv_factor is None:
            m = self.mass_vec_V
            B = sp.bmat([[self.K_V, m[:, None]], [m[None, :], None]],
                        format="csc")
            self._tv_factor = sym_factor(B)
        sol = self._tv_factor.solve(np.append(rhs, 0.0))
        return sol[:-1]


def build_operators(mesh: TriMesh, alpha: float,
                    cell_degree: int = forms.DEFAULT_CELL_DEGREE,
                    edge_degree: int = forms.DEFAULT_EDGE_DEGREE) -> Operators:
    Z = build_space(mesh, 2)
    V = build_space(mesh, 1)
    ctx = forms.CellContext(Z, cell_degree)
    H = forms.assemble_hessian_matrix(Z)
    C, P = forms.assemble_edge_operators(Z, edge_degree)
    if alpha < 1:
        raise forms.FormError(f"penalty parameter alpha must be >= 1, got {alpha}")
    A = (H + C + C.T + alpha * P).tocsr()
    N = (H + alpha * P).tocsr()
    return Operators(
        mesh=mesh, Z=Z, V=V, alpha=alpha, A=A, N=N,
        M_Z=forms.assemble_mass(Z, quad_degree=cell_degree),
        K_Z=forms.assemble_stiffness(Z),
        M_V=forms.assemble_mass(V, quad_degree=cell_degree),
        K_V=forms.assemble_stiffness(V),
        M_ZV=forms.assemble_mass(Z, V, quad_degree=cell_degree),
        ctx=ctx, cell_degree=cell_degree, edge_degree=edge_degree)
