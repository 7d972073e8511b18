"""Analytic diagnostics: the discrete energy and its decomposition, the
mesh-dependent norm, the per-step energy-law identity residual, the
discrete inverse Laplacian and its induced negative norm, the convex
solvability functional used as an independent test oracle, and error
norms against nested reference solutions."""

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from . import forms
from .fespace import FeSpace, evaluate_field
from .operators import Operators


class DiagnosticsError(Exception):
    pass


@dataclass(frozen=True)
class EnergyRecord:
    step: int
    time: float
    F_total: float
    term_quartic: float
    term_quadratic: float
    term_gradient: float
    term_aip_half: float
    mass: float


def energy_F(phi: np.ndarray, ops: Operators, eps: float,
             step: int = 0, time: float = 0.0) -> EnergyRecord:
    """Discrete energy: quartic + (1-eps)/2 L2 - grad^2 + half penalty form.

    The quartic term uses the same cell quadrature as the scheme's cubic
    term so the discrete energy law holds at solver precision.
    """
    if len(phi) != ops.Z.n_dofs:
        raise DiagnosticsError("coefficient vector does not match space")
    vals = ops.ctx.field_values(phi)
    quartic = 0.25 * ops.ctx.integrate(vals ** 4)
    quadratic = 0.5 * (1.0 - eps) * float(phi @ (ops.M_Z @ phi))
    gradient = -float(phi @ (ops.K_Z @ phi))
    aip_half = 0.5 * float(phi @ (ops.A @ phi))
    return EnergyRecord(step=step, time=time,
                        F_total=quartic + quadratic + gradient + aip_half,
                        term_quartic=quartic, term_quadratic=quadratic,
                        term_gradient=gradient, term_aip_half=aip_half,
                        mass=float(ops.mass_vec_Z @ phi))


def norm_2h(phi: np.ndarray, ops: Operators) -> float:
    """Mesh-dependent norm: broken H2 seminorm plus alpha/|e|-scaled
    normal-derivative jump penalties (boundary edges included)."""
    return float(np.sqrt(max(phi @ (ops.N @ phi), 0.0)))


def energy_law_residual(phi_old: np.ndarray, phi_new: np.ndarray,
                        mu_new: np.ndarray, tau: float, ops: Operators,
                        eps: float) -> float:
    """Absolute residual of the untelescoped per-step energy identity:

    (F(phi^m) - F(phi^{m-1}))/tau + |grad mu|^2
      + tau [ (1-eps)/2 |dphi|^2 + |grad dphi|^2 + 1/4 |d(phi^2)|^2
              + 1/2 |phi^m dphi|^2 + 1/2 a(dphi, dphi) ] = 0,

    with dphi = (phi^m - phi^{m-1})/tau and d(phi^2) the same difference
    quotient of the squared field. All terms are evaluated independently
    of the nonlinear solver.
    """
    dphi = (phi_new - phi_old) / tau
    F_new = energy_F(phi_new, ops, eps).F_total
    F_old = energy_F(phi_old, ops, eps).F_total
    grad_mu_sq = float(mu_new @ (ops.K_V @ mu_new))

    vm = ops.ctx.field_values(phi_new)
    vo = ops.ctx.field_values(phi_old)
    dsq = (vm ** 2 - vo ** 2) / tau
    pd = vm * (vm - vo) / tau
    terms = (0.5 * (1.0 - eps) * float(dphi @ (ops.M_Z @ dphi))
             + float(dphi @ (ops.K_Z @ dphi))
             + 0.25 * ops.ctx.integrate(dsq ** 2)
             + 0.5 * ops.ctx.integrate(pd ** 2)
             + 0.5 * float(dphi @ (ops.A @ dphi)))
    return abs((F_new - F_old) / tau + grad_mu_sq + tau * terms)


def inverse_laplacian_h(ops: Operators, zeta: np.ndarray) -> np.ndarray:
    """Discrete inverse Laplacian on the zero-mean P2 subspace:
    (grad T_h zeta, grad chi) = (zeta, chi) for all zero-mean chi."""
    norm = np.linalg.norm(zeta)
    if abs(ops.mass_vec_Z @ zeta) > 1e-10 * max(norm, 1.0):
        raise DiagnosticsError("inverse Laplacian requires zero-mean input")
    return ops.bordered_solve_Z(ops.M_Z @ zeta)


def neg_norm(ops: Operators, zeta: np.ndarray) -> float:
    """Induced negative norm |zeta|_{-1,h} = sqrt((zeta, T_h zeta))."""
    t = inverse_laplacian_h(ops, zeta)
    return float(np.sqrt(max(zeta @ (ops.M_Z @ t), 0.0)))


def _check_zero_mean(ops, v, what):
    if abs(ops.mass_vec_Z @ v) > 1e-8 * max(np.linalg.norm(v), 1.0):
        raise DiagnosticsError(f"{what} must have zero mean")


def g_functional(ops: Operators, candidate: np.ndarray, phi_old_zm: np.ndarray,
                 mean_phi0: float, tau: float, eps: float) -> float:
    """Convex functional whose unique zero-mean minimizer is the next
    zero-mean phase field: negative-norm time term, half penalty form,
    quartic and quadratic wells of candidate + mean, minus the lagged
    gradient coupling.

    The negative norm of the time term is the one induced by the inverse
    Laplacian of the potential space (P1): that makes minimizing this
    functional exactly equivalent to the mixed scheme, whose potential is
    a P1 unknown.
    """
    _check_zero_mean(ops, candidate, "candidate")
    _check_zero_mean(ops, phi_old_zm, "previous state")
    zeta = (candidate - phi_old_zm) / tau
    t = ops.bordered_solve_V(ops.M_ZV.T @ zeta)
    full = ops.ctx.field_values(candidate) + mean_phi0
    return (0.5 * tau * float(zeta @ (ops.M_ZV @ t))
            + 0.5 * float(candidate @ (ops.A @ candidate))
            + 0.25 * ops.ctx.integrate(full ** 4)
            + 0.5 * (1.0 - eps) * ops.ctx.integrate(full ** 2)
            - 2.0 * float(phi_old_zm @ (ops.K_Z @ candidate)))


def g_gradient(ops: Operators, candidate: np.ndarray, phi_old_zm: np.ndarray,
               mean_phi0: float, tau: float, eps: float) -> np.ndarray:
    """Euclidean gradient of g_functional in the coefficient vector."""
    zeta = (candidate - phi_old_zm) / tau
    t = ops.bordered_solve_V(ops.M_ZV.T @ zeta)
    # adding a constant to Lagrange coefficients shifts the field by it
    cubic = forms.assemble_cubic_residual(ops.ctx, candidate + mean_phi0)
    linear = (1.0 - eps) * (ops.M_Z @ candidate
                            + mean_phi0 * ops.mass_vec_Z)
    return (ops.M_ZV @ t + ops.A @ candidate + cubic + linear
            - 2.0 * (ops.K_Z @ phi_old_zm))


def minimize_g(ops: Operators, phi_old_zm: np.ndarray, mean_phi0: float,
               tau: float, eps: float, x0: np.ndarray | None = None,
               gtol: float = 1e-12) -> np.ndarray:
    """Brute-force minimization oracle for the solvability functional,
    independent of the Newton stepper. The zero-mean constraint is
    eliminated by expressing one dof through the remaining coefficients;
    the pivot dof is the one with the largest mass-vector entry (P2
    vertex basis functions integrate to zero over a cell, so dof 0 may
    have none)."""
    m = ops.mass_vec_Z
    n = ops.Z.n_dofs
    k = int(np.argmax(np.abs(m)))
    rest = np.arange(n) != k

    def expand(y):
        v = np.empty(n)
        v[rest] = y
        v[k] = -(m[rest] @ y) / m[k]
        return v

    def reduce_grad(g):
        return g[rest] - (m[rest] / m[k]) * g[k]

    def fun(y):
        return g_functional(ops, expand(y), phi_old_zm, mean_phi0, tau, eps)

    def jac(y):
        return reduce_grad(g_gradient(ops, expand(y), phi_old_zm,
                                      mean_phi0, tau, eps))

    # exact dense Hessian keeps the trust-region iteration quadratic;
    # the oracle runs on meshes with a few dozen unknowns
    R = np.eye(n)[rest]
    R[:, k] = -m[rest] / m[k]

    def hess(y):
        v = expand(y)
        Tm = np.column_stack([ops.bordered_solve_V(col)
                              for col in (ops.M_ZV.T).toarray().T])
        H = (ops.M_ZV @ Tm) / tau
        H += (ops.A + (1.0 - eps) * ops.M_Z).toarray()
        H += forms.assemble_cubic_jacobian(ops.ctx, v + mean_phi0).toarray()
        return R @ H @ R.T

    y0 = (x0 if x0 is not None else phi_old_zm)[rest]
    res = scipy.optimize.minimize(fun, y0, jac=jac, hess=hess,
                                  method="trust-exact",
                                  options={"gtol": gtol, "maxiter": 2000})
    return expand(res.x)


def recover_mu(ops: Operators, phi_new: np.ndarray, phi_old: np.ndarray,
               tau: float, eps: float) -> np.ndarray:
    """Chemical potential consistent with a given phase-field update:
    zero-mean Poisson solve for the fluctuating part plus the analytic
    mean of the chemical potential."""
    rhs = -(ops.M_ZV.T @ ((phi_new - phi_old) / tau))
    mu_star = ops.bordered_solve_V(rhs)
    cubic_total = float(np.sum(forms.assemble_cubic_residual(ops.ctx, phi_new)))
    mean_mu = (cubic_total + (1.0 - eps) * float(ops.mass_vec_Z @ phi_new)) \
        / ops.area
    return mu_star + mean_mu


def prolong(coarse: FeSpace, coeffs: np.ndarray, fine: FeSpace) -> np.ndarray:
    """Exact transfer of a coarse field to a nested finer space of the
    same (or higher) degree: evaluate at the fine dof coordinates."""
    cm, fm = coarse.mesh, fine.mesh
    if (fm.nx % cm.nx or fm.ny % cm.ny or fm.lx != cm.lx or fm.ly != cm.ly):
        raise DiagnosticsError("fine mesh is not a nested refinement")
    return evaluate_field(coarse, coeffs, fine.dof_coords)


def error_norms(coarse: FeSpace, coarse_coeffs: np.ndarray,
                fine: FeSpace, fine_coeffs: np.ndarray,
                fine_ops: Operators):
    """(err_2h, err_L2, err_H1) of coarse minus reference, measured on the
    fine mesh (coarse edges are unions of fine edges, so coarse jumps are
    captured)."""
    lifted = prolong(coarse, coarse_coeffs, fine)
    d = lifted - fine_coeffs
    if fine.degree == 2:
        M, K, N = fine_ops.M_Z, fine_ops.K_Z, fine_ops.N
        err_2h = float(np.sqrt(max(d @ (N @ d), 0.0)))
    else:
        M, K = fine_ops.M_V, fine_ops.K_V
        err_2h = float("nan")
    l2sq = float(d @ (M @ d))
    h1sq = l2sq + float(d @ (K @ d))
    return err_2h, float(np.sqrt(max(l2sq, 0.0))), float(np.sqrt(max(h1sq, 0.0)))
