"""Time integration: Ritz projection of initial data, Newton iteration
on the coupled (phi, mu) block system, and run orchestration.

One step solves, for the P2 field phi and P1 potential mu,

    ((phi - phi_old)/tau, nu) + (grad mu, grad nu) = 0
    a_IP(phi, psi) + (phi^3 + (1-eps) phi, psi)
        - 2 (grad phi_old, grad psi) - (mu, psi) = 0

where the gradient coupling is lagged to the previous step (the convex
splitting) and a_IP is the interior penalty form.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import diagnostics, forms
from .operators import Operators, build_operators, sym_factor


class NewtonDiverged(Exception):
    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history or []


class LinearSolveFailed(Exception):
    pass


class InvariantViolation(Exception):
    pass


@dataclass(frozen=True)
class SchemeParams:
    tau: float
    eps: float
    alpha: float
    newton_tol_rel: float = 1e-10
    newton_tol_abs: float = 1e-12
    newton_max_iter: int = 50

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"time step must be positive, got {self.tau}")
        if self.eps >= 1:
            raise ValueError(f"model parameter eps must be < 1, got {self.eps}")
        if self.alpha < 1:
            raise ValueError(f"penalty alpha must be >= 1, got {self.alpha}")


@dataclass
class SimState:
    phi: np.ndarray
    mu: np.ndarray
    time: float = 0.0
    step: int = 0


@dataclass
class StepStats:
    newton_iters: int
    final_residual: float
    energy_before: float
    energy_after: float
    energy_law_residual: float
    mass: float


def ritz_project_initial(ic, ops: Operators, params: SchemeParams) -> np.ndarray:
    """Project a smooth closure (value/grad/hess) onto the P2 space via
    the penalty form plus (1-eps) mass; the projection preserves the mean
    automatically because constants annihilate the penalty form."""
    A = (ops.A + (1.0 - params.eps) * ops.M_Z).tocsc()
    rhs = forms.aip_action_smooth(ops.Z, ops.alpha, ic,
                                  cell_degree=ops.cell_degree,
                                  edge_degree=ops.edge_degree)
    rhs = rhs + (1.0 - params.eps) * forms.assemble_load(ops.ctx, ic.value)
    try:
        return sym_factor(A).solve(rhs)
    except RuntimeError as exc:
        raise LinearSolveFailed(f"Ritz projection solve failed: {exc}") from exc


def residuals(phi, mu, phi_old, ops: Operators, params: SchemeParams):
    """(R_phi, R_mu) of the coupled scheme at the given iterate."""
    r_phi = (ops.A @ phi
             + forms.assemble_cubic_residual(ops.ctx, phi)
             + (1.0 - params.eps) * (ops.M_Z @ phi)
             - 2.0 * (ops.K_Z @ phi_old)
             - ops.M_ZV @ mu)
    r_mu = ops.M_ZV.T @ ((phi - phi_old) / params.tau) + ops.K_V @ mu
    return r_phi, r_mu


def newton_solve(phi_old, phi_guess, mu_guess, params: SchemeParams,
                 ops: Operators):
    """Newton iteration on the symmetric indefinite block system

        [ A + W(phi) + (1-eps) M_Z   -M_ZV  ] [dphi]   [ -R_phi  ]
        [ -M_ZV^T                    -tau K ] [dmu ] = [ tau R_mu ]

    (the mass-balance row is scaled by -tau to symmetrize). A plain full
    step is taken; a bisecting step-halving fallback triggers after two
    consecutive residual increases.
    """
    phi = phi_guess.copy()
    mu = mu_guess.copy()
    nz = ops.Z.n_dofs
    tau = params.tau

    def res_norm(r_phi, r_mu):
        return float(np.sqrt(r_phi @ r_phi + r_mu @ r_mu))

    r_phi, r_mu = residuals(phi, mu, phi_old, ops, params)
    rnorm = res_norm(r_phi, r_mu)
    tol = max(params.newton_tol_abs, params.newton_tol_rel * rnorm)
    history = [rnorm]
    increases = 0

    for it in range(params.newton_max_iter):
        if rnorm <= tol:
            return phi, mu, it, rnorm, history
        # roundoff floor: residual near tolerance but no longer decreasing
        if it > 0 and rnorm <= 1e3 * tol and rnorm >= 0.5 * history[-2]:
            return phi, mu, it, rnorm, history
        W = forms.assemble_cubic_jacobian(ops.ctx, phi)
        J = sp.bmat([[ops.A + (1.0 - params.eps) * ops.M_Z + W, -ops.M_ZV],
                     [-ops.M_ZV.T, -tau * ops.K_V]], format="csc")
        rhs = np.concatenate([-r_phi, tau * r_mu])
        try:
            delta = sym_factor(J).solve(rhs)
        except RuntimeError as exc:
            raise LinearSolveFailed(f"Newton linear solve failed: {exc}") from exc
        dphi, dmu = delta[:nz], delta[nz:]

        phi_new = phi + dphi
        mu_new = mu + dmu
        r_phi_n, r_mu_n = residuals(phi_new, mu_new, phi_old, ops, params)
        rnorm_new = res_norm(r_phi_n, r_mu_n)
        if rnorm_new >= rnorm:
            increases += 1
            if increases >= 2:
                scale = 1.0
                while rnorm_new >= rnorm and scale > 1.0 / 1024:
                    scale *= 0.5
                    phi_new = phi + scale * dphi
                    mu_new = mu + scale * dmu
                    r_phi_n, r_mu_n = residuals(phi_new, mu_new, phi_old,
                                                ops, params)
                    rnorm_new = res_norm(r_phi_n, r_mu_n)
        else:
            increases = 0
        phi, mu = phi_new, mu_new
        r_phi, r_mu, rnorm = r_phi_n, r_mu_n, rnorm_new
        history.append(rnorm)

    if rnorm <= tol:
        return phi, mu, params.newton_max_iter, rnorm, history
    raise NewtonDiverged(
        f"Newton failed to converge in {params.newton_max_iter} iterations "
        f"(residual {rnorm:.3e}, tol {tol:.3e})", history)


def step(state: SimState, params: SchemeParams, ops: Operators):
    """Advance one time step; returns the new state and its statistics."""
    e_before = diagnostics.energy_F(state.phi, ops, params.eps).F_total
    phi, mu, iters, rnorm, _ = newton_solve(
        state.phi, state.phi, state.mu, params, ops)
    e_after = diagnostics.energy_F(phi, ops, params.eps).F_total
    law = diagnostics.energy_law_residual(state.phi, phi, mu, params.tau,
                                          ops, params.eps)
    new = SimState(phi=phi, mu=mu, time=state.time + params.tau,
                   step=state.step + 1)
    stats = StepStats(newton_iters=iters, final_residual=rnorm,
                      energy_before=e_before, energy_after=e_after,
                      energy_law_residual=law,
                      mass=float(ops.mass_vec_Z @ phi))
    return new, stats


def run(ops: Operators, params: SchemeParams, phi0: np.ndarray,
        n_steps: int, on_step=None, check_invariants: bool = True):
    """Run a fixed number of steps from projected initial data; fails
    fast on mass drift, energy increase, or an energy-law violation."""
    state = SimState(phi=phi0.copy(), mu=np.zeros(ops.V.n_dofs))
    mass0 = float(ops.mass_vec_Z @ phi0)
    history = []
    for m in range(1, n_steps + 1):
        try:
            state, stats = step(state, params, ops)
        except (NewtonDiverged, LinearSolveFailed) as exc:
            raise type(exc)(f"step {m}: {exc}") from exc
        if check_invariants:
            if abs(stats.mass - mass0) > 1e-10 * max(abs(mass0), 1.0):
                raise InvariantViolation(
                    f"step {m}: mass drifted from {mass0!r} to {stats.mass!r}")
            if stats.energy_after > stats.energy_before \
                    + 1e-9 * max(1.0, abs(stats.energy_before)):
                raise InvariantViolation(
                    f"step {m}: energy increased {stats.energy_before!r} -> "
                    f"{stats.energy_after!r}")
            if stats.energy_law_residual > 1e-8 * max(
                    1.0, abs(stats.energy_after)):
                raise InvariantViolation(
                    f"step {m}: energy law residual "
                    f"{stats.energy_law_residual:.3e}")
        history.append((state, stats))
        if on_step is not None:
            on_step(state, stats)
    return history
