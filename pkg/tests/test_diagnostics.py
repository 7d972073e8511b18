import numpy as np
import pytest

from pfcip import diagnostics, forms, icfields
from pfcip.diagnostics import (DiagnosticsError, energy_F,
                               energy_law_residual, error_norms,
                               g_functional, g_gradient, inverse_laplacian_h,
                               minimize_g, neg_norm, norm_2h, prolong,
                               recover_mu)
from pfcip.mesh import build_rect_mesh
from pfcip.operators import build_operators
from pfcip.stepper import SchemeParams, newton_solve, ritz_project_initial


@pytest.fixture(scope="module")
def ops8():
    return build_operators(build_rect_mesh(1.0, 1.0, 8, 8), alpha=20.0)


def zero_mean(ops, v):
    return v - (ops.mass_vec_Z @ v) / ops.area


class TestEnergy:
    def test_zero_field(self, ops8):
        rec = energy_F(np.zeros(ops8.Z.n_dofs), ops8, eps=0.025)
        assert rec.F_total == 0.0

    def test_constant_one(self, ops8):
        rec = energy_F(np.ones(ops8.Z.n_dofs), ops8, eps=0.025)
        # the penalty quadratic form carries ~1e-10 of cancellation noise
        assert rec.F_total == pytest.approx(0.25 + 0.975 / 2, abs=1e-9)
        assert rec.term_gradient == pytest.approx(0.0, abs=1e-12)
        assert rec.term_aip_half == pytest.approx(0.0, abs=1e-9)

    def test_decomposition_reassembles(self, ops8, rng):
        phi = rng.standard_normal(ops8.Z.n_dofs)
        rec = energy_F(phi, ops8, eps=0.025)
        total = (rec.term_quartic + rec.term_quadratic + rec.term_gradient
                 + rec.term_aip_half)
        assert rec.F_total == pytest.approx(total, rel=1e-12)
        assert rec.mass == pytest.approx(float(ops8.mass_vec_Z @ phi))

    def test_size_mismatch(self, ops8):
        with pytest.raises(DiagnosticsError):
            energy_F(np.zeros(3), ops8, eps=0.025)


class TestNorm2h:
    def test_constants_vanish(self, ops8):
        # the Gram quadratic form of a constant is pure cancellation noise
        # (~1e-10); the square root sits around 1e-5, far below any
        # nonconstant field's norm
        one = np.ones(ops8.Z.n_dofs)
        assert norm_2h(one, ops8) <= 1e-4
        assert norm_2h(one, ops8) <= 1e-5 * norm_2h(ops8.Z.dof_coords[:, 0],
                                                    ops8)

    def test_linear_interpolant_identity(self):
        for n in (1, 2, 4):
            ops = build_operators(build_rect_mesh(1.0, 1.0, n, n),
                                  alpha=20.0)
            v = ops.Z.dof_coords[:, 0]
            assert norm_2h(v, ops)**2 == pytest.approx(2 * n * 20.0,
                                                       rel=1e-12)

    def test_nonconstant_positive(self, ops8, rng):
        v = rng.standard_normal(ops8.Z.n_dofs)
        assert norm_2h(v, ops8) > 0


class TestEnergyLaw:
    def test_constant_state_zero(self, ops8):
        phi = np.full(ops8.Z.n_dofs, 0.4)
        mu = np.full(ops8.V.n_dofs, 0.4**3 + 0.975 * 0.4)
        assert energy_law_residual(phi, phi, mu, 0.1, ops8, 0.025) \
            <= 1e-12

    def test_converged_step_and_sensitivity(self):
        ops = build_operators(build_rect_mesh(32.0, 32.0, 16, 16),
                              alpha=20.0)
        params = SchemeParams(tau=0.1, eps=0.025, alpha=20.0)
        phi0 = ritz_project_initial(icfields.ic_benchmark(), ops, params)
        phi, mu, _, _, _ = newton_solve(phi0, phi0,
                                        np.zeros(ops.V.n_dofs), params,
                                        ops)
        res = energy_law_residual(phi0, phi, mu, params.tau, ops,
                                  params.eps)
        F = energy_F(phi, ops, params.eps).F_total
        assert res <= 1e-8 * max(1.0, abs(F))
        perturbed = energy_law_residual(phi0, phi + 1e-3, mu, params.tau,
                                        ops, params.eps)
        assert perturbed > 1e3 * max(res, 1e-12)


class TestInverseLaplacian:
    def test_zero(self, ops8):
        assert np.max(np.abs(inverse_laplacian_h(
            ops8, np.zeros(ops8.Z.n_dofs)))) == 0.0

    def test_defining_property(self, ops8, rng):
        zeta = zero_mean(ops8, rng.standard_normal(ops8.Z.n_dofs))
        t = inverse_laplacian_h(ops8, zeta)
        # against all zero-mean chi: K t - M zeta must be a multiple of
        # the mass vector (the Lagrange multiplier direction)
        r = ops8.K_Z @ t - ops8.M_Z @ zeta
        lam = (r @ ops8.mass_vec_Z) / (ops8.mass_vec_Z @ ops8.mass_vec_Z)
        assert np.max(np.abs(r - lam * ops8.mass_vec_Z)) <= 1e-10

    def test_norm_symmetry(self, ops8, rng):
        zeta = zero_mean(ops8, rng.standard_normal(ops8.Z.n_dofs))
        t = inverse_laplacian_h(ops8, zeta)
        a = float(t @ (ops8.K_Z @ t))
        b = float(zeta @ (ops8.M_Z @ t))
        assert a == pytest.approx(b, rel=1e-10)

    def test_nonzero_mean_rejected(self, ops8):
        with pytest.raises(DiagnosticsError):
            inverse_laplacian_h(ops8, np.ones(ops8.Z.n_dofs))

    def test_duality_bound(self, ops8, rng):
        for _ in range(10):
            zeta = zero_mean(ops8, rng.standard_normal(ops8.Z.n_dofs))
            chi = zero_mean(ops8, rng.standard_normal(ops8.Z.n_dofs))
            lhs = abs(float(zeta @ (ops8.M_Z @ chi)))
            rhs = neg_norm(ops8, zeta) * np.sqrt(chi @ (ops8.K_Z @ chi))
            assert lhs <= rhs * (1 + 1e-10)


class TestSolvabilityFunctional:
    def test_trivial_value(self, ops8):
        c = 0.3
        z = np.zeros(ops8.Z.n_dofs)
        val = g_functional(ops8, z, z, c, tau=0.1, eps=0.025)
        assert val == pytest.approx(c**4 / 4 + 0.975 * c**2 / 2, rel=1e-13)

    def test_gradient_finite_difference(self, ops8, rng):
        phi_old = zero_mean(ops8, rng.standard_normal(ops8.Z.n_dofs) * 0.1)
        cand = zero_mean(ops8, rng.standard_normal(ops8.Z.n_dofs) * 0.1)
        g = g_gradient(ops8, cand, phi_old, 0.07, 0.1, 0.025)
        d = zero_mean(ops8, rng.standard_normal(ops8.Z.n_dofs))
        delta = 1e-6
        fd = (g_functional(ops8, cand + delta * d, phi_old, 0.07, 0.1,
                           0.025)
              - g_functional(ops8, cand - delta * d, phi_old, 0.07, 0.1,
                             0.025)) / (2 * delta)
        assert float(g @ d) == pytest.approx(fd, rel=1e-6)

    def test_strict_convexity_probe(self, ops8, rng):
        phi_old = zero_mean(ops8, rng.standard_normal(ops8.Z.n_dofs) * 0.1)
        u = zero_mean(ops8, rng.standard_normal(ops8.Z.n_dofs) * 0.5)
        v = zero_mean(ops8, rng.standard_normal(ops8.Z.n_dofs) * 0.5)
        args = (phi_old, 0.07, 0.1, 0.025)
        mid = g_functional(ops8, 0.5 * (u + v), *args)
        avg = 0.5 * (g_functional(ops8, u, *args)
                     + g_functional(ops8, v, *args))
        assert mid < avg

    def test_scheme_solution_is_local_min(self, rng):
        ops = build_operators(build_rect_mesh(1.0, 1.0, 2, 2), alpha=20.0)
        params = SchemeParams(tau=0.01, eps=0.025, alpha=20.0)
        phi0 = (0.05 + 0.1 * np.sin(2 * np.pi * ops.Z.dof_coords[:, 0])
                * np.cos(2 * np.pi * ops.Z.dof_coords[:, 1]))
        mean0 = float(ops.mass_vec_Z @ phi0) / ops.area
        phi, mu, _, _, _ = newton_solve(phi0, phi0,
                                        np.zeros(ops.V.n_dofs), params,
                                        ops)
        args = (phi0 - mean0, mean0, params.tau, params.eps)
        g_star = g_functional(ops, phi - mean0, *args)
        for _ in range(100):
            d = zero_mean(ops, rng.standard_normal(ops.Z.n_dofs)) * 1e-2
            assert g_functional(ops, phi - mean0 + d, *args) >= g_star

    def test_nonzero_mean_rejected(self, ops8):
        with pytest.raises(DiagnosticsError):
            g_functional(ops8, np.ones(ops8.Z.n_dofs),
                         np.zeros(ops8.Z.n_dofs), 0.0, 0.1, 0.025)


class TestRecoverMu:
    def test_matches_newton(self):
        ops = build_operators(build_rect_mesh(32.0, 32.0, 8, 8), alpha=20.0)
        params = SchemeParams(tau=0.2, eps=0.025, alpha=20.0)
        phi0 = ritz_project_initial(icfields.ic_benchmark(), ops, params)
        phi, mu, _, _, _ = newton_solve(phi0, phi0,
                                        np.zeros(ops.V.n_dofs), params,
                                        ops)
        mu2 = recover_mu(ops, phi, phi0, params.tau, params.eps)
        assert np.max(np.abs(mu - mu2)) <= 1e-8


class TestErrorNorms:
    def test_identical_fields(self, rng):
        ops = build_operators(build_rect_mesh(1.0, 1.0, 4, 4), alpha=20.0)
        v = rng.standard_normal(ops.Z.n_dofs)
        e2h, el2, eh1 = error_norms(ops.Z, v, ops.Z, v, ops)
        assert (e2h, el2, eh1) == (0.0, 0.0, 0.0)

    def test_constant_offset(self):
        coarse = build_operators(build_rect_mesh(2.0, 2.0, 2, 2),
                                 alpha=20.0)
        fine = build_operators(build_rect_mesh(2.0, 2.0, 4, 4), alpha=20.0)
        c = np.full(coarse.Z.n_dofs, 1.0)
        f = np.full(fine.Z.n_dofs, 1.3)
        _, el2, _ = error_norms(coarse.Z, c, fine.Z, f, fine)
        assert el2 == pytest.approx(0.3 * 2.0, rel=1e-12)  # |d| sqrt(|O|)

    def test_prolongation_exact_for_nested_p2(self, rng):
        coarse = build_operators(build_rect_mesh(1.0, 1.0, 2, 2),
                                 alpha=20.0)
        fine = build_operators(build_rect_mesh(1.0, 1.0, 4, 4), alpha=20.0)
        v = rng.standard_normal(coarse.Z.n_dofs)
        lifted = prolong(coarse.Z, v, fine.Z)
        from pfcip.fespace import evaluate_field
        pts = rng.random((50, 2))
        assert np.allclose(evaluate_field(fine.Z, lifted, pts),
                           evaluate_field(coarse.Z, v, pts), atol=1e-11)

    def test_non_nested_rejected(self):
        coarse = build_operators(build_rect_mesh(1.0, 1.0, 3, 3),
                                 alpha=20.0)
        fine = build_operators(build_rect_mesh(1.0, 1.0, 4, 4), alpha=20.0)
        with pytest.raises(DiagnosticsError):
            prolong(coarse.Z, np.zeros(coarse.Z.n_dofs), fine.Z)


class TestPureness:
    def test_reevaluation_bit_identical(self, ops8, rng):
        phi = rng.standard_normal(ops8.Z.n_dofs)
        a = energy_F(phi, ops8, 0.025)
        b = energy_F(phi, ops8, 0.025)
        assert a == b
        assert norm_2h(phi, ops8) == norm_2h(phi, ops8)
