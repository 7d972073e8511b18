import numpy as np
import pytest
import sympy

from pfcip.fespace import (FeError, build_space, cell_quadrature,
                           edge_quadrature, evaluate_field, ref_basis_p2,
                           tabulate)
from pfcip.mesh import build_rect_mesh


def ref_integral(expr):
    """Exact integral of an expression in x, y over the reference triangle."""
    x, y = sympy.symbols("x y")
    inner = sympy.integrate(expr, (y, 0, 1 - x))
    return float(sympy.integrate(inner, (x, 0, 1)))


class TestCellQuadrature:
    def test_constant(self):
        for d in (1, 2, 4, 6, 8):
            rule = cell_quadrature(d)
            assert rule.weights.sum() == pytest.approx(0.5, rel=1e-14)
            assert np.all(rule.weights > 0)

    def test_monomial_x2y2(self):
        x, y = sympy.symbols("x y")
        exact = ref_integral(x**2 * y**2)
        rule = cell_quadrature(6)
        approx = rule.weights @ (rule.points[:, 0]**2 * rule.points[:, 1]**2)
        assert approx == pytest.approx(exact, abs=1e-14)

    def test_degree6_binomial(self):
        x, y = sympy.symbols("x y")
        exact = ref_integral((x + y)**6)
        rule = cell_quadrature(6)
        s = rule.points.sum(axis=1)
        assert rule.weights @ s**6 == pytest.approx(exact, rel=1e-14)

    def test_exactness_sweep(self):
        x, y = sympy.symbols("x y")
        for d in range(1, 9):
            rule = cell_quadrature(d)
            for i in range(d + 1):
                j = d - i
                exact = ref_integral(x**i * y**j)
                approx = rule.weights @ (rule.points[:, 0]**i
                                         * rule.points[:, 1]**j)
                assert approx == pytest.approx(exact, abs=1e-14), (d, i, j)

    def test_unsupported_degree(self):
        with pytest.raises(FeError):
            cell_quadrature(40)


class TestEdgeQuadrature:
    def test_constant_and_quartic(self):
        rule = edge_quadrature(4)
        assert rule.weights.sum() == pytest.approx(1.0, rel=1e-14)
        assert rule.weights @ rule.points**4 == pytest.approx(0.2, rel=1e-14)


class TestRefBasisP2:
    def test_lagrange_property(self):
        nodes = np.array([[0, 0], [1, 0], [0, 1],
                          [0.5, 0], [0.5, 0.5], [0, 0.5]], dtype=float)
        vals, _, _ = ref_basis_p2(nodes)
        assert np.allclose(vals, np.eye(6), atol=1e-14)

    def test_vertex0_hessian(self):
        _, _, hess = ref_basis_p2(np.array([[0.3, 0.2]]))
        assert np.allclose(hess[0, 0], [[4.0, 4.0], [4.0, 4.0]], atol=1e-13)

    def test_partition_of_unity(self):
        pts = np.array([[0.3, 0.2], [0.1, 0.7], [0.25, 0.25]])
        vals, grads, hess = ref_basis_p2(pts)
        assert np.allclose(vals.sum(axis=1), 1.0, atol=1e-14)
        assert np.allclose(grads.sum(axis=1), 0.0, atol=1e-13)
        assert np.allclose(hess.sum(axis=1), 0.0, atol=1e-13)

    def test_symbolic_cross_check(self):
        x, y = sympy.symbols("x y")
        lams = [1 - x - y, x, y]
        basis = [l * (2 * l - 1) for l in lams] \
            + [4 * lams[0] * lams[1], 4 * lams[1] * lams[2],
               4 * lams[2] * lams[0]]
        pt = (0.37, 0.21)
        vals, grads, hess = ref_basis_p2(np.array([pt]))
        for i, b in enumerate(basis):
            sub = {x: pt[0], y: pt[1]}
            assert vals[0, i] == pytest.approx(float(b.subs(sub)), abs=1e-14)
            assert grads[0, i, 0] == pytest.approx(
                float(sympy.diff(b, x).subs(sub)), abs=1e-13)
            assert hess[0, i, 0, 1] == pytest.approx(
                float(sympy.diff(b, x, y).subs(sub)), abs=1e-13)


class TestSpaces:
    def test_dof_counts(self):
        mesh = build_rect_mesh(1.0, 1.0, 3, 3)
        p1 = build_space(mesh, 1)
        p2 = build_space(mesh, 2)
        assert p1.n_dofs == mesh.n_vertices
        assert p2.n_dofs == mesh.n_vertices + mesh.n_edges

    def test_every_dof_referenced(self):
        mesh = build_rect_mesh(1.0, 1.0, 2, 3)
        for degree in (1, 2):
            space = build_space(mesh, degree)
            assert set(space.cell_dofs.ravel()) == set(range(space.n_dofs))


class TestTabulate:
    def test_hessian_of_x_squared_interpolant(self):
        mesh = build_rect_mesh(1.0, 1.0, 2, 2)
        space = build_space(mesh, 2)
        coeffs = space.dof_coords[:, 0]**2
        rule = cell_quadrature(4)
        for c in (0, 3, 7):
            be = tabulate(space, c, rule)
            dofs = space.cell_dofs[c]
            h = np.einsum("i,qijk->qjk", coeffs[dofs], be.hessians)
            assert np.allclose(h, [[2.0, 0.0], [0.0, 0.0]], atol=1e-11)

    def test_hessians_constant_per_cell(self):
        mesh = build_rect_mesh(2.0, 1.0, 3, 2)
        space = build_space(mesh, 2)
        be = tabulate(space, 1, cell_quadrature(6))
        spread = be.hessians.max(axis=0) - be.hessians.min(axis=0)
        assert np.max(np.abs(spread)) <= 1e-12

    def test_partition_of_unity_physical(self):
        mesh = build_rect_mesh(3.0, 2.0, 2, 2)
        space = build_space(mesh, 2)
        be = tabulate(space, 5, cell_quadrature(6))
        assert np.allclose(be.values.sum(axis=1), 1.0, atol=1e-13)
        assert np.allclose(be.grads.sum(axis=1), 0.0, atol=1e-12)


class TestEvaluateField:
    def test_constant(self):
        mesh = build_rect_mesh(1.0, 1.0, 3, 3)
        space = build_space(mesh, 2)
        coeffs = np.full(space.n_dofs, 0.7)
        pts = np.array([[0.1, 0.9], [0.5, 0.5], [0.99, 0.01]])
        assert np.allclose(evaluate_field(space, coeffs, pts), 0.7,
                           atol=1e-14)

    def test_quadratic_reproduction(self, rng):
        mesh = build_rect_mesh(1.0, 1.0, 4, 4)
        space = build_space(mesh, 2)

        def f(p):
            return (1.3 + 0.5 * p[:, 0] - p[:, 1] + 2 * p[:, 0]**2
                    - 0.7 * p[:, 0] * p[:, 1] + 0.25 * p[:, 1]**2)

        coeffs = f(space.dof_coords)
        pts = rng.random((100, 2))
        assert np.allclose(evaluate_field(space, coeffs, pts), f(pts),
                           atol=1e-12)

    def test_nodal_evaluation(self):
        mesh = build_rect_mesh(2.0, 1.0, 2, 2)
        space = build_space(mesh, 2)
        coeffs = np.arange(space.n_dofs, dtype=float)
        got = evaluate_field(space, coeffs, space.dof_coords)
        assert np.allclose(got, coeffs, atol=1e-12)

    def test_gradient_evaluation(self):
        mesh = build_rect_mesh(1.0, 1.0, 4, 4)
        space = build_space(mesh, 2)
        coeffs = space.dof_coords[:, 0]**2 + space.dof_coords[:, 1]
        pts = np.array([[0.3, 0.6], [0.8, 0.2]])
        g = evaluate_field(space, coeffs, pts, derivative=1)
        assert np.allclose(g, np.column_stack([2 * pts[:, 0],
                                               np.ones(2)]), atol=1e-12)
