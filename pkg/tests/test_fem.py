"""Scalar finite element matrices on triangles and intervals.

Oracles: closed-form P1 mass matrix (area/12)[[2,1,1],[1,2,1],[1,1,2]],
exact monomial integrals on the reference triangle, and the 1D element
mass h/6 [[2,1],[1,2]].
"""

import math

import numpy as np
import pytest

from phfem import fem
from phfem.errors import AssemblyError
from phfem.mesh import Mesh1D, make_interval, structured_rectangle
from test_mesh import single_triangle


def reference_monomial(a, b):
    # integral of x^a y^b over the unit right triangle
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


class TestTriangleQuadrature:
    @pytest.mark.parametrize("degree", [2, 4])
    def test_rule_exact_to_stated_degree(self, degree):
        # weights sum to 1, so the reference-triangle integral is 1/2 sum w f
        pts, wts = fem._TRI_RULES[degree]
        for a in range(degree + 1):
            for b in range(degree + 1 - a):
                num = 0.5 * np.dot(wts, pts[:, 0] ** a * pts[:, 1] ** b)
                assert num == pytest.approx(reference_monomial(a, b), rel=1e-14)

    def test_weights_sum_to_one(self):
        for pts, wts in fem._TRI_RULES.values():
            assert wts.sum() == pytest.approx(1.0, abs=1e-15)
            assert np.all(pts >= 0.0) and np.all(pts.sum(axis=1) <= 1.0 + 1e-15)


class TestScalarMatrix:
    def test_p1_mass_single_triangle(self):
        mesh = single_triangle()
        M = fem.scalar_matrix(mesh, "p1", "p1").toarray()
        area = 0.5
        oracle = (area / 12.0) * np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]], dtype=float)
        assert np.allclose(M, oracle, atol=1e-15)

    def test_p1_mass_row_sums_partition_area(self):
        mesh = structured_rectangle(2.0, 1.5, 5, 3)
        M = fem.scalar_matrix(mesh, "p1", "p1")
        assert np.asarray(M.sum(axis=1)).sum() == pytest.approx(3.0, rel=1e-13)

    def test_p0_mass_is_triangle_areas(self):
        mesh = structured_rectangle(1.0, 1.0, 3, 3)
        M = fem.scalar_matrix(mesh, "p0", "p0").toarray()
        assert np.allclose(M, np.diag(mesh.areas), atol=1e-16)

    def test_p0_p1_cross_mass(self):
        # row t integrates phi_j over triangle t: row sum equals the area
        mesh = structured_rectangle(1.0, 1.0, 2, 2)
        M = fem.scalar_matrix(mesh, "p0", "p1").toarray()
        assert np.allclose(M.sum(axis=1), mesh.areas, atol=1e-15)

    def test_derivative_single_triangle(self):
        # gradients on the unit right triangle: d/dx phi = (-1, 1, 0)
        mesh = single_triangle()
        Dx = fem.scalar_matrix(mesh, "p1", "p1", deriv="x").toarray()
        Dy = fem.scalar_matrix(mesh, "p1", "p1", deriv="y").toarray()
        area = 0.5
        col = area / 3.0
        assert np.allclose(Dx, np.outer([1, 1, 1], [-col, col, 0.0]), atol=1e-15)
        assert np.allclose(Dy, np.outer([1, 1, 1], [-col, 0.0, col]), atol=1e-15)

    def test_derivative_annihilates_constants(self):
        mesh = structured_rectangle(1.0, 2.0, 4, 3)
        ones = np.ones(mesh.n_nodes)
        for axis in ("x", "y"):
            D = fem.scalar_matrix(mesh, "p1", "p1", deriv=axis)
            assert np.max(np.abs(D @ ones)) <= 1e-15

    def test_derivative_exact_on_linears(self):
        # for w = 2x - 3y the weighted derivative equals the mass times (2, -3)
        mesh = structured_rectangle(1.0, 1.0, 4, 4)
        w = 2.0 * mesh.nodes[:, 0] - 3.0 * mesh.nodes[:, 1]
        M = fem.scalar_matrix(mesh, "p1", "p1")
        Dx = fem.scalar_matrix(mesh, "p1", "p1", deriv="x")
        Dy = fem.scalar_matrix(mesh, "p1", "p1", deriv="y")
        ones = np.ones(mesh.n_nodes)
        assert np.allclose(Dx @ w, 2.0 * (M @ ones), atol=1e-14)
        assert np.allclose(Dy @ w, -3.0 * (M @ ones), atol=1e-14)

    def test_p0_tested_derivative(self):
        # piecewise-constant tests against P1 trial derivatives
        mesh = structured_rectangle(1.0, 1.0, 2, 2)
        D = fem.scalar_matrix(mesh, "p0", "p1", deriv="x").toarray()
        w = mesh.nodes[:, 0].copy()
        assert np.allclose(D @ w, mesh.areas, atol=1e-15)

    def test_derivative_requires_p1_trial(self):
        mesh = structured_rectangle(1.0, 1.0, 2, 2)
        with pytest.raises(AssemblyError):
            fem.scalar_matrix(mesh, "p1", "p0", deriv="x")

    def test_unknown_family(self):
        mesh = structured_rectangle(1.0, 1.0, 2, 2)
        with pytest.raises(AssemblyError):
            fem.scalar_matrix(mesh, "p2", "p1")


class TestIntervalMatrices:
    def test_element_mass(self):
        mesh = Mesh1D(np.array([0.0, 0.4]))
        M = fem.interval_mass(mesh).toarray()
        h = 0.4
        assert np.allclose(M, (h / 6.0) * np.array([[2.0, 1.0], [1.0, 2.0]]), atol=1e-15)

    def test_assembled_mass_row_sums(self):
        mesh = make_interval(2.0, 8)
        M = fem.interval_mass(mesh)
        assert np.asarray(M.sum(axis=1)).sum() == pytest.approx(2.0, rel=1e-14)

    def test_weighted_mass(self):
        mesh = make_interval(1.0, 4)
        w = np.array([1.0, 2.0, 3.0, 4.0])
        M = fem.interval_mass(mesh, weight=w)
        ref = fem.interval_mass(mesh).toarray()
        # weight scales each element block
        got = M.toarray()
        assert got[0, 0] == pytest.approx(ref[0, 0] * 1.0)
        assert got[4, 4] == pytest.approx(ref[4, 4] * 4.0)
        assert got[2, 2] == pytest.approx((2.0 + 3.0) * 0.25 / 3.0)

    def test_derivative_matrix(self):
        # int phi_i phi_j' dx on one element = 1/2 [[-1, 1], [-1, 1]]
        mesh = Mesh1D(np.array([0.0, 0.7]))
        D = fem.interval_deriv(mesh).toarray()
        assert np.allclose(D, 0.5 * np.array([[-1.0, 1.0], [-1.0, 1.0]]), atol=1e-15)

    def test_derivative_annihilates_constants_exactly(self):
        mesh = make_interval(3.0, 7)
        D = fem.interval_deriv(mesh)
        assert np.max(np.abs(D @ np.ones(8))) == 0.0

    def test_derivative_exact_on_linears(self):
        mesh = make_interval(1.0, 5)
        D = fem.interval_deriv(mesh)
        M = fem.interval_mass(mesh)
        x = mesh.nodes
        assert np.allclose(D @ x, M @ np.ones(6), atol=1e-15)


class TestEdgeRule:
    @pytest.mark.parametrize("degree", [1, 2, 3, 4, 5])
    def test_gauss_exactness(self, degree):
        pts, wts = fem.edge_rule(degree)
        for p in range(degree + 1):
            got = np.dot(wts, pts**p)
            assert got == pytest.approx(1.0 / (p + 1), rel=1e-14)
