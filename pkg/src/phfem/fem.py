"""Scalar P1/P0 element machinery on triangles and intervals.

Everything downstream is built from three scalar couplings:

* mass:        int test_i * trial_j
* derivative:  int test_i * d(trial_j)/dx_axis   (trial piecewise linear)
* edge trace:  int_e phi_i * phi_j along a boundary edge

All integrands here are polynomials of degree <= 2, so the default
degree-2 triangle rule and 2-point Gauss edge rule integrate them exactly
(up to round-off).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError
from .mesh import Mesh1D, Mesh2D

__all__ = [
    "tri_geometry",
    "family_dim",
    "scalar_matrix",
    "edge_rule",
    "interval_mass",
    "interval_deriv",
]

# symmetric 3-point rule, exact to degree 2 (weights sum to 1, scale by area)
_TRI_RULES = {
    2: (
        np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]]),
        np.array([1 / 3, 1 / 3, 1 / 3]),
    ),
    # 6-point rule, exact to degree 4
    4: (
        np.array(
            [
                [0.445948490915965, 0.445948490915965],
                [0.108103018168070, 0.445948490915965],
                [0.445948490915965, 0.108103018168070],
                [0.091576213509771, 0.091576213509771],
                [0.816847572980459, 0.091576213509771],
                [0.091576213509771, 0.816847572980459],
            ]
        ),
        np.array(
            [
                0.223381589678011,
                0.223381589678011,
                0.223381589678011,
                0.109951743655322,
                0.109951743655322,
                0.109951743655322,
            ]
        ),
    ),
}


def _tri_rule(degree: int):
    for available in sorted(_TRI_RULES):
        if degree <= available:
            return _TRI_RULES[available]
    raise AssemblyError(f"no triangle quadrature rule of degree {degree}")


def edge_rule(degree: int):
    """Gauss points/weights on [0, 1] exact for the given polynomial degree."""
    n = max(1, (degree + 2) // 2)
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (t + 1.0), 0.5 * w


def tri_geometry(mesh: Mesh2D):
    """Areas (T,) and constant P1 gradients (T, 3, 2) of all triangles."""
    p = mesh.nodes[mesh.triangles]
    b = np.stack(
        [p[:, 1, 1] - p[:, 2, 1], p[:, 2, 1] - p[:, 0, 1], p[:, 0, 1] - p[:, 1, 1]], axis=1
    )
    c = np.stack(
        [p[:, 2, 0] - p[:, 1, 0], p[:, 0, 0] - p[:, 2, 0], p[:, 1, 0] - p[:, 0, 0]], axis=1
    )
    areas = mesh.areas
    grads = np.stack([b, c], axis=2) / (2.0 * areas)[:, None, None]
    return areas, grads


def family_dim(mesh: Mesh2D, family: str) -> int:
    if family == "p1":
        return mesh.n_nodes
    if family == "p0":
        return mesh.n_triangles
    raise AssemblyError(f"unknown element family {family!r}")


def _local_dofs(mesh: Mesh2D, family: str) -> np.ndarray:
    """(T, n_loc) global dof indices per triangle."""
    if family == "p1":
        return mesh.triangles
    if family == "p0":
        return np.arange(mesh.n_triangles, dtype=np.int64)[:, None]
    raise AssemblyError(f"unknown element family {family!r}")


def _shape_values(family: str, qp: np.ndarray) -> np.ndarray:
    """(n_loc, n_q) basis values at reference quadrature points."""
    if family == "p1":
        xi, eta = qp[:, 0], qp[:, 1]
        return np.stack([1.0 - xi - eta, xi, eta])
    if family == "p0":
        return np.ones((1, len(qp)))
    raise AssemblyError(f"unknown element family {family!r}")


def scalar_matrix(
    mesh: Mesh2D,
    test_family: str,
    trial_family: str,
    deriv: str | None = None,
    quad_degree: int = 2,
) -> sp.csr_matrix:
    """Assemble int test_i * trial_j dOmega or int test_i * d(trial_j)/d(deriv).

    ``deriv`` is None, "x" or "y"; differentiation requires a P1 trial
    family.  Returns a CSR matrix of shape (dim(test), dim(trial)).
    """
    qp, qw = _tri_rule(quad_degree)
    areas, grads = tri_geometry(mesh)
    test_vals = _shape_values(test_family, qp)
    rows_loc = _local_dofs(mesh, test_family)
    cols_loc = _local_dofs(mesh, trial_family)
    T = mesh.n_triangles

    if deriv is None:
        trial_vals = _shape_values(trial_family, qp)
        ref = np.einsum("q,iq,jq->ij", qw, test_vals, trial_vals)
        local = areas[:, None, None] * ref[None, :, :]
    else:
        if trial_family != "p1":
            raise AssemblyError("derivative couplings need a piecewise-linear trial family")
        axis = {"x": 0, "y": 1}[deriv]
        tvec = test_vals @ qw  # (n_loc_test,)
        local = areas[:, None, None] * tvec[None, :, None] * grads[:, None, :, axis]

    n_t, n_c = local.shape[1], local.shape[2]
    rows = np.repeat(rows_loc, n_c, axis=1).ravel()
    cols = np.tile(cols_loc, (1, n_t)).ravel()
    shape = (family_dim(mesh, test_family), family_dim(mesh, trial_family))
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=shape).tocsr()
    mat.sum_duplicates()
    return mat


# -- 1D ------------------------------------------------------------------------


def _interval_local(mesh: Mesh1D, deriv: bool, quad_degree: int = 2) -> np.ndarray:
    """(E, 2, 2) local matrices int phi_i phi_j or int phi_i phi_j'."""
    t, w = edge_rule(quad_degree)
    vals = np.stack([1.0 - t, t])  # (2, n_q)
    h = mesh.lengths
    if not deriv:
        ref = np.einsum("q,iq,jq->ij", w, vals, vals)
        return h[:, None, None] * ref[None, :, :]
    dvals = np.array([-1.0, 1.0])
    tvec = vals @ w
    return np.ones_like(h)[:, None, None] * np.outer(tvec, dvals)[None, :, :]


def _interval_assemble(mesh: Mesh1D, local: np.ndarray, weight=None) -> sp.csr_matrix:
    if weight is not None:
        local = local * np.asarray(weight, dtype=float)[:, None, None]
    conn = mesh.elements
    rows = np.repeat(conn, 2, axis=1).ravel()
    cols = np.tile(conn, (1, 2)).ravel()
    n = mesh.n_nodes
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    return mat


def interval_mass(mesh: Mesh1D, weight=None, quad_degree: int = 2) -> sp.csr_matrix:
    """P1 mass matrix on the interval, optionally weighted per element."""
    return _interval_assemble(mesh, _interval_local(mesh, False, quad_degree), weight)


def interval_deriv(mesh: Mesh1D, weight=None, quad_degree: int = 2) -> sp.csr_matrix:
    """int phi_i phi_j' on the interval, optionally weighted per element."""
    return _interval_assemble(mesh, _interval_local(mesh, True, quad_degree), weight)
