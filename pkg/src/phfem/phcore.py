"""Finite-dimensional port-Hamiltonian containers and structure checks.

A system here is the quadruple (M, Q, J, B) with dynamics

    M da/dt = J e + B u,      M e = Q a,      y = B^T e,

Hamiltonian H(a) = a^T Q a / 2 and dissipation matrix R fixed to zero.
The losslessness identity dH/dt = y^T u holds exactly at the algebraic
level whenever J is skew, which is what `check_dirac` samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .errors import AssemblyError

__all__ = [
    "FieldLayout",
    "PHSystem",
    "make_phsystem",
    "coenergy",
    "hamiltonian",
    "power_product",
    "check_dirac",
    "DiracReport",
    "write_coordinate_matrix",
]


@dataclass(frozen=True)
class FieldLayout:
    """Named contiguous blocks of the state vector.

    ``n_momentum`` counts how many leading fields hold momenta; the
    remaining fields hold strains.  The split drives the second-order
    reduction used for modal analysis.
    """

    names: tuple[str, ...]
    sizes: tuple[int, ...]
    n_momentum: int = 0

    def __post_init__(self):
        if len(self.names) != len(self.sizes):
            raise AssemblyError("field layout names and sizes differ in length")
        if len(set(self.names)) != len(self.names):
            raise AssemblyError("field layout has duplicate names")
        if not 0 <= self.n_momentum <= len(self.names):
            raise AssemblyError("field layout momentum count out of range")

    @property
    def offsets(self) -> tuple[int, ...]:
        out, acc = [], 0
        for s in self.sizes:
            out.append(acc)
            acc += s
        return tuple(out)

    @property
    def total(self) -> int:
        return int(sum(self.sizes))

    def sl(self, name: str) -> slice:
        i = self.names.index(name)
        off = self.offsets[i]
        return slice(off, off + self.sizes[i])

    @property
    def momentum_slice(self) -> slice:
        return slice(0, int(sum(self.sizes[: self.n_momentum])))

    @property
    def strain_slice(self) -> slice:
        return slice(int(sum(self.sizes[: self.n_momentum])), self.total)

    def block_of(self, index: int) -> int:
        """Field number owning a flat state index."""
        return int(np.searchsorted(np.array(self.offsets + (self.total,)), index, "right") - 1)


def _max_abs_entry(mat: sp.spmatrix) -> tuple[float, int, int]:
    m = mat.tocoo()
    if m.nnz == 0:
        return 0.0, -1, -1
    k = int(np.argmax(np.abs(m.data)))
    return float(abs(m.data[k])), int(m.row[k]), int(m.col[k])


@dataclass
class PHSystem:
    """Validated lossless port-Hamiltonian system in matrix form."""

    M: sp.csr_matrix
    Q: sp.csr_matrix
    J: sp.csr_matrix
    B: sp.csr_matrix
    port_labels: tuple[str, ...]
    layout: FieldLayout | None = None
    R: sp.csr_matrix | None = None

    _mass_lu: spla.SuperLU | None = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.M.shape[0]

    @property
    def n_ports(self) -> int:
        return self.B.shape[1]

    def mass_solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._mass_lu is None:
            self._mass_lu = spla.splu(self.M.tocsc())
        return self._mass_lu.solve(rhs)


def _check_symmetric(mat: sp.spmatrix, name: str, tol: float) -> None:
    scale = max(_max_abs_entry(mat)[0], 1.0)
    res, i, j = _max_abs_entry((mat - mat.T).tocsr())
    if res > tol * scale:
        raise AssemblyError(
            f"{name} is not symmetric: |{name}[{i},{j}] - {name}[{j},{i}]| = {res:.3e}"
            f" exceeds {tol:.1e} * {scale:.3e}"
        )


def _check_skew(mat: sp.spmatrix, tol: float) -> None:
    scale = max(_max_abs_entry(mat)[0], 1.0)
    res, i, j = _max_abs_entry((mat + mat.T).tocsr())
    if res > tol * scale:
        raise AssemblyError(
            f"interconnection matrix is not skew-symmetric: entry ({i},{j})"
            f" violates by {res:.3e} against scale {scale:.3e}"
        )


def _field_components(mat: sp.csr_matrix, layout: FieldLayout | None):
    """Group state indices into connected components of the block sparsity.

    The mass matrix factorizes over these groups, so positive definiteness
    can be certified blockwise with small dense Cholesky factorizations.
    """
    n = mat.shape[0]
    if layout is None:
        yield np.arange(n)
        return
    offs = np.array(layout.offsets + (layout.total,))
    coo = mat.tocoo()
    rb = np.searchsorted(offs, coo.row, "right") - 1
    cb = np.searchsorted(offs, coo.col, "right") - 1
    k = len(layout.names)
    adj = np.zeros((k, k), dtype=bool)
    adj[rb, cb] = True
    adj |= adj.T | np.eye(k, dtype=bool)
    n_comp, lab = connected_components(sp.csr_matrix(adj), directed=False)
    for c in range(n_comp):
        idx = [i for i in range(k) if lab[i] == c]
        yield np.concatenate([np.arange(offs[i], offs[i + 1]) for i in idx])


def _check_spd(mat: sp.csr_matrix, name: str, layout: FieldLayout | None) -> None:
    _check_symmetric(mat, name, 1e-12)
    for idx in _field_components(mat, layout):
        sub = mat[np.ix_(idx, idx)].toarray()
        try:
            np.linalg.cholesky(sub)
        except np.linalg.LinAlgError:
            first = int(idx[0])
            raise AssemblyError(
                f"{name} block starting at index {first} is not positive definite"
            ) from None


def make_phsystem(
    M: sp.spmatrix,
    Q: sp.spmatrix,
    J: sp.spmatrix,
    B: sp.spmatrix,
    port_labels: Sequence[str],
    layout: FieldLayout | None = None,
    R: sp.spmatrix | None = None,
    tol: float = 1e-12,
) -> PHSystem:
    """Validate shapes and structure, then freeze the system.

    Raises ``AssemblyError`` naming the worst offending entry when J fails
    skew-symmetry, M fails symmetric positive definiteness, or Q fails
    symmetry.
    """
    M, Q, J, B = (sp.csr_matrix(A) for A in (M, Q, J, B))
    n = M.shape[0]
    for name, A in (("M", M), ("Q", Q), ("J", J)):
        if A.shape != (n, n):
            raise AssemblyError(f"{name} has shape {A.shape}, expected {(n, n)}")
    if B.shape[0] != n:
        raise AssemblyError(f"B has {B.shape[0]} rows, expected {n}")
    labels = tuple(port_labels)
    if len(labels) != B.shape[1]:
        raise AssemblyError(f"{len(labels)} port labels for {B.shape[1]} port columns")
    if layout is not None and layout.total != n:
        raise AssemblyError(f"layout covers {layout.total} dofs, system has {n}")

    _check_skew(J, tol)
    _check_spd(M, "M", layout)
    _check_symmetric(Q, "Q", tol)
    if R is None:
        R = sp.csr_matrix((n, n))
    else:
        R = sp.csr_matrix(R)
        if R.shape != (n, n):
            raise AssemblyError(f"R has shape {R.shape}, expected {(n, n)}")
        _check_symmetric(R, "R", tol)
    return PHSystem(M=M, Q=Q, J=J, B=B, port_labels=labels, layout=layout, R=R)


def coenergy(system: PHSystem, a: np.ndarray) -> np.ndarray:
    """Co-state e solving M e = Q a (factorization cached on the system)."""
    a = np.asarray(a, dtype=float)
    return system.mass_solve(system.Q @ a)


def hamiltonian(system: PHSystem, a: np.ndarray) -> float:
    a = np.asarray(a, dtype=float)
    return 0.5 * float(a @ (system.Q @ a))


def power_product(e: np.ndarray, f: np.ndarray) -> float:
    """Duality pairing <e, f>; the discrete metric lives in the matrices."""
    return float(np.asarray(e) @ np.asarray(f))


@dataclass(frozen=True)
class DiracReport:
    """Outcome of randomized structure sampling."""

    ok: bool
    max_residual: float
    tol: float
    n_samples: int
    witness: tuple[int, int] | None = None

    def __bool__(self) -> bool:
        return self.ok


def check_dirac(
    system: PHSystem, n_samples: int = 100, tol: float = 1e-12, seed: int = 0
) -> DiracReport:
    """Sample the defining bilinear identity of the structure.

    Draws pairs (e_i, u_i), forms f_i = J e_i + B u_i and y_i = B^T e_i,
    and checks  e_a.f_b + e_b.f_a - y_a.u_b - y_b.u_a = 0  for consecutive
    and self pairs, normalized by the norms of the participating vectors.
    """
    rng = np.random.default_rng(seed)
    n, m = system.n, system.n_ports
    es = rng.standard_normal((n_samples, n))
    us = rng.standard_normal((n_samples, m))
    fs = np.array([system.J @ e + system.B @ u for e, u in zip(es, us)])
    ys = np.array([system.B.T @ e for e in es]).reshape(n_samples, m)

    worst, witness = 0.0, None
    pairs = [(i, i) for i in range(n_samples)]
    pairs += [(i, (i + 1) % n_samples) for i in range(n_samples)]
    for a, b in pairs:
        val = abs(es[a] @ fs[b] + es[b] @ fs[a] - ys[a] @ us[b] - ys[b] @ us[a])
        scale = (
            np.linalg.norm(es[a]) * np.linalg.norm(fs[b])
            + np.linalg.norm(es[b]) * np.linalg.norm(fs[a])
            + np.linalg.norm(ys[a]) * np.linalg.norm(us[b])
            + np.linalg.norm(ys[b]) * np.linalg.norm(us[a])
            + 1.0
        )
        rel = val / scale
        if rel > worst:
            worst, witness = rel, (a, b)
    return DiracReport(
        ok=worst <= tol, max_residual=worst, tol=tol, n_samples=n_samples, witness=witness
    )


def write_coordinate_matrix(mat: sp.spmatrix, path) -> None:
    """Dump stored entries as '<row> <col> <value>' lines, 0-based, sorted."""
    coo = sp.coo_matrix(mat)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        fh.write(f"# shape {coo.shape[0]} {coo.shape[1]} nnz {coo.nnz}\n")
        for k in order:
            fh.write(f"{coo.row[k]} {coo.col[k]} {coo.data[k]:.17g}\n")
