"""Modal analysis through exact second-order reduction.

The assembled systems couple momentum blocks V and strain blocks S only
through an off-diagonal bridge K = J[V, S].  Harmonic solutions with
velocity co-state u then satisfy the reduced symmetric pencil

    Khat u = omega^2 Mhat u,
    Khat = K Ms^{-1} Qs Ms^{-1} K^T,   Mhat = Mv Qv^{-1} Mv.

Constraints enter in one of two pure ways:

* rows acting on momentum co-states only (force-controlled models):
  restrict the pencil to the null space of those rows;
* rows acting on strain co-states only (velocity-controlled models):
  the multipliers are determined, leaving a Schur-corrected stiffness
  Khat - Bhat W^{-1} Bhat^T.

Eigenvalues at or below ``rigid_tol`` times the largest one are reported
as exact zeros (rigid motions).  Reported mode shapes are momentum
snapshots (zero strain part) whose columns are orthonormal in the energy
metric: modes^T Q modes = I.  That metric is the mass matrix of the
projected first-order pencil, so orthonormality and the eigen-property
hold simultaneously to machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as dla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .boundary import ConstrainedPHSystem
from .errors import SolverError

__all__ = ["ModalResult", "modal_analysis"]


@dataclass
class ModalResult:
    """Frequencies in Hz ascending, shapes orthonormal in the energy metric.

    ``pencil_residual`` is the relative residual of the first-order
    problem (J M^{-1} Q - i omega M) v with reaction forces removed by
    least squares; ``constraint_residual`` is |G M^{-1} Q v| per mode.
    """

    frequencies_hz: np.ndarray
    modes: np.ndarray
    constraint_residual: np.ndarray
    pencil_residual: np.ndarray

    @property
    def n_modes(self) -> int:
        return len(self.frequencies_hz)

    def to_csv(self, target) -> None:
        close = False
        if isinstance(target, (str, bytes)) or hasattr(target, "__fspath__"):
            fh = open(target, "w")
            close = True
        else:
            fh = target
        try:
            fh.write("mode,frequency_hz,residual\n")
            for k in range(self.n_modes):
                fh.write(
                    f"{k},{self.frequencies_hz[k]:.17g},{self.pencil_residual[k]:.17g}\n"
                )
        finally:
            if close:
                fh.close()


def _chunked_solve(lu, rhs: np.ndarray, chunk: int = 1024) -> np.ndarray:
    out = np.empty_like(rhs, dtype=float)
    for j in range(0, rhs.shape[1], chunk):
        out[:, j : j + chunk] = lu.solve(rhs[:, j : j + chunk])
    return out


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def modal_analysis(
    csys: ConstrainedPHSystem, n_modes: int | None = None, rigid_tol: float = 1e-12
) -> ModalResult:
    """Lowest natural frequencies and shapes of a constrained model."""
    system = csys.system
    layout = system.layout
    if layout is None or layout.n_momentum == 0:
        raise SolverError("modal analysis needs a momentum/strain field split")
    vs, ss = layout.momentum_slice, layout.strain_slice

    M, Q, J = system.M, system.Q, system.J
    if M[vs, ss].nnz or Q[vs, ss].nnz:
        raise SolverError("metric couples momentum and strain blocks")
    if J[vs, vs].nnz or J[ss, ss].nnz:
        raise SolverError("interconnection is not purely momentum-strain bridged")
    Mv, Ms = M[vs, vs].tocsc(), M[ss, ss].tocsc()
    Qv, Qs = Q[vs, vs].tocsr(), Q[ss, ss].tocsr()
    K = J[vs, ss].tocsr()
    n_v = Mv.shape[0]

    lu_s = spla.splu(Ms)
    lu_qv = spla.splu(Qv.tocsc())
    X = _chunked_solve(lu_s, K.T.toarray())  # Ms^{-1} K^T
    Khat = _sym(X.T @ (Qs @ X))
    T = _chunked_solve(lu_qv, Mv.toarray())  # Qv^{-1} Mv
    Mhat = _sym(Mv @ T)

    G = csys.G
    Z = None
    if G.shape[0] == 0:
        A, Bm = Khat, Mhat
    else:
        Gv, Gs = G[:, vs], G[:, ss]
        if Gs.nnz == 0:
            Gd = Gv.toarray()
            _, svals, Vt = np.linalg.svd(Gd, full_matrices=True)
            tol = (svals[0] if len(svals) else 0.0) * max(Gd.shape) * np.finfo(float).eps
            rank = int(np.sum(svals > tol))
            Z = Vt[rank:].T
            if Z.shape[1] == 0:
                raise SolverError("constraints remove every momentum degree of freedom")
            A = _sym(Z.T @ Khat @ Z)
            Bm = _sym(Z.T @ Mhat @ Z)
        elif Gv.nnz == 0:
            Bs = csys.B_lambda[ss].toarray()
            Yb = _chunked_solve(lu_s, Qs @ _chunked_solve(lu_s, Bs))
            W = _sym(Bs.T @ Yb)
            Bhat = K @ Yb
            try:
                A = _sym(Khat - Bhat @ np.linalg.solve(W, Bhat.T))
            except np.linalg.LinAlgError:
                raise SolverError("constraint Schur complement is singular") from None
            Bm = Mhat
        else:
            raise SolverError("constraints mix momentum and strain co-states")

    lam, U = dla.eigh(A, Bm)
    lam_max = float(lam[-1]) if len(lam) else 0.0
    if lam_max <= 0.0:
        lam = np.zeros_like(lam)
    else:
        if lam[0] < -1e-8 * lam_max:
            raise SolverError(f"reduced pencil is indefinite (lambda_min = {lam[0]:.3e})")
        lam = np.where(lam <= rigid_tol * lam_max, 0.0, lam)
    omega = np.sqrt(lam)

    k = len(lam) if n_modes is None else min(int(n_modes), len(lam))
    omega = omega[:k]
    U = U[:, :k]
    u_full = Z @ U if Z is not None else U  # velocity co-state modes
    modes = np.zeros((system.n, k))
    modes[vs] = T @ u_full
    # eigh normalizes u in Mhat = Mv Qv^{-1} Mv, the mass of the reduced
    # pencil; for the stored momentum snapshots x = Qv^{-1} Mv u this is
    # literally x^T Q x = u^T Mhat u, so the columns come out orthonormal
    # in the energy metric with no extra work.  Re-orthonormalizing in the
    # plain M metric instead would mix well-separated eigenvectors (the two
    # metrics disagree whenever Qv is not a multiple of Mv) and destroy the
    # eigen-property of the high modes.

    lu_m = spla.splu(M.tocsc())
    Qb = None
    if csys.n_constraints:
        Qb, _ = np.linalg.qr(csys.B_lambda.toarray())
    c_res = np.empty(k)
    p_res = np.empty(k)
    for i in range(k):
        x = modes[:, i]
        e_x = lu_m.solve(Q @ x)
        c_res[i] = float(np.linalg.norm(G @ e_x)) if G.shape[0] else 0.0
        w = omega[i]
        # complex mode (x + i y): strain part lives in the imaginary part
        y = np.zeros(system.n)
        if w > 0.0:
            y[ss] = lu_s.solve(K.T @ u_full[:, i]) / w
        e_y = lu_m.solve(Q @ y)
        r_re = J @ e_x + w * (M @ y)
        r_im = J @ e_y - w * (M @ x)
        if Qb is not None:
            # remove reaction forces: they balance the residual exactly
            r_re = r_re - Qb @ (Qb.T @ r_re)
            r_im = r_im - Qb @ (Qb.T @ r_im)
        num = np.hypot(np.linalg.norm(r_re), np.linalg.norm(r_im))
        mv = np.hypot(np.linalg.norm(M @ x), np.linalg.norm(M @ y))
        scale = (1.0 + w) * mv + np.hypot(
            np.linalg.norm(J @ e_x), np.linalg.norm(J @ e_y)
        )
        p_res[i] = num / scale if scale else 0.0

    return ModalResult(
        frequencies_hz=omega / (2.0 * np.pi),
        modes=modes,
        constraint_residual=c_res,
        pencil_residual=p_res,
    )
