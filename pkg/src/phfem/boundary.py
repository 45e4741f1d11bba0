"""Boundary conditions as port routing.

Every port column of an assembled model is either a prescribed input
(its signal is known in time) or a constraint (the conjugate output is
pinned to zero through a Lagrange multiplier).  Which way a given
physical condition routes depends on the control variant the model was
assembled with: a clamped edge is a set of output constraints for a
force-controlled model but a set of zero inputs for a velocity-controlled
one.

Per boundary channel the physical conditions pin:

    channel            clamped   simply_supported   free
    translation         kin            kin          dyn
    normal rotation     kin            dyn          dyn
    tangent rotation    kin            kin          dyn

("kin" pins the kinematic quantity to zero, "dyn" the dynamic one;
"forced" pins whatever the variant's inputs are, with user signals.)
The beam has only the first two channels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, SolverError
from .phcore import PHSystem, coenergy

__all__ = [
    "ConstantSignal",
    "SineSignal",
    "BCCondition",
    "BCSpec",
    "free_everywhere",
    "clamped_everywhere",
    "split_ports",
    "ConstrainedPHSystem",
    "consistent_initialize",
]


@dataclass(frozen=True)
class ConstantSignal:
    value: float = 0.0

    def __call__(self, t: float) -> float:
        return self.value


@dataclass(frozen=True)
class SineSignal:
    amplitude: float
    frequency: float  # Hz
    phase: float = 0.0

    def __call__(self, t: float) -> float:
        return self.amplitude * math.sin(2.0 * math.pi * self.frequency * t + self.phase)


_KINDS = ("free", "clamped", "simply_supported", "forced")

# pin type per channel, indexed by physical condition
_PIN_TABLE = {
    "clamped": ("kin", "kin", "kin"),
    "simply_supported": ("kin", "dyn", "kin"),
    "free": ("dyn", "dyn", "dyn"),
}

# precedence when pruning dependent constraint rows: earlier kinds keep theirs
_PRECEDENCE = {"clamped": 0, "simply_supported": 1, "forced": 2, "free": 3}


@dataclass(frozen=True)
class BCCondition:
    """Condition on one tagged boundary piece.

    ``signals`` is required for kind "forced": one callable per channel,
    giving the prescribed inputs of the model's control variant.
    """

    kind: str
    signals: tuple = ()

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown boundary condition kind {self.kind!r}")
        if self.kind == "forced" and not self.signals:
            raise ConfigError("forced boundary conditions need one signal per channel")
        for s in self.signals:
            if not callable(s):
                raise ConfigError("boundary signals must be callables of time")


@dataclass(frozen=True)
class BCSpec:
    """Map from boundary tag to condition; every model tag must be covered."""

    conditions: dict

    def condition(self, tag: int) -> BCCondition:
        try:
            return self.conditions[tag]
        except KeyError:
            raise ConfigError(f"no boundary condition for tag {tag}") from None


def free_everywhere(model) -> BCSpec:
    return BCSpec({t: BCCondition("free") for t in _model_tags(model)})


def clamped_everywhere(model) -> BCSpec:
    return BCSpec({t: BCCondition("clamped") for t in _model_tags(model)})


def _model_tags(model) -> tuple[int, ...]:
    if hasattr(model, "tags"):
        return tuple(model.tags)
    return tuple(sorted({p.tag for p in model.ports}))


@dataclass
class ConstrainedPHSystem:
    """Assembled model with its ports routed into inputs and constraints.

    G holds the kept constraint rows of B^T; ``lambda_ports`` are the
    corresponding port columns, ``dropped_ports`` the constraint rows
    pruned as linearly dependent.  ``f_ports`` index the prescribed
    inputs, aligned with ``signals``.
    """

    assembled: object
    f_ports: np.ndarray
    lambda_ports: np.ndarray
    dropped_ports: np.ndarray
    signals: tuple
    G: sp.csr_matrix

    @property
    def system(self) -> PHSystem:
        return self.assembled.system

    @property
    def n_constraints(self) -> int:
        return self.G.shape[0]

    @property
    def input_labels(self) -> tuple[str, ...]:
        labels = self.system.port_labels
        return tuple(labels[i] for i in self.f_ports)

    @property
    def multiplier_labels(self) -> tuple[str, ...]:
        labels = self.system.port_labels
        return tuple(labels[i] for i in self.lambda_ports)

    @property
    def B_f(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.system.B[:, self.f_ports])

    @property
    def B_lambda(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.system.B[:, self.lambda_ports])

    def prescribed_input(self, t: float) -> np.ndarray:
        return np.array([s(t) for s in self.signals], dtype=float)

    def full_input(self, t: float) -> np.ndarray:
        u = np.zeros(self.system.n_ports)
        u[self.f_ports] = self.prescribed_input(t)
        return u


def _prune_rows(G: np.ndarray, order: np.ndarray, rel_tol: float = 1e-10):
    """Deterministic modified Gram-Schmidt rank selection.

    Rows are visited in precedence order; a row whose residual after
    projection onto the kept rows falls below ``rel_tol`` times its own
    norm is dropped.  Returns (kept, dropped) as arrays of row indices in
    visiting order.
    """
    kept, dropped = [], []
    basis: list[np.ndarray] = []
    for idx in order:
        row = G[idx].astype(float, copy=True)
        norm0 = np.linalg.norm(row)
        if norm0 == 0.0:
            dropped.append(idx)
            continue
        for _ in range(2):  # re-orthogonalize once for robustness
            for q in basis:
                row -= (q @ row) * q
        norm = np.linalg.norm(row)
        if norm <= rel_tol * norm0:
            dropped.append(idx)
            continue
        basis.append(row / norm)
        kept.append(idx)
    return np.array(kept, dtype=int), np.array(dropped, dtype=int)


def split_ports(assembled, bc: BCSpec) -> ConstrainedPHSystem:
    """Route every port into input or constraint according to the conditions.

    The returned system satisfies: f_ports and the pre-pruning constraint
    set partition all ports; G has full row rank.
    """
    system: PHSystem = assembled.system
    channels = assembled.channels
    variant = assembled.control_variant
    ports = assembled.ports
    n_p = len(ports)
    n_ch = len(channels)
    if system.n_ports != n_ch * n_p:
        raise SolverError("port bookkeeping mismatch")

    tags = _model_tags(assembled)
    for t in tags:
        cond = bc.condition(t)
        if cond.kind == "forced" and len(cond.signals) != n_ch:
            raise ConfigError(
                f"forced condition on tag {t} needs {n_ch} signals, got {len(cond.signals)}"
            )
    extra = set(bc.conditions) - set(tags)
    if extra:
        raise ConfigError(f"boundary condition references unknown tag {sorted(extra)[0]}")

    f_idx: list[int] = []
    f_sig: list = []
    lam_idx: list[int] = []
    lam_prec: list[tuple] = []
    for c in range(n_ch):
        for k, p in enumerate(ports):
            col = c * n_p + k
            cond = bc.condition(p.tag)
            if cond.kind == "forced":
                pin = "dyn" if variant == "dynamic" else "kin"
                signal = cond.signals[c]
            else:
                pin = _PIN_TABLE[cond.kind][c]
                signal = ConstantSignal(0.0)
            # a pin matching the variant's own input quantity prescribes the
            # input; the conjugate pin constrains the output instead
            is_input = (pin == "dyn") == (variant == "dynamic")
            if is_input:
                f_idx.append(col)
                f_sig.append(signal)
            else:
                lam_idx.append(col)
                lam_prec.append((_PRECEDENCE[cond.kind], c, p.tag, k))

    if len(f_idx) + len(lam_idx) != system.n_ports:
        raise SolverError("ports not partitioned")

    lam_idx_arr = np.array(lam_idx, dtype=int)
    G_all = system.B.T.tocsr()[lam_idx_arr].toarray() if lam_idx else np.zeros((0, system.n))
    order = np.argsort(
        np.array([p for p, *_ in lam_prec] if lam_prec else []), kind="stable"
    )
    kept_local, dropped_local = _prune_rows(G_all, order)
    kept = lam_idx_arr[kept_local] if len(kept_local) else np.array([], dtype=int)
    dropped = lam_idx_arr[dropped_local] if len(dropped_local) else np.array([], dtype=int)
    G = sp.csr_matrix(G_all[kept_local]) if len(kept_local) else sp.csr_matrix((0, system.n))

    return ConstrainedPHSystem(
        assembled=assembled,
        f_ports=np.array(f_idx, dtype=int),
        lambda_ports=kept,
        dropped_ports=dropped,
        signals=tuple(f_sig),
        G=G,
    )


def consistent_initialize(csys: ConstrainedPHSystem, a0: np.ndarray) -> np.ndarray:
    """Closest state in the mass metric satisfying the output constraints.

    Minimizes (a - a0)^T M (a - a0) / 2 subject to G M^{-1} Q a = 0 and
    verifies the result; raises when the constraint Gram matrix is
    singular (redundant constraints should have been pruned) or the
    residual fails to vanish.
    """
    system = csys.system
    a0 = np.asarray(a0, dtype=float)
    if a0.shape != (system.n,):
        raise SolverError(f"state has shape {a0.shape}, expected ({system.n},)")
    if csys.n_constraints == 0:
        return a0.copy()

    e0 = coenergy(system, a0)
    r0 = csys.G @ e0
    scale0 = spla.norm(csys.G) * (np.linalg.norm(e0) + 1.0) + 1.0
    if np.linalg.norm(r0) <= 1e-12 * scale0:
        # already on the constraint manifold: projecting again would only
        # stir solver roundoff through the Schur complement
        return a0.copy()
    Gt = csys.G.T.toarray()
    Y = system.mass_solve(Gt)  # M^{-1} G^T
    Z = system.Q @ Y  # C^T = Q M^{-1} G^T
    W = system.mass_solve(Z)  # M^{-1} C^T
    S = Z.T @ W  # C M^{-1} C^T
    S = 0.5 * (S + S.T)
    try:
        mu = np.linalg.solve(S, r0)
    except np.linalg.LinAlgError:
        raise SolverError("constraint projection is rank deficient") from None
    a = a0 - W @ mu

    e = coenergy(system, a)
    res = np.linalg.norm(csys.G @ e)
    scale = spla.norm(csys.G) * (np.linalg.norm(e) + 1.0) + 1.0
    if not np.isfinite(res) or res > 1e-9 * scale:
        raise SolverError(f"constraint projection failed: residual {res:.3e}")
    return a
