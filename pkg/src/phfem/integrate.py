"""Implicit midpoint integration of the constrained systems.

One monolithic sparse solve per step in the unknowns (a_next, e_mid,
lambda):

    [ M        -dt J      -dt B_l ] [a_next]   [ M a + dt B_f f(t_mid) ]
    [ -Q/2      M          0      ] [e_mid ] = [ Q a / 2               ]
    [ 0         G          0      ] [lambda]   [ 0                     ]

The midpoint co-state satisfies M e_mid = Q (a + a_next)/2 exactly, so
the discrete energy balance

    H(a_next) - H(a) = dt * y_mid . u_mid + dt * lambda . (G e_mid)

holds to round-off, with the multiplier term vanishing on the constraint
manifold.  The factorization is reused across steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .boundary import ConstrainedPHSystem, consistent_initialize
from .errors import SolverError
from .phcore import PHSystem, coenergy, hamiltonian

__all__ = ["Trajectory", "MidpointStepper", "step_midpoint_ode", "step_midpoint_dae", "simulate"]


@dataclass
class Trajectory:
    """Sampled results of one run.

    power_residual[k] is the defect of the discrete energy balance over
    step k (length n_steps); constraint_residual[k] = |G e(t_k)|;
    outputs carries y = B^T e at every port, inputs only the prescribed
    ports.  ``states`` may be None when state recording was switched off.
    """

    times: np.ndarray
    hamiltonian: np.ndarray
    inputs: np.ndarray
    outputs: np.ndarray
    power_residual: np.ndarray
    constraint_residual: np.ndarray
    multipliers: np.ndarray
    input_labels: tuple[str, ...]
    output_labels: tuple[str, ...]
    multiplier_labels: tuple[str, ...]
    states: np.ndarray | None = None
    injected_work: float = 0.0
    multiplier_work: float = 0.0

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    def to_csv(self, target) -> None:
        """Write one row per sample; residual columns lag by one step."""
        close = False
        if isinstance(target, (str, bytes)) or hasattr(target, "__fspath__"):
            fh = open(target, "w")
            close = True
        else:
            fh = target
        try:
            cols = ["t", "H", "power_residual", "constraint_residual"]
            cols += [f"u_{l}" for l in self.input_labels]
            cols += [f"y_{l}" for l in self.output_labels]
            fh.write(",".join(cols) + "\n")
            for k, t in enumerate(self.times):
                row = [t, self.hamiltonian[k]]
                row.append(self.power_residual[k - 1] if k > 0 else 0.0)
                row.append(self.constraint_residual[k])
                row.extend(self.inputs[k])
                row.extend(self.outputs[k])
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
        finally:
            if close:
                fh.close()


class MidpointStepper:
    """Factored midpoint update for a fixed system and step size."""

    def __init__(self, system: PHSystem, G: sp.spmatrix, B_lambda: sp.spmatrix, dt: float):
        # negative steps are legitimate: the midpoint map is time-symmetric
        # and stepping with -dt inverts a +dt step exactly
        if dt == 0.0 or not np.isfinite(dt):
            raise SolverError(f"step size must be nonzero and finite, got {dt}")
        n = system.n
        G = sp.csr_matrix(G)
        B_lambda = sp.csr_matrix(B_lambda)
        m_l = G.shape[0]
        if B_lambda.shape != (n, m_l):
            raise SolverError("constraint input map does not match constraint rows")
        self.system = system
        self.dt = dt
        self.n = n
        self.m_lambda = m_l
        if m_l:
            grid = [
                [system.M, -dt * system.J, -dt * B_lambda],
                [-0.5 * system.Q, system.M, None],
                [None, G, None],
            ]
        else:
            grid = [[system.M, -dt * system.J], [-0.5 * system.Q, system.M]]
        self.lu = spla.splu(sp.bmat(grid, format="csc"))

    def step(self, a: np.ndarray, forcing: np.ndarray):
        """Advance one step; ``forcing`` is B_f f(t_mid) already mapped to states.

        Returns (a_next, e_mid, lam).
        """
        rhs = np.concatenate(
            [
                self.system.M @ a + self.dt * forcing,
                0.5 * (self.system.Q @ a),
                np.zeros(self.m_lambda),
            ]
        )
        sol = self.lu.solve(rhs)
        a_next = sol[: self.n]
        e_mid = sol[self.n : 2 * self.n]
        lam = sol[2 * self.n :]
        return a_next, e_mid, lam


def step_midpoint_ode(system: PHSystem, a: np.ndarray, u, t: float, dt: float) -> np.ndarray:
    """Single unconstrained midpoint step; u maps time to the full input vector.

    Convenience wrapper that factors per call; use `simulate` for runs.
    """
    stepper = MidpointStepper(
        system, sp.csr_matrix((0, system.n)), sp.csr_matrix((system.n, 0)), dt
    )
    u_mid = np.zeros(system.n_ports) if u is None else np.asarray(u(t + 0.5 * dt), dtype=float)
    a_next, _, _ = stepper.step(np.asarray(a, dtype=float), system.B @ u_mid)
    return a_next


def step_midpoint_dae(csys: ConstrainedPHSystem, a: np.ndarray, t: float, dt: float):
    """Single constrained midpoint step; returns (a_next, lam)."""
    stepper = MidpointStepper(csys.system, csys.G, csys.B_lambda, dt)
    f_mid = csys.B_f @ csys.prescribed_input(t + 0.5 * dt)
    a_next, _, lam = stepper.step(np.asarray(a, dtype=float), f_mid)
    return a_next, lam


def simulate(
    csys: ConstrainedPHSystem,
    a0: np.ndarray,
    T: float,
    dt: float,
    record_states: bool = False,
) -> Trajectory:
    """Integrate from a consistent projection of a0 over [0, T].

    The step count is round(T/dt); the trajectory holds n_steps + 1
    samples.  Raises on non-finite states, naming the failing step.
    """
    system = csys.system
    n_steps = int(round(T / dt))
    if n_steps <= 0:
        raise SolverError(f"horizon {T} too short for step size {dt}")
    times = dt * np.arange(n_steps + 1)

    a = consistent_initialize(csys, a0)
    stepper = MidpointStepper(system, csys.G, csys.B_lambda, dt)
    Bf = csys.B_f
    m = system.n_ports

    H = np.empty(n_steps + 1)
    inputs = np.empty((n_steps + 1, len(csys.f_ports)))
    outputs = np.empty((n_steps + 1, m))
    ce_res = np.empty(n_steps + 1)
    p_res = np.empty(n_steps)
    lams = np.empty((n_steps, csys.n_constraints))
    states = np.empty((n_steps + 1, system.n)) if record_states else None

    def sample(k, a_k):
        e = coenergy(system, a_k)
        H[k] = hamiltonian(system, a_k)
        inputs[k] = csys.prescribed_input(times[k])
        outputs[k] = system.B.T @ e
        ce_res[k] = np.linalg.norm(csys.G @ e) if csys.n_constraints else 0.0
        if states is not None:
            states[k] = a_k

    sample(0, a)
    work = 0.0
    lam_work = 0.0
    for k in range(n_steps):
        t_mid = times[k] + 0.5 * dt
        f_mid = csys.prescribed_input(t_mid)
        a_next, e_mid, lam = stepper.step(a, Bf @ f_mid)
        if not np.all(np.isfinite(a_next)):
            raise SolverError(f"non-finite state at step {k + 1}")
        y_mid = system.B.T @ e_mid
        supplied = float(y_mid[csys.f_ports] @ f_mid)
        p_res[k] = (
            hamiltonian(system, a_next) - hamiltonian(system, a) - dt * supplied
        )
        work += dt * supplied
        if csys.n_constraints:
            lam_work += dt * float(lam @ (csys.G @ e_mid))
        lams[k] = lam
        a = a_next
        sample(k + 1, a)

    return Trajectory(
        times=times,
        hamiltonian=H,
        inputs=inputs,
        outputs=outputs,
        power_residual=p_res,
        constraint_residual=ce_res,
        multipliers=lams,
        input_labels=csys.input_labels,
        output_labels=system.port_labels,
        multiplier_labels=csys.multiplier_labels,
        states=states,
        injected_work=work,
        multiplier_work=lam_work,
    )
