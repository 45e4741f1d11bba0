"""Implicit midpoint time integration: conservation, reversal, residuals.

The midpoint rule is exactly energy-conserving for these quadratic
Hamiltonians up to linear-solver roundoff, so drift bounds here are tight.
Forced runs must satisfy the discrete power balance step by step.
"""

import io

import numpy as np
import pytest
import scipy.sparse as sp

import phfem
from phfem.boundary import (
    BCCondition,
    BCSpec,
    ConstantSignal,
    SineSignal,
    clamped_everywhere,
    free_everywhere,
    split_ports,
)
from phfem.errors import SolverError
from phfem.integrate import (
    MidpointStepper,
    simulate,
    step_midpoint_dae,
    step_midpoint_ode,
)
from phfem.phcore import make_phsystem


def oscillator():
    M = sp.identity(2, format="csr")
    J = sp.csr_matrix(np.array([[0.0, 1.0], [-1.0, 0.0]]))
    return make_phsystem(M, M, J, sp.csr_matrix((2, 0)), [])


def clamped(plate):
    return split_ports(plate, clamped_everywhere(plate))


class TestOscillator:
    def test_one_period_energy_exact(self):
        sys2 = oscillator()
        T = 2.0 * np.pi
        dt = T / 100.0
        a = np.array([1.0, 0.0])
        H0 = phfem.hamiltonian(sys2, a)
        for k in range(100):
            a = step_midpoint_ode(sys2, a, None, k * dt, dt)
        assert abs(phfem.hamiltonian(sys2, a) - H0) <= 1e-12 * H0

    def test_midpoint_phase_accuracy(self):
        # second order: the phase error at fixed T shrinks by ~4x per halving
        sys2 = oscillator()
        T = 2.0 * np.pi
        errs = []
        for n in (50, 100, 200):
            dt = T / n
            a = np.array([1.0, 0.0])
            for k in range(n):
                a = step_midpoint_ode(sys2, a, None, k * dt, dt)
            errs.append(np.linalg.norm(a - [1.0, 0.0]))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)
        assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.1)

    def test_small_step_stays_put(self):
        sys2 = oscillator()
        a0 = np.array([0.3, -0.8])
        a1 = step_midpoint_ode(sys2, a0, None, 0.0, 1e-12)
        assert np.allclose(a1, a0, atol=1e-11)


class TestStepperValidation:
    def test_bad_dt(self):
        sys2 = oscillator()
        empty_G = sp.csr_matrix((0, 2))
        empty_B = sp.csr_matrix((2, 0))
        with pytest.raises(SolverError):
            MidpointStepper(sys2, empty_G, empty_B, 0.0)
        with pytest.raises(SolverError):
            MidpointStepper(sys2, empty_G, empty_B, np.inf)

    def test_negative_dt_allowed(self):
        sys2 = oscillator()
        MidpointStepper(sys2, sp.csr_matrix((0, 2)), sp.csr_matrix((2, 0)), -0.1)

    def test_simulate_needs_at_least_one_step(self, plate4):
        csys = clamped(plate4)
        with pytest.raises(SolverError):
            simulate(csys, np.zeros(plate4.system.n), T=1e-6, dt=1.0)


class TestConservation:
    def test_clamped_plate_energy_constant(self, plate4, rng):
        csys = clamped(plate4)
        a0 = rng.standard_normal(plate4.system.n)
        traj = simulate(csys, a0, T=200 * 1e-5, dt=1e-5)
        H = traj.hamiltonian
        assert abs(H[-1] - H[0]) <= 1e-10 * H[0]
        assert np.max(np.abs(H - H[0])) <= 1e-10 * H[0]

    def test_constraints_hold_along_trajectory(self, plate4, rng):
        csys = clamped(plate4)
        traj = simulate(csys, rng.standard_normal(plate4.system.n), T=0.001, dt=1e-5)
        assert np.max(traj.constraint_residual) <= 1e-9

    def test_multipliers_do_no_work(self, plate4, rng):
        csys = clamped(plate4)
        traj = simulate(csys, rng.standard_normal(plate4.system.n), T=0.001, dt=1e-5)
        assert abs(traj.multiplier_work) <= 1e-10 * traj.hamiltonian[0]

    def test_forced_power_balance_per_step(self, plate8):
        bc = BCSpec(
            {
                1: BCCondition(
                    "forced",
                    (ConstantSignal(0.0), SineSignal(10.0, 40.0), ConstantSignal(0.0)),
                ),
                2: BCCondition("clamped"),
                3: BCCondition("clamped"),
                4: BCCondition("clamped"),
            }
        )
        csys = split_ports(plate8, bc)
        dt = 2e-5
        traj = simulate(csys, np.zeros(plate8.system.n), T=200 * dt, dt=dt)
        assert traj.hamiltonian[-1] > 0.0  # energy actually flowed in
        # midpoint coenergy is the endpoint average, so y_mid is recoverable
        fcols = [traj.output_labels.index(l) for l in traj.input_labels]
        for k in range(traj.n_steps):
            y_mid = 0.5 * (traj.outputs[k] + traj.outputs[k + 1])[fcols]
            u_mid = csys.prescribed_input(traj.times[k] + 0.5 * dt)
            supplied = y_mid @ u_mid
            bound = 1e-10 * max(traj.hamiltonian[k + 1], abs(dt * supplied))
            assert abs(traj.power_residual[k]) <= bound

    def test_energy_balance_matches_injected_work(self, plate8):
        bc = BCSpec(
            {
                1: BCCondition(
                    "forced",
                    (SineSignal(5.0, 25.0), ConstantSignal(0.0), ConstantSignal(0.0)),
                ),
                2: BCCondition("clamped"),
                3: BCCondition("clamped"),
                4: BCCondition("clamped"),
            }
        )
        csys = split_ports(plate8, bc)
        traj = simulate(csys, np.zeros(plate8.system.n), T=0.004, dt=2e-5)
        delta = traj.hamiltonian[-1] - traj.hamiltonian[0]
        assert abs(delta - traj.injected_work) <= 1e-9 * max(
            abs(delta), abs(traj.injected_work)
        )

    def test_rigid_tilt_has_no_spurious_stiffness(self, steel, square4):
        # a rigid tilt velocity field is an equilibrium: no strain rates,
        # state and energy stay put
        plate = phfem.assemble_plate(square4, steel)
        csys = split_ports(plate, free_everywhere(plate))
        lay = plate.layout
        x = square4.nodes[:, 0]
        e = np.zeros(lay.total)
        e[lay.sl("transverse_momentum")] = x
        e[lay.sl("rotation_x_momentum")] = 1.0
        # momenta a = M e on the velocity blocks (Q a = M e defines e = velocity)
        a0 = np.zeros(lay.total)
        mu, irot = plate.rigidity.mu, plate.rigidity.I_rot
        a0[lay.sl("transverse_momentum")] = mu * x
        a0[lay.sl("rotation_x_momentum")] = irot * 1.0
        traj = simulate(csys, a0, T=100 * 1e-4, dt=1e-4, record_states=True)
        H = traj.hamiltonian
        assert np.max(np.abs(H - H[0])) <= 1e-12 * H[0]
        drift = np.max(np.abs(traj.states[-1] - a0))
        assert drift <= 1e-10 * np.max(np.abs(a0))


class TestReversal:
    def test_time_reversal_recovers_state(self, square4, rng):
        # the midpoint map with -dt inverts the +dt map; a well-scaled
        # material keeps the saddle solves from amplifying roundoff
        unit = phfem.PlateMaterial(E=1.0, nu=0.3, rho=1.0, h=0.5)
        plate = phfem.assemble_plate(square4, unit)
        csys = clamped(plate)
        a0 = phfem.consistent_initialize(csys, rng.standard_normal(plate.system.n))
        dt = 1e-3
        fwd = MidpointStepper(csys.system, csys.G, csys.B_lambda, dt)
        bwd = MidpointStepper(csys.system, csys.G, csys.B_lambda, -dt)
        zero = np.zeros(csys.system.n)
        a = a0.copy()
        for _ in range(10):
            a, _, _ = fwd.step(a, zero)
        for _ in range(10):
            a, _, _ = bwd.step(a, zero)
        assert np.max(np.abs(a - a0)) <= 1e-10 * np.max(np.abs(a0))


class TestDaeOdeAgreement:
    def test_unconstrained_dae_equals_ode(self, plate4, rng):
        csys = split_ports(plate4, free_everywhere(plate4))
        a0 = rng.standard_normal(plate4.system.n)
        dt = 1e-5
        a_dae, lam = step_midpoint_dae(csys, a0, 0.0, dt)
        assert lam.size == 0
        u = lambda t: csys.prescribed_input(t)
        a_ode = step_midpoint_ode(csys.system, a0, u, 0.0, dt)
        assert np.allclose(a_dae, a_ode, atol=1e-14 * np.max(np.abs(a_ode)))

    def test_zero_stays_zero(self, plate4):
        csys = clamped(plate4)
        traj = simulate(csys, np.zeros(plate4.system.n), T=1e-4, dt=1e-5)
        assert np.all(traj.hamiltonian == 0.0)
        assert np.max(np.abs(traj.multipliers)) == 0.0


class TestTrajectory:
    def test_point_counts(self, plate4):
        csys = clamped(plate4)
        traj = simulate(csys, np.zeros(plate4.system.n), T=10 * 1e-5, dt=1e-5)
        assert traj.n_steps == 10
        assert traj.times.shape == (11,)
        assert traj.hamiltonian.shape == (11,)
        assert traj.power_residual.shape == (10,)
        assert traj.constraint_residual.shape == (11,)

    def test_csv_format(self, plate4, rng, tmp_path):
        bc = BCSpec(
            {
                1: BCCondition("forced", (ConstantSignal(1.0),) * 3),
                2: BCCondition("clamped"),
                3: BCCondition("clamped"),
                4: BCCondition("clamped"),
            }
        )
        csys = split_ports(plate4, bc)
        traj = simulate(csys, np.zeros(plate4.system.n), T=5e-5, dt=1e-5)
        path = tmp_path / "traj.csv"
        traj.to_csv(path)
        lines = path.read_text().splitlines()
        header = lines[0].split(",")
        assert header[:4] == ["t", "H", "power_residual", "constraint_residual"]
        assert any(h.startswith("u_Qn:") for h in header)
        assert any(h.startswith("y_Qn:") for h in header)
        assert len(lines) == 1 + 6  # header + n_steps + 1 rows
        first = lines[1].split(",")
        # power residual lags one step: nothing to report at t = 0
        assert float(first[2]) == 0.0
        # %.17g keeps doubles exact through a round trip
        assert float(lines[2].split(",")[1]) == traj.hamiltonian[1]

    def test_csv_to_buffer(self, plate4):
        csys = clamped(plate4)
        traj = simulate(csys, np.zeros(plate4.system.n), T=2e-5, dt=1e-5)
        buf = io.StringIO()
        traj.to_csv(buf)
        assert buf.getvalue().startswith("t,H,power_residual,constraint_residual")
