import math

import numpy as np
import pytest

from nordheim import (
    DistributionState,
    KernelTensor,
    Scheme,
    SolverConfig,
    check_conservation,
    check_convergence_to_equilibrium,
    check_entropy,
    check_linf,
    check_negative_moment,
    check_non_condensation,
    discretize_equilibrium,
    entropy_floor_report,
    eta_rational,
    moment_production_report,
    negative_moment_constants,
    non_condensation_rate,
    psi_modulus,
    run,
    solve_equilibrium,
    stability_experiment,
    stability_ordering,
    state_from_function,
)

from conftest import random_state

SQRT2 = math.sqrt(2.0)


@pytest.fixture(scope="module")
def relax_traj(tensor_eta2_16, grid16_x8):
    st = state_from_function(grid16_x8, lambda x: np.exp(-x))
    cfg = SolverConfig(scheme=Scheme.EULER, t_end=1.0, sample_every=0.1)
    return run(st, tensor_eta2_16, cfg)


@pytest.fixture(scope="module")
def eq_traj(tensor_eta2_16, grid16_x8):
    st = discretize_equilibrium(solve_equilibrium(1.0, 1.0), grid16_x8)
    cfg = SolverConfig(scheme=Scheme.EULER, t_end=0.5, sample_every=0.1)
    return run(st, tensor_eta2_16, cfg)


class TestConstants:
    def test_non_condensation_rate_arithmetic(self):
        # eta=2, b0=1, N=1, q1 = 8 sqrt2: c = 8^4 (1 + 8 sqrt2)
        c = non_condensation_rate(1.0, 2.0, 8 * SQRT2, 1.0)
        assert c == pytest.approx(8.0**4 * (1.0 + 8.0 * SQRT2), rel=1e-12)

    def test_negative_moment_constants_arithmetic(self):
        # p=1/2, eta=2, b0=1, N=E=1: a = 8^2 + 8^4 = 4160, b = 8^5 (1+8 sqrt2)
        a, b = negative_moment_constants(1.0, 2.0, 8 * SQRT2, 1.0, 1.0, 0.5)
        assert a == pytest.approx(4160.0, rel=1e-12)
        assert b == pytest.approx(8.0**5 * (1.0 + 8.0 * SQRT2), rel=1e-12)


class TestConservation:
    def test_euler_run_passes(self, relax_traj):
        rep = check_conservation(relax_traj)
        assert rep.passed
        assert rep.worst_margin() > 0

    def test_equilibrium_run_passes(self, eq_traj):
        assert check_conservation(eq_traj).passed

    def test_broken_tensor_fails(self, tensor_eta2_16, grid16_x8):
        # regression fixture: destroying the symmetrization breaks the
        # relabeling cancellation and conservation must flag it
        lam = tensor_eta2_16.lam.copy()
        lam[3, 5, 9] *= 1.5
        broken = KernelTensor(tensor_eta2_16.n, tensor_eta2_16.x_max,
                              tensor_eta2_16.potential_hash,
                              tensor_eta2_16.quad, lam)
        st = random_state(grid16_x8, 20)
        cfg = SolverConfig(scheme=Scheme.EULER, t_end=0.3, sample_every=0.1)
        traj = run(st, broken, cfg)
        assert not check_conservation(traj).passed


class TestNonCondensation:
    def test_relaxation_passes(self, relax_traj, eta2_model):
        rep = check_non_condensation(relax_traj, eta2_model)
        assert rep.passed
        assert rep.constants["c"] > 0

    def test_equilibrium_trivially_passes(self, eq_traj, eta2_model):
        assert check_non_condensation(eq_traj, eta2_model).passed

    def test_constants_recomputed_from_model(self, relax_traj, eta2_model):
        rep = check_non_condensation(relax_traj, eta2_model)
        n0 = relax_traj.samples[0].N
        expect = 8.0**4 * (1.0 + 8.0 * SQRT2) * n0**2
        assert rep.constants["c"] == pytest.approx(expect, rel=1e-12)


class TestNegativeMoment:
    def test_envelope_holds(self, relax_traj, eta2_model):
        rep = check_negative_moment(relax_traj, eta2_model, 0.5)
        assert rep.passed and rep.precondition_ok

    def test_hypothesis_violation_reported(self, relax_traj):
        weak = eta_rational(1.0, 1.2)
        rep = check_negative_moment(relax_traj, weak, 0.5)  # needs eta >= 1.5
        assert not rep.precondition_ok
        assert not rep.passed

    def test_p_domain(self, relax_traj, eta2_model):
        import pytest as _pt

        from nordheim import DomainError

        with _pt.raises(DomainError):
            check_negative_moment(relax_traj, eta2_model, 0.7)


class TestLinf:
    def test_relaxation_passes(self, relax_traj, eta2_model):
        assert check_linf(relax_traj, eta2_model).passed

    def test_equilibrium_passes(self, eq_traj, eta2_model):
        assert check_linf(eq_traj, eta2_model).passed


class TestZeroState:
    def test_zero_state_run_and_linf(self, tensor_eta2_16, grid16_x8, eta2_model):
        z = DistributionState(grid16_x8, np.zeros(16))
        cfg = SolverConfig(scheme=Scheme.EULER, t_end=0.2, sample_every=0.1)
        traj = run(z, tensor_eta2_16, cfg)
        assert all(r.sup_f == 0.0 for r in traj.samples)
        assert check_linf(traj, eta2_model).passed  # 0 <= 1 throughout


class TestEntropy:
    def test_equilibrium_constant(self, eq_traj):
        rep = check_entropy(eq_traj)
        assert rep.passed
        d_vals = [r.D for r in eq_traj.samples]
        assert max(d_vals) <= 1e-8

    def test_relaxation_monotone_with_small_residual(self, relax_traj):
        rep = check_entropy(relax_traj)
        assert rep.passed
        assert rep.constants["equality_residual_rate"] < 10.0

    def test_residual_shrinks_with_dt(self, tensor_eta2_16, grid16_x8):
        st = state_from_function(grid16_x8, lambda x: np.exp(-x))
        rates = []
        for dt in (0.02, 0.01):
            cfg = SolverConfig(scheme=Scheme.EULER, dt=dt, t_end=0.4,
                               sample_every=dt)
            traj = run(st, tensor_eta2_16, cfg)
            rep = check_entropy(traj)
            s0 = traj.samples[0].S
            times = traj.times
            d = np.array([r.D for r in traj.samples])
            integral = np.trapezoid(d, times)
            rates.append(abs(traj.samples[-1].S - s0 - integral))
        assert rates[1] <= 0.65 * rates[0]


class TestConvergence:
    def test_start_at_equilibrium(self, eq_traj, tensor_eta2_16, grid16_x8):
        eq_state = discretize_equilibrium(solve_equilibrium(1.0, 1.0), grid16_x8)
        rep = check_convergence_to_equilibrium(eq_traj, eq_state)
        assert rep.passed

    def test_relaxation_decreases(self, relax_traj, grid16_x8):
        n0 = relax_traj.samples[0].N
        e0 = relax_traj.samples[0].E
        eq_state = discretize_equilibrium(solve_equilibrium(n0, e0), grid16_x8)
        rep = check_convergence_to_equilibrium(relax_traj, eq_state)
        assert rep.passed
        assert rep.constants["d_final"] < rep.constants["d0"]


class TestStability:
    def test_psi_modulus(self, grid16_x8):
        st = state_from_function(grid16_x8, lambda x: np.exp(-x))
        assert psi_modulus(st, 0.0) == 0.0
        val = psi_modulus(st, 0.04)
        tail = sum(x * f * w for x, f, w in
                   zip(grid16_x8.nodes, st.f, grid16_x8.weights) if x >= 5.0)
        assert val == pytest.approx(0.04 + 0.2 + tail, rel=1e-12)

    def test_identical_data_zero_distance(self, tensor_eta2_16, grid16_x8):
        st = state_from_function(grid16_x8, lambda x: np.exp(-x))
        cfg = SolverConfig(scheme=Scheme.DUHAMEL, t_end=0.3, sample_every=0.1)
        rep = stability_experiment(st, st, tensor_eta2_16, cfg)
        assert rep.d0 == 0.0
        assert rep.sup_d == 0.0
        assert not rep.notes

    def test_ordering(self, tensor_eta2_16, grid16_x8):
        base = state_from_function(grid16_x8, lambda x: np.exp(-x))
        cfg = SolverConfig(scheme=Scheme.DUHAMEL, t_end=0.5, sample_every=0.1)
        reports = []
        for scale in (1e-3, 1e-4):
            pert = DistributionState(grid16_x8, base.f * (1.0 + scale))
            reports.append(stability_experiment(base, pert, tensor_eta2_16, cfg))
        order = stability_ordering(reports)
        assert order.passed


class TestLongRunConvergence:
    def test_relaxation_reaches_discrete_equilibrium(self, tensor_store,
                                                     eta2_model):
        # Discrete analogue of the long-time weak-convergence statement: the
        # dynamics' fixed point is the detailed-balance state whose GRID
        # moments match the data, and both the L1 distance and the entropy
        # gap to it decay exponentially.
        from nordheim import (EnergyGrid, collision, discrete_equilibrium_state,
                              entropy, moment)

        grid = EnergyGrid(32, 10.0)
        tensor = tensor_store.get(eta2_model, grid)
        st = state_from_function(grid, lambda x: np.exp(-x))
        n0 = moment(st, 0.0)
        e0 = moment(st, 1.0)
        eq = discrete_equilibrium_state(grid, n0, e0)
        assert moment(eq, 0.0) == pytest.approx(n0, rel=1e-13)
        assert moment(eq, 1.0) == pytest.approx(e0, rel=1e-13)
        q = collision(eq, tensor)
        assert np.max(np.abs(q)) <= 1e-12 * np.max(eq.f)

        cfg = SolverConfig(scheme=Scheme.EULER, t_end=10.0, sample_every=2.0)
        traj = run(st, tensor, cfg, eq_state=eq)
        dists = [r.L1_to_eq for r in traj.samples]
        assert all(b < a for a, b in zip(dists, dists[1:]))
        assert dists[-1] <= 1e-6
        assert entropy(eq) - traj.samples[-1].S <= 1e-10
        rep = check_convergence_to_equilibrium(traj, eq)
        assert rep.passed


class TestDescriptiveReports:
    def test_moment_production(self, relax_traj):
        rep = moment_production_report(relax_traj, 3.0)
        assert rep["sup_scaled_moment"] > 0

    def test_entropy_floor(self, relax_traj):
        rep = entropy_floor_report(relax_traj, 0.2)
        assert rep["entropy_floor"] > 0
