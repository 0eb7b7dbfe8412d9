"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines; every tolerance is pinned here, nothing is deferred.
"""

import math
import time

import numpy as np
import pytest

from nordheim import (
    DistributionState,
    EnergyGrid,
    Scheme,
    SolverConfig,
    check_entropy,
    check_linf,
    check_negative_moment,
    check_non_condensation,
    collision,
    discretize_equilibrium,
    gain,
    loss_rate,
    moment,
    run,
    solve_equilibrium,
    state_from_function,
    stability_experiment,
    stability_ordering,
    temperature_ratio,
    verify_kernel_inequalities,
    w_hard_sphere,
    w_point_many,
    zeta,
)
from nordheim.cli import SCENARIOS, initial_state, parse_config
from nordheim.verification import negative_moment_constants

from conftest import naive_rates, random_state

SQRT2 = math.sqrt(2.0)


def _report(num, text):
    print(f"[criterion {num:2d}] PASS - {text}")


@pytest.fixture(scope="module")
def grid96_x48():
    return EnergyGrid(96, 4.8)


@pytest.fixture(scope="module")
def grid96_x12():
    return EnergyGrid(96, 1.2)


@pytest.fixture(scope="module")
def tensor_hs_96_x48(tensor_store, hs_model, grid96_x48):
    return tensor_store.get(hs_model, grid96_x48)


@pytest.fixture(scope="module")
def tensor_eta2_96_x12(tensor_store, eta2_model, grid96_x12):
    return tensor_store.get(eta2_model, grid96_x12)


def normalized_exponential(grid):
    """Exponential-shape data with discrete N = E = 1 to rounding."""

    def discrete_ratio(theta):
        f = np.exp(-grid.nodes / theta)
        w = grid.weights
        return float(np.sum(grid.nodes * f * w) / np.sum(f * w))

    lo, hi = 0.1, 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if discrete_ratio(mid) < 1.0:
            lo = mid
        else:
            hi = mid
    theta = 0.5 * (lo + hi)
    f = np.exp(-grid.nodes / theta)
    f /= np.sum(f * grid.weights)
    return DistributionState(grid, f)


class TestCriterion1HardSphereOracle:
    def test_quadrature_matches_closed_form(self, hs_model):
        rng = np.random.default_rng(42)
        triples = rng.uniform(1e-3, 4.0, size=(10_000, 3))
        w_point_many(hs_model, triples[:4])  # warm the jit outside the clock
        t0 = time.perf_counter()
        quad_vals = w_point_many(hs_model, triples)
        elapsed = time.perf_counter() - t0
        worst = 0.0
        for (x, y, z), wq in zip(triples, quad_vals):
            wh = w_hard_sphere(x, y, z)
            if wh > 0.0:
                worst = max(worst, abs(wq - wh) / wh)
            else:
                assert wq == 0.0
        assert worst <= 1e-10
        assert elapsed < 5.0
        _report(1, f"hard-sphere W oracle: worst rel {worst:.2e} over 1e4 "
                   f"triples in {elapsed:.2f}s")


class TestCriterion2KernelInequalitySuite:
    def test_inequality_sweep_zero_violations(self, eta2_model):
        rng = np.random.default_rng(7)
        interior = np.sort(rng.uniform(1e-3, 4.0, size=(6000, 3)), axis=1)
        x0 = np.column_stack([np.zeros(1500), *rng.uniform(1e-3, 4.0, (2, 1500))])
        x0[:, 1:] = np.sort(x0[:, 1:], axis=1)
        xz = np.sort(rng.uniform(1e-3, 4.0, size=(1250, 2)), axis=1)
        y0 = np.column_stack([xz[:, 0], np.zeros(1250), xz[:, 1]])
        xy = np.sort(rng.uniform(1e-3, 4.0, size=(1250, 2)), axis=1)
        z0 = np.column_stack([xy[:, 0], xy[:, 1], np.zeros(1250)])
        samples = np.vstack([interior, x0, y0, z0])
        assert samples.shape[0] == 10_000
        report = verify_kernel_inequalities(eta2_model, samples, seed=11,
                                            angle_draws=2, q1=8 * SQRT2)
        assert report.ok, report.violations[:5]
        _report(2, f"kernel inequality suite W01-W05, Ystar: {report.checked} checks, "
                   "zero violations at 1e-6 slack")


class TestCriterion3ExactConservation:
    def test_pointwise_and_run_conservation(self, tensor_eta2_96, grid96_x16):
        w = grid96_x16.weights
        x = grid96_x16.nodes
        worst = 0.0
        for seed in range(5):
            st = random_state(grid96_x16, seed)
            q = collision(st, tensor_eta2_96)
            den = np.sum(np.abs(q) * w) + np.sum(x * np.abs(q) * w)
            worst = max(worst, abs(np.sum(q * w)) / den,
                        abs(np.sum(x * q * w)) / den)
        assert worst <= 1e-13

        st = random_state(grid96_x16, 99)
        cfg = SolverConfig(scheme=Scheme.EULER, t_end=5.0, sample_every=1.0)
        traj = run(st, tensor_eta2_96, cfg)
        n_drift = abs(traj.samples[-1].N - traj.samples[0].N) / traj.samples[0].N
        e_drift = abs(traj.samples[-1].E - traj.samples[0].E) / traj.samples[0].E
        assert n_drift <= 1e-10 and e_drift <= 1e-10
        assert traj.clipped_mass_total == 0.0
        _report(3, f"conservation: pointwise rel {worst:.1e}; Euler run to t=5 "
                   f"({traj.n_steps} steps) drift N {n_drift:.1e}, E {e_drift:.1e}")


class TestCriterion4FixedPointAndHTheorem:
    def test_equilibrium_fixed_point(self, tensor_eta2_96, grid96_x16):
        eq = solve_equilibrium(1.0, 1.0)
        st = discretize_equilibrium(eq, grid96_x16)
        q = collision(st, tensor_eta2_96)
        ratio = np.max(np.abs(q)) / np.max(st.f)
        assert ratio <= 1e-10
        _report(4, f"Bose-Einstein fixed point: max|Q|/max f = {ratio:.1e}")

    def test_entropy_monotone_and_equality_first_order(self, tensor_eta2_16,
                                                       grid16_x8):
        st = state_from_function(grid16_x8, lambda x: np.exp(-x))
        residuals = []
        for dt in (0.02, 0.01):
            cfg = SolverConfig(scheme=Scheme.EULER, dt=dt, t_end=0.5,
                               sample_every=dt)
            traj = run(st, tensor_eta2_16, cfg)
            rep = check_entropy(traj, rel_tol=1e-9)
            assert rep.passed  # S nondecreasing within 1e-9 relative per step
            s0 = traj.samples[0].S
            d = np.array([r.D for r in traj.samples])
            integral = np.trapezoid(d, traj.times)
            residuals.append(abs(traj.samples[-1].S - s0 - integral))
        assert residuals[1] <= 0.65 * residuals[0]
        _report(4, "H-theorem: S nondecreasing; entropy-equality residual "
                   f"{residuals[0]:.2e} -> {residuals[1]:.2e} under dt halving")


class TestCriterion5NegativeMomentEnvelope:
    def test_constants_and_envelope(self, tensor_eta2_96, grid96_x16, eta2_model):
        a, b = negative_moment_constants(1.0, 2.0, 8 * SQRT2, 1.0, 1.0, 0.5)
        assert a == pytest.approx(4160.0, rel=1e-12)
        assert b == pytest.approx(8.0**5 * (1.0 + 8.0 * SQRT2), rel=1e-12)

        st = normalized_exponential(grid96_x16)
        assert moment(st, 0.0) == pytest.approx(1.0, rel=1e-12)
        assert moment(st, 1.0) == pytest.approx(1.0, rel=1e-12)
        cfg = SolverConfig(scheme=Scheme.EULER, t_end=1.0, sample_every=0.1)
        traj = run(st, tensor_eta2_96, cfg)
        rep = check_negative_moment(traj, eta2_model, 0.5)
        assert rep.passed and rep.precondition_ok
        assert rep.constants["a"] == pytest.approx(4160.0, rel=1e-10)
        assert rep.constants["b"] == pytest.approx(b, rel=1e-10)
        _report(5, f"negative-moment envelope holds; a={rep.constants['a']:.6g}, "
                   f"b={rep.constants['b']:.6g} from the closed forms")


class TestCriterion6NonCondensationEnvelope:
    def test_low_temperature_run(self, tensor_eta2_96_x12, grid96_x12, eta2_model):
        t0 = time.perf_counter()
        cfg_txt = SCENARIOS["low_T_no_condensation"]
        cfg = parse_config(cfg_txt)
        st = initial_state(cfg, grid96_x12)
        ratio = temperature_ratio(moment(st, 0.0), moment(st, 1.0))
        assert ratio == pytest.approx(0.7, abs=0.05)
        traj = run(st, tensor_eta2_96_x12, cfg.solver,
                   eps_list=cfg.eps_list, p_list=cfg.p_list)
        rep = check_non_condensation(traj, eta2_model)
        assert rep.passed
        # eps = 1e-2 resolves on this grid and must be non-vacuous
        assert traj.samples[0].I_eps[0] > 0.0
        # eps = 1e-3 sits below the first midpoint node: identically zero
        assert all(r.I_eps[1] == 0.0 for r in traj.samples)
        elapsed = time.perf_counter() - t0
        assert elapsed < 120.0
        _report(6, f"low-T (ratio {ratio:.3f}) run on [0,2]: I_eps within the "
                   f"e^(ct)+slack envelope, monotone in eps, {elapsed:.1f}s")


class TestCriterion7LinfBound:
    @pytest.mark.parametrize("name", sorted(SCENARIOS))
    def test_every_scenario(self, name, tensor_store, request):
        cfg = parse_config(SCENARIOS[name])
        grid = cfg.grid()
        tensor = tensor_store.get(cfg.potential, grid, cfg.quad)
        st = initial_state(cfg, grid)
        traj = run(st, tensor, cfg.solver, eps_list=cfg.eps_list,
                   p_list=cfg.p_list)
        rep = check_linf(traj, cfg.potential)
        assert rep.passed
        _report(7, f"L-infinity bound holds along scenario {name}")


class TestCriterion8LossBounds:
    def test_per_node_and_integral_bounds(self, tensor_eta2_96, grid96_x16,
                                          tensor_hs_96_x48, grid96_x48):
        cases = [(tensor_eta2_96, grid96_x16, 1.0),
                 (tensor_hs_96_x48, grid96_x48, 0.5)]
        for tensor, grid, b0 in cases:
            for seed in range(3):
                st = random_state(grid, seed)
                l = loss_rate(st, tensor)
                g = gain(st, tensor)
                n0 = moment(st, 0.0)
                m_half = moment(st, 0.5)
                m_neg = moment(st, -0.5)
                bound = 4.0 * b0**2 * (np.sqrt(grid.nodes) * n0 + m_half
                                       + 2.0 * m_neg**2)
                assert np.all(l <= bound * (1.0 + 1e-6))
                total = float(np.sum((g + st.f * l) * grid.weights))
                qf_bound = 16.0 * b0**2 * (m_half * m_neg + m_neg**3)
                assert total <= qf_bound * (1.0 + 1e-6)
        _report(8, "per-node loss bound and gain+loss integral bound hold on "
                   "random states (eta=2 and hard-sphere kernels)")


class TestCriterion9OracleEquivalence:
    def test_naive_triple_loop_match(self, tensor_store, eta2_model):
        count = 0
        for n, x_max, n_states in ((8, 4.0, 50), (16, 8.0, 50)):
            grid = EnergyGrid(n, x_max)
            tensor = tensor_store.get(eta2_model, grid)
            for seed in range(n_states):
                st = random_state(grid, seed)
                g_fast = gain(st, tensor)
                l_fast = loss_rate(st, tensor)
                g_ref, l_ref = naive_rates(tensor.lam, st.f, grid)
                np.testing.assert_allclose(g_fast, g_ref, rtol=1e-12, atol=1e-300)
                np.testing.assert_allclose(l_fast, l_ref, rtol=1e-12, atol=1e-300)
                np.testing.assert_allclose(collision(st, tensor),
                                           g_ref - st.f * l_ref,
                                           rtol=1e-11, atol=1e-13)
                count += 1
        _report(9, f"vectorized gain/loss/collision match the naive triple "
                   f"loop to 1e-12 on {count} random states (n <= 16)")


class TestCriterion10TwoBumpExample:
    def test_density_reaches_sum_cell(self, tensor_hs_96_x48, grid96_x48):
        cfg = parse_config(SCENARIOS["two_bump_example"])
        st = initial_state(cfg, grid96_x48)
        traj = run(st, tensor_hs_96_x48, cfg.solver, eps_list=cfg.eps_list,
                   p_list=cfg.p_list)
        i3 = grid96_x48.cell_index(3.0)
        assert traj.states[0].f[i3] == 0.0
        vals = {rec.t: state.f[i3]
                for rec, state in zip(traj.samples, traj.states)}
        at_half = vals[0.5]
        assert at_half >= 1e-6
        assert all(v > 0.0 for t, v in vals.items() if t >= 0.5)
        _report(10, f"two-bump scenario: f at the x=3 cell reaches "
                    f"{at_half:.3e} by t=0.5 and stays positive")


class TestCriterion11StabilityMonotonicity:
    def test_paired_perturbations(self, tensor_store, eta2_model):
        cfg = parse_config(SCENARIOS["stability_pair"])
        grid = cfg.grid()
        tensor = tensor_store.get(eta2_model, grid)
        base = initial_state(cfg, grid)
        from nordheim import norm_k

        base_norm = norm_k(base, 1.0)
        reports = []
        for d0_target in (1e-3, 1e-4):
            pert = DistributionState(grid, base.f * (1.0 + d0_target / base_norm))
            rep = stability_experiment(base, pert, tensor, cfg.solver)
            assert rep.d0 == pytest.approx(d0_target, rel=1e-10)
            reports.append(rep)
        order = stability_ordering(reports, slack=0.05)
        assert order.passed

        same = stability_experiment(base, base, tensor, cfg.solver)
        assert same.sup_d == 0.0
        _report(11, f"stability: sup_t d ordered (1e-3 -> {reports[0].sup_d:.2e},"
                    f" 1e-4 -> {reports[1].sup_d:.2e}); identical data stay at 0")


class TestCriterion12EquilibriumSolver:
    def test_targets_branch_and_zeta(self):
        def zeta_oracle(s, terms=2_000_000):
            m = np.arange(1, terms + 1, dtype=float)
            return float(np.sum(m**-s)) + (terms + 0.5) ** (1 - s) / (s - 1)

        assert zeta(1.5) == pytest.approx(2.612375, abs=1e-6)
        assert zeta(2.5) == pytest.approx(1.341487, abs=1e-6)
        assert zeta(1.5) == pytest.approx(zeta_oracle(1.5), abs=1e-8)
        assert zeta(2.5) == pytest.approx(zeta_oracle(2.5), abs=1e-10)

        e_crit = 3.0 * zeta(2.5) / ((2 * math.pi) ** (1 / 3) * zeta(1.5) ** (5 / 3))
        for n_t, e_t in [(1.0, 1.0), (0.5, 3.0), (1.0, 0.3), (2.0, 0.9),
                         (1.0, 0.999 * e_crit), (1.0, 1.001 * e_crit)]:
            eq = solve_equilibrium(n_t, e_t)
            assert eq.residual_N <= 1e-10
            assert eq.residual_E <= 1e-10
            ratio = temperature_ratio(n_t, e_t)
            if ratio <= 1.0:
                assert eq.A == 1.0 and eq.n0 >= 0.0
            else:
                assert eq.n0 == 0.0
        _report(12, "equilibrium solver: residuals <= 1e-10, branch switch at "
                    "ratio = 1, zeta values match the series oracle")
