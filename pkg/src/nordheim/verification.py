"""Trajectory-level monitors for the quantitative bounds.

Each monitor recomputes its constants from (b0, eta, q1) and the trajectory's
initial mass and energy, evaluates the bound at every sample, and reports a
BoundReport.  The exponential envelopes (non-condensation, negative moments)
overflow float64 within fractions of a time unit at desk scale, so those
comparisons run in log space; the stored bound is +inf once it saturates.
Monitors are pure functions of a trajectory and reproduce bit-for-bit from a
saved one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, GridMismatchError
from .measure import DistributionState, l1_distance, moment
from .potentials import PotentialModel, compute_q1
from .solver import Scheme, SolverConfig, Trajectory, run

_LOG_MAX = 700.0


@dataclass(frozen=True)
class BoundSample:
    t: float
    observed: float
    bound: float
    margin: float


@dataclass
class BoundReport:
    name: str
    passed: bool
    samples: list[BoundSample] = field(default_factory=list)
    constants: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    precondition_ok: bool = True

    def worst_margin(self) -> float:
        return min((s.margin for s in self.samples), default=math.inf)


# ---------------------------------------------------------------------------
# Closed-form constants
# ---------------------------------------------------------------------------


def non_condensation_rate(b0: float, eta: float, q1: float, N: float) -> float:
    """Gronwall rate c = 8^(2+eta) b0^2 (1 + q1) N^2 of the origin-mass bound."""
    return 8.0 ** (2.0 + eta) * b0**2 * (1.0 + q1) * N**2


def non_condensation_slack_coefficient(b0: float, eta: float, N: float,
                                       eps: float) -> float:
    """Finite-eps remainder rate: 4 sqrt2 b0^2 N^2 sqrt(eps) + 8^(1+eta) b0^2 eps N^2.

    The sqrt(eps) term is the quadratic-collision contribution against the
    indicator test function; the eps term collects the region estimates of the
    cubic part at positive distance from the origin.
    """
    return (4.0 * math.sqrt(2.0) * b0**2 * N**2 * math.sqrt(eps)
            + 8.0 ** (1.0 + eta) * b0**2 * eps * N**2)


def negative_moment_constants(b0: float, eta: float, q1: float, N: float,
                              E: float, p: float) -> tuple[float, float]:
    """(a, b) of the envelope M_{-p}(t) <= (a t + M_{-p}(0)) e^{b t}."""
    a = (8.0**2 * b0**2 * N ** (1.5 + p) * E ** (0.5 - p)
         + 8.0 ** (2.0 + eta) * b0**2 * N**3)
    b = 8.0 ** (3.0 + eta) * b0**2 * N**2 * (1.0 + q1)
    return a, b


def _safe_exp(log_value: float) -> float:
    return math.inf if log_value > _LOG_MAX else math.exp(log_value)


# ---------------------------------------------------------------------------
# Monitors
# ---------------------------------------------------------------------------


def check_conservation(traj: Trajectory, rel_tol: float = 1e-10) -> BoundReport:
    """Mass and energy drift against the initial values.

    Euler trajectories must hold rel_tol at every sample; the Duhamel stepper
    is first-order in conservation, so it gets 1e-6 per unit time instead.
    """
    n0 = traj.samples[0].N
    e0 = traj.samples[0].E
    duhamel = traj.config.scheme is Scheme.DUHAMEL
    report = BoundReport("conservation", True,
                         constants={"N0": n0, "E0": e0, "rel_tol": rel_tol})
    dt_eff = traj.dt_effective()
    for rec in traj.samples:
        drift = max(abs(rec.N - n0) / n0 if n0 else 0.0,
                    abs(rec.E - e0) / e0 if e0 else 0.0)
        tol = 1e-6 * max(rec.t, dt_eff) if duhamel else rel_tol
        report.samples.append(BoundSample(rec.t, drift, tol, tol - drift))
        if drift > tol:
            report.passed = False
    return report


def check_non_condensation(traj: Trajectory, model: PotentialModel,
                           eps_list=None, tolerance: float = 1e-6) -> BoundReport:
    """Condensate-indicator envelope I_eps(t) <= e^{ct} I_eps(0) + slack.

    c is the origin-mass Gronwall rate; slack collects the finite-eps
    remainders and is proportional to t e^{ct}.  Additionally requires the
    indicator to be nonincreasing as eps shrinks at every sample (the
    no-condensation signal).
    """
    q1 = compute_q1(model)
    n0 = traj.samples[0].N
    c = non_condensation_rate(model.b0, model.eta, q1, n0)
    if eps_list is None:
        eps_list = traj.eps_list
    idx = [traj.eps_list.index(e) for e in eps_list]
    report = BoundReport("non_condensation", True, constants={
        "c": c, "b0": model.b0, "eta": model.eta, "q1": q1, "N": n0,
        "eps_list": tuple(eps_list),
    })
    for e_pos, eps in zip(idx, eps_list):
        slack = non_condensation_slack_coefficient(model.b0, model.eta, n0, eps)
        i0 = traj.samples[0].I_eps[e_pos]
        for rec in traj.samples:
            obs = rec.I_eps[e_pos]
            inner = i0 + slack * rec.t
            log_bound = c * rec.t + (math.log(inner) if inner > 0 else -math.inf)
            bound = _safe_exp(log_bound)
            ok = obs == 0.0 or (inner > 0 and
                                math.log(obs) <= log_bound + math.log1p(tolerance))
            report.samples.append(BoundSample(rec.t, obs, bound, bound - obs))
            if not ok:
                report.passed = False
    order = np.argsort(eps_list)
    for rec in traj.samples:
        vals = [rec.I_eps[idx[int(o)]] for o in order]
        for smaller, larger in zip(vals, vals[1:]):
            if smaller > larger * (1.0 + 1e-12) + 1e-300:
                report.passed = False
                report.notes.append(
                    f"indicator not monotone in eps at t={rec.t:.6g}")
    return report


def check_negative_moment(traj: Trajectory, model: PotentialModel, p: float,
                          tolerance: float = 1e-6) -> BoundReport:
    """Negative-moment envelope M_{-p}(t) <= (a t + M_{-p}(0)) e^{b t}."""
    if not (0 < p <= 0.5):
        raise DomainError("p must lie in (0, 1/2]")
    report = BoundReport("negative_moment", True)
    if model.eta < 1.0 + p:
        report.precondition_ok = False
        report.passed = False
        report.notes.append(
            f"hypothesis eta >= 1 + p violated: eta={model.eta}, p={p}")
        return report
    q1 = compute_q1(model)
    n0 = traj.samples[0].N
    e0 = traj.samples[0].E
    a, b = negative_moment_constants(model.b0, model.eta, q1, n0, e0, p)
    report.constants = {"a": a, "b": b, "p": p, "q1": q1, "N": n0, "E": e0,
                        "b0": model.b0, "eta": model.eta}
    m0 = moment(traj.states[0], -p)
    for state, rec in zip(traj.states, traj.samples):
        obs = moment(state, -p)
        inner = a * rec.t + m0
        log_bound = b * rec.t + (math.log(inner) if inner > 0 else -math.inf)
        bound = _safe_exp(log_bound)
        ok = obs == 0.0 or (inner > 0 and
                            math.log(obs) <= log_bound + math.log1p(tolerance))
        report.samples.append(BoundSample(rec.t, obs, bound, bound - obs))
        if not ok:
            report.passed = False
    return report


def check_linf(traj: Trajectory, model: PotentialModel,
               tolerance: float = 1e-6) -> BoundReport:
    """sup f(t) <= (1 + sup f(0)) exp(8 b0^2 int_0^t M_{-1/2}(tau)^2 dtau).

    The time integral is a trapezoid over the recorded samples.
    """
    sup0 = traj.samples[0].sup_f
    times = traj.times
    msq = np.array([r.M_minus_half**2 for r in traj.samples])
    report = BoundReport("linf", True,
                         constants={"sup_f0": sup0, "b0": model.b0})
    integral = 0.0
    prev_t = times[0]
    prev_v = msq[0]
    for i, rec in enumerate(traj.samples):
        if i > 0:
            integral += 0.5 * (msq[i] + prev_v) * (times[i] - prev_t)
            prev_t, prev_v = times[i], msq[i]
        log_bound = math.log1p(sup0) + 8.0 * model.b0**2 * integral
        bound = _safe_exp(log_bound)
        obs = rec.sup_f
        ok = obs <= 0.0 or math.log(obs) <= log_bound + math.log1p(tolerance)
        report.samples.append(BoundSample(rec.t, obs, bound, bound - obs))
        if not ok:
            report.passed = False
    return report


def check_entropy(traj: Trajectory, rel_tol: float = 1e-9) -> BoundReport:
    """Entropy monotonicity and the discrete entropy equality residual.

    Pass requires S nondecreasing within rel_tol relative per recorded step.
    The residual |S(t) - S(0) - int_0^t D| (trapezoid in D) is reported via
    the constant C = max residual / (dt_eff * t); first order in dt.
    """
    report = BoundReport("entropy", True, constants={})
    s0 = traj.samples[0].S
    times = traj.times
    d_vals = np.array([r.D for r in traj.samples])
    dt_eff = traj.dt_effective()
    integral = 0.0
    c_worst = 0.0
    for i, rec in enumerate(traj.samples):
        if i > 0:
            integral += 0.5 * (d_vals[i] + d_vals[i - 1]) * (times[i] - times[i - 1])
            drop = traj.samples[i - 1].S - rec.S
            allowed = rel_tol * abs(traj.samples[i - 1].S)
            report.samples.append(BoundSample(rec.t, drop, allowed, allowed - drop))
            if drop > allowed:
                report.passed = False
            residual = abs(rec.S - s0 - integral)
            if rec.t > 0:
                c_worst = max(c_worst, residual / (dt_eff * rec.t))
    report.constants = {"S0": s0, "equality_residual_rate": c_worst,
                        "dt_effective": dt_eff}
    return report


def check_convergence_to_equilibrium(traj: Trajectory,
                                     eq_state: DistributionState,
                                     burn_in_fraction: float = 0.2,
                                     rel_slack: float = 1e-3) -> BoundReport:
    """Distance-to-equilibrium trend (no rate is claimed for this class).

    Reports |M_1(f) - M_1(eq)| (zero by conservation) and the substantive
    metric ||f(t) - eq||_1.  Pass means the final distance is below the
    initial one and the series is nonincreasing within rel_slack after the
    burn-in fraction of the run.
    """
    dists = [l1_distance(s, eq_state) for s in traj.states]
    times = traj.times
    d0 = dists[0]
    report = BoundReport("convergence_to_equilibrium", True, constants={
        "d0": d0, "d_final": dists[-1],
        "seminorm_gap": abs(moment(traj.states[-1], 1.0) - moment(eq_state, 1.0)),
    })
    # rounding floor: distances at machine scale never count as growth
    atol = 1e-12 * (1.0 + moment(eq_state, 0.0) + moment(eq_state, 1.0))
    t_burn = burn_in_fraction * times[-1]
    prev = None
    for t, d in zip(times, dists):
        bound = d0 if prev is None or t < t_burn else prev * (1.0 + rel_slack) + atol
        report.samples.append(BoundSample(float(t), d, bound, bound - d))
        if t >= t_burn:
            if prev is not None and d > prev * (1.0 + rel_slack) + atol:
                report.passed = False
            prev = d
    started_at_eq = d0 <= atol
    if not started_at_eq and not dists[-1] < d0:
        report.passed = False
    return report


# ---------------------------------------------------------------------------
# Stability experiment
# ---------------------------------------------------------------------------


@dataclass
class StabilityReport:
    """Paired-trajectory distance record for one perturbation size."""

    d0: float
    sup_d: float
    psi_of_d0: float
    d_series: list[tuple[float, float]]
    notes: list[str] = field(default_factory=list)


def psi_modulus(state: DistributionState, eps: float) -> float:
    """Psi_F(eps) = eps + sqrt(eps) + integral_{x >= 1/sqrt(eps)} x dF; Psi(0) = 0."""
    if eps < 0:
        raise DomainError("psi_modulus requires eps >= 0")
    if eps == 0.0:
        return 0.0
    g = state.grid
    tail = g.nodes >= 1.0 / math.sqrt(eps)
    tail_energy = float(np.sum(g.nodes[tail] * state.f[tail] * g.weights[tail]))
    return eps + math.sqrt(eps) + tail_energy


def stability_experiment(f0: DistributionState, g0: DistributionState,
                         tensor, config: SolverConfig) -> StabilityReport:
    """Run both data on one grid and record d(t) = ||F_t - G_t||_1.

    The continuous theory gives d(t) <= C Psi_{F0}(d(0)) e^{e^{ct}} with
    non-effective constants; the reported quantities support the qualitative
    ordering check (smaller d(0) never yields a larger sup d, within slack).
    Identical data must give identically zero distance (determinism).
    """
    if not f0.grid.same_as(g0.grid):
        raise GridMismatchError("stability experiment needs one grid")
    eps_min = (1e-2,)
    traj_f = run(f0, tensor, config, eps_list=eps_min, p_list=(0.5,))
    traj_g = run(g0, tensor, config, eps_list=eps_min, p_list=(0.5,))
    series = [(float(t), l1_distance(a, b))
              for t, a, b in zip(traj_f.times, traj_f.states, traj_g.states)]
    d0 = series[0][1]
    sup_d = max(d for _, d in series)
    report = StabilityReport(d0, sup_d, psi_modulus(f0, d0), series)
    if d0 == 0.0 and sup_d > 0.0:
        report.notes.append("identical data diverged: determinism violation")
    return report


def stability_ordering(reports: list[StabilityReport],
                       slack: float = 0.05) -> BoundReport:
    """Check sup_t d(t) is ordered with d(0) across perturbation sizes.

    Shrinking the initial distance must not increase the running supremum by
    more than the slack fraction.
    """
    ordered = sorted(reports, key=lambda r: r.d0, reverse=True)
    out = BoundReport("stability_ordering", True,
                      constants={"d0_list": [r.d0 for r in ordered],
                                 "sup_list": [r.sup_d for r in ordered]})
    for bigger, smaller in zip(ordered, ordered[1:]):
        bound = bigger.sup_d * (1.0 + slack)
        out.samples.append(BoundSample(0.0, smaller.sup_d, bound,
                                       bound - smaller.sup_d))
        if smaller.sup_d > bound:
            out.passed = False
    return out


# ---------------------------------------------------------------------------
# Descriptive monitors (constants not effective at desk scale)
# ---------------------------------------------------------------------------


def moment_production_report(traj: Trajectory, s: float) -> dict:
    """Observed sup of M_s(t) (1 + 1/t)^{-(s-2)} for t > 0; no pass/fail."""
    worst = 0.0
    for state, rec in zip(traj.states, traj.samples):
        if rec.t <= 0:
            continue
        worst = max(worst, moment(state, s) * (1.0 + 1.0 / rec.t) ** (-(s - 2.0)))
    return {"s": s, "sup_scaled_moment": worst}


def entropy_floor_report(traj: Trajectory, t0: float) -> dict:
    """Observed inf of S(t) for t >= t0; no pass/fail."""
    floor = math.inf
    for rec in traj.samples:
        if rec.t >= t0:
            floor = min(floor, rec.S)
    return {"t0": t0, "entropy_floor": floor}
