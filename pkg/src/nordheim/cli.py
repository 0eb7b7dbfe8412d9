"""Configuration, scenario presets, batch execution, and run-directory I/O.

Configs are plain sectioned key=value text (sections: [potential] [grid]
[quadrature] [initial] [time] [diagnostics] [output]).  A run directory
contains `config.echo` (the canonical re-serialization; re-running from it
reproduces every output byte for byte), `diagnostics.csv` with the fixed
column order t,N,E,M_half,M_minus_half,S,D,I_eps...,sup_f,L1_to_eq,
per-sample `state_t<t>.csv` snapshots (two columns x,f), and `report.json`
with the monitor results.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import verification as verif
from .collision_kernel import (
    KernelTensor,
    QuadratureSpec,
    build_tensor,
    load_tensor,
    save_tensor,
)
from .equilibrium import solve_equilibrium
from .errors import CacheMissError, ConfigError, FormatError, NordheimError, NumericsError
from .measure import (
    DiagnosticsRecord,
    DistributionState,
    EnergyGrid,
    norm_k,
    temperature_ratio,
)
from .potentials import (
    PotentialModel,
    eta_rational,
    hard_sphere,
    satisfies_assumption,
    tabulated,
)
from .solver import Scheme, SolverConfig, Trajectory, run as run_solver

_SECTIONS = ("potential", "grid", "quadrature", "initial", "time",
             "diagnostics", "output")


@dataclass(frozen=True)
class InitialSpec:
    kind: str
    params: dict


@dataclass
class RunConfig:
    potential: PotentialModel
    grid_n: int = 96
    grid_x_max: float = 16.0
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    initial: InitialSpec = field(default_factory=lambda: InitialSpec(
        "exponential", {"theta_scale": 1.0, "amplitude": 1.0}))
    solver: SolverConfig = field(default_factory=SolverConfig)
    eps_list: tuple[float, ...] = (1e-2, 1e-3)
    p_list: tuple[float, ...] = (0.5,)
    output_dir: str = "out"

    def grid(self) -> EnergyGrid:
        return EnergyGrid(self.grid_n, self.grid_x_max)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _parse_sections(text: str, errors: list[str]) -> dict[str, dict[str, str]]:
    out: dict[str, dict[str, str]] = {s: {} for s in _SECTIONS}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in out:
                errors.append(f"line {lineno}: unknown section [{name}]")
                section = None
            else:
                section = name
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected key=value, got {line!r}")
            continue
        if section is None:
            errors.append(f"line {lineno}: key=value outside any section")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        out[section][key] = value
    return out


def _take(section: dict, sec_name: str, key: str, conv, default, errors,
          check=None, what=""):
    raw = section.pop(key, None)
    if raw is None:
        return default
    try:
        value = conv(raw)
    except (ValueError, TypeError):
        errors.append(f"{sec_name}.{key}: cannot parse {raw!r}")
        return default
    if check is not None and not check(value):
        errors.append(f"{sec_name}.{key}: {what} (got {raw!r})")
        return default
    return value


def _float_list(raw: str) -> tuple[float, ...]:
    return tuple(float(v) for v in raw.split(",") if v.strip())


def parse_config(text: str) -> RunConfig:
    """Parse and validate; raises ConfigError carrying every problem found."""
    errors: list[str] = []
    sec = _parse_sections(text, errors)

    pot = sec["potential"]
    kind = _take(pot, "potential", "kind", str, "eta_rational", errors,
                 lambda v: v in ("hard_sphere", "eta_rational", "table"),
                 "kind must be hard_sphere, eta_rational or table")
    b0 = _take(pot, "potential", "b0", float, 1.0, errors,
               lambda v: v > 0, "b0 must be positive")
    eta = _take(pot, "potential", "eta", float, 2.0, errors,
                lambda v: v >= 1, "eta must be >= 1")
    cap = _take(pot, "potential", "cap", float, None, errors,
                lambda v: v > 0, "cap must be positive")
    table_path = _take(pot, "potential", "path", str, "", errors)
    k_expr = _take(pot, "potential", "k", str, "a", errors)
    model = None
    try:
        if kind == "hard_sphere":
            model = hard_sphere()
            if cap is not None:
                model = PotentialModel(kind=model.kind, b0=model.b0,
                                       eta=model.eta, phi_cap=cap)
        elif kind == "eta_rational":
            model = eta_rational(b0, eta, phi_cap=cap)
        elif not table_path:
            errors.append("potential.path: required for kind=table")
        else:
            data = np.loadtxt(table_path, delimiter=",", ndmin=2)
            model = tabulated(data[:, 0], data[:, 1], k_expr, b0, eta,
                              path=table_path, phi_cap=cap)
    except (OSError, NordheimError, ValueError) as exc:
        errors.append(f"potential: {exc}")

    grid = sec["grid"]
    n = _take(grid, "grid", "n", int, 96, errors, lambda v: v >= 4,
              "n must be an integer >= 4")
    x_max = _take(grid, "grid", "x_max", float, 16.0, errors,
                  lambda v: v > 0, "x_max must be positive")

    quad_sec = sec["quadrature"]
    s_order = _take(quad_sec, "quadrature", "s_order", int, 32, errors,
                    lambda v: v >= 2, "s_order must be >= 2")
    theta_order = _take(quad_sec, "quadrature", "theta_order", int, 32, errors,
                        lambda v: v >= 2, "theta_order must be >= 2")

    ini = sec["initial"]
    ikind = _take(ini, "initial", "kind", str, "exponential", errors,
                  lambda v: v in ("exponential", "equilibrium", "two_bump", "file"),
                  "kind must be exponential, equilibrium, two_bump or file")
    params: dict = {}
    if ikind == "exponential":
        params["theta_scale"] = _take(ini, "initial", "theta_scale", float, 1.0,
                                      errors, lambda v: v > 0,
                                      "theta_scale must be positive")
        params["amplitude"] = _take(ini, "initial", "amplitude", float, 1.0,
                                    errors, lambda v: v > 0,
                                    "amplitude must be positive")
    elif ikind == "equilibrium":
        params["N"] = _take(ini, "initial", "N", float, 1.0, errors,
                            lambda v: v > 0, "N must be positive")
        params["E"] = _take(ini, "initial", "E", float, 1.0, errors,
                            lambda v: v > 0, "E must be positive")
        params["perturbation_amplitude"] = _take(
            ini, "initial", "perturbation_amplitude", float, 0.0, errors,
            lambda v: abs(v) < 1.0, "perturbation amplitude must lie in (-1, 1)")
    elif ikind == "two_bump":
        centers = _take(ini, "initial", "centers", _float_list, (1.0, 2.0), errors)
        widths = _take(ini, "initial", "widths", _float_list, (0.05, 0.05), errors)
        masses = _take(ini, "initial", "masses", _float_list, (0.3, 0.3), errors)
        if not (len(centers) == len(widths) == len(masses)):
            errors.append("initial: centers, widths, masses must have equal length")
        elif any(w <= 0 for w in widths) or any(m <= 0 for m in masses):
            errors.append("initial: widths and masses must be positive")
        elif any(c - w < 0 for c, w in zip(centers, widths)):
            errors.append("initial: bumps must not cross x = 0")
        params.update(centers=centers, widths=widths, masses=masses)
    else:
        params["path"] = _take(ini, "initial", "path", str, "", errors)
        if not params["path"]:
            errors.append("initial.path: required for kind=file")

    time_sec = sec["time"]
    scheme_name = _take(time_sec, "time", "scheme", str, "duhamel", errors,
                        lambda v: v in ("euler", "duhamel"),
                        "scheme must be euler or duhamel")
    dt_raw = time_sec.pop("dt", "auto")
    dt: float | None
    if dt_raw == "auto":
        dt = None
    else:
        try:
            dt = float(dt_raw)
            if dt <= 0:
                errors.append(f"time.dt: must be positive or auto (got {dt_raw!r})")
                dt = None
        except ValueError:
            errors.append(f"time.dt: cannot parse {dt_raw!r}")
            dt = None
    t_end = _take(time_sec, "time", "t_end", float, 1.0, errors,
                  lambda v: v > 0, "t_end must be positive")
    cfl = _take(time_sec, "time", "cfl_safety", float, 0.5, errors,
                lambda v: 0 < v <= 1, "cfl_safety must lie in (0, 1]")

    diag = sec["diagnostics"]
    eps_list = _take(diag, "diagnostics", "eps_list", _float_list, (1e-2, 1e-3),
                     errors, lambda v: len(v) > 0 and all(e > 0 for e in v),
                     "eps_list must be positive values")
    p_list = _take(diag, "diagnostics", "p_list", _float_list, (0.5,), errors,
                   lambda v: all(0 < p <= 0.5 for p in v),
                   "p_list orders must lie in (0, 1/2]")
    sample_every = _take(diag, "diagnostics", "sample_every", float, 0.1, errors,
                         lambda v: v > 0, "sample_every must be positive")

    out = sec["output"]
    output_dir = _take(out, "output", "dir", str, "out", errors)

    for name in _SECTIONS:
        for key in sec[name]:
            errors.append(f"{name}.{key}: unknown key")
    if errors:
        raise ConfigError(errors)

    solver = SolverConfig(scheme=Scheme(scheme_name), dt=dt, t_end=t_end,
                          sample_every=sample_every, cfl_safety=cfl)
    return RunConfig(potential=model, grid_n=n, grid_x_max=x_max,
                     quad=QuadratureSpec(s_order, theta_order),
                     initial=InitialSpec(ikind, params), solver=solver,
                     eps_list=eps_list, p_list=p_list, output_dir=output_dir)


def canonical_echo(cfg: RunConfig) -> str:
    """Fixed-order re-serialization of a parsed config."""
    pot = cfg.potential
    lines = ["[potential]", f"kind={pot.kind.value}"]
    if pot.kind.value == "eta_rational":
        lines += [f"b0={pot.b0!r}", f"eta={pot.eta!r}"]
    elif pot.kind.value == "table":
        lines += [f"path={pot.table_path}", f"k={pot.k_expression}",
                  f"b0={pot.b0!r}", f"eta={pot.eta!r}"]
    if pot.phi_cap is not None:
        lines.append(f"cap={pot.phi_cap!r}")
    lines += ["", "[grid]", f"n={cfg.grid_n}", f"x_max={cfg.grid_x_max!r}"]
    lines += ["", "[quadrature]", f"s_order={cfg.quad.s_order}",
              f"theta_order={cfg.quad.theta_order}"]
    lines += ["", "[initial]", f"kind={cfg.initial.kind}"]
    for key in sorted(cfg.initial.params):
        value = cfg.initial.params[key]
        if isinstance(value, tuple):
            lines.append(f"{key}={','.join(repr(v) for v in value)}")
        elif isinstance(value, float):
            lines.append(f"{key}={value!r}")
        else:
            lines.append(f"{key}={value}")
    sv = cfg.solver
    lines += ["", "[time]", f"scheme={sv.scheme.value}",
              f"dt={'auto' if sv.dt is None else repr(sv.dt)}",
              f"t_end={sv.t_end!r}", f"cfl_safety={sv.cfl_safety!r}"]
    lines += ["", "[diagnostics]",
              f"eps_list={','.join(repr(e) for e in cfg.eps_list)}",
              f"p_list={','.join(repr(p) for p in cfg.p_list)}",
              f"sample_every={sv.sample_every!r}"]
    lines += ["", "[output]", f"dir={cfg.output_dir}", ""]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Initial conditions
# ---------------------------------------------------------------------------


def initial_state(cfg: RunConfig, grid: EnergyGrid) -> DistributionState:
    kind = cfg.initial.kind
    p = cfg.initial.params
    x = grid.nodes
    if kind == "exponential":
        f = p["amplitude"] * np.exp(-x / p["theta_scale"])
    elif kind == "equilibrium":
        eq = solve_equilibrium(p["N"], p["E"])
        f = 1.0 / (eq.A * np.exp(x / eq.kappa) - 1.0)
        amp = p.get("perturbation_amplitude", 0.0)
        if amp:
            f = f * (1.0 + amp * np.cos(math.pi * x / grid.x_max))
    elif kind == "two_bump":
        f = np.zeros_like(x)
        for c, w, m in zip(p["centers"], p["widths"], p["masses"]):
            lo, hi = c - w, c + w
            z = (2.0 / 3.0) * (hi**1.5 - lo**1.5)  # integral of sqrt(x) over the bump
            f += (m / z) * ((x >= lo) & (x <= hi))
    else:
        data = np.loadtxt(p["path"], delimiter=",", ndmin=2)
        f = np.interp(x, data[:, 0], data[:, 1])
    return DistributionState(grid, f)


# ---------------------------------------------------------------------------
# Scenario presets
# ---------------------------------------------------------------------------

# Amplitude putting exponential data at kinetic temperature ratio ~0.7: the
# pure exponential shape sits at a fixed supercritical ratio, and amplitude
# alpha rescales the ratio by alpha^(-2/3).
_LOW_T_AMPLITUDE = 12.118

SCENARIOS: dict[str, str] = {
    "relaxation_high_T": """\
[potential]
kind=eta_rational
b0=1
eta=2
[grid]
n=96
x_max=16
[initial]
kind=exponential
theta_scale=1
[time]
scheme=euler
t_end=2
[diagnostics]
sample_every=0.1
""",
    "low_T_no_condensation": f"""\
[potential]
kind=eta_rational
b0=1
eta=2
[grid]
n=96
x_max=1.2
[initial]
kind=exponential
theta_scale=0.2
amplitude={_LOW_T_AMPLITUDE}
[time]
scheme=euler
t_end=2
[diagnostics]
sample_every=0.05
eps_list=0.01,0.001
""",
    "two_bump_example": """\
[potential]
kind=hard_sphere
[grid]
n=96
x_max=4.8
[initial]
kind=two_bump
centers=1,2
widths=0.05,0.05
masses=0.3,0.3
[time]
scheme=duhamel
t_end=1
[diagnostics]
sample_every=0.05
""",
    "hard_sphere_contrast": """\
[potential]
kind=hard_sphere
[grid]
n=96
x_max=16
[initial]
kind=exponential
theta_scale=1
[time]
scheme=euler
t_end=2
[diagnostics]
sample_every=0.1
""",
    "stability_pair": """\
[potential]
kind=eta_rational
b0=1
eta=2
[grid]
n=64
x_max=12
[initial]
kind=exponential
theta_scale=1
[time]
scheme=duhamel
t_end=1
[diagnostics]
sample_every=0.05
""",
}


# ---------------------------------------------------------------------------
# Cache and run-directory I/O
# ---------------------------------------------------------------------------


def _cache_path(cache_dir: Path, cfg: RunConfig) -> Path:
    h = cfg.potential.potential_hash()
    return cache_dir / (f"kernel_{h:016x}_n{cfg.grid_n}_x{cfg.grid_x_max!r}"
                        f"_s{cfg.quad.s_order}_t{cfg.quad.theta_order}.bin")


def obtain_tensor(cfg: RunConfig, cache_dir: Path, rebuild: bool = False) -> KernelTensor:
    """Load the kernel tensor from cache or build and cache it."""
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = _cache_path(cache_dir, cfg)
    if path.exists() and not rebuild:
        try:
            return load_tensor(path, n=cfg.grid_n, x_max=cfg.grid_x_max,
                               quad=cfg.quad,
                               potential_hash=cfg.potential.potential_hash())
        except (FormatError, CacheMissError) as exc:
            print(f"cache rebuild ({exc})", file=sys.stderr)
    tensor = build_tensor(cfg.potential, cfg.grid(), cfg.quad)
    save_tensor(tensor, path)
    return tensor


def _fmt(value: float) -> str:
    return repr(float(value))


def write_diagnostics_csv(traj: Trajectory, path: Path) -> None:
    eps_cols = [f"I_eps_{e!r}" for e in traj.eps_list]
    header = ["t", "N", "E", "M_half", "M_minus_half", "S", "D",
              *eps_cols, "sup_f", "L1_to_eq"]
    rows = [",".join(header)]
    for r in traj.samples:
        cells = [r.t, r.N, r.E, r.M_half, r.M_minus_half, r.S, r.D,
                 *r.I_eps, r.sup_f, r.L1_to_eq]
        rows.append(",".join(_fmt(c) for c in cells))
    path.write_text("\n".join(rows) + "\n")


def write_states(traj: Trajectory, outdir: Path) -> None:
    for state in traj.states:
        name = f"state_t{state.time_stamp:.6f}.csv"
        lines = ["x,f"]
        lines += [f"{_fmt(x)},{_fmt(v)}" for x, v in zip(state.grid.nodes, state.f)]
        (outdir / name).write_text("\n".join(lines) + "\n")


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _report_dict(rep: verif.BoundReport) -> dict:
    return {
        "name": rep.name,
        "passed": rep.passed,
        "precondition_ok": rep.precondition_ok,
        "constants": rep.constants,
        "notes": rep.notes,
        "worst_margin": rep.worst_margin(),
        "samples": [{"t": s.t, "observed": s.observed, "bound": s.bound,
                     "margin": s.margin} for s in rep.samples],
    }


def run_monitors(traj: Trajectory, model: PotentialModel) -> dict:
    monitors = [
        verif.check_conservation(traj),
        verif.check_entropy(traj),
        verif.check_linf(traj, model),
    ]
    if satisfies_assumption(model):
        monitors.append(verif.check_non_condensation(traj, model))
        for p in traj.p_list:
            if model.eta >= 1.0 + p:
                monitors.append(verif.check_negative_moment(traj, model, p))
    return {
        "monitors": [_report_dict(m) for m in monitors],
        "all_passed": all(m.passed for m in monitors),
    }


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_kernel_build(cfg: RunConfig, cache_dir: Path) -> int:
    tensor = obtain_tensor(cfg, cache_dir, rebuild=True)
    print(f"built kernel tensor n={tensor.n} x_max={tensor.x_max!r} "
          f"hash={tensor.potential_hash:016x} -> {_cache_path(cache_dir, cfg)}")
    return 0


def _execute_run(cfg: RunConfig, cache_dir: Path) -> tuple[Trajectory, Path]:
    grid = cfg.grid()
    tensor = obtain_tensor(cfg, cache_dir)
    state = initial_state(cfg, grid)
    traj = run_solver(state, tensor, cfg.solver,
                      eps_list=cfg.eps_list, p_list=cfg.p_list)
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "config.echo").write_text(canonical_echo(cfg))
    write_diagnostics_csv(traj, outdir / "diagnostics.csv")
    write_states(traj, outdir)
    report = run_monitors(traj, cfg.potential)
    report["run"] = {
        "n_steps": traj.n_steps,
        "clipped_mass_total": traj.clipped_mass_total,
        "tensor_id": list(traj.tensor_id),
        "initial": {"N": traj.samples[0].N, "E": traj.samples[0].E,
                    "temperature_ratio": temperature_ratio(
                        traj.samples[0].N, traj.samples[0].E)
                    if traj.samples[0].N > 0 and traj.samples[0].E > 0 else "nan"},
    }
    (outdir / "report.json").write_text(
        json.dumps(_json_safe(report), indent=2, sort_keys=True) + "\n")
    return traj, outdir


def _run_stability_pair(cfg: RunConfig, cache_dir: Path) -> int:
    grid = cfg.grid()
    tensor = obtain_tensor(cfg, cache_dir)
    base = initial_state(cfg, grid)
    reports = []
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    # Uniform rescaling (1 + s) f has ||F - G||_1 = s ||F||_1 exactly.
    base_norm = norm_k(base, 1.0)
    for target_d0 in (1e-3, 1e-4):
        scale = target_d0 / base_norm
        pert = base.with_values(base.f * (1.0 + scale), 0.0)
        reports.append(verif.stability_experiment(base, pert, tensor, cfg.solver))
    ordering = verif.stability_ordering(reports)
    payload = {
        "experiments": [{"d0": r.d0, "sup_d": r.sup_d, "psi_of_d0": r.psi_of_d0,
                         "d_series": r.d_series, "notes": r.notes}
                        for r in reports],
        "ordering": _report_dict(ordering),
    }
    (outdir / "stability_report.json").write_text(
        json.dumps(_json_safe(payload), indent=2, sort_keys=True) + "\n")
    (outdir / "config.echo").write_text(canonical_echo(cfg))
    print(f"stability ordering passed: {ordering.passed}")
    return 0 if ordering.passed else 1


def cmd_run(cfg: RunConfig, cache_dir: Path, scenario: str | None) -> int:
    if scenario == "stability_pair":
        return _run_stability_pair(cfg, cache_dir)
    traj, outdir = _execute_run(cfg, cache_dir)
    report = json.loads((outdir / "report.json").read_text())
    print(f"run complete: {len(traj.samples)} samples, {traj.n_steps} steps, "
          f"monitors passed: {report['all_passed']}, outputs in {outdir}")
    return 0


def load_trajectory(run_dir: Path) -> tuple[Trajectory, RunConfig]:
    """Rebuild a Trajectory from a saved run directory."""
    cfg = parse_config((run_dir / "config.echo").read_text())
    grid = cfg.grid()
    lines = (run_dir / "diagnostics.csv").read_text().strip().splitlines()
    header = lines[0].split(",")
    n_eps = len(cfg.eps_list)
    records = []
    for line in lines[1:]:
        vals = [float(v) for v in line.split(",")]
        base = dict(zip(header[:7], vals[:7]))
        i_eps = tuple(vals[7:7 + n_eps])
        sup_f, l1 = vals[7 + n_eps:9 + n_eps]
        records.append((base, i_eps, sup_f, l1))
    state_files = sorted(run_dir.glob("state_t*.csv"),
                         key=lambda p: float(re.findall(r"state_t(.*)\.csv", p.name)[0]))
    states = []
    for path, (base, _, _, _) in zip(state_files, records):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        states.append(DistributionState(grid, data[:, 1], time_stamp=base["t"]))
    traj = Trajectory(grid, (), cfg.solver, cfg.eps_list, cfg.p_list)
    for (base, i_eps, sup_f, l1), state in zip(records, states):
        traj.samples.append(DiagnosticsRecord(
            t=base["t"], N=base["N"], E=base["E"], M_half=base["M_half"],
            M_minus_half=base["M_minus_half"],
            M_p=tuple(float(np.sum(grid.nodes**(-p) * state.f * grid.weights))
                      for p in cfg.p_list),
            S=base["S"], D=base["D"], I_eps=i_eps, sup_f=sup_f, L1_to_eq=l1))
        traj.states.append(state)
    meta = {}
    report_path = run_dir / "report.json"
    if report_path.exists():
        meta = json.loads(report_path.read_text()).get("run", {})
    traj.n_steps = int(meta.get("n_steps", len(traj.samples)))
    traj.clipped_mass_total = float(meta.get("clipped_mass_total", 0.0))
    return traj, cfg


def cmd_verify(run_dir: Path) -> int:
    traj, cfg = load_trajectory(run_dir)
    report = run_monitors(traj, cfg.potential)
    (run_dir / "verify_report.json").write_text(
        json.dumps(_json_safe(report), indent=2, sort_keys=True) + "\n")
    for mon in report["monitors"]:
        print(f"{mon['name']}: {'pass' if mon['passed'] else 'FAIL'}")
    return 0 if report["all_passed"] else 1


def cmd_equilibrium(n_val: float, e_val: float) -> int:
    eq = solve_equilibrium(n_val, e_val)
    payload = {
        "A": eq.A, "kappa": eq.kappa, "n0": eq.n0,
        "n0_ratio_form": eq.n0_ratio_form, "ratio": eq.ratio,
        "residuals": {"N": eq.residual_N, "E": eq.residual_E},
    }
    print(json.dumps(_json_safe(payload), indent=2, sort_keys=True))
    return 0


def cmd_scenario_list() -> int:
    for name in SCENARIOS:
        print(name)
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _apply_thread_cap() -> None:
    cap = os.environ.get("NORDHEIM_THREADS")
    if cap:
        import numba

        numba.set_num_threads(max(1, int(cap)))


def _load_config(args) -> RunConfig:
    if getattr(args, "scenario", None):
        if args.scenario not in SCENARIOS:
            raise ConfigError([f"unknown scenario {args.scenario!r}"])
        cfg = parse_config(SCENARIOS[args.scenario])
    elif getattr(args, "config", None):
        cfg = parse_config(Path(args.config).read_text())
    else:
        raise ConfigError(["one of --config or --scenario is required"])
    if getattr(args, "out", None):
        cfg.output_dir = args.out
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nordheim",
        description="Isotropic quantum Boltzmann (Nordheim) equation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_kernel = sub.add_parser("kernel", help="kernel tensor operations")
    kernel_sub = p_kernel.add_subparsers(dest="kernel_command", required=True)
    p_build = kernel_sub.add_parser("build", help="build and cache the tensor")
    p_build.add_argument("--config")
    p_build.add_argument("--scenario")
    p_build.add_argument("--cache-dir", default="kernel_cache")

    p_run = sub.add_parser("run", help="execute a configured simulation")
    p_run.add_argument("--config")
    p_run.add_argument("--scenario")
    p_run.add_argument("--out")
    p_run.add_argument("--cache-dir", default="kernel_cache")

    p_verify = sub.add_parser("verify", help="re-run monitors on saved output")
    p_verify.add_argument("run_dir")

    p_eq = sub.add_parser("equilibrium", help="solve the (A, kappa, n0) system")
    p_eq.add_argument("--N", type=float, required=True)
    p_eq.add_argument("--E", type=float, required=True)

    p_scn = sub.add_parser("scenario", help="scenario presets")
    scn_sub = p_scn.add_subparsers(dest="scenario_command", required=True)
    scn_sub.add_parser("list", help="enumerate presets")

    args = parser.parse_args(argv)
    _apply_thread_cap()
    try:
        if args.command == "kernel":
            return cmd_kernel_build(_load_config(args), Path(args.cache_dir))
        if args.command == "run":
            scenario = getattr(args, "scenario", None)
            return cmd_run(_load_config(args), Path(args.cache_dir), scenario)
        if args.command == "verify":
            return cmd_verify(Path(args.run_dir))
        if args.command == "equilibrium":
            return cmd_equilibrium(args.N, args.E)
        if args.command == "scenario":
            return cmd_scenario_list()
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return 1
    except (OSError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericsError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
