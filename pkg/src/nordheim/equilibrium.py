"""Bose-Einstein equilibria with prescribed mass and energy.

The equilibrium density in the energy variable is f(x) = 1/(A e^{x/kappa} - 1)
with A >= 1.  Its moments against sqrt(x) dx are

    N = kappa^{3/2} Gamma(3/2) g_{3/2}(A),
    E = kappa^{5/2} Gamma(5/2) g_{5/2}(A),

where g_s(A) = sum_{m>=1} A^{-m} m^{-s} (the polylogarithm Li_s(1/A); g_s(1)
is the Riemann zeta value).  For kinetic temperature ratio > 1 a unique A > 1
matches (N, E); at or below the critical ratio the regular part sits at A = 1
and the mass deficit n0 = N - kappa^{3/2} Gamma(3/2) zeta(3/2) is carried by
a condensate atom at x = 0.  n0 is metadata here: the grid only ever holds
the regular part.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, NumericsError
from .measure import DistributionState, EnergyGrid, temperature_ratio

_GAMMA_32 = math.gamma(1.5)
_GAMMA_52 = math.gamma(2.5)

# Direct-summation cutoff: below this log-fugacity the geometric decay is too
# slow and the Euler-Maclaurin tail takes over.
_MU_DIRECT = 0.05
_EM_START = 64


def _upper_gamma(a: float, x: float) -> float:
    """Upper incomplete gamma Gamma(a, x) for a < 1, x > 0.

    Computed by downward recurrence Gamma(b, x) = (Gamma(b+1, x) - x^b e^-x)/b
    from a start value in (0, 1] (or from Gamma(0, x) = E1(x) for integer a).
    """
    if not (x > 0):
        raise DomainError("upper incomplete gamma needs x > 0")
    steps = int(math.ceil(-a - 1e-12)) if a <= 0 else 0
    b = a + steps
    if abs(b) < 1e-12:
        g = float(special.exp1(x))
        b = 0.0
    else:
        g = float(special.gammaincc(b, x)) * math.gamma(b)
    for _ in range(steps):
        b -= 1.0
        g = (g - x**b * math.exp(-x)) / b
    return g


def bose_g(s: float, A: float) -> float:
    """g_s(A) = sum_{m>=1} A^{-m} m^{-s} to ~1e-12 relative, for s > 1, A >= 1.

    Direct geometric summation when log(A) is large enough; otherwise a
    direct head plus an Euler-Maclaurin tail whose integral term is the
    incomplete-gamma closed form mu^{s-1} Gamma(1-s, mu M).  At A = 1 this
    reduces to the classical zeta evaluation.
    """
    if s <= 1:
        raise DomainError("bose_g requires s > 1")
    if A < 1:
        raise DomainError("bose_g requires A >= 1")
    return _bose_g_mu(s, math.log(A))


def _bose_g_mu(s: float, mu: float) -> float:
    """bose_g parametrized by the log-fugacity mu = log A >= 0.

    The equilibrium solver works in mu directly: near the critical point
    mu ~ (ratio - 1)^2 underflows the resolution of A = e^mu itself.
    """
    if mu >= _MU_DIRECT:
        total = 0.0
        m = 1
        while m < 20000:
            term = math.exp(-mu * m) * m**-s
            total += term
            if term < 1e-18 * total:
                break
            m += 1
        return total
    M = _EM_START
    head = 0.0
    for m in range(1, M):
        head += math.exp(-mu * m) * m**-s
    if mu == 0.0:
        integral = M ** (1.0 - s) / (s - 1.0)
    else:
        integral = mu ** (s - 1.0) * _upper_gamma(1.0 - s, mu * M)
    e = math.exp(-mu * M)
    phi0 = e * M**-s
    phi1 = -e * (mu * M**-s + s * M ** (-s - 1.0))
    phi3 = -e * (mu**3 * M**-s
                 + 3.0 * mu**2 * s * M ** (-s - 1.0)
                 + 3.0 * mu * s * (s + 1.0) * M ** (-s - 2.0)
                 + s * (s + 1.0) * (s + 2.0) * M ** (-s - 3.0))
    tail = integral + 0.5 * phi0 - phi1 / 12.0 + phi3 / 720.0
    return head + tail


def zeta(s: float) -> float:
    """Riemann zeta for s > 1 (the A = 1 special case of bose_g)."""
    return bose_g(s, 1.0)


@dataclass(frozen=True)
class BoseEinsteinEquilibrium:
    """Equilibrium coefficients matching mass N_target and energy E_target.

    A > 1 with n0 = 0 above the critical temperature; A = 1 with condensate
    mass n0 >= 0 at or below it.  n0_ratio_form is the equivalent value
    (1 - ratio^{3/5}) N; the mass-balance n0 is the ground truth, and any
    disagreement beyond rounding is reported instead of silently resolved.
    """

    A: float
    kappa: float
    n0: float
    N_target: float
    E_target: float
    ratio: float
    n0_ratio_form: float
    residual_N: float
    residual_E: float

    @property
    def condensed(self) -> bool:
        return self.n0 > 0


def solve_equilibrium(N: float, E: float, *, rel_tol: float = 1e-10,
                      max_iter: int = 200) -> BoseEinsteinEquilibrium:
    """Find (A, kappa, n0) with the prescribed mass and energy.

    On the A > 1 branch the shape equation E/N^{5/3} = rho(A) is solved by
    bisection on log A (rho is continuous and increasing), then kappa follows
    from the mass equation.  On the condensate branch A = 1, kappa follows
    from the energy alone and n0 balances the mass.
    """
    if not (N > 0 and E > 0):
        raise DomainError("solve_equilibrium requires N > 0 and E > 0")
    ratio = temperature_ratio(N, E)
    z32 = zeta(1.5)
    z52 = zeta(2.5)
    if ratio <= 1.0:
        kappa = (E / (_GAMMA_52 * z52)) ** 0.4
        n_regular = kappa**1.5 * _GAMMA_32 * z32
        n0 = max(N - n_regular, 0.0)
        n0_rf = (1.0 - ratio ** 0.6) * N
        res_n = abs((n_regular + n0) - N) / N
        res_e = abs(kappa**2.5 * _GAMMA_52 * z52 - E) / E
        return BoseEinsteinEquilibrium(1.0, kappa, n0, N, E, ratio, n0_rf,
                                       res_n, res_e)

    target = E / N ** (5.0 / 3.0)

    # Bisect in v = sqrt(log A): rho has a square-root branch at A = 1
    # (rho - rho(1) ~ C sqrt(mu)), so it is Lipschitz in v all the way to the
    # critical point while any A- or log(A)-based bracket loses the root.
    def rho(v: float) -> float:
        mu = v * v
        return (_GAMMA_52 * _bose_g_mu(2.5, mu)
                / (_GAMMA_32 * _bose_g_mu(1.5, mu)) ** (5.0 / 3.0))

    v_lo, v_hi = 0.0, 1.0
    while rho(v_hi) < target:
        v_hi *= 2.0
        if v_hi * v_hi > 600.0:
            raise NumericsError(
                f"fugacity bracket exhausted for N={N}, E={E} (target {target})")
    for _ in range(max_iter):
        v_mid = 0.5 * (v_lo + v_hi)
        if rho(v_mid) < target:
            v_lo = v_mid
        else:
            v_hi = v_mid
        if v_hi - v_lo <= 1e-17 * max(1.0, v_hi):
            break
    mu = (0.5 * (v_lo + v_hi)) ** 2
    A = math.exp(mu)
    kappa = (N / (_GAMMA_32 * _bose_g_mu(1.5, mu))) ** (2.0 / 3.0)
    n_rec = kappa**1.5 * _GAMMA_32 * _bose_g_mu(1.5, mu)
    e_rec = kappa**2.5 * _GAMMA_52 * _bose_g_mu(2.5, mu)
    res_n = abs(n_rec - N) / N
    res_e = abs(e_rec - E) / E
    if max(res_n, res_e) > rel_tol:
        raise NumericsError(
            f"equilibrium solve did not converge: residuals N {res_n:.3e}, "
            f"E {res_e:.3e} exceed {rel_tol:.1e}")
    return BoseEinsteinEquilibrium(A, kappa, 0.0, N, E, ratio, 0.0,
                                   res_n, res_e)


def equilibrium_density(eq: BoseEinsteinEquilibrium, x) -> np.ndarray | float:
    """Regular-part density 1/(A e^{x/kappa} - 1) for x > 0.

    On the condensate branch this is the regular part only; n0 is metadata and
    never appears as a grid value.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0):
        raise DomainError("equilibrium_density requires x > 0")
    out = 1.0 / (eq.A * np.exp(arr / eq.kappa) - 1.0)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def discretize_equilibrium(eq: BoseEinsteinEquilibrium,
                           grid: EnergyGrid) -> DistributionState:
    """Sample the regular part at the grid nodes.

    The discrete moments drift from the targets by the quadrature and domain
    truncation error (plus n0 on the condensate branch, which by construction
    is never discretized); compare moment(state, 0/1) against the targets to
    quantify it.
    """
    return DistributionState(grid, equilibrium_density(eq, grid.nodes))


def discrete_equilibrium_state(grid: EnergyGrid, N: float, E: float,
                               max_iter: int = 200) -> DistributionState:
    """Bose-Einstein state whose GRID moments match (N, E) to rounding.

    The collision dynamics on a grid conserve the discrete moments and
    converge to the detailed-balance state with those same discrete moments,
    which differs from the sampled continuum equilibrium by the quadrature
    drift.  This solve makes that fixed point available as an exact
    convergence target: kappa is matched to the mass at fixed A (discrete
    mass is increasing in kappa), then A is matched to the energy (at fixed
    discrete mass the energy is increasing in A).

    Raises NumericsError when (N, E) is below the grid's A = 1 energy floor
    (the condensate regime has no regular discrete representation).
    """
    if not (N > 0 and E > 0):
        raise DomainError("discrete equilibrium needs N > 0 and E > 0")
    x = grid.nodes
    w = grid.weights

    def kappa_for_mass(a_val: float) -> float:
        def mass(kappa: float) -> float:
            return float(np.sum(w / (a_val * np.exp(x / kappa) - 1.0)))

        k_lo, k_hi = 1e-8, 1.0
        while mass(k_hi) < N:
            k_hi *= 2.0
            if k_hi > 1e12:
                raise NumericsError("kappa bracket exhausted in discrete solve")
        for _ in range(max_iter):
            k_mid = 0.5 * (k_lo + k_hi)
            if mass(k_mid) < N:
                k_lo = k_mid
            else:
                k_hi = k_mid
        return 0.5 * (k_lo + k_hi)

    def energy_at(a_val: float) -> float:
        kappa = kappa_for_mass(a_val)
        return float(np.sum(x * w / (a_val * np.exp(x / kappa) - 1.0)))

    if energy_at(1.0) > E:
        raise NumericsError(
            f"target energy {E} lies below the grid's A = 1 floor "
            f"{energy_at(1.0):.6g}; no regular discrete equilibrium exists")
    u_lo, u_hi = 0.0, 1.0
    while energy_at(math.exp(u_hi)) < E:
        u_hi *= 2.0
        if u_hi > 600.0:
            raise NumericsError("fugacity bracket exhausted in discrete solve")
    for _ in range(max_iter):
        u_mid = 0.5 * (u_lo + u_hi)
        if energy_at(math.exp(u_mid)) < E:
            u_lo = u_mid
        else:
            u_hi = u_mid
    a_val = math.exp(0.5 * (u_lo + u_hi))
    kappa = kappa_for_mass(a_val)
    return DistributionState(grid, 1.0 / (a_val * np.exp(x / kappa) - 1.0))
