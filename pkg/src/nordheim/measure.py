"""Energy grid and the discrete measure calculus.

States live on a uniform midpoint grid in the energy variable x = |v|^2/2 and
represent the regular part f of dF(x) = f(x) sqrt(x) dx.  The midpoint grid
keeps the conjugate energy x* = y + z - x on-grid in index arithmetic
(i* = j + k - i), which is what makes the discrete collision operator conserve
mass and energy exactly, and it never touches x = 0, so negative moments and
the 1/sqrt(x) prefactors stay finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from .errors import DomainError, GridMismatchError

# 3D isotropic change of variables: d^3v = 4 pi sqrt(2) sqrt(x) dx.
ENTROPY_PREFACTOR = 4.0 * math.pi * math.sqrt(2.0)
# Entropy dissipation carries 1/4 of the prefactor from the four-fold
# symmetrisation of the collision bracket.
DISSIPATION_PREFACTOR = ENTROPY_PREFACTOR / 4.0

# Values below this are clamped (inside entropy_dissipation only) before
# forming g = f/(1+f): Gamma(a, 0) is +inf, the clamp keeps D finite without
# modifying the state.
_F_FLOOR = 1e-300

_ZETA_3_2 = None  # filled lazily to avoid an import cycle with equilibrium


@dataclass(frozen=True)
class EnergyGrid:
    """Uniform midpoint grid on [0, x_max] with quadrature against sqrt(x) dx.

    nodes[i] = (i + 1/2) h with h = x_max / n; weights[i] = sqrt(nodes[i]) h.
    """

    n: int
    x_max: float
    h: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 4:
            raise DomainError("grid needs n >= 4")
        if not (self.x_max > 0):
            raise DomainError("x_max must be positive")
        h = self.x_max / self.n
        nodes = (np.arange(self.n) + 0.5) * h
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", np.sqrt(nodes) * h)

    def cell_index(self, x: float) -> int:
        """Index of the cell [i h, (i+1) h) containing x, clipped to range."""
        return int(min(max(math.floor(x / self.h), 0), self.n - 1))

    def same_as(self, other: "EnergyGrid") -> bool:
        return self.n == other.n and self.x_max == other.x_max


@dataclass(frozen=True)
class DistributionState:
    """Nonnegative density values f_i on a grid, dF = f sqrt(x) dx.

    clipped_mass records mass removed by positivity clipping in the step that
    produced this state (0 for states built directly).
    """

    grid: EnergyGrid
    f: np.ndarray
    time_stamp: float = 0.0
    clipped_mass: float = 0.0

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float)
        if f.shape != (self.grid.n,):
            raise DomainError(f"state needs {self.grid.n} values, got {f.shape}")
        if not np.all(np.isfinite(f)):
            raise DomainError("state values must be finite")
        if np.any(f < 0):
            raise DomainError("state values must be nonnegative")
        object.__setattr__(self, "f", f)

    def with_values(self, f: np.ndarray, time_stamp: float,
                    clipped_mass: float = 0.0) -> "DistributionState":
        return DistributionState(self.grid, f, time_stamp, clipped_mass)


def state_from_function(grid: EnergyGrid, fn, time_stamp: float = 0.0) -> DistributionState:
    """Sample a density function f(x) at the grid nodes."""
    return DistributionState(grid, np.asarray(fn(grid.nodes), dtype=float), time_stamp)


@dataclass(frozen=True)
class DiagnosticsRecord:
    """Per-sample functionals of a trajectory state.

    M_p holds the negative moments M_{-p} at the trajectory's p_list orders
    (the propagation monitors consume them); I_eps holds the condensate
    indicators at the eps_list scales.
    """

    t: float
    N: float
    E: float
    M_half: float
    M_minus_half: float
    M_p: tuple[float, ...]
    S: float
    D: float
    I_eps: tuple[float, ...]
    sup_f: float
    L1_to_eq: float


# ---------------------------------------------------------------------------
# Moments, norms, distances
# ---------------------------------------------------------------------------


def moment(state: DistributionState, p: float) -> float:
    """M_p = sum_i x_i^p f_i w_i, the discrete integral x^p f(x) sqrt(x) dx.

    Negative p is fine: the midpoint grid never contains x = 0.
    """
    g = state.grid
    return float(np.sum(g.nodes**p * state.f * g.weights))


def norm_k(state: DistributionState, k: float) -> float:
    """||F||_k = integral of (1+x)^k d|F|(x) on the grid."""
    if k < 0:
        raise DomainError("norm_k requires k >= 0")
    g = state.grid
    return float(np.sum((1.0 + g.nodes) ** k * state.f * g.weights))


def seminorm_1(state: DistributionState) -> float:
    """||F||_1^o = integral of x d|F|(x) = M_1."""
    return moment(state, 1.0)


def l1_distance(state_a: DistributionState, state_b: DistributionState) -> float:
    """||F - G||_1 = integral of (1+x) d|F - G|(x) on the shared grid."""
    if not state_a.grid.same_as(state_b.grid):
        raise GridMismatchError("l1_distance requires states on one grid")
    g = state_a.grid
    return float(np.sum((1.0 + g.nodes) * np.abs(state_a.f - state_b.f) * g.weights))


# ---------------------------------------------------------------------------
# Entropy and entropy dissipation
# ---------------------------------------------------------------------------


def entropy(state: DistributionState) -> float:
    """S = 4 pi sqrt2 * sum_i [(1+f) log(1+f) - f log f] w_i.

    The integrand is defined as 0 where f_i = 0.
    """
    f = state.f
    sigma = np.zeros_like(f)
    pos = f > 0
    fp = f[pos]
    sigma[pos] = (1.0 + fp) * np.log1p(fp) - fp * np.log(fp)
    return ENTROPY_PREFACTOR * float(np.sum(sigma * state.grid.weights))


@njit(cache=True, parallel=True)
def _dissipation_rows(lam, f, lg):
    n = f.shape[0]
    rows = np.zeros(n)
    for i in prange(n):
        fi = f[i]
        lgi = lg[i]
        acc = 0.0
        for j in range(n):
            lo = i - j
            if lo < 0:
                lo = 0
            hi = n + i - j
            if hi > n:
                hi = n
            fj = f[j]
            lgj = lg[j]
            for k in range(lo, hi):
                lv = lam[i, j, k]
                if lv == 0.0:
                    continue
                istar = j + k - i
                fs = f[istar]
                la = lgj + lg[k]
                lb = lgi + lg[istar]
                # Gamma(a, b) = (a - b) * log(a / b), evaluated through logs so
                # product underflow cannot create a spurious infinity.
                gam = (math.exp(la) - math.exp(lb)) * (la - lb)
                pi_f = (1.0 + fi) * (1.0 + fs) * (1.0 + fj) * (1.0 + f[k])
                acc += lv * pi_f * gam
        rows[i] = acc
    return rows


def entropy_dissipation(state: DistributionState, tensor) -> float:
    """Discrete entropy dissipation D >= 0 against a kernel tensor.

    D = (pi sqrt2) h^3 sum_{i,j,k} Lambda(i,j,k) Pi Gamma(g_j g_k, g_i g_i*)
    with g = f/(1+f) and Pi the product of the four (1+f) factors; f is
    clamped below at 1e-300 inside this functional only.  With this prefactor
    D equals dS/dt of the discrete collision dynamics, so the discrete entropy
    equality S(t) = S(0) + integral D holds up to the time-stepping error.
    """
    _require_same_grid(state, tensor)
    f = np.maximum(state.f, _F_FLOOR)
    lg = np.log(f) - np.log1p(f)
    rows = _dissipation_rows(tensor.lam, f, lg)
    h = state.grid.h
    return DISSIPATION_PREFACTOR * h**3 * float(np.sum(rows))


# ---------------------------------------------------------------------------
# Condensate indicator and kinetic temperature
# ---------------------------------------------------------------------------


def condensate_indicator(state: DistributionState, eps: float) -> float:
    """I_eps = integral of (1 - x/eps)_+^2 dF, the F({0}) proxy at scale eps."""
    if not (eps > 0):
        raise DomainError("eps must be positive")
    g = state.grid
    phi = np.clip(1.0 - g.nodes / eps, 0.0, None) ** 2
    return float(np.sum(phi * state.f * g.weights))


def temperature_ratio(N: float, E: float) -> float:
    """Kinetic temperature ratio T / T_c for a system with mass N, energy E.

    T / T_c = (E / (3 N^{5/3})) * (2 pi)^{1/3} * zeta(3/2)^{5/3} / zeta(5/2);
    the particle-mass and Boltzmann constants cancel in the ratio.  Ratio <= 1
    marks the condensation regime of the equilibrium.
    """
    if not (N > 0 and E > 0):
        raise DomainError("temperature_ratio requires N > 0 and E > 0")
    z32, z52 = _zeta_constants()
    return (E / (3.0 * N ** (5.0 / 3.0))) * (2.0 * math.pi) ** (1.0 / 3.0) * z32 ** (5.0 / 3.0) / z52


def _zeta_constants() -> tuple[float, float]:
    global _ZETA_3_2
    if _ZETA_3_2 is None:
        from .equilibrium import bose_g

        _ZETA_3_2 = (bose_g(1.5, 1.0), bose_g(2.5, 1.0))
    return _ZETA_3_2


def _require_same_grid(state: DistributionState, tensor) -> None:
    if tensor.n != state.grid.n or tensor.x_max != state.grid.x_max:
        raise GridMismatchError(
            f"tensor grid ({tensor.n}, {tensor.x_max}) does not match state "
            f"grid ({state.grid.n}, {state.grid.x_max})"
        )
