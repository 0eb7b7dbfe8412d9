"""Collision kernel W(x, y, z): quadrature, closed forms, tensor build, checks.

W is the effective rate for the isotropic energy exchange (y, z) -> (x, x*)
with conjugate energy x* = (y + z - x)_+:

    W(x,y,z) = 1/(4 pi sqrt(xyz)) * int ds int dtheta Phi(sqrt2 s, sqrt2 Y*)

over s in [ |sqrt x - sqrt y| v |sqrt x* - sqrt z|,
            (sqrt x + sqrt y) ^ (sqrt x* + sqrt z) ]  and theta in [0, 2pi].

The s-range has length 2 min{sqrt x, sqrt x*, sqrt y, sqrt z}; the upper bound
is always computed as lower + length, which is exact in the reals and avoids
catastrophic cancellation when the range is short.

Quadrature layout.  The theta integrand depends on theta through cos(theta)
only, so the [0, 2pi] integral equals twice the [0, pi] integral; we place
theta_order Gauss-Legendre nodes on [0, pi] and double, which doubles the
effective resolution per period at no cost.  In s, the integrand develops a
boundary layer of width ~lower-endpoint whenever all four energies nearly
coincide (u(s) = (x - y + s^2)^2 / (4 s^2) plunges over that scale), and the
analytic continuation carries branch points just outside either endpoint
when the two range candidates there nearly coincide.  The s-integral is a
composite three-panel Gauss-Legendre rule (short graded panels against both
endpoints) in log(s) when the lower endpoint is positive, in s itself
otherwise; each panel carries s_order nodes.  This layout is what meets the
1e-6 symmetry and order-doubling gates at the default orders; a single
linear panel stalls near coincident energies.

The stored tensor is Lambda(i,j,k), the arithmetic mean of the bare pair
integral T(a; b, c) = (1/4 pi) * int int Phi  (equal to sqrt(abc) W(a,b,c))
over the four role assignments (x; y,z), (x*; y,z), (y; x,x*), (z; x,x*),
with the (b, c) arguments in canonical ascending order.  This makes the
symmetries Lambda(i,j,k) = Lambda(i,k,j) = Lambda(i*,j,k) = Lambda(j,i,i*)
hold bit-exactly, which in turn makes the discrete collision operator
conserve mass and energy to rounding error regardless of quadrature error.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit, prange

from .errors import CacheMissError, DomainError, FormatError, SizingError
from .measure import EnergyGrid
from .potentials import PotentialModel, ValidationReport, big_phi, compute_q1, satisfies_assumption

SQRT2 = math.sqrt(2.0)

# Ranges shorter than this collapse to W = 0: min4 ~ 0 forces W ~ 0 there.
DEGENERATE_RANGE = 1e-12

# Relative quadrature slack allowed by the inequality sweeps.
QUADRATURE_SLACK = 1e-6

# Refuse tensor allocations beyond this budget (dense n^3 float64).
MAX_TENSOR_BYTES = 2 << 30


@dataclass(frozen=True)
class QuadratureSpec:
    """Gauss-Legendre orders for the (s, theta) double integral.

    s_order nodes per s-panel (two panels per evaluation) and theta_order
    nodes on the half-period [0, pi] (doubled by symmetry).  The defaults are
    gated by the order-doubling convergence test; note that potentials with
    odd eta are less smooth in theta and may warrant higher orders.
    """

    s_order: int = 32
    theta_order: int = 32

    def __post_init__(self):
        if self.s_order < 2 or self.theta_order < 2:
            raise DomainError("quadrature orders must be >= 2")

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return _gauss_arrays(self.s_order, self.theta_order)


@lru_cache(maxsize=32)
def _gauss_arrays(s_order: int, theta_order: int):
    s_ref, s_wts = np.polynomial.legendre.leggauss(s_order)
    t_ref, t_wts = np.polynomial.legendre.leggauss(theta_order)
    theta = 0.5 * math.pi * (t_ref + 1.0)
    cos_th = np.cos(theta)
    w_th = math.pi * t_wts  # doubled half-period weights
    return s_ref, s_wts, cos_th, w_th


# ---------------------------------------------------------------------------
# Compiled quadrature core
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _phi_hat_jit(kind, p0, p1, tr, tp, r):
    if kind == 0:
        return 0.5
    if kind == 1:
        re = r**p1
        return p0 * re / (1.0 + re)
    m = tr.shape[0]
    if r <= tr[0]:
        return tp[0]
    if r >= tr[m - 1]:
        return tp[m - 1]
    lo = 0
    hi = m - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tr[mid] <= r:
            lo = mid
        else:
            hi = mid
    t = (r - tr[lo]) / (tr[hi] - tr[lo])
    return tp[lo] + (tp[hi] - tp[lo]) * t


@njit(cache=True)
def _pair_integral(x, y, z, kind, p0, p1, cap, tr, tp, s_ref, s_wts, cos_th, w_th):
    """T(x; y, z) = (1/4 pi) * double integral of Phi = sqrt(xyz) W(x,y,z)."""
    xs = y + z - x
    if xs <= 0.0:
        return 0.0
    sx = math.sqrt(x)
    sy = math.sqrt(y)
    sz = math.sqrt(z)
    sxs = math.sqrt(xs)
    lo = max(abs(sx - sy), abs(sxs - sz))
    m4 = min(min(sx, sy), min(sz, sxs))
    ell = 2.0 * m4
    if ell < DEGENERATE_RANGE:
        return 0.0
    ns = s_ref.shape[0]
    nt = cos_th.shape[0]
    use_log = lo > 1e-9 * ell
    if use_log:
        a = math.log(lo)
        b = math.log(lo + ell)
    else:
        a = lo
        b = lo + ell
    # Short graded panels at both ends: the analytic continuation of the
    # integrand has branch points just outside the range whenever the two
    # lower (or upper) range candidates nearly coincide, and plain rules
    # stall against them.
    edge = min(0.15, 0.25 * (b - a))
    cut1 = a + edge
    cut2 = b - edge
    acc = 0.0
    for panel in range(3):
        if panel == 0:
            pa = a
            pb = cut1
        elif panel == 1:
            pa = cut1
            pb = cut2
        else:
            pa = cut2
            pb = b
        half = 0.5 * (pb - pa)
        for ii in range(ns):
            t = pa + half * (s_ref[ii] + 1.0)
            if use_log:
                s = math.exp(t)
                ws = half * s_wts[ii] * s
            else:
                s = t
                ws = half * s_wts[ii]
            d = x - y + s * s
            u = d * d / (4.0 * s * s)
            rz = z - u
            rx = x - u
            if rz < 0.0:
                rz = 0.0
            if rx < 0.0:
                rx = 0.0
            cross = 2.0 * math.sqrt(rz * rx)
            base = rz + rx
            ph_s = _phi_hat_jit(kind, p0, p1, tr, tp, SQRT2 * s)
            tacc = 0.0
            for jj in range(nt):
                y2 = base + cross * cos_th[jj]
                if y2 < 0.0:
                    y2 = 0.0
                ph = ph_s + _phi_hat_jit(kind, p0, p1, tr, tp, SQRT2 * math.sqrt(y2))
                phi2 = ph * ph
                if phi2 > cap:
                    phi2 = cap
                tacc += w_th[jj] * phi2
            acc += ws * tacc
    return acc / (4.0 * math.pi)


@njit(cache=True, parallel=True)
def _w_batch(xyz, kind, p0, p1, cap, tr, tp, s_ref, s_wts, cos_th, w_th):
    m = xyz.shape[0]
    out = np.empty(m)
    for i in prange(m):
        x = xyz[i, 0]
        y = xyz[i, 1]
        z = xyz[i, 2]
        t = _pair_integral(x, y, z, kind, p0, p1, cap, tr, tp, s_ref, s_wts, cos_th, w_th)
        out[i] = t / math.sqrt(x * y * z)
    return out


@njit(cache=True, parallel=True)
def _build_lambda(n, h, kind, p0, p1, cap, tr, tp, s_ref, s_wts, cos_th, w_th):
    # Parallel over the resonance lines m = j + k = i + i*: every symmetric
    # image of a triple stays on its line, so writes never race and each entry
    # is produced by one fixed-order computation (bit-identical for any
    # thread count).
    lam = np.zeros((n, n, n))
    for m in prange(2 * n - 1):
        amin = m - (n - 1)
        if amin < 0:
            amin = 0
        amax = m // 2
        for a in range(amin, amax + 1):
            ac = m - a
            xa = (a + 0.5) * h
            xac = (ac + 0.5) * h
            for b in range(a, amax + 1):
                bc = m - b
                xb = (b + 0.5) * h
                xbc = (bc + 0.5) * h
                t1 = _pair_integral(xa, xb, xbc, kind, p0, p1, cap, tr, tp, s_ref, s_wts, cos_th, w_th)
                t2 = _pair_integral(xac, xb, xbc, kind, p0, p1, cap, tr, tp, s_ref, s_wts, cos_th, w_th)
                t3 = _pair_integral(xb, xa, xac, kind, p0, p1, cap, tr, tp, s_ref, s_wts, cos_th, w_th)
                t4 = _pair_integral(xbc, xa, xac, kind, p0, p1, cap, tr, tp, s_ref, s_wts, cos_th, w_th)
                v = 0.25 * (t1 + t2 + t3 + t4)
                lam[a, b, bc] = v
                lam[a, bc, b] = v
                lam[ac, b, bc] = v
                lam[ac, bc, b] = v
                lam[b, a, ac] = v
                lam[b, ac, a] = v
                lam[bc, a, ac] = v
                lam[bc, ac, a] = v
    return lam


# ---------------------------------------------------------------------------
# Point evaluations
# ---------------------------------------------------------------------------


def y_star(x: float, y: float, z: float, s: float, theta: float) -> float:
    """Y*(x, y, z, s, theta): the second Phi argument of the kernel integrand.

    Y* = | sqrt((z-u)_+) + e^{i theta} sqrt((x-u)_+) | with
    u = (x - y + s^2)^2 / (4 s^2); equals 0 at s = 0.
    """
    if min(x, y, z, s) < 0:
        raise DomainError("y_star requires nonnegative x, y, z, s")
    if s == 0.0:
        return 0.0
    u = (x - y + s * s) ** 2 / (4.0 * s * s)
    rz = max(z - u, 0.0)
    rx = max(x - u, 0.0)
    val = rz + rx + 2.0 * math.sqrt(rz * rx) * math.cos(theta)
    return math.sqrt(max(val, 0.0))


def w_point(model: PotentialModel, x: float, y: float, z: float,
            quad: QuadratureSpec = QuadratureSpec()) -> float:
    """W(x, y, z) by quadrature for strictly positive arguments.

    Returns 0 when x >= y + z (empty collision range).  Zero arguments belong
    to w_boundary.
    """
    if min(x, y, z) <= 0:
        raise DomainError("w_point requires x, y, z > 0 (use w_boundary for zeros)")
    kind, p0, p1, cap, tr, tp = model.kernel_params()
    s_ref, s_wts, cos_th, w_th = quad.arrays()
    t = _pair_integral(float(x), float(y), float(z), kind, p0, p1, cap, tr, tp,
                       s_ref, s_wts, cos_th, w_th)
    return t / math.sqrt(x * y * z)


def w_point_many(model: PotentialModel, triples: np.ndarray,
                 quad: QuadratureSpec = QuadratureSpec()) -> np.ndarray:
    """Vectorized w_point over an (m, 3) array of positive triples."""
    xyz = np.ascontiguousarray(np.asarray(triples, dtype=float))
    if xyz.ndim != 2 or xyz.shape[1] != 3:
        raise DomainError("triples must have shape (m, 3)")
    if np.any(xyz <= 0):
        raise DomainError("w_point_many requires positive triples")
    kind, p0, p1, cap, tr, tp = model.kernel_params()
    s_ref, s_wts, cos_th, w_th = quad.arrays()
    return _w_batch(xyz, kind, p0, p1, cap, tr, tp, s_ref, s_wts, cos_th, w_th)


def w_boundary(model: PotentialModel, x: float, y: float, z: float) -> float:
    """Closed-form W on the boundary of the domain (one vanishing argument).

    Cases: (x=0, y,z>0), (y=0, z>x>0), (z=0, y>x>0); every other degenerate
    pattern returns 0.
    """
    if min(x, y, z) < 0:
        raise DomainError("w_boundary requires nonnegative arguments")
    if x == 0.0 and y > 0.0 and z > 0.0:
        return big_phi(model, math.sqrt(2.0 * y), math.sqrt(2.0 * z)) / math.sqrt(y * z)
    if y == 0.0 and z > x > 0.0:
        return big_phi(model, math.sqrt(2.0 * x), math.sqrt(2.0 * (z - x))) / math.sqrt(x * z)
    if z == 0.0 and y > x > 0.0:
        return big_phi(model, math.sqrt(2.0 * (y - x)), math.sqrt(2.0 * x)) / math.sqrt(x * y)
    return 0.0


def w_hard_sphere(x: float, y: float, z: float) -> float:
    """Closed form W_H = min{sqrt x, sqrt y, sqrt z, sqrt x*} / sqrt(xyz)."""
    if min(x, y, z) <= 0:
        raise DomainError("w_hard_sphere requires x, y, z > 0")
    xs = max(y + z - x, 0.0)
    return min(math.sqrt(x), math.sqrt(y), math.sqrt(z), math.sqrt(xs)) / math.sqrt(x * y * z)


# ---------------------------------------------------------------------------
# Tensor build and persistence
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KernelTensor:
    """Dense symmetrized collision weights Lambda(i,j,k) on a midpoint grid."""

    n: int
    x_max: float
    potential_hash: int
    quad: QuadratureSpec
    lam: np.ndarray = field(repr=False)

    def identity(self) -> tuple:
        return (self.n, self.x_max, self.quad.s_order, self.quad.theta_order,
                self.potential_hash)


def build_tensor(model: PotentialModel, grid: EnergyGrid,
                 quad: QuadratureSpec = QuadratureSpec()) -> KernelTensor:
    """Tabulate Lambda(i,j,k) on the grid (entries with i* off-grid stay 0)."""
    required = 8 * grid.n**3
    if required > MAX_TENSOR_BYTES:
        raise SizingError(
            f"dense tensor for n={grid.n} needs {required} bytes "
            f"(budget {MAX_TENSOR_BYTES})", required)
    kind, p0, p1, cap, tr, tp = model.kernel_params()
    s_ref, s_wts, cos_th, w_th = quad.arrays()
    lam = _build_lambda(grid.n, grid.h, kind, p0, p1, cap, tr, tp,
                        s_ref, s_wts, cos_th, w_th)
    return KernelTensor(grid.n, grid.x_max, model.potential_hash(), quad, lam)


_MAGIC = b"BKW1"
_HEADER = struct.Struct("<4sIdIIQ")


def save_tensor(tensor: KernelTensor, path) -> None:
    """Write the little-endian cache file (header + row-major f64 entries)."""
    header = _HEADER.pack(_MAGIC, tensor.n, tensor.x_max,
                          tensor.quad.s_order, tensor.quad.theta_order,
                          tensor.potential_hash)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(tensor.lam, dtype="<f8").tobytes())


def load_tensor(path, *, n: int | None = None, x_max: float | None = None,
                quad: QuadratureSpec | None = None,
                potential_hash: int | None = None) -> KernelTensor:
    """Read a cache file; optional expectations turn mismatches into cache misses.

    Raises FormatError for corrupt or truncated files and CacheMissError when
    the header does not match a requested configuration (caller rebuilds).
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: shorter than header")
    magic, fn, fxmax, fs, ft, fhash = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 8 * fn**3
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    mismatches = []
    if n is not None and fn != n:
        mismatches.append(f"n {fn} != {n}")
    if x_max is not None and fxmax != x_max:
        mismatches.append(f"x_max {fxmax} != {x_max}")
    if quad is not None and (fs, ft) != (quad.s_order, quad.theta_order):
        mismatches.append(f"quad ({fs},{ft}) != ({quad.s_order},{quad.theta_order})")
    if potential_hash is not None and fhash != potential_hash:
        mismatches.append(f"potential hash {fhash:016x} != {potential_hash:016x}")
    if mismatches:
        raise CacheMissError(f"{path}: " + "; ".join(mismatches))
    lam = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(fn, fn, fn)
    return KernelTensor(fn, fxmax, fhash, QuadratureSpec(fs, ft), lam.copy())


# ---------------------------------------------------------------------------
# Kernel inequality sweep
# ---------------------------------------------------------------------------


def verify_kernel_inequalities(model: PotentialModel,
                               samples,
                               quad: QuadratureSpec = QuadratureSpec(),
                               *,
                               q1: float | None = None,
                               angle_draws: int = 4,
                               seed: int = 0) -> ValidationReport:
    """Sweep the kernel comparison inequalities on (x, y, z) samples.

    Each sample triple is tested against every inequality whose domain it
    satisfies:

      W01: W(x,y,z) <= 4 b0^2 min{1, max(8x,8y,8z)^eta} min4 / sqrt(xyz)
      W02: W(0,y,z) <= 4 b0^2 min{1, max(8y,8z)^eta} / sqrt(yz)
      W03: W(x,0,z) <= 4 b0^2 min{1, (8z)^eta} / sqrt(xz)   (z > x > 0)
      W04: W(x,y,0) <= 4 b0^2 min{1, (8y)^eta} / sqrt(xy)   (y > x > 0)
      W05: W(x,y,z) <= (1 + q1 y/z) W(y,x,z)                (x <= y <= z/2)
      Ystar: 1 <= Y*(x,y,z)/Y*(y,x,z) <= sqrt(z/(z-y))      (x <= y < z)

    The Ystar ratio bound is the pointwise step of the kernel-comparison
    argument; it is provable exactly on the half-period cos(theta) >= 0 (and
    for every theta when x = 0, where it is an identity), but can fail
    pointwise on the other half-period, so theta is drawn from the valid
    half.  The integrated consequence W05 carries no such restriction and is
    swept over its full domain.

    Violations beyond the relative quadrature slack are recorded as data.
    Models failing the balanced-potential assumption (e.g. hard sphere) get a
    precondition report instead of a sweep.
    """
    report = ValidationReport()
    if not satisfies_assumption(model):
        report.notes.append(
            "precondition failed: model does not satisfy the balanced-potential "
            "assumption on the default sweep; inequalities not applicable")
        report.add("precondition", {}, 1.0, 0.0)
        return report
    if q1 is None:
        q1 = compute_q1(model)
    b0sq4 = 4.0 * model.b0**2
    eta = model.eta
    tol = QUADRATURE_SLACK
    rng = np.random.default_rng(seed)

    def w_pos(x, y, z):
        return w_point(model, x, y, z, quad)

    for x, y, z in np.asarray(list(samples), dtype=float):
        if min(x, y, z) < 0:
            raise DomainError("samples must be nonnegative")
        if x > 0 and y > 0 and z > 0:
            report.checked += 1
            lhs = w_pos(x, y, z)
            min4 = min(math.sqrt(x), math.sqrt(y), math.sqrt(z),
                       math.sqrt(max(y + z - x, 0.0)))
            rhs = b0sq4 * min(1.0, max(8 * x, 8 * y, 8 * z) ** eta) * min4 / math.sqrt(x * y * z)
            if lhs > rhs * (1.0 + tol):
                report.add("W01", {"x": x, "y": y, "z": z}, lhs, rhs)
        if x == 0 and y > 0 and z > 0:
            report.checked += 1
            lhs = w_boundary(model, 0.0, y, z)
            rhs = b0sq4 * min(1.0, max(8 * y, 8 * z) ** eta) / math.sqrt(y * z)
            if lhs > rhs * (1.0 + tol):
                report.add("W02", {"y": y, "z": z}, lhs, rhs)
        if y == 0 and z > x > 0:
            report.checked += 1
            lhs = w_boundary(model, x, 0.0, z)
            rhs = b0sq4 * min(1.0, (8 * z) ** eta) / math.sqrt(x * z)
            if lhs > rhs * (1.0 + tol):
                report.add("W03", {"x": x, "z": z}, lhs, rhs)
        if z == 0 and y > x > 0:
            report.checked += 1
            lhs = w_boundary(model, x, y, 0.0)
            rhs = b0sq4 * min(1.0, (8 * y) ** eta) / math.sqrt(x * y)
            if lhs > rhs * (1.0 + tol):
                report.add("W04", {"x": x, "y": y}, lhs, rhs)
        if 0 <= x <= y <= 0.5 * z:
            report.checked += 1
            if x > 0:
                lhs = w_pos(x, y, z)
                rhs = (1.0 + q1 * y / z) * w_pos(y, x, z)
            else:
                lhs = w_boundary(model, 0.0, y, z)
                rhs = (1.0 + q1 * y / z) * w_boundary(model, y, 0.0, z)
            if lhs > rhs * (1.0 + tol) + 1e-300:
                report.add("W05", {"x": x, "y": y, "z": z}, lhs, rhs)
        if 0 <= x <= y < z:
            # Y* comparison on the admissible s-range [sqrt y - sqrt x,
            # sqrt x + sqrt y] where both parametrisations have u <= min(x,y).
            s_lo = math.sqrt(y) - math.sqrt(x)
            s_hi = math.sqrt(y) + math.sqrt(x)
            cap_ratio = math.sqrt(z / (z - y))
            for _ in range(angle_draws):
                s = s_lo if s_hi == s_lo else rng.uniform(s_lo, s_hi)
                if s <= 0:
                    continue
                theta = rng.uniform(-0.5 * math.pi, 0.5 * math.pi)
                if x == 0.0:
                    theta = rng.uniform(0.0, 2.0 * math.pi)
                num = y_star(x, y, z, s, theta)
                den = y_star(y, x, z, s, theta)
                if den < 1e-12:
                    continue
                report.checked += 1
                ratio = num / den
                if ratio < 1.0 - tol:
                    report.add("Ystar_lower", {"x": x, "y": y, "z": z, "s": s,
                                               "theta": theta}, 1.0, ratio)
                if ratio > cap_ratio * (1.0 + tol):
                    report.add("Ystar_upper", {"x": x, "y": y, "z": z, "s": s,
                                               "theta": theta}, ratio, cap_ratio)
    return report
