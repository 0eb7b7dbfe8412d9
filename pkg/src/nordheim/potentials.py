"""Interaction potentials through their Fourier transform.

A potential enters the collision kernel only through phi_hat (the Fourier
transform of the interaction) and the derived quantity
Phi(r, rho) = (phi_hat(r) + phi_hat(rho))^2.  Balanced potentials satisfy

    0 <= phi_hat(r) <= b0 * r^eta / (1 + r^eta),   eta >= 1,

together with a scaling majorant phi_hat(a*r) <= k(a) * phi_hat(r) for
a in (1, sqrt(2)].  The constant q1 = max_{[1,sqrt2]} max{2 k k', 0} feeds the
kernel comparison inequalities and the non-condensation rate.
"""

from __future__ import annotations

import ast
import enum
import functools
import math
import operator
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, ModelError

SQRT2 = math.sqrt(2.0)

# Sampling density for the q1 maximisation on [1, sqrt2].  The maximand is
# smooth and for the built-in kinds monotone, so the endpoint sample is exact.
Q1_SAMPLES = 4097


# ---------------------------------------------------------------------------
# Safe expression grammar for user-supplied scaling functions k(a)
# ---------------------------------------------------------------------------

_ALLOWED_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_ALLOWED_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def compile_scaling_expression(text: str) -> Callable[[np.ndarray], np.ndarray]:
    """Compile a k(a) expression over the single variable ``a``.

    The grammar admits numbers, ``a``, parentheses and the operators
    ``+ - * / **`` (powers and rational functions).  Anything else is
    rejected, so configuration files cannot execute arbitrary code.
    """

    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ModelError(f"invalid k(a) expression {text!r}: {exc}") from None

    def ev(node: ast.AST, a):
        if isinstance(node, ast.Expression):
            return ev(node.body, a)
        if isinstance(node, ast.BinOp) and type(node.op) in _ALLOWED_BINOPS:
            return _ALLOWED_BINOPS[type(node.op)](ev(node.left, a), ev(node.right, a))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _ALLOWED_UNARY:
            return _ALLOWED_UNARY[type(node.op)](ev(node.operand, a))
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "a":
            return a
        raise ModelError(f"disallowed syntax in k(a) expression {text!r}")

    def fn(a):
        return ev(tree, np.asarray(a, dtype=float))

    fn(np.array([1.0]))  # validate eagerly
    return fn


# ---------------------------------------------------------------------------
# Validation reports (shared with collision_kernel)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    """A single violated inequality with its witnessing arguments."""

    name: str
    args: dict
    lhs: float
    rhs: float

    @property
    def excess(self) -> float:
        return self.lhs - self.rhs


@dataclass
class ValidationReport:
    """Outcome of an inequality sweep.  Violations are data, not errors."""

    checked: int = 0
    violations: list[Violation] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, name: str, args: dict, lhs: float, rhs: float) -> None:
        self.violations.append(Violation(name, args, float(lhs), float(rhs)))


# ---------------------------------------------------------------------------
# Potential models
# ---------------------------------------------------------------------------


class PotentialKind(enum.Enum):
    HARD_SPHERE = "hard_sphere"
    ETA_RATIONAL = "eta_rational"
    TABULATED = "table"


@dataclass(frozen=True)
class LowerBound:
    """Lower-envelope hypothesis a0 * r^(-beta) * 1_[R,inf)(r) <= phi_hat(r)."""

    a0: float
    beta: float
    R: float = 0.0

    def __post_init__(self):
        if not (self.a0 > 0):
            raise ModelError("lower bound a0 must be positive")
        if not (0.0 <= self.beta < 0.5):
            raise ModelError("lower bound beta must lie in [0, 1/2)")
        if self.R < 0:
            raise ModelError("lower bound R must be nonnegative")


@dataclass(frozen=True)
class PotentialModel:
    """An interaction potential described by its Fourier transform.

    kind
        HARD_SPHERE: phi_hat == 1/2 (so Phi == 1).
        ETA_RATIONAL: phi_hat(r) = b0 * r^eta / (1 + r^eta) with k(a) = a^eta.
        TABULATED: piecewise-linear interpolation of (r, phi_hat) samples,
        right-constant beyond the table, with a user-supplied k(a) expression.
    phi_cap
        Optional cap K applied at the Phi level, Phi_K = min(Phi, K), for
        bounded-kernel experiments.  None means no cap.
    """

    kind: PotentialKind
    b0: float = 0.5
    eta: float = 0.0
    k_expression: str = "1"
    table_r: tuple[float, ...] = ()
    table_phi: tuple[float, ...] = ()
    table_path: str = ""
    phi_cap: float | None = None
    lower_bound: LowerBound | None = None

    def __post_init__(self):
        if not (self.b0 > 0):
            raise ModelError("b0 must be positive")
        if self.kind is PotentialKind.ETA_RATIONAL and self.eta < 1.0:
            raise ModelError("eta_rational requires eta >= 1")
        if self.phi_cap is not None and not (self.phi_cap > 0):
            raise ModelError("phi_cap must be positive when set")
        if self.kind is PotentialKind.TABULATED:
            r = np.asarray(self.table_r, dtype=float)
            p = np.asarray(self.table_phi, dtype=float)
            if r.size < 2 or r.size != p.size:
                raise ModelError("tabulated potential needs >= 2 (r, phi) samples")
            if np.any(np.diff(r) <= 0):
                raise ModelError("tabulated r samples must be strictly increasing")
            if np.any(r < 0) or np.any(p < 0) or not np.all(np.isfinite(p)):
                raise ModelError("tabulated samples must be finite and nonnegative")
            compile_scaling_expression(self.k_expression)

    # -- scaling function ---------------------------------------------------

    def k_scaling(self, a) -> np.ndarray:
        """Evaluate the scaling function k on [1, sqrt2]."""
        a = np.asarray(a, dtype=float)
        if self.kind is PotentialKind.HARD_SPHERE:
            return np.ones_like(a)
        if self.kind is PotentialKind.ETA_RATIONAL:
            return a**self.eta
        return np.asarray(compile_scaling_expression(self.k_expression)(a), dtype=float)

    def k_derivative_closed_form(self, a: np.ndarray) -> np.ndarray | None:
        """k' where a closed form exists, else None (central differences)."""
        if self.kind is PotentialKind.HARD_SPHERE:
            return np.zeros_like(a)
        if self.kind is PotentialKind.ETA_RATIONAL:
            return self.eta * a ** (self.eta - 1.0)
        return None

    # -- canonical descriptor ------------------------------------------------

    def descriptor(self) -> str:
        """Canonical one-line serialization; hashed for kernel-cache identity.

        For tabulated potentials the line carries a fingerprint of the sample
        data so that editing a table under the same path changes the identity.
        """
        if self.kind is PotentialKind.HARD_SPHERE:
            base = "hard_sphere"
        elif self.kind is PotentialKind.ETA_RATIONAL:
            base = f"eta_rational b0={self.b0!r} eta={self.eta!r}"
        else:
            data = np.asarray(self.table_r + self.table_phi, dtype=float)
            fp = fnv1a64(data.tobytes())
            base = f"table {self.table_path or '<inline>'} data={fp:016x}"
        if self.phi_cap is not None:
            base += f" cap={self.phi_cap!r}"
        return base

    def potential_hash(self) -> int:
        return fnv1a64(self.descriptor().encode("utf-8"))

    # -- encoding for compiled kernels ----------------------------------------

    def kernel_params(self) -> tuple[int, float, float, float, np.ndarray, np.ndarray]:
        """(kind_code, p0, p1, phi_cap, table_r, table_phi) for the jit path."""
        cap = math.inf if self.phi_cap is None else float(self.phi_cap)
        empty = np.zeros(0, dtype=float)
        if self.kind is PotentialKind.HARD_SPHERE:
            return 0, 0.5, 0.0, cap, empty, empty
        if self.kind is PotentialKind.ETA_RATIONAL:
            return 1, float(self.b0), float(self.eta), cap, empty, empty
        return (
            2,
            0.0,
            0.0,
            cap,
            np.asarray(self.table_r, dtype=float),
            np.asarray(self.table_phi, dtype=float),
        )


def hard_sphere() -> PotentialModel:
    """phi_hat == 1/2, the hard-sphere model (Phi == 1).

    The natural envelope constant is b0 = 1/2 = sup phi_hat, which makes the
    4*b0^2 loss and kernel bounds sharp for this model.
    """
    return PotentialModel(kind=PotentialKind.HARD_SPHERE, b0=0.5, eta=0.0)


def eta_rational(b0: float, eta: float, phi_cap: float | None = None,
                 lower_bound: LowerBound | None = None) -> PotentialModel:
    """Balanced potential phi_hat(r) = b0 * r^eta / (1 + r^eta), eta >= 1."""
    return PotentialModel(
        kind=PotentialKind.ETA_RATIONAL, b0=b0, eta=eta,
        phi_cap=phi_cap, lower_bound=lower_bound,
    )


def tabulated(r: Sequence[float], phi: Sequence[float], k_expression: str,
              b0: float, eta: float, path: str = "",
              phi_cap: float | None = None) -> PotentialModel:
    """Tabulated phi_hat with user-supplied k(a) and claimed (b0, eta) envelope.

    The toolkit only falsifies the claimed envelope via check_assumption; it
    never certifies it.
    """
    return PotentialModel(
        kind=PotentialKind.TABULATED, b0=b0, eta=eta,
        k_expression=k_expression, table_r=tuple(float(v) for v in r),
        table_phi=tuple(float(v) for v in phi), table_path=path, phi_cap=phi_cap,
    )


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def phi_hat(model: PotentialModel, r) -> np.ndarray | float:
    """Evaluate phi_hat(r) for r >= 0 (scalar or array)."""
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0):
        raise DomainError("phi_hat requires r >= 0")
    if model.kind is PotentialKind.HARD_SPHERE:
        out = np.full_like(arr, 0.5)
    elif model.kind is PotentialKind.ETA_RATIONAL:
        re = arr**model.eta
        out = model.b0 * re / (1.0 + re)
    else:
        # np.interp is piecewise linear with constant extrapolation both sides.
        out = np.interp(arr, np.asarray(model.table_r), np.asarray(model.table_phi))
    return float(out) if np.isscalar(r) or arr.ndim == 0 else out


def big_phi(model: PotentialModel, r, rho) -> np.ndarray | float:
    """Phi(r, rho) = (phi_hat(r) + phi_hat(rho))^2, capped at phi_cap if set."""
    s = np.asarray(phi_hat(model, r)) + np.asarray(phi_hat(model, rho))
    out = s * s
    if model.phi_cap is not None:
        out = np.minimum(out, model.phi_cap)
    scalar = np.isscalar(r) and np.isscalar(rho)
    return float(out) if scalar else out


@functools.lru_cache(maxsize=256)
def compute_q1(model: PotentialModel, samples: int = Q1_SAMPLES) -> float:
    """q1 = max over [1, sqrt2] of max{2 k(a) k'(a), 0}, cached per model.

    Uses the closed-form derivative for the built-in kinds and central
    differences for tabulated expression k.  The dense endpoint-inclusive
    sample is exact whenever the maximand is monotone, which holds for
    k(a) = a^eta.
    """
    a = np.linspace(1.0, SQRT2, samples)
    k = np.asarray(model.k_scaling(a), dtype=float)
    if not np.all(np.isfinite(k)):
        raise ModelError("k(a) produced non-finite values on [1, sqrt2]")
    kp = model.k_derivative_closed_form(a)
    if kp is None:
        # Central differences inside, second-order one-sided at the ends.
        step = a[1] - a[0]
        kp = np.empty_like(k)
        kp[1:-1] = (k[2:] - k[:-2]) / (2.0 * step)
        kp[0] = (-3.0 * k[0] + 4.0 * k[1] - k[2]) / (2.0 * step)
        kp[-1] = (3.0 * k[-1] - 4.0 * k[-2] + k[-3]) / (2.0 * step)
    if not np.all(np.isfinite(kp)):
        raise ModelError("k'(a) produced non-finite values on [1, sqrt2]")
    maximand = np.maximum(2.0 * k * kp, 0.0)
    return float(np.max(maximand))


def envelope(model: PotentialModel, r) -> np.ndarray:
    """The claimed upper envelope b0 * r^eta / (1 + r^eta)."""
    arr = np.asarray(r, dtype=float)
    re = arr**model.eta
    return model.b0 * re / (1.0 + re)


def check_assumption(model: PotentialModel,
                     r_samples: Sequence[float],
                     a_samples: Sequence[float]) -> ValidationReport:
    """Sweep the balanced-potential inequalities on the given samples.

    Checks, with witnesses recorded per violation:
      (nonneg)   phi_hat(r) >= 0
      (envelope) phi_hat(r) <= b0 * r^eta / (1 + r^eta)
      (scaling)  phi_hat(a*r) <= k(a) * phi_hat(r)

    An empty violation list means only "consistent with the assumption on the
    samples"; the sweep falsifies, it does not certify.
    """
    r = np.asarray(list(r_samples), dtype=float)
    a = np.asarray(list(a_samples), dtype=float)
    if r.size == 0 or a.size == 0:
        raise DomainError("check_assumption needs nonempty sample lists")
    if np.any(r < 0):
        raise DomainError("r samples must be nonnegative")
    if np.any((a <= 1.0) | (a > SQRT2 + 1e-12)):
        raise DomainError("a samples must lie in (1, sqrt2]")

    report = ValidationReport()
    tol = 1e-12
    ph = np.asarray(phi_hat(model, r))
    env = envelope(model, r)
    for i in range(r.size):
        report.checked += 1
        if ph[i] < -tol:
            report.add("nonneg", {"r": float(r[i])}, -ph[i], 0.0)
        if ph[i] > env[i] * (1.0 + tol) + tol:
            report.add("envelope", {"r": float(r[i])}, ph[i], env[i])
    kvals = np.asarray(model.k_scaling(a), dtype=float)
    for j in range(a.size):
        lhs = np.asarray(phi_hat(model, a[j] * r))
        rhs = kvals[j] * ph
        bad = lhs > rhs * (1.0 + tol) + tol
        report.checked += r.size
        for i in np.nonzero(bad)[0]:
            report.add("scaling", {"r": float(r[i]), "a": float(a[j])},
                       float(lhs[i]), float(rhs[i]))
    return report


def satisfies_assumption(model: PotentialModel) -> bool:
    """Default dense sweep of check_assumption (falsification only)."""
    r = np.concatenate([np.linspace(0.0, 8.0, 257), np.geomspace(1e-4, 64.0, 257)])
    a = np.linspace(1.0, SQRT2, 33)[1:]
    return check_assumption(model, r, a).ok


# ---------------------------------------------------------------------------
# FNV-1a hashing of canonical descriptors
# ---------------------------------------------------------------------------

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h
