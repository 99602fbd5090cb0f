"""Classical mechanics of the quartic double well.

Below the barrier (V_min < E < 0) every quantity refers to motion inside ONE
well, between the inner and outer turning points.  Above it (E > 0) the orbit
spans [-outer, outer].  Any factor of two used for presentation is applied by
the caller.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError, SeparatrixError
from .model import CRITICAL_ENERGY, PotentialParams, _check_double_well
from .specfun import elliptic_kc, integrate_inverse_sqrt

QUAD_RTOL = 1e-12


class Branch(str, Enum):
    BELOW = "below_critical"
    ABOVE = "above_critical"


@dataclass(frozen=True)
class TurningPoints:
    inner: float | None
    outer: float
    energy: float


@dataclass(frozen=True)
class PeriodSample:
    energy: float
    period: float
    branch: Branch


def branch_of(E: float) -> Branch:
    return Branch.BELOW if E < CRITICAL_ENERGY else Branch.ABOVE


def _check_energy(E: float, params: PotentialParams) -> Branch:
    if not math.isfinite(E):
        raise DomainError(f"energy must be finite, got {E}")
    if E <= params.v_min:
        raise DomainError(f"E={E} <= V_min={params.v_min}: no classical motion")
    if E == CRITICAL_ENERGY:
        raise SeparatrixError("E = E_c lies on the separatrix (no closed orbit)")
    return branch_of(E)


def _squared_roots(E, a: float, b: float):
    """Roots y_out >= y_in of b*y**2 + a*y - E = 0 in y = x**2 (y_in < 0 when E > 0)."""
    E = np.asarray(E, dtype=float)
    y_out = (-a + np.sqrt(np.maximum(a * a + 4 * b * E, 0.0))) / (2 * b)
    # product of roots is -E/b; avoids cancellation as E -> 0
    y_in = -E / (b * y_out)
    return y_out, y_in


def turning_points(E: float, params: PotentialParams) -> TurningPoints:
    _check_energy(E, params)
    y_out, y_in = _squared_roots(E, params.a, params.b)
    inner = float(np.sqrt(y_in)) if E < 0 else None
    return TurningPoints(inner=inner, outer=float(np.sqrt(y_out)), energy=E)


def _integrate(make_f, lo, hi, rtol):
    n_all = np.arange(np.size(lo))
    return integrate_inverse_sqrt(make_f(n_all), lo, hi, rtol=rtol, rows=make_f)


def _check_batch(E, params: PotentialParams, branch: Branch) -> np.ndarray:
    E = np.atleast_1d(np.asarray(E, dtype=float))
    if branch is Branch.BELOW:
        if np.any(E <= params.v_min) or np.any(E >= 0):
            raise DomainError("well-branch energies must lie in (V_min, 0)")
    elif np.any(E <= 0):
        raise DomainError("above-branch energies must be positive")
    return E


def period_array(E, params: PotentialParams, branch: Branch, rtol: float = QUAD_RTOL) -> np.ndarray:
    """Vectorized period on one branch (single-well period below the barrier)."""
    E = _check_batch(E, params, branch)
    b = params.b
    y_out, y_in = _squared_roots(E, params.a, b)
    x2 = np.sqrt(y_out)
    if branch is Branch.BELOW:
        x1 = np.sqrt(y_in)
        # E - V = b (x - x1)(x2 - x)(x + x1)(x + x2)
        def make_f(i):
            p, q = x1[i, None], x2[i, None]
            return lambda x: 1.0 / np.sqrt((x + p) * (x + q))
        return math.sqrt(2 / b) * _integrate(make_f, x1, x2, rtol)

    c2 = -y_in
    # E - V = b (x2 - x)(x + x2)(x**2 + c2)
    def make_f(i):
        c = c2[i, None]
        return lambda x: 1.0 / np.sqrt(x * x + c)
    return math.sqrt(2 / b) * _integrate(make_f, -x2, x2, rtol)


def action_array(E, params: PotentialParams, branch: Branch, rtol: float = QUAD_RTOL) -> np.ndarray:
    """Vectorized loop action  2 * int sqrt(2 (E - V)) dx  on one branch."""
    E = _check_batch(E, params, branch)
    b = params.b
    y_out, y_in = _squared_roots(E, params.a, b)
    x2 = np.sqrt(y_out)
    if branch is Branch.BELOW:
        x1 = np.sqrt(y_in)

        def make_f(i):
            p, q = x1[i, None], x2[i, None]
            return lambda x: (x - p) * (q - x) * np.sqrt((x + p) * (x + q))
        return 2 * math.sqrt(2 * b) * _integrate(make_f, x1, x2, rtol)

    c2 = -y_in

    def make_f(i):
        yo, c = y_out[i, None], c2[i, None]
        return lambda x: (yo - x * x) * np.sqrt(x * x + c)
    return 2 * math.sqrt(2 * b) * _integrate(make_f, -x2, x2, rtol)


def period_quadrature(E: float, params: PotentialParams) -> float:
    """T = dJ/dE = int sqrt(2) / sqrt(E - V(x)) dx by singularity-free quadrature."""
    branch = _check_energy(E, params)
    return float(period_array(E, params, branch)[0])


def period_elliptic(E: float, params: PotentialParams) -> float:
    """Closed-form single-well period sqrt(2/b) * 2/(x1+x2) * K(1 - 4 x1 x2/(x1+x2)**2)."""
    if not params.v_min < E < 0:
        raise DomainError(f"elliptic period needs V_min < E < 0, got E={E}")
    tp = turning_points(E, params)
    x1, x2 = tp.inner, tp.outer
    kc = 2 * math.sqrt(x1 * x2) / (x1 + x2)
    return math.sqrt(2 / params.b) * 2 / (x1 + x2) * elliptic_kc(kc)


def period_asymptotic(E: float, params: PotentialParams) -> float:
    """Logarithmic asymptote of the single-well period as E -> 0-."""
    if E >= 0:
        raise DomainError(f"the near-separatrix asymptote is defined for E < 0, got {E}")
    if E <= params.v_min:
        raise DomainError(f"E={E} <= V_min")
    a, b = params.a, params.b
    return -math.sqrt(2 / -a) * (math.log(math.sqrt(b) / (-4 * a)) + 0.5 * math.log(abs(E)))


def asymptote_deviation(E: float, params: PotentialParams) -> float:
    """Relative deviation of the asymptote from the exact period."""
    t = period_elliptic(E, params)
    return abs(period_asymptotic(E, params) - t) / t


def asymptote_valid(E: float, params: PotentialParams, rtol: float = 0.05) -> bool:
    return asymptote_deviation(E, params) <= rtol


def action(E: float, params: PotentialParams, branch: Branch | None = None) -> float:
    """Loop action J(E); single-well loop below the barrier, full loop above it."""
    actual = _check_energy(E, params)
    if branch is not None and Branch(branch) is not actual:
        raise DomainError(f"E={E} does not belong to branch {Branch(branch).value}")
    return float(action_array(E, params, actual)[0])


def separatrix_action(params: PotentialParams) -> float:
    """Single-well action at E -> 0-:  2 sqrt(2) (-a)**1.5 / (3 b)."""
    return 2 * math.sqrt(2) * (-params.a) ** 1.5 / (3 * params.b)


def barrier_integral(E: float, params: PotentialParams) -> float:
    """int_{-x1}^{x1} sqrt(V(x) - E) dx over the forbidden region between the wells."""
    if not params.v_min < E < 0:
        raise DomainError(f"a barrier exists only for V_min < E < 0, got {E}")
    y_out, y_in = _squared_roots(E, params.a, params.b)
    x1 = math.sqrt(float(y_in))
    # V - E = b (x1 - x)(x1 + x)(x2**2 - x**2)
    f = lambda x: (y_in - x * x) * np.sqrt(y_out - x * x)
    return math.sqrt(params.b) * integrate_inverse_sqrt(f, -x1, x1, rtol=QUAD_RTOL)


def period_sample(E: float, params: PotentialParams) -> PeriodSample:
    return PeriodSample(energy=E, period=period_quadrature(E, params), branch=branch_of(E))


def lyapunov(params: PotentialParams, verify: bool = False) -> float:
    """Positive eigenvalue of the flow linearized at the saddle (0, 0): sqrt(-2a)."""
    _check_double_well(params.a, params.b)
    lam = math.sqrt(-2 * params.a)
    if verify:
        jac = np.array([[0.0, 1.0], [-2 * params.a, 0.0]])
        numeric = np.linalg.eigvals(jac).real.max()
        if not math.isclose(numeric, lam, rel_tol=1e-12):
            raise ArithmeticError(f"Jacobian eigenvalue {numeric} != sqrt(-2a) = {lam}")
    return lam


def dos_asymptote_line(params: PotentialParams) -> tuple[float, float]:
    """(slope, intercept) of 2*pi*hbar*rho against log|E| near the separatrix."""
    lam = lyapunov(params)
    return -2 / lam, -4 / lam * math.log(math.sqrt(params.b) / (-4 * params.a))


def dos_asymptote(E: float, params: PotentialParams) -> float:
    if not params.v_min < E < 0:
        raise DomainError(f"dos asymptote needs V_min < E < 0, got {E}")
    slope, intercept = dos_asymptote_line(params)
    return slope * math.log(abs(E)) + intercept
