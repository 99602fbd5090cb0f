"""Elliptic integrals, Hermite roots and quadrature rules.

Elliptic integrals use the PARAMETER convention: the second argument is
m = k**2, not the modulus k.  K(m) diverges logarithmically at m = 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import eigvalsh_tridiagonal

from .errors import DomainError, NumericError

HERMITE_MAX_NODES = 2000


def agm(a: float, b: float, rtol: float = 1e-16) -> float:
    """Arithmetic-geometric mean of two positive numbers."""
    if a <= 0 or b <= 0:
        raise DomainError(f"agm requires positive arguments, got {a}, {b}")
    for _ in range(64):
        if abs(a - b) <= rtol * a:
            return 0.5 * (a + b)
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return a


def elliptic_kc(kc: float) -> float:
    """K(m) written through the complementary modulus kc = sqrt(1 - m).

    Avoids forming 1 - m when m is close to 1.
    """
    if not kc > 0:
        raise DomainError(f"complementary modulus must be positive, got {kc}")
    return math.pi / (2.0 * agm(1.0, kc))


def elliptic_k(m: float) -> float:
    """Complete elliptic integral of the first kind, K(m), by AGM."""
    if not m < 1:
        raise DomainError(f"K(m) is singular for m >= 1 (got m={m})")
    return elliptic_kc(math.sqrt(1.0 - m))


def carlson_rf(x: float, y: float, z: float) -> float:
    """Carlson's symmetric integral R_F by duplication. At most one argument may be 0."""
    if min(x, y, z) < 0 or (x == 0) + (y == 0) + (z == 0) > 1:
        raise DomainError("carlson_rf needs non-negative arguments, at most one zero")
    for _ in range(200):
        sx, sy, sz = math.sqrt(x), math.sqrt(y), math.sqrt(z)
        lam = sx * (sy + sz) + sy * sz
        x, y, z = 0.25 * (x + lam), 0.25 * (y + lam), 0.25 * (z + lam)
        ave = (x + y + z) / 3.0
        dx, dy, dz = (ave - x) / ave, (ave - y) / ave, (ave - z) / ave
        if max(abs(dx), abs(dy), abs(dz)) <= 1e-3:
            break
    else:
        raise NumericError("carlson_rf did not converge")
    e2 = dx * dy - dz * dz
    e3 = dx * dy * dz
    return (1.0 + (e2 / 24.0 - 0.1 - 3.0 * e3 / 44.0) * e2 + e3 / 14.0) / math.sqrt(ave)


def elliptic_f(phi: float, m: float) -> float:
    """Incomplete elliptic integral of the first kind F(phi | m), |phi| <= pi/2."""
    if not m < 1:
        raise DomainError(f"F(phi|m) requires m < 1 on the principal branch (got {m})")
    if abs(phi) > math.pi / 2 + 1e-15:
        raise DomainError(f"phi={phi} outside the principal branch [-pi/2, pi/2]")
    if phi == 0:
        return 0.0
    s, c = math.sin(phi), math.cos(phi)
    return s * carlson_rf(c * c, 1.0 - m * s * s, 1.0)


class QuadratureKind(str, Enum):
    GAUSS_LEGENDRE = "gauss_legendre"
    INVERSE_SQRT_ENDPOINT = "inverse_sqrt_endpoint"


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    kind: QuadratureKind

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


def gauss_legendre(n: int, x1: float = -1.0, x2: float = 1.0) -> QuadratureRule:
    t, w = leggauss(n)
    half = 0.5 * (x2 - x1)
    return QuadratureRule(0.5 * (x1 + x2) + half * t, half * w, QuadratureKind.GAUSS_LEGENDRE)


def inverse_sqrt_rule(n: int, x1: float, x2: float) -> QuadratureRule:
    """Rule for  int_{x1}^{x2} f(x) / sqrt((x - x1)(x2 - x)) dx.

    Gauss-Chebyshev nodes, i.e. the midpoint rule after x = x1 + (x2-x1) sin^2(theta).
    """
    t = -np.cos((2 * np.arange(1, n + 1) - 1) * np.pi / (2 * n))
    nodes = 0.5 * (x1 + x2) + 0.5 * (x2 - x1) * t
    return QuadratureRule(nodes, np.full(n, np.pi / n), QuadratureKind.INVERSE_SQRT_ENDPOINT)


def _chebyshev_sum(f, x1, x2, n):
    t = -np.cos((2 * np.arange(1, n + 1) - 1) * np.pi / (2 * n))
    x = 0.5 * (x1 + x2)[:, None] + 0.5 * (x2 - x1)[:, None] * t[None, :]
    fx = np.asarray(f(x), dtype=float)
    if not np.all(np.isfinite(fx)):
        bad = np.argwhere(~np.isfinite(fx))[0]
        raise NumericError(f"non-finite integrand at x={x[tuple(bad)]!r}")
    return fx.sum(axis=-1) * (np.pi / n), np.abs(fx).max(axis=-1)


def integrate_inverse_sqrt(
    f: Callable[[np.ndarray], np.ndarray],
    x1,
    x2,
    n: int = 16,
    rtol: float = 1e-12,
    max_doublings: int = 20,
    rows: Callable | None = None,
):
    """int_{x1}^{x2} f(x) / sqrt((x - x1)(x2 - x)) dx, doubling n until converged.

    ``x1``/``x2`` may be arrays of equal shape; then ``f`` receives abscissae of
    shape (len(x1), n).  When only a subset of intervals is still unconverged,
    ``rows(idx)`` must return the integrand restricted to those intervals; if
    omitted the full batch is always re-evaluated.

    Convergence: |I(2n) - I(n)| <= rtol * max(|I(2n)|, pi * max|f|).
    """
    if n < 8:
        raise DomainError("integrate_inverse_sqrt needs n >= 8")
    scalar = np.ndim(x1) == 0 and np.ndim(x2) == 0
    x1a = np.atleast_1d(np.asarray(x1, dtype=float))
    x2a = np.atleast_1d(np.asarray(x2, dtype=float))
    if np.any(~(x1a < x2a)):
        raise DomainError("integrate_inverse_sqrt requires x1 < x2")

    result = np.empty_like(x1a)
    pending = np.arange(x1a.size)
    prev, _ = _chebyshev_sum(f, x1a, x2a, n)
    for _ in range(max_doublings):
        n *= 2
        if rows is None:
            cur, fmax = _chebyshev_sum(f, x1a, x2a, n)
            cur, fmax = cur[pending], fmax[pending]
        else:
            g = f if pending.size == x1a.size else rows(pending)
            cur, fmax = _chebyshev_sum(g, x1a[pending], x2a[pending], n)
        ok = np.abs(cur - prev) <= rtol * np.maximum(np.abs(cur), np.pi * fmax)
        result[pending[ok]] = cur[ok]
        pending, prev = pending[~ok], cur[~ok]
        if pending.size == 0:
            return float(result[0]) if scalar else result
    raise NumericError(
        f"inverse-sqrt quadrature did not converge after {max_doublings} doublings "
        f"(n={n}) on [{x1a[pending][0]}, {x2a[pending][0]}]"
    )


def _hermite_ratio(n: int, x: np.ndarray) -> np.ndarray:
    """psi_n(x) / psi_{n-1}(x) for orthonormal Hermite functions.

    The ratio recurrence has no Gaussian factor, so it neither underflows
    nor overflows on the outer nodes of large meshes.
    """
    r = np.sqrt(2.0) * x
    for k in range(2, n + 1):
        r = np.sqrt(2.0 / k) * x - np.sqrt((k - 1) / k) / r
    return r


def hermite_nodes(N: int) -> np.ndarray:
    """Ascending roots of the physicists' Hermite polynomial H_N.

    Golub-Welsch (eigenvalues of the Jacobi matrix) followed by one Newton
    polish on the normalized Hermite function; the result is exactly antisymmetric.
    Capped at N = 2000.
    """
    if not isinstance(N, (int, np.integer)) or N <= 0:
        raise DomainError(f"mesh size must be a positive integer, got {N!r}")
    if N > HERMITE_MAX_NODES:
        raise DomainError(f"mesh size {N} exceeds cap {HERMITE_MAX_NODES}")
    if N == 1:
        return np.zeros(1)
    off = np.sqrt(np.arange(1, N) / 2.0)
    x = eigvalsh_tridiagonal(np.zeros(N), off)
    # psi_N' = sqrt(2N) psi_{N-1} - x psi_N, so the Newton step is r / (sqrt(2N) - x r)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = _hermite_ratio(N, x)
        step = r / (np.sqrt(2.0 * N) - x * r)
    x = x - np.where(np.isfinite(step), step, 0.0)
    x = 0.5 * (x - x[::-1])
    return np.sort(x)
