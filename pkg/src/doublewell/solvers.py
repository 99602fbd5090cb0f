"""Matrix representations of H in the Sinc, scaled-Hermite and Lagrange-mesh bases.

All kinetic elements carry hbar**2 (kinetic operator -(hbar**2/2) d^2/dx^2).
Every basis used here is mapped onto itself by x -> -x, so each Hamiltonian
splits exactly into an even and an odd block.  Diagonalizing the blocks
separately gives exact parity labels even for pairs whose tunneling
splitting is far below machine precision.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgError, eig_banded, eigh, toeplitz
from scipy.optimize import minimize_scalar

from .errors import DomainError, NumericError
from .model import (
    CRITICAL_ENERGY,
    Method,
    Parity,
    PotentialParams,
    Spectrum,
    assemble_spectrum,
    potential,
)
from .specfun import hermite_nodes

log = logging.getLogger(__name__)

MIRROR_THRESHOLD = 0.9
EXTRA_LEVELS = 10

# N = ceil(C / hbar), calibrated so the highest level below E_c converges to ~1e-8
AUTO_SIZE = {
    Method.SINC: (24.0, 101),
    Method.HERMITE: (24.0, 120),
    Method.LMM: (36.0, 120),
}


@dataclass(frozen=True)
class SymmetricMatrix:
    """Dense symmetric matrix, or lower band storage ``data[d, j] = M[j + d, j]``."""

    data: np.ndarray
    bandwidth: int | None = None
    label: str = ""

    @property
    def dimension(self) -> int:
        return self.data.shape[-1]

    @property
    def is_banded(self) -> bool:
        return self.bandwidth is not None

    def to_dense(self) -> np.ndarray:
        if not self.is_banded:
            return self.data
        n = self.dimension
        out = np.zeros((n, n))
        for d in range(self.bandwidth + 1):
            idx = np.arange(n - d)
            out[idx + d, idx] = self.data[d, : n - d]
            out[idx, idx + d] = self.data[d, : n - d]
        return out

    def frobenius_norm(self) -> float:
        if not self.is_banded:
            return float(np.linalg.norm(self.data))
        n = self.dimension
        s = np.sum(self.data[0] ** 2)
        for d in range(1, self.bandwidth + 1):
            s += 2 * np.sum(self.data[d, : n - d] ** 2)
        return float(math.sqrt(s))

    def matmul(self, v: np.ndarray) -> np.ndarray:
        if not self.is_banded:
            return self.data @ v
        n = self.dimension
        out = self.data[0][:, None] * v
        for d in range(1, self.bandwidth + 1):
            band = self.data[d, : n - d][:, None]
            out[d:] += band * v[:-d]
            out[:-d] += band * v[d:]
        return out


@dataclass(frozen=True)
class SolverConfig:
    method: Method
    basis_size: int | None = None
    omega: float | None = None
    eig_count: int | None = None
    parity_split: bool = True
    compute_vectors: bool = True

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.method is Method.EBK:
            raise DomainError("EBK is not a matrix method; use doublewell.ebk")
        if self.basis_size is not None:
            if self.basis_size < 3:
                raise DomainError("basis size must be >= 3")
            if self.method is Method.SINC and self.basis_size % 2 == 0:
                raise DomainError("Sinc basis size must be odd (N = 2 k_max + 1)")
        if self.omega is not None and not self.omega > 0:
            raise DomainError("omega must be positive")
        if self.eig_count is not None and self.eig_count < 1:
            raise DomainError("eig_count must be >= 1")
        if not self.compute_vectors and not self.parity_split:
            raise DomainError("parity labels of an unsplit matrix need eigenvectors")


def default_basis_size(method: Method, hbar: float) -> int:
    c, floor = AUTO_SIZE[Method(method)]
    n = max(floor, math.ceil(c / hbar))
    if Method(method) is Method.SINC and n % 2 == 0:
        n += 1
    return n


# --------------------------------------------------------------------- Sinc

def _sinc_moments(N: int) -> tuple[float, float]:
    k = np.arange(1, (N - 1) // 2 + 1, dtype=float)
    return 2 * np.sum(k**2), 2 * np.sum(k**4)


def build_sinc_matrix(N: int, omega: float, params: PotentialParams) -> SymmetricMatrix:
    if N < 1 or N % 2 == 0:
        raise DomainError(f"Sinc basis size must be odd, got {N}")
    if not omega > 0:
        raise DomainError("omega must be positive")
    kmax = (N - 1) // 2
    j = np.arange(1, N, dtype=float)
    col = np.empty(N)
    col[0] = math.pi**2 / 6
    col[1:] = np.where(j % 2 == 0, 1.0, -1.0) / j**2
    h = toeplitz(col * (params.hbar**2 / omega**2))
    k = np.arange(-kmax, kmax + 1)
    h[np.diag_indices(N)] += potential(k * omega, params)
    return SymmetricMatrix(h, None, f"sinc(N={N}, omega={omega:.6g})")


def sinc_trace(omega: float, N: int, params: PotentialParams) -> float:
    s2, s4 = _sinc_moments(N)
    return (N * params.hbar**2 * math.pi**2 / (6 * omega**2)
            + params.a * s2 * omega**2 + params.b * s4 * omega**4)


def _best_root(coeffs, trace: Callable[[float], float]) -> float:
    roots = np.roots(coeffs)
    u = [r.real for r in roots if abs(r.imag) <= 1e-9 * abs(r) and r.real > 0]
    if not u:
        raise NumericError(f"stationarity cubic {coeffs} has no positive root")
    p = np.poly1d(coeffs)
    dp = p.deriv()
    polished = []
    for r in u:
        for _ in range(3):
            d = dp(r)
            if d == 0:
                break
            r = r - p(r) / d
        polished.append(r)
    # smallest trace, ties toward larger omega
    return math.sqrt(min(polished, key=lambda r: (trace(math.sqrt(r)), -r)))


def optimize_omega_sinc(N: int, params: PotentialParams) -> float:
    """Spacing minimizing Tr H: positive root of 4b S4 u^3 + 2a S2 u^2 - hbar^2 pi^2 N/3 = 0, u = omega^2."""
    if N < 3 or N % 2 == 0:
        raise DomainError(f"Sinc basis size must be odd and >= 3, got {N}")
    s2, s4 = _sinc_moments(N)
    coeffs = [4 * params.b * s4, 2 * params.a * s2, 0.0, -(params.hbar**2) * math.pi**2 * N / 3]
    return _best_root(coeffs, lambda w: sinc_trace(w, N, params))


# ------------------------------------------------------------------ Hermite

def _hermite_diag(n, omega, params):
    hb, a, b = params.hbar, params.a, params.b
    q = b * omega**4 / 4 * hb**2
    return q * (6 * n**2 + 6 * n + 3) + (a * omega**2 / 2 + 1 / (4 * omega**2)) * (2 * n + 1) * hb


def _hermite_step2(n, omega, params):
    """H_{n-2, n}."""
    hb, a, b = params.hbar, params.a, params.b
    q = b * omega**4 / 4 * hb**2
    return np.sqrt(n * (n - 1)) * (q * (4 * n - 2) + a * omega**2 / 2 * hb - hb / (4 * omega**2))


def _hermite_step4(n, omega, params):
    """H_{n-4, n}."""
    q = params.b * omega**4 / 4 * params.hbar**2
    return q * np.sqrt(n * (n - 1) * (n - 2) * (n - 3))


def build_hermite_matrix(N: int, omega: float, params: PotentialParams) -> SymmetricMatrix:
    """Full (unsplit) Hermite matrix in band storage, bandwidth 4."""
    if N < 1 or not omega > 0:
        raise DomainError("need N >= 1 and omega > 0")
    n = np.arange(N, dtype=float)
    data = np.zeros((5, N))
    data[0] = _hermite_diag(n, omega, params)
    data[2, : N - 2] = _hermite_step2(n[2:], omega, params)
    data[4, : N - 4] = _hermite_step4(n[4:], omega, params)
    return SymmetricMatrix(data, 4, f"hermite(N={N}, omega={omega:.6g})")


def build_hermite_blocks(N: int, omega: float, params: PotentialParams) -> dict[Parity, SymmetricMatrix]:
    """Even-n and odd-n blocks; couplings only link n to n+-2 and n+-4."""
    if N < 2 or not omega > 0:
        raise DomainError("need N >= 2 and omega > 0")
    blocks = {}
    for parity, start in ((Parity.EVEN, 0), (Parity.ODD, 1)):
        n = np.arange(start, N, 2, dtype=float)
        m = n.size
        data = np.zeros((3, m))
        data[0] = _hermite_diag(n, omega, params)
        data[1, : m - 1] = _hermite_step2(n[1:], omega, params)
        data[2, : m - 2] = _hermite_step4(n[2:], omega, params)
        blocks[parity] = SymmetricMatrix(data, 2, f"hermite-{parity.value}(N={N}, omega={omega:.6g})")
    return blocks


def hermite_trace(omega: float, N: int, params: PotentialParams) -> float:
    n = np.arange(N, dtype=float)
    return float(np.sum(_hermite_diag(n, omega, params)))


def optimize_omega_hermite(N: int, params: PotentialParams) -> float:
    """Scale minimizing Tr H: positive root of b hbar S1 u^3 + a S2 u^2 - S2/2 = 0, u = omega^2."""
    if N < 1:
        raise DomainError("N must be positive")
    n = np.arange(N, dtype=float)
    s1 = float(np.sum(6 * n**2 + 6 * n + 3))
    s2 = float(N * N)
    coeffs = [params.b * params.hbar * s1, params.a * s2, 0.0, -s2 / 2]
    return _best_root(coeffs, lambda w: hermite_trace(w, N, params))


# ---------------------------------------------------------- Lagrange mesh

def lmm_second_derivative(N: int) -> np.ndarray:
    """Hermite-mesh matrix of -d^2/dx^2 on the unscaled mesh."""
    x = hermite_nodes(N)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    idx = np.arange(N)
    sign = np.where((idx[:, None] - idx[None, :]) % 2 == 0, 1.0, -1.0)
    t = sign * 2.0 / diff**2
    np.fill_diagonal(t, (2 * N + 1 - x**2) / 3)
    return t


def build_lmm_matrix(N: int, scale: float, params: PotentialParams) -> SymmetricMatrix:
    """Mesh h*x_k; kinetic (hbar^2 / 2 h^2) * (-d^2/dx^2 mesh matrix), potential V(h x_k)."""
    if N < 2 or not scale > 0:
        raise DomainError("need N >= 2 and scale > 0")
    h = lmm_second_derivative(N) * (params.hbar**2 / (2 * scale**2))
    h[np.diag_indices(N)] += potential(scale * hermite_nodes(N), params)
    return SymmetricMatrix(h, None, f"lmm(N={N}, h={scale:.6g})")


def lmm_trace(scale: float, N: int, params: PotentialParams) -> float:
    x = hermite_nodes(N)
    return float(np.sum((2 * N + 1 - x**2) / 3) * params.hbar**2 / (2 * scale**2)
                 + np.sum(potential(scale * x, params)))


def _minimize_lmm_trace(N: int, params: PotentialParams) -> tuple[float, str]:
    x = hermite_nodes(N)
    kin = np.sum((2 * N + 1 - x**2) / 3) * params.hbar**2 / 2

    def f(logh):
        h = math.exp(logh)
        return kin / h**2 + np.sum(potential(h * x, params))

    lo, hi = math.log(1e-3), math.log(1e3)
    try:
        res = minimize_scalar(f, bracket=(lo, 0.0, hi), method="golden", options={"xtol": 1e-12})
        path = "golden"
        if not lo <= res.x <= hi:
            raise ValueError("minimizer left the search interval")
        logh = res.x
    except ValueError:
        grid = np.linspace(lo, hi, 601)
        vals = np.array([f(g) for g in grid])
        i = int(np.clip(np.argmin(vals), 1, grid.size - 2))
        res = minimize_scalar(f, bracket=(grid[i - 1], grid[i], grid[i + 1]),
                              method="golden", options={"xtol": 1e-12})
        logh, path = res.x, "scan+golden"
    log.debug("lmm scale for N=%d via %s", N, path)
    return math.exp(logh), path


def optimize_scale_lmm(N: int, params: PotentialParams) -> float:
    """Mesh scale minimizing Tr H by golden-section search on log h in [1e-3, 1e3]."""
    if N < 2:
        raise DomainError("LMM mesh needs N >= 2")
    return _minimize_lmm_trace(N, params)[0]


# ------------------------------------------------------------ eigensolver

def eigen_spectrum(M: SymmetricMatrix, count: int, vectors: bool = True):
    """Lowest ``count`` eigenpairs (ascending) of a dense or banded symmetric matrix.

    Returns ``(w, v)``; ``v`` is None when ``vectors`` is False.
    """
    n = M.dimension
    if not 1 <= count <= n:
        raise DomainError(f"count={count} outside [1, {n}]")
    v = None
    try:
        if M.is_banded:
            out = eig_banded(M.data, lower=True, select="i", select_range=(0, count - 1),
                             eigvals_only=not vectors)
        elif count == n:
            out = eigh(M.data, eigvals_only=not vectors)
        else:
            out = eigh(M.data, subset_by_index=[0, count - 1], driver="evr",
                       eigvals_only=not vectors)
        if vectors:
            w, v = out
        else:
            w = out
    except (LinAlgError, ValueError) as exc:
        raise NumericError(f"eigensolver failed on {M.label or 'matrix'} (n={n}, count={count}): {exc}") from exc
    return w, v


def eigen_residuals(M: SymmetricMatrix, w: np.ndarray, v: np.ndarray) -> tuple[float, float]:
    """Max of ||M v - e v||_2 / ||M||_F and of |v.v - 1| over the returned pairs."""
    r = M.matmul(v) - v * w[None, :]
    res = float(np.max(np.linalg.norm(r, axis=0))) / M.frobenius_norm()
    orth = float(np.max(np.abs(np.einsum("ij,ij->j", v, v) - 1.0)))
    return res, orth


# ------------------------------------------------------------------ parity

def mirror_overlap(vec: np.ndarray) -> float:
    """sum_k c_k c_{-k} / sum_k c_k^2 for coefficients on a mirror-symmetric grid."""
    vec = np.asarray(vec, dtype=float)
    return float(np.dot(vec, vec[::-1]) / np.dot(vec, vec))


def classify_parity(eigvec: np.ndarray | None, basis: str, block: Parity | None = None) -> Parity:
    """Parity of an eigenvector.

    Hermite vectors take the label of their block.  Sinc and Lagrange-mesh
    vectors (full, unfolded) use the mirror overlap with threshold 0.9.
    """
    if basis == "hermite":
        if block is None:
            raise DomainError("hermite parity comes from block membership; pass block=")
        return Parity(block)
    s = mirror_overlap(eigvec)
    if s > MIRROR_THRESHOLD:
        return Parity.EVEN
    if s < -MIRROR_THRESHOLD:
        return Parity.ODD
    return Parity.UNKNOWN


@dataclass
class _Block:
    parity: Parity | None
    matrix: SymmetricMatrix
    unfold: Callable[[np.ndarray], np.ndarray] = field(default=lambda v: v)


def parity_fold(h: np.ndarray, label: str = "") -> dict[Parity, _Block]:
    """Split a dense matrix commuting with index reversal into even/odd blocks.

    Block bases: (e_i +- e_{N-1-i})/sqrt(2) for i < N//2, plus the central
    e_c (even) when N is odd.  ``unfold`` maps block vectors back to the full basis.
    """
    N = h.shape[0]
    m = N // 2
    ll = h[:m, :m]
    lr = h[:m, ::-1][:, :m]
    rl = h[::-1, :m][:m, :]
    rr = h[::-1, ::-1][:m, :m]
    odd = 0.5 * (ll - lr - rl + rr)
    even = 0.5 * (ll + lr + rl + rr)
    if N % 2:
        c = m
        cross = (h[c, :m] + h[c, ::-1][:m]) / math.sqrt(2)
        even = np.block([[even, cross[:, None]], [cross[None, :], np.array([[h[c, c]]])]])

    def unfold_even(y):
        out = np.empty((N,) + y.shape[1:])
        out[:m] = y[:m] / math.sqrt(2)
        out[::-1][:m] = y[:m] / math.sqrt(2)
        if N % 2:
            out[m] = y[m]
        return out

    def unfold_odd(y):
        out = np.zeros((N,) + y.shape[1:])
        out[:m] = y / math.sqrt(2)
        out[::-1][:m] = -y / math.sqrt(2)
        return out

    blocks = {Parity.EVEN: _Block(Parity.EVEN, SymmetricMatrix(even, None, f"{label}[even]"), unfold_even)}
    if m:
        blocks[Parity.ODD] = _Block(Parity.ODD, SymmetricMatrix(odd, None, f"{label}[odd]"), unfold_odd)
    return blocks


# ------------------------------------------------------------------ driver

def _blocks_for(config: SolverConfig, N: int, scale: float, params: PotentialParams) -> list[_Block]:
    method = config.method
    if method is Method.HERMITE:
        if config.parity_split:
            return [_Block(p, m) for p, m in build_hermite_blocks(N, scale, params).items()]
        return [_Block(None, build_hermite_matrix(N, scale, params))]
    matrix = (build_sinc_matrix(N, scale, params) if method is Method.SINC
              else build_lmm_matrix(N, scale, params))
    if config.parity_split:
        return list(parity_fold(matrix.data, matrix.label).values())
    return [_Block(None, matrix)]


def _estimated_count_below(params: PotentialParams) -> int:
    from .ebk import count_states_below  # closed form, no root finding

    return count_states_below(params)


def solve_spectrum(config: SolverConfig, params: PotentialParams) -> Spectrum:
    """Build, diagonalize and parity-label the spectrum for one configuration."""
    method = config.method
    N = config.basis_size or default_basis_size(method, params.hbar)
    lmm_path = None
    if config.omega is not None:
        scale = config.omega
    elif method is Method.SINC:
        scale = optimize_omega_sinc(N, params)
    elif method is Method.HERMITE:
        scale = optimize_omega_hermite(N, params)
    else:
        scale, lmm_path = _minimize_lmm_trace(N, params)

    blocks = _blocks_for(config, N, scale, params)
    nblocks = len(blocks)
    if config.eig_count is not None:
        want = [min(b.matrix.dimension, config.eig_count) for b in blocks]
    else:
        est = _estimated_count_below(params) + EXTRA_LEVELS
        want = [min(b.matrix.dimension, est // nblocks + EXTRA_LEVELS + est // 20) for b in blocks]

    energies, parities = [], []
    max_res = max_orth = 0.0
    tie_tol = 0.0
    for blk, k in zip(blocks, want):
        dim = blk.matrix.dimension
        while True:
            w, v = eigen_spectrum(blk.matrix, k, vectors=config.compute_vectors)
            enough = config.eig_count is not None or k == dim or np.sum(w >= CRITICAL_ENERGY) >= EXTRA_LEVELS
            if enough:
                break
            k = min(dim, 2 * k)
        if v is not None:
            res, orth = eigen_residuals(blk.matrix, w, v)
            max_res, max_orth = max(max_res, res), max(max_orth, orth)
        tie_tol = max(tie_tol, 1e-12 * blk.matrix.frobenius_norm())
        if blk.parity is not None:
            parities += [blk.parity] * len(w)
        elif method is Method.HERMITE:
            # unsplit Hermite: the parity of n-components decides
            parities += [_hermite_vector_parity(v[:, j]) for j in range(len(w))]
        else:
            parities += [classify_parity(v[:, j], method.value) for j in range(len(w))]
        energies.append(w)

    meta = {
        "basis_size": N,
        "scale": scale,
        "parity_split": config.parity_split,
        "max_residual": max_res if config.compute_vectors else None,
        "max_orthonormality_error": max_orth if config.compute_vectors else None,
        "tie_tolerance": tie_tol,
    }
    if lmm_path:
        meta["lmm_scale_path"] = lmm_path
    spec = assemble_spectrum(params, np.concatenate(energies), parities, method,
                             basis_size=N, metadata=meta, tie_tol=tie_tol)
    if config.eig_count is not None:
        keep = config.eig_count
    else:
        keep = spec.count_below(CRITICAL_ENERGY) + EXTRA_LEVELS
    if keep < len(spec.levels):
        spec = Spectrum(params, spec.levels[:keep], spec.method, spec.metadata)
    return spec


def _hermite_vector_parity(vec: np.ndarray) -> Parity:
    w_even = float(np.sum(vec[0::2] ** 2))
    w_odd = float(np.sum(vec[1::2] ** 2))
    tot = w_even + w_odd
    if w_even > MIRROR_THRESHOLD * tot:
        return Parity.EVEN
    if w_odd > MIRROR_THRESHOLD * tot:
        return Parity.ODD
    return Parity.UNKNOWN


def lowest_energies(method: Method, N: int, params: PotentialParams, count: int,
                    omega: float | None = None) -> np.ndarray:
    """Lowest ``count`` energies (parity-merged) for convergence studies."""
    spec = solve_spectrum(SolverConfig(method, N, omega=omega, eig_count=count), params)
    return spec.energies
