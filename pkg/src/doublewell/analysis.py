"""Density of states, parity-pair gaps, WKB transmission, convergence and fits."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .classical import Branch, barrier_integral, period_quadrature
from .errors import AnalysisError, DataIntegrityError, DomainError
from .model import (
    CRITICAL_ENERGY,
    Method,
    Parity,
    PotentialParams,
    Spectrum,
    check_parity_alternation,
)

CONVERGENCE_FLOOR = 1e-16
RELATIVE_FLOOR = 1e-15
DEFAULT_LYAPUNOV_WINDOW = (-1e-2, -1e-5)


class NoBarrierWarning(UserWarning):
    """Raised as a warning when the energy is above the barrier top."""


@dataclass(frozen=True)
class DosPoint:
    e_bar: float
    scaled_density: float
    branch: Branch


@dataclass(frozen=True)
class ParityPair:
    e_bar: float
    gap: float
    pair_index: int


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float
    n_points: int
    slope_stderr: float = 0.0


# ------------------------------------------------------------------ density

def classical_scaled_density(E: float, params: PotentialParams) -> float:
    """Classical counterpart of 2 pi hbar rho: twice the well period below E_c."""
    t = period_quadrature(E, params)
    return 2 * t if E < CRITICAL_ENERGY else t


def density_of_states(spec: Spectrum) -> list[DosPoint]:
    """2 pi hbar rho at level midpoints.

    Below E_c consecutive same-parity levels are differenced and the density
    is doubled for the quasi-degenerate partner; above E_c all consecutive
    levels are used.  Spacings straddling E_c are dropped.
    """
    if len(spec) < 4:
        raise AnalysisError("density of states needs at least 4 levels")
    hbar = spec.params.hbar
    scale = 2 * math.pi * hbar
    e = spec.energies
    par = spec.parities
    below = e < CRITICAL_ENERGY
    if any(p is Parity.UNKNOWN for p, b in zip(par, below) if b):
        raise AnalysisError(
            "levels below E_c lack parity labels; use a diagonalization method or an EBK spectrum")

    points: dict[float, DosPoint] = {}
    for parity in (Parity.EVEN, Parity.ODD):
        sel = np.sort(e[below & np.array([p is parity for p in par])])
        for lo, hi in zip(sel[:-1], sel[1:]):
            if hi > lo:
                mid = 0.5 * (lo + hi)
                points.setdefault(mid, DosPoint(mid, scale * 2 / (hi - lo), Branch.BELOW))

    above = np.sort(e[~below])
    for lo, hi in zip(above[:-1], above[1:]):
        if hi > lo:
            mid = 0.5 * (lo + hi)
            points.setdefault(mid, DosPoint(mid, scale / (hi - lo), Branch.ABOVE))
    return [points[k] for k in sorted(points)]


# ------------------------------------------------------------------ tunneling

def parity_pairs(spec: Spectrum) -> list[ParityPair]:
    """(even, odd) quasi-degenerate pairs below E_c with their splittings.

    Splittings below the eigensolver's roundoff may come out slightly negative;
    they are reported as 0.
    """
    if spec.method is Method.EBK:
        raise AnalysisError("EBK spectra carry no tunneling splitting")
    levels = [lv for lv in spec.levels if lv.energy < CRITICAL_ENERGY]
    bad = check_parity_alternation(levels)
    if bad is not None:
        raise DataIntegrityError(
            f"parity pattern broken at level {bad} "
            f"(E={levels[bad].energy:.12g}, parity={levels[bad].parity.value})")
    out = []
    for i in range(len(levels) // 2):
        ev, od = levels[2 * i], levels[2 * i + 1]
        out.append(ParityPair(0.5 * (ev.energy + od.energy), max(od.energy - ev.energy, 0.0), i))
    return out


def wkb_transmission(e_bar: float, params: PotentialParams, textbook: bool = False,
                     half_barrier: bool = False) -> float:
    """WKB barrier-penetration factor between the wells.

    Default exponent: -2 sqrt(2/hbar) * int sqrt(V - E) dx over [-x1, x1].
    ``textbook`` uses -(2 sqrt(2)/hbar) * int instead; ``half_barrier``
    integrates over [0, x1] only.  Above the barrier 1.0 is returned with a
    NoBarrierWarning.
    """
    if e_bar >= CRITICAL_ENERGY:
        warnings.warn(f"E={e_bar} is above the barrier; transmission set to 1", NoBarrierWarning)
        return 1.0
    if e_bar <= params.v_min:
        raise DomainError(f"E={e_bar} <= V_min")
    return math.exp(wkb_log_transmission(e_bar, params, textbook, half_barrier))


def wkb_log_transmission(e_bar: float, params: PotentialParams, textbook: bool = False,
                         half_barrier: bool = False) -> float:
    integral = barrier_integral(e_bar, params)
    if half_barrier:
        integral *= 0.5
    hbar = params.hbar
    if textbook:
        return -2 * math.sqrt(2) / hbar * integral
    return -2 * math.sqrt(2 / hbar) * integral


# ------------------------------------------------------------------ fits

def fit_loglinear(x: Sequence[float], y: Sequence[float] | None = None) -> FitResult:
    """Ordinary least squares y = slope * x + intercept.

    Accepts either two sequences or a single sequence of (x, y) pairs.
    """
    if y is None:
        pts = np.asarray(list(x), dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise AnalysisError("expected a sequence of (x, y) points")
        xs, ys = pts[:, 0], pts[:, 1]
    else:
        xs, ys = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    n = xs.size
    if n < 3:
        raise AnalysisError(f"a line fit needs at least 3 points, got {n}")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise AnalysisError("fit points must be finite")
    xm, ym = xs.mean(), ys.mean()
    sxx = np.sum((xs - xm) ** 2)
    if sxx == 0:
        raise AnalysisError("all x values are equal; slope undefined")
    slope = np.sum((xs - xm) * (ys - ym)) / sxx
    intercept = ym - slope * xm
    resid = ys - (slope * xs + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((ys - ym) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - ss_res / ss_tot)
    stderr = math.sqrt(ss_res / (n - 2) / sxx) if n > 2 else 0.0
    return FitResult(float(slope), float(intercept), r2, n, stderr)


def lyapunov_fit(spec: Spectrum, window: tuple[float, float] = DEFAULT_LYAPUNOV_WINDOW) -> FitResult:
    """Fit 2 pi hbar rho against log|E_bar| for E_bar inside ``window`` (below E_c)."""
    lo, hi = window
    if not lo < hi <= CRITICAL_ENERGY:
        raise DomainError(f"window {window} must satisfy lo < hi <= 0")
    pts = [(math.log(abs(p.e_bar)), p.scaled_density)
           for p in density_of_states(spec) if lo < p.e_bar < hi]
    if len(pts) < 3:
        raise AnalysisError(f"only {len(pts)} density points inside window {window}")
    return fit_loglinear(pts)


@dataclass(frozen=True)
class TunnelingScaling:
    alpha_gap: dict[float, FitResult]
    alpha_hbar: FitResult
    pairs_used: dict[float, int]


def tunneling_points(spec: Spectrum, textbook: bool = False, half_barrier: bool = False,
                     gap_floor: float | None = None) -> list[tuple[float, float, float]]:
    """(e_bar, gap, log T) for every pair whose splitting clears the roundoff floor.

    The default floor is the spectrum's tie tolerance, 1e-12 * ||H||_F, a few
    thousand times the eigenvalue roundoff.
    """
    if gap_floor is None:
        gap_floor = max(float(spec.metadata.get("tie_tolerance") or 0.0), 1e-15)
    out = []
    for pair in parity_pairs(spec):
        if pair.gap > gap_floor:
            lt = wkb_log_transmission(pair.e_bar, spec.params, textbook, half_barrier)
            out.append((pair.e_bar, pair.gap, lt))
    return out


def tunneling_scaling(spectra: Mapping[float, Spectrum], textbook: bool = False,
                      half_barrier: bool = False, min_pairs: int = 5,
                      grid_points: int = 9) -> TunnelingScaling:
    """Power-law fits T ~ gap**alpha per hbar, and the hbar shift at matched gap.

    Only pairs whose splitting clears the eigensolver roundoff are used.
    """
    data = {}
    for hbar, spec in spectra.items():
        pts = tunneling_points(spec, textbook, half_barrier)
        data[hbar] = ([p[1] for p in pts], [p[2] for p in pts])
    return scaling_from_points(data, min_pairs, grid_points)


def scaling_from_points(data: Mapping[float, tuple[Sequence[float], Sequence[float]]],
                        min_pairs: int = 5, grid_points: int = 9) -> TunnelingScaling:
    """Fits from ``{hbar: (gaps, log_T)}``.

    ``alpha_gap[hbar]`` is the slope of log T against log gap.  ``alpha_hbar``
    is the slope of log T against log hbar at common log(gap) values (log T
    interpolated per hbar and centred per grid value).
    """
    if len(data) < 2:
        raise AnalysisError("tunneling scaling needs at least two hbar values")
    fits, curves, used = {}, {}, {}
    for hbar, (gaps, log_t) in sorted(data.items()):
        if len(gaps) < min_pairs:
            raise AnalysisError(f"hbar={hbar}: only {len(gaps)} resolvable parity pairs (< {min_pairs})")
        lg = np.log(np.asarray(gaps, dtype=float))
        lt = np.asarray(log_t, dtype=float)
        fits[hbar] = fit_loglinear(lg, lt)
        order = np.argsort(lg)
        curves[hbar] = (lg[order], lt[order])
        used[hbar] = len(gaps)

    lo = max(c[0][0] for c in curves.values())
    hi = min(c[0][-1] for c in curves.values())
    if not lo < hi:
        raise AnalysisError("gap ranges of the different hbar values do not overlap")
    xs, ys = [], []
    for g in np.linspace(lo, hi, grid_points):
        vals = {h: np.interp(g, *curves[h]) for h in curves}
        mean = np.mean(list(vals.values()))
        for h, v in vals.items():
            xs.append(math.log(h))
            ys.append(v - mean)
    return TunnelingScaling(fits, fit_loglinear(xs, ys), used)


# ------------------------------------------------------------------ convergence

def convergence_study(method: Method, n: int, params: PotentialParams, sizes: Iterable[int],
                      ref_size: int = 2000, omega: float | None = None) -> list[tuple[int, float | None]]:
    """|E_n(N) - E_n(ref)| per basis size; None where level n is not available."""
    from .solvers import SolverConfig, solve_spectrum

    method = Method(method)
    sizes = list(sizes)
    if any(N >= ref_size for N in sizes):
        raise DomainError("every basis size must be smaller than the reference size")

    def level(N):
        cfg = SolverConfig(method, N, omega=omega, eig_count=n + 1)
        e = solve_spectrum(cfg, params).energies
        return e[n] if e.size > n else None

    ref = level(ref_size)
    if ref is None:
        raise AnalysisError(f"level {n} not available at the reference size {ref_size}")
    floor = max(CONVERGENCE_FLOOR, RELATIVE_FLOOR * abs(ref))
    out = []
    for N in sizes:
        e = level(N) if N > n else None
        out.append((N, None if e is None else max(abs(e - ref), floor)))
    return out


def level_differences(a: Spectrum, b: Spectrum, e_max: float = CRITICAL_ENERGY) -> tuple[np.ndarray, np.ndarray]:
    """(energies of ``a``, |E_a - E_b|) for levels matched by index below ``e_max``."""
    ea = a.energies
    eb = b.energies
    k = min(np.sum(ea < e_max), np.sum(eb < e_max))
    return ea[:k], np.abs(ea[:k] - eb[:k])
