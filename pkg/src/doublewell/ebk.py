"""Semiclassical EBK quantization  J(E) = 2 pi hbar (n + mu/4 + d/2),  mu = 2, d = 0.

Below the barrier each well is quantized on its own and every level is
doubly degenerate (one even and one odd state).  Above it the full orbit is
quantized and the quantum number continues the overall state count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .classical import Branch, action_array, period_array, separatrix_action
from .errors import BranchOverflowError, DomainError, NumericError
from .model import CRITICAL_ENERGY, Method, Parity, PotentialParams, Spectrum, assemble_spectrum

MASLOV_TURNING_POINTS = 2
MASLOV_HARD_WALLS = 0
ACTION_RTOL = 1e-13
MAX_ITER = 200


class EbkBranch(str, Enum):
    WELL = "well"
    ABOVE = "above"


_CLASSICAL = {EbkBranch.WELL: Branch.BELOW, EbkBranch.ABOVE: Branch.ABOVE}


@dataclass(frozen=True)
class EbkLevel:
    n: int
    energy: float
    branch: EbkBranch


def quantized_action(n, hbar: float):
    return 2 * math.pi * hbar * (np.asarray(n) + MASLOV_TURNING_POINTS / 4 + MASLOV_HARD_WALLS / 2)


def _solve(targets: np.ndarray, branch: EbkBranch, params: PotentialParams,
           lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Safeguarded Newton (bisection fallback) on J(E) - target, vectorized over levels."""
    cb = _CLASSICAL[branch]
    lo, hi = lo.copy(), hi.copy()
    e = 0.5 * (lo + hi)
    for _ in range(MAX_ITER):
        j = action_array(e, params, cb, rtol=ACTION_RTOL)
        t = period_array(e, params, cb, rtol=1e-10)
        f = j - targets
        # J cannot be resolved better than dJ/dE times the spacing of doubles near E
        done = np.abs(f) <= np.maximum(ACTION_RTOL * targets, 8 * t * np.spacing(np.abs(e)))
        if np.all(done):
            return e
        lo = np.where(f < 0, e, lo)
        hi = np.where(f > 0, e, hi)
        step = e - f / t
        bad = ~((step > lo) & (step < hi))
        new = np.where(bad, 0.5 * (lo + hi), step)
        e = np.where(done, e, new)
        if np.all((hi - lo) <= 4 * np.finfo(float).eps * np.maximum(np.abs(hi), np.abs(lo))):
            return e
    raise NumericError(f"EBK root finding did not converge in {MAX_ITER} iterations")


def _initial_bracket(targets, branch: EbkBranch, params: PotentialParams):
    v_min = params.v_min
    delta = 1e-13 * abs(v_min)
    if branch is EbkBranch.WELL:
        return np.full(targets.shape, v_min + delta), np.full(targets.shape, -delta)
    lo = np.full(targets.shape, delta)
    hi = np.full(targets.shape, 1.0)
    for _ in range(200):
        short = action_array(hi, params, Branch.ABOVE) <= targets
        if not np.any(short):
            return lo, hi
        lo = np.where(short, hi, lo)
        hi = np.where(short, 2 * hi, hi)
    raise NumericError("could not bracket above-barrier EBK level")


def _check_targets(targets: np.ndarray, branch: EbkBranch, params: PotentialParams):
    j_sep = separatrix_action(params)
    if branch is EbkBranch.WELL and np.any(targets >= j_sep):
        raise BranchOverflowError(
            f"quantized action {targets.max():.6g} exceeds the single-well range (0, {j_sep:.6g})")
    if branch is EbkBranch.ABOVE and np.any(targets <= 2 * j_sep):
        raise BranchOverflowError(
            f"quantized action {targets.min():.6g} is below the above-barrier range ({2 * j_sep:.6g}, inf)")


def ebk_energies(ns, params: PotentialParams, branch: EbkBranch) -> np.ndarray:
    """Vectorized EBK energies for quantum numbers ``ns`` on one branch."""
    branch = EbkBranch(branch)
    ns = np.atleast_1d(np.asarray(ns))
    if ns.size == 0:
        return np.empty(0)
    if np.any(ns < 0):
        raise DomainError("quantum numbers must be non-negative")
    targets = quantized_action(ns, params.hbar).astype(float)
    _check_targets(targets, branch, params)
    lo, hi = _initial_bracket(targets, branch, params)
    return _solve(targets, branch, params, lo, hi)


def ebk_energy(n: int, params: PotentialParams, branch: EbkBranch = EbkBranch.WELL) -> float:
    return float(ebk_energies([n], params, branch)[0])


def _well_quantum_numbers(params: PotentialParams, j_max: float) -> np.ndarray:
    x = j_max / (2 * math.pi * params.hbar)
    return np.arange(max(0, math.ceil(x - 0.5)))


def count_states_below(params: PotentialParams, e_c: float = CRITICAL_ENERGY) -> int:
    """Number of states below e_c (default E_c) from the half-integer rule.

    At E_c this needs only the closed-form separatrix action.
    """
    if e_c <= params.v_min:
        return 0
    j_sep = separatrix_action(params)
    if e_c < CRITICAL_ENERGY:
        j_well = float(action_array(e_c, params, Branch.BELOW)[0])
    else:
        j_well = j_sep
    count = 2 * _well_quantum_numbers(params, j_well).size
    if e_c > CRITICAL_ENERGY:
        j_full = float(action_array(e_c, params, Branch.ABOVE)[0])
        x_lo = 2 * j_sep / (2 * math.pi * params.hbar) - 0.5
        x_hi = j_full / (2 * math.pi * params.hbar) - 0.5
        count += max(0, math.ceil(x_hi) - (math.floor(x_lo) + 1))
    return count


def ebk_levels(params: PotentialParams, e_max: float = CRITICAL_ENERGY) -> list[EbkLevel]:
    """All EBK levels with energy below ``e_max`` (well levels listed once)."""
    if e_max <= params.v_min:
        return []
    j_sep = separatrix_action(params)
    if e_max < CRITICAL_ENERGY:
        j_cap = float(action_array(e_max, params, Branch.BELOW)[0])
    else:
        j_cap = j_sep
    n_well = _well_quantum_numbers(params, j_cap)
    e_well = ebk_energies(n_well, params, EbkBranch.WELL)
    out = [EbkLevel(int(n), float(e), EbkBranch.WELL) for n, e in zip(n_well, e_well)]
    if e_max > CRITICAL_ENERGY:
        scale = 2 * math.pi * params.hbar
        n0 = math.floor(2 * j_sep / scale - 0.5) + 1
        j_top = float(action_array(e_max, params, Branch.ABOVE)[0])
        n1 = math.ceil(j_top / scale - 0.5)
        n_above = np.arange(n0, max(n0, n1))
        e_above = ebk_energies(n_above, params, EbkBranch.ABOVE)
        out += [EbkLevel(int(n), float(e), EbkBranch.ABOVE) for n, e in zip(n_above, e_above)]
    return [lv for lv in out if lv.energy < e_max]


def ebk_spectrum(params: PotentialParams, e_max: float = CRITICAL_ENERGY) -> Spectrum:
    """EBK levels as a Spectrum: well levels expanded to (even, odd) pairs of equal energy."""
    energies, parities = [], []
    for lv in ebk_levels(params, e_max):
        if lv.branch is EbkBranch.WELL:
            energies += [lv.energy, lv.energy]
            parities += [Parity.EVEN, Parity.ODD]
        else:
            energies.append(lv.energy)
            parities.append(Parity.UNKNOWN)
    if not energies:
        return Spectrum(params, (), Method.EBK, {"e_max": e_max})
    return assemble_spectrum(params, energies, parities, Method.EBK, basis_size=None,
                             metadata={"e_max": e_max})
