"""Problem parameters, the quartic potential, and the spectrum data model.

The Hamiltonian is H = p**2/2 + a*x**2 + b*x**4 with a < 0 < b (mass fixed to 1).
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import DomainError

CRITICAL_ENERGY = 0.0


class Parity(str, Enum):
    EVEN = "even"
    ODD = "odd"
    UNKNOWN = "unknown"


class Method(str, Enum):
    SINC = "sinc"
    HERMITE = "hermite"
    LMM = "lmm"
    EBK = "ebk"


def _check_double_well(a: float, b: float) -> None:
    if not a < 0:
        raise DomainError(f"quadratic coefficient a={a} must be negative for a double well")
    if not b > 0:
        raise DomainError(f"quartic coefficient b={b} must be positive")


@dataclass(frozen=True)
class PotentialParams:
    """Physical constants of one problem instance.

    Defaults reproduce the instance used throughout: a=-10, b=1, hbar=1.
    """

    a: float = -10.0
    b: float = 1.0
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        _check_double_well(self.a, self.b)
        if not self.hbar > 0 or not math.isfinite(self.hbar):
            raise DomainError(f"hbar={self.hbar} must be positive and finite")
        if self.mass != 1.0:
            raise DomainError("only unit mass is supported")

    def with_hbar(self, hbar: float) -> "PotentialParams":
        return replace(self, hbar=float(hbar))

    @property
    def x_min(self) -> float:
        return math.sqrt(-self.a / (2 * self.b))

    @property
    def v_min(self) -> float:
        return -self.a**2 / (4 * self.b)

    @property
    def lyapunov(self) -> float:
        return math.sqrt(-2 * self.a)


def potential(x, params: PotentialParams):
    """a*x**2 + b*x**4; accepts scalars or arrays."""
    x2 = np.multiply(x, x)
    v = x2 * (params.a + params.b * x2)
    return float(v) if np.ndim(v) == 0 else v


def derived_constants(params: PotentialParams) -> dict[str, float]:
    """Well position, well depth, critical energy and Lyapunov exponent."""
    _check_double_well(params.a, params.b)
    return {
        "x_min": math.sqrt(-params.a / (2 * params.b)),
        "V_min": -params.a**2 / (4 * params.b),
        "E_c": CRITICAL_ENERGY,
        "lambda": math.sqrt(-2 * params.a),
    }


@dataclass(frozen=True)
class EnergyLevel:
    n: int
    energy: float
    parity: Parity
    method: Method
    basis_size: int | None = None


CSV_HEADER = ("n", "energy", "parity", "method", "basis_size")


def format_energy(e: float) -> str:
    return f"{e:.15g}"


@dataclass(frozen=True)
class Spectrum:
    """Ascending bound-state energies with parity and provenance.

    ``metadata`` records basis size, scale parameter, residual norms, etc.
    """

    params: PotentialParams
    levels: tuple[EnergyLevel, ...]
    method: Method
    metadata: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.levels)

    @property
    def energies(self) -> np.ndarray:
        return np.array([lv.energy for lv in self.levels], dtype=float)

    @property
    def parities(self) -> list[Parity]:
        return [lv.parity for lv in self.levels]

    def below(self, e: float = CRITICAL_ENERGY) -> "Spectrum":
        return replace(self, levels=tuple(lv for lv in self.levels if lv.energy < e))

    def count_below(self, e: float = CRITICAL_ENERGY) -> int:
        return sum(1 for lv in self.levels if lv.energy < e)

    def to_csv(self, header_comment: str | None = None) -> str:
        buf = io.StringIO()
        if header_comment:
            buf.write(f"# {header_comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for lv in self.levels:
            w.writerow([
                lv.n,
                format_energy(lv.energy),
                lv.parity.value,
                lv.method.value,
                "" if lv.basis_size is None else lv.basis_size,
            ])
        return buf.getvalue()

    def to_dict(self) -> dict[str, Any]:
        return {
            "params": {"a": self.params.a, "b": self.params.b,
                       "mass": self.params.mass, "hbar": self.params.hbar},
            "method": self.method.value,
            "metadata": _jsonable(self.metadata),
            "levels": [
                {"n": lv.n, "energy": float(format_energy(lv.energy)),
                 "parity": lv.parity.value, "method": lv.method.value,
                 "basis_size": lv.basis_size}
                for lv in self.levels
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_csv(cls, text: str, params: PotentialParams) -> "Spectrum":
        rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        reader = csv.DictReader(rows)
        levels = tuple(
            EnergyLevel(
                n=int(r["n"]), energy=float(r["energy"]), parity=Parity(r["parity"]),
                method=Method(r["method"]),
                basis_size=int(r["basis_size"]) if r["basis_size"] else None,
            )
            for r in reader
        )
        if not levels:
            raise DomainError("empty spectrum")
        return cls(params=params, levels=levels, method=levels[0].method)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def assemble_spectrum(
    params: PotentialParams,
    energies: Iterable[float],
    parities: Iterable[Parity],
    method: Method,
    basis_size: int | None = None,
    metadata: dict[str, Any] | None = None,
    tie_tol: float = 0.0,
) -> Spectrum:
    """Sort levels ascending (even before odd on ties) and number them.

    Adjacent odd/even levels closer than ``tie_tol`` are treated as ties and
    their labels swapped, so roundoff never puts the odd member of a
    degenerate pair first; energies stay ascending.
    """
    e = np.asarray(list(energies), dtype=float)
    p = list(parities)
    rank = np.array([0 if q is Parity.EVEN else 1 for q in p])
    order = np.lexsort((rank, e))
    e, p = e[order], [p[i] for i in order]
    if tie_tol > 0:
        i = 0
        while i < len(e) - 1:
            if p[i] is Parity.ODD and p[i + 1] is Parity.EVEN and e[i + 1] - e[i] <= tie_tol:
                p[i], p[i + 1] = p[i + 1], p[i]
                i += 2
            else:
                i += 1
    levels = tuple(
        EnergyLevel(n=i, energy=float(ei), parity=pi, method=method, basis_size=basis_size)
        for i, (ei, pi) in enumerate(zip(e, p))
    )
    return Spectrum(params=params, levels=levels, method=method, metadata=dict(metadata or {}))


def check_parity_alternation(levels: Sequence[EnergyLevel]) -> int | None:
    """Index of the first level breaking even, odd, even, ... below E_c, or None."""
    for i, lv in enumerate(levels):
        if lv.energy >= CRITICAL_ENERGY:
            break
        expected = Parity.EVEN if i % 2 == 0 else Parity.ODD
        if lv.parity is not expected:
            return i
    return None
