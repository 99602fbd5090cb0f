"""Acceptance criteria.

Each test appends one ``[PASS]``/``[FAIL]`` line to the summary printed at the
end of the run, then asserts the criterion at its stated tolerance.
"""
import math
import time

import numpy as np
import pytest
from scipy.optimize import brentq

from conftest import ACCEPTANCE_LINES, diag_spectrum, semiclassical_spectrum
from doublewell.analysis import (
    classical_scaled_density,
    convergence_study,
    density_of_states,
    fit_loglinear,
    level_differences,
    lyapunov_fit,
    tunneling_scaling,
)
from doublewell.classical import (
    dos_asymptote_line,
    period_asymptotic,
    period_elliptic,
    period_quadrature,
    turning_points,
)
from doublewell.cli import render
from doublewell.ebk import count_states_below
from doublewell.model import Method, PotentialParams, check_parity_alternation, potential
from doublewell.solvers import (
    SolverConfig,
    build_hermite_blocks,
    build_hermite_matrix,
    eigen_residuals,
    eigen_spectrum,
    optimize_omega_hermite,
    solve_spectrum,
)
from doublewell.specfun import elliptic_k, gauss_legendre, integrate_inverse_sqrt

P = PotentialParams()
TABLE = {1: 10, 10: 94, 100: 950, 200: 1898, 500: 4746, 1000: 9490, 2000: 18980}
THEORY_SLOPE = -2 / math.sqrt(20)


def report(k, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {k}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def test_criterion_01_table_counts_ebk():
    t0 = time.perf_counter()
    got = {k: count_states_below(P.with_hbar(1 / k)) for k in TABLE}
    dt = time.perf_counter() - t0
    ok = got == TABLE and dt < 1.0
    report(1, ok, f"EBK counts {list(got.values())} in {dt:.2f}s (target {list(TABLE.values())}, < 1 s)")
    assert ok


def test_criterion_02_table_counts_diagonalization():
    want = {k: TABLE[k] for k in (1, 10, 100, 200)}
    got = {}
    t0 = time.perf_counter()
    for method in ("sinc", "hermite"):
        for k in want:
            cfg = SolverConfig(Method(method), compute_vectors=False)
            got[method, k] = solve_spectrum(cfg, P.with_hbar(1 / k)).count_below()
    dt = time.perf_counter() - t0
    bad = {key: v for key, v in got.items() if v != want[key[1]]}
    detail = ", ".join(f"{m} 1/{k}: {v}" for (m, k), v in got.items())
    ok = not bad
    report(2, ok, f"{detail} (target {list(want.values())}) in {dt:.1f}s")
    assert ok, f"mismatched counts {bad}"


def test_criterion_03_period_identity():
    t0 = time.perf_counter()
    energies = -np.logspace(math.log10(24.9), -8, 50)
    rel = max(abs(period_elliptic(e, P) / period_quadrature(e, P) - 1) for e in energies)
    t_bottom = period_quadrature(-24.999, P)
    dt = time.perf_counter() - t0
    harmonic = 2 * math.pi / math.sqrt(40)
    ok = rel <= 1e-8 and abs(t_bottom - harmonic) <= 1e-3 and dt < 1.0
    report(3, ok, f"max rel diff {rel:.1e} (<= 1e-8), T(-24.999)={t_bottom:.6f} vs {harmonic:.6f} "
                  f"(+-1e-3) in {dt:.2f}s")
    assert ok


def test_criterion_04_asymptote():
    t0 = time.perf_counter()
    energies = -np.logspace(-3, -14, 60)
    dev = max(abs(period_asymptotic(e, P) - period_elliptic(e, P)) / period_elliptic(e, P) for e in energies)
    dt = time.perf_counter() - t0
    ok = dev <= 0.01 and dt < 1.0
    report(4, ok, f"max rel deviation {dev:.2e} for 1e-14 <= |E| <= 1e-3 (<= 1%) in {dt:.2f}s")
    assert ok


def test_criterion_05_quantum_classical_correspondence():
    p = P.with_hbar(0.01)
    below = [q for q in density_of_states(diag_spectrum("sinc", 0.01)) if -20 < q.e_bar < -1]
    above = [q for q in density_of_states(semiclassical_spectrum(0.01, 25.0)) if 1 < q.e_bar < 20]
    d_below = max(abs(q.scaled_density / classical_scaled_density(q.e_bar, p) - 1) for q in below)
    d_above = max(abs(q.scaled_density / classical_scaled_density(q.e_bar, p) - 1) for q in above)
    ok = bool(below and above) and d_below <= 0.02 and d_above <= 0.01
    report(5, ok, f"Sinc below {d_below:.1e} over {len(below)} pts (<= 2%), "
                  f"EBK above {d_above:.1e} over {len(above)} pts (<= 1%)")
    assert ok


def test_criterion_06_lyapunov_slope():
    fit = lyapunov_fit(semiclassical_spectrum(1e-3))
    rel = abs(fit.slope / THEORY_SLOPE - 1)
    ok = rel <= 0.10
    report(6, ok, f"hbar=1/1000 EBK slope {fit.slope:.4f} vs {THEORY_SLOPE:.6f} "
                  f"({rel:.1%}, <= 10%; {fit.n_points} pts, r2={fit.r_squared:.4f})")
    assert ok


def test_criterion_06b_lyapunov_slope_optional_heavy():
    # Optional run: the EBK spectrum is cheap even at hbar=1/2000.
    fit = lyapunov_fit(semiclassical_spectrum(1 / 2000))
    ok = abs(fit.slope - (-0.4192)) <= 0.01
    report("6b (optional)", ok, f"hbar=1/2000 EBK slope {fit.slope:.4f} vs -0.4192 +- 0.01 "
                                f"({fit.n_points} pts)")
    if not ok:
        pytest.xfail("optional heavy run of criterion 6 is not gating")


def test_criterion_07_tunneling_scaling():
    spectra = {0.1: diag_spectrum("sinc", 0.1), 0.01: diag_spectrum("sinc", 0.01)}
    res = tunneling_scaling(spectra)
    fits = res.alpha_gap
    slopes = [fits[h].slope for h in (0.1, 0.01)]
    ok = (all(abs(s - 2.5) <= 0.2 for s in slopes)
          and all(fits[h].r_squared >= 0.99 for h in fits)
          and abs(slopes[0] - slopes[1]) <= 0.1)
    detail = ", ".join(f"hbar={h}: slope {f.slope:.3f} r2={f.r_squared:.5f} ({f.n_points} pairs)"
                       for h, f in fits.items())
    text = tunneling_scaling(spectra, textbook=True).alpha_gap
    alt = ", ".join(f"{f.slope:.3f}" for f in text.values())
    report(7, ok, f"{detail}; target 2.5 +- 0.2, r2 >= 0.99, agreement 0.1 "
                  f"[textbook exponent slopes: {alt}]")
    assert ok


CONV_FLOOR = 1e-11
PREASYMPTOTIC = 1e-2


def _convergence_case(hbar, n):
    p = P.with_hbar(hbar)
    sizes = list(range(21, 202, 10))
    curves = {
        "sinc": dict(convergence_study(Method.SINC, n, p, sizes, ref_size=2001)),
        "scaled": dict(convergence_study(Method.HERMITE, n, p, sizes, ref_size=2000)),
        "unscaled": dict(convergence_study(Method.HERMITE, n, p, sizes, ref_size=2000, omega=1.0)),
    }
    violations = []
    for N in sizes:
        d = [curves[k][N] for k in ("sinc", "scaled", "unscaled")]
        if any(x is None or x > PREASYMPTOTIC for x in d):
            continue
        s, h, u = (max(x, CONV_FLOOR) for x in d)
        if not s <= h <= u:
            violations.append(N)
    first = {k: next((N for N in sizes if c[N] is not None and c[N] <= 1e-10), None)
             for k, c in curves.items()}
    sinc_first = first["sinc"] is not None and all(
        v is None or v > first["sinc"] for k, v in first.items() if k != "sinc")
    return violations, first, sinc_first


def test_criterion_08_convergence_ordering():
    t0 = time.perf_counter()
    cases = {(1.0, 1): _convergence_case(1.0, 1), (0.1, 20): _convergence_case(0.1, 20)}
    dt = time.perf_counter() - t0
    parts, ok = [], dt < 60
    for (hbar, n), (viol, first, sinc_first) in cases.items():
        ok = ok and not viol and sinc_first
        parts.append(f"(hbar={hbar}, n={n}) ordering violated at N={viol or 'none'}, "
                     f"first N with dE<=1e-10 {first}")
    report(8, ok, "; ".join(parts) + f" in {dt:.1f}s")
    assert ok


def test_criterion_09_ebk_accuracy_trend():
    sinc = diag_spectrum("sinc", 1 / 200, vectors=False)
    ebk = semiclassical_spectrum(1 / 200)
    e, d = level_differences(sinc, ebk)
    k = max(1, len(d) // 10)
    bottom, top = float(np.mean(d[:k])), float(np.mean(d[-k:]))
    ok = top < bottom
    report(9, ok, f"hbar=1/200 mean |E_sinc - E_ebk|: bottom decile {bottom:.2e}, top decile {top:.2e} "
                  f"({len(d)} levels; top must be smaller)")
    ACCEPTANCE_LINES.append("[SKIP] criterion 9b (optional): hbar=1/2000 Sinc diagonalization not run")
    assert ok


def _property_checks():
    out = {}
    spec = solve_spectrum(SolverConfig(Method.SINC, 201), P)
    h = build_hermite_matrix(60, optimize_omega_hermite(60, P), P)
    w, v = eigen_spectrum(h, 30)
    res, orth = eigen_residuals(h, w, v)
    out["eigen residual/orthonormality"] = (
        spec.metadata["max_residual"] <= 1e-9 and spec.metadata["max_orthonormality_error"] <= 1e-12
        and res <= 1e-9 and orth <= 1e-12)

    ok = True
    for N in (5, 20, 41, 60):
        om = optimize_omega_hermite(N, P)
        full = np.linalg.eigvalsh(build_hermite_matrix(N, om, P).to_dense())
        blocks = np.sort(np.concatenate([np.linalg.eigvalsh(b.to_dense())
                                         for b in build_hermite_blocks(N, om, P).values()]))
        ok = ok and np.allclose(blocks, full, rtol=0, atol=1e-10 * np.abs(full).max())
    out["Hermite block vs full"] = ok

    out["parity alternation"] = all(
        check_parity_alternation(diag_spectrum(m, 1.0).levels) is None for m in ("sinc", "hermite", "lmm"))

    ok = True
    for e in (-24.5, -10.0, -1e-3, 5.0):
        tp = turning_points(e, P)
        f = lambda x: potential(x, P) - e
        ok = ok and math.isclose(tp.outer, brentq(f, math.sqrt(5), 10.0, xtol=1e-15), rel_tol=1e-12)
        if tp.inner is not None:
            ok = ok and math.isclose(tp.inner, brentq(f, 0.0, math.sqrt(5), xtol=1e-15), rel_tol=1e-12)
    out["turning points vs root finder"] = ok

    def series(m, terms=2000):
        c, total = 1.0, 1.0
        for n in range(1, terms):
            c *= (2 * n - 1) / (2 * n)
            total += c * c * m**n
        return math.pi / 2 * total
    out["elliptic K AGM vs series"] = all(
        math.isclose(elliptic_k(m), series(m), rel_tol=1e-13) for m in (0.0, 0.1, 0.25, 0.5, 0.8))

    gl = gauss_legendre(6, 0.0, 1.0)
    out["quadrature exactness"] = (
        all(math.isclose(gl.integrate(lambda x, k=k: x**k), 1 / (k + 1), rel_tol=1e-13) for k in range(12))
        and math.isclose(integrate_inverse_sqrt(lambda x: np.ones_like(x), -2.0, 3.0), math.pi, rel_tol=1e-14)
        and math.isclose(integrate_inverse_sqrt(lambda x: x, 0.0, 2.0), math.pi, rel_tol=1e-14))

    fit = fit_loglinear([(0, 1), (1, 3), (2, 5), (3, 7)])
    out["OLS exact line"] = (math.isclose(fit.slope, 2) and math.isclose(fit.intercept, 1)
                             and math.isclose(fit.r_squared, 1))

    argv = ["spectrum", "--method", "sinc", "--hbar", "1/10", "--emax", "0"]
    argv2 = ["dos", "--hbar", "1/100", "--method", "ebk"]
    out["byte-identical CLI reruns"] = (render(argv).text == render(argv).text
                                        and render(argv2).text == render(argv2).text)

    slope, _ = dos_asymptote_line(P)
    out["asymptote slope -2/lambda"] = math.isclose(slope, THEORY_SLOPE, rel_tol=1e-15)
    return out


def test_criterion_10_property_suites():
    checks = _property_checks()
    failed = [k for k, v in checks.items() if not v]
    ok = not failed
    report(10, ok, f"{len(checks) - len(failed)}/{len(checks)} property checks hold"
                   + (f"; failing: {failed}" if failed else ""))
    assert ok
