"""Command-line front end: spectra, counts, classical periods and the derived analyses.

Every subcommand renders a CSV (or JSON) table.  CSV output starts with a
``#`` provenance line holding the tool version and the full argument string,
so identical invocations produce byte-identical files.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import shlex
import sys
import tempfile
import time
import traceback
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .errors import AnalysisError, DomainError, DoubleWellError, NumericError
from .model import CRITICAL_ENERGY, Method, PotentialParams, format_energy

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class Rendered:
    text: str
    rows: int
    suffix: str
    mirror: str | None = None


# ------------------------------------------------------------------ parsing

def parse_hbar(text: str) -> Fraction:
    """Exact rational hbar from literals such as ``1/2000``, ``0.01`` or ``1``."""
    try:
        value = Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise DomainError(f"invalid hbar literal {text!r}") from exc
    if value <= 0:
        raise DomainError(f"hbar must be positive, got {text}")
    return value


def parse_hbar_list(text: str) -> list[Fraction]:
    return [parse_hbar(t) for t in text.split(",") if t.strip()]


def _float_pair(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected EMIN,EMAX, got {text!r}")
    lo, hi = (float(p) for p in parts)
    if not lo < hi:
        raise argparse.ArgumentTypeError(f"window needs EMIN < EMAX, got {text!r}")
    return lo, hi


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _is_negative_number(tok: str) -> bool:
    if not tok.startswith("-"):
        return False
    try:
        [float(t) for t in tok.split(",")]
    except ValueError:
        return False
    return True


def _attach_negative_values(argv: list[str]) -> list[str]:
    """``--emin -1e-2`` -> ``--emin=-1e-2`` so argparse does not read a flag."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if (tok.startswith("--") and "=" not in tok and i + 1 < len(argv)
                and _is_negative_number(argv[i + 1])):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--a", type=float, default=-10.0, help="quadratic coefficient (default -10)")
    g.add_argument("--b", type=float, default=1.0, help="quartic coefficient (default 1)")
    g.add_argument("--out", help="output file (directory for sweep); stdout if omitted")
    g.add_argument("--format", choices=("csv", "json"), default="csv")
    g.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    g.add_argument("--fail-fast", action="store_true")

    parser = _Parser(prog="doublewell", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"doublewell {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    methods = [m.value for m in Method]
    diag = [m.value for m in Method if m is not Method.EBK]

    p = sub.add_parser("spectrum", parents=[common], help="energy levels for one method and hbar")
    p.add_argument("--method", choices=methods, required=True)
    p.add_argument("--hbar", type=str, required=True)
    p.add_argument("--basis-size", type=int)
    p.add_argument("--omega", type=float, help="fix the basis scale instead of optimizing it")
    p.add_argument("--emax", type=float, help="keep levels below this energy")
    p.add_argument("--no-parity-split", action="store_true",
                   help="diagonalize the full matrix and classify parity from eigenvectors")
    p.add_argument("--json", action="store_true", help="also write a JSON mirror next to --out")

    p = sub.add_parser("count", parents=[common], help="number of states below E_c")
    p.add_argument("--hbar", type=str, required=True, help="comma-separated list, e.g. 1,1/10,1/100")
    p.add_argument("--method", choices=methods, default="ebk")
    p.add_argument("--basis-size", type=int)

    p = sub.add_parser("period", parents=[common], help="classical period on an energy grid")
    p.add_argument("--emin", type=float, required=True)
    p.add_argument("--emax", type=float, required=True)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--log", action="store_true", help="log-spaced |E| (both bounds on one side of E_c)")

    p = sub.add_parser("dos", parents=[common], help="scaled density of states 2 pi hbar rho")
    p.add_argument("--hbar", type=str, required=True)
    p.add_argument("--method", choices=methods, default="sinc")
    p.add_argument("--basis-size", type=int)
    p.add_argument("--emax", type=float, default=None, help="upper energy of the spectrum")
    p.add_argument("--window", type=_float_pair, help="keep points with EMIN < e_bar < EMAX")

    p = sub.add_parser("tunneling", parents=[common], help="parity gaps and WKB transmission")
    p.add_argument("--hbar", type=str, required=True)
    p.add_argument("--method", choices=diag, default="sinc")
    p.add_argument("--basis-size", type=int)
    p.add_argument("--textbook", action="store_true", help="exponent -(2 sqrt 2/hbar) int instead of -2 sqrt(2/hbar) int")
    p.add_argument("--barrier-halfwidth", action="store_true", help="integrate over [0, x1] only")

    p = sub.add_parser("lyapunov", parents=[common], help="log-linear fit of 2 pi hbar rho near E_c")
    p.add_argument("--hbar", type=str, required=True)
    p.add_argument("--method", choices=methods, default="ebk")
    p.add_argument("--basis-size", type=int)
    p.add_argument("--window", type=_float_pair, default=(-1e-2, -1e-5))

    p = sub.add_parser("converge", parents=[common], help="|E_n(N) - E_n(ref)| against basis size")
    p.add_argument("--method", choices=diag, required=True)
    p.add_argument("--hbar", type=str, required=True)
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--sizes", type=_int_list, required=True)
    p.add_argument("--ref", type=int, default=2000)
    p.add_argument("--omega", type=float, help="fixed scale (omega=1 gives the unscaled Hermite basis)")

    p = sub.add_parser("sweep", parents=[common], help="run a JSON plan of tasks over a worker pool")
    p.add_argument("--plan", required=True, help="JSON file: list of tasks or {\"tasks\": [...]}")
    return parser


# ------------------------------------------------------------------ output

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return format_energy(float(v))
    return str(v)


def _render_table(columns, rows, fmt: str, provenance: str, extra: dict | None = None) -> Rendered:
    if fmt == "json":
        doc = {"provenance": provenance, "columns": list(columns),
               "rows": [dict(zip(columns, (_json_value(v) for v in r))) for r in rows]}
        if extra:
            doc.update(extra)
        return Rendered(json.dumps(doc, indent=2, sort_keys=True) + "\n", len(rows), "json")
    buf = io.StringIO()
    buf.write(f"# {provenance}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return Rendered(buf.getvalue(), len(rows), "csv")


def _json_value(v):
    if isinstance(v, (float, np.floating)):
        return float(format_energy(float(v)))
    if isinstance(v, np.integer):
        return int(v)
    return v


def atomic_write(path: str | os.PathLike, text: str) -> None:
    """Write via a temporary file in the target directory and rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


# ------------------------------------------------------------------ commands

def _params(args, hbar: Fraction | None = None) -> PotentialParams:
    return PotentialParams(a=args.a, b=args.b, hbar=1.0 if hbar is None else float(hbar))


def _spectrum_for(method: str, params: PotentialParams, basis_size=None, omega=None,
                  emax=None, parity_split=True):
    from .ebk import count_states_below, ebk_spectrum
    from .solvers import EXTRA_LEVELS, SolverConfig, solve_spectrum

    method = Method(method)
    if method is Method.EBK:
        return ebk_spectrum(params, CRITICAL_ENERGY if emax is None else emax)
    count = None
    if emax is not None:
        count = count_states_below(params, emax) + EXTRA_LEVELS
    cfg = SolverConfig(method, basis_size, omega=omega, eig_count=count, parity_split=parity_split)
    spec = solve_spectrum(cfg, params)
    return spec.below(emax) if emax is not None else spec


def cmd_spectrum(args, prov):
    hbar = parse_hbar(args.hbar)
    spec = _spectrum_for(args.method, _params(args, hbar), args.basis_size, args.omega,
                         args.emax, not args.no_parity_split)
    doc = json.dumps({**spec.to_dict(), "provenance": prov}, indent=2, sort_keys=True) + "\n"
    if args.format == "json":
        return Rendered(doc, len(spec), "json")
    return Rendered(spec.to_csv(prov), len(spec), "csv", doc if args.json else None)


def cmd_count(args, prov):
    from .ebk import count_states_below

    hbars = parse_hbar_list(args.hbar)
    counts = []
    for h in hbars:
        params = _params(args, h)
        if args.method == Method.EBK.value:
            counts.append(count_states_below(params))
        else:
            spec = _spectrum_for(args.method, params, args.basis_size)
            counts.append(spec.count_below(CRITICAL_ENERGY))
    columns = ["hbar"] + [str(h) for h in hbars]
    if args.format == "json":
        doc = {"provenance": prov, "method": args.method,
               "counts": {str(h): c for h, c in zip(hbars, counts)}}
        return Rendered(json.dumps(doc, indent=2, sort_keys=True) + "\n", len(hbars), "json")
    rows = [["states_below_Ec"] + counts]
    out = _render_table(columns, rows, "csv", prov)
    return Rendered(out.text, len(hbars), "csv")


def cmd_period(args, prov):
    from .classical import period_asymptotic, period_elliptic, period_quadrature

    if args.samples < 1:
        raise DomainError("--samples must be >= 1")
    if args.log:
        if args.emin * args.emax <= 0:
            raise DomainError("--log needs both bounds strictly on the same side of E_c")
        sign = math.copysign(1.0, args.emin)
        grid = sign * np.geomspace(abs(args.emin), abs(args.emax), args.samples)
    else:
        grid = np.linspace(args.emin, args.emax, args.samples)
    params = _params(args)
    rows = []
    for e in grid:
        e = float(e)
        tq = period_quadrature(e, params)
        below = e < CRITICAL_ENERGY
        te = period_elliptic(e, params) if below else None
        ta = period_asymptotic(e, params) if below else None
        rows.append([e, tq, te, ta])
    return _render_table(["E", "T_quadrature", "T_elliptic", "T_asymptotic"], rows, args.format, prov)


def cmd_dos(args, prov):
    from .analysis import classical_scaled_density, density_of_states

    params = _params(args, parse_hbar(args.hbar))
    spec = _spectrum_for(args.method, params, args.basis_size, emax=args.emax)
    rows = []
    for p in density_of_states(spec):
        if args.window and not args.window[0] < p.e_bar < args.window[1]:
            continue
        tc = classical_scaled_density(p.e_bar, params) if p.e_bar != CRITICAL_ENERGY else None
        rows.append([p.e_bar, p.scaled_density, p.branch.value, tc])
    return _render_table(["e_bar", "scaled_density", "branch", "T_classical"], rows, args.format, prov)


def cmd_tunneling(args, prov):
    from .analysis import parity_pairs, wkb_transmission

    rows = []
    for h in parse_hbar_list(args.hbar):
        params = _params(args, h)
        spec = _spectrum_for(args.method, params, args.basis_size)
        for pair in parity_pairs(spec):
            t = wkb_transmission(pair.e_bar, params, textbook=args.textbook,
                                 half_barrier=args.barrier_halfwidth)
            rows.append([str(h), pair.e_bar, pair.gap, t])
    return _render_table(["hbar", "e_bar", "gap", "transmission"], rows, args.format, prov)


def cmd_lyapunov(args, prov):
    from .analysis import lyapunov_fit
    from .classical import dos_asymptote_line

    params = _params(args, parse_hbar(args.hbar))
    spec = _spectrum_for(args.method, params, args.basis_size)
    fit = lyapunov_fit(spec, tuple(args.window))
    slope, intercept = dos_asymptote_line(params)
    result = {"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r_squared,
              "n_points": fit.n_points, "theory_slope": slope, "theory_intercept": intercept}
    if args.format == "json":
        doc = {"provenance": prov, **{k: _json_value(v) for k, v in result.items()}}
        return Rendered(json.dumps(doc, indent=2, sort_keys=True) + "\n", 1, "json")
    return _render_table(list(result), [list(result.values())], "csv", prov)


def cmd_converge(args, prov):
    from .analysis import convergence_study

    params = _params(args, parse_hbar(args.hbar))
    sizes, ref = list(args.sizes), args.ref
    if args.method == Method.SINC.value:
        # Sinc needs N = 2 k_max + 1
        sizes = [n + 1 if n % 2 == 0 else n for n in sizes]
        ref = ref + 1 if ref % 2 == 0 else ref
    study = convergence_study(Method(args.method), args.level, params, sizes, ref, omega=args.omega)
    return _render_table(["N", "delta_e"], study, args.format, prov)


COMMANDS = {
    "spectrum": cmd_spectrum,
    "count": cmd_count,
    "period": cmd_period,
    "dos": cmd_dos,
    "tunneling": cmd_tunneling,
    "lyapunov": cmd_lyapunov,
    "converge": cmd_converge,
}


def provenance(argv) -> str:
    return f"doublewell {__version__} {shlex.join(argv)}"


def render(argv: list[str]) -> Rendered:
    """Parse and execute one non-sweep command, returning its rendered output."""
    args = build_parser().parse_args(_attach_negative_values(argv))
    if args.command == "sweep":
        raise UsageError("sweep tasks cannot be nested")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return COMMANDS[args.command](args, provenance(argv))


# ------------------------------------------------------------------ sweep

def _load_plan(path: str) -> list[dict]:
    try:
        with open(path) as fh:
            plan = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read plan {path}: {exc}") from exc
    tasks = plan.get("tasks", []) if isinstance(plan, dict) else plan
    if not isinstance(tasks, list):
        raise UsageError("plan must be a list of tasks or an object with a 'tasks' list")
    out = []
    for i, t in enumerate(tasks):
        if not isinstance(t, dict) or not isinstance(t.get("argv"), list):
            raise UsageError(f"task {i}: expected an object with an 'argv' list")
        out.append({"name": str(t.get("name", f"task{i:04d}")), "argv": [str(x) for x in t["argv"]],
                    "out": t.get("out")})
    names = [t["name"] for t in out]
    if len(set(names)) != len(names):
        raise UsageError("task names must be unique")
    return sorted(out, key=lambda t: t["name"])


def _sweep_task(argv: list[str]) -> tuple[int, str, Rendered | None]:
    try:
        return EXIT_OK, "", render(argv)
    except UsageError as exc:
        return EXIT_USAGE, str(exc).splitlines()[0], None
    except DomainError as exc:
        return EXIT_USAGE, f"{type(exc).__name__}: {exc}", None
    except (DoubleWellError, ArithmeticError) as exc:
        return EXIT_NUMERIC, f"{type(exc).__name__}: {exc}", None


def run_sweep(args) -> tuple[int, int]:
    tasks = _load_plan(args.plan)
    out_dir = Path(args.out or ".")
    glob = ["--a", repr(args.a), "--b", repr(args.b), "--format", args.format]
    argvs = [t["argv"][:1] + glob + t["argv"][1:] for t in tasks]
    workers = max(1, min(args.workers, len(tasks) or 1))

    results: list[tuple[int, str, Rendered | None] | None] = [None] * len(tasks)
    if workers == 1:
        for i, argv in enumerate(argvs):
            results[i] = _sweep_task(argv)
            if args.fail_fast and results[i][0] != EXIT_OK:
                break
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_sweep_task, argv) for argv in argvs]
            for i, fut in enumerate(futures):
                results[i] = fut.result()
                if args.fail_fast and results[i][0] != EXIT_OK:
                    for f in futures[i + 1:]:
                        f.cancel()
                    break

    rows = failed = 0
    code = EXIT_OK
    for task, res in zip(tasks, results):
        if res is None:
            print(f"[skip] {task['name']}", file=sys.stderr)
            continue
        status, message, rendered = res
        if status != EXIT_OK:
            failed += 1
            code = max(code, status)
            print(f"[fail] {task['name']}: {message}", file=sys.stderr)
            continue
        target = out_dir / (task["out"] or f"{task['name']}.{rendered.suffix}")
        atomic_write(target, rendered.text)
        rows += rendered.rows
        print(f"[ok]   {task['name']} -> {target} ({rendered.rows} rows)", file=sys.stderr)
    if failed:
        print(f"{failed} of {len(tasks)} tasks failed", file=sys.stderr)
    return code, rows


# ------------------------------------------------------------------ entry

def _origin(exc: BaseException) -> str:
    """Module in which the exception was raised."""
    tb = traceback.extract_tb(exc.__traceback__)
    return Path(tb[-1].filename).stem if tb else type(exc).__module__


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    start = time.perf_counter()
    try:
        args = build_parser().parse_args(_attach_negative_values(argv))
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        if args.command == "sweep":
            code, rows = run_sweep(args)
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                out = COMMANDS[args.command](args, provenance(argv))
            rows = out.rows
            if args.out:
                atomic_write(args.out, out.text)
                if out.mirror is not None:
                    atomic_write(Path(args.out).with_suffix(".json"), out.mirror)
            else:
                sys.stdout.write(out.text)
            code = EXIT_OK
    except UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"doublewell: invalid input ({type(exc).__name__}): {exc} [argv: {shlex.join(argv)}]",
              file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, AnalysisError, DoubleWellError, ArithmeticError) as exc:
        print(f"doublewell: numeric failure in {_origin(exc)} ({type(exc).__name__}): {exc} "
              f"[argv: {shlex.join(argv)}]", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"doublewell: cannot write output: {exc}", file=sys.stderr)
        return EXIT_USAGE
    elapsed = time.perf_counter() - start
    print(f"doublewell {args.command}: {rows} rows in {elapsed:.2f}s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
