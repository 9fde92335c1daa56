"""CSV/JSON serialization and the ``qmaxwell`` command-line surface.

Density profiles travel as CSV with header ``x,n`` on a uniform periodic
grid that excludes x = 1; solver output is a JSON report that round-trips
losslessly (floats are written at full round-trip precision).  Exit codes:
0 success, 2 iteration budget exhausted, 3 invalid input, 64 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import re
import sys

import numpy as np
from scipy.signal import resample as _fft_resample

from . import functionals as fn
from .errors import (
    BasisTooSmall,
    DensityFileError,
    DuplicatedEndpoint,
    MalformedRow,
    MaxIterExceeded,
    NonPositiveDensity,
    NonUniformGrid,
    PotentialExprError,
    QMaxwellError,
)
from .maxwellian_solver import (
    SolverOptions,
    epsilon_sweep,
    euler_lagrange_residual,
    reconstruct_potential_form,
    solve_maxwellian,
)
from .spectral_core import (
    ChemicalPotential,
    DensityOperator,
    DensityProfile,
    SpectralBasis,
    build_basis,
    density_of,
    gibbs_from_potential,
    sobolev_norm,
)

__all__ = [
    "parse_density_csv",
    "write_density_csv",
    "parse_potential",
    "potential_from_expression",
    "build_report_dict",
    "serialize_report",
    "parse_report",
    "cli_dispatch",
    "main",
]

log = logging.getLogger("qmaxwell.cli")

EXIT_OK = 0
EXIT_MAXITER = 2
EXIT_INPUT = 3
EXIT_USAGE = 64


# ---------------------------------------------------------------------------
# density / potential files

def _read_uniform_csv(path, header, positive):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DensityFileError(f"{path}: {exc.strerror or exc}") from exc
    lines = [ln for ln in lines if ln.strip() != ""]
    if not lines or lines[0].strip().replace(" ", "") != header:
        raise MalformedRow(f"expected header {header!r}", line_number=1)
    xs, vs = [], []
    for idx, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 2:
            raise MalformedRow(f"expected 2 comma-separated fields, got {len(parts)}",
                               line_number=idx)
        try:
            x, v = float(parts[0]), float(parts[1])
        except ValueError:
            raise MalformedRow(f"could not parse {line!r} as two floats",
                               line_number=idx) from None
        xs.append(x)
        vs.append(v)
    xs = np.asarray(xs)
    vs = np.asarray(vs)
    if xs.size < 2:
        raise DensityFileError(f"{path}: need at least 2 samples, got {xs.size}")
    rows = xs.size
    if np.any(np.abs(xs - 1.0) <= 1e-9):
        raise DuplicatedEndpoint(
            "grid contains x = 1, which duplicates x = 0 on the torus; "
            "drop the final row (grids exclude the periodic endpoint)")
    h = 1.0 / rows
    if np.max(np.abs(xs - np.arange(rows) * h)) > 1e-9 * h:
        raise NonUniformGrid(
            f"x column must be j/{rows} for j = 0..{rows - 1} (uniform, starting at 0)")
    if positive and np.min(vs) <= 0.0:
        j = int(np.argmin(vs))
        raise NonPositiveDensity(
            f"density must be strictly positive; row at x={xs[j]:g} has n={vs[j]:g}")
    return vs


def _resample(values, N):
    if values.size == N:
        return np.asarray(values, dtype=float)
    return _fft_resample(np.asarray(values, dtype=float), N)


def parse_density_csv(path, basis: SpectralBasis) -> DensityProfile:
    """Load a density CSV and trigonometrically resample it to the basis grid."""
    values = _read_uniform_csv(path, "x,n", positive=True)
    if values.size < 4 * basis.M + 1:
        raise DensityFileError(
            f"{path}: {values.size} rows cannot resolve M={basis.M} "
            f"(need at least {4 * basis.M + 1})")
    resampled = _resample(values, basis.N)
    if np.min(resampled) <= 0.0:
        raise NonPositiveDensity(
            "density is no longer strictly positive after resampling to the basis grid")
    return DensityProfile(basis, resampled)


def write_density_csv(path, basis: SpectralBasis, values):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,n\n")
        for x, v in zip(basis.grid, values):
            fh.write(f"{float(x)!r},{float(v)!r}\n")


_NUMBER = r"(?:\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
_TERM_RE = re.compile(
    rf"^(?P<coeff>{_NUMBER})?"
    r"(?P<trig>\*?(?P<fn>cos|sin)\(2\*pi(?:\*(?P<k>\d+))?\*x\))?$")


def potential_from_expression(expr: str, basis: SpectralBasis) -> ChemicalPotential:
    """Restricted grammar: sums of ``c``, ``c*cos(2*pi*k*x)``, ``c*sin(2*pi*k*x)``.

    ``zero`` is accepted as an alias for 0; a missing coefficient means 1.
    """
    text = expr.replace(" ", "")
    if text in ("zero", ""):
        return ChemicalPotential.constant(basis, 0.0)
    coeffs = np.zeros(basis.D)
    # split on term-level signs only, not on exponent signs as in 1e-2
    pieces = [p for p in re.split(rf"(?<![eE*(])(?=[+-])", text) if p]
    for piece in pieces:
        sign = 1.0
        if piece[0] in "+-":
            sign = -1.0 if piece[0] == "-" else 1.0
            piece = piece[1:]
        m = _TERM_RE.match(piece)
        if not piece or not m or (m.group("coeff") is None and m.group("trig") is None):
            raise PotentialExprError(
                f"cannot parse term {piece!r} in {expr!r}; allowed terms are c, "
                f"c*cos(2*pi*k*x) and c*sin(2*pi*k*x)")
        c = sign * (float(m.group("coeff")) if m.group("coeff") is not None else 1.0)
        if m.group("trig") is None:
            coeffs[0] += c
            continue
        k = int(m.group("k")) if m.group("k") else 1
        if k < 1 or k > basis.M:
            raise PotentialExprError(
                f"wavenumber {k} outside the basis (1..{basis.M}); raise --modes")
        idx = 2 * k - 1 if m.group("fn") == "cos" else 2 * k
        coeffs[idx] += c / np.sqrt(2.0)  # against the orthonormal basis
    return ChemicalPotential(basis, coeffs)


def parse_potential(arg: str, basis: SpectralBasis) -> ChemicalPotential:
    """Potential from a CSV file (header ``x,a``) if ``arg`` is a path, else
    from the restricted expression grammar."""
    if os.path.exists(arg):
        values = _read_uniform_csv(arg, "x,a", positive=False)
        return ChemicalPotential.from_grid(basis, _resample(values, basis.N))
    return potential_from_expression(arg, basis)


# ---------------------------------------------------------------------------
# report JSON

def _inequality_dict(rep: fn.InequalityReport) -> dict:
    return {"name": rep.name, "lhs": rep.lhs, "rhs": rep.rhs, "gap": rep.gap,
            "holds": rep.holds, "strict": rep.strict, "diagnostic": rep.diagnostic}


def build_report_dict(basis, opts: SolverOptions, report, A: ChemicalPotential,
                      density_achieved, inequalities=()) -> dict:
    return {
        "meta": {
            "modes": basis.M,
            "grid": basis.N,
            "method": opts.method,
            "tolerances": {
                "tol_l2": opts.tol_l2,
                "max_iter": opts.max_iter,
                "armijo_c": opts.armijo_c,
                "armijo_shrink": opts.armijo_shrink,
                "newton_regularization": opts.newton_regularization,
            },
            "schedule": list(opts.epsilon_schedule),
        },
        "result": {
            "residual_l2": report.residual_l2,
            "residual_hminus1": report.residual_hminus1,
            "free_energy": report.free_energy,
            "dual_value": report.dual_value,
            "duality_gap": report.duality_gap,
            "el_residual": report.el_residual,
            "iterations": report.iterations,
        },
        "potential": {"fourier_coefficients": [float(c) for c in A.coefficients]},
        "density_achieved": {"values": [float(v) for v in density_achieved]},
        "inequalities": [_inequality_dict(r) for r in inequalities],
        "history": [dataclasses.asdict(h) for h in report.history],
    }


def serialize_report(report_dict: dict) -> str:
    return json.dumps(report_dict, indent=2) + "\n"


def parse_report(text: str) -> dict:
    return json.loads(text)


# ---------------------------------------------------------------------------
# inequality suite backing `verify`

def _random_psd(rng, basis) -> DensityOperator:
    B = rng.standard_normal((basis.D, basis.D))
    return DensityOperator(basis, B @ B.T / basis.D)


def _haar_rotation(rng, D):
    Q, R = np.linalg.qr(rng.standard_normal((D, D)))
    return Q * np.sign(np.diag(R))


def _worst(reports):
    worst = min(reports, key=lambda r: r.gap)
    all_hold = all(r.holds for r in reports)
    return dataclasses.replace(worst, holds=all_hold)


def run_inequality_suite(basis, A, rho, n, report, opts, samples, seed):
    """Seeded randomized suite; each entry records its worst-case instance."""
    rng = np.random.default_rng(seed)
    out = []
    out.append(_worst([fn.validate_lieb(_random_psd(rng, basis))
                       for _ in range(samples)]))
    out.append(_worst([fn.validate_peierls(_random_psd(rng, basis),
                                           _haar_rotation(rng, basis.D))
                       for _ in range(samples)]))
    out.append(_worst([fn.convexity_probe(_random_psd(rng, basis),
                                          _random_psd(rng, basis),
                                          rng.uniform(0.1, 0.9))
                       for _ in range(samples)]))
    out.append(_worst([fn.eigenvalue_perturbation_check(_random_psd(rng, basis),
                                                        _random_psd(rng, basis))
                       for _ in range(samples)]))
    el = euler_lagrange_residual(rho, A)
    el_bound = 10.0 * opts.tol_l2 * (1.0 + rho.trace)
    out.append(fn.InequalityReport(name="euler_lagrange_residual", lhs=el,
                                   rhs=el_bound, gap=el_bound - el,
                                   holds=bool(el <= el_bound)))
    a_grid = A.on_grid()
    worst_diff = 0.0
    for p in range(basis.D):
        psi = basis.functions[p]
        direct = basis.quadrature(a_grid * psi)
        worst_diff = max(worst_diff,
                         abs(reconstruct_potential_form(rho, n, psi) - direct))
    rec_bound = 1e-6 * (1.0 + sobolev_norm(a_grid, 0))
    out.append(fn.InequalityReport(name="potential_reconstruction", lhs=worst_diff,
                                   rhs=rec_bound, gap=rec_bound - worst_diff,
                                   holds=bool(worst_diff <= rec_bound)))
    out.append(fn.log_sobolev_gap(rho))
    return out


# ---------------------------------------------------------------------------
# CLI

class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser():
    parser = _Parser(prog="qmaxwell",
                     description="Inverse chemical-potential solver on the torus")
    sub = parser.add_subparsers(dest="command")

    def common(p):
        p.add_argument("--modes", type=int, required=True, metavar="M")
        p.add_argument("--grid", type=int, default=None, metavar="N")
        p.add_argument("--seed", type=int, default=0, metavar="U64")

    p_fwd = sub.add_parser("forward", help="density of exp(-(H+A))")
    common(p_fwd)
    p_fwd.add_argument("--potential", required=True, metavar="FILE|EXPR")
    p_fwd.add_argument("--out", required=True)

    p_solve = sub.add_parser("solve", help="recover A from a density CSV")
    common(p_solve)
    p_solve.add_argument("--density", required=True)
    p_solve.add_argument("--method", default="dual_newton",
                         choices=["dual_newton", "gradient", "penalized"])
    p_solve.add_argument("--tol", type=float, default=1e-9)
    p_solve.add_argument("--max-iter", type=int, default=100)
    p_solve.add_argument("--out", required=True)
    p_solve.add_argument("--density-out", default=None)

    p_verify = sub.add_parser("verify", help="solve, then run the inequality suite")
    common(p_verify)
    p_verify.add_argument("--density", required=True)
    p_verify.add_argument("--samples", type=int, default=200)
    p_verify.add_argument("--tol", type=float, default=1e-9)
    p_verify.add_argument("--out", required=True)

    p_sweep = sub.add_parser("sweep-epsilon", help="penalized continuation table")
    common(p_sweep)
    p_sweep.add_argument("--density", required=True)
    p_sweep.add_argument("--schedule", default=None,
                         help="comma-separated descending epsilons")
    p_sweep.add_argument("--tol", type=float, default=1e-9)
    p_sweep.add_argument("--out", required=True)
    return parser


_METHOD_NAMES = {"dual_newton": "dual_newton", "gradient": "dual_gradient_ascent",
                 "penalized": "penalized_path"}


def _configure_logging():
    level = {"error": logging.ERROR, "warn": logging.WARNING,
             "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("QMAXWELL_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(name)s %(levelname)s %(message)s")
    logging.getLogger("qmaxwell").setLevel(level)


def _basis_for(args) -> SpectralBasis:
    return build_basis(args.modes, args.grid)


def _cmd_forward(args) -> int:
    basis = _basis_for(args)
    A = parse_potential(args.potential, basis)
    n = density_of(gibbs_from_potential(basis, A))
    write_density_csv(args.out, basis, n)
    return EXIT_OK


def _cmd_solve(args) -> int:
    basis = _basis_for(args)
    n = parse_density_csv(args.density, basis)
    opts = SolverOptions(method=_METHOD_NAMES[args.method], tol_l2=args.tol,
                         max_iter=args.max_iter)
    try:
        A, rho, report = solve_maxwellian(n, opts)
    except MaxIterExceeded as exc:
        log.error("%s", exc)
        if exc.report is not None:
            coeffs = ChemicalPotential.constant(basis, 0.0)
            payload = build_report_dict(basis, opts, exc.report, coeffs,
                                        np.zeros(basis.N))
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(serialize_report(payload))
        return EXIT_MAXITER
    achieved = density_of(rho)
    payload = build_report_dict(basis, opts, report, A, achieved)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(serialize_report(payload))
    if args.density_out:
        write_density_csv(args.density_out, basis, achieved)
    return EXIT_OK


def _cmd_verify(args) -> int:
    basis = _basis_for(args)
    n = parse_density_csv(args.density, basis)
    opts = SolverOptions(tol_l2=args.tol)
    try:
        A, rho, report = solve_maxwellian(n, opts)
    except MaxIterExceeded as exc:
        log.error("%s", exc)
        return EXIT_MAXITER
    inequalities = run_inequality_suite(basis, A, rho, n, report, opts,
                                        args.samples, args.seed)
    payload = build_report_dict(basis, opts, report, A, density_of(rho),
                                inequalities)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(serialize_report(payload))
    ok = all(r.holds for r in inequalities if not r.diagnostic)
    return EXIT_OK if ok else 1


def _cmd_sweep(args) -> int:
    basis = _basis_for(args)
    n = parse_density_csv(args.density, basis)
    kwargs = {"tol_l2": args.tol}
    if args.schedule:
        try:
            kwargs["epsilon_schedule"] = tuple(
                float(tok) for tok in args.schedule.split(",") if tok.strip())
        except ValueError:
            raise PotentialExprError(f"bad schedule {args.schedule!r}") from None
    opts = SolverOptions(**kwargs)
    try:
        rows = epsilon_sweep(n, opts)
    except MaxIterExceeded as exc:
        log.error("%s", exc)
        return EXIT_MAXITER
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("epsilon,residual_l2,F_eps,A_dist_hminus1\n")
        for row in rows:
            fh.write(f"{float(row.epsilon)!r},{float(row.residual_l2)!r},"
                     f"{float(row.f_eps)!r},{float(row.a_dist_hminus1)!r}\n")
    return EXIT_OK


def cli_dispatch(argv) -> int:
    """Run one CLI invocation; returns the process exit code."""
    _configure_logging()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    handler = {"forward": _cmd_forward, "solve": _cmd_solve,
               "verify": _cmd_verify, "sweep-epsilon": _cmd_sweep}[args.command]
    try:
        return handler(args)
    except (DensityFileError, NonPositiveDensity, PotentialExprError,
            BasisTooSmall, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except QMaxwellError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main():
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
