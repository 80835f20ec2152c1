"""``symtest`` command-line interface.

Exit codes: 0 success, 1 numerical or acceptance failure, 2 usage or
validation error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .bounds import GAP, run_bounds
from .ensembles import DEFAULT_SEED, EnsembleSpec, SeededSource, haar_unitary
from .errors import InconsistencyError, ValidationError
from .fileio import write_cmat
from .performance import (
    MONTE_CARLO,
    QUADRATURE,
    _method,
    build_omega,
    overlap_estimate,
)
from .protocols import (
    TABLE_BETAS,
    EigenstateProtocol,
    closed_form_beta,
    compose_repetition,
    scale_for_tolerance,
    simulate_trials,
    symmetry_ensemble,
    symmetry_key,
    type_errors,
    wilson_interval,
)

SCHEMA = "symtest.report/1"
TABLE_SCHEMA = "symtest.tables/1"


class UsageError(Exception):
    pass


def _seed(text):
    try:
        value = int(text, 0)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("seed must be an integer") from exc
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return value


def provenance(args, stochastic):
    out = {"schema": SCHEMA, "version": "v" + __version__, "command": args.command, "method": args.method}
    if stochastic:
        out["seed"] = args.seed
        out["samples"] = args.samples
    return out


def emit(args, payload, text=None):
    """Write a JSON payload (or ``text``) to ``--output`` or stdout."""
    body = json.dumps(payload, indent=2) + "\n" if text is None or args.json else text
    if args.output and args.command != "omega":
        with open(args.output, "w") as fh:
            fh.write(body)
    else:
        sys.stdout.write(body)


def _is_mc(args):
    return args.method == MONTE_CARLO


def cmd_omega(args):
    ens = EnsembleSpec(args.ensemble, args.dim)
    src = SeededSource(args.seed)
    omega = build_omega(ens, args.m, args.method, args.samples, src)
    evals = omega.check() if not _is_mc(args) else np.linalg.eigvalsh(omega.matrix)
    rank = int(np.sum(evals > 1e-10 * max(evals[-1], 1.0)))
    path = args.output or "omega_%s_m%d.cmat" % (ens.kind, args.m)
    extra = omega.header()
    extra["provenance"] = provenance(args, _is_mc(args))
    write_cmat(path, omega.matrix, hermitian=True, **extra)
    print("trace %.12g" % omega.trace, file=sys.stderr)
    print("min eigenvalue %.6g" % evals[0], file=sys.stderr)
    print("rank %d" % rank, file=sys.stderr)
    if args.json:
        summary = {"path": path, "trace": omega.trace, "min_eigenvalue": float(evals[0]), "rank": rank}
        summary.update(provenance(args, _is_mc(args)))
        sys.stdout.write(json.dumps(summary, indent=2) + "\n")
    return 0


def _protocol(symmetry, m, parts):
    if not parts:
        return EigenstateProtocol.from_table(symmetry, m)
    sizes = [int(p) for p in parts.split(",")]
    if m is not None and sum(sizes) != m:
        raise ValidationError("--parts %s does not add up to m=%d" % (parts, m))
    return compose_repetition([EigenstateProtocol.from_table(symmetry, k) for k in sizes])


def cmd_protocol_eval(args):
    protocol = _protocol(args.symmetry, args.m, args.parts)
    key = symmetry_key(args.symmetry)
    expected = TABLE_BETAS[key].get(protocol.m) if not args.parts else None
    report = type_errors(
        protocol, haar_unitary(), args.method, args.samples, SeededSource(args.seed), expected
    )
    if args.epsilon:
        report = scale_for_tolerance(report, args.epsilon)
    payload = report.to_json()
    payload["provenance"] = provenance(args, _is_mc(args))
    emit(args, payload)
    return 0


def cmd_bounds(args):
    src = SeededSource(args.seed)
    cert, lower, upper = run_bounds(
        args.symmetry, args.m, args.epsilon, restarts=args.restarts, src=src, tol=args.bound_tol
    )
    payload = cert.to_json()
    payload["feasibility_min_eig"] = lower.certificate_min_eig
    payload["t_bisection"] = lower.t_bisection
    payload["psi_opt"] = [[float(z.real), float(z.imag)] for z in upper.psi_opt]
    payload["provenance"] = provenance(args, False)
    payload["provenance"]["seed"] = args.seed
    payload["provenance"]["restarts"] = args.restarts
    emit(args, payload)
    return 1 if cert.status == GAP else 0


def table_rows(method=QUADRATURE, tolerance=1e-9, samples=100_000, seed=DEFAULT_SEED):
    """Recompute every tabulated row; each row is a dict matching the CSV columns."""
    rows = []
    src = SeededSource(seed)
    for key in ("T", "Z"):
        for m, expected in TABLE_BETAS[key].items():
            protocol = EigenstateProtocol.from_table(key, m)
            row = {"symmetry": key, "m": m, "beta_expected": expected}
            if method == MONTE_CARLO:
                est = overlap_estimate(protocol.psi, haar_unitary(), m, samples, src.child(10 * m + (key == "Z")))
                beta = float(est.mean)
                ok = abs(beta - float(expected)) <= 3 * float(est.stderr) + tolerance
                row["stderr"] = float(est.stderr)
            else:
                beta = type_errors(protocol, method=method).beta
                ok = abs(beta - float(expected)) <= tolerance
            row.update(beta_computed=beta, abs_err=abs(beta - float(expected)), passed=bool(ok))
            rows.append(row)
    return rows


def cmd_reproduce_tables(args):
    rows = table_rows(args.method, args.tolerance, args.samples, args.seed)
    stochastic = _is_mc(args)
    if args.json:
        payload = {
            "schema": TABLE_SCHEMA,
            "rows": [dict(r, beta_expected=str(r["beta_expected"])) for r in rows],
            "provenance": provenance(args, stochastic),
        }
        emit(args, payload)
    else:
        buf = io.StringIO()
        buf.write("# schema=%s version=v%s method=%s tolerance=%g" % (
            TABLE_SCHEMA, __version__, args.method, args.tolerance))
        if stochastic:
            buf.write(" seed=%d samples=%d" % (args.seed, args.samples))
        buf.write("\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["symmetry", "m", "beta_computed", "beta_expected", "abs_err", "pass"])
        for r in rows:
            writer.writerow([
                r["symmetry"], r["m"], repr(r["beta_computed"]), str(r["beta_expected"]),
                "%.3e" % r["abs_err"], str(r["passed"]).lower(),
            ])
        emit(args, None, buf.getvalue())
    failed = sum(not r["passed"] for r in rows)
    print("%d/%d rows pass" % (len(rows) - failed, len(rows)), file=sys.stderr)
    return 1 if failed else 0


def loglog_slope(ms, betas):
    """Least-squares slope of ``log beta`` against ``log(m + 1)``.

    Both naive series equal ``1/(m+1)`` in the query count, so the shifted
    abscissa gives them slope exactly -1 and exposes the faster decay of the
    optimal series already at small m.
    """
    if len(ms) < 2:
        return None
    x = np.log(np.asarray(ms, dtype=float) + 1)
    return float(np.polyfit(x, np.log(betas), 1)[0])


def decay_rows(symmetry, m_max):
    key = symmetry_key(symmetry)
    if not 1 <= m_max <= 6:
        raise ValidationError("m_max must lie in 1..6")
    # T protocols need pairs of queries; odd m only repeats the m-1 value.
    ms = range(1, min(m_max, 5) + 1) if key == "Z" else range(2, m_max + 1, 2)
    rows = []
    for m in ms:
        naive_k = m if key == "Z" else m // 2
        rows.append((m, closed_form_beta(key, "optimal", m), closed_form_beta(key, "naive", naive_k)))
    return rows


def cmd_decay_scan(args):
    key = symmetry_key(args.symmetry)
    rows = decay_rows(key, args.m_max)
    if not rows:
        raise ValidationError("no zero-type-I protocol for %s-symmetry with m <= %d" % (key, args.m_max))
    ms = [r[0] for r in rows]
    slope_opt = loglog_slope(ms, [float(r[1]) for r in rows])
    slope_naive = loglog_slope(ms, [float(r[2]) for r in rows])
    payload = {
        "symmetry": key,
        "rows": [{"m": m, "beta_opt": str(b), "beta_naive": str(n)} for m, b, n in rows],
        "slope_opt": slope_opt,
        "slope_naive": slope_naive,
        "provenance": provenance(args, False),
    }
    if args.json:
        emit(args, payload)
        return 0
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["m", "beta_opt", "beta_naive"])
    for m, b, n in rows:
        writer.writerow([m, repr(float(b)), repr(float(n))])
    if slope_opt is not None:
        buf.write("# slope_opt=%.6f slope_naive=%.6f\n" % (slope_opt, slope_naive))
    emit(args, payload, buf.getvalue())
    return 0


def cmd_simulate(args):
    if args.shots <= 0:
        raise UsageError("--shots must be positive")
    key = symmetry_key(args.symmetry)
    protocol = EigenstateProtocol.from_table(key, args.m)
    truth = symmetry_ensemble(key) if args.truth == "symmetric" else haar_unitary()
    accepted = simulate_trials(protocol, truth, args.shots, SeededSource(args.seed))
    if args.truth == "symmetric":
        name, count = "alpha", args.shots - accepted
        exact = 0.0
    else:
        name, count = "beta", accepted
        exact = type_errors(protocol).beta
    rate = count / args.shots
    lo, hi = wilson_interval(count, args.shots)
    sigma = math.sqrt(max(exact * (1 - exact), 1e-300) / args.shots)
    payload = {
        "symmetry": key,
        "m": args.m,
        "truth": args.truth,
        "trials": args.shots,
        "statistic": name,
        "count": count,
        "empirical": rate,
        "wilson95": [lo, hi],
        "exact": exact,
        "within_3sigma": abs(rate - exact) <= 3 * sigma,
        "provenance": dict(provenance(args, True), samples=args.shots),
    }
    emit(args, payload)
    return 0


COMMANDS = {
    "omega": cmd_omega,
    "protocol-eval": cmd_protocol_eval,
    "bounds": cmd_bounds,
    "reproduce-tables": cmd_reproduce_tables,
    "decay-scan": cmd_decay_scan,
    "simulate": cmd_simulate,
}


def _global_flags(parser, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=_seed, default=d(DEFAULT_SEED), help="64-bit RNG seed")
    parser.add_argument(
        "--method", default=d(QUADRATURE), choices=["quadrature", "monte-carlo", "monte_carlo", "closed-form", "closed_form"],
    )
    parser.add_argument("--samples", type=int, default=d(100_000), help="Monte Carlo sample count")
    parser.add_argument("--tolerance", type=float, default=d(1e-9))
    parser.add_argument("--output", "-o", default=d(None))
    parser.add_argument("--json", action="store_true", default=d(False))


def build_parser():
    parser = argparse.ArgumentParser(prog="symtest", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version="symtest v" + __version__)
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)

    p = sub.add_parser("omega", parents=[common], help="build a performance operator (CMAT1)")
    p.add_argument("--ensemble", required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--dim", type=int, default=2)

    p = sub.add_parser("protocol-eval", parents=[common], help="type-I/II errors of a library protocol")
    p.add_argument("--symmetry", required=True)
    p.add_argument("--m", type=int)
    p.add_argument("--parts", help="comma-separated part sizes for a naive repetition, e.g. 4,2")
    p.add_argument("--epsilon", type=float, default=0.0)

    p = sub.add_parser("bounds", parents=[common], help="lower/upper bounds and optimality certificate")
    p.add_argument("--symmetry", required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--bound-tol", type=float, default=1e-6)

    sub.add_parser("reproduce-tables", parents=[common], help="recompute the tabulated type-II errors")

    p = sub.add_parser("decay-scan", parents=[common], help="optimal vs naive decay in m")
    p.add_argument("--symmetry", required=True)
    p.add_argument("--m-max", type=int, default=6)

    p = sub.add_parser("simulate", parents=[common], help="shot-level simulation with Wilson intervals")
    p.add_argument("--symmetry", required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--shots", type=int, default=100_000)
    p.add_argument("--truth", choices=["symmetric", "haar"], default="haar")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.method = _method(args.method)
        if args.samples < 1:
            raise UsageError("--samples must be positive")
        if args.command == "protocol-eval" and args.m is None and not args.parts:
            raise UsageError("protocol-eval needs --m or --parts")
        return COMMANDS[args.command](args)
    except (UsageError, ValidationError) as exc:
        print("symtest %s: error: %s" % (args.command, exc), file=sys.stderr)
        return 2
    except (InconsistencyError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print("symtest %s: numerical failure: %s" % (args.command, exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
