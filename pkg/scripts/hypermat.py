#!/usr/bin/env python3

"""
Hypermat Command-Line Tool

This script evaluates matrix special functions and runs the identity
verification suite. Subcommands:

- eval: evaluate gamma, beta, pochhammer, pfq or euler_integral from a JSON request
- verify: verify a list of cases (as written by gen-cases)
- suite: generate and verify the seeded cases for every identity
- gen-cases: write the case list the suite would verify

Matrices use the shared JSON encoding {"dim": n, "entries": [[[re, im], ...], ...]};
a bare number stands for that multiple of the identity.

Exit codes: 0 success, 1 unexpected error, 2 malformed input,
3 domain or precondition error (or failed cases), 4 I/O failure.
"""

import argparse
import csv
import io
import json
import sys

from common import (
    LIBRARY_ERRORS,
    InputFormatError,
    decode_complex,
    decode_matrix,
    encode_matrix,
    get_thread_count,
    load_json,
    write_output,
)
from euler_quadrature import DEFAULT_QUADRATURE_TOL, EulerIntegralSpec, euler_integral_detailed
from hyper_series import DEFAULT_MAX_TERMS, DEFAULT_SERIES_TOL, HyperParams, SeriesConfig, pfq
from identity_suite import (
    DEFAULT_SUITE_TOL,
    case_from_dict,
    case_to_dict,
    generate_cases,
    run_cases,
)
from special_fn import beta_matrix, gamma_matrix, pochhammer

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_INPUT = 2
EXIT_DOMAIN = 3
EXIT_IO = 4

CSV_FIELDS = [
    "identity",
    "case_index",
    "seed",
    "dim",
    "scalars",
    "residual",
    "tol",
    "passed",
    "diagnostic",
    "lhs_route",
    "rhs_route",
    "lhs_count",
    "rhs_count",
    "note",
]


def parse_dims(text):
    """Parse a comma-separated list of dimensions in 1..6."""
    try:
        dims = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid dimension list: {text!r}")
    if not dims or any(not 1 <= d <= 6 for d in dims):
        raise argparse.ArgumentTypeError("dimensions must be a non-empty list of integers in 1..6")
    return dims


def positive_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number: {text!r}")
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _request_dim(request):
    """Dimension of the first explicit matrix in an eval request (1 if all are scalars)."""
    for key in ("p", "q", "r"):
        value = request.get(key)
        if isinstance(value, dict) and isinstance(value.get("entries"), list):
            return len(value["entries"])
    for key in ("num", "den"):
        for value in request.get(key) or []:
            if isinstance(value, dict) and isinstance(value.get("entries"), list):
                return len(value["entries"])
    return 1


def _require(request, key):
    if key not in request:
        raise InputFormatError(f"missing '{key}'", "$")
    return request[key]


def _int_field(request, key, minimum=0):
    value = _require(request, key)
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise InputFormatError(f"expected an integer >= {minimum}", f"$.{key}")
    return value


def _float_field(request, key, default):
    value = request.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
        raise InputFormatError("expected a positive number", f"$.{key}")
    return float(value)


def _matrix_list(request, key, dim):
    values = _require(request, key)
    if not isinstance(values, list):
        raise InputFormatError("expected a list of matrices", f"$.{key}")
    return [decode_matrix(v, f"$.{key}[{i}]", dim) for i, v in enumerate(values)]


def evaluate_request(request):
    """Evaluate one eval request; returns the output document."""
    if not isinstance(request, dict):
        raise InputFormatError("expected an object", "$")
    fn = _require(request, "fn")
    dim = _request_dim(request)

    if fn == "gamma":
        result = gamma_matrix(decode_matrix(_require(request, "p"), "$.p", dim))
        diagnostics = {}
    elif fn == "beta":
        p = decode_matrix(_require(request, "p"), "$.p", dim)
        q = decode_matrix(_require(request, "q"), "$.q", dim)
        result = beta_matrix(p, q)
        diagnostics = {}
    elif fn == "pochhammer":
        p = decode_matrix(_require(request, "p"), "$.p", dim)
        m = _int_field(request, "m")
        result = pochhammer(p, m)
        diagnostics = {"terms_used": m}
    elif fn == "pfq":
        numerator = _matrix_list(request, "num", dim)
        denominator = _matrix_list(request, "den", dim)
        z = decode_complex(_require(request, "z"), "$.z")
        acceleration = request.get("acceleration", "none")
        if acceleration not in ("none", "euler"):
            raise InputFormatError("expected 'none' or 'euler'", "$.acceleration")
        max_terms = request.get("max_terms", DEFAULT_MAX_TERMS)
        if isinstance(max_terms, bool) or not isinstance(max_terms, int) or max_terms < 1:
            raise InputFormatError("expected a positive integer", "$.max_terms")
        config = SeriesConfig(
            tol=_float_field(request, "tol", DEFAULT_SERIES_TOL),
            max_terms=max_terms,
            acceleration=acceleration,
        )
        series = pfq(HyperParams.build(numerator, denominator, dim), z, config)
        result = series.value
        diagnostics = {
            "terms_used": series.terms_used,
            "last_term_norm": series.last_term_norm,
            "converged": series.converged,
            "method": series.method,
        }
    elif fn == "euler_integral":
        p = decode_matrix(_require(request, "p"), "$.p", dim)
        q = decode_matrix(_require(request, "q"), "$.q", dim)
        r = decode_matrix(_require(request, "r"), "$.r", dim)
        z = decode_complex(_require(request, "z"), "$.z")
        q_exp = request.get("q_exp", 2)
        if isinstance(q_exp, bool) or not isinstance(q_exp, int):
            raise InputFormatError("expected an integer", "$.q_exp")
        spec = EulerIntegralSpec.build(p, q, r, z, q_exp)
        quadrature = euler_integral_detailed(spec, _float_field(request, "tol", DEFAULT_QUADRATURE_TOL))
        result = quadrature.value
        diagnostics = {
            "nodes_used": quadrature.nodes_used,
            "residual": quadrature.residual,
            "method": quadrature.method,
            "converged": True,
        }
    else:
        raise InputFormatError(
            f"unknown function {fn!r}, expected gamma, beta, pochhammer, pfq or euler_integral", "$.fn"
        )
    return {"fn": fn, "result": encode_matrix(result), "diagnostics": diagnostics}


def cases_from_document(document):
    """Accept a gen-cases document: a list of cases or {"cases": [...]}."""
    if isinstance(document, dict) and "cases" in document:
        items, prefix = document["cases"], "$.cases"
    else:
        items, prefix = document, "$"
    if not isinstance(items, list):
        raise InputFormatError("expected a list of cases", prefix)
    return [case_from_dict(item, f"{prefix}[{i}]") for i, item in enumerate(items)]


def reports_to_csv(reports):
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for report in reports:
        row = report.to_dict()
        writer.writerow(
            {
                "identity": row["identity"],
                "case_index": row["case_index"],
                "seed": row["seed"],
                "dim": row["dim"],
                "scalars": json.dumps(row["scalars"], sort_keys=True),
                "residual": "" if row["residual"] is None else repr(row["residual"]),
                "tol": row["tol"],
                "passed": row["passed"],
                "diagnostic": row["diagnostic"],
                "lhs_route": row["lhs_route"],
                "rhs_route": row["rhs_route"],
                "lhs_count": row["terms_or_nodes"]["lhs"],
                "rhs_count": row["terms_or_nodes"]["rhs"],
                "note": row["note"],
            }
        )
    return buffer.getvalue()


def _dump(document):
    return json.dumps(document, indent=2, sort_keys=True)


def _print_progress(identity, reports):
    counted = [r for r in reports if not r.diagnostic]
    passed = sum(r.passed for r in counted)
    diagnostics = len(reports) - len(counted)
    extra = f", {diagnostics} diagnostics" if diagnostics else ""
    print(f"{identity.value}: {passed}/{len(counted)} passed{extra}", file=sys.stderr)


def _print_discrepancy(discrepancy):
    worst = discrepancy["max_residual"]
    detail = ", ".join(
        f"{name} max residual {'n/a' if value is None else f'{value:.3e}'}" for name, value in sorted(worst.items())
    )
    reading = discrepancy["reading"]
    if reading == "proof":
        verdict = "proof ((Q+mI)/q)"
    elif reading == "statement":
        verdict = "statement ((Q+mI)/2)"
    else:
        verdict = "unresolved"
    print(f"Theorem 7 reading: {verdict} [{detail}]", file=sys.stderr)


def _write_result(result, args):
    if args.format == "csv":
        write_output(reports_to_csv(result.reports), args.out)
    else:
        write_output(_dump(result.to_dict()), args.out)
    failed = sum(1 for r in result.reports if not r.diagnostic and not r.passed)
    print(f"{len(result.reports)} reports, {failed} failed, {len(result.skipped)} skipped", file=sys.stderr)
    return EXIT_OK if result.all_passed else EXIT_DOMAIN


def cmd_eval(args):
    document = evaluate_request(load_json(args.input))
    write_output(_dump(document), args.out)
    return EXIT_OK


def cmd_verify(args):
    cases = cases_from_document(load_json(args.input))
    result = run_cases(cases, get_thread_count(), progress=_print_progress)
    if any(r.case.identity_id.value.startswith("T7") and r.case.scalars["q"] != 2 for r in result.reports):
        _print_discrepancy(result.discrepancy)
    return _write_result(result, args)


def cmd_suite(args):
    threads = get_thread_count()
    cases, skipped = generate_cases(args.seed, args.dims, args.cases, args.tol)
    print(f"Running {len(cases)} cases (seed {args.seed}, dims {args.dims}, {threads} threads)", file=sys.stderr)
    result = run_cases(cases, threads, skipped, progress=_print_progress)
    _print_discrepancy(result.discrepancy)
    return _write_result(result, args)


def cmd_gen_cases(args):
    cases, skipped = generate_cases(args.seed, args.dims, args.cases, args.tol)
    for entry in skipped:
        print(f"Skipped {entry['identity']} dim {entry['dim']} case {entry['case_index']}: {entry['reason']}", file=sys.stderr)
    write_output(_dump([case_to_dict(case) for case in cases]), args.out)
    return EXIT_OK


COMMANDS = {
    "eval": cmd_eval,
    "verify": cmd_verify,
    "suite": cmd_suite,
    "gen-cases": cmd_gen_cases,
}


def build_parser():
    parser = argparse.ArgumentParser(
        description="Evaluate matrix special functions and verify Euler-type integral identities"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    def add_output(sub, formats=True):
        sub.add_argument("--out", default=None, help="Output file (default: stdout)")
        if formats:
            sub.add_argument(
                "--format",
                choices=["json", "csv"],
                default="json",
                help="Report format (default: json)",
            )

    def add_generation(sub):
        sub.add_argument("--seed", type=int, default=42, help="Master seed (default: 42)")
        sub.add_argument("--dims", type=parse_dims, default=[1, 2, 3], help="Comma-separated dimensions (default: 1,2,3)")
        sub.add_argument("--tol", type=positive_float, default=DEFAULT_SUITE_TOL, help="Residual tolerance (default: 1e-7)")
        sub.add_argument("--cases", type=int, default=5, help="Cases per identity and dimension (default: 5)")

    sub = subparsers.add_parser("eval", help="Evaluate one function from a JSON request")
    sub.add_argument("--input", default=None, help="Request file (default: stdin)")
    add_output(sub, formats=False)

    sub = subparsers.add_parser("verify", help="Verify cases written by gen-cases")
    sub.add_argument("--input", default=None, help="Case file (default: stdin)")
    add_output(sub)

    sub = subparsers.add_parser("suite", help="Generate and verify every identity")
    add_generation(sub)
    add_output(sub)

    sub = subparsers.add_parser("gen-cases", help="Write the cases the suite would verify")
    add_generation(sub)
    add_output(sub, formats=False)
    return parser


def main(argv=None):
    """Run one subcommand and return its exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "cases", 1) < 1:
        parser.error("--cases must be at least 1")
    try:
        return COMMANDS[args.command](args)
    except InputFormatError as e:
        print(f"Input error: {str(e)}", file=sys.stderr)
        return EXIT_INPUT
    except LIBRARY_ERRORS as e:
        print(f"{type(e).__name__}: {str(e)}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as e:
        print(f"I/O error: {str(e)}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    try:
        sys.exit(main())
    except Exception as e:
        print(f"Error: {str(e)}", file=sys.stderr)
        sys.exit(EXIT_UNEXPECTED)
