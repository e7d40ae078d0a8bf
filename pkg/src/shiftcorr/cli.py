"""Command-line experiment runner.

Every subcommand writes either a JSON report (``--json``) or a CSV whose
first line is ``# schema-version: 1``.  Output goes to ``--out`` or stdout.
Exit codes: 0 success, 1 usage error, 2 invariant or identity violation,
3 capacity error.  Failures print one line ``error: kind=<kind> reason=<text>``
on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import coeffio, correlation, forms, fspec, lseries, predict, selftest, sieve
from .errors import InvariantViolation, ShiftcorrError, UsageError
from .config import ETA_MAX_N
from .qexpansion import EigenformSpec

SCHEMA_VERSION = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# argument helpers


def parse_ladder(text: str) -> list[int]:
    """``lo:hi:factor`` to the geometric ladder ``lo, lo*factor, ... <= hi``."""
    try:
        lo_s, hi_s, f_s = text.split(":")
        lo, hi, factor = float(lo_s), float(hi_s), float(f_s)
    except ValueError as exc:
        raise UsageError(f"bad ladder {text!r}; expected lo:hi:factor") from exc
    if lo < 1 or hi < lo or factor <= 1:
        raise UsageError(f"bad ladder {text!r}; need 1 <= lo <= hi and factor > 1")
    out, x = [], lo
    while x <= hi * (1 + 1e-12):
        out.append(int(round(x)))
        x *= factor
    return sorted(set(out))


def _xs(args) -> list[int]:
    if args.x_ladder:
        return parse_ladder(args.x_ladder)
    if args.x is None:
        raise UsageError("give --x or --x-ladder")
    return [int(args.x)]


def _positive(value: str) -> float:
    try:
        v = float(value)
    except ValueError:
        v = math.nan
    if not math.isfinite(v) or v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {value!r}")
    return v


def _count(value: str) -> int:
    """Positive integer, also written as ``1e5``."""
    v = _positive(value)
    if v != int(v):
        raise argparse.ArgumentTypeError(f"expected an integer, got {value!r}")
    return int(v)


def _alpha(text: str):
    if "/" in text:
        return Fraction(text)
    return float(text)


def _load_form(args, N: int):
    """Eigenvalue table reaching ``N`` from ``--coeff-file`` or ``--form``."""
    if args.limit is not None:
        N = args.limit
    if args.coeff_file:
        table = coeffio.read_table(args.coeff_file)
        table.require(N)
        return table
    spec = EigenformSpec.parse(args.form)
    return coeffio.cached_eigenvalue_table(spec, max(N, 2))


def _function(args, text: str, N: int, lam):
    tree = fspec.parse(text)
    return fspec.evaluate(tree, N, lam.truncated(N) if lam is not None else None)


# ---------------------------------------------------------------------------
# output


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, complex):
        return {"re": v.real, "im": v.imag}
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, Fraction):
        return str(v)
    raise TypeError(f"cannot serialize {type(v)}")


def _config(args) -> dict:
    skip = {"func", "self_test", "out", "json"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _emit(args, report: dict, rows: list[dict]) -> None:
    if args.json:
        doc = {"schema_version": SCHEMA_VERSION, "command": args.command, "config": _config(args),
               "report": report, "rows": rows}
        text = json.dumps(doc, sort_keys=True, indent=1, default=_jsonable) + "\n"
    else:
        buf = io.StringIO()
        buf.write(f"# schema-version: {SCHEMA_VERSION}\n")
        buf.write(f"# command: {args.command}\n")
        if rows:
            cols = list(rows[0].keys())
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(cols)
            for r in rows:
                w.writerow([_cell(r[c]) for c in cols])
        text = buf.getvalue()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, complex):
        return f"{v.real!r}{v.imag:+}j"
    return v


# ---------------------------------------------------------------------------
# subcommands


def cmd_coeffs(args):
    if args.limit is None:
        raise UsageError("coeffs needs --limit")
    N = args.limit
    lam = coeffio.cached_eigenvalue_table(EigenformSpec.parse(args.form), max(N, 2)).truncated(N)
    if args.lift:
        tree = fspec.parse(args.lift)
        atom = tree.factors[0] if len(tree.factors) == 1 else None
        if atom is None or getattr(atom, "name", None) != "sym":
            raise UsageError("--lift takes sym:<r>")
        lam = forms.sym_power_table(forms.satake_angles(lam), atom.arg, N)
    if not args.out:
        raise UsageError("coeffs needs --out")
    coeffio.write_table(lam, args.out)
    report = {"limit": N, "label": lam.label, "kind": lam.kind, "path": args.out,
              "lambda_2": float(lam.values[2]) if N >= 2 else None}
    sys.stdout.write(json.dumps(report, sort_keys=True) + "\n")


def cmd_corr(args):
    xs = _xs(args)
    lam = _load_form(args, xs[-1] + abs(args.h))
    f = _function(args, args.f, xs[-1], lam)
    reps = correlation.corr_ladder(f, lam, args.h, xs, args.gamma)
    rows = [r.to_dict() for r in reps]
    _emit(args, rows[-1], rows)


def cmd_bksz(args):
    X = int(args.x)
    lam = _load_form(args, X + abs(args.h))
    f = _function(args, args.f, X, lam)
    ov = None
    if args.H is not None or args.K is not None:
        if args.H is None or args.K is None:
            raise UsageError("--H and --K go together")
        ov = (args.H, args.K)
    part = correlation.bksz_partition(X, args.c, args.delta, ov)
    part.verify()
    rep = correlation.bksz_decompose(f, lam, args.h, part)
    d = rep.to_dict()
    rows = d.pop("per_nu")
    d["nus"] = list(part.nus)
    _emit(args, d, rows)


def cmd_shifted_conv(args):
    X = float(args.x)
    need = max(args.m1, args.m2) * math.ceil(X * correlation.TRUNCATION_FACTOR) + abs(args.h)
    if args.limit is None and args.coeff_file is None:
        need = min(need, ETA_MAX_N)
    lam = _load_form(args, need)
    res = correlation.smoothed_shifted_convolution(lam, args.m1, args.m2, args.h, X)
    report = {"m1": res.m1, "m2": res.m2, "h": res.h, "X": res.X, "D": res.D, "truncation": res.truncation,
              "tail_bound": res.tail_bound, "tail_estimate": res.tail_estimate, "reference": res.reference,
              "bound_ratio": res.bound_ratio, "tail_within_tolerance": res.tail_within_tolerance}
    _emit(args, report, [report])


def cmd_wilton(args):
    xs = _xs(args)
    lam = _load_form(args, xs[-1])
    alpha = _alpha(args.alpha)
    rows = []
    for X in xs:
        r = correlation.wilton_sum(lam, alpha, X)
        rows.append({"X": X, "alpha": str(args.alpha), "S_re": r.S.real, "S_im": r.S.imag,
                     "abs_S": abs(r.S), "ratio": r.ratio})
    _emit(args, rows[-1], rows)


def cmd_sieve_check(args):
    xs = _xs(args)
    need = xs[-1]
    if args.z is not None:
        need = max(need, math.ceil(args.z))
    lam = _load_form(args, need)
    rows = []
    for X in xs:
        r = sieve.sifted_rs_sum(lam, args.a, args.Y, args.Z, X)
        rows.append({"X": X, "a": args.a, "Y": args.Y, "Z": args.Z, "value": r.value,
                     "reference": r.reference, "ratio": r.ratio})
    report = {"sifted": rows[-1]}
    if args.w is not None and args.z is not None:
        d = sieve.sieve_density_product(lam, args.a, args.w, args.z)
        report["density_product"] = {"w": d.w, "z": d.z, "a": d.a, "value": d.value, "ratio": d.ratio,
                                     "primes": d.primes}
    _emit(args, report, rows)


def cmd_ap_rs(args):
    xs = _xs(args)
    need = args.d * xs[-1]
    if args.p is not None:
        need = max(need, min(math.ceil(xs[-1] * correlation.TRUNCATION_FACTOR), ETA_MAX_N))
    lam = _load_form(args, need)
    rows = []
    res = sieve.euler_residue(lam, min(10**5, lam.limit))
    for X in xs:
        r = sieve.ap_rs_sum(lam, args.d, args.a, args.q, X, residue=res)
        rows.append({"X": X, "d": r.d, "a": r.a, "q": r.q, "value": r.value, "main_term": r.main_term,
                     "relative_gap": r.relative_gap, "residue": r.residue})
    report = dict(rows[-1])
    if args.smooth_y is not None:
        sw = sieve.sandwich_check(lam, args.d, args.a, args.q, xs[-1] - args.smooth_y, args.smooth_y)
        report["sandwich"] = {"lower": sw.lower, "sharp": sw.sharp, "upper": sw.upper, "holds": sw.holds,
                              "mellin_lower": sw.mellin_lower, "mellin_upper": sw.mellin_upper}
    if args.p is not None:
        s = sieve.smoothed_ap_rs(lam, args.h, args.p, xs[-1])
        report["smoothed"] = {"p": s.p, "h": s.h, "X": s.X, "value": s.value, "truncation": s.truncation,
                              "tail_estimate": s.tail_estimate, "ratio_25_16": s.ratio_25_16,
                              "ratio_41_16": s.ratio_41_16, "ratio_x_over_p": s.ratio_x_over_p}
    _emit(args, report, rows)


def cmd_lseries_verify(args):
    N = args.n
    lam = _load_form(args, max(N, args.prime_cut, args.fit_max))
    rows = []
    for q in range(2, args.q_max + 1):
        for chi in lseries.primitive_characters(q):
            r = lseries.rs_twist_identity_check(lam, chi, N, strict=False)
            rows.append({"check": "twist", "q": q, "index": chi.index, "d": "", "N": N,
                         "max_deviation": r.max_deviation, "passed": r.passed})
    dq = [m for m in range(1, args.dq_max + 1) if sieve._squarefree(m)]
    for d in dq:
        for q in dq:
            if math.gcd(d, q) == 1:
                r = lseries.hd_gq_check(lam, d, q, min(N, 10**4), strict=False)
                rows.append({"check": "hd_gq", "q": q, "index": "", "d": d, "N": min(N, 10**4),
                             "max_deviation": r.max_deviation, "passed": r.passed})
    fit = parse_ladder(f"{args.fit_max // 10}:{args.fit_max}:{10 ** 0.25}")
    est = lseries.residue_estimate(lam, args.prime_cut, fit)
    report = {"checks": len(rows), "failed": sum(not r["passed"] for r in rows),
              "residue_euler": est.euler_value, "residue_empirical": est.empirical_value,
              "residue_relative_gap": est.relative_gap, "tail_drift": est.tail_drift}
    _emit(args, report, rows)
    if report["failed"]:
        raise InvariantViolation(f"{report['failed']} identity checks failed")


def cmd_delta_r(args):
    if not 1 <= args.r_max <= 100:
        raise UsageError("--r-max must lie in 1..100")
    rows = []
    for r in range(1, args.r_max + 1):
        d = predict.delta_r(r)
        rows.append({"r": r, "closed": d.closed, "quadrature": d.quadrature, "difference": d.difference})
    _emit(args, {"r_max": args.r_max, "limit": predict.DELTA_LIMIT}, rows)


def _pi_phi(args, N):
    lam = _load_form(args, N)
    return _function(args, args.pi, N, lam), _function(args, args.phi, N, lam), lam


def cmd_singular_series(args):
    pi, phi, _ = _pi_phi(args, args.prime_cut)
    ss = predict.singular_series(pi, phi, args.prime_cut)
    rows = [{"prime_cut": c, "value": v, "tail_bound": ss.tail_bounds[c]} for c, v in sorted(ss.checkpoints.items())]
    report = {"value": ss.value, "tail_bound": ss.tail_bound, "cauchy_ok": ss.cauchy_ok(),
              "pi": pi.label, "phi": phi.label}
    _emit(args, report, rows)


def cmd_predict(args):
    xs = _xs(args)
    N = max(xs[-1] + 1, args.prime_cut)
    pi, phi, _ = _pi_phi(args, N)
    ss = predict.singular_series(pi, phi, args.prime_cut)
    rows = []
    for X in xs:
        pred = predict.predicted_correlation(pi, phi, ss, X)
        exact = predict.restricted_correlation(pi, phi, X)
        rows.append({"X": X, "predicted": pred, "exact": exact, "ratio": pred / exact if exact else float("inf")})
    _emit(args, {"singular_series": ss.value, **rows[-1]}, rows)


def cmd_wirsing_fit(args):
    xs = _xs(args)
    lam = _load_form(args, xs[-1]) if fspec.parse(args.f).needs_form else None
    f = _function(args, args.f, xs[-1], lam)
    fit = predict.wirsing_fit(f, xs)
    rows = [{"X": x, "sum": s, "model": fit.c * x / math.log(x) ** fit.delta} for x, s in zip(fit.xs, fit.sums)]
    _emit(args, {"delta_hat": fit.delta, "c": fit.c, "residual": fit.residual, "f": f.label}, rows)


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--limit", type=_count, help="coefficient table length")
    p.add_argument("--x", type=_positive, help="summation length X")
    p.add_argument("--x-ladder", help="geometric ladder lo:hi:factor")
    p.add_argument("--h", type=int, default=1, help="shift h (nonzero)")
    p.add_argument("--threads", type=int, default=1, help="accepted for compatibility; runs single-threaded")
    p.add_argument("--seed", type=int, default=0, help="reserved")
    p.add_argument("--out", help="write output to this file instead of stdout")
    p.add_argument("--json", action="store_true", help="emit one JSON document instead of CSV")
    p.add_argument("--self-test", action="store_true", help="run the built-in checks for this command")
    p.add_argument("--form", default="delta", help="delta, k16, k18, k20, k22 or k26")
    p.add_argument("--coeff-file", help="read coefficients from a text or SCL1 file")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="shiftcorr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, **kw):
        p = sub.add_parser(name, **kw)
        _common(p)
        p.set_defaults(func=func)
        return p

    p = add("coeffs", cmd_coeffs, help="write a normalized coefficient file")
    p.add_argument("--lift", help="sym:<r> to write a symmetric power lift instead")

    p = add("corr", cmd_corr, help="correlation sum of f against the form")
    p.add_argument("--f", default="mu", help="function spec, e.g. mu, tau_m:3, mu*sym:3")
    p.add_argument("--gamma", type=float, default=1.0, help="log log exponent in the envelope")

    p = add("bksz", cmd_bksz, help="bilinear decomposition of the correlation sum")
    p.add_argument("--f", default="mu", help="function spec, e.g. mu, tau_m:3, mu*sym:3")
    p.add_argument("--c", type=float, default=0.0, help="partition parameter c")
    p.add_argument("--delta", type=float, default=0.04, help="partition parameter delta")
    p.add_argument("--H", type=float, help="override the lower interval index")
    p.add_argument("--K", type=float, help="override the upper interval index")

    p = add("shifted-conv", cmd_shifted_conv, help="smoothed shifted convolution sum")
    p.add_argument("--m1", type=int, default=1, help="first dilation (coprime to m2)")
    p.add_argument("--m2", type=int, default=1, help="second dilation")

    p = add("wilton", cmd_wilton, help="additively twisted coefficient sum")
    p.add_argument("--alpha", default="1/2", help="rational a/b or a float")

    p = add("sieve-check", cmd_sieve_check, help="sifted second moment and sieve density product")
    p.add_argument("--a", type=int, default=1, help="shift a of the sifted sequence n - a")
    p.add_argument("--Y", type=_positive, default=100.0, help="smallest sifting prime")
    p.add_argument("--Z", type=_positive, default=1e4, help="largest sifting prime")
    p.add_argument("--w", type=_positive, help="lower prime bound of the density product")
    p.add_argument("--z", type=_positive, help="upper prime bound of the density product")

    p = add("ap-rs", cmd_ap_rs, help="second moment in an arithmetic progression")
    p.add_argument("--d", type=int, default=1, help="square-free dilation d")
    p.add_argument("--a", type=int, default=1, help="residue a")
    p.add_argument("--q", type=int, default=1, help="modulus q")
    p.add_argument("--p", type=int, help="also report the smoothed sum over n = h mod p")
    p.add_argument("--smooth-y", type=_positive, help="also run the smooth-weight sandwich with this Y")

    p = add("lseries-verify", cmd_lseries_verify, help="Dirichlet series identities and residue")
    p.add_argument("--n", type=_count, default=10**4, help="number of Dirichlet coefficients compared")
    p.add_argument("--q-max", type=int, default=20, help="largest character modulus")
    p.add_argument("--dq-max", type=int, default=30, help="largest d and q in the factorization check")
    p.add_argument("--prime-cut", type=_count, default=10**5, help="Euler product prime cutoff")
    p.add_argument("--fit-max", type=_count, default=10**6, help="largest X in the slope fit")

    p = add("delta-r", cmd_delta_r, help="Sato-Tate mean-value exponents")
    p.add_argument("--r-max", type=int, default=20, help="largest r (at most 100)")

    p = add("singular-series", cmd_singular_series, help="singular series of the probabilistic model")
    p.add_argument("--pi", default="sym:3", help="spec of the first factor")
    p.add_argument("--phi", default="lambda", help="spec of the shifted factor")
    p.add_argument("--prime-cut", type=_count, default=10**5, help="primes up to this bound enter the product")

    p = add("predict", cmd_predict, help="model prediction vs the restricted correlation sum")
    p.add_argument("--pi", default="sym:3", help="spec of the first factor")
    p.add_argument("--phi", default="lambda", help="spec of the shifted factor")
    p.add_argument("--prime-cut", type=_count, default=10**5, help="primes up to this bound enter the product")

    p = add("wirsing-fit", cmd_wirsing_fit, help="fit of the mean-value exponent")
    p.add_argument("--f", default="abs:mu*lambda", help="function spec of the non-negative summand")
    return parser


def _self_test(command: str) -> int:
    failed = 0
    for name, ok, detail in selftest.run(command):
        failed += not ok
        sys.stdout.write(f"{'PASS' if ok else 'FAIL'} {command}: {name}{' ' + detail if detail else ''}\n")
    if failed:
        raise InvariantViolation(f"{failed} self-test checks failed")
    return 0


def _validate(args) -> None:
    if args.threads < 1:
        raise UsageError("--threads must be >= 1")
    if args.limit is not None and args.limit < 1:
        raise UsageError("--limit must be >= 1")
    if args.x is not None and args.x_ladder:
        raise UsageError("--x and --x-ladder are exclusive")


def run(argv: list[str] | None = None) -> int:
    """Run one subcommand; returns the exit code."""
    try:
        args = build_parser().parse_args(argv)
        _validate(args)
        if args.self_test:
            return _self_test(args.command)
        args.func(args)
        return 0
    except (ShiftcorrError, ArithmeticError, MemoryError, ValueError, OSError) as exc:
        kind = exc.kind if isinstance(exc, ShiftcorrError) else _KIND_BY_CODE[exit_code(exc)]
        reason = " ".join(str(exc).split()) or type(exc).__name__
        sys.stderr.write(f"error: kind={kind} reason={reason}\n")
        return exit_code(exc)


_KIND_BY_CODE = {1: "usage", 2: "invariant", 3: "capacity"}


def exit_code(exc: BaseException) -> int:
    """1 for usage errors, 2 for invariant violations, 3 for capacity errors."""
    if isinstance(exc, InvariantViolation):
        return 2
    if isinstance(exc, MemoryError):
        return 3
    if isinstance(exc, (ValueError, OSError, ZeroDivisionError)):
        return 1
    return 2


def main() -> None:
    sys.exit(run())
