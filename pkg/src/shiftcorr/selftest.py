"""Reduced-scale invariant checks behind each subcommand's ``--self-test`` flag.

Every check compares a library result with an independent route (a
brute-force loop, a second construction or a closed form) and finishes
in a few seconds.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from . import correlation, forms, lseries, multfun, predict, qexpansion, sieve
from .errors import ShiftcorrError
from .primes import build_spf, mobius_table


def _check(name: str, ok: bool, detail: str = "") -> tuple[str, bool, str]:
    return name, bool(ok), detail


def _delta(N: int):
    return forms.eigenvalue_table("delta", N)


def _brute_mu(n: int) -> int:
    out, m, p = 1, n, 2
    while p * p <= m:
        if m % p == 0:
            m //= p
            if m % p == 0:
                return 0
            out = -out
        p += 1
    return -out if m > 1 else out


def coeffs_checks():
    spec = qexpansion.EigenformSpec.parse("delta")
    exp = qexpansion.integer_q_expansion(spec, 2000, method="eisenstein")
    pent = qexpansion.delta_pentagonal(2000)
    lam = forms.normalize(exp)
    return [
        _check("hecke relations mn <= 500", not qexpansion.hecke_relation_defects(exp, 500)),
        _check("eisenstein equals pentagonal", [exp[n] for n in range(1, 2001)] == pent[1:2001]),
        _check("deligne envelope", forms.deligne_violations(lam).size == 0),
        _check("tau(2) = -24", exp[2] == -24),
    ]


def corr_checks():
    lam = _delta(400)
    mu = multfun.materialize(multfun.moebius_rule(), 300)
    out = []
    for h in (1, -1, 7):
        rep = correlation.corr_sum(mu, lam, h, 300)
        brute = math.fsum(_brute_mu(n) * lam.values[n + h] for n in range(max(1, 1 - h), 301))
        out.append(_check(f"corr_sum h={h} vs loop", abs(rep.S.real - brute) <= 1e-10 * max(1, abs(brute))))
        out.append(_check(f"trivial bound h={h}", abs(rep.S) <= rep.trivial_bound + 1e-9))
    return out


def bksz_checks():
    X = 3000
    lam = _delta(X + 2)
    mu = multfun.materialize(multfun.moebius_rule(), X)
    out = []
    for ov in ((3, 9), (4, 16)):
        part = correlation.bksz_partition(X, overrides=ov)
        try:
            part.verify()
            laws = True
        except ShiftcorrError:
            laws = False
        rep = correlation.bksz_decompose(mu, lam, 1, part, diagnostics=False)
        out.append(_check(f"set laws {ov}", laws))
        out.append(_check(f"S_I + S_J = S {ov}", rep.relative_gap <= 1e-9, f"gap={rep.relative_gap:.3g}"))
    return out


def shifted_conv_checks():
    lam = _delta(20000)
    res = correlation.smoothed_shifted_convolution(lam, 2, 3, 1, 30.0)
    nt = res.truncation
    brute = math.fsum(lam.values[2 * n + 1] * lam.values[3 * n + 1] * math.exp(-n / 30.0) for n in range(1, nt + 1))
    return [_check("shifted convolution vs loop", abs(res.D - brute) <= 1e-10 * max(1, abs(brute))),
            _check("tail estimate within tolerance", res.tail_within_tolerance)]


def wilton_checks():
    lam = _delta(500)
    a = correlation.wilton_sum(lam, Fraction(1, 3), 500)
    b = correlation.wilton_sum(lam, 1 / 3, 500)
    brute = sum(lam.values[n] * np.exp(2j * np.pi * n / 3) for n in range(1, 501))
    return [_check("exact vs float alpha", abs(a.S - b.S) <= 1e-9),
            _check("wilton vs loop", abs(a.S - brute) <= 1e-9)]


def sieve_checks():
    lam = _delta(2000)
    res = sieve.sifted_rs_sum(lam, 1, 3, 11, 1000)
    ps = [3, 5, 7, 11]
    brute = math.fsum(lam.values[n] ** 2 for n in range(1, 1001)
                      if n != 1 and all(abs(n - 1) % p for p in ps))
    dens = sieve.sieve_density_product(lam, 1, 10, 1000)
    sw = sieve.sandwich_check(lam, 1, 1, 3, 900, 40)
    return [_check("sifted sum vs loop", abs(res.value - brute) <= 1e-10 * brute),
            _check("density product finite and > 1", dens.value > 1),
            _check("sandwich", sw.holds),
            _check("mellin at 1", abs(sw.mellin_lower - 860) < 1e-6 and abs(sw.mellin_upper - 920) < 1e-6)]


def ap_rs_checks():
    lam = _delta(2000)
    exact = sieve.ap_sum_exact(lam, 2, 1, 3, 900)
    brute = math.fsum(lam.values[2 * n] ** 2 for n in range(1, 901) if n % 3 == 1)
    rep = lseries.hd_gq_check(lam, 6, 5, 300)
    return [_check("progression sum vs loop", abs(exact - brute) <= 1e-10 * brute),
            _check("H_d G_q factorization", rep.passed, f"dev={rep.max_deviation:.3g}")]


def lseries_checks():
    lam = _delta(3000)
    out = []
    for q in (3, 4, 5, 7):
        for chi in lseries.primitive_characters(q):
            rep = lseries.rs_twist_identity_check(lam, chi, 2000, strict=False)
            out.append(_check(f"twist identity q={q} index={chi.index}", rep.passed, f"dev={rep.max_deviation:.3g}"))
    zeta = lseries.TruncatedDirichletSeries.zeta(500)
    mu = lseries.ds_invert(zeta)
    out.append(_check("1/zeta is mobius", np.allclose(mu.coeffs[1:].real, mobius_table(build_spf(500))[1:])))
    return out


def delta_r_checks():
    vals = [predict.delta_r(r) for r in range(1, 51)]
    closed = [v.closed for v in vals]
    return [_check("closed vs quadrature", max(v.difference for v in vals) <= 1e-10),
            _check("strictly increasing", all(a < b for a, b in zip(closed, closed[1:]))),
            _check("delta_1", abs(closed[0] - (1 - 8 / (3 * math.pi))) <= 1e-12),
            _check("bounds", 0.15 < closed[0] and closed[-1] < 0.19)]


def singular_series_checks():
    one = multfun.materialize(multfun.tau_m_rule(1), 1000)
    ss = predict.singular_series(one, one, 1000)
    ex, _, exy = predict.local_expectations(2, 0, 0)
    lam = _delta(10**4)
    s3 = forms.sym_power_table(forms.satake_angles(lam), 3, 10**4)
    ss3 = predict.singular_series(s3, lam, 10**4)
    return [_check("unit tables give 1", ss.value == 1.0),
            _check("toy factor", abs(exy / ex**2 - 0.5 / 0.5625) < 1e-15),
            _check("checkpoints Cauchy", ss3.cauchy_ok())]


def predict_checks():
    lam = _delta(1000)
    ss = predict.singular_series(lam, lam, 1000)
    p1 = predict.predicted_correlation(lam, lam, ss, 1)
    return [_check("X = 1 gives the singular series", abs(p1 - ss.value) <= 1e-15),
            _check("restricted sum positive", predict.restricted_correlation(lam, lam, 999) > 0)]


def wirsing_checks():
    xs = [10**3, 10**4, 10**5, 10**6]
    planted = [3.0 * x / math.log(x) ** 0.37 for x in xs]
    fit = predict.wirsing_fit_sums(xs, planted)
    mu = multfun.materialize(multfun.moebius_rule(), 10**5)
    sq = predict.wirsing_fit(multfun.pointwise_combine(mu, op="abs"), [100, 1000, 10**4, 10**5])
    return [_check("planted exponent", abs(fit.delta - 0.37) <= 1e-3, f"delta={fit.delta:.6f}"),
            _check("square-free exponent near 0", abs(sq.delta) <= 0.05, f"delta={sq.delta:.4f}")]


SUITES = {
    "coeffs": coeffs_checks,
    "corr": corr_checks,
    "bksz": bksz_checks,
    "shifted-conv": shifted_conv_checks,
    "wilton": wilton_checks,
    "sieve-check": sieve_checks,
    "ap-rs": ap_rs_checks,
    "lseries-verify": lseries_checks,
    "delta-r": delta_r_checks,
    "singular-series": singular_series_checks,
    "predict": predict_checks,
    "wirsing-fit": wirsing_checks,
}


def run(command: str) -> list[tuple[str, bool, str]]:
    return SUITES[command]()
