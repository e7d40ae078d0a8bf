import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import factor, mobius, tau_m
from shiftcorr import multfun as M
from shiftcorr.errors import TableTooShort, UsageError
from shiftcorr.primes import build_spf


@pytest.fixture(scope="module")
def spf():
    return build_spf(100_000)


def test_mobius_rule_examples():
    t = M.materialize(M.moebius_rule(), 10)
    assert [t[n].real for n in (1, 2, 3, 4, 6)] == [1, -1, -1, 0, 1]


def test_tau_rules_examples():
    assert M.materialize(M.tau_m_rule(3), 10)[4].real == 6
    assert M.tau_z_rule(0.5)(2, 2) == pytest.approx(0.375, abs=1e-15)
    one = M.materialize(M.standard_rule("tau_m", 1), 1000)
    assert np.all(one.values[1:] == 1)
    t2 = M.tau_z_rule(2)
    assert [t2(3, e).real for e in range(6)] == [e + 1 for e in range(6)]


def test_eigenvalue_power_rule(delta_small):
    rule = M.standard_rule("eigenvalue_power", 2, delta_small)
    assert rule(2, 1).real == pytest.approx(delta_small.values[2] ** 2, rel=1e-15)
    assert rule(2, 1).real == pytest.approx(0.28125, abs=1e-12)
    short = delta_small.truncated(100)
    with pytest.raises(TableTooShort):
        M.materialize(M.eigenvalue_power_rule(1, short), 200)


def test_rule_identity_at_zero_exponent():
    for rule in (M.moebius_rule(), M.tau_m_rule(4), M.tau_z_rule(0.3 + 2j)):
        assert rule(7, 0) == 1


def test_materialize_matches_brute_force(spf):
    mu = M.materialize(M.moebius_rule(), 2000, spf)
    t4 = M.materialize(M.tau_m_rule(4), 2000, spf)
    for n in range(1, 2001):
        assert mu[n].real == mobius(n)
        assert t4[n].real == tau_m(n, 4)


def test_tau_z_complex_against_binomial_product(spf):
    z = 0.5 + 1.5j
    t = M.materialize(M.tau_z_rule(z), 3000, spf)
    for n in (12, 360, 2048, 2999):
        want = 1
        for p, e in factor(n).items():
            want *= math.prod(z + j for j in range(e)) / math.factorial(e)
        assert abs(t[n] - want) <= 1e-12 * max(1, abs(want))


@pytest.mark.parametrize("m", [1, 2, 3, 5])
def test_tau_z_at_integer_is_tau_m(spf, m):
    a = M.materialize(M.tau_z_rule(m), 50_000, spf)
    b = M.materialize(M.tau_m_rule(m), 50_000, spf)
    assert np.array_equal(a.values, b.values)


_tables = {}


def _lam_table():
    if "lam" not in _tables:
        from shiftcorr import forms

        lam = forms.eigenvalue_table("delta", 100_000)
        _tables["lam"] = M.table_function(lam)
        _tables["t"] = M.materialize(M.tau_z_rule(0.5 - 0.25j), 100_000)
    return _tables["lam"], _tables["t"]


@given(st.integers(1, 316), st.integers(1, 316))
def test_multiplicativity_on_coprime_pairs(m, n):
    if math.gcd(m, n) != 1:
        return
    for t in _lam_table():
        assert abs(t[m * n] - t[m] * t[n]) <= 1e-10 * max(1.0, abs(t[m * n]))


def test_multiplicativity_spot_check_10k_pairs():
    rng = np.random.default_rng(7)
    lam, tz = _lam_table()
    checked = 0
    while checked < 10_000:
        m, n = (int(v) for v in rng.integers(1, 1000, size=2))
        if math.gcd(m, n) != 1 or m * n > 100_000:
            continue
        for t in (lam, tz):
            assert abs(t[m * n] - t[m] * t[n]) <= 1e-10 * max(1.0, abs(t[m * n]))
        checked += 1


def test_pointwise_combine(delta_small):
    N = 1000
    mu = M.materialize(M.moebius_rule(), N)
    mu2 = M.pointwise_combine(mu, mu)
    sq = M.materialize(M.tau_m_rule(1), N).values * (mu.values != 0)
    assert np.array_equal(mu2.values, sq)
    lam = M.table_function(delta_small.truncated(N))
    f = M.pointwise_combine(mu, lam)
    absf = M.pointwise_combine(f, op="abs")
    v = delta_small.values
    assert absf[6].real == pytest.approx(abs(v[2]) * abs(v[3]), rel=1e-15)
    assert f[4] == 0
    assert f.label == "mu*delta" and absf.label == "abs:mu*delta"
    with pytest.raises(UsageError):
        M.pointwise_combine(mu, M.materialize(M.moebius_rule(), 10))


def test_overflow_flag():
    big = M.PrimePowerRule(lambda p, e: 1e200, "huge")
    assert M.materialize(big, 30).overflow
    assert not M.materialize(M.tau_m_rule(2), 30).overflow


def test_squarefree_density_at_1e7():
    mu = M.materialize(M.moebius_rule(), 10**7)
    dens = float(np.count_nonzero(mu.values[1:])) / 10**7
    assert abs(dens - 6 / math.pi**2) <= 0.005


def test_hypothesis_i_examples(delta_small):
    xs = [10**2, 10**3, 10**4, 10**5]
    lam = M.table_function(delta_small)
    assert M.hypothesis_i_check(lam, 0, xs).passed
    one = M.materialize(M.tau_m_rule(1), 10**5)
    rep = M.hypothesis_i_check(one, 0, xs)
    assert rep.passed and rep.ratios == [1.0] * 4
    for m in (2, 3):
        t = M.materialize(M.tau_m_rule(m), 10**5)
        assert M.hypothesis_i_check(t, m * m - 1, xs).passed


def test_hypothesis_ii_unit_function_against_sieve():
    X = 5000
    one = M.materialize(M.tau_m_rule(1), X)
    rep = M.hypothesis_ii_check(one, 2, X, 1.0, [X])
    assert rep.sums == [1.0]
    rep = M.hypothesis_ii_check(one, 30, 70, 1.0, [X])
    survivors = sum(1 for n in range(1, X + 1) if not any(n % p == 0 for p in range(30, 71) if _isp(p)))
    assert rep.sums == [float(survivors)]


def _isp(p):
    return p > 1 and all(p % d for d in range(2, int(p**0.5) + 1))


def test_hypothesis_ii_rejects_inverted_window():
    mu = M.materialize(M.moebius_rule(), 100)
    with pytest.raises(UsageError):
        M.hypothesis_ii_check(mu, 50, 10, 1.0, [100])


def test_hypothesis_ii_delta_specialization(delta_big):
    lam = M.table_function(delta_big.truncated(10**7))
    Y = lambda X: math.log(X) ** 32  # noqa: E731
    Z = lambda X: X ** (1 / 30)  # noqa: E731
    rep = M.hypothesis_ii_check(lam, Y, Z, 1.0, [10**5, 10**6, 10**7])
    assert rep.passed
    assert max(rep.ratios) <= 2 * min(rep.ratios)
    assert rep.degenerate == [10**5, 10**6, 10**7]


@given(st.integers(2, 40), st.integers(41, 3000), st.integers(41, 3000))
def test_hypothesis_ii_monotone_in_z(Y, Z1, Z2):
    lam, _ = _lam_table()
    Z1, Z2 = sorted((Z1, Z2))
    spf = _spf()
    a = M.hypothesis_ii_check(lam, Y, Z1, 1.0, [5000], spf).sums[0]
    b = M.hypothesis_ii_check(lam, Y, Z2, 1.0, [5000], spf).sums[0]
    assert b <= a


def _spf():
    if "spf" not in _tables:
        _tables["spf"] = build_spf(5000)
    return _tables["spf"]


def test_windows_agree_in_leading_order():
    y1, z1 = M.sifting_window(0.0, 0.04)
    y2, z2 = M.bksz_window(0.0, 0.04)
    X = 1e30
    assert z1(X) == z2(X)
    assert y2(X) / y1(X) == pytest.approx(1.0, rel=1e-6)
