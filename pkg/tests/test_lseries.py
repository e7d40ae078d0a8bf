import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import divisors, euler_phi, mobius
from shiftcorr import lseries as L
from shiftcorr.errors import IdentityViolation, UsageError

TDS = L.TruncatedDirichletSeries


@pytest.fixture(scope="module")
def lam(delta_small):
    return delta_small


def _lam_series(lam, N):
    return TDS.from_values(lam.values[: N + 1], "lambda")


# --- series algebra ---------------------------------------------------------


def test_zeta_times_mobius_is_identity():
    N = 500
    mu = TDS.from_values([0] + [mobius(n) for n in range(1, N + 1)])
    prod = L.ds_multiply(TDS.zeta(N), mu)
    assert L.max_deviation(prod, TDS.identity(N)) == 0.0


def test_identity_is_neutral(lam):
    b = _lam_series(lam, 1000)
    assert L.max_deviation(L.ds_multiply(TDS.identity(1000), b), b) == 0.0


def test_square_coefficient_at_six(lam):
    a = _lam_series(lam, 100)
    sq = L.ds_multiply(a, a)
    want = sum(lam.values[d] * lam.values[6 // d] for d in divisors(6))
    assert sq[6].real == pytest.approx(want, abs=1e-14)


def test_multiply_against_direct_convolution():
    rng = np.random.default_rng(3)
    N = 300
    a = TDS.from_values(rng.normal(size=N + 1) + 1j * rng.normal(size=N + 1))
    b = TDS.from_values(rng.normal(size=N + 1))
    c = L.ds_multiply(a, b)
    for n in (1, 12, 97, 240, 300):
        want = sum(a[d] * b[n // d] for d in divisors(n))
        assert abs(c[n] - want) < 1e-12


def test_algebra_laws_at_ten_thousand(lam):
    N = 10**4
    rng = np.random.default_rng(11)
    a = _lam_series(lam, N)
    b = TDS.from_values(np.r_[0, 1, rng.normal(size=N - 1) / np.arange(2, N + 1)])
    c = TDS.from_values(np.r_[0, 2, rng.normal(size=N - 1) / np.arange(2, N + 1)])
    assert L.max_deviation(L.ds_multiply(a, b), L.ds_multiply(b, a)) <= 1e-11
    ab_c = L.ds_multiply(L.ds_multiply(a, b), c)
    a_bc = L.ds_multiply(a, L.ds_multiply(b, c))
    assert L.max_deviation(ab_c, a_bc) <= 1e-11
    inv = L.ds_invert(a)
    assert L.max_deviation(L.ds_multiply(a, inv), TDS.identity(N)) <= 1e-11
    assert L.max_deviation(L.ds_multiply(inv, a), TDS.identity(N)) <= 1e-11


def test_limits_must_match():
    with pytest.raises(UsageError):
        L.ds_multiply(TDS.zeta(10), TDS.zeta(11))
    with pytest.raises(UsageError):
        TDS(5, np.zeros(5, dtype=complex))


@settings(max_examples=30)
@given(st.lists(st.floats(-3, 3), min_size=40, max_size=40), st.floats(0.5, 2))
def test_invert_round_trip_property(vals, lead):
    a = TDS.from_values([0.0, lead] + vals)
    inv = L.ds_invert(a)
    assert L.max_deviation(L.ds_multiply(a, inv), TDS.identity(a.limit)) <= 1e-9 * max(1.0, np.abs(inv.coeffs).max())


def test_invert_examples():
    assert L.max_deviation(L.ds_invert(TDS.identity(50)), TDS.identity(50)) == 0.0
    mu = L.ds_invert(TDS.zeta(2000))
    assert [mu[n].real for n in range(1, 2001)] == [mobius(n) for n in range(1, 2001)]


def test_invert_needs_unit_leading_coefficient():
    a = TDS.zeta(10)
    a.coeffs[1] = 0
    with pytest.raises(ZeroDivisionError):
        L.ds_invert(a)


def test_dilate_examples():
    assert L.max_deviation(L.ds_dilate(TDS.identity(40), 2), TDS.identity(40)) == 0.0
    z2 = L.ds_dilate(TDS.zeta(40), 2)
    assert z2[4] == 1 and z2[2] == 0
    assert [n for n in range(1, 41) if z2[n] != 0] == [1, 4, 9, 16, 25, 36]
    with pytest.raises(UsageError):
        L.ds_dilate(TDS.zeta(5), 0)


def test_dilate_character_on_squares():
    chi = [c for c in L.character_table(5) if not c.is_trivial][0]
    d = L.ds_dilate(chi.series(400), 2)
    for n in range(1, 401):
        r = math.isqrt(n)
        want = chi(r) if r * r == n else 0
        assert d[n] == want


# --- characters -------------------------------------------------------------


def test_character_examples():
    (one,) = L.character_table(1)
    assert one(7) == 1 and one.is_trivial
    c4 = L.character_table(4)
    assert len(c4) == 2
    (nontriv,) = [c for c in c4 if not c.is_trivial]
    assert nontriv(3) == -1 and nontriv(1) == 1 and nontriv(2) == 0


def test_mod5_orthogonality_matrix():
    chars = L.character_table(5)
    assert len(chars) == 4
    fourth = {1, -1, 1j, -1j}
    for c in chars:
        assert all(any(abs(c(n) - w) < 1e-12 for w in fourth) for n in range(1, 5))
    V = np.array([c.values for c in chars])
    assert np.abs(V @ V.conj().T - 4 * np.eye(4)).max() < 1e-12


@pytest.mark.parametrize("q", [1, 2, 3, 4, 8, 9, 12, 16, 20, 27, 32, 45, 60, 64, 97, 100])
def test_character_table_invariants(q):
    chars = L.character_table(q)
    assert len(chars) == euler_phi(q)
    assert len({c.values.tobytes() for c in chars}) == len(chars)
    units = [n for n in range(1, q + 1) if math.gcd(n, q) == 1]
    for c in chars:
        for m in range(1, 2 * q):
            for n in (2, 3, q - 1):
                assert abs(c(m * n) - c(m) * c(n)) < 1e-12
        assert all(abs(abs(c(n)) - 1) < 1e-12 for n in units)
        assert all(c(n) == 0 for n in range(q) if math.gcd(n, q) > 1)
        assert c.conductor == L.conductor_by_search(c)
        assert c.parity in (1, -1)
    n_primitive = sum(c.primitive for c in chars)
    # number of primitive characters mod q is the Dirichlet convolution of mu and phi
    assert n_primitive == sum(mobius(q // d) * euler_phi(d) for d in divisors(q))


def test_character_range():
    with pytest.raises(UsageError):
        L.character_table(0)
    with pytest.raises(UsageError):
        L.character_table(10**4 + 1)


# --- Euler products ---------------------------------------------------------


def test_trivial_local_factors_give_identity():
    s = L.ds_from_local_factors(lambda p: L.LocalFactor(p, (1.0,)), 200)
    assert L.max_deviation(s, TDS.identity(200)) == 0.0


def test_local_factor_expansion_geometric():
    f = L.LocalFactor(3, (1.0, -0.5))
    assert np.allclose(f.expand(5).real, [0.5**e for e in range(6)])
    assert f.at(0.25) == pytest.approx(1 / (1 - 0.125))
    with pytest.raises(UsageError):
        L.LocalFactor(2, (2.0, 1.0))


def test_hecke_factors_reproduce_table(lam):
    s = L.ds_from_local_factors(L.hecke_factor(lam), 1000)
    assert np.abs(s.coeffs[1:].real - lam.values[1:1001]).max() <= 1e-10
    assert np.abs(s.coeffs.imag).max() == 0


def test_character_factors_reproduce_character():
    for chi in L.character_table(12):
        s = L.ds_from_local_factors(L.character_factor(chi), 300)
        assert L.max_deviation(s, chi.series(300)) <= 1e-12


def test_rankin_factor_on_squarefree(lam):
    s = L.ds_from_local_factors(L.rankin_twist_factor(lam), 100)
    for n in range(1, 101):
        if mobius(n) != 0:
            assert s[n].real == pytest.approx(lam.values[n] ** 2, abs=1e-12)


# --- identity checks --------------------------------------------------------


def test_twist_identity_trivial_character(lam):
    (chi,) = L.character_table(1)
    rep = L.rs_twist_identity_check(lam, chi, 2000)
    assert rep.passed and rep.max_deviation <= 1e-8
    sym2 = L.ds_from_local_factors(L.sym2_twist_factor(lam), 50)
    for p in (2, 3, 5, 47):
        assert 1 + sym2[p].real == pytest.approx(lam.values[p] ** 2, abs=1e-14)


def test_twist_identity_mod5_at_ten_thousand(lam):
    for chi in L.primitive_characters(5):
        rep = L.rs_twist_identity_check(lam, chi, 10**4)
        assert rep.max_deviation <= 1e-8
        assert rep.extra["euler_vs_direct"] <= 1e-8
        # the chi-in-2s variant is a different series for non-principal chi
        assert rep.extra["chi_in_2s_deviation"] > 1e-3


def test_twist_identity_leading_coefficient(lam):
    chi = L.primitive_characters(7)[0]
    rep = L.rs_twist_identity_check(lam, chi, 1)
    assert rep.max_deviation == 0.0


@pytest.mark.parametrize("label", ["delta", "k16", "k18", "k20", "k22", "k26"])
def test_twist_identity_all_forms_small_moduli(label, six_forms_1e6):
    table = six_forms_1e6[label]
    worst = 0.0
    for q in range(3, 21):
        for chi in L.primitive_characters(q):
            worst = max(worst, L.rs_twist_identity_check(table, chi, 10**4).max_deviation)
    assert worst <= 1e-8


def test_twist_identity_rejects_large_n(lam):
    with pytest.raises(UsageError):
        L.rs_twist_identity_check(lam, L.character_table(1)[0], 10**5 + 1)


def test_twist_identity_violation_is_raised(lam):
    chi = L.primitive_characters(5)[0]
    rep = L.rs_twist_identity_check(lam, chi, 500, tol=0.0, strict=False)
    assert rep.max_deviation >= 0.0
    with pytest.raises(IdentityViolation):
        L.rs_twist_identity_check(lam, chi, 500, tol=-1.0)


def test_hd_gq_trivial_and_leading(lam):
    rep = L.hd_gq_check(lam, 1, 1, 1000)
    assert rep.max_deviation <= 1e-12
    rep2 = L.hd_gq_check(lam, 2, 1, 1)
    assert rep2.max_deviation <= 1e-15
    # leading coefficient of the left side is lambda(2)^2
    hd = L.hd_factor(lam, 2).expand(1)
    assert hd[0].real == pytest.approx(lam.values[2] ** 2, abs=1e-15)


def test_hd_gq_d2_q3(lam):
    assert L.hd_gq_check(lam, 2, 3, 1000).max_deviation <= 1e-8


def test_hd_gq_all_small_pairs(lam):
    sqfree = [d for d in range(1, 31) if mobius(d) != 0]
    for d in sqfree:
        for q in range(1, 31):
            if math.gcd(d, q) == 1:
                assert L.hd_gq_check(lam, d, q, 1000).max_deviation <= 1e-8, (d, q)


def test_hd_gq_preconditions(lam):
    with pytest.raises(UsageError):
        L.hd_gq_check(lam, 4, 1, 100)
    with pytest.raises(UsageError):
        L.hd_gq_check(lam, 2, 6, 100)
    with pytest.raises(UsageError):
        L.hd_gq_check(lam, 1, 1, 10**4 + 1)


def test_hd_gq_at_one_matches_expansion(lam):
    H, G = L.hd_gq_at_one(lam, 6, 5)
    Hw = math.prod((lam.values[p] ** 2 - lam.values[p * p] / p + 1 / p**2) / (1 + 1 / p) for p in (2, 3))
    l2 = lam.values[25]
    Gw = (1 - l2 / 5 + l2 / 25 - 1 / 125) / (1 + 1 / 5)
    assert H == pytest.approx(Hw, rel=1e-14)
    assert G == pytest.approx(Gw, rel=1e-14)
    assert L.hd_gq_at_one(lam, 1, 1) == (1.0, 1.0)


# --- residue ----------------------------------------------------------------


def test_residue_rejects_non_eigenform():
    from shiftcorr.multfun import materialize, tau_m_rule

    ones = materialize(tau_m_rule(1), 1000)
    with pytest.raises(UsageError):
        L.residue_estimate(ones, 100, [500, 1000])


def test_residue_rejects_broken_hecke_relation(lam):
    broken = lam.truncated(1000)
    vals = broken.values.copy()
    vals[4] += 0.1
    fake = type(broken)(**{**broken.__dict__, "values": vals})
    with pytest.raises(UsageError):
        L.residue_estimate(fake, 100, [500, 1000])


def test_residue_euler_vs_empirical(delta_big):
    xs = [k * 10**6 for k in range(1, 11)]
    est = L.residue_estimate(delta_big, 10**5, xs)
    assert est.empirical_value > 0
    assert est.relative_gap <= 0.05
    # slope stability: the slope over the first and last halves agree to 2%
    csum_x = np.cumsum(delta_big.values[: 10**7 + 1] ** 2)
    lo = np.polyfit(xs[:5], [csum_x[x] for x in xs[:5]], 1)[0]
    hi = np.polyfit(xs[5:], [csum_x[x] for x in xs[5:]], 1)[0]
    assert abs(lo - hi) / abs(est.empirical_value) <= 0.02
