"""Truncated Dirichlet series, Dirichlet characters and local Euler factors.

L-function identities are checked coefficient by coefficient: two Euler
products agree as formal series exactly when their truncated Dirichlet
series agree for every ``n <= N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np

from .errors import IdentityViolation, UsageError
from .primes import build_spf, fill_multiplicative, prime_powers

# ---------------------------------------------------------------------------
# series algebra


@dataclass(frozen=True)
class TruncatedDirichletSeries:
    """Coefficients ``c(1..limit)`` of ``sum c(n) n^(-s)``; ``coeffs[0]`` is unused."""

    limit: int
    coeffs: np.ndarray = field(repr=False)
    label: str = ""

    def __post_init__(self):
        if self.coeffs.shape != (self.limit + 1,):
            raise UsageError("coefficient array must have length limit + 1")

    def __getitem__(self, n):
        return self.coeffs[n]

    @classmethod
    def from_values(cls, values, label: str = "") -> "TruncatedDirichletSeries":
        """Series whose ``n``-th coefficient is ``values[n]`` (``values[0]`` ignored)."""
        c = np.array(values, dtype=np.complex128)
        c[0] = 0
        return cls(c.shape[0] - 1, c, label)

    @classmethod
    def identity(cls, N: int) -> "TruncatedDirichletSeries":
        c = np.zeros(N + 1, dtype=np.complex128)
        c[1] = 1
        return cls(N, c, "1")

    @classmethod
    def zeta(cls, N: int) -> "TruncatedDirichletSeries":
        c = np.ones(N + 1, dtype=np.complex128)
        c[0] = 0
        return cls(N, c, "zeta")


@numba.njit(cache=True)
def _convolve(a, b, out):
    N = out.shape[0] - 1
    for d in range(1, N + 1):
        ad = a[d]
        if ad == 0:
            continue
        for m in range(1, N // d + 1):
            out[d * m] += ad * b[m]


@numba.njit(cache=True)
def _invert(a, out):
    N = out.shape[0] - 1
    acc = np.zeros(N + 1, dtype=np.complex128)
    inv1 = 1.0 / a[1]
    for n in range(1, N + 1):
        target = 1.0 if n == 1 else 0.0
        bn = (target - acc[n]) * inv1
        out[n] = bn
        if bn == 0:
            continue
        for k in range(2, N // n + 1):
            acc[n * k] += a[k] * bn


def _same_limit(a, b):
    if a.limit != b.limit:
        raise UsageError(f"series limits differ: {a.limit} vs {b.limit}")


def ds_multiply(a: TruncatedDirichletSeries, b: TruncatedDirichletSeries) -> TruncatedDirichletSeries:
    """Dirichlet convolution ``c(n) = sum_{d | n} a(d) b(n/d)`` for ``n <= N``."""
    _same_limit(a, b)
    out = np.zeros(a.limit + 1, dtype=np.complex128)
    _convolve(a.coeffs, b.coeffs, out)
    return TruncatedDirichletSeries(a.limit, out, f"({a.label})({b.label})")


def ds_invert(a: TruncatedDirichletSeries) -> TruncatedDirichletSeries:
    """The series ``b`` with ``a * b = 1``; requires ``a(1) != 0``."""
    if a.coeffs[1] == 0:
        raise ZeroDivisionError("cannot invert a Dirichlet series with c(1) = 0")
    out = np.zeros(a.limit + 1, dtype=np.complex128)
    _invert(a.coeffs, out)
    return TruncatedDirichletSeries(a.limit, out, f"({a.label})^-1")


def ds_dilate(a: TruncatedDirichletSeries, k: int) -> TruncatedDirichletSeries:
    """``s -> k s``: the coefficient at ``n`` moves to ``n^k``."""
    if k < 1:
        raise UsageError("dilation needs k >= 1")
    out = np.zeros(a.limit + 1, dtype=np.complex128)
    n = 1
    while n**k <= a.limit:
        out[n**k] = a.coeffs[n]
        n += 1
    return TruncatedDirichletSeries(a.limit, out, f"{a.label}[s->{k}s]")


def max_deviation(a: TruncatedDirichletSeries, b: TruncatedDirichletSeries) -> float:
    _same_limit(a, b)
    return float(np.abs(a.coeffs[1:] - b.coeffs[1:]).max()) if a.limit else 0.0


# ---------------------------------------------------------------------------
# characters


@dataclass(frozen=True)
class DirichletCharacter:
    """A character mod ``modulus`` with ``values[n % modulus] = chi(n)``."""

    modulus: int
    values: np.ndarray = field(repr=False)
    conductor: int
    index: tuple = ()

    @property
    def primitive(self) -> bool:
        return self.conductor == self.modulus

    @property
    def parity(self) -> int:
        """``chi(-1)``: +1 for even characters, -1 for odd ones."""
        return int(round(self.values[(self.modulus - 1) % self.modulus].real))

    @property
    def is_trivial(self) -> bool:
        return self.conductor == 1

    def __call__(self, n: int) -> complex:
        return complex(self.values[n % self.modulus])

    def series(self, N: int) -> TruncatedDirichletSeries:
        c = np.zeros(N + 1, dtype=np.complex128)
        c[1:] = self.values[np.arange(1, N + 1) % self.modulus]
        return TruncatedDirichletSeries(N, c, f"chi{self.modulus}{list(self.index)}")


def _factor(q: int) -> list[tuple[int, int]]:
    out, p = [], 2
    while p * p <= q:
        if q % p == 0:
            e = 0
            while q % p == 0:
                q //= p
                e += 1
            out.append((p, e))
        p += 1
    if q > 1:
        out.append((q, 1))
    return out


def primitive_root(p: int) -> int:
    """Least primitive root modulo an odd prime ``p``."""
    phi = p - 1
    qs = [r for r, _ in _factor(phi)]
    for g in range(2, p):
        if all(pow(g, phi // r, p) != 1 for r in qs):
            return g
    return 1


def _vp(n: int, p: int) -> int:
    v = 0
    while n and n % p == 0:
        n //= p
        v += 1
    return v


def _prime_power_characters(p: int, e: int):
    """All characters mod ``p^e`` as ``(values, conductor, index)``."""
    q = p**e
    if p == 2:
        if e == 1:
            v = np.zeros(2, dtype=np.complex128)
            v[1] = 1
            return [(v, 1, (0,))]
        half = 1 << (e - 2)
        # n = (-1)^a 5^b mod 2^e for odd n
        sign = np.zeros(q, dtype=np.int64)
        dlog = np.zeros(q, dtype=np.int64)
        x = 1
        for b in range(half):
            dlog[x] = b
            dlog[(-x) % q] = b
            sign[(-x) % q] = 1
            x = x * 5 % q
        odd = np.arange(q) % 2 == 1
        out = []
        for a in range(2):
            for b in range(half):
                v = np.zeros(q, dtype=np.complex128)
                v[odd] = (-1.0) ** (a * sign[odd]) * np.exp(2j * np.pi * b * dlog[odd] / half)
                if b == 0:
                    cond = 4 if a else 1
                else:
                    cond = 1 << (e - _vp(b, 2))
                out.append((v, cond, (a, b)))
        return out
    g = primitive_root(p)
    if e > 1 and pow(g, p - 1, p * p) == 1:
        g += p
    phi = q - q // p
    dlog = np.zeros(q, dtype=np.int64)
    x = 1
    for j in range(phi):
        dlog[x] = j
        x = x * g % q
    unit = np.arange(q) % p != 0
    out = []
    for k in range(phi):
        v = np.zeros(q, dtype=np.complex128)
        v[unit] = np.exp(2j * np.pi * k * dlog[unit] / phi)
        cond = 1 if k == 0 else p ** (e - min(_vp(k, p), e - 1))
        out.append((v, cond, (k,)))
    return out


def _snap(v: np.ndarray) -> np.ndarray:
    # clean rounding noise so that real characters are exactly +-1
    re, im = np.round(v.real, 15), np.round(v.imag, 15)
    return re + 1j * im


def character_table(q: int, check: bool = True) -> list[DirichletCharacter]:
    """All ``phi(q)`` characters modulo ``q``.

    Built from primitive roots for odd prime powers and the ``(-1)^a 5^b``
    decomposition for powers of two.  When ``check`` is set (and the table
    is small) orthogonality is verified to ``1e-9``.
    """
    if not 1 <= q <= 10**4:
        raise UsageError("character_table needs 1 <= q <= 10^4")
    n = np.arange(q)
    if q == 1:
        chars = [(np.ones(1, dtype=np.complex128), 1, ())]
    else:
        chars = [(np.ones(q, dtype=np.complex128), 1, ())]
        for p, e in _factor(q):
            local = _prime_power_characters(p, e)
            pe = p**e
            chars = [
                (v * lv[n % pe], c * lc, idx + ((p,) + li,))
                for v, c, idx in chars
                for lv, lc, li in local
            ]
        coprime = np.gcd(n, q) == 1
        chars = [(np.where(coprime, v, 0), c, idx) for v, c, idx in chars]
    out = [DirichletCharacter(q, _snap(v), c, idx) for v, c, idx in chars]
    if check and len(out) ** 2 * q <= 5 * 10**7:
        V = np.array([c.values for c in out])
        G = V @ V.conj().T
        phi = len(out)
        if np.abs(G - phi * np.eye(phi)).max() > 1e-9:
            raise IdentityViolation(f"character orthogonality fails mod {q}")
    return out


def primitive_characters(q: int) -> list[DirichletCharacter]:
    return [c for c in character_table(q) if c.primitive]


def conductor_by_search(chi: DirichletCharacter) -> int:
    """Conductor by brute force (for cross-checking the closed form)."""
    q = chi.modulus
    units = [n for n in range(1, q + 1) if math.gcd(n, q) == 1]
    for d in range(1, q + 1):
        if q % d:
            continue
        if all(abs(chi(n) - 1) < 1e-9 for n in units if n % d == 1 % d):
            return d
    return q


# ---------------------------------------------------------------------------
# Euler products


@dataclass(frozen=True)
class LocalFactor:
    """``L_p(x) = numerator(x) / denominator(x)`` with ``x = p^(-s)``.

    Both are coefficient lists starting with the constant term; the
    denominator's constant term is 1.
    """

    p: int
    denominator: tuple
    numerator: tuple = (1.0,)

    def __post_init__(self):
        if abs(self.denominator[0] - 1) > 1e-15:
            raise UsageError("local factor denominator must have constant term 1")

    def expand(self, emax: int) -> np.ndarray:
        """Power-series coefficients up to ``x^emax``."""
        den = np.asarray(self.denominator, dtype=np.complex128)
        num = np.zeros(emax + 1, dtype=np.complex128)
        k = min(len(self.numerator), emax + 1)
        num[:k] = np.asarray(self.numerator, dtype=np.complex128)[:k]
        out = np.zeros(emax + 1, dtype=np.complex128)
        for e in range(emax + 1):
            s = num[e]
            for j in range(1, min(e, len(den) - 1) + 1):
                s -= den[j] * out[e - j]
            out[e] = s
        return out

    def at(self, x: complex) -> complex:
        num = sum(c * x**i for i, c in enumerate(self.numerator))
        den = sum(c * x**i for i, c in enumerate(self.denominator))
        return num / den


def ds_from_local_factors(factory: Callable[[int], LocalFactor], N: int, label: str = "") -> TruncatedDirichletSeries:
    """Expand ``prod_{p <= N} L_p`` into a Dirichlet series up to ``N``."""
    out = np.zeros(N + 1, dtype=np.complex128)
    spf = build_spf(max(N, 2))
    if N >= 2:
        ns, ps, es = prime_powers(spf, N)
        order = np.lexsort((es, ps))
        ns, ps, es = ns[order], ps[order], es[order]
        starts = np.flatnonzero(np.r_[True, ps[1:] != ps[:-1]])
        ends = np.r_[starts[1:], len(ps)]
        for s, t in zip(starts, ends):
            p = int(ps[s])
            coef = factory(p).expand(int(es[t - 1]))
            out[ns[s:t]] = coef[es[s:t]]
    fill_multiplicative(out, spf)
    out[0] = 0
    return TruncatedDirichletSeries(N, out, label)


def _lam(table, n):
    table.require(n)
    return float(table.values[n])


def hecke_factor(table) -> Callable[[int], LocalFactor]:
    """``(1 - lambda(p) x + x^2)^(-1)``."""
    return lambda p: LocalFactor(p, (1.0, -_lam(table, p), 1.0))


def _chi_at(chi, p):
    return 1.0 if chi is None else chi(p)


def sym2_twist_factor(table, chi: DirichletCharacter | None = None) -> Callable[[int], LocalFactor]:
    """``((1 - alpha^2 chi x)(1 - chi x)(1 - beta^2 chi x))^(-1)`` in Hecke eigenvalues.

    With ``alpha^2 + 1 + beta^2 = lambda(p^2)`` the denominator is
    ``1 - lambda(p^2) chi x + lambda(p^2) chi^2 x^2 - chi^3 x^3``.
    """

    def make(p):
        c = _chi_at(chi, p)
        l2 = _lam(table, p * p) if p * p <= table.limit else _lam(table, p) ** 2 - 1
        return LocalFactor(p, (1.0, -l2 * c, l2 * c * c, -(c**3)))

    return make


def rankin_twist_factor(table, chi: DirichletCharacter | None = None) -> Callable[[int], LocalFactor]:
    """``L_p(s, phi_chi x phi) = (1 + chi x) / (1 - lambda(p^2) chi x + lambda(p^2) chi^2 x^2 - chi^3 x^3)``."""
    sym2 = sym2_twist_factor(table, chi)

    def make(p):
        c = _chi_at(chi, p)
        return LocalFactor(p, sym2(p).denominator, (1.0, c))

    return make


def character_factor(chi: DirichletCharacter) -> Callable[[int], LocalFactor]:
    return lambda p: LocalFactor(p, (1.0, -chi(p)))


# ---------------------------------------------------------------------------
# identity checks


@dataclass
class IdentityReport:
    name: str
    N: int
    max_deviation: float
    tolerance: float
    params: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance


def _raise_if(report: IdentityReport, strict: bool) -> IdentityReport:
    if strict and not report.passed:
        raise IdentityViolation(
            f"{report.name}: deviation {report.max_deviation:.3e} > {report.tolerance:.0e} ({report.params})"
        )
    return report


def rs_twist_identity_check(table, chi: DirichletCharacter, N: int, tol: float = 1e-8,
                            strict: bool = True) -> IdentityReport:
    """Compare ``L(2s, chi^2)^(-1) L(s, chi) L(s, sym^2 phi x chi)`` with ``sum lambda(n)^2 chi(n) n^(-s)``.

    Locally ``L_p(s, chi) / L_p(2s, chi^2) = 1 + chi(p) p^(-s)``, the
    numerator of the twisted Rankin-Selberg factor.  Writing ``chi`` instead
    of ``chi^2`` in the first factor gives ``(1 - chi(p) x^2) / (1 - chi(p) x)``,
    which differs from it whenever ``chi`` is non-principal; that variant's
    deviation is reported as ``extra["chi_in_2s_deviation"]`` for comparison.
    ``extra["euler_vs_direct"]`` compares the Hecke-eigenvalue Euler product
    of the left side with the table.
    """
    if N > 10**5:
        raise UsageError("rs_twist_identity_check needs N <= 10^5")
    table.require(N)
    chi_s = chi.series(N)
    chi2_s = TruncatedDirichletSeries(N, chi_s.coeffs**2, "chi^2")
    sym2 = ds_from_local_factors(sym2_twist_factor(table, chi), N)
    rhs = ds_multiply(ds_multiply(ds_invert(ds_dilate(chi2_s, 2)), chi_s), sym2)
    literal = ds_multiply(ds_multiply(ds_invert(ds_dilate(chi_s, 2)), chi_s), sym2)
    lhs = TruncatedDirichletSeries.from_values(table.values[: N + 1] ** 2 * chi_s.coeffs)
    euler = ds_from_local_factors(rankin_twist_factor(table, chi), N)
    rep = IdentityReport(
        "decom-twist-RS", N, max_deviation(rhs, lhs), tol,
        {"q": chi.modulus, "index": chi.index, "form": table.label},
        {"euler_vs_direct": max_deviation(euler, lhs), "chi_in_2s_deviation": max_deviation(literal, lhs)},
    )
    return _raise_if(rep, strict)


def _prime_divisors(n: int) -> list[int]:
    return [p for p, _ in _factor(n)]


def _prime_series(p: int, coef: np.ndarray, N: int) -> TruncatedDirichletSeries:
    """Series supported on ``1, p, p^2, ...`` with ``coef[e]`` at ``p^e``."""
    c = np.zeros(N + 1, dtype=np.complex128)
    pe, e = 1, 0
    while pe <= N and e < len(coef):
        c[pe] = coef[e]
        pe *= p
        e += 1
    return TruncatedDirichletSeries(N, c)


def hd_factor(table, p: int) -> LocalFactor:
    """``(1 + x)^(-1) (lambda(p)^2 - lambda(p^2) x + x^2)``."""
    l1, l2 = _lam(table, p), _lam(table, p * p)
    return LocalFactor(p, (1.0, 1.0), (l1 * l1, -l2, 1.0))


def gq_factor(table, p: int) -> LocalFactor:
    """``(1 + x)^(-1) (1 - lambda(p^2) x + lambda(p^2) x^2 - x^3)``."""
    l2 = _lam(table, p * p)
    return LocalFactor(p, (1.0, 1.0), (1.0, -l2, l2, -1.0))


def hd_gq_check(table, d: int, q: int, N: int, tol: float = 1e-8, strict: bool = True) -> IdentityReport:
    """Compare ``sum_{(n,q)=1} lambda(dn)^2 n^(-s)`` with ``L(s, phi x phi) H_d(s) G_q(s)``."""
    if any(e > 1 for _, e in _factor(d)):
        raise UsageError(f"d = {d} is not square-free")
    if math.gcd(d, q) != 1:
        raise UsageError("need gcd(d, q) = 1")
    if N > 10**4:
        raise UsageError("hd_gq_check needs N <= 10^4")
    table.require(d * N)
    n = np.arange(N + 1)
    lhs_vals = np.where(np.gcd(n, q) == 1, table.values[: d * N + 1 : d] ** 2, 0.0)
    lhs = TruncatedDirichletSeries.from_values(lhs_vals)
    rhs = TruncatedDirichletSeries.from_values(table.values[: N + 1] ** 2)
    emax = int(math.log2(max(N, 2))) + 1
    for p in _prime_divisors(d):
        rhs = ds_multiply(rhs, _prime_series(p, hd_factor(table, p).expand(emax), N))
    for p in _prime_divisors(q):
        rhs = ds_multiply(rhs, _prime_series(p, gq_factor(table, p).expand(emax), N))
    rep = IdentityReport("H_d G_q factorization", N, max_deviation(lhs, rhs), tol, {"d": d, "q": q})
    return _raise_if(rep, strict)


def hd_gq_at_one(table, d: int, q: int) -> tuple[float, float]:
    """``H_d(1)`` and ``G_q(1)`` as finite products."""
    H = math.prod(hd_factor(table, p).at(1 / p).real for p in _prime_divisors(d)) if d > 1 else 1.0
    G = math.prod(gq_factor(table, p).at(1 / p).real for p in _prime_divisors(q)) if q > 1 else 1.0
    return H, G


@dataclass
class ResidueEstimate:
    euler_value: float
    empirical_value: float
    relative_gap: float
    prime_cut: int
    fit_xs: list
    tail_drift: float


def _check_eigen(table):
    if getattr(table, "kind", None) not in ("eigenvalue", "maass"):
        raise UsageError("residue estimate needs a normalized eigenvalue table")
    for p in (2, 3, 5, 7):
        if p * p <= table.limit and abs(table.values[p * p] - (table.values[p] ** 2 - 1)) > 1e-8:
            raise UsageError("table fails lambda(p^2) = lambda(p)^2 - 1; not an eigenform table")


def sym2_euler_at_one(table, prime_cut: int) -> tuple[float, float]:
    """``prod_{p <= cut} L_p(1, sym^2 phi)`` and the log-drift over ``(cut/10, cut]``."""
    table.require(prime_cut)
    spf = build_spf(max(prime_cut, 2))
    ps = spf.primes()
    lam = table.values[ps]
    x = 1.0 / ps
    l2 = lam * lam - 1
    logs = -np.log1p(-l2 * x + l2 * x * x - x**3)
    total = math.fsum(logs)
    drift = abs(math.fsum(logs[ps > prime_cut // 10]))
    return math.exp(total), drift


def residue_estimate(table, prime_cut: int, fit_xs) -> ResidueEstimate:
    """Two estimates of ``Res_{s=1} L(s, phi x phi) = L(1, sym^2 phi) / zeta(2)``.

    The Euler value truncates the product at ``prime_cut``; the empirical
    value is the least-squares slope of ``sum_{n<=X} lambda(n)^2`` in ``X``.
    """
    _check_eigen(table)
    fit_xs = sorted(int(x) for x in fit_xs)
    if len(fit_xs) < 2:
        raise UsageError("need at least two fit points")
    table.require(max(fit_xs[-1], prime_cut))
    prod, drift = sym2_euler_at_one(table, prime_cut)
    euler = prod * 6 / math.pi**2
    csum = np.cumsum(table.values[: fit_xs[-1] + 1] ** 2)
    ys = np.array([csum[X] for X in fit_xs])
    slope = float(np.polyfit(np.array(fit_xs, dtype=float), ys, 1)[0])
    gap = abs(euler - slope) / abs(slope)
    return ResidueEstimate(euler, slope, gap, prime_cut, fit_xs, drift)

