"""Correlation sums ``sum_{n<=X} f(n) lambda(n+h)`` and their bilinear decomposition.

Index sets of the decomposition are stored as per-``n`` label arrays over
``[0, X]`` (index 0 unused), so every set law can be checked exhaustively
with array operations.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numba
import numpy as np

from .errors import BoundViolation, IdentityViolation, UsageError
from .primes import SmallestPrimeFactorTable, build_spf, primes_in

#: ``ln(10^18)``; exponential weights are truncated at ``X * TRUNCATION_FACTOR``
TRUNCATION_FACTOR = math.log(1e18)


def _csum(values: np.ndarray) -> complex:
    """Pairwise (numpy) summation, real and imaginary parts separately."""
    if np.iscomplexobj(values):
        return complex(np.sum(values.real), np.sum(values.imag))
    return complex(np.sum(values))


# ---------------------------------------------------------------------------
# correlation sums


@dataclass
class CorrelationReport:
    """Correlation sum ``S`` with its trivial bound and envelope ratios.

    ``envelope = X (log log X)^((gamma+1)/2) / log X``.  ``seconds`` is
    wall time and is left out of :meth:`to_dict` so serialized output is
    deterministic.
    """

    X: int
    h: int
    f_label: str
    phi_label: str
    S: complex
    trivial_bound: float
    gamma: float
    envelope: float
    seconds: float = field(default=0.0, compare=False)

    @property
    def ratio_trivial(self) -> float:
        return abs(self.S) / self.trivial_bound if self.trivial_bound else 0.0

    @property
    def ratio_envelope(self) -> float:
        return abs(self.S) / self.envelope

    @property
    def normalized(self) -> float:
        """``|S| log X / (X log log X)``."""
        return abs(self.S) * math.log(self.X) / (self.X * math.log(math.log(self.X)))

    def to_dict(self) -> dict:
        return {
            "X": self.X, "h": self.h, "f": self.f_label, "phi": self.phi_label,
            "S_re": self.S.real, "S_im": self.S.imag, "abs_S": abs(self.S),
            "trivial_bound": self.trivial_bound, "ratio_trivial": self.ratio_trivial,
            "gamma": self.gamma, "envelope": self.envelope, "ratio_envelope": self.ratio_envelope,
            "normalized": self.normalized,
        }


def envelope(X: float, gamma: float = 1.0) -> float:
    return X * math.log(math.log(X)) ** ((gamma + 1) / 2) / math.log(X)


def _summands(f, lam, h: int, X: int) -> tuple[int, np.ndarray]:
    if h == 0:
        raise UsageError("h must be non-zero")
    if X < 2:
        raise UsageError("X must be >= 2")
    if abs(h) > X:
        raise UsageError("need |h| <= X")
    f.require(X)
    lam.require(X + h)
    start = max(1, 1 - h)
    terms = f.values[start : X + 1] * lam.values[start + h : X + h + 1]
    return start, terms


def corr_sum(f, lam, h: int, X: int, gamma: float = 1.0) -> CorrelationReport:
    """``S = sum_{max(1, 1-h) <= n <= X} f(n) lambda(n + h)``."""
    t0 = time.perf_counter()
    X, h = int(X), int(h)
    _, terms = _summands(f, lam, h, X)
    S = _csum(terms)
    T = float(np.sum(np.abs(terms)))
    if abs(S) > T + 1e-6:
        raise BoundViolation(f"|S| = {abs(S)} exceeds trivial bound {T}")
    return CorrelationReport(X, h, f.label, lam.label, S, T, gamma, envelope(X, gamma), time.perf_counter() - t0)


def corr_ladder(f, lam, h: int, xs, gamma: float = 1.0) -> list[CorrelationReport]:
    """Reports at every ``X`` of a ladder, from one cumulative sum."""
    xs = sorted(int(x) for x in xs)
    start, terms = _summands(f, lam, h, xs[-1])
    out = []
    for X in xs:
        k = X - start + 1
        part = terms[:k]
        S = _csum(part)
        T = float(np.sum(np.abs(part)))
        out.append(CorrelationReport(X, h, f.label, lam.label, S, T, gamma, envelope(X, gamma)))
    return out


# ---------------------------------------------------------------------------
# Wilton sums


@dataclass
class WiltonResult:
    X: int
    alpha: float
    S: complex
    ratio: float


def wilton_sum(lam, alpha, X: int) -> WiltonResult:
    """``sum_{n<=X} lambda(n) e(n alpha)`` and ``|S| / (X^(1/2) log X)``.

    A :class:`fractions.Fraction` ``alpha`` is reduced exactly modulo 1.
    """
    X = int(X)
    lam.require(X)
    n = np.arange(1, X + 1, dtype=np.int64)
    if isinstance(alpha, Fraction):
        a, b = alpha.numerator, alpha.denominator
        phase = ((n % b) * (a % b) % b) / b
    else:
        frac = alpha - math.floor(alpha)
        phase = np.mod(n * frac, 1.0)
    S = _csum(lam.values[1 : X + 1] * np.exp(2j * np.pi * phase))
    ratio = abs(S) / (math.sqrt(X) * math.log(X)) if X > 1 else float("inf")
    return WiltonResult(X, float(alpha), S, ratio)


# ---------------------------------------------------------------------------
# smoothed shifted convolution


@dataclass
class ShiftedConvolutionResult:
    """``D = sum_{n>=1} lambda(m1 n + h) lambda(m2 n + h) exp(-n/X)``."""

    m1: int
    m2: int
    h: int
    X: float
    D: float
    truncation: int
    tail_bound: float
    tail_estimate: float
    reference: float

    @property
    def bound_ratio(self) -> float:
        return abs(self.D) / self.reference

    @property
    def tail_within_tolerance(self) -> bool:
        return self.tail_estimate <= 1e-9 * abs(self.D) + 1e-9


def shifted_convolution_reference(m1: int, m2: int, h: int, X: float) -> float:
    """``exp((m1 + m2) h / (2 X m1 m2)) (m1 m2)^(4/5) X^(9/10)``."""
    return math.exp((m1 + m2) * h / (2 * X * m1 * m2)) * (m1 * m2) ** 0.8 * X**0.9


def smoothed_shifted_convolution(lam, m1: int, m2: int, h: int, X: float) -> ShiftedConvolutionResult:
    """Exponentially smoothed shifted convolution, truncated at ``ceil(X ln 10^18)``.

    Terms with ``m n + h <= 0`` are zero.  The truncation point is capped by
    the table length.  ``tail_bound`` uses ``tau(k) <= 2 sqrt(k)`` (rigorous);
    ``tail_estimate`` assumes unit mean square, ``X exp(-n_t / X)``.
    """
    if h == 0:
        raise UsageError("h must be non-zero")
    if m1 < 1 or m2 < 1 or math.gcd(m1, m2) != 1:
        raise UsageError(f"need coprime positive m1, m2 (got {m1}, {m2})")
    if X <= 0:
        raise UsageError("X must be positive")
    mmax = max(m1, m2)
    want = math.ceil(X * TRUNCATION_FACTOR)
    cap = (lam.limit - h) // mmax
    nt = min(want, cap)
    if nt < 1:
        raise UsageError("table too short for any term")
    n = np.arange(1, nt + 1, dtype=np.int64)
    a, b = m1 * n + h, m2 * n + h
    ok = (a >= 1) & (b >= 1)
    terms = np.where(ok, lam.values[np.where(ok, a, 0)] * lam.values[np.where(ok, b, 0)], 0.0)
    w = np.exp(-n / X)
    D = float(np.sum(terms * w))
    decay = math.exp(-nt / X)
    tail_bound = 4 * math.sqrt(m1 * m2) * decay * (X * (nt + abs(h) + 1) + X * X)
    tail_estimate = X * decay
    return ShiftedConvolutionResult(m1, m2, h, X, D, nt, tail_bound, tail_estimate,
                                    shifted_convolution_reference(m1, m2, h, X))


# ---------------------------------------------------------------------------
# bilinear decomposition


@numba.njit(cache=True)
def _classify(spf, X, wlo, nu0, nu1):
    # wlo = (H-1)^2; primes p in (wlo, nu1^2] are sifted; those with
    # ceil(sqrt p) >= nu0 belong to the prime set of nu = ceil(sqrt p).
    numin = np.zeros(X + 1, dtype=np.int64)   # smallest nu with a prime factor in its set
    cmin = np.zeros(X + 1, dtype=np.int64)    # multiplicity of factors in that set
    pmin = np.zeros(X + 1, dtype=np.int64)    # a prime factor in that set
    gap = np.zeros(X + 1, dtype=np.bool_)     # has a sifted prime outside every prime set
    hi = nu1 * nu1
    for n in range(2, X + 1):
        m = n
        while m > 1:
            p = spf[m]
            e = 0
            while m % p == 0:
                m //= p
                e += 1
            if p > wlo and p <= hi:
                r = int(np.sqrt(p))
                while r * r > p:
                    r -= 1
                while (r + 1) * (r + 1) <= p:
                    r += 1
                nu = r if r * r == p else r + 1
                if nu < nu0:
                    gap[n] = True
                elif numin[n] == 0 or nu < numin[n]:
                    numin[n] = nu
                    cmin[n] = e
                    pmin[n] = p
                elif nu == numin[n]:
                    cmin[n] += e
    return numin, cmin, pmin, gap


@dataclass
class BkszPartition:
    """Sets of the bilinear decomposition of ``[1, X]``.

    Label arrays (index ``n``, 0 unused):

    ``I_nu``    ``nu`` when ``n`` lies in ``P_nu M_nu`` (so in ``I``), else 0
    ``J1_nu``   ``nu`` when ``n`` lies in ``J1^(nu)``, else 0
    ``in_J2``   ``n`` has a prime factor in some ``P_nu``

    ``J1^(nu)`` counts prime factors with multiplicity: ``n`` has exactly one
    prime factor (counted with multiplicity) in ``P_nu`` and none in
    ``P_mu`` for ``mu < nu``.
    """

    X: int
    c: float
    delta: float
    H: float
    K: float
    nus: list
    I_nu: np.ndarray = field(repr=False)
    J1_nu: np.ndarray = field(repr=False)
    in_J2: np.ndarray = field(repr=False)
    p_of: np.ndarray = field(repr=False)
    overridden: bool = False
    warning: str = ""

    @property
    def degenerate(self) -> bool:
        return not self.nus

    @property
    def in_I(self) -> np.ndarray:
        return self.I_nu > 0

    @property
    def in_J(self) -> np.ndarray:
        m = ~self.in_I
        m[0] = False
        return m

    @property
    def in_J1(self) -> np.ndarray:
        return self.J1_nu > 0

    @property
    def in_J3(self) -> np.ndarray:
        m = ~self.in_J2
        m[0] = False
        return m

    def interval(self, nu: int) -> tuple[int, int]:
        """``I_nu = ((nu - 1)^2, nu^2]``."""
        return (nu - 1) ** 2, nu * nu

    def prime_set(self, nu: int) -> np.ndarray:
        lo, hi = self.interval(nu)
        return primes_in(lo, hi).primes

    def sifting_primes(self, nu: int) -> np.ndarray:
        """Primes dividing ``P_nu``: those in ``((H - 1)^2, nu^2]``."""
        return primes_in(max(0, math.floor((self.H - 1) ** 2)), nu * nu).primes

    def m_set(self, nu: int) -> np.ndarray:
        """``M_nu = {m <= X / nu^2 : (m, P_nu) = 1}``."""
        top = self.X // (nu * nu)
        P = self.sifting_primes(nu)
        ok = np.ones(top + 1, dtype=bool)
        ok[0] = False
        for p in P:
            ok[p::p] = False
        return np.flatnonzero(ok)

    def verify(self) -> dict:
        """Check every set law by building ``P_nu M_nu`` explicitly from products.

        Returns a dict of named booleans; raises :class:`IdentityViolation`
        if any law fails.
        """
        X = self.X
        seen = np.zeros(X + 1, dtype=np.int64)
        contained = unique = True
        for nu in self.nus:
            P, M = self.prime_set(nu), self.m_set(nu)
            if P.size == 0 or M.size == 0:
                continue
            prods = np.multiply.outer(P, M).ravel()
            contained &= bool(prods.max() <= X)
            unique &= np.unique(prods).size == prods.size
            seen[prods[prods <= X]] += 1
        laws = {
            "PM_subset_1X": contained,
            "unique_factorization": unique,
            "pairwise_disjoint": bool(seen.max() <= 1),
            "I_matches_products": bool(np.array_equal(seen > 0, self.in_I)),
            "I_subset_J1": bool(np.all(self.in_J1[self.in_I])),
            "J2_J3_partition": bool(np.all(self.in_J2[1:] ^ self.in_J3[1:])),
            "J_covered": bool(np.all(((self.in_J1 & ~self.in_I) | (self.in_J2 & ~self.in_J1) | self.in_J3)[self.in_J])),
            "J1_minus_PM_in_short_range": self._check_j1_range(),
        }
        failed = [k for k, v in laws.items() if not v]
        if failed:
            raise IdentityViolation(f"set laws failed: {failed}")
        return laws

    def _check_j1_range(self) -> bool:
        # n in J1^(nu) \ P_nu M_nu must be p m with p in P_nu, X/nu^2 < m <= X/(nu-1)^2
        idx = np.flatnonzero(self.in_J1 & (self.J1_nu != self.I_nu))
        if idx.size == 0:
            return True
        nu = self.J1_nu[idx]
        p = self.p_of[idx]
        m = idx // p
        lo_ok = m * nu * nu > self.X
        hi_ok = m * (nu - 1) ** 2 <= self.X
        return bool(np.all((idx % p == 0) & lo_ok & hi_ok))


def bksz_parameters(X: float, c: float, delta: float) -> tuple[float, float]:
    """``H = (log X)^(8c + 16)`` and ``K = X^(delta / 2)``."""
    return math.log(X) ** (8 * c + 16), X ** (delta / 2)


def bksz_partition(X: int, c: float = 0.0, delta: float = 0.04, overrides: tuple | None = None,
                   spf: SmallestPrimeFactorTable | None = None) -> BkszPartition:
    """Build the decomposition sets; ``overrides = (H*, K*)`` replaces the formula values."""
    if not 0 < delta < 1 / 22:
        raise UsageError("delta must lie in (0, 1/22)")
    if X < 16:
        raise UsageError("X must be >= 16")
    X = int(X)
    H, K = bksz_parameters(X, c, delta)
    if overrides is not None:
        H, K = float(overrides[0]), float(overrides[1])
        if H < 2:
            raise UsageError("H* must be >= 2")
    nu0, nu1 = math.ceil(H), math.floor(K)
    warning = ""
    if H >= K or nu0 > nu1:
        warning = f"H = {H:.4g} >= K = {K:.4g}: no nu in [H, K], I is empty"
        nus = []
    else:
        nus = list(range(nu0, nu1 + 1))
    if nus and (nu1 - 1) ** 2 >= X:
        nus = [nu for nu in nus if (nu - 1) ** 2 < X]
    if not nus:
        z = np.zeros(X + 1, dtype=np.int64)
        return BkszPartition(X, c, delta, H, K, [], z, z.copy(), np.zeros(X + 1, dtype=bool), z.copy(),
                             overrides is not None, warning)
    spf = spf if spf is not None else build_spf(max(X, 2))
    wlo = math.floor((H - 1) ** 2)
    numin, cmin, pmin, gap = _classify(spf.spf, X, wlo, nus[0], nus[-1])
    J1 = np.where(cmin == 1, numin, 0)
    in_J2 = numin > 0
    m = np.zeros(X + 1, dtype=np.int64)
    nz = pmin > 0
    m[nz] = np.arange(X + 1)[nz] // pmin[nz]
    in_I = (J1 > 0) & ~gap & (m * J1 * J1 <= X)
    I_nu = np.where(in_I, J1, 0)
    return BkszPartition(X, c, delta, H, K, nus, I_nu, J1, in_J2, pmin, overrides is not None, warning)


@dataclass
class NuDiagnostics:
    nu: int
    primes: int
    m_count: int
    bilinear_sum: complex
    cs_left: float
    cs_right: float
    diagonal: float
    diagonal_bound: float
    max_ap_sum: float
    ratio_25_16: float
    ratio_41_16: float
    off_diagonal: float


@dataclass
class DecompositionReport:
    X: int
    h: int
    S_direct: complex
    S_I: complex
    S_J: complex
    S_J1_minus_I: complex
    S_J2_minus_J1: complex
    S_J3: complex
    second_moments: dict
    f_second_moment_J3: float
    relative_gap: float
    warning: str
    per_nu: list
    notes: list

    def to_dict(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            if isinstance(v, complex):
                out[k + "_re"], out[k + "_im"] = v.real, v.imag
            elif k == "per_nu":
                out[k] = [{kk: (vv.real if isinstance(vv, complex) else vv) for kk, vv in d.items()} for d in v]
            else:
                out[k] = v
        return out


def ap_second_moment(lam, h: int, p: int, X: float) -> tuple[float, int]:
    """``sum_{n >= 1, n = h (mod p)} lambda(n)^2 exp(-n / X)`` and the truncation point used."""
    nt = min(math.ceil(X * TRUNCATION_FACTOR), lam.limit)
    r = h % p
    start = r if r > 0 else p
    idx = np.arange(start, nt + 1, p)
    return float(np.sum(lam.values[idx] ** 2 * np.exp(-idx / X))), nt


def bksz_decompose(f, lam, h: int, part: BkszPartition, diagnostics: bool = True) -> DecompositionReport:
    """Split the correlation sum over ``I`` and ``J`` and report the bilinear diagnostics."""
    X = part.X
    if h == 0:
        raise UsageError("h must be non-zero")
    f.require(X)
    lam.require(X + abs(h))
    n = np.arange(X + 1)
    valid = (n >= max(1, 1 - h))
    fv = f.values[: X + 1]
    shifted = np.zeros(X + 1, dtype=np.float64)
    shifted[valid] = lam.values[n[valid] + h]
    terms = np.where(valid, fv * shifted, 0)
    S = _csum(terms)
    in_I, in_J = part.in_I, part.in_J
    S_I = _csum(np.where(in_I, terms, 0))
    S_J = _csum(np.where(in_J, terms, 0))
    A = in_J & part.in_J1
    B = in_J & part.in_J2 & ~part.in_J1
    C = in_J & part.in_J3
    sq = shifted**2
    moments = {"J1_minus_I": float(np.sum(sq[A])), "J2_minus_J1": float(np.sum(sq[B])), "J3": float(np.sum(sq[C]))}
    gap = abs(S_I + S_J - S) / max(abs(S), 1e-300)
    report = DecompositionReport(
        X, h, S, S_I, S_J, _csum(np.where(A, terms, 0)), _csum(np.where(B, terms, 0)), _csum(np.where(C, terms, 0)),
        moments, float(np.sum(np.abs(fv[C]) ** 2)), gap, part.warning, [],
        ["off-diagonal weights use |f(p1) f(p2)|"],
    )
    if abs(S_I + S_J - S) > 1e-9 * max(abs(S), 1.0):
        raise IdentityViolation(f"S_I + S_J = {S_I + S_J} differs from direct sum {S}")
    if diagnostics:
        for nu in part.nus:
            report.per_nu.append(asdict(_nu_diagnostics(f, lam, h, part, nu)))
    return report


def _nu_diagnostics(f, lam, h, part, nu) -> NuDiagnostics:
    X = part.X
    P = part.prime_set(nu)
    M = part.m_set(nu)
    fP = f.values[P] if P.size else np.zeros(0)
    # bilinear sum and its Cauchy-Schwarz chain
    if P.size and M.size:
        idx = np.multiply.outer(P, M) + h
        lamPM = np.where(idx >= 1, lam.values[np.clip(idx, 0, None)], 0.0)
        inner = (fP[:, None] * lamPM).sum(axis=0)
        bil = _csum(f.values[M] * inner)
        cs_left = float(np.sum(np.abs(f.values[M]) * np.abs(inner)))
        allm = np.arange(1, X // (nu * nu) + 1)
        idx_all = np.multiply.outer(P, allm) + h
        lam_all = np.where(idx_all >= 1, lam.values[np.clip(idx_all, 0, None)], 0.0)
        inner_all = (fP[:, None] * lam_all).sum(axis=0)
        cs_right = math.sqrt(float(np.sum(np.abs(f.values[M]) ** 2)) * float(np.sum(np.abs(inner_all) ** 2)))
        if cs_left > cs_right * (1 + 1e-9) + 1e-12:
            raise BoundViolation(f"Cauchy-Schwarz fails at nu = {nu}")
    else:
        bil, cs_left, cs_right = 0j, 0.0, 0.0
    # diagonal: sum_p |f(p)|^2 sum_{n = h (p)} lambda(n)^2 exp(-n/X)
    ap = np.array([ap_second_moment(lam, h, int(p), X)[0] for p in P]) if P.size else np.zeros(0)
    diagonal = float(np.sum(np.abs(fP) ** 2 * ap))
    fM2 = float(np.sum(np.abs(f.values[M]) ** 2)) if M.size else 0.0
    diag_bound = math.sqrt(fM2 * math.exp(h / X) * diagonal)
    max_ap = float(ap.max()) if ap.size else 0.0
    # off-diagonal aggregate with exponential weight exp(-nu^2 m / X)
    off = 0.0
    if P.size > 1:
        Y = X / (nu * nu)
        mt = math.ceil(Y * TRUNCATION_FACTOR)
        mt = min(mt, (lam.limit - h) // int(P.max()))
        m = np.arange(1, mt + 1)
        w = np.exp(-m / Y)
        for i in range(P.size):
            for j in range(P.size):
                if i == j:
                    continue
                a, b = P[i] * m + h, P[j] * m + h
                ok = (a >= 1) & (b >= 1)
                val = np.sum(np.where(ok, lam.values[np.where(ok, a, 0)] * lam.values[np.where(ok, b, 0)], 0.0) * w)
                off += abs(fP[i] * fP[j]) * abs(val)
    return NuDiagnostics(
        nu, int(P.size), int(M.size), bil, cs_left, cs_right, diagonal, diag_bound, max_ap,
        max_ap / (nu ** (-25 / 16) * X), max_ap / (nu ** (-41 / 16) * X), float(off),
    )
