"""Sifted second moments, second moments in progressions, sieve densities and smooth weights."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from .correlation import ap_second_moment
from .errors import BoundViolation, ModelViolation, UsageError
from .lseries import hd_gq_at_one, sym2_euler_at_one
from .multfun import unsifted_mask
from .primes import build_spf, primes_between, primes_in


@dataclass(frozen=True)
class SiftingSet:
    """Primes in the closed interval ``[Y, Z]``; ``P(Y, Z)`` is their product."""

    Y: float
    Z: float
    primes: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, Y: float, Z: float) -> "SiftingSet":
        if not 2 <= Y < Z:
            raise UsageError(f"need 2 <= Y < Z, got Y={Y}, Z={Z}")
        return cls(Y, Z, primes_between(Y, Z).primes)

    def coprime(self, n: int) -> bool:
        """``(n, P(Y, Z)) = 1``, i.e. no prime factor of ``n`` in ``[Y, Z]``."""
        n = abs(int(n))
        return not any(n % int(p) == 0 for p in self.primes)


def euler_phi(q: int) -> int:
    out, m, p = q, q, 2
    while p * p <= m:
        if m % p == 0:
            while m % p == 0:
                m //= p
            out -= out // p
        p += 1
    if m > 1:
        out -= out // m
    return out


def _squarefree(n: int) -> bool:
    p = 2
    while p * p <= n:
        if n % (p * p) == 0:
            return False
        p += 1
    return True


# ---------------------------------------------------------------------------
# sifted sums


@dataclass
class SiftedSum:
    value: float
    X: int
    a: int
    Y: float
    Z: float
    reference: float

    @property
    def ratio(self) -> float:
        return self.value / self.reference


def sifted_rs_sum(lam, a: int, Y: float, Z: float, X: int, spf=None) -> SiftedSum:
    """``sum_{n<=X, (n-a, P(Y,Z))=1} lambda(n)^2``.

    The term ``n = a`` is excluded; ``n - a < 0`` is sifted through
    ``|n - a|``.  ``reference = X log Y / log Z``.
    """
    if not 2 <= Y < Z:
        raise UsageError(f"need 2 <= Y < Z, got Y={Y}, Z={Z}")
    X, a = int(X), int(a)
    lam.require(X)
    n = np.arange(1, X + 1)
    k = np.abs(n - a)
    kmax = int(k.max())
    spf = spf if spf is not None and spf.limit >= kmax else build_spf(max(kmax, 2))
    mask = unsifted_mask(spf, kmax, Y, Z)
    keep = (k > 0) & mask[k]
    value = float(np.sum(np.where(keep, lam.values[1 : X + 1] ** 2, 0.0)))
    return SiftedSum(value, X, a, Y, Z, X * math.log(Y) / math.log(Z))


# ---------------------------------------------------------------------------
# progressions


@dataclass
class ApSum:
    value: float
    main_term: float
    X: int
    d: int
    a: int
    q: int
    reduced: tuple
    residue: float

    @property
    def relative_gap(self) -> float:
        return abs(self.value - self.main_term) / abs(self.main_term) if self.main_term else float("inf")


def ap_sum_exact(lam, d: int, a: int, q: int, X: int) -> float:
    """``sum_{n<=X, n = a (mod q)} lambda(d n)^2``."""
    lam.require(d * X)
    r = a % q
    start = r if r > 0 else q
    n = np.arange(start, X + 1, q)
    return float(np.sum(lam.values[d * n] ** 2))


def euler_residue(lam, prime_cut: int | None = None) -> float:
    """``L(1, sym^2 phi) / zeta(2)`` with the Euler product cut at ``prime_cut``."""
    cut = min(10**5, lam.limit) if prime_cut is None else prime_cut
    prod, _ = sym2_euler_at_one(lam, cut)
    return prod * 6 / math.pi**2


def ap_rs_sum(lam, d: int, a: int, q: int, X: int, residue: float | None = None) -> ApSum:
    """Second moment of ``lambda(d n)`` over ``n = a (mod q)`` with its predicted main term.

    With ``(a d, q) = 1`` the main term is
    ``H_d(1) G_q(1) Res X / phi(q)``.  Otherwise (``d = 1``, ``q`` square-free)
    the sum is rewritten with ``q0 = (a, q)`` as the sum of ``lambda(q0 n)^2``
    over ``n <= X / q0``, ``n = a / q0 (mod q / q0)``, and the main term uses
    ``d = q0``.
    """
    if d < 1 or not _squarefree(d):
        raise UsageError(f"d = {d} is not square-free")
    if q < 1:
        raise UsageError("q must be positive")
    X = int(X)
    res = euler_residue(lam) if residue is None else residue
    value = ap_sum_exact(lam, d, a, q, X)
    if math.gcd(a * d, q) == 1:
        H, G = hd_gq_at_one(lam, d, q)
        main = H * G * res * X / euler_phi(q)
        return ApSum(value, main, X, d, a, q, (d, a % q, q, X), res)
    if d != 1:
        raise UsageError("general residues need d = 1 (reduction is for lambda(n)^2)")
    if not _squarefree(q):
        raise UsageError("general residues need square-free q")
    q0 = math.gcd(a, q)
    q1 = q // q0
    a1 = (a // q0) % q1
    H, G = hd_gq_at_one(lam, q0, q1)
    main = H * G * res * X / (q0 * euler_phi(q1))
    return ApSum(value, main, X, d, a, q, (q0, a1, q1, X // q0), res)


@dataclass
class SmoothedApSum:
    value: float
    p: int
    h: int
    X: float
    truncation: int
    tail_estimate: float

    @property
    def nu(self) -> float:
        return math.sqrt(self.p)

    @property
    def ratio_25_16(self) -> float:
        return self.value / (self.nu ** (-25 / 16) * self.X)

    @property
    def ratio_41_16(self) -> float:
        return self.value / (self.nu ** (-41 / 16) * self.X)

    @property
    def ratio_x_over_p(self) -> float:
        return self.value / (self.X / self.p)


def smoothed_ap_rs(lam, h: int, p: int, X: float) -> SmoothedApSum:
    """``sum_{n>=1, n = h (mod p)} lambda(n)^2 exp(-n/X)``.

    Truncated at ``ceil(X ln 10^18)`` or the table end; ``tail_estimate``
    is ``X exp(-n_t / X) / p`` (unit mean square).
    """
    if p < 2 or len(primes_in(p - 1, p)) != 1:
        raise UsageError(f"{p} is not prime")
    if X <= 0:
        raise UsageError("X must be positive")
    value, nt = ap_second_moment(lam, h, p, X)
    return SmoothedApSum(value, p, h, X, nt, X * math.exp(-nt / X) / p)


# ---------------------------------------------------------------------------
# sieve density


def _lam_p2(lam, ps: np.ndarray) -> np.ndarray:
    """``lambda(p^2)`` from the table, or ``lambda(p)^2 - 1`` past its end."""
    out = lam.values[ps] ** 2 - 1
    inside = ps * ps <= lam.limit
    out[inside] = lam.values[ps[inside] ** 2]
    return out


def sieve_density(lam, a: int, ps: np.ndarray) -> np.ndarray:
    """The density ``g(p)`` at each prime ``p``.

    ``(1/(p+1)) (lambda(p)^2 - lambda(p^2)/p + 1/p^2)`` if ``p | a``,
    ``(p/(p^2-1)) (1 - lambda(p^2)/p + lambda(p^2)/p^2 - 1/p^3)`` otherwise.
    """
    ps = np.asarray(ps, dtype=np.int64)
    pf = ps.astype(np.float64)
    l1 = lam.values[ps]
    l2 = _lam_p2(lam, ps)
    divides = (a % ps) == 0 if a != 0 else np.ones(ps.shape, dtype=bool)
    g_div = (l1**2 - l2 / pf + 1 / pf**2) / (pf + 1)
    g_not = pf / (pf**2 - 1) * (1 - l2 / pf + l2 / pf**2 - 1 / pf**3)
    return np.where(divides, g_div, g_not)


@dataclass
class DensityProduct:
    value: float
    w: float
    z: float
    a: int
    primes: int

    @property
    def ratio(self) -> float:
        return self.value / (math.log(self.z) / math.log(self.w))


def sieve_density_product(lam, a: int, w: float, z: float) -> DensityProduct:
    """``prod_{w <= p < z} (1 - g(p))^(-1)`` compared with ``log z / log w``."""
    if not 2 <= w <= z:
        raise UsageError("need 2 <= w <= z")
    lam.require(math.ceil(z) - 1)
    ps = primes_in(math.ceil(w) - 1, math.ceil(z) - 1).primes
    ps = ps[(ps >= w) & (ps < z)]
    if ps.size == 0:
        return DensityProduct(1.0, w, z, a, 0)
    g = sieve_density(lam, a, ps)
    bad = np.flatnonzero((g <= 0) | (g >= 1))
    if bad.size:
        raise ModelViolation(f"g({int(ps[bad[0]])}) = {g[bad[0]]} outside (0, 1)")
    value = math.exp(-math.fsum(np.log1p(-g)))
    return DensityProduct(value, w, z, a, int(ps.size))


# ---------------------------------------------------------------------------
# smooth weights


def bump(x):
    """``g(x) = exp(-1 / (x (1 - x)))`` on ``(0, 1)``, zero elsewhere."""
    x = np.asarray(x, dtype=np.float64)
    inside = (x > 0) & (x < 1)
    xs = np.where(inside, x, 0.5)
    return np.where(inside, np.exp(-1.0 / (xs * (1.0 - xs))), 0.0)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


def _gl_panels(a: np.ndarray, b: np.ndarray, f) -> np.ndarray:
    """Vectorized 20-point Gauss-Legendre integral of ``f`` over ``[a_i, b_i]``."""
    mid, half = (a + b) / 2, (b - a) / 2
    nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
    return half * (f(nodes) @ _GL_W)


def bump_integral_gl(panels: int = 256) -> float:
    """``C = int_0^1 g`` by composite Gauss-Legendre."""
    edges = np.linspace(0.0, 1.0, panels + 1)
    return math.fsum(_gl_panels(edges[:-1], edges[1:], bump))


def bump_integral_adaptive() -> float:
    """``C = int_0^1 g`` by adaptive Gauss-Kronrod (QUADPACK)."""
    val, _ = integrate.quad(lambda x: float(bump(x)), 0.0, 1.0, epsabs=1e-16, epsrel=1e-14, limit=200)
    return val


GRID = 4096


@lru_cache(maxsize=1)
def _cumulative():
    edges = np.linspace(0.0, 1.0, GRID + 1)
    pieces = _gl_panels(edges[:-1], edges[1:], bump)
    cum = np.concatenate([[0.0], np.cumsum(pieces)])
    C = bump_integral_adaptive()
    return edges, cum, C


def bump_cdf(y) -> np.ndarray:
    """``G(y) = (1/C) int_{-inf}^y g``; exactly 0 for ``y <= 0`` and 1 for ``y >= 1``."""
    edges, cum, C = _cumulative()
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    out = np.where(y >= 1, 1.0, 0.0)
    mid = (y > 0) & (y < 1)
    if mid.any():
        ym = y[mid]
        k = np.minimum((ym * GRID).astype(np.int64), GRID - 1)
        partial = cum[k] + _gl_panels(edges[k], ym, bump)
        out[mid] = np.clip(partial / C, 0.0, 1.0)
    return out


@dataclass(frozen=True)
class SmoothWeight:
    """Smooth minorant (``ell = 1``) or majorant (``ell = 2``) of the indicator of ``[0, X]``.

    ``w1(u) = G(u/Y) - G((u - X + Y)/Y)`` is 1 on ``[Y, X - Y]`` and 0 outside
    ``(0, X)``; ``w2(u) = G((u + Y)/Y) - G((u - X)/Y)`` is 1 on ``[0, X]`` and
    0 outside ``(-Y, X + Y)``.
    """

    X: float
    Y: float
    ell: int

    def __post_init__(self):
        if not 0 < self.Y < self.X / 2:
            raise UsageError("need 0 < Y < X/2")
        if self.ell not in (1, 2):
            raise UsageError("ell must be 1 or 2")

    @property
    def C(self) -> float:
        return _cumulative()[2]

    def __call__(self, u):
        u = np.asarray(u, dtype=np.float64)
        X, Y = self.X, self.Y
        if self.ell == 1:
            v = bump_cdf(u / Y) - bump_cdf((u - X + Y) / Y)
        else:
            v = bump_cdf((u + Y) / Y) - bump_cdf((u - X) / Y)
        v = np.clip(v, 0.0, 1.0)
        return v if u.ndim else float(v[0])


def smooth_weight_eval(wt: SmoothWeight, u):
    return wt(u)


def smooth_weight_mellin(wt: SmoothWeight, s: complex) -> complex:
    """``int_0^inf w(u) u^(s-1) du`` after one integration by parts.

    ``w1^(s) = (1/(s C)) int_0^1 g(t) ((X - Y + Y t)^s - (Y t)^s) dt`` and
    ``w2^(s) = (1/(s C)) int_0^1 g(t) (X + Y t)^s dt``; at ``s = 1`` these
    are ``X - Y`` and ``X + Y/2``.
    """
    s = complex(s)
    if s.real <= 0:
        raise UsageError("Mellin transform needs Re s > 0")
    X, Y, C = wt.X, wt.Y, wt.C
    if wt.ell == 1:
        def kern(t):
            return (X - Y + Y * t) ** s - (Y * t) ** s
    else:
        def kern(t):
            return (X + Y * t) ** s

    def part(fn):
        v, _ = integrate.quad(lambda t: fn(kern(t)) * float(bump(t)), 0.0, 1.0,
                              epsabs=0.0, epsrel=1e-13, limit=200)
        return v

    val = complex(part(lambda z: z.real), part(lambda z: z.imag)) / (s * C)
    if s == 1 and not X - 2 * Y <= val.real <= X + 2 * Y:
        raise BoundViolation(f"w^(1) = {val.real} outside [X - 2Y, X + 2Y]")
    return val


@dataclass
class SandwichResult:
    lower: float
    sharp: float
    upper: float
    mellin_lower: float
    mellin_upper: float

    @property
    def holds(self) -> bool:
        return self.lower <= self.sharp + 1e-9 * max(1.0, abs(self.sharp)) and \
            self.sharp <= self.upper + 1e-9 * max(1.0, abs(self.sharp))


def smoothed_ap_sum(lam, wt: SmoothWeight, d: int, a: int, q: int) -> float:
    """``sum_{n = a (mod q)} w(n) lambda(d n)^2`` over the support of ``w``."""
    top = math.floor(wt.X + (wt.Y if wt.ell == 2 else 0))
    lam.require(d * top)
    r = a % q
    start = r if r > 0 else q
    n = np.arange(start, top + 1, q)
    return float(np.sum(wt(n.astype(np.float64)) * lam.values[d * n] ** 2))


def sandwich_check(lam, d: int, a: int, q: int, X: float, Y: float, strict: bool = True) -> SandwichResult:
    """``S(w1) <= sum_{n<=X, n=a(q)} lambda(dn)^2 <= S(w2)``, plus ``w^_ell(1)``."""
    w1, w2 = SmoothWeight(X, Y, 1), SmoothWeight(X, Y, 2)
    lower = smoothed_ap_sum(lam, w1, d, a, q)
    upper = smoothed_ap_sum(lam, w2, d, a, q)
    sharp = ap_sum_exact(lam, d, a, q, math.floor(X))
    res = SandwichResult(lower, sharp, upper, smooth_weight_mellin(w1, 1).real, smooth_weight_mellin(w2, 1).real)
    if strict and not res.holds:
        raise BoundViolation(f"sandwich fails: {lower} <= {sharp} <= {upper}")
    return res
