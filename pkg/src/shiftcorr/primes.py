"""Prime generation, smallest-prime-factor tables and prime reciprocal sums."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from . import config
from .errors import CapacityError, UsageError

MAX_SIEVE_N = 1 << 40


def _simple_sieve(n: int) -> np.ndarray:
    """Primes <= n by a plain Eratosthenes sieve (used for base primes)."""
    if n < 2:
        return np.zeros(0, dtype=np.int64)
    is_p = np.ones(n + 1, dtype=bool)
    is_p[:2] = False
    is_p[4::2] = False
    for i in range(3, math.isqrt(n) + 1, 2):
        if is_p[i]:
            is_p[i * i :: 2 * i] = False
    return np.flatnonzero(is_p).astype(np.int64)


@numba.njit(cache=True)
def _spf_segments(spf, base, seg):
    n_total = spf.shape[0]
    spf[0] = 0
    if n_total > 1:
        spf[1] = 1
    lo = 2
    while lo < n_total:
        hi = min(lo + seg, n_total)
        for i in range(base.shape[0]):
            p = base[i]
            if p * p >= hi:
                break
            start = max(p * p, ((lo + p - 1) // p) * p)
            for m in range(start, hi, p):
                if spf[m] == 0:
                    spf[m] = p
        for m in range(lo, hi):
            if spf[m] == 0:
                spf[m] = m
        lo = hi


@numba.njit(cache=True)
def _mark_interval(flags, lo, base):
    # flags[i] refers to lo + 1 + i; cleared for composites
    hi = lo + flags.shape[0]
    for i in range(base.shape[0]):
        p = base[i]
        if p * p > hi:
            break
        start = max(p * p, ((lo + 1 + p - 1) // p) * p)
        for m in range(start, hi + 1, p):
            flags[m - lo - 1] = False


@dataclass(frozen=True)
class SmallestPrimeFactorTable:
    """Dense table ``spf[n]`` = least prime divisor of ``n`` for ``2 <= n <= limit``.

    ``spf[0] = 0`` and ``spf[1] = 1`` by convention.
    """

    limit: int
    spf: np.ndarray = field(repr=False)

    def __getitem__(self, n):
        return self.spf[n]

    def factorize(self, n: int) -> list[tuple[int, int]]:
        if not 1 <= n <= self.limit:
            raise UsageError(f"n={n} outside [1, {self.limit}]")
        out = []
        while n > 1:
            p = int(self.spf[n])
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            out.append((p, e))
        return out

    def primes(self) -> np.ndarray:
        idx = np.arange(self.limit + 1, dtype=self.spf.dtype)
        mask = self.spf == idx
        mask[:2] = False
        return np.flatnonzero(mask).astype(np.int64)

    def is_prime(self) -> np.ndarray:
        idx = np.arange(self.limit + 1, dtype=self.spf.dtype)
        mask = self.spf == idx
        mask[:2] = False
        return mask


def build_spf(N: int) -> SmallestPrimeFactorTable:
    """Smallest-prime-factor table up to ``N`` by a segmented sieve."""
    N = int(N)
    if N < 2:
        raise UsageError("build_spf needs N >= 2")
    dtype = np.uint32 if N < (1 << 32) else np.uint64
    need = (N + 1) * np.dtype(dtype).itemsize
    if N > MAX_SIEVE_N or need > config.SIEVE_MEMORY_BUDGET:
        raise CapacityError(
            f"spf table for N={N} needs {need} bytes, budget {config.SIEVE_MEMORY_BUDGET}"
        )
    spf = np.zeros(N + 1, dtype=dtype)
    base = _simple_sieve(math.isqrt(N))
    _spf_segments(spf, base, config.SEGMENT_LENGTH)
    return SmallestPrimeFactorTable(N, spf)


@dataclass(frozen=True)
class PrimeInterval:
    """The primes in the half-open interval ``(lo, hi]``, ascending."""

    lo: int
    hi: int
    primes: np.ndarray = field(repr=False)

    @classmethod
    def empty(cls) -> "PrimeInterval":
        return cls(0, 0, np.zeros(0, dtype=np.int64))

    def __len__(self):
        return int(self.primes.shape[0])

    def __contains__(self, p):
        i = np.searchsorted(self.primes, p)
        return bool(i < len(self.primes) and self.primes[i] == p)

    def __iter__(self):
        return iter(self.primes.tolist())


def primes_in(lo: int, hi: int) -> PrimeInterval:
    """Primes ``p`` with ``lo < p <= hi``.

    An empty interval (``hi <= lo``) gives an empty result.
    """
    lo, hi = int(lo), int(hi)
    if lo < 0:
        raise UsageError("primes_in needs lo >= 0")
    if hi <= lo or hi < 2:
        return PrimeInterval(lo, hi, np.zeros(0, dtype=np.int64))
    base = _simple_sieve(math.isqrt(hi))
    chunks = []
    seg = config.SEGMENT_LENGTH
    a = max(lo, 1)
    while a < hi:
        b = min(a + seg, hi)
        flags = np.ones(b - a, dtype=bool)
        _mark_interval(flags, a, base)
        found = np.flatnonzero(flags).astype(np.int64) + a + 1
        chunks.append(found[found >= 2])
        a = b
    primes = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)
    return PrimeInterval(lo, hi, primes)


def primes_between(Y: float, Z: float) -> PrimeInterval:
    """Primes in the closed interval ``[Y, Z]`` (reals allowed)."""
    lo = max(math.ceil(Y) - 1, 0)
    return primes_in(lo, math.floor(Z))


def prime_reciprocal_sum(X: float, excluded: PrimeInterval | None = None) -> float:
    """Sum of ``1/p`` over primes ``p <= X`` not listed in ``excluded``.

    Computed with ``math.fsum`` so the result is correctly rounded.
    """
    if X < 2:
        raise UsageError("prime_reciprocal_sum needs X >= 2")
    ps = primes_in(1, math.floor(X)).primes
    if excluded is not None and len(excluded):
        ps = ps[~np.isin(ps, excluded.primes)]
    return math.fsum(1.0 / ps.astype(np.float64))


# ---------------------------------------------------------------------------
# arithmetic tables driven by an spf table


@numba.njit(cache=True)
def _divisor_count(spf, m):
    # tau_m(n) = prod C(m + e - 1, e); m = 2 gives the divisor function
    N = spf.shape[0] - 1
    out = np.zeros(N + 1, dtype=np.float64)
    if N >= 1:
        out[1] = 1.0
    for n in range(2, N + 1):
        p = spf[n]
        q = n // p
        e = 1
        while q % p == 0:
            q //= p
            e += 1
        c = 1.0
        for j in range(1, e + 1):
            c = c * (m + j - 1) / j
        out[n] = out[q] * c
    return out


def tau_table(spf: SmallestPrimeFactorTable, m: int = 2) -> np.ndarray:
    """``tau_m(n)`` for ``n <= limit`` as float64 (exact below 2**53)."""
    return _divisor_count(spf.spf, m)


@numba.njit(cache=True)
def _mobius(spf):
    N = spf.shape[0] - 1
    out = np.zeros(N + 1, dtype=np.int8)
    if N >= 1:
        out[1] = 1
    for n in range(2, N + 1):
        p = spf[n]
        q = n // p
        if q % p == 0:
            out[n] = 0
        else:
            out[n] = -out[q]
    return out


def mobius_table(spf: SmallestPrimeFactorTable) -> np.ndarray:
    """``mu(n)`` for ``n <= limit`` (int8, index 0 unused)."""
    return _mobius(spf.spf)


@numba.njit(cache=True)
def _fill_from_prime_powers(out, spf):
    # out holds f(p^e) at prime powers on entry; other entries are overwritten
    N = out.shape[0] - 1
    for n in range(2, N + 1):
        p = spf[n]
        m = n
        pe = 1
        while m % p == 0:
            m //= p
            pe *= p
        if m != 1:
            out[n] = out[pe] * out[m]


def fill_multiplicative(out: np.ndarray, spf: SmallestPrimeFactorTable) -> np.ndarray:
    """Complete a multiplicative table in place from its prime-power entries.

    ``out[1]`` is set to 1; ``out[p**e]`` must already hold ``f(p**e)``.
    """
    if spf.limit < out.shape[0] - 1:
        raise UsageError("spf table shorter than output")
    out[1] = 1
    _fill_from_prime_powers(out, spf.spf)
    return out


def prime_powers(spf: SmallestPrimeFactorTable, N: int | None = None):
    """Arrays ``(n, p, e)`` listing every prime power ``n = p**e <= N``."""
    N = spf.limit if N is None else N
    ps = spf.primes()
    ps = ps[ps <= N]
    ns, bases, exps = [ps], [ps], [np.ones_like(ps)]
    cur, base, e = ps, ps, 1
    while True:
        keep = cur <= N // base
        cur, base = cur[keep] * base[keep], base[keep]
        if cur.size == 0:
            break
        e += 1
        ns.append(cur)
        bases.append(base)
        exps.append(np.full_like(cur, e))
    return np.concatenate(ns), np.concatenate(bases), np.concatenate(exps)
