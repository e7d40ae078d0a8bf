"""Exact integer q-expansions of level-one modular forms.

Series products use Kronecker substitution: a truncated series with signed
integer coefficients ``c_0..c_{n-1}`` is stored as ``n`` fixed-width
little-endian slots holding ``c_i + 2**(8w-1)``, and multiplied as one big
integer with gmpy2.  All arithmetic is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import gmpy2
import numpy as np

from . import config
from .errors import CapacityError, IdentityViolation, UsageError
from .primes import build_spf

CUSP_WEIGHTS = (12, 16, 18, 20, 22, 26)


# ---------------------------------------------------------------------------
# packed series


@dataclass(frozen=True)
class PackedSeries:
    buf: bytes = field(repr=False)
    n: int
    width: int
    #: every coefficient satisfies |c| < 2**bits
    bits: int


@lru_cache(maxsize=8)
def _bias(n: int, w: int):
    return gmpy2.mpz.from_bytes((b"\x00" * (w - 1) + b"\x80") * n, "little")


def _width_for(bits: int) -> int:
    return max(1, (bits + 1 + 7) // 8)


def pack_ints(values) -> PackedSeries:
    values = [int(v) for v in values]
    bits = max((abs(v).bit_length() for v in values), default=0)
    w = _width_for(bits)
    off = 1 << (8 * w - 1)
    buf = b"".join((v + off).to_bytes(w, "little") for v in values)
    return PackedSeries(buf, len(values), w, bits)


def pack_int64(arr: np.ndarray) -> PackedSeries:
    """Vectorized packing of small integer coefficients."""
    arr = np.ascontiguousarray(arr, dtype="<i8")
    slots = arr.view(np.uint8).reshape(-1, 8).copy()
    slots[:, 7] ^= 0x80
    m = int(np.abs(arr).max()) if arr.size else 0
    return tighten(PackedSeries(slots.tobytes(), arr.shape[0], 8, m.bit_length()))


def _slots(ps: PackedSeries) -> np.ndarray:
    return np.frombuffer(ps.buf, dtype=np.uint8).reshape(ps.n, ps.width)


def rewidth(ps: PackedSeries, w: int) -> PackedSeries:
    """Same coefficients in slots of ``w`` bytes (sign extension / truncation)."""
    if w == ps.width:
        return ps
    a = _slots(ps)
    out = np.empty((ps.n, w), dtype=np.uint8)
    k = min(w, ps.width)
    out[:, :k] = a[:, :k]
    if w > ps.width:
        neg = a[:, -1] < 0x80
        out[:, k - 1] ^= 0x80
        out[:, k:] = np.where(neg, 0xFF, 0x00).astype(np.uint8)[:, None]
        out[:, -1] ^= 0x80
    else:
        out[:, -1] ^= 0x80
    return PackedSeries(out.tobytes(), ps.n, w, min(ps.bits, 8 * w - 1))


def tighten(ps: PackedSeries) -> PackedSeries:
    """Drop high slot bytes that only carry sign extension."""
    if ps.n == 0:
        return ps
    a = _slots(ps).copy()
    a[:, -1] ^= 0x80
    neg = a[:, -1] >= 0x80
    ext = np.where(neg, 0xFF, 0x00).astype(np.uint8)
    w = ps.width
    while w > 1:
        top, below = a[:, w - 1], a[:, w - 2]
        if np.array_equal(top, ext) and np.array_equal(below >= 0x80, neg):
            w -= 1
        else:
            break
    if w == ps.width:
        return ps
    return rewidth(ps, w)


def _to_mpz(ps: PackedSeries):
    return gmpy2.mpz.from_bytes(ps.buf, "little") - _bias(ps.n, ps.width)


def _from_mpz(value, n: int, w: int, bits: int) -> PackedSeries:
    nbits = 8 * w * n
    low = gmpy2.f_mod_2exp(value, nbits)
    low = gmpy2.f_mod_2exp(low + _bias(n, w), nbits)
    return PackedSeries(low.to_bytes(n * w, "little"), n, w, bits)


def truncate(ps: PackedSeries, n: int) -> PackedSeries:
    n = min(n, ps.n)
    return PackedSeries(ps.buf[: n * ps.width], n, ps.width, ps.bits)


def mul(a: PackedSeries, b: PackedSeries, n: int | None = None) -> PackedSeries:
    """Truncated product of two series (exact)."""
    n = min(a.n, b.n) if n is None else min(n, a.n + b.n - 1)
    bits = a.bits + b.bits + max(1, min(a.n, b.n)).bit_length()
    w = _width_for(bits)
    A = _to_mpz(rewidth(truncate(a, n), w))
    if a is b:
        C = A * A
    else:
        C = A * _to_mpz(rewidth(truncate(b, n), w))
    del A
    return tighten(_from_mpz(C, n, w, bits))


def lincomb(terms, n: int | None = None) -> PackedSeries:
    """``sum(coef * series)`` for integer coefficients."""
    n = min(ps.n for _, ps in terms) if n is None else n
    bits = max(abs(c).bit_length() + ps.bits for c, ps in terms) + len(terms).bit_length()
    w = _width_for(bits)
    total = gmpy2.mpz(0)
    for c, ps in terms:
        total += c * _to_mpz(rewidth(truncate(ps, n), w))
    return tighten(_from_mpz(total, n, w, bits))


def shift(ps: PackedSeries, k: int, n: int | None = None) -> PackedSeries:
    """Multiply by ``q**k`` and keep ``n`` terms."""
    n = ps.n + k if n is None else n
    zero = (b"\x00" * (ps.width - 1) + b"\x80") * k
    buf = (zero + ps.buf)[: n * ps.width]
    return PackedSeries(buf, n, ps.width, ps.bits)


def _residues(ps: PackedSeries, d: int) -> np.ndarray:
    """Each coefficient modulo ``d`` (vectorized over the slot bytes)."""
    a = _slots(ps).copy()
    a[:, -1] ^= 0x80
    neg = a[:, -1] >= 0x80
    acc = np.zeros(ps.n, dtype=np.int64)
    mult = 1
    for j in range(ps.width):
        acc = (acc + a[:, j].astype(np.int64) * mult) % d
        mult = (mult * 256) % d
    wrap = pow(2, 8 * ps.width, d)
    acc[neg] = (acc[neg] - wrap) % d
    return acc


def exact_div(ps: PackedSeries, d: int) -> PackedSeries:
    """Divide every coefficient by ``d``; raises if any is not divisible."""
    bad = np.flatnonzero(_residues(ps, d))
    if bad.size:
        raise IdentityViolation(f"coefficient {int(bad[0])} not divisible by {d}")
    q = _to_mpz(ps) // d
    return tighten(_from_mpz(q, ps.n, ps.width, ps.bits))


def unpack_ints(ps: PackedSeries, start: int = 0, stop: int | None = None) -> list[int]:
    stop = ps.n if stop is None else min(stop, ps.n)
    w, off = ps.width, 1 << (8 * ps.width - 1)
    mv = memoryview(ps.buf)
    return [int.from_bytes(mv[i * w : (i + 1) * w], "little") - off for i in range(start, stop)]


def unpack_float(ps: PackedSeries) -> np.ndarray:
    """Coefficients as float64, correctly signed, relative error ~1e-16."""
    a = _slots(ps).copy()
    a[:, -1] ^= 0x80
    neg = a[:, -1] >= 0x80
    a[neg] = ~a[neg]
    mag = np.zeros(ps.n, dtype=np.float64)
    for j in range(ps.width - 1, -1, -1):
        mag = mag * 256.0 + a[:, j]
    mag[neg] += 1.0
    mag[neg] *= -1.0
    return mag


# ---------------------------------------------------------------------------
# forms


@dataclass(frozen=True)
class EigenformSpec:
    """The normalized Hecke eigenform spanning ``S_k(SL_2(Z))``."""

    weight: int
    level: int = 1
    label: str = ""

    def __post_init__(self):
        if self.weight not in CUSP_WEIGHTS:
            raise UsageError(
                f"weight {self.weight} is not one of the one-dimensional level-1 cusp weights {CUSP_WEIGHTS}"
            )
        if self.level != 1:
            raise UsageError("only level 1 is supported")
        if not self.label:
            object.__setattr__(self, "label", "delta" if self.weight == 12 else f"k{self.weight}")

    @classmethod
    def parse(cls, name: str) -> "EigenformSpec":
        key = name.strip().lower()
        if key in ("delta", "k12", "12"):
            return cls(12)
        if key.startswith("k") and key[1:].isdigit():
            return cls(int(key[1:]))
        if key.isdigit():
            return cls(int(key))
        raise UsageError(f"unknown form {name!r}; use delta or k16, k18, k20, k22, k26")


@dataclass(frozen=True)
class IntegerQExpansion:
    """Exact coefficients ``a(0..limit)`` of a form (``a(0) = 0`` for cusp forms)."""

    spec: EigenformSpec | str
    limit: int
    series: PackedSeries = field(repr=False)

    @property
    def weight(self) -> int:
        if isinstance(self.spec, EigenformSpec):
            return self.spec.weight
        return {"E4": 4, "E6": 6}[self.spec]

    def __getitem__(self, n: int) -> int:
        if not 0 <= n <= self.limit:
            raise IndexError(n)
        return unpack_ints(self.series, n, n + 1)[0]

    @property
    def coeffs(self) -> list[int]:
        """``a(1..limit)`` as Python ints."""
        return unpack_ints(self.series, 1)

    def to_float(self) -> np.ndarray:
        return unpack_float(self.series)


def _check_n(N: int, cap: int, route: str):
    if N < 1:
        raise UsageError("need N >= 1")
    if N > cap:
        raise CapacityError(f"{route} route limited to N <= {cap} (asked {N})")


def divisor_power_sums(k: int, N: int) -> list[int]:
    """Exact ``sigma_k(n)`` for ``0 <= n <= N`` (``sigma_k(0)`` set to 0)."""
    spf = build_spf(max(N, 2)).spf.tolist()
    sig = [0] * (N + 1)
    if N >= 1:
        sig[1] = 1
    for n in range(2, N + 1):
        p = spf[n]
        m = n // p
        if m % p == 0:
            pe = p
            while m % p == 0:
                m //= p
                pe *= p
            if m == 1:
                sig[n] = sig[n // p] + n**k
            else:
                sig[n] = sig[pe] * sig[m]
        elif m == 1:
            sig[n] = 1 + n**k
        else:
            sig[n] = sig[p] * sig[m]
    return sig


@lru_cache(maxsize=4)
def _eisenstein(k: int, N: int) -> PackedSeries:
    const = {4: 240, 6: -504}[k]
    sig = divisor_power_sums(k - 1, N)
    sig[0] = 1
    return pack_ints([1] + [const * s for s in sig[1:]])


def eisenstein_series(k: int, N: int) -> IntegerQExpansion:
    """``E_4 = 1 + 240 sum sigma_3(n) q^n`` or ``E_6 = 1 - 504 sum sigma_5(n) q^n``."""
    if k not in (4, 6):
        raise UsageError("only E4 and E6 are provided")
    _check_n(N, config.EISENSTEIN_MAX_N, "Eisenstein")
    return IntegerQExpansion(f"E{k}", N, _eisenstein(k, N + 1))


@lru_cache(maxsize=4)
def _eisenstein_products(N: int) -> dict:
    n = N + 1
    e4, e6 = _eisenstein(4, n), _eisenstein(6, n)
    e4sq = mul(e4, e4)
    e4cube = mul(e4sq, e4)
    e6sq = mul(e6, e6)
    delta = exact_div(lincomb([(1, e4cube), (-1, e6sq)]), 1728)
    return {"E4": e4, "E6": e6, "E4^2": e4sq, "Delta": delta}


def delta_eisenstein(N: int) -> PackedSeries:
    """``(E4**3 - E6**2) / 1728`` truncated to ``q^0..q^N``."""
    _check_n(N, config.EISENSTEIN_MAX_N, "Eisenstein")
    return _eisenstein_products(N)["Delta"]


def jacobi_cube(n: int) -> np.ndarray:
    """Coefficients of ``prod (1 - q^m)^3 = sum (-1)^j (2j+1) q^(j(j+1)/2)`` below ``q^n``."""
    out = np.zeros(n, dtype=np.int64)
    j = 0
    while j * (j + 1) // 2 < n:
        out[j * (j + 1) // 2] = (-1) ** j * (2 * j + 1)
        j += 1
    return out


def delta_eta(N: int) -> PackedSeries:
    """``q prod (1 - q^m)^24`` via three exact squarings of the Jacobi cube."""
    _check_n(N, config.ETA_MAX_N, "eta-product")
    s = pack_int64(jacobi_cube(N))
    for _ in range(3):
        s = mul(s, s)
    return shift(s, 1, N + 1)


def delta_pentagonal(N: int) -> list[int]:
    """``tau(0..N)`` from Euler's pentagonal series and the power recurrence.

    With ``P = prod(1 - q^m)`` (sparse by the pentagonal number theorem)
    and ``F = P**24``, ``n F_n = sum_k (25 k - n) P_k F_{n-k}``.
    """
    if N < 1:
        raise UsageError("need N >= 1")
    n_max = N - 1
    ks, signs = [], []
    j = 1
    while True:
        added = False
        for g in (j * (3 * j - 1) // 2, j * (3 * j + 1) // 2):
            if g <= n_max:
                ks.append(g)
                signs.append(-1 if j % 2 else 1)
                added = True
        if not added:
            break
        j += 1
    order = np.argsort(ks)
    ks = np.asarray(ks, dtype=np.int64)[order]
    signs = np.asarray(signs, dtype=np.int64)[order]
    F = np.zeros(n_max + 1, dtype=object)
    F[0] = 1
    for n in range(1, n_max + 1):
        m = int(np.searchsorted(ks, n, side="right"))
        k = ks[:m]
        w = ((25 * k - n) * signs[:m]).astype(object)
        total = np.dot(w, F[n - k]) if m else 0
        q, r = divmod(int(total), n)
        if r:
            raise IdentityViolation(f"pentagonal recurrence not integral at n={n}")
        F[n] = q
    return [0] + [int(x) for x in F]


@lru_cache(maxsize=4)
def _eigenform(weight: int, N: int, method: str) -> PackedSeries:
    if weight == 12:
        return delta_eta(N) if method == "eta" else delta_eisenstein(N)
    if method == "eta":
        raise UsageError("the eta-product route only produces Delta (weight 12)")
    _check_n(N, config.EISENSTEIN_MAX_N, "Eisenstein")
    pr = _eisenstein_products(N)
    delta, e4, e6, e4sq = pr["Delta"], pr["E4"], pr["E6"], pr["E4^2"]
    other = {
        16: e4,
        18: e6,
        20: e4sq,
        22: mul(e4, e6),
        26: mul(e4sq, e6),
    }[weight]
    return mul(delta, other)


def integer_q_expansion(spec: EigenformSpec, N: int, method: str = "auto") -> IntegerQExpansion:
    """Exact coefficients of the normalized eigenform of weight ``spec.weight``.

    ``method`` is ``"eisenstein"`` (products of E4, E6 and Delta),
    ``"eta"`` (weight 12 only, ``q prod(1-q^n)^24``) or ``"auto"``, which
    picks Eisenstein up to the configured cap and eta beyond it.
    """
    if method == "auto":
        method = "eisenstein" if N <= config.EISENSTEIN_MAX_N or spec.weight != 12 else "eta"
    if method not in ("eisenstein", "eta"):
        raise UsageError(f"unknown method {method!r}")
    series = _eigenform(spec.weight, int(N), method)
    if series.n != N + 1:
        series = truncate(series, N + 1)
    exp = IntegerQExpansion(spec, int(N), series)
    if exp[1] != 1:
        raise IdentityViolation(f"a(1) = {exp[1]} for weight {spec.weight}")
    return exp


def hecke_relation_defects(exp: IntegerQExpansion, bound: int) -> list[tuple[int, int]]:
    """Pairs ``(m, n)``, ``mn <= bound``, where the exact Hecke relation fails.

    ``a(m) a(n) = sum_{d | (m, n)} d^(k-1) a(mn/d^2)``.
    """
    if bound > exp.limit:
        raise UsageError("bound exceeds expansion limit")
    a = [0] + exp.coeffs[:bound]
    k1 = exp.weight - 1
    bad = []
    for m in range(1, bound + 1):
        am = a[m]
        for n in range(m, bound // m + 1):
            g = math.gcd(m, n)
            if g == 1:
                rhs = a[m * n]
            else:
                mn = m * n
                rhs = sum(d**k1 * a[mn // (d * d)] for d in range(1, g + 1) if g % d == 0)
            if am * a[n] != rhs:
                bad.append((m, n))
    return bad
