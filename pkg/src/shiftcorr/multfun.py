"""Multiplicative functions from prime-power rules, and the two growth hypotheses.

A function is given by its values at prime powers (:class:`PrimePowerRule`)
and materialized over ``[1, N]`` with a smallest-prime-factor table.  Values
are complex so that ``tau_z`` with complex ``z`` needs no special casing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numba
import numpy as np

from .errors import UsageError
from .primes import (
    SmallestPrimeFactorTable,
    build_spf,
    fill_multiplicative,
    prime_powers,
    prime_reciprocal_sum,
    primes_between,
)

OVERFLOW = 1e300


@dataclass(frozen=True)
class PrimePowerRule:
    """Values ``f(p^e)`` of a multiplicative function.

    ``evaluator(p, e)`` is the scalar definition.  ``vectorized(ps, es)``,
    when given, must agree with it and is used for bulk materialization.
    ``envelope`` is ``("divisor", m)`` for rules with ``|f| <= tau_m``.
    """

    evaluator: Callable[[int, int], complex]
    label: str
    envelope: tuple | None = None
    vectorized: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = field(default=None, repr=False)

    def __call__(self, p: int, e: int) -> complex:
        return 1.0 if e == 0 else self.evaluator(p, e)

    def bulk(self, ps: np.ndarray, es: np.ndarray) -> np.ndarray:
        if self.vectorized is not None:
            return np.asarray(self.vectorized(ps, es), dtype=np.complex128)
        return np.array([self.evaluator(int(p), int(e)) for p, e in zip(ps, es)], dtype=np.complex128)


@dataclass(frozen=True)
class MultiplicativeTable:
    """Complex values ``f(1..limit)``; ``values[0]`` is an unused zero."""

    limit: int
    values: np.ndarray = field(repr=False)
    label: str
    provenance: tuple = ()
    overflow: bool = False

    def __getitem__(self, n):
        return self.values[n]

    @property
    def is_real(self) -> bool:
        return not np.any(self.values.imag)

    def require(self, N: int):
        from .errors import TableTooShort

        if N > self.limit:
            raise TableTooShort(f"{self.label} covers n <= {self.limit}, need {N}")


def materialize(rule: PrimePowerRule, N: int, spf: SmallestPrimeFactorTable | None = None) -> MultiplicativeTable:
    """``f(n) = prod f(p_i^e_i)`` for every ``n <= N``."""
    N = int(N)
    if N < 1:
        raise UsageError("materialize needs N >= 1")
    spf = spf if spf is not None else build_spf(max(N, 2))
    if spf.limit < N:
        raise UsageError(f"spf table covers {spf.limit} < N = {N}")
    out = np.zeros(N + 1, dtype=np.complex128)
    if N >= 2:
        ns, ps, es = prime_powers(spf, N)
        out[ns] = rule.bulk(ps, es)
    fill_multiplicative(out, spf)
    out[0] = 0
    big = bool(np.any(~np.isfinite(out)) or np.abs(out).max() > OVERFLOW)
    return MultiplicativeTable(N, out, rule.label, (rule.label,), big)


# ---------------------------------------------------------------------------
# standard rules


def _binomial_real(m: float, es: np.ndarray) -> np.ndarray:
    """``prod_{j<e} (m + j) / e!`` elementwise (complex ``m`` allowed)."""
    es = np.asarray(es)
    out = np.ones(es.shape, dtype=np.complex128)
    for j in range(int(es.max()) if es.size else 0):
        active = es > j
        out[active] *= (m + j) / (j + 1)
    return out


def moebius_rule() -> PrimePowerRule:
    return PrimePowerRule(
        lambda p, e: -1.0 if e == 1 else 0.0,
        "mu",
        ("divisor", 1),
        lambda ps, es: np.where(es == 1, -1.0, 0.0),
    )


def tau_m_rule(m: int) -> PrimePowerRule:
    """``tau_m(p^e) = C(m + e - 1, e)``."""
    if m < 1 or int(m) != m:
        raise UsageError("tau_m needs an integer m >= 1")
    m = int(m)
    return PrimePowerRule(
        lambda p, e: float(math.comb(m + e - 1, e)),
        "one" if m == 1 else f"tau_m:{m}",
        ("divisor", m),
        lambda ps, es: _binomial_real(m, es),
    )


def tau_z_rule(z: complex) -> PrimePowerRule:
    """``tau_z(p^e) = z (z + 1) ... (z + e - 1) / e!``."""
    z = complex(z)

    def scalar(p, e):
        v = 1.0 + 0j
        for j in range(e):
            v *= (z + j) / (j + 1)
        return v

    m = math.ceil(abs(z)) if abs(z) > 0 else 1
    return PrimePowerRule(scalar, f"tau_z:{_fmt_complex(z)}", ("divisor", m), lambda ps, es: _binomial_real(z, es))


def eigenvalue_power_rule(l: int, table) -> PrimePowerRule:
    """``f(p^e) = v(p^e)^l`` for a coefficient table ``v`` (``l = 1`` gives ``v`` itself)."""
    if l < 1 or int(l) != l:
        raise UsageError("eigenvalue_power needs an integer l >= 1")
    vals = table.values
    label = table.label if l == 1 else f"pow:{l}({table.label})"

    def scalar(p, e):
        n = p**e
        if n > table.limit:
            from .errors import TableTooShort

            raise TableTooShort(f"{table.label} does not reach {n}")
        return complex(vals[n] ** l)

    def bulk(ps, es):
        ns = ps**es
        if ns.size and ns.max() > table.limit:
            from .errors import TableTooShort

            raise TableTooShort(f"{table.label} covers n <= {table.limit}, need {int(ns.max())}")
        return vals[ns].astype(np.complex128) ** l

    env = None
    if table.kind == "eigenvalue":
        env = ("divisor", 2**l)
    return PrimePowerRule(scalar, label, env, bulk)


def standard_rule(kind: str, *args) -> PrimePowerRule:
    """Rule by name: ``moebius``, ``tau_m`` (m), ``tau_z`` (z), ``eigenvalue_power`` (l, table)."""
    if kind in ("moebius", "mu"):
        return moebius_rule()
    if kind == "one":
        return tau_m_rule(1)
    if kind == "tau_m":
        return tau_m_rule(*args)
    if kind == "tau_z":
        return tau_z_rule(*args)
    if kind == "eigenvalue_power":
        return eigenvalue_power_rule(*args)
    raise UsageError(f"unknown rule kind {kind!r}")


def table_function(table, label: str | None = None) -> MultiplicativeTable:
    """View a real :class:`~shiftcorr.forms.CoefficientTable` as a multiplicative table."""
    return MultiplicativeTable(table.limit, table.values.astype(np.complex128), label or table.label, (table.label,))


def pointwise_combine(a: MultiplicativeTable, b: MultiplicativeTable | None = None, op: str = "product") -> MultiplicativeTable:
    """``a * b`` (pointwise) or ``|a|``; both preserve multiplicativity."""
    if op == "abs":
        return MultiplicativeTable(a.limit, np.abs(a.values).astype(np.complex128), f"abs:{a.label}",
                                   a.provenance + ("abs",), a.overflow)
    if op != "product":
        raise UsageError(f"unknown op {op!r}")
    if b is None or a.limit != b.limit:
        raise UsageError("pointwise product needs two tables with equal limits")
    vals = a.values * b.values
    return MultiplicativeTable(a.limit, vals, f"{a.label}*{b.label}", a.provenance + b.provenance,
                               a.overflow or b.overflow)


def _fmt_complex(z: complex) -> str:
    return f"{z.real:g}{z.imag:+g}i"


# ---------------------------------------------------------------------------
# hypotheses


@dataclass
class HypothesisReport:
    """Ratios ``R(X)`` of a mean square against the hypothesised envelope.

    ``passed`` applies the bounded-ratio rule: over the upper half of the
    sampled ``X`` the largest ratio is at most twice the smallest.
    """

    hypothesis: str
    c: float
    gamma: float
    delta: float | None
    xs: list
    sums: list
    ratios: list
    passed: bool
    degenerate: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def rows(self):
        for i, X in enumerate(self.xs):
            yield {"X": X, "sum": self.sums[i], "ratio": self.ratios[i],
                   "degenerate": X in self.degenerate}


def _bounded_ratio(ratios: Sequence[float]) -> bool:
    upper = [r for r in ratios[len(ratios) // 2:] if math.isfinite(r)]
    if not upper:
        return False
    lo, hi = min(upper), max(upper)
    return lo > 0 and hi <= 2 * lo


def _check_xs(table: MultiplicativeTable, xs) -> list[int]:
    xs = sorted(int(x) for x in xs)
    if not xs or xs[0] < 3:
        raise UsageError("sample X values must be >= 3")
    table.require(xs[-1])
    return xs


def hypothesis_i_check(table: MultiplicativeTable, c: float, sample_xs) -> HypothesisReport:
    """``R(X) = sum_{n<=X} |f(n)|^2 / (X (log X)^c)`` at each sampled ``X``."""
    xs = _check_xs(table, sample_xs)
    sq = np.abs(table.values[: xs[-1] + 1]) ** 2
    sums = [float(sq[1 : X + 1].sum()) for X in xs]
    ratios = [s / (X * math.log(X) ** c) for s, X in zip(sums, xs)]
    return HypothesisReport("i", c, float("nan"), None, xs, sums, ratios, _bounded_ratio(ratios))


@numba.njit(cache=True)
def _unsifted_mask(spf, X, lo, hi):
    # True for n <= X with no prime factor in [lo, hi]
    out = np.ones(X + 1, dtype=np.bool_)
    out[0] = False
    for n in range(2, X + 1):
        m = n
        while m > 1:
            p = spf[m]
            if lo <= p <= hi:
                out[n] = False
                break
            while m % p == 0:
                m //= p
    return out


def unsifted_mask(spf: SmallestPrimeFactorTable, X: int, Y: float, Z: float) -> np.ndarray:
    """Boolean mask over ``0..X``: ``n`` has no prime factor in the closed interval ``[Y, Z]``."""
    if spf.limit < X:
        raise UsageError("spf table too short")
    lo, hi = math.ceil(Y), math.floor(Z)
    if hi < lo:
        out = np.ones(X + 1, dtype=bool)
        out[0] = False
        return out
    return _unsifted_mask(spf.spf, int(X), lo, hi)


def sifting_window(c: float, delta: float):
    """The sifting window ``[(log X)^(16(c + 2)), X^delta]`` as callables of ``X``."""
    if not 0 < delta < 1 / 22:
        raise UsageError("delta must lie in (0, 1/22)")
    return (lambda X: math.log(X) ** (16 * (c + 2))), (lambda X: X**delta)


def bksz_window(c: float, delta: float):
    """The window ``((H - 1)^2, K^2]`` through which the decomposition sees primes.

    ``H = (log X)^(8c + 16)`` and ``K = X^(delta / 2)``; squaring gives the
    same leading orders as :func:`sifting_window`.
    """
    if not 0 < delta < 1 / 22:
        raise UsageError("delta must lie in (0, 1/22)")
    return (lambda X: (math.log(X) ** (8 * c + 16) - 1) ** 2), (lambda X: X**delta)


def hypothesis_ii_check(
    table: MultiplicativeTable,
    Y: float | Callable[[float], float],
    Z: float | Callable[[float], float],
    gamma: float,
    sample_xs,
    spf: SmallestPrimeFactorTable | None = None,
    c: float = 0.0,
) -> HypothesisReport:
    """``R(X) = sum_{n<=X, (n, P(Y,Z))=1} |f(n)|^2 log X / (X (log log X)^gamma)``.

    ``Y`` and ``Z`` are numbers or functions of ``X``.  Numbers must satisfy
    ``2 <= Y < Z``.  When functions give ``Y(X) >= Z(X)`` the sifting set is
    empty for that ``X``; the sum is then unsifted and ``X`` is listed in
    ``degenerate``.
    """
    if not callable(Y) and not callable(Z):
        if not 2 <= Y < Z:
            raise UsageError(f"need 2 <= Y < Z, got Y={Y}, Z={Z}")
    xs = _check_xs(table, sample_xs)
    spf = spf if spf is not None else build_spf(max(xs[-1], 2))
    sq = np.abs(table.values[: xs[-1] + 1]) ** 2
    sums, ratios, degenerate = [], [], []
    for X in xs:
        y = Y(X) if callable(Y) else Y
        z = Z(X) if callable(Z) else Z
        y = max(y, 2.0)
        if y >= z:
            degenerate.append(X)
        mask = unsifted_mask(spf, X, y, z)
        s = float(np.where(mask, sq[: X + 1], 0.0).sum())
        sums.append(s)
        ratios.append(s * math.log(X) / (X * math.log(math.log(X)) ** gamma))
    notes = []
    if degenerate:
        notes.append("Y >= Z at some sampled X: sifting set empty there")
    return HypothesisReport("ii", c, gamma, None, xs, sums, ratios, _bounded_ratio(ratios), degenerate, notes)


def divisor_sifted_bound(X: float, m: int, Y: float, Z: float) -> float:
    """Shiu-type envelope ``X / log X * exp(m^2 sum_{p<=X, p not in [Y,Z]} 1/p)`` (constant 1)."""
    if not 2 <= Y < Z <= X:
        raise UsageError("need 2 <= Y < Z <= X")
    s = prime_reciprocal_sum(X, primes_between(Y, Z))
    return X / math.log(X) * math.exp(m * m * s)
