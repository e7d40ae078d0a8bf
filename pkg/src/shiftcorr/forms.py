"""Normalized Hecke eigenvalue tables, Satake angles and lifted coefficient tables.

The exact integer side lives in :mod:`shiftcorr.qexpansion`; everything here
is double precision.  Tables are 1-indexed: ``values[n]`` is the value at
``n`` and ``values[0]`` is an unused zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BoundViolation, UsageError
from .primes import SmallestPrimeFactorTable, build_spf, fill_multiplicative, prime_powers, tau_table
from .qexpansion import CUSP_WEIGHTS, EigenformSpec, IntegerQExpansion, integer_q_expansion

__all__ = [
    "CUSP_WEIGHTS",
    "EigenformSpec",
    "IntegerQExpansion",
    "CoefficientTable",
    "SatakeAngleTable",
    "integer_q_expansion",
    "normalize",
    "eigenvalue_table",
    "deligne_violations",
    "kim_sarnak_violations",
    "hecke_prime_power",
    "satake_angles",
    "sym_power_table",
    "rs_square_table",
    "prime_power_expansion",
]

KINDS = ("eigenvalue", "sym_power", "rs_square", "multiplicative", "maass")

#: allowed excess over 2 for |lambda(p)| before Deligne is declared violated
RAMANUJAN_SLACK = 1e-9


@dataclass(frozen=True)
class CoefficientTable:
    """Real multiplicative coefficients ``v(1..limit)`` with provenance."""

    limit: int
    values: np.ndarray = field(repr=False)
    kind: str = "eigenvalue"
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.shape != (self.limit + 1,):
            raise UsageError(f"values must have shape ({self.limit + 1},), got {self.values.shape}")
        if self.kind not in KINDS:
            raise UsageError(f"unknown table kind {self.kind!r}")

    @property
    def label(self) -> str:
        return self.source.get("label", self.kind)

    @property
    def holomorphic(self) -> bool:
        return self.kind == "eigenvalue"

    def __getitem__(self, n):
        return self.values[n]

    def truncated(self, N: int) -> "CoefficientTable":
        from .errors import TableTooShort

        if N > self.limit:
            raise TableTooShort(f"table {self.label} covers n <= {self.limit}, need {N}")
        return CoefficientTable(N, self.values[: N + 1], self.kind, dict(self.source))

    def require(self, N: int):
        """Raise :class:`TableTooShort` unless the table covers ``n <= N``."""
        from .errors import TableTooShort

        if N > self.limit:
            raise TableTooShort(f"table {self.label} covers n <= {self.limit}, need {N}")


@dataclass(frozen=True)
class SatakeAngleTable:
    """Angles ``theta_p`` in ``[0, pi]`` with ``2 cos(theta_p) = lambda(p)`` for primes ``p <= limit``."""

    limit: int
    primes: np.ndarray = field(repr=False)
    angles: np.ndarray = field(repr=False)
    label: str = ""

    def angle(self, p: int) -> float:
        i = int(np.searchsorted(self.primes, p))
        if i >= len(self.primes) or self.primes[i] != p:
            raise UsageError(f"{p} is not a prime <= {self.limit}")
        return float(self.angles[i])


def normalize(exp: IntegerQExpansion, *, check: bool = True) -> CoefficientTable:
    """``lambda(n) = a(n) / n^((k-1)/2)`` with the Deligne bound checked.

    Raises :class:`BoundViolation` if ``|lambda(n)| > tau(n)`` anywhere.
    """
    if not isinstance(exp.spec, EigenformSpec):
        raise UsageError("normalize needs an eigenform expansion")
    N, k = exp.limit, exp.weight
    a = exp.to_float()
    n = np.arange(N + 1, dtype=np.float64)
    n[0] = 1.0
    scale = n ** ((k - 2) // 2) * np.sqrt(n)
    values = a / scale
    values[0] = 0.0
    if check and N >= 2:
        tau = tau_table(build_spf(N))
        bad = np.flatnonzero(np.abs(values[1:]) > tau[1:] * (1 + 1e-12)) + 1
        if bad.size:
            m = int(bad[0])
            raise BoundViolation(f"|lambda({m})| = {abs(values[m])} exceeds tau({m}) = {tau[m]}")
    source = {"label": exp.spec.label, "weight": k, "construction": "integer q-expansion"}
    return CoefficientTable(N, values, "eigenvalue", source)


def eigenvalue_table(spec: EigenformSpec | str, N: int, method: str = "auto") -> CoefficientTable:
    """Build the normalized table of ``spec`` directly (no caching)."""
    if isinstance(spec, str):
        spec = EigenformSpec.parse(spec)
    return normalize(integer_q_expansion(spec, N, method))


def hecke_prime_power(lam_p, j: int):
    """``lambda(p^j)`` from ``lambda(p)`` by the Hecke recursion.

    ``lambda(p^(j+1)) = lambda(p) lambda(p^j) - lambda(p^(j-1))``; equals
    ``sin((j+1) theta) / sin(theta)`` when ``lambda(p) = 2 cos(theta)``.
    Works elementwise on arrays.
    """
    if j < 0 or j > 64:
        raise UsageError("hecke_prime_power needs 0 <= j <= 64")
    prev = np.zeros_like(np.asarray(lam_p, dtype=np.float64))
    cur = np.ones_like(prev)
    for _ in range(j):
        prev, cur = cur, lam_p * cur - prev
    return cur if cur.ndim else float(cur)


def satake_angles(table: CoefficientTable) -> SatakeAngleTable:
    """Satake angles ``theta_p = arccos(lambda(p) / 2)`` for every prime in the table."""
    if table.kind not in ("eigenvalue", "maass"):
        raise UsageError("satake angles need a normalized eigenvalue table")
    primes = build_spf(max(table.limit, 2)).primes()
    primes = primes[primes <= table.limit]
    lam = table.values[primes]
    over = np.flatnonzero(np.abs(lam) > 2 + RAMANUJAN_SLACK)
    if over.size:
        p = int(primes[over[0]])
        raise BoundViolation(f"|lambda({p})| = {abs(lam[over[0]])} > 2; no real Satake angle")
    angles = np.arccos(np.clip(lam / 2, -1.0, 1.0))
    return SatakeAngleTable(table.limit, primes, angles, table.label)


def prime_power_expansion(params: np.ndarray, emax: int) -> np.ndarray:
    """Power-series coefficients of ``prod_j (1 - params[:, j] x)^(-1)`` up to ``x^emax``.

    ``params`` has shape ``(count, degree)``; the result has shape
    ``(count, emax + 1)`` and holds the complete homogeneous symmetric
    polynomials of each row.  Repeated or degenerate parameters need no
    special treatment.
    """
    count, degree = params.shape
    c = np.zeros((count, emax + 1), dtype=np.complex128)
    c[:, 0] = 1.0
    for j in range(degree):
        a = params[:, j]
        for e in range(1, emax + 1):
            c[:, e] += a * c[:, e - 1]
    return c


def _lifted_table(angles, N, offsets, kind, label, spf) -> CoefficientTable:
    """Materialize the multiplicative function with local parameters ``exp(i k theta_p)``."""
    if angles.limit < N:
        raise UsageError(f"angles cover primes <= {angles.limit}, need {N}")
    spf = spf if spf is not None else build_spf(max(N, 2))
    ns, ps, es = prime_powers(spf, N)
    out = np.zeros(N + 1, dtype=np.float64)
    idx = np.searchsorted(angles.primes, ps)
    theta = angles.angles[idx]
    emax = int(es.max()) if es.size else 0
    offsets = np.asarray(offsets, dtype=np.float64)
    resid = 0.0
    for e in range(1, emax + 1):
        # primes that still have an e-th power <= N, in the order of `es == e`
        sel = es == e
        th = theta[sel]
        params = np.exp(1j * np.outer(th, offsets))
        coef = prime_power_expansion(params, e)[:, e]
        if coef.size:
            resid = max(resid, float(np.abs(coef.imag).max()))
        out[ns[sel]] = coef.real
    if resid > 1e-9:
        from .errors import IdentityViolation

        raise IdentityViolation(f"imaginary residue {resid} in {kind} table")
    fill_multiplicative(out, spf)
    out[0] = 0.0
    source = {"label": label, "max_imag_residue": resid}
    return CoefficientTable(N, out, kind, source)


def sym_power_table(
    angles: SatakeAngleTable, r: int, N: int, spf: SmallestPrimeFactorTable | None = None, *, check: bool = True
) -> CoefficientTable:
    """Coefficients of the ``r``-th symmetric power lift.

    Local parameters at ``p`` are ``exp(i (r - 2j) theta_p)``, ``j = 0..r``.
    The bound ``|value(n)| <= tau_{r+1}(n)`` is verified when ``check``.
    """
    if not 1 <= r <= 16:
        raise UsageError("sym_power_table needs 1 <= r <= 16")
    offsets = [r - 2 * j for j in range(r + 1)]
    table = _lifted_table(angles, N, offsets, "sym_power", f"sym{r}({angles.label})", spf)
    table.source["r"] = r
    if check and N >= 2:
        env = tau_table(spf if spf is not None else build_spf(N), r + 1)
        bad = np.flatnonzero(np.abs(table.values[1:]) > env[1:] + 1e-6) + 1
        if bad.size:
            m = int(bad[0])
            raise BoundViolation(f"|sym{r}({m})| = {abs(table.values[m])} > tau_{r + 1}({m})")
    return table


def rs_square_table(
    angles: SatakeAngleTable, r: int, N: int, spf: SmallestPrimeFactorTable | None = None, *, check: bool = True
) -> CoefficientTable:
    """Coefficients of ``L(s, pi x pi~)`` for ``pi = sym^r``.

    Local parameters ``exp(2i (l - j) theta_p)`` for ``j, l = 0..r``.  When
    ``check`` is set, ``|lambda_pi(n)|^2 <= value(n) + 1e-6`` is verified.
    """
    if not 1 <= r <= 8:
        raise UsageError("rs_square_table needs 1 <= r <= 8")
    if N > 10**7:
        raise UsageError("rs_square_table needs N <= 10^7")
    spf = spf if spf is not None else build_spf(max(N, 2))
    offsets = [2 * (l - j) for j in range(r + 1) for l in range(r + 1)]
    table = _lifted_table(angles, N, offsets, "rs_square", f"rs{r}({angles.label})", spf)
    table.source["r"] = r
    if check:
        sym = sym_power_table(angles, r, N, spf, check=False)
        gap = sym.values**2 - table.values
        bad = np.flatnonzero(gap > 1e-6)
        if bad.size:
            m = int(bad[0])
            raise BoundViolation(f"|lambda_sym{r}({m})|^2 exceeds the Rankin-Selberg coefficient by {gap[m]}")
    return table


def deligne_violations(table: CoefficientTable, spf: SmallestPrimeFactorTable | None = None) -> np.ndarray:
    """Indices ``n`` with ``|v(n)| > tau(n)`` (empty for a correct holomorphic table)."""
    spf = spf if spf is not None else build_spf(max(table.limit, 2))
    tau = tau_table(spf)[: table.limit + 1]
    return np.flatnonzero(np.abs(table.values[1:]) > tau[1:] * (1 + 1e-12)) + 1


def kim_sarnak_violations(table: CoefficientTable, spf: SmallestPrimeFactorTable | None = None) -> np.ndarray:
    """Indices ``n`` with ``|v(n)| > n^(7/64) tau(n)``."""
    spf = spf if spf is not None else build_spf(max(table.limit, 2))
    tau = tau_table(spf)[: table.limit + 1]
    n = np.arange(1, table.limit + 1, dtype=np.float64)
    return np.flatnonzero(np.abs(table.values[1:]) > n ** (7 / 64) * tau[1:] * (1 + 1e-12)) + 1

