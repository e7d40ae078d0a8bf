"""Probabilistic model for the square-free restricted correlation of two coefficient sequences.

Local expectations at each prime, their Euler product (singular series),
the predicted size of the restricted correlation sum, the Sato-Tate
mean-value exponents and a least-squares fit of those exponents from
computed partial sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import IdentityViolation, ModelViolation, UsageError
from .primes import build_spf, mobius_table

CHECKPOINTS = (10**2, 10**3, 10**4, 10**5)
LOCAL_RATIO_CONSTANT = 25.0


def local_expectations(p: int, a_pi: float, a_phi: float) -> tuple[float, float, float]:
    """``(E X_p, E Y_p, E X_p Y_p)`` for ``a_pi = |lambda_pi(p)|`` and ``a_phi = |lambda_phi(p)|``.

    With ``u = 1/p - 1/p^2``: ``E X_p = 1 + u (a_pi - 1)``,
    ``E Y_p = 1 + u (a_phi - 1)`` and ``E X_p Y_p = 1 + u (a_pi + a_phi - 2)``.
    """
    u = 1.0 / p - 1.0 / (p * p)
    return 1 + u * (a_pi - 1), 1 + u * (a_phi - 1), 1 + u * (a_pi + a_phi - 2)


def local_ratios(ps: np.ndarray, a_pi: np.ndarray, a_phi: np.ndarray) -> np.ndarray:
    """Vectorized ``E(X_p Y_p) / (E(X_p) E(Y_p))``."""
    pf = np.asarray(ps, dtype=np.float64)
    u = 1 / pf - 1 / pf**2
    ex, ey, exy = 1 + u * (a_pi - 1), 1 + u * (a_phi - 1), 1 + u * (a_pi + a_phi - 2)
    bad = np.flatnonzero((ex <= 0) | (ey <= 0) | (exy <= 0))
    if bad.size:
        p = int(pf[bad[0]])
        raise ModelViolation(f"non-positive local expectation at p={p}")
    return exy / (ex * ey)


@dataclass
class SingularSeriesResult:
    prime_cut: int
    checkpoints: dict
    tail_bound: float
    value: float
    tail_bounds: dict = field(default_factory=dict)

    @property
    def uncertainty(self) -> float:
        return self.tail_bound

    def cauchy_ok(self) -> bool:
        """Each checkpoint lies within the tail bound of every earlier one."""
        cps = sorted(self.checkpoints)
        return all(
            abs(self.checkpoints[a] - self.checkpoints[b]) <= self.tail_bounds[a]
            for i, a in enumerate(cps) for b in cps[i + 1:]
        )


def _tail_bound(value: float, P0: int) -> float:
    """Bound on ``|S - S(P0)|`` from ``|ratio - 1| <= 25/p^2`` and ``sum_{n>P0} n^-2 < 1/P0``."""
    eps = LOCAL_RATIO_CONSTANT / P0**2
    s = LOCAL_RATIO_CONSTANT / P0 / (1 - eps)
    return abs(value) * math.expm1(s)


def singular_series(pi_table, phi_table, P0: int) -> SingularSeriesResult:
    """Euler product of the local ratios over ``p <= P0`` with checkpoints and tail bound."""
    if P0 < 100:
        raise UsageError("prime cut must be at least 100")
    pi_table.require(P0)
    phi_table.require(P0)
    ps = build_spf(P0).primes()
    ratios = local_ratios(ps, np.abs(pi_table.values[ps]), np.abs(phi_table.values[ps]))
    logs = np.cumsum(np.log(ratios))
    cuts = sorted({c for c in CHECKPOINTS if c <= P0} | {P0})
    checkpoints, bounds = {}, {}
    for c in cuts:
        k = int(np.searchsorted(ps, c, side="right"))
        checkpoints[c] = math.exp(float(logs[k - 1]))
        bounds[c] = _tail_bound(checkpoints[c], c)
    return SingularSeriesResult(P0, checkpoints, bounds[P0], checkpoints[P0], bounds)


def squarefree_abs_sums(table, X: int, mu=None) -> np.ndarray:
    """Cumulative sums ``Q(x) = sum_{n<=x} |mu(n) a(n)|`` for ``x = 0..X``."""
    table.require(X)
    if mu is None:
        mu = mobius_table(build_spf(max(X, 2)))
    vals = np.abs(np.asarray(table.values[: X + 1])) * (mu[: X + 1] != 0)
    vals[0] = 0.0
    return np.cumsum(vals)


def predicted_correlation(pi_table, phi_table, sseries: SingularSeriesResult, X: int) -> float:
    """``S * Q_pi(X) * Q_phi(X) / X`` with ``Q(X) = sum_{n<=X} |mu(n) lambda(n)|``."""
    X = int(X)
    if X < 1:
        raise UsageError("X must be positive")
    mu = mobius_table(build_spf(max(X, 2)))
    q_pi = squarefree_abs_sums(pi_table, X, mu)[X]
    q_phi = squarefree_abs_sums(phi_table, X, mu)[X]
    return sseries.value * q_pi * q_phi / X


def restricted_correlation(pi_table, phi_table, X: int) -> float:
    """``sum_{n<=X} |mu(n) lambda_pi(n) mu(n+1) lambda_phi(n+1)|``."""
    X = int(X)
    pi_table.require(X)
    phi_table.require(X + 1)
    mu = mobius_table(build_spf(X + 1))
    n = np.arange(1, X + 1)
    terms = np.abs(mu[n] * pi_table.values[n] * mu[n + 1] * phi_table.values[n + 1])
    return float(np.sum(terms))


# ---------------------------------------------------------------------------
# Sato-Tate exponents


@dataclass(frozen=True)
class SatoTateExponent:
    r: int
    closed: float
    quadrature: float

    @property
    def difference(self) -> float:
        return abs(self.closed - self.quadrature)


def delta_r_closed(r: int) -> float:
    """``1 - 4(r+1) / (r(r+2) pi) * cot(pi / (2(r+1)))``."""
    return 1 - 4 * (r + 1) / (r * (r + 2) * math.pi) / math.tan(math.pi / (2 * (r + 1)))


def delta_r_quadrature(r: int) -> float:
    """``1 - (2/pi) int_0^pi |sin((r+1) t)| sin t dt`` with the range split at the zeros of ``sin((r+1) t)``."""
    k = r + 1
    total = 0.0
    for j in range(k):
        sign = 1.0 if j % 2 == 0 else -1.0
        val, _ = integrate.quad(lambda t: sign * math.sin(k * t) * math.sin(t),
                                j * math.pi / k, (j + 1) * math.pi / k, epsabs=1e-15, epsrel=1e-13)
        total += val
    return 1 - 2 / math.pi * total


def delta_r(r: int, method: str = "both", tol: float = 1e-10) -> SatoTateExponent:
    """The exponent ``delta_r`` by both routes; raises if they disagree beyond ``tol``."""
    if not 1 <= r <= 100:
        raise UsageError("r must be in 1..100")
    if method not in ("both", "closed", "quadrature"):
        raise UsageError(f"unknown method {method!r}")
    res = SatoTateExponent(r, delta_r_closed(r), delta_r_quadrature(r))
    if res.difference > tol:
        raise IdentityViolation(f"delta_{r}: closed {res.closed} vs quadrature {res.quadrature}")
    return res


DELTA_LIMIT = 1 - 8 / math.pi**2


# ---------------------------------------------------------------------------
# mean-value exponent fit


@dataclass
class WirsingFit:
    delta: float
    c: float
    residual: float
    xs: list
    sums: list


def wirsing_fit_sums(xs, sums) -> WirsingFit:
    """Least squares for ``log(sum/X) = log c - delta log log X``."""
    xs = [int(x) for x in xs]
    if len(set(xs)) < 2:
        raise UsageError("degenerate design: need at least two distinct X")
    X = np.array(xs, dtype=np.float64)
    y = np.log(np.asarray(sums, dtype=np.float64) / X)
    A = np.column_stack([np.ones_like(X), -np.log(np.log(X))])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.linalg.norm(A @ coef - y))
    return WirsingFit(float(coef[1]), math.exp(coef[0]), resid, xs, [float(s) for s in sums])


def wirsing_fit(abs_table, sample_xs, require_span: bool = True) -> WirsingFit:
    """Fit ``sum_{n<=X} |a(n)| = c X / (log X)^delta`` over ``sample_xs``.

    ``abs_table`` is any table with ``values`` (1-indexed); absolute values
    are taken here.  The sample must have at least four points spanning three
    decades unless ``require_span`` is off.
    """
    xs = sorted(int(x) for x in sample_xs)
    if len(set(xs)) < 2:
        raise UsageError("degenerate design: need at least two distinct X")
    if require_span and (len(xs) < 4 or xs[-1] < 1000 * xs[0]):
        raise UsageError("need at least 4 sample points spanning 3 decades")
    if xs[0] < 3:
        raise UsageError("sample X must be at least 3")
    abs_table.require(xs[-1])
    vals = np.abs(np.asarray(abs_table.values[1 : xs[-1] + 1]))
    csum = np.concatenate([[0.0], np.cumsum(vals)])
    return wirsing_fit_sums(xs, [csum[x] for x in xs])
