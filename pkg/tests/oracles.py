"""Independent brute-force implementations used as test oracles."""

import math


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


def factor(n: int) -> dict:
    out, d = {}, 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def mobius(n: int) -> int:
    f = factor(n)
    if any(e > 1 for e in f.values()):
        return 0
    return -1 if len(f) % 2 else 1


def divisors(n: int) -> list:
    return [d for d in range(1, n + 1) if n % d == 0]


def tau_m(n: int, m: int) -> int:
    """Number of ordered m-tuples with product n, by recursion over divisors."""
    if m == 1:
        return 1
    return sum(tau_m(n // d, m - 1) for d in divisors(n))


def eratosthenes(n: int) -> list:
    flags = [True] * (n + 1)
    flags[0] = flags[1] = False
    for p in range(2, int(n**0.5) + 1):
        if flags[p]:
            for k in range(p * p, n + 1, p):
                flags[k] = False
    return [i for i, f in enumerate(flags) if f]


def delta_by_product(N: int) -> list:
    """Coefficients of q prod (1 - q^n)^24 up to q^N by naive polynomial multiplication."""
    poly = [0] * (N + 1)
    poly[1] = 1
    for n in range(1, N + 1):
        for _ in range(24):
            for i in range(N, n - 1, -1):
                poly[i] -= poly[i - n]
    return poly


def euler_phi(n: int) -> int:
    return sum(1 for k in range(1, n + 1) if math.gcd(k, n) == 1)
