"""Independent reference computations used by the tests.

Everything here is written with plain Python floats and loops, sharing no
code with the package, so that agreement is meaningful.
"""

import math


# two-atom model: weight q on risk 0, weight 1 - q on risk 1
def ex1_k0(q, lam):
    return math.log(q + math.exp(-1.0 / lam) * (1.0 - q))


def ex1_k1(q, lam):
    e = math.exp(-1.0 / lam)
    return e * (1.0 - q) / (q + e * (1.0 - q))


def ex1_k2(q, lam):
    e = math.exp(-1.0 / lam)
    return q * (1.0 - q) * e / (q + e * (1.0 - q)) ** 2


def ex1_k3(q, lam):
    e = math.exp(-1.0 / lam)
    s = q + e * (1.0 - q)
    return ex1_k2(q, lam) * (q - (1.0 - q) * e) / s


def ex1_k2_peak_lambda(q):
    """Factor maximizing the posterior variance, defined for q < 1/2."""
    return 1.0 / math.log((1.0 - q) / q)


def gibbs(q, L, lam):
    """Posterior by direct exponentiation (fine for moderate lam)."""
    w = [qi * math.exp(-li / lam) if qi > 0 and li != math.inf else 0.0
         for qi, li in zip(q, L)]
    s = sum(w)
    return [wi / s for wi in w]


def log_partition(q, L, t):
    return math.log(sum(qi * math.exp(t * li) for qi, li in zip(q, L) if qi > 0))


def kl(p, q):
    total = 0.0
    for pi, qi in zip(p, q):
        if pi > 0:
            total += pi * math.log(pi / qi)
    return total


def expect(p, L):
    return sum(pi * li for pi, li in zip(p, L) if pi > 0)


def bisect(f, lo, hi, iters=200):
    """Root of a function with f(lo) > 0 > f(hi)."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def series_partial(t, n):
    """Partial sum of (1 + k)^t for k < n."""
    return sum((1.0 + k) ** t for k in range(n))
