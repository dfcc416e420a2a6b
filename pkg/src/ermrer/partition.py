"""Log-partition function, feasibility set, cumulants and sub-Gaussianity.

For a reference measure Q and empirical risk L the log-partition function is

    K(t) = log sum_i Q_i exp(t L_i),

evaluated with a max-shifted log-sum-exp.  Its derivatives at t = -1/lambda
are the cumulants of the empirical risk when models are drawn from the Gibbs
posterior; they are computed as exact tilted moments, never by differencing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError, IndeterminateError, InvalidArgumentError
from .measure_space import CountableMeasure, ReferenceMeasure, _tilt
from .risk_model import as_risk

# Series test settings for countable families.
_SERIES_EXPONENTS = np.arange(10, 41)
_SERIES_MARGIN = 1e-3
_HEAD_TERMS = 2 ** 20

# Multistart grid for the sub-Gaussianity search: at least this many points,
# and at least this density per decade of |xi| when the horizon is long.
_BETA_STARTS = 32
_BETA_PER_DECADE = 16
_BETA_REFINE = 8


# ---------------------------------------------------------------------------
# finite-atom helpers
# ---------------------------------------------------------------------------

def _arrays(Q, risk):
    if not isinstance(Q, ReferenceMeasure):
        raise InvalidArgumentError("a finite ReferenceMeasure is required here; "
                                   "truncate countable families first")
    L = as_risk(risk).values
    if L.shape != Q.weights.shape:
        raise InvalidArgumentError(f"atom count mismatch: {Q.size} vs {L.size}")
    return Q.weights, L


def log_weights(q: np.ndarray, L: np.ndarray, t: float) -> np.ndarray:
    """log(q_i) + t L_i, with -inf for atoms that carry no tilted mass."""
    out = np.full(q.shape, -np.inf, dtype=q.dtype)
    pos = q > 0
    out[pos] = np.log(q[pos]) + _tilt(t, L[pos])
    return out


def _logsumexp(a: np.ndarray) -> float:
    if a.size == 0:
        return -math.inf
    m = np.max(a)
    if m == math.inf:
        return math.inf
    if m == -math.inf:
        return -math.inf
    return float(m + math.log(np.sum(np.exp(a - m))))


def tilted_probs(q: np.ndarray, L: np.ndarray, t: float):
    """Normalized exponentially tilted weights and the log-partition value."""
    lw = log_weights(q, L, t)
    k = _logsumexp(lw)
    if not math.isfinite(k):
        raise DomainError(f"log-partition is {k} at t={t}; no tilted measure exists")
    # normalizing the max-shifted weights keeps ties exactly equal
    w = np.exp(lw - lw.max())
    return w / w.sum(), k


# ---------------------------------------------------------------------------
# countable families
# ---------------------------------------------------------------------------

def _series_class(Q: CountableMeasure, t: float) -> str:
    """Classify sum_k exp(log_terms(k, t)) as converges/diverges/indeterminate.

    Uses the local power-law exponent p(N) = log(a_N / a_2N) / log 2 over a
    doubling schedule of N; geometric decay drives p(N) to infinity.
    """
    N = 2.0 ** _SERIES_EXPONENTS
    a = Q.log_terms(N, t)
    b = Q.log_terms(2 * N, t)
    if np.any(np.isposinf(a)) or np.any(np.isposinf(b)):
        return "diverges"
    if np.all(np.isneginf(b[-3:])):
        return "converges"
    p = (a - b) / math.log(2.0)
    last = p[-2:]
    if np.all(last > 1 + _SERIES_MARGIN):
        return "converges"
    if np.all(last < 1 - _SERIES_MARGIN):
        return "diverges"
    return "indeterminate"


def _countable_log_partition(Q: CountableMeasure, t: float) -> float:
    cls = _series_class(Q, t)
    if cls == "diverges":
        return math.inf
    if cls == "indeterminate":
        raise IndeterminateError(f"series test inconclusive at t={t}")
    head = _logsumexp(Q.log_terms(np.arange(_HEAD_TERMS), t))
    n0 = float(_HEAD_TERMS)
    a0, a1 = Q.log_terms(np.array([n0, 2 * n0]), t)
    if not np.isfinite(a0):
        return head
    p = (a0 - a1) / math.log(2.0)
    # integral tail estimate for a_k ~ a_N (k/N)^-p
    tail = a0 + math.log(n0) - math.log(p - 1.0) if p > 1 else math.inf
    return float(np.logaddexp(head, tail))


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def log_partition(Q, risk, t: float, dtype=None) -> float:
    """K(t) = log of the integral of exp(t L) against Q (may be +inf).

    Parameters
    ----------
    dtype : numpy floating type, optional
        Evaluate finite atom sums in this precision (``np.longdouble`` for
        extended precision) and return a scalar of that type.  Useful when
        K is differenced at small steps.
    """
    if isinstance(Q, CountableMeasure):
        return _countable_log_partition(Q, t)
    q, L = _arrays(Q, risk)
    if dtype is None:
        return _logsumexp(log_weights(q, L, t))
    t = dtype(t)
    lw = log_weights(q.astype(dtype), L.astype(dtype), t)
    m = lw.max()
    if not np.isfinite(m):
        return m
    return m + np.log(np.sum(np.exp(lw - m)))


@dataclass(frozen=True)
class FeasibleSet:
    """The set of regularization factors for which a Gibbs posterior exists.

    ``shape`` is one of ``empty``, ``all-positive-reals``, ``open-bounded`` or
    ``closed-bounded``; bounded shapes carry the boundary estimate ``b`` and
    the half-width ``b_tolerance`` of the bracket that contains it.
    """

    shape: str
    b: Optional[float] = None
    b_tolerance: Optional[float] = None

    @property
    def bracket(self):
        if self.b is None:
            return None
        return (self.b - self.b_tolerance, self.b + self.b_tolerance)

    def contains(self, lam: float) -> bool:
        if lam <= 0 or self.shape == "empty":
            return False
        if self.shape == "all-positive-reals":
            return True
        lo, hi = self.bracket
        if lam < lo:
            return True
        if lam > hi or (lam == hi and self.shape == "open-bounded"):
            return False
        raise IndeterminateError(f"lambda={lam} lies inside the boundary bracket", (lo, hi))


def _has_finite_support(q, L) -> bool:
    return bool(np.any((q > 0) & np.isfinite(L)))


def feasible_set(Q, risk=None, tolerance: float = 1e-2) -> FeasibleSet:
    """Bracket the feasibility set {lambda > 0 : K(-1/lambda) < inf}.

    Finite atom collections always give all positive reals (finite sums of
    finite terms), unless every supported atom has infinite risk.
    """
    if isinstance(Q, ReferenceMeasure):
        q, L = _arrays(Q, risk)
        if not _has_finite_support(q, L):
            return FeasibleSet("empty")
        return FeasibleSet("all-positive-reals")

    def converges(lam):
        return _series_class(Q, -1.0 / lam) == "converges"

    def diverges(lam):
        return _series_class(Q, -1.0 / lam) == "diverges"

    grid = 2.0 ** np.arange(-40, 41)
    conv = np.array([converges(g) for g in grid])
    if conv.all():
        return FeasibleSet("all-positive-reals")
    if not conv.any():
        return FeasibleSet("empty")
    j = int(np.argmin(conv))  # first non-convergent grid point
    if j == 0:
        return FeasibleSet("empty")

    def boundary(pred, lo, hi):
        # pred(lo) is False and pred(hi) is True; shrink in log scale
        for _ in range(200):
            if hi / lo - 1.0 < 1e-12:
                break
            mid = math.sqrt(lo * hi)
            if pred(mid):
                hi = mid
            else:
                lo = mid
        return lo, hi

    _, b_lo = boundary(lambda lam: not converges(lam), grid[j - 1], grid[j])
    hi_start = next((g for g in grid[j:] if diverges(g)), None)
    if hi_start is None:
        raise IndeterminateError("series never certified divergent", (b_lo, math.inf))
    lo_start = grid[j - 1]
    _, b_hi = boundary(diverges, lo_start, hi_start)
    half = 0.5 * (b_hi - b_lo)
    if half > tolerance:
        raise IndeterminateError("boundary bracket wider than requested", (b_lo, b_hi))
    return FeasibleSet("open-bounded", b=0.5 * (b_lo + b_hi), b_tolerance=half)


def is_feasible(Q, risk, lam: float) -> bool:
    """Whether K(-1/lambda) is finite, so that the ERM-RER problem has a solution."""
    if not lam > 0:
        return False
    if isinstance(Q, CountableMeasure):
        cls = _series_class(Q, -1.0 / lam)
        if cls == "indeterminate":
            raise IndeterminateError(f"cannot decide feasibility of lambda={lam}")
        return cls == "converges"
    q, L = _arrays(Q, risk)
    return _has_finite_support(q, L)


@dataclass(frozen=True)
class CumulantReport:
    """K(-1/lambda) and its first three derivatives at -1/lambda."""

    lam: float
    k0: float
    k1: float
    k2: float
    k3: float


def _moments(p, L):
    pos = p > 0
    pp, LL = p[pos], L[pos]
    # anchor at the smallest risk so a constant risk gives exact zeros
    lo = LL.min()
    k1 = float(lo + (pp @ (LL - lo)) / pp.sum())
    d = LL - k1
    return k1, float(pp @ d ** 2), float(pp @ d ** 3)


def cumulants_at(Q, risk, t: float):
    """(K, K', K'', K''') at an arbitrary point t, as tilted moments."""
    q, L = _arrays(Q, risk)
    p, k0 = tilted_probs(q, L, t)
    return (k0,) + _moments(p, L)


def cumulants(Q, risk, lam: float) -> CumulantReport:
    """Mean, variance and third central moment of the risk under the Gibbs posterior."""
    if not is_feasible(Q, risk, lam):
        raise DomainError(f"lambda={lam} is outside the feasible set")
    k0, k1, k2, k3 = cumulants_at(Q, risk, -1.0 / lam)
    return CumulantReport(lam, k0, k1, k2, k3)


def cgf(Q, risk, lam: float, t: float) -> float:
    """Cumulant generating function of the posterior risk: K(t - 1/lambda) - K(-1/lambda)."""
    if not is_feasible(Q, risk, lam):
        raise DomainError(f"lambda={lam} is outside the feasible set")
    return log_partition(Q, risk, t - 1.0 / lam) - log_partition(Q, risk, -1.0 / lam)


@dataclass(frozen=True)
class BetaEstimate:
    """Result of the sub-Gaussianity search.

    ``attained`` is False when the supremum is the limit at an open endpoint
    rather than a value taken at some interior point.
    """

    beta: float
    ceiling: float
    argmax: Optional[float]
    attained: bool


def _k2_at(q, L, xi):
    p, _ = tilted_probs(q, L, xi)
    return _moments(p, L)[1]


def _concentration_horizon(q, L, low_end: bool) -> float:
    """|xi| past which the tilt leaves under e^-30 of its mass off the extreme risk."""
    vals = np.unique(L)
    extreme = vals[0] if low_end else vals[-1]
    nxt = vals[1] if low_end else vals[-2]
    gap = abs(nxt - extreme)
    mass = q.sum()
    ext_mass = q[L == extreme].sum()
    log_h = math.log(math.log(mass / ext_mass) + 30.0) - math.log(gap)
    return math.exp(min(max(log_h, 0.0), math.log(1e300)))


def _sup_k2(q, L, horizon, sign):
    """Maximize K''(xi) for xi = sign * s, s in [1e-6, horizon], plus the limit at 0.

    A log-spaced multistart grid locates candidate peaks, each refined by a
    bounded scalar search between its grid neighbours.
    """
    decades = math.log10(horizon) + 6.0
    s = np.logspace(-6, math.log10(horizon), max(_BETA_STARTS, int(_BETA_PER_DECADE * decades)))
    xs = sign * s
    vals = np.array([_k2_at(q, L, x) for x in xs])
    best, arg, attained = vals.max(), float(xs[vals.argmax()]), True
    padded = np.concatenate(([-np.inf], vals, [-np.inf]))
    left, right = padded[:-2], padded[2:]
    # peaks only: flat stretches of equal values are not worth refining
    peak = (vals >= left) & (vals >= right) & ((vals > left) | (vals > right)) & (vals > 0)
    candidates = np.flatnonzero(peak)
    candidates = candidates[np.argsort(vals[candidates])[::-1][:_BETA_REFINE]]
    for j in candidates:
        lo_s = s[j - 1] if j > 0 else 0.0
        hi_s = s[j + 1] if j + 1 < len(xs) else s[j]
        if hi_s > lo_s:
            res = minimize_scalar(lambda u: -_k2_at(q, L, sign * u),
                                  bounds=(lo_s, hi_s), method="bounded",
                                  options={"xatol": 1e-12 * max(1.0, hi_s)})
            if -res.fun > best:
                best, arg, attained = -res.fun, float(sign * res.x), True
    at_zero = _k2_at(q, L, 0.0)
    if at_zero >= best:
        best, arg, attained = at_zero, 0.0, False
    return best, arg, attained


def subgaussian_beta_report(Q, risk, two_sided: bool = False) -> BetaEstimate:
    """Sub-Gaussianity parameter sup{sqrt(K''(xi)) : xi < 0} with diagnostics.

    With ``two_sided=True`` the supremum runs over every real xi instead.
    Unbounded supported risks (including any countable family) give +inf.
    """
    if isinstance(Q, CountableMeasure):
        return BetaEstimate(math.inf, math.inf, None, False)
    q, L = _arrays(Q, risk)
    sup = q > 0
    q, L = q[sup], L[sup]
    if np.any(np.isinf(L)):
        return BetaEstimate(math.inf, math.inf, None, False)
    ceiling = 0.5 * float(L.max() - L.min())
    if np.unique(L).size < 2:
        return BetaEstimate(0.0, 0.0, None, True)
    # shift for conditioning; variance is translation invariant
    L = L - L.min()
    best, arg, attained = _sup_k2(q, L, _concentration_horizon(q, L, True), -1.0)
    if two_sided:
        b2, a2, t2 = _sup_k2(q, L, _concentration_horizon(q, L, False), +1.0)
        if b2 > best:
            best, arg, attained = b2, a2, t2
    beta = min(math.sqrt(max(best, 0.0)), ceiling)
    return BetaEstimate(beta, ceiling, arg, attained)


def subgaussian_beta(Q, risk, two_sided: bool = False) -> float:
    return subgaussian_beta_report(Q, risk, two_sided).beta


def cumulant_sweep_csv(reports) -> str:
    lines = ["lambda,k0,k1,k2,k3"]
    for r in reports:
        lines.append(",".join("%.17g" % v for v in (r.lam, r.k0, r.k1, r.k2, r.k3)))
    return "\n".join(lines) + "\n"
