"""Gibbs posteriors: the unique solutions of relative-entropy regularized ERM.

For a reference measure Q, empirical risk L and regularization factor
lambda the minimizer of ``R(P) + lambda * D(P || Q)`` is the Gibbs posterior

    P*_i = Q_i exp(-K(-1/lambda) - L_i / lambda).

This module builds it, evaluates the objective, checks the exact identities
the solution satisfies, and solves the related composed, Type-II and
divergence-constrained problems.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, InfeasibleError, InvalidArgumentError
from .measure_space import (AtomDistribution, ReferenceMeasure, generalized_relative_entropy,
                            kl_or_inf, weights_of)
from .partition import _arrays, is_feasible, tilted_probs
from .risk_model import as_risk, expected_empirical_risk, is_separable

#: Smallest factor tried when pushing the constrained solution toward zero.
_MIN_FACTOR = 1e-300


def fingerprint(Q: ReferenceMeasure, risk) -> str:
    """Short digest of (Q, risk) used to tie a posterior to its inputs."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(Q.weights).tobytes())
    h.update(np.ascontiguousarray(as_risk(risk).values).tobytes())
    return h.hexdigest()[:16]


@dataclass(frozen=True)
class GibbsPosterior:
    """Solution at factor ``lam``; ``k0`` caches K(-1/lam) of the reference."""

    lam: float
    probs: AtomDistribution
    k0: float
    reference_fingerprint: str = ""

    @property
    def p(self) -> np.ndarray:
        return self.probs.probs

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "k0": self.k0, "probs": self.p.tolist()}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "GibbsPosterior":
        return cls(float(doc["lambda"]), AtomDistribution(doc["probs"]), float(doc["k0"]))


def _require_feasible(Q, risk, lam):
    try:
        finite = math.isfinite(float(lam))
    except (TypeError, ValueError):
        finite = False
    if not finite:
        raise DomainError(f"regularization factor must be a finite real, got {lam!r}")
    q, L = _arrays(Q, risk)
    if not np.any(q > 0):
        raise InvalidArgumentError("reference measure has empty support")
    if not is_feasible(Q, risk, lam):
        raise DomainError(f"lambda={lam} is outside the feasible set")
    return q, L


def solve_ermrer(Q: ReferenceMeasure, risk, lam: float) -> GibbsPosterior:
    """Gibbs posterior with atom probabilities proportional to Q_i exp(-L_i / lam)."""
    q, L = _require_feasible(Q, risk, lam)
    p, k0 = tilted_probs(q, L, -1.0 / lam)
    return GibbsPosterior(float(lam), AtomDistribution(p), k0, fingerprint(Q, risk))


def rn_derivative(post: GibbsPosterior, Q: ReferenceMeasure, i: int) -> float:
    """Density of the posterior with respect to Q at atom ``i``."""
    q = Q.weights
    if not 0 <= i < q.size:
        raise InvalidArgumentError(f"atom index {i} out of range")
    if q[i] <= 0:
        raise DomainError(f"atom {i} lies outside the support of Q")
    return float(post.p[i] / q[i])


def objective_value(P, Q: ReferenceMeasure, risk, lam: float) -> float:
    """R(P) + lam * D(P || Q)."""
    r = expected_empirical_risk(risk, P)
    d = generalized_relative_entropy(P, Q)
    return r + lam * d


class AgadirValues(NamedTuple):
    """Three expressions for the optimal objective value.

    ``second`` is None when it is undefined (Q charges an infinite risk).
    """

    first: float
    second: Optional[float]
    third: float


def agadir_check(Q: ReferenceMeasure, risk, lam: float) -> AgadirValues:
    """Evaluate both closed forms of the optimal objective and -lam K(-1/lam).

    The second expression uses Q with its own (possibly non-unit) mass and
    is divided by that mass, which makes it equal to -lam K(-1/lam) for any
    finite measure.
    """
    q, L = _require_feasible(Q, risk, lam)
    post = solve_ermrer(Q, risk, lam)
    p = post.p
    first = expected_empirical_risk(L, p) + lam * kl_or_inf(p, q)
    third = -lam * post.k0
    second = None
    sup = q > 0
    if np.all(np.isfinite(L[sup])):
        raw_risk = float(q[sup] @ L[sup])
        raw_div = float(q[sup] @ (np.log(q[sup]) - np.log(p[sup])))
        second = (raw_risk - lam * raw_div) / Q.total_mass
    return AgadirValues(first, second, third)


def jeffrey_gap(Q: ReferenceMeasure, risk, lam: float):
    """(R(Q) - R(P*), lam * (D(Q || P*) + D(P* || Q))) for a probability measure Q."""
    if not Q.is_probability:
        raise DomainError("the risk gap identity needs a probability reference measure")
    q, L = _require_feasible(Q, risk, lam)
    p = solve_ermrer(Q, risk, lam).p
    sup = q > 0
    if np.all(np.isfinite(L[sup])):
        # one signed sum, anchored at the minimum so a constant risk gives exactly 0
        lhs = float((q[sup] - p[sup]) @ (L[sup] - L[sup].min()))
    else:
        lhs = expected_empirical_risk(L, q) - expected_empirical_risk(L, p)
    rhs = lam * (kl_or_inf(q, p) + kl_or_inf(p, q))
    return lhs, rhs


def compose(Q: ReferenceMeasure, risk, lam: float, alpha: float) -> GibbsPosterior:
    """Solve again at factor ``alpha`` using the posterior at ``lam`` as reference.

    The result is reported relative to Q at the harmonic factor
    1 / (1/lam + 1/alpha).
    """
    if not alpha > 0:
        raise InvalidArgumentError("alpha must be positive")
    first = solve_ermrer(Q, risk, lam)
    ref = ReferenceMeasure(first.p, kind="probability")
    second = solve_ermrer(ref, risk, alpha)
    lam_eff = 1.0 / (1.0 / lam + 1.0 / alpha)
    return GibbsPosterior(lam_eff, second.probs, first.k0 + second.k0, fingerprint(Q, risk))


class TypeIISolution(NamedTuple):
    beta: float
    probs: AtomDistribution


def solve_type2(Q: ReferenceMeasure, risk, lam: float) -> TypeIISolution:
    """Solve sum_i Q_i lam / (beta + L_i) = 1 for beta and return Q_i lam / (beta + L_i).

    Raises
    ------
    InfeasibleError
        If no beta above max(0, -min L) solves the normalization equation.
    """
    if not lam > 0:
        raise InvalidArgumentError("lambda must be positive")
    q, L = _arrays(Q, risk)
    sup = (q > 0) & np.isfinite(L)
    if not np.any(sup):
        raise InfeasibleError("no supported atom has finite risk", supremum=0.0)
    qs, Ls = q[sup], L[sup]

    def residual(beta):
        return float(np.sum(qs * lam / (beta + Ls))) - 1.0

    lo = max(0.0, -float(Ls.min())) + 1e-15
    if residual(lo) <= 0:
        raise InfeasibleError("total mass too small for a positive normalizer",
                              supremum=residual(lo) + 1.0)
    hi = lam * Q.total_mass * (float(Ls.max()) + 1.0)
    while residual(hi) > 0:
        hi *= 2.0
    beta = brentq(residual, lo, hi, xtol=1e-300, rtol=8.9e-16, maxiter=500)
    probs = np.zeros_like(q)
    probs[sup] = qs * lam / (beta + Ls)
    if abs(probs.sum() - 1.0) > 1e-12:
        raise InfeasibleError(f"normalizer residual {probs.sum() - 1.0:.3g} above tolerance")
    return TypeIISolution(float(beta), AtomDistribution(probs))


def minimizer_mass(Q: ReferenceMeasure, risk, post: GibbsPosterior, tol: float = 1e-12) -> float:
    """Posterior mass of the supported atoms with the smallest risk."""
    q, L = _arrays(Q, risk)
    sup = (q > 0) & np.isfinite(L)
    dmin = L[sup].min()
    return float(post.p[sup & (L <= dmin + tol)].sum())


def constrained_solution(Q: ReferenceMeasure, risk, lam: float, c: float):
    """Factor ``omega`` in (0, lam] with D(P*_omega || P*_lam) = c, and P*_omega.

    The divergence grows from 0 at omega = lam toward -log P*_lam(minimizers)
    as omega tends to zero.

    Raises
    ------
    InfeasibleError
        If ``c`` is not below that supremum, or the risk is not separable and c > 0.
    """
    if not c >= 0:
        raise InvalidArgumentError("divergence target must be nonnegative")
    base = solve_ermrer(Q, risk, lam)
    if c == 0:
        return float(lam), base
    if not is_separable(risk, Q):
        raise InfeasibleError("risk is constant on the support; only c = 0 is reachable",
                              supremum=0.0)
    sup_value = -math.log(minimizer_mass(Q, risk, base))
    if c >= sup_value:
        raise InfeasibleError(f"target {c} is not below the supremum {sup_value}",
                              supremum=sup_value)

    def gap(u):
        return kl_or_inf(solve_ermrer(Q, risk, math.exp(u)).p, base.p) - c

    hi = math.log(lam)
    lo = hi
    while gap(lo) <= 0:
        lo -= math.log(2.0)
        if lo < math.log(_MIN_FACTOR):
            raise InfeasibleError("target divergence not reached at the smallest factor",
                                  supremum=sup_value)
    u = brentq(gap, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=500)
    omega = math.exp(u)
    post = solve_ermrer(Q, risk, omega)
    return omega, post


def sample(post: GibbsPosterior, seed: int, count: int) -> list:
    """``count`` i.i.d. atom indices drawn from the posterior with a private generator."""
    if count < 0:
        raise InvalidArgumentError("count must be nonnegative")
    rng = np.random.default_rng(seed)
    draws = rng.choice(post.p.size, size=int(count), p=post.p)
    return [int(i) for i in draws]


def probs_of(x) -> np.ndarray:
    """Atom probabilities of a posterior, distribution or raw vector."""
    if isinstance(x, GibbsPosterior):
        return x.p
    return weights_of(x)
