"""Sensitivity of the expected risk and the generalization error of the Gibbs algorithm.

Datasets are drawn from a finite-support prior; each dataset induces its own
empirical risk and Gibbs posterior, and the prior-weighted mixture of those
posteriors (the barycenter) plays the role of the marginal over models.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .errors import DomainError, InvalidArgumentError
from .gibbs import solve_ermrer
from .measure_space import (NORMALIZATION_TOL, AtomDistribution, CountableMeasure,
                            is_absolutely_continuous, kl_or_inf, weights_of)
from .partition import is_feasible, subgaussian_beta
from .risk_model import (Dataset, LossSpec, as_risk, empirical_risk,
                         expected_empirical_risk)


@dataclass(frozen=True)
class DatasetPrior:
    """Finite-support probability measure over datasets, stored by their risks."""

    risks: tuple
    probs: np.ndarray

    def __post_init__(self):
        risks = tuple(as_risk(r) for r in self.risks)
        p = np.asarray(self.probs, dtype=float).reshape(-1)
        if not risks:
            raise InvalidArgumentError("a dataset prior needs at least one dataset")
        if p.size != len(risks):
            raise InvalidArgumentError("one probability per dataset is required")
        if np.any(p < 0) or abs(p.sum() - 1.0) > NORMALIZATION_TOL:
            raise InvalidArgumentError("dataset probabilities must be a distribution")
        if len({r.size for r in risks}) != 1:
            raise InvalidArgumentError("all risks must cover the same atoms")
        # exact normalization makes a one-dataset barycenter equal its posterior
        p = p / p.sum()
        p.setflags(write=False)
        object.__setattr__(self, "risks", risks)
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_datasets(cls, space, datasets: Sequence[Dataset], spec: LossSpec,
                      probs) -> "DatasetPrior":
        return cls(tuple(empirical_risk(space, d, spec) for d in datasets), probs)

    @classmethod
    def point_mass(cls, risk) -> "DatasetPrior":
        return cls((as_risk(risk),), np.ones(1))

    def support(self) -> List[int]:
        return [j for j, p in enumerate(self.probs) if p > 0]


def _jointly_feasible(Q, prior: DatasetPrior, lam: float) -> bool:
    return all(is_feasible(Q, prior.risks[j], lam) for j in prior.support())


def _posteriors(Q, prior, lam):
    return {j: solve_ermrer(Q, prior.risks[j], lam).p for j in prior.support()}


def barycenter(prior: DatasetPrior, Q, lam: float) -> AtomDistribution:
    """Prior-weighted mixture of the per-dataset Gibbs posteriors."""
    if not _jointly_feasible(Q, prior, lam):
        raise DomainError(f"lambda={lam} is infeasible for some dataset in the prior")
    posts = _posteriors(Q, prior, lam)
    mix = sum(prior.probs[j] * p for j, p in posts.items())
    return AtomDistribution(mix)


def sensitivity(Q, lam: float, risk_z, P) -> float:
    """R_z(P) - R_z(P*_z); +inf when lambda is outside the feasible set."""
    if not is_feasible(Q, risk_z, lam):
        return math.inf
    if isinstance(Q, CountableMeasure):
        raise InvalidArgumentError("sensitivity at a feasible factor needs finite atoms")
    p = weights_of(P)
    if not is_absolutely_continuous(p, Q):
        raise DomainError("P is not absolutely continuous with respect to Q")
    post = solve_ermrer(Q, risk_z, lam)
    return expected_empirical_risk(risk_z, p) - expected_empirical_risk(risk_z, post.p)


def sensitivity_identity_check(Q, lam: float, risk_z, P):
    """(direct sensitivity, lam * (D(P*||Q) + D(P||P*) - D(P||Q)))."""
    direct = sensitivity(Q, lam, risk_z, P)
    if not math.isfinite(direct):
        return direct, direct
    p = weights_of(P)
    q = weights_of(Q)
    post = solve_ermrer(Q, risk_z, lam).p
    rhs = lam * (kl_or_inf(post, q) + kl_or_inf(p, post) - kl_or_inf(p, q))
    return direct, rhs


def sensitivity_bound(Q, lam: float, risk_z, P, two_sided: bool = False) -> float:
    """sqrt(2 beta^2 D(P || P*)) with beta the sub-Gaussianity parameter of (Q, risk_z).

    ``two_sided=True`` takes beta as a supremum over all real tilts.
    """
    if not is_feasible(Q, risk_z, lam):
        return math.inf
    beta = subgaussian_beta(Q, risk_z, two_sided=two_sided)
    if not math.isfinite(beta):
        return math.inf
    post = solve_ermrer(Q, risk_z, lam).p
    return math.sqrt(2.0 * beta ** 2 * kl_or_inf(weights_of(P), post))


@dataclass(frozen=True)
class GeneralizationReport:
    """Generalization error, its information decomposition and its bound.

    ``closed_form`` is lam * (mutual_info + lautum_info), computed separately
    from ``gen_error`` so the two can be compared.
    """

    lam: float
    gen_error: float
    closed_form: float
    mutual_info: float
    lautum_info: float
    sigma_q: float
    lautum_bound: float

    @property
    def difference(self) -> float:
        if not (math.isfinite(self.gen_error) and math.isfinite(self.closed_form)):
            return math.nan
        return self.gen_error - self.closed_form

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "gen_error": self.gen_error,
            "closed_form": self.closed_form,
            "difference": self.difference,
            "mutual_info": self.mutual_info,
            "lautum_info": self.lautum_info,
            "sigma_q": self.sigma_q,
            "lautum_bound": self.lautum_bound,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def generalization_error(Q, lam: float, prior: DatasetPrior,
                         two_sided: bool = False) -> GeneralizationReport:
    """Generalization error by definition, with mutual and lautum information.

    An infeasible factor yields a report whose fields are all +inf.
    """
    if not _jointly_feasible(Q, prior, lam):
        inf = math.inf
        return GeneralizationReport(float(lam), inf, inf, inf, inf, inf, inf)
    posts = _posteriors(Q, prior, lam)
    bary = barycenter(prior, Q, lam).probs
    gen = 0.0
    mutual = 0.0
    lautum = 0.0
    sigma = 0.0
    for j, post in posts.items():
        w = prior.probs[j]
        L = prior.risks[j]
        # one signed sum instead of a difference of two expectations
        gen += w * float((bary - post) @ L.values)
        mutual += w * kl_or_inf(post, bary)
        lautum += w * kl_or_inf(bary, post)
        sigma = max(sigma, subgaussian_beta(Q, L, two_sided=two_sided))
    bound = math.inf if not math.isfinite(sigma) else math.sqrt(2.0 * sigma ** 2 * max(lautum, 0.0))
    return GeneralizationReport(float(lam), gen, lam * (mutual + lautum), mutual, lautum,
                                sigma, bound)


def expected_sensitivity(Q, lam: float, prior: DatasetPrior) -> float:
    """Prior average of the sensitivity when each posterior is replaced by the barycenter."""
    if not _jointly_feasible(Q, prior, lam):
        return math.inf
    bary = barycenter(prior, Q, lam)
    return float(sum(prior.probs[j] * sensitivity(Q, lam, prior.risks[j], bary)
                     for j in prior.support()))
