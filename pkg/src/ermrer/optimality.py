"""Level sets, optimality certificates and concentration of the Gibbs posterior."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple

import numpy as np

from .errors import ConvergenceError, InfeasibleError, InvalidArgumentError
from .gibbs import solve_ermrer
from .partition import _arrays, cumulants
from .risk_model import as_risk

#: Absolute tolerance grouping float-equal minima.
TIE_TOL = 1e-12
#: Step budget for the geometric shrink of the (delta, epsilon) solver.
MAX_SHRINK_STEPS = 200


def level_set(risk, delta: float) -> np.ndarray:
    """Indices of atoms with risk at most ``delta``."""
    return np.flatnonzero(as_risk(risk).values <= delta)


@dataclass(frozen=True)
class OptimalityReport:
    """Summary of where the risk is minimized and how Q sees those minimizers.

    ``rho_star`` is the smallest risk over all atoms and ``delta_star`` the
    smallest risk over atoms charged by Q.  ``lstar_atoms`` are the charged
    atoms at ``delta_star``; ``erm_solutions`` are all atoms at ``rho_star``.
    """

    rho_star: float
    delta_star: float
    lstar_atoms: np.ndarray
    erm_solutions: np.ndarray
    coherent: bool
    consistent: bool
    coherence_caveat: bool = False

    def to_dict(self) -> dict:
        return {
            "rho_star": self.rho_star,
            "delta_star": self.delta_star,
            "lstar_atoms": self.lstar_atoms.tolist(),
            "erm_solutions": self.erm_solutions.tolist(),
            "coherent": self.coherent,
            "consistent": self.consistent,
            "coherence_caveat": self.coherence_caveat,
        }


def analyze(Q, risk) -> OptimalityReport:
    """Compute rho*, delta*, the minimizing sets and the coherence flags."""
    q, L = _arrays(Q, risk)
    sup = q > 0
    if not np.any(sup):
        raise InvalidArgumentError("reference measure has empty support")
    rho = float(L.min())
    delta = float(L[sup].min())
    lstar = np.flatnonzero(sup & (L <= delta + TIE_TOL))
    erm = np.flatnonzero(L <= rho + TIE_TOL)
    coherent = bool(delta - rho <= TIE_TOL) if math.isfinite(delta) else delta == rho
    consistent = bool(q[lstar].sum() > 0)
    return OptimalityReport(rho, delta, lstar, erm, coherent, consistent,
                            coherence_caveat=(Q.kind == "quadrature"))


def expected_sublevel_set(Q, risk, lam: float) -> np.ndarray:
    """Atoms whose risk does not exceed the posterior expected risk at ``lam``.

    A relative slack of 1e-12 absorbs the rounding of the expectation, so
    the minimizers always belong to the set.
    """
    k1 = cumulants(Q, risk, lam).k1
    return level_set(risk, k1 + TIE_TOL * max(1.0, abs(k1)))


class ProfileRow(NamedTuple):
    lam: float
    k1: float
    k2: float
    k3: float
    n_size: int
    p_n: float
    p_lstar: float


@dataclass(frozen=True)
class ConcentrationProfile:
    """Rows along a descending grid and the results of the monotonicity checks.

    ``nested[j]`` compares rows j and j + 1; ``dominated[j]`` records
    P_{lam_j}(N_{j+1}) <= P_{lam_{j+1}}(N_{j+1}); ``gaps[j]`` is the
    difference of the two sides (nonnegative when the check passes).
    """

    rows: List[ProfileRow]
    nested: List[bool] = field(default_factory=list)
    dominated: List[bool] = field(default_factory=list)
    gaps: List[float] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(self.nested) and all(self.dominated)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("lambda,k1,k2,k3,n_size,p_n,p_lstar\n")
        for r in self.rows:
            buf.write("%.17g,%.17g,%.17g,%.17g,%d,%.17g,%.17g\n" % tuple(r))
        return buf.getvalue()


def concentration_profile(Q, risk, lambda_grid, tol: float = 1e-15) -> ConcentrationProfile:
    """Cumulants and expected-sublevel-set masses along a strictly descending grid."""
    grid = np.asarray(lambda_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(grid <= 0):
        raise InvalidArgumentError("lambda grid must be a nonempty vector of positive reals")
    if np.any(np.diff(grid) >= 0):
        raise InvalidArgumentError("lambda grid must be strictly decreasing")
    lstar = analyze(Q, risk).lstar_atoms
    rows, sets, posts = [], [], []
    for lam in grid:
        c = cumulants(Q, risk, lam)
        n_set = expected_sublevel_set(Q, risk, lam)
        post = solve_ermrer(Q, risk, lam)
        rows.append(ProfileRow(float(lam), c.k1, c.k2, c.k3, int(n_set.size),
                               post.probs.mass(n_set), post.probs.mass(lstar)))
        sets.append(set(n_set.tolist()))
        posts.append(post)
    nested, dominated, gaps = [], [], []
    for j in range(grid.size - 1):
        nxt = np.array(sorted(sets[j + 1]), dtype=int)
        nested.append(sets[j + 1] <= sets[j])
        gap = posts[j + 1].probs.mass(nxt) - posts[j].probs.mass(nxt)
        gaps.append(gap)
        dominated.append(gap >= -tol)
    return ConcentrationProfile(rows, nested, dominated, gaps)


class DeltaEpsilonResult(NamedTuple):
    """Factor found by the solver with its certificate P*_lam(L <= delta)."""

    lam: float
    probability: float
    k1: float


def solve_delta_epsilon(Q, risk, delta: float, epsilon: float,
                        lam0: float = 1.0) -> DeltaEpsilonResult:
    """Find lam whose posterior puts mass above 1 - epsilon on {L <= delta}.

    First the factor is reduced until the posterior expected risk is at most
    ``delta`` (bisection on the monotone expected risk), then it is halved
    until the probability certificate holds.

    Raises
    ------
    InfeasibleError
        If ``delta`` does not exceed delta*; this includes the band between
        rho* and delta* of a noncoherent reference, which is refused.
    ConvergenceError
        If the certificate still fails after the shrink budget.
    """
    if not 0.0 < epsilon < 1.0:
        raise InvalidArgumentError("epsilon must lie in (0, 1)")
    rep = analyze(Q, risk)
    if not delta > rep.delta_star:
        raise InfeasibleError(f"delta={delta} must exceed delta*={rep.delta_star}",
                              supremum=rep.delta_star)
    good = level_set(risk, delta)

    def k1(lam):
        return cumulants(Q, risk, lam).k1

    lam = float(lam0)
    if k1(lam) > delta:
        hi = lam
        lo = lam / 2.0
        steps = 0
        while k1(lo) > delta:
            hi, lo = lo, lo / 2.0
            steps += 1
            if steps > MAX_SHRINK_STEPS:
                raise ConvergenceError("expected risk never fell below delta")
        for _ in range(100):
            mid = math.sqrt(lo * hi)
            if mid in (lo, hi):
                break
            if k1(mid) <= delta:
                lo = mid
            else:
                hi = mid
        lam = lo
    for _ in range(MAX_SHRINK_STEPS + 1):
        p = solve_ermrer(Q, risk, lam).probs.mass(good)
        if p > 1.0 - epsilon:
            return DeltaEpsilonResult(lam, p, k1(lam))
        lam /= 2.0
    raise ConvergenceError(f"certificate not reached within {MAX_SHRINK_STEPS} halvings")

