"""Datasets, losses and empirical risk functions on a finite model space."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidArgumentError
from .measure_space import AtomDistribution, ModelSpace, ReferenceMeasure, weights_of

#: Relative tolerance used when comparing risks computed from datasets.
SEPARABILITY_TOL = 1e-12


@dataclass(frozen=True)
class Dataset:
    """n labeled patterns; ``patterns`` has shape (n, p), ``labels`` shape (n,)."""

    patterns: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.patterns, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        y = np.asarray(self.labels, dtype=float).reshape(-1)
        if x.shape[0] < 1:
            raise InvalidArgumentError("a dataset needs at least one data point")
        if x.shape[0] != y.shape[0]:
            raise InvalidArgumentError("patterns and labels differ in length")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "patterns", x)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    @classmethod
    def from_csv(cls, source) -> "Dataset":
        """Read a delimited table with a header row; the last column is the label."""
        if hasattr(source, "read"):
            text = source.read()
        else:
            with open(source, newline="") as fh:
                text = fh.read()
        rows = list(csv.reader(io.StringIO(text)))
        if len(rows) < 2:
            raise InvalidArgumentError("dataset table needs a header and one row")
        body = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
        return cls(body[:, :-1], body[:, -1])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{j + 1}" for j in range(self.patterns.shape[1])] + ["y"])
        for x, y in zip(self.patterns, self.labels):
            w.writerow([repr(float(v)) for v in x] + [repr(float(y))])
        return buf.getvalue()


@dataclass(frozen=True)
class LossSpec:
    """A predictor ``f(theta, x)`` and a loss ``loss(y_hat, y)`` with ``loss(y, y) = 0``."""

    predictor: Callable[[np.ndarray, np.ndarray], float]
    loss: Callable[[float, float], float]


@dataclass(frozen=True)
class EmpiricalRisk:
    """Extended-real empirical risk, one value per model atom (``inf`` allowed)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.size == 0:
            raise InvalidArgumentError("empirical risk needs at least one value")
        if np.any(np.isnan(v)) or np.any(v < 0):
            raise InvalidArgumentError("risk values must lie in [0, +inf]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def size(self) -> int:
        return self.values.size

    def to_csv(self) -> str:
        lines = ["risk"] + ["%.17g" % v for v in self.values]
        return "\n".join(lines) + "\n"


def as_risk(risk) -> EmpiricalRisk:
    return risk if isinstance(risk, EmpiricalRisk) else EmpiricalRisk(risk)


# common predictors and losses

def linear_predictor(theta: np.ndarray, x: np.ndarray) -> float:
    """theta . x, with a trailing intercept when theta has one more entry than x."""
    theta = np.asarray(theta, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if theta.size == x.size + 1:
        return float(theta[:-1] @ x + theta[-1])
    return float(theta @ x)


def threshold_predictor(theta: np.ndarray, x: np.ndarray) -> float:
    return 1.0 if linear_predictor(theta, x) >= 0 else 0.0


def squared_loss(y_hat: float, y: float) -> float:
    return (y_hat - y) ** 2


def absolute_loss(y_hat: float, y: float) -> float:
    return abs(y_hat - y)


def zero_one_loss(y_hat: float, y: float) -> float:
    return 0.0 if y_hat == y else 1.0


PREDICTORS = {"linear": linear_predictor, "threshold": threshold_predictor}
LOSSES = {"squared": squared_loss, "absolute": absolute_loss, "zero_one": zero_one_loss}


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def empirical_risk(space: ModelSpace, ds: Dataset, spec: LossSpec) -> EmpiricalRisk:
    """Average loss of every model in ``space`` over the dataset."""
    if space.coords is None:
        raise InvalidArgumentError("empirical risk needs model coordinates")
    values = np.empty(space.size)
    for i, theta in enumerate(space.coords):
        total = 0.0
        for x, y in zip(ds.patterns, ds.labels):
            total += spec.loss(spec.predictor(theta, x), y)
        values[i] = total / ds.n
    return EmpiricalRisk(values)


def expected_empirical_risk(risk, P) -> float:
    """Integral of the empirical risk against P, with 0 * inf = 0."""
    L = as_risk(risk).values
    p = weights_of(P)
    if p.shape != L.shape:
        raise InvalidArgumentError(f"atom count mismatch: {p.size} vs {L.size}")
    pos = p > 0
    if np.any(np.isinf(L[pos])):
        return float("inf")
    return float(np.sum(p[pos] * L[pos]))


def is_separable(risk, Q) -> bool:
    """Whether the risk takes two distinct finite values on atoms charged by Q."""
    L = as_risk(risk).values
    q = weights_of(Q)
    if q.shape != L.shape:
        raise InvalidArgumentError(f"atom count mismatch: {q.size} vs {L.size}")
    vals = L[(q > 0) & np.isfinite(L)]
    if vals.size < 2:
        return False
    lo, hi = vals.min(), vals.max()
    return bool(hi - lo > SEPARABILITY_TOL * max(1.0, abs(hi)))
