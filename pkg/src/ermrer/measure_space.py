"""Model spaces, reference measures and the generalized relative entropy.

Every measure on the model space is stored as a finite collection of atom
weights.  Counting, probability and custom measures are exact; the Lebesgue
measure is approximated by a quadrature grid with equal cell volumes.  A
single countably infinite family (``CountableMeasure``) is kept symbolic and
is only ever summed lazily by :mod:`ermrer.partition`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import DomainError, InvalidArgumentError

#: Tolerance on the total mass used to decide that a measure is a probability.
PROBABILITY_TOL = 1e-9
#: Tolerance on the sum of an :class:`AtomDistribution`.
NORMALIZATION_TOL = 1e-12

KINDS = ("probability", "counting", "quadrature", "custom", "countable-analytic")


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ModelSpace:
    """A finite indexed set of candidate models, optionally with coordinates."""

    atoms: tuple
    coords: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(self.atoms) < 1:
            raise InvalidArgumentError("a model space needs at least one atom")
        if len(set(self.atoms)) != len(self.atoms):
            raise InvalidArgumentError("atom identifiers must be unique")
        if self.coords is not None:
            c = np.atleast_2d(np.asarray(self.coords, dtype=float))
            if c.shape[0] != len(self.atoms):
                raise InvalidArgumentError("one coordinate vector per atom is required")
            object.__setattr__(self, "coords", _frozen(c))

    @classmethod
    def from_coords(cls, coords) -> "ModelSpace":
        c = np.asarray(coords, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        return cls(atoms=tuple(range(c.shape[0])), coords=c)

    @classmethod
    def indexed(cls, m: int) -> "ModelSpace":
        return cls(atoms=tuple(range(m)))

    @property
    def size(self) -> int:
        return len(self.atoms)

    @property
    def d(self) -> Optional[int]:
        return None if self.coords is None else self.coords.shape[1]


@dataclass(frozen=True)
class ReferenceMeasure:
    """A sigma-finite measure on a finite model space, given by atom weights.

    Parameters
    ----------
    weights : array_like
        Nonnegative finite mass of each atom; at least one must be positive.
    kind : str
        One of ``probability``, ``counting``, ``quadrature`` or ``custom``.
    coords : array_like, optional
        Coordinates of the atoms (recorded for quadrature grids).
    cell_volume : float, optional
        Common cell volume of a quadrature grid.
    """

    weights: np.ndarray
    kind: str = "custom"
    coords: Optional[np.ndarray] = None
    cell_volume: Optional[float] = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise InvalidArgumentError("weights must be a nonempty vector")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise InvalidArgumentError("weights must be finite and nonnegative")
        if not np.any(w > 0):
            raise InvalidArgumentError("the support of a reference measure cannot be empty")
        if self.kind not in KINDS or self.kind == "countable-analytic":
            raise InvalidArgumentError(f"unsupported kind for finite atoms: {self.kind!r}")
        if self.kind == "probability" and abs(w.sum() - 1.0) > PROBABILITY_TOL:
            raise InvalidArgumentError("probability measure must have total mass 1")
        if self.kind == "counting" and not np.all((w == 0) | (w == 1)):
            raise InvalidArgumentError("counting measure weights must be 0 or 1")
        object.__setattr__(self, "weights", _frozen(w))
        if self.coords is not None:
            c = np.asarray(self.coords, dtype=float)
            if c.ndim == 1:
                c = c[:, None]
            if c.shape[0] != w.size:
                raise InvalidArgumentError("one coordinate vector per atom is required")
            object.__setattr__(self, "coords", _frozen(c))

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @property
    def is_probability(self) -> bool:
        return abs(self.total_mass - 1.0) <= PROBABILITY_TOL

    @property
    def support(self) -> np.ndarray:
        return self.weights > 0

    def normalized(self) -> "AtomDistribution":
        return AtomDistribution(self.weights / self.total_mass)

    def scaled(self, c: float) -> "ReferenceMeasure":
        return ReferenceMeasure(self.weights * c, kind="custom", coords=self.coords)

    @classmethod
    def from_distribution(cls, P: "AtomDistribution") -> "ReferenceMeasure":
        return cls(P.probs, kind="probability")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "weights": self.weights.tolist(),
            "coords": None if self.coords is None else self.coords.tolist(),
            "cell_volume": self.cell_volume,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ReferenceMeasure":
        kind = doc.get("kind", "custom")
        if kind == "counting" and "weights" not in doc:
            return counting_measure(int(doc["m"]))
        if kind == "quadrature" and "weights" not in doc:
            return quadrature_lebesgue(doc["coords"], float(doc["cell_volume"]))
        if kind == "probability" and "weights" not in doc and "m" in doc:
            m = int(doc["m"])
            return cls(np.full(m, 1.0 / m), kind="probability")
        if "weights" not in doc:
            raise InvalidArgumentError("measure document needs 'weights'")
        return cls(doc["weights"], kind=kind, coords=doc.get("coords"),
                   cell_volume=doc.get("cell_volume"))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def loads(cls, text: str) -> "ReferenceMeasure":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class AtomDistribution:
    """A probability measure on the atoms of a finite model space."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise InvalidArgumentError("probabilities must be a nonempty vector")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise InvalidArgumentError("probabilities must be finite and nonnegative")
        if abs(p.sum() - 1.0) > NORMALIZATION_TOL * max(1, p.size):
            raise InvalidArgumentError(f"probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "probs", _frozen(p))

    @property
    def size(self) -> int:
        return self.probs.size

    @property
    def support(self) -> np.ndarray:
        return self.probs > 0

    def mass(self, index_set) -> float:
        """Probability of a set of atom indices (or a boolean mask)."""
        idx = np.asarray(index_set)
        if idx.dtype == bool:
            return float(self.probs[idx].sum())
        return float(self.probs[idx.astype(int)].sum()) if idx.size else 0.0

    @classmethod
    def from_weights(cls, w) -> "AtomDistribution":
        w = np.asarray(w, dtype=float)
        return cls(w / w.sum())

    @classmethod
    def point_mass(cls, m: int, i: int) -> "AtomDistribution":
        p = np.zeros(m)
        p[i] = 1.0
        return cls(p)


@dataclass(frozen=True)
class CountableMeasure:
    """A countably infinite atom family indexed by k = 0, 1, 2, ...

    ``weight`` and ``risk`` are vectorized callables mapping integer arrays of
    indices to the measure of each atom and the empirical risk at that atom.
    Only the partition module evaluates such a family, by lazy truncation.
    """

    weight: Callable[[np.ndarray], np.ndarray]
    risk: Callable[[np.ndarray], np.ndarray]
    name: str = "countable"
    kind: str = field(default="countable-analytic", init=False)

    def log_terms(self, k, t: float) -> np.ndarray:
        """log(weight(k)) + t * risk(k), with zero weights mapped to -inf."""
        k = np.asarray(k, dtype=float)
        w = np.asarray(self.weight(k), dtype=float)
        L = np.asarray(self.risk(k), dtype=float)
        with np.errstate(divide="ignore"):
            out = np.log(w) + _tilt(t, L)
        return out

    def truncate(self, n: int):
        """Finite restriction to the first ``n`` atoms as (measure, risk values)."""
        k = np.arange(n, dtype=float)
        return (ReferenceMeasure(np.asarray(self.weight(k), dtype=float), kind="custom"),
                np.asarray(self.risk(k), dtype=float))


def counting_log_risk_family() -> CountableMeasure:
    """Counting measure on the nonnegative integers with risk log(1 + k)."""
    return CountableMeasure(weight=np.ones_like, risk=np.log1p, name="counting, L(k)=log(1+k)")


def _tilt(t: float, L: np.ndarray) -> np.ndarray:
    """t * L with the conventions 0 * inf = 0 and (t<0) * inf = -inf."""
    L = np.asarray(L)
    if not np.issubdtype(L.dtype, np.floating):
        L = L.astype(float)
    if t == 0:
        return np.zeros_like(L)
    with np.errstate(invalid="ignore"):
        return t * L


MeasureLike = Union[ReferenceMeasure, AtomDistribution, np.ndarray, Sequence[float]]


def weights_of(x: MeasureLike) -> np.ndarray:
    if isinstance(x, ReferenceMeasure):
        return x.weights
    if isinstance(x, AtomDistribution):
        return x.probs
    return np.asarray(x, dtype=float)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def counting_measure(m: int) -> ReferenceMeasure:
    """Counting measure on ``m`` atoms."""
    if int(m) != m or m < 1:
        raise InvalidArgumentError("counting measure needs m >= 1")
    return ReferenceMeasure(np.ones(int(m)), kind="counting")


def probability_measure(weights) -> ReferenceMeasure:
    w = np.asarray(weights, dtype=float)
    if w.sum() <= 0:
        raise InvalidArgumentError("weights must carry positive mass")
    return ReferenceMeasure(w / w.sum(), kind="probability")


def quadrature_lebesgue(grid, cell_volume: float) -> ReferenceMeasure:
    """Lebesgue measure discretized on ``grid`` with equal cell volumes."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise InvalidArgumentError("quadrature grid cannot be empty")
    if not (cell_volume > 0) or not np.isfinite(cell_volume):
        raise InvalidArgumentError("cell volume must be a positive real")
    if grid.ndim == 1:
        grid = grid[:, None]
    return ReferenceMeasure(np.full(grid.shape[0], float(cell_volume)), kind="quadrature",
                            coords=grid, cell_volume=float(cell_volume))


def _check_sizes(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise InvalidArgumentError(f"atom count mismatch: {a.size} vs {b.size}")


def is_absolutely_continuous(P: MeasureLike, Q: MeasureLike) -> bool:
    """True iff no atom carries P-mass where Q vanishes."""
    p, q = weights_of(P), weights_of(Q)
    _check_sizes(p, q)
    return not bool(np.any((p > 0) & (q == 0)))


def kl_or_inf(p, q) -> float:
    """sum p log(p/q) over p > 0; +inf if p is not absolutely continuous w.r.t. q."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    _check_sizes(p, q)
    pos = p > 0
    if np.any(q[pos] == 0):
        return float("inf")
    pp, qq = p[pos], q[pos]
    return float(np.sum(pp * (np.log(pp) - np.log(qq))))


def generalized_relative_entropy(P: MeasureLike, Q: MeasureLike) -> float:
    """Relative entropy of P with respect to a sigma-finite measure Q.

    Unlike the probability case the result can be negative when Q is not a
    probability measure (a Gaussian against Lebesgue measure, for instance).

    Raises
    ------
    DomainError
        If P charges an atom where Q has zero mass.
    """
    p, q = weights_of(P), weights_of(Q)
    _check_sizes(p, q)
    if not is_absolutely_continuous(p, q):
        raise DomainError("P is not absolutely continuous with respect to Q")
    return kl_or_inf(p, q)


def mix(P1: AtomDistribution, P2: AtomDistribution, w: float) -> AtomDistribution:
    """Convex combination ``w * P1 + (1 - w) * P2``."""
    if not 0.0 <= w <= 1.0:
        raise InvalidArgumentError("mixing weight must lie in [0, 1]")
    _check_sizes(P1.probs, P2.probs)
    return AtomDistribution(w * P1.probs + (1.0 - w) * P2.probs)
