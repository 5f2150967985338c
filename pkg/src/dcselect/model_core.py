"""Problem data, hyperparameters, and constraint descriptions.

The regression model is

    y | theta, s2    ~ N(X theta, s2 I_n)
    theta | s2, d    ~ N(0, s2 * diag(d)^{-1})
    s2               ~ InvGamma(a0, b0)

so each entry ``d_j`` of the precision vector is the prior precision scale
of coefficient j: large ``d_j`` means strong shrinkage of ``theta_j``
toward zero.  ``ProblemInstance`` freezes the data together with the
sufficient statistics the solvers reuse every iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    MalformedPartitionError,
    NonFiniteEntryError,
    NonPositiveHyperparameterError,
    ValidationError,
    ZeroVarianceColumnError,
)

Structure = Literal["none", "disjoint-groups", "overlapping-groups", "score-monotone"]


@dataclass(frozen=True)
class BoxBounds:
    """Interval [lo, hi] with 0 < lo < hi for every precision entry."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (0.0 < self.lo < self.hi < np.inf):
            raise ValidationError(
                f"box bounds must satisfy 0 < lo < hi < inf, got [{self.lo}, {self.hi}]"
            )

    def contains(self, d: np.ndarray, tol: float = 1e-12) -> bool:
        return bool(np.all(d >= self.lo - tol) and np.all(d <= self.hi + tol))


DEFAULT_BOUNDS = BoxBounds(1e-4, 1e4)


@dataclass(frozen=True)
class ConstraintSpec:
    """Box bounds plus an optional structured-sparsity constraint.

    ``groups`` holds 0-based index arrays; for ``disjoint-groups`` they must
    partition range(p), for ``overlapping-groups`` they may overlap and need
    not cover every index.  ``scores`` drives the score-monotone constraint:
    d must be nondecreasing in the score, constant on exact score ties.
    """

    bounds: BoxBounds = DEFAULT_BOUNDS
    structure: Structure = "none"
    groups: tuple[tuple[int, ...], ...] = ()
    scores: np.ndarray | None = None
    alt_tol: float = 1e-8
    alt_max_sweeps: int = 500

    def __post_init__(self):
        if self.alt_tol <= 0 or self.alt_max_sweeps < 1:
            raise ValidationError("alternating-projection tolerance/sweeps must be positive")
        if self.structure in ("disjoint-groups", "overlapping-groups"):
            if not self.groups:
                raise MalformedPartitionError(f"{self.structure} requires groups")
            for g in self.groups:
                if len(g) == 0:
                    raise MalformedPartitionError("empty group")
        if self.structure == "score-monotone":
            if self.scores is None:
                raise ValidationError("score-monotone requires scores")
            object.__setattr__(self, "scores", np.asarray(self.scores, dtype=float))
            if not np.all(np.isfinite(self.scores)):
                raise NonFiniteEntryError("scores contain non-finite entries")

    def validate_for_dim(self, p: int) -> None:
        """Check group/score indices against a problem dimension."""
        if self.structure == "disjoint-groups":
            flat = [i for g in self.groups for i in g]
            if sorted(flat) != list(range(p)):
                raise MalformedPartitionError(
                    "disjoint groups must partition all coordinate indices exactly"
                )
        elif self.structure == "overlapping-groups":
            for g in self.groups:
                if any(i < 0 or i >= p for i in g):
                    raise MalformedPartitionError("group index out of range")
        elif self.structure == "score-monotone":
            if self.scores is None or len(self.scores) != p:
                raise DimensionMismatchError("scores length must equal dimension p")


@dataclass(frozen=True)
class ProblemInstance:
    """Immutable regression problem with cached sufficient statistics.

    ``gram`` caches X'X (p x p) when p <= n, else X X' (n x n); ``xty`` and
    ``yty`` are always cached.  ``identity`` marks X == I_n, enabling the
    O(n)-per-iteration closed forms used by the spatial application.
    """

    X: np.ndarray
    y: np.ndarray
    a0: float
    b0: float
    gram: np.ndarray = field(repr=False, default=None)
    xty: np.ndarray = field(repr=False, default=None)
    yty: float = 0.0
    identity: bool = False

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def wide(self) -> bool:
        """True in the p > n regime (gram holds X X')."""
        return self.p > self.n


def validate_precision(d: np.ndarray, p: int) -> np.ndarray:
    """Validate a precision vector: length p, strictly positive, finite."""
    d = np.asarray(d, dtype=float)
    if d.shape != (p,):
        raise DimensionMismatchError(f"precision vector has shape {d.shape}, expected ({p},)")
    if not np.all(np.isfinite(d)):
        raise NonFiniteEntryError("precision vector contains non-finite entries")
    if np.any(d <= 0.0):
        raise ValidationError("precision entries must be strictly positive")
    return d


def build_instance(X, y, a0: float, b0: float, identity: bool = False) -> ProblemInstance:
    """Validate inputs and cache sufficient statistics.

    Caches X'X when p <= n and X X' otherwise (the smaller Gram matrix,
    which is the one factorized per iteration), plus X'y and y'y.
    """
    X = np.ascontiguousarray(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2:
        raise DimensionMismatchError(f"X must be 2-d, got ndim={X.ndim}")
    n, p = X.shape
    if n < 1 or p < 1:
        raise DimensionMismatchError("X must have at least one row and one column")
    if y.shape != (n,):
        raise DimensionMismatchError(f"y has length {y.shape[0]}, expected {n}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteEntryError("non-finite entry in X")
    if not np.all(np.isfinite(y)):
        raise NonFiniteEntryError("non-finite entry in y")
    if not (a0 > 0 and np.isfinite(a0)):
        raise NonPositiveHyperparameterError(f"a0 must be > 0, got {a0}")
    if not (b0 > 0 and np.isfinite(b0)):
        raise NonPositiveHyperparameterError(f"b0 must be > 0, got {b0}")
    gram = X.T @ X if p <= n else X @ X.T
    return ProblemInstance(
        X=X,
        y=y,
        a0=float(a0),
        b0=float(b0),
        gram=gram,
        xty=X.T @ y,
        yty=float(y @ y),
        identity=bool(identity),
    )


def build_identity_instance(y, a0: float, b0: float) -> ProblemInstance:
    """Instance with X = I_n, used by the spatial radial-monotone model."""
    y = np.asarray(y, dtype=float).ravel()
    return build_instance(np.eye(len(y)), y, a0, b0, identity=True)


def standardize_columns(X) -> np.ndarray:
    """Center each column and scale to unit sample variance (ddof=1)."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 2:
        raise ValidationError("standardization needs at least two rows")
    sd = X.std(axis=0, ddof=1)
    bad = np.flatnonzero(sd == 0.0)
    if bad.size:
        raise ZeroVarianceColumnError(int(bad[0]))
    return (X - X.mean(axis=0)) / sd


def standardize_vector(y) -> np.ndarray:
    """Center a response vector and scale to unit sample variance."""
    y = np.asarray(y, dtype=float).ravel()
    if y.size < 2:
        raise ValidationError("standardization needs at least two entries")
    sd = y.std(ddof=1)
    if sd == 0.0:
        raise ZeroVarianceColumnError(0)
    return (y - y.mean()) / sd


def standardize(X, y) -> tuple[np.ndarray, np.ndarray]:
    """Standardize design columns and response to mean 0, variance 1."""
    return standardize_columns(X), standardize_vector(y)


def load_design_csv(path, header: bool = False) -> np.ndarray:
    """Read a numeric design matrix from CSV, one sample per row."""
    X = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    if not np.all(np.isfinite(X)):
        raise NonFiniteEntryError(f"non-finite entry in design file {path}")
    return X


def load_response_csv(path, header: bool = False) -> np.ndarray:
    """Read a single-column response vector from CSV."""
    y = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=1)
    if y.ndim != 1:
        raise DimensionMismatchError(f"response file {path} must have a single column")
    if not np.all(np.isfinite(y)):
        raise NonFiniteEntryError(f"non-finite entry in response file {path}")
    return y


def normalize_groups(groups: Sequence[Sequence[int]]) -> tuple[tuple[int, ...], ...]:
    """Canonicalize group index lists: sorted unique 0-based tuples."""
    out = []
    for g in groups:
        g = tuple(sorted(set(int(i) for i in g)))
        out.append(g)
    return tuple(out)
