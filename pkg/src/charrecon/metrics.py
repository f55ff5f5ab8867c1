"""Reconstruction distances and the closed-form linear-model solutions.

``distance(metric, x, h)`` takes the teacher vector first; the gradient is
always with respect to the second (student) argument.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, DimensionError, SingularMatrixError

NORM_EPS = 1e-12


class DistanceMetric(enum.Enum):
    D1 = "d1"          # Manhattan
    DSQRT2 = "dsqrt2"  # Euclidean
    D2 = "d2"          # squared error
    DINF = "dinf"      # l-infinity
    DCOS = "dcos"      # negative cosine

    def __str__(self):
        return self.value

    @classmethod
    def parse(cls, name):
        try:
            return cls(name.strip().lower())
        except ValueError:
            names = "|".join(m.value for m in cls)
            raise ValueError(f"unknown metric {name!r}; expected one of {names}") from None


def _as_metric(metric):
    return metric if isinstance(metric, DistanceMetric) else DistanceMetric.parse(metric)


def _check_pair(x, h):
    if x.shape != h.shape or x.ndim != 1:
        raise DimensionError(f"distance operands must be equal-length vectors, got {x.shape} and {h.shape}")


def _norms(x, h):
    nx = np.linalg.norm(x)
    nh = np.linalg.norm(h)
    if nx <= NORM_EPS or nh <= NORM_EPS:
        raise DegenerateInputError("cosine distance of a (near-)zero vector")
    return nx, nh


def distance(metric, x, h):
    metric = _as_metric(metric)
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    _check_pair(x, h)
    diff = h - x
    if metric is DistanceMetric.D1:
        return float(np.abs(diff).sum())
    if metric is DistanceMetric.D2:
        return float(diff @ diff)
    if metric is DistanceMetric.DSQRT2:
        return float(np.sqrt(diff @ diff))
    if metric is DistanceMetric.DINF:
        return float(np.abs(diff).max())
    nx, nh = _norms(x, h)
    return float(-(x @ h) / (nx * nh))


def distance_grad(metric, x, h):
    """Gradient (subgradient at kinks) of ``distance(metric, x, h)`` in ``h``.

    Kinks resolve deterministically: ``sign(0) = 0`` for D1, the zero vector
    for Euclidean at ``h == x``, and for l-infinity the lowest-index coordinate
    among the maximisers carries the whole gradient.
    """
    metric = _as_metric(metric)
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    _check_pair(x, h)
    diff = h - x
    if metric is DistanceMetric.D1:
        return np.sign(diff)
    if metric is DistanceMetric.D2:
        return 2.0 * diff
    if metric is DistanceMetric.DSQRT2:
        n = np.sqrt(diff @ diff)
        return diff / n if n > 0 else np.zeros_like(diff)
    if metric is DistanceMetric.DINF:
        g = np.zeros_like(diff)
        j = int(np.argmax(np.abs(diff)))
        g[j] = np.sign(diff[j])
        return g
    nx, nh = _norms(x, h)
    cos = (x @ h) / (nx * nh)
    return -(x / (nx * nh) - cos * h / (nh * nh))


# ------------------------------------------------------- linear model

@dataclass
class LinearModelProblem:
    """Fixed features ``Z`` (one row per word) and teacher targets ``X``.

    The student is ``h^w = Theta^T z^w`` with ``Theta`` of shape ``(d', d)``.
    """

    Z: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        self.Z = np.atleast_2d(np.asarray(self.Z, dtype=float))
        X = np.asarray(self.X, dtype=float)
        self.X = X.reshape(-1, 1) if X.ndim == 1 else X
        if self.Z.shape[0] != self.X.shape[0]:
            raise DimensionError(f"Z has {self.Z.shape[0]} rows but X has {self.X.shape[0]}")

    @classmethod
    def uniform(cls, X, n_features=1):
        """Every word gets the same feature vector ``(1/d') * ones``."""
        X = np.asarray(X, dtype=float)
        n = X.shape[0]
        return cls(np.full((n, n_features), 1.0 / n_features), X)


def lad_uniform_oracle(values):
    """Minimiser of ``sum |v - theta|``: the median, lower median for even counts."""
    vals = sorted(float(v) for v in values)
    if not vals:
        raise ValueError("median of an empty list")
    return vals[(len(vals) - 1) // 2]


def ols_closed_form(problem):
    """``(Z^T Z)^{-1} Z^T X``; raises ``SingularMatrixError`` unless Z has full column rank."""
    Z, X = problem.Z, problem.X
    if np.linalg.matrix_rank(Z) < Z.shape[1]:
        raise SingularMatrixError(f"design matrix has rank < {Z.shape[1]}")
    return np.linalg.solve(Z.T @ Z, Z.T @ X)
