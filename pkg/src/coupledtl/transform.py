"""Single-domain transform learning.

Learns a square analysis operator ``T`` and codes ``Z`` for data ``X``
(samples stored as columns) by alternating minimization of::

    ||T X - Z||_F^2 + lam * (eps * ||T||_F^2 - log|det T|)   s.t. ||z_j||_0 <= tau

The code step is exact hard thresholding; the transform step uses the
closed-form minimizer built from a Cholesky factor and an SVD.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import linalg

from . import kernels
from .errors import InvalidBudgetError, ShapeError, SingularInputError, DataError

DEFAULT_ITERS = 50
DEFAULT_TOL = 1e-6
_JITTER = 1e-10


def as_feature_matrix(x, name: str = "x") -> np.ndarray:
    """Validate ``x`` as a finite 2-D float64 matrix with samples as columns."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D (dim, count), got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"{name} must have at least one row and one column, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class RegularizationParams:
    """Weights shared by all objectives.

    ``lam`` scales the transform regularizer, ``epsilon`` the Frobenius part
    of it, and ``mu`` the cross-domain coupling term.
    """

    lam: float = 0.01
    epsilon: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ValueError(f"lam must be finite and >= 0, got {self.lam}")
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError(f"epsilon must be finite and > 0, got {self.epsilon}")
        if not (math.isfinite(self.mu) and self.mu >= 0):
            raise ValueError(f"mu must be finite and >= 0, got {self.mu}")


@dataclass(frozen=True)
class SparsityBudget:
    """Per-column count of retained coefficients; ``None`` means dense codes."""

    tau: Optional[int] = None

    def __post_init__(self):
        if self.tau is not None and (int(self.tau) != self.tau or self.tau < 1):
            raise InvalidBudgetError(f"tau must be a positive integer, got {self.tau}")

    def check(self, dim: int):
        if self.tau is not None and self.tau > dim:
            raise InvalidBudgetError(f"tau={self.tau} exceeds code dimension {dim}")


@dataclass(frozen=True)
class TransformLayer:
    t: np.ndarray
    params: RegularizationParams = field(default_factory=RegularizationParams)
    budget: SparsityBudget = field(default_factory=SparsityBudget)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64)
        if t.ndim != 2 or t.shape[0] != t.shape[1]:
            raise ShapeError(f"transform must be square, got shape {t.shape}")
        object.__setattr__(self, "t", t)

    @property
    def dim(self) -> int:
        return self.t.shape[0]

    @property
    def det_sign(self) -> float:
        return float(np.linalg.slogdet(self.t)[0])

    @property
    def logabsdet(self) -> float:
        sign, logdet = np.linalg.slogdet(self.t)
        return float(logdet) if sign != 0 else -math.inf

    @classmethod
    def identity(cls, dim: int, params=None, budget=None) -> "TransformLayer":
        return cls(np.eye(dim), params or RegularizationParams(), budget or SparsityBudget())


@dataclass(frozen=True)
class CostBreakdown:
    residual: float
    frob_penalty: float
    logdet_penalty: float
    coupling: float
    total: float

    @classmethod
    def from_parts(cls, residual, frob_penalty, logdet_penalty, coupling=0.0) -> "CostBreakdown":
        total = residual + frob_penalty + logdet_penalty + coupling
        return cls(float(residual), float(frob_penalty), float(logdet_penalty), float(coupling), float(total))

    def __add__(self, other: "CostBreakdown") -> "CostBreakdown":
        return CostBreakdown.from_parts(
            self.residual + other.residual,
            self.frob_penalty + other.frob_penalty,
            self.logdet_penalty + other.logdet_penalty,
            self.coupling + other.coupling,
        )


def sparse_code_update(t_x: np.ndarray, budget: SparsityBudget = SparsityBudget()) -> np.ndarray:
    """Exact minimizer of ``||TX - Z||_F^2`` subject to the per-column budget.

    Each column keeps its ``tau`` largest-magnitude entries; ties at the
    boundary keep the lowest row index. Without a budget the input is
    returned unchanged (as a copy).
    """
    t_x = np.asarray(t_x, dtype=np.float64)
    if t_x.ndim != 2:
        raise ShapeError(f"codes must be 2-D, got shape {t_x.shape}")
    budget.check(t_x.shape[0])
    if budget.tau is None or budget.tau == t_x.shape[0]:
        return t_x.copy()
    return kernels.hard_threshold(t_x, budget.tau)


def _spd_cholesky(g: np.ndarray) -> np.ndarray:
    try:
        return linalg.cholesky(g, lower=True)
    except linalg.LinAlgError:
        pass
    d = g.shape[0]
    scale = np.trace(g) / d
    if not scale > 0:
        raise SingularInputError("Gram matrix X X^T + lam*eps*I is not positive definite")
    try:
        return linalg.cholesky(g + _JITTER * scale * np.eye(d), lower=True)
    except linalg.LinAlgError as exc:
        raise SingularInputError("Gram matrix X X^T + lam*eps*I is not positive definite") from exc


def transform_update(
    x: np.ndarray,
    z: np.ndarray,
    params: RegularizationParams,
    budget: SparsityBudget = SparsityBudget(),
) -> TransformLayer:
    """Closed-form minimizer of ``||TX - Z||^2 + lam (eps ||T||^2 - log|det T|)``.

    With ``X X^T + lam eps I = L L^T`` and ``L^{-1} X Z^T = U S V^T`` the
    minimizer is ``T = 0.5 V (S + (S^2 + 2 lam I)^{1/2}) U^T L^{-1}``.
    """
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if x.ndim != 2 or z.ndim != 2:
        raise ShapeError("x and z must be 2-D")
    if x.shape[1] != z.shape[1]:
        raise ShapeError(f"x has {x.shape[1]} columns but z has {z.shape[1]}")
    if z.shape[0] != x.shape[0]:
        raise ShapeError(f"square transform needs z with {x.shape[0]} rows, got {z.shape[0]}")
    d = x.shape[0]
    lam = params.lam
    g = x @ x.T + (lam * params.epsilon) * np.eye(d)
    chol = _spd_cholesky(g)
    b = linalg.solve_triangular(chol, x @ z.T, lower=True)
    u, s, vt = linalg.svd(b)
    scale = 0.5 * (s + np.sqrt(s * s + 2.0 * lam))
    core = (vt.T * scale) @ u.T
    # core @ L^{-1} == (L^{-T} core^T)^T
    t = linalg.solve_triangular(chol.T, core.T, lower=False).T
    if not np.all(np.isfinite(t)):
        raise SingularInputError("transform update produced non-finite entries")
    return TransformLayer(t, params, budget)


def objective_eval(layer: TransformLayer, x: np.ndarray, z: np.ndarray) -> CostBreakdown:
    """Evaluate the regularized single-domain objective term by term.

    A singular transform gives ``logdet_penalty = total = +inf`` when lam > 0.
    """
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    t = layer.t
    if t.shape[1] != x.shape[0] or z.shape != (t.shape[0], x.shape[1]):
        raise ShapeError(f"shapes do not conform: T{t.shape}, X{x.shape}, Z{z.shape}")
    lam, eps = layer.params.lam, layer.params.epsilon
    diff = t @ x - z
    residual = float(np.sum(diff * diff))
    frob = lam * eps * float(np.sum(t * t))
    sign, logdet = np.linalg.slogdet(t)
    if lam == 0:
        logdet_pen = 0.0
    elif sign == 0 or not np.isfinite(logdet):
        logdet_pen = math.inf
    else:
        logdet_pen = -lam * float(logdet)
    return CostBreakdown.from_parts(residual, frob, logdet_pen)


def relative_decrease(prev: float, cur: float) -> float:
    denom = max(abs(prev), np.finfo(float).tiny)
    return (prev - cur) / denom


def transform_learn(
    x: np.ndarray,
    layer_init: Optional[TransformLayer] = None,
    iters: int = DEFAULT_ITERS,
    tol: float = DEFAULT_TOL,
    on_update: Optional[Callable[[str, CostBreakdown], None]] = None,
):
    """Alternate code and transform updates starting from ``layer_init``.

    Each iteration performs one code update followed by one transform
    update and records the objective afterwards. Stops after ``iters``
    iterations or once the relative decrease of the total cost drops below
    ``tol`` (``tol=0`` disables early stopping).

    Returns ``(layer, z, costs)`` where ``z`` is the code matrix used in the
    final transform update.
    """
    x = as_feature_matrix(x)
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if tol < 0:
        raise ValueError("tol must be >= 0")
    layer = layer_init if layer_init is not None else TransformLayer.identity(x.shape[0])
    if layer.t.shape[1] != x.shape[0]:
        raise ShapeError(f"transform is {layer.t.shape} but data has {x.shape[0]} rows")
    layer.budget.check(layer.dim)

    costs: list[CostBreakdown] = []
    z = None
    for _ in range(iters):
        z = sparse_code_update(layer.t @ x, layer.budget)
        if on_update is not None:
            on_update("z", objective_eval(layer, x, z))
        layer = transform_update(x, z, layer.params, layer.budget)
        cost = objective_eval(layer, x, z)
        if on_update is not None:
            on_update("t", cost)
        costs.append(cost)
        if len(costs) > 1 and relative_decrease(costs[-2].total, cost.total) < tol:
            break
    return layer, z, costs
