"""Semi-coupled and symmetrically-coupled transform learning.

Two domains with paired samples ``X1[:, j] <-> X2[:, j]`` each get a square
transform and codes; a linear map ties the codes together. The semi-coupled
objective uses one map ``Z2 ~ M Z1``; the symmetric one adds ``Z1 ~ M2 Z2``.
Every sub-problem is solved exactly, in the fixed order T1, T2, Z1, Z2, maps.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import linalg

from .errors import ShapeError, SingularInputError
from .transform import (
    DEFAULT_ITERS,
    DEFAULT_TOL,
    CostBreakdown,
    RegularizationParams,
    SparsityBudget,
    TransformLayer,
    as_feature_matrix,
    objective_eval,
    relative_decrease,
    sparse_code_update,
    transform_update,
)

COND_LIMIT = 1e12
AUTO_RIDGE_SCALE = 1e-8
RIDGE_MODES = ("off", "auto")
CODE_UPDATES = ("sequential", "joint")


@dataclass(frozen=True)
class SemiCoupledModel:
    layer1: TransformLayer
    layer2: TransformLayer
    z1: np.ndarray
    z2: np.ndarray
    mapping: np.ndarray
    params: RegularizationParams

    kind = "semi"

    @property
    def maps(self):
        return (self.mapping,)


@dataclass(frozen=True)
class SymmetricCoupledModel:
    layer1: TransformLayer
    layer2: TransformLayer
    z1: np.ndarray
    z2: np.ndarray
    map_12: np.ndarray
    map_21: np.ndarray
    params: RegularizationParams

    kind = "symmetric"

    @property
    def maps(self):
        return (self.map_12, self.map_21)


def _check_pair(a, b, what="codes"):
    if a.shape != b.shape:
        raise ShapeError(f"{what} shapes differ: {a.shape} vs {b.shape}")


def _check_map(m, d):
    if m.shape != (d, d):
        raise ShapeError(f"mapping must be {(d, d)}, got {m.shape}")


def update_codes_semi(t1x1, t2x2, z2, m, mu, budget: SparsityBudget = SparsityBudget()):
    """Sequential closed-form code updates for the semi-coupled objective.

    ``Z1`` solves ``(I + mu M^T M) Z1 = T1X1 + mu M^T Z2`` using the current
    ``z2``; ``Z2`` then solves ``(1 + mu) Z2 = T2X2 + mu M Z1`` with the new
    ``Z1``. A budget, if given, hard-thresholds each result.
    """
    t1x1, t2x2, z2, m = (np.asarray(a, dtype=np.float64) for a in (t1x1, t2x2, z2, m))
    _check_pair(t1x1, t2x2)
    _check_pair(t2x2, z2)
    _check_map(m, t1x1.shape[0])
    if mu == 0:
        z1 = sparse_code_update(t1x1, budget)
        return z1, sparse_code_update(t2x2, budget)
    d = t1x1.shape[0]
    lhs = np.eye(d) + mu * (m.T @ m)
    z1 = linalg.cho_solve(linalg.cho_factor(lhs), t1x1 + mu * (m.T @ z2))
    z1 = sparse_code_update(z1, budget)
    z2_new = (t2x2 + mu * (m @ z1)) / (1.0 + mu)
    return z1, sparse_code_update(z2_new, budget)


def update_codes_sym(t1x1, t2x2, z2, m12, m21, mu, budget: SparsityBudget = SparsityBudget()):
    """Sequential closed-form code updates for the symmetric objective.

    ``((1+mu) I + mu M1^T M1) Z1 = T1X1 + mu M1^T Z2 + mu M2 Z2`` with the
    current ``z2``, then
    ``((1+mu) I + mu M2^T M2) Z2 = T2X2 + mu M1 Z1 + mu M2^T Z1``.
    """
    t1x1, t2x2, z2, m12, m21 = (np.asarray(a, dtype=np.float64) for a in (t1x1, t2x2, z2, m12, m21))
    _check_pair(t1x1, t2x2)
    _check_pair(t2x2, z2)
    d = t1x1.shape[0]
    _check_map(m12, d)
    _check_map(m21, d)
    if mu == 0:
        return sparse_code_update(t1x1, budget), sparse_code_update(t2x2, budget)
    eye = np.eye(d)
    lhs1 = (1.0 + mu) * eye + mu * (m12.T @ m12)
    z1 = linalg.cho_solve(linalg.cho_factor(lhs1), t1x1 + mu * (m12.T @ z2) + mu * (m21 @ z2))
    z1 = sparse_code_update(z1, budget)
    lhs2 = (1.0 + mu) * eye + mu * (m21.T @ m21)
    z2_new = linalg.cho_solve(linalg.cho_factor(lhs2), t2x2 + mu * (m12 @ z1) + mu * (m21.T @ z1))
    return z1, sparse_code_update(z2_new, budget)


def update_codes_joint(t1x1, t2x2, maps, mu, budget: SparsityBudget = SparsityBudget()):
    """Minimize over ``(Z1, Z2)`` together rather than one after the other.

    Solves the stacked ``2d x 2d`` normal equations shared by every column.
    ``maps`` is ``(M,)`` for the semi-coupled objective or ``(M1, M2)`` for
    the symmetric one. Unlike the sequential update this is invariant under
    swapping the two domains (with the maps swapped accordingly).
    """
    t1x1, t2x2 = (np.asarray(a, dtype=np.float64) for a in (t1x1, t2x2))
    _check_pair(t1x1, t2x2)
    d = t1x1.shape[0]
    for m in maps:
        _check_map(m, d)
    if mu == 0:
        return sparse_code_update(t1x1, budget), sparse_code_update(t2x2, budget)
    eye = np.eye(d)
    m12 = maps[0]
    if len(maps) == 1:
        a11 = eye + mu * (m12.T @ m12)
        a12 = -mu * m12.T
        a22 = (1.0 + mu) * eye
    else:
        m21 = maps[1]
        a11 = (1.0 + mu) * eye + mu * (m12.T @ m12)
        a12 = -mu * (m12.T + m21)
        a22 = (1.0 + mu) * eye + mu * (m21.T @ m21)
    lhs = np.block([[a11, a12], [a12.T, a22]])
    z = linalg.cho_solve(linalg.cho_factor(lhs), np.vstack([t1x1, t2x2]))
    return sparse_code_update(z[:d], budget), sparse_code_update(z[d:], budget)


def update_mapping(z_from, z_to, ridge: float = 0.0, auto_ridge: bool = True) -> np.ndarray:
    """Least-squares map ``M = Z_to Z_from^T (Z_from Z_from^T + ridge I)^{-1}``.

    When ``ridge`` is zero and the Gram matrix is numerically rank-deficient
    (condition number above 1e12), ``auto_ridge`` adds ``1e-8 * trace / d``;
    with ``auto_ridge=False`` a :class:`SingularInputError` is raised instead.
    """
    z_from = np.asarray(z_from, dtype=np.float64)
    z_to = np.asarray(z_to, dtype=np.float64)
    if z_from.ndim != 2 or z_to.ndim != 2 or z_from.shape[1] != z_to.shape[1]:
        raise ShapeError(f"code matrices must share column count: {z_from.shape} vs {z_to.shape}")
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    d = z_from.shape[0]
    gram = z_from @ z_from.T
    if ridge == 0 and np.linalg.cond(gram) > COND_LIMIT:
        if not auto_ridge:
            raise SingularInputError("code Gram matrix is rank-deficient; enable auto ridge")
        ridge = AUTO_RIDGE_SCALE * np.trace(gram) / d
        if not ridge > 0:
            raise SingularInputError("code Gram matrix is zero")
    rhs = z_from @ z_to.T
    try:
        mt = linalg.solve(gram + ridge * np.eye(d), rhs, assume_a="pos")
    except linalg.LinAlgError as exc:
        raise SingularInputError("mapping normal equations are singular") from exc
    return mt.T


def coupled_objective(layer1, layer2, x1, x2, z1, z2, maps, mu) -> CostBreakdown:
    """Full coupled objective; ``maps`` is ``(M,)`` or ``(M1, M2)``."""
    base = objective_eval(layer1, x1, z1) + objective_eval(layer2, x2, z2)
    r = z2 - maps[0] @ z1
    coupling = float(np.sum(r * r))
    if len(maps) == 2:
        r = z1 - maps[1] @ z2
        coupling += float(np.sum(r * r))
    return CostBreakdown.from_parts(
        base.residual, base.frob_penalty, base.logdet_penalty, mu * coupling
    )


def _prepare(x1, x2, budget, ridge_mode, code_update):
    x1 = as_feature_matrix(x1, "x1")
    x2 = as_feature_matrix(x2, "x2")
    if x1.shape[1] != x2.shape[1]:
        raise ShapeError(f"paired inputs need equal sample counts: {x1.shape[1]} vs {x2.shape[1]}")
    if x1.shape[0] != x2.shape[0]:
        raise ShapeError(f"domain dimensions must match: {x1.shape[0]} vs {x2.shape[0]}")
    budget.check(x1.shape[0])
    if ridge_mode not in RIDGE_MODES:
        raise ValueError(f"ridge_mode must be one of {RIDGE_MODES}")
    if code_update not in CODE_UPDATES:
        raise ValueError(f"code_update must be one of {CODE_UPDATES}")
    return x1, x2


def _fit(kind, x1, x2, params, budget, iters, tol, ridge_mode, on_update, init, code_update):
    x1, x2 = _prepare(x1, x2, budget, ridge_mode, code_update)
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if tol < 0:
        raise ValueError("tol must be >= 0")
    d = x1.shape[0]
    auto = ridge_mode == "auto"
    mu = params.mu
    if init is None:
        layer1 = TransformLayer.identity(d, params, budget)
        layer2 = TransformLayer.identity(d, params, budget)
    else:
        layer1, layer2 = (TransformLayer(t, params, budget) for t in init)
    z1 = sparse_code_update(layer1.t @ x1, budget)
    z2 = sparse_code_update(layer2.t @ x2, budget)
    maps = [np.eye(d)] if kind == "semi" else [np.eye(d), np.eye(d)]

    def report(stage):
        if on_update is not None:
            on_update(stage, coupled_objective(layer1, layer2, x1, x2, z1, z2, maps, mu))

    costs: list[CostBreakdown] = []
    for _ in range(iters):
        layer1 = transform_update(x1, z1, params, budget)
        report("t1")
        layer2 = transform_update(x2, z2, params, budget)
        report("t2")
        t1x1, t2x2 = layer1.t @ x1, layer2.t @ x2
        if code_update == "joint":
            z1, z2 = update_codes_joint(t1x1, t2x2, maps, mu, budget)
        elif kind == "semi":
            z1, z2 = update_codes_semi(t1x1, t2x2, z2, maps[0], mu, budget)
        else:
            z1, z2 = update_codes_sym(t1x1, t2x2, z2, maps[0], maps[1], mu, budget)
        report("z")
        maps[0] = update_mapping(z1, z2, auto_ridge=auto)
        report("m12" if kind == "symmetric" else "m")
        if kind == "symmetric":
            maps[1] = update_mapping(z2, z1, auto_ridge=auto)
            report("m21")
        cost = coupled_objective(layer1, layer2, x1, x2, z1, z2, maps, mu)
        costs.append(cost)
        if len(costs) > 1 and relative_decrease(costs[-2].total, cost.total) < tol:
            break

    if kind == "semi":
        model = SemiCoupledModel(layer1, layer2, z1, z2, maps[0], params)
    else:
        model = SymmetricCoupledModel(layer1, layer2, z1, z2, maps[0], maps[1], params)
    return model, costs


def semi_coupled_fit(
    x1,
    x2,
    params: RegularizationParams = RegularizationParams(),
    budget: SparsityBudget = SparsityBudget(),
    iters: int = DEFAULT_ITERS,
    tol: float = DEFAULT_TOL,
    ridge_mode: str = "auto",
    on_update: Optional[Callable[[str, CostBreakdown], None]] = None,
    init=None,
    code_update: str = "sequential",
):
    """Fit a semi-coupled model; returns ``(model, per-sweep costs)``.

    ``init`` optionally gives starting transforms ``(T1, T2)``; identity by
    default. Codes start at the (thresholded) analyses and the map at ``I``.
    ``on_update(stage, cost)`` is called after every sub-problem.
    ``code_update="joint"`` solves for both code matrices at once instead
    of Z1 then Z2.
    """
    return _fit("semi", x1, x2, params, budget, iters, tol, ridge_mode, on_update, init, code_update)


def sym_coupled_fit(
    x1,
    x2,
    params: RegularizationParams = RegularizationParams(),
    budget: SparsityBudget = SparsityBudget(),
    iters: int = DEFAULT_ITERS,
    tol: float = DEFAULT_TOL,
    ridge_mode: str = "auto",
    on_update: Optional[Callable[[str, CostBreakdown], None]] = None,
    init=None,
    code_update: str = "sequential",
):
    """Fit a symmetrically-coupled model with maps 1->2 and 2->1."""
    return _fit("symmetric", x1, x2, params, budget, iters, tol, ridge_mode, on_update, init, code_update)
