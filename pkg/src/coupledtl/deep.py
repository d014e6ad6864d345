"""Greedy layer-wise deep coupled transform learning.

Layers ``1..k-1`` are trained independently per domain; the last layer is a
coupled fit on the previous layer's codes. At test time a sample is encoded
by the plain linear cascade ``T^k ... T^1 x`` and optionally mapped into the
other domain's code space.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .coupled import SemiCoupledModel, SymmetricCoupledModel, semi_coupled_fit, sym_coupled_fit
from .errors import ShapeError, UnsupportedDirectionError
from .transform import (
    DEFAULT_ITERS,
    DEFAULT_TOL,
    RegularizationParams,
    SparsityBudget,
    TransformLayer,
    as_feature_matrix,
    sparse_code_update,
    transform_learn,
)

KINDS = ("semi", "symmetric")
DEFAULT_DEPTH = 2


@dataclass(frozen=True)
class LayerConfig:
    params: RegularizationParams = field(default_factory=RegularizationParams)
    budget: SparsityBudget = field(default_factory=SparsityBudget)
    iters: int = DEFAULT_ITERS
    tol: float = DEFAULT_TOL


@dataclass(frozen=True)
class LayerSchedule:
    layers: tuple
    ridge_mode: str = "auto"
    code_update: str = "sequential"

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValueError("schedule needs at least one layer")

    @classmethod
    def uniform(cls, depth: int = DEFAULT_DEPTH, config: Optional[LayerConfig] = None, **kwargs):
        return cls((config or LayerConfig(),) * depth, **kwargs)

    @property
    def depth(self) -> int:
        return len(self.layers)


@dataclass(frozen=True)
class DeepTransformer:
    kind: str
    layers1: tuple
    layers2: tuple
    map_12: np.ndarray
    map_21: Optional[np.ndarray] = None
    # final-layer training codes; not serialized
    train_codes: Optional[tuple] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "layers1", tuple(self.layers1))
        object.__setattr__(self, "layers2", tuple(self.layers2))
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if len(self.layers1) != len(self.layers2) or not self.layers1:
            raise ValueError("both domains need the same, non-zero number of layers")
        if (self.map_21 is not None) != (self.kind == "symmetric"):
            raise ValueError("map_21 must be present exactly for symmetric models")

    @property
    def depth(self) -> int:
        return len(self.layers1)

    @property
    def dim(self) -> int:
        return self.layers1[0].dim


@dataclass
class FitReport:
    """Per-layer cost traces: ``uncoupled[j] = (trace_domain1, trace_domain2)``."""

    uncoupled: list
    coupled: list
    final: object = None


def fit_deep(x1, x2, kind: str = "semi", schedule: Optional[LayerSchedule] = None):
    """Train a depth-k model greedily; returns ``(DeepTransformer, FitReport)``."""
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    schedule = schedule or LayerSchedule.uniform()
    inp1 = as_feature_matrix(x1, "x1")
    inp2 = as_feature_matrix(x2, "x2")
    if inp1.shape != inp2.shape:
        raise ShapeError(f"paired inputs must have equal shapes: {inp1.shape} vs {inp2.shape}")
    d = inp1.shape[0]

    layers1, layers2, uncoupled = [], [], []
    for cfg in schedule.layers[:-1]:
        init = TransformLayer.identity(d, cfg.params, cfg.budget)
        l1, inp1, c1 = transform_learn(inp1, init, cfg.iters, cfg.tol)
        l2, inp2, c2 = transform_learn(inp2, init, cfg.iters, cfg.tol)
        layers1.append(l1)
        layers2.append(l2)
        uncoupled.append((c1, c2))

    last = schedule.layers[-1]
    fit = semi_coupled_fit if kind == "semi" else sym_coupled_fit
    final, costs = fit(
        inp1, inp2, last.params, last.budget, last.iters, last.tol, schedule.ridge_mode,
        code_update=schedule.code_update,
    )
    layers1.append(final.layer1)
    layers2.append(final.layer2)
    if kind == "semi":
        model = DeepTransformer(kind, layers1, layers2, final.mapping, None, (final.z1, final.z2))
    else:
        model = DeepTransformer(kind, layers1, layers2, final.map_12, final.map_21, (final.z1, final.z2))
    return model, FitReport(uncoupled, costs, final)


def encode(model: DeepTransformer, x, domain: int, threshold: bool = False) -> np.ndarray:
    """Linear cascade ``T^k (... (T^1 x))`` for domain 1 or 2.

    With ``threshold=True`` each layer's sparsity budget is applied to its
    output, mirroring the training-time coding step.
    """
    if domain not in (1, 2):
        raise ValueError(f"domain must be 1 or 2, got {domain!r}")
    z = as_feature_matrix(x)
    if z.shape[0] != model.dim:
        raise ShapeError(f"model expects dimension {model.dim}, got {z.shape[0]}")
    for layer in model.layers1 if domain == 1 else model.layers2:
        z = layer.t @ z
        if threshold:
            z = sparse_code_update(z, layer.budget)
    return z


def stack_product(layers: Sequence[TransformLayer]) -> np.ndarray:
    """Single matrix equal to applying ``layers`` in order."""
    prod = np.eye(layers[0].dim)
    for layer in layers:
        prod = layer.t @ prod
    return prod


def map_codes(model: DeepTransformer, z, direction: str = "1to2") -> np.ndarray:
    """Map final-layer codes across domains (``"1to2"`` or ``"2to1"``)."""
    z = as_feature_matrix(z)
    if z.shape[0] != model.dim:
        raise ShapeError(f"codes must have dimension {model.dim}, got {z.shape[0]}")
    if direction == "1to2":
        return model.map_12 @ z
    if direction == "2to1":
        if model.map_21 is None:
            raise UnsupportedDirectionError("semi-coupled models only map domain 1 to domain 2")
        return model.map_21 @ z
    raise UnsupportedDirectionError(f"unknown direction {direction!r}; use '1to2' or '2to1'")


def from_coupled(model) -> DeepTransformer:
    """Wrap a single-level coupled model as a depth-1 :class:`DeepTransformer`."""
    if isinstance(model, SemiCoupledModel):
        return DeepTransformer("semi", [model.layer1], [model.layer2], model.mapping, None, (model.z1, model.z2))
    if isinstance(model, SymmetricCoupledModel):
        return DeepTransformer(
            "symmetric", [model.layer1], [model.layer2], model.map_12, model.map_21, (model.z1, model.z2)
        )
    raise TypeError(f"not a coupled model: {type(model).__name__}")
