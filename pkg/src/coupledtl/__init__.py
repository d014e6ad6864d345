"""Coupled deep transform learning for cross-domain matching."""
from .coupled import (
    SemiCoupledModel,
    SymmetricCoupledModel,
    coupled_objective,
    semi_coupled_fit,
    sym_coupled_fit,
    update_codes_semi,
    update_codes_sym,
    update_mapping,
)
from .deep import DeepTransformer, LayerConfig, LayerSchedule, encode, fit_deep, map_codes
from .kernels import BACKEND
from .matching import CmcCurve, Gallery, MatchResult, cmc_compute, enroll, identify, rank_k_accuracy
from .synthetic import SyntheticSpec, gen_synthetic_coupled
from .transform import (
    CostBreakdown,
    RegularizationParams,
    SparsityBudget,
    TransformLayer,
    objective_eval,
    sparse_code_update,
    transform_learn,
    transform_update,
)

__version__ = "0.1.0"
