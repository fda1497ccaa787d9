"""Behavioural pseudometrics for continuous-time Markov processes.

The distance is the least fixpoint of
``F_c(m)(x, y) = sup_t c^t W(m)(P_t(x), P_t(y))`` above the observable
metric, computed with exact discrete optimal transport and monotone
iteration, and cross-checked against lower bounds from a real-valued modal
logic.
"""

from .brownian import (
    BMResult,
    ParticleDistribution,
    absorbed_bm_kernel,
    bm_delta1,
    gbm_lower_bound,
    hitting_cdf,
)
from .core import (
    DiscountSpec,
    DiscreteDistribution,
    DistributionError,
    Model,
    ModelError,
    ModelParseError,
    PseudometricError,
    PseudometricTable,
    ThetaPolynomial,
    kernel_at,
    load_model,
    model_from_dict,
    obs_metric,
)
from .fixpoint import (
    FixpointPreconditionError,
    IterationTrace,
    check_least_fixpoint_bound,
    iterate,
    verify_fixpoint,
)
from .functional import SupStrategy, apply_functional, evaluate_functional, sup_over_time
from .logic import (
    Const,
    LogicBound,
    LogicConfig,
    LogicExpr,
    LogicSyntaxError,
    Min,
    Neg,
    Obs,
    PlusQ,
    Shift,
    SubQ,
    canonicalize,
    evaluate,
    format_expr,
    lambda_lower_bound,
    parse_expr,
)
from .models import toy_closed_form, toy_model
from .transport import TransportError, TransportPlan, kantorovich, verify_coupling

__version__ = "0.1.0"

__all__ = [
    "BMResult",
    "ParticleDistribution",
    "absorbed_bm_kernel",
    "bm_delta1",
    "gbm_lower_bound",
    "hitting_cdf",
    "DiscountSpec",
    "DiscreteDistribution",
    "DistributionError",
    "Model",
    "ModelError",
    "ModelParseError",
    "PseudometricError",
    "PseudometricTable",
    "ThetaPolynomial",
    "kernel_at",
    "load_model",
    "model_from_dict",
    "obs_metric",
    "FixpointPreconditionError",
    "IterationTrace",
    "check_least_fixpoint_bound",
    "iterate",
    "verify_fixpoint",
    "SupStrategy",
    "apply_functional",
    "evaluate_functional",
    "sup_over_time",
    "Const",
    "LogicBound",
    "LogicConfig",
    "LogicExpr",
    "LogicSyntaxError",
    "Min",
    "Neg",
    "Obs",
    "PlusQ",
    "Shift",
    "SubQ",
    "canonicalize",
    "evaluate",
    "format_expr",
    "lambda_lower_bound",
    "parse_expr",
    "toy_closed_form",
    "toy_model",
    "TransportError",
    "TransportPlan",
    "kantorovich",
    "verify_coupling",
]
