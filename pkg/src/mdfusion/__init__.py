"""Minimax regression from unpaired single-domain training sets.

Fuses two labeled sets ``{(x1, y)}`` and ``{(x2, y)}`` with a paired
unlabeled set ``{(x1, x2)}`` into worst-case optimal predictors of ``y``
from both domains or from ``x1`` alone.
"""

from .core import (
    ClassKind,
    FeatureMap,
    FunctionClass,
    KernelConfig,
    MomentSet,
    TrainingCorpus,
    estimate_moments,
    feature_map,
    linear_basis,
    pseudo_inverse,
    second_moment,
)
from .errors import ClassSpecError, CorpusError, MDFusionError, OutOfScopeError, StageError
from .fusion import (
    FusionPlan,
    Strategy,
    fit_innovation,
    fuse,
    fuse_basis_basis,
    fuse_linear_linear,
    fuse_plmmse,
    fuse_semiparametric,
    plan_strategy,
)
from .kernel import KernelRegressor, fit_kernel
from .predictors import Predictor
from .projection import (
    ProjectionReport,
    check_innovation_vanishes,
    cross_domain,
    project,
    project_split_half,
    shared_representation,
    side_info_linear_nonlinear,
)
from .single import fit_basis, fit_class, fit_linear, fit_zero

__version__ = "0.1.0"
