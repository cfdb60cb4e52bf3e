"""Ground-truth oracles: exact discrete computation, Gaussian closed forms and samplers."""

from .discrete import (
    DiscreteJoint,
    ExactPredictor,
    Generators,
    InnovationSplit,
    class_generators,
    exact_class_optimal,
    exact_corpus,
    exact_innovation,
    exact_minimax,
    exact_mmse,
    exact_mse,
    exact_regret,
    exact_regret_distance,
    exact_single_domain,
    random_joint,
    rational_counts,
    reflect,
    same_joint,
    weighted_lstsq,
)
from .family import (
    CONDITIONS,
    FeasibleFamilySpec,
    MembershipVerdict,
    check_membership,
    check_membership_mc,
    family_of,
)
from .gaussian import (
    PRESETS,
    GaussianModel,
    GaussianReport,
    Mixture,
    PartiallyLinearSolution,
    build_corpus,
    gaussian_conditionals,
    preset,
    sample_discrete,
    sample_gaussian,
    sample_mixture,
)
from .properties import PROPERTIES, PropertyReport, class_pairs, run_suite

__all__ = [name for name in dir() if not name.startswith("_")]
