"""Multi-domain minimax fusion.

The worst-case optimal predictor of ``Y`` from ``(X1, X2)`` over all joint
laws consistent with the single-domain class-optimal predictors, the
``(X1, X2)`` marginal and ``E||Y||^2`` is the least-squares optimal member of
the sum class ``C = A + B``. This module builds it for every supported pair
of classes.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    DEFAULT_PINV_RTOL,
    ClassKind,
    FeatureMap,
    FunctionClass,
    KernelConfig,
    MomentSet,
    TrainingCorpus,
    linear_basis,
    pseudo_inverse,
    second_moment,
)
from .errors import CorpusError, OutOfScopeError, StageError
from .kernel import fit_kernel
from .predictors import (
    AdditivePredictor,
    BasisPredictor,
    InnovationPredictor,
    LinearPredictor,
    PartiallyLinearPredictor,
    Predictor,
    SwappedPredictor,
    ZeroPredictor,
    evaluate_maps,
)
from .single import fit_basis, fit_class

logger = logging.getLogger(__name__)

# innovation directions whose second moment is below this fraction of the raw
# feature second moment are treated as exactly predictable (kernel fits of an
# exact function leave residuals of order the ridge, not zero)
INNOVATION_FLOOR = 1e-9

OUT_OF_SCOPE_MESSAGE = (
    "out of scope: C = all functions of (X1,X2) requires paired labeled data the problem setting lacks"
)


class Strategy(str, enum.Enum):
    DEGENERATE_A = "DegenerateA"
    DEGENERATE_B = "DegenerateB"
    LINEAR_LINEAR = "LinearLinear"
    BASIS_BASIS = "BasisBasis"
    PARTIALLY_LINEAR = "PartiallyLinear"
    SEMI_PARAMETRIC = "SemiParametric"
    DOUBLE_NONPARAMETRIC = "DoubleNonparametric"


_PARAMETRIC = (ClassKind.LINEAR, ClassKind.BASIS)


def plan_strategy(class_a: FunctionClass, class_b: FunctionClass) -> tuple[Strategy, bool]:
    """Strategy for the class pair and whether the domains are handled swapped."""
    ka, kb = class_a.kind, class_b.kind
    if ka is ClassKind.ZERO:
        return Strategy.DEGENERATE_A, False
    if kb is ClassKind.ZERO:
        return Strategy.DEGENERATE_B, False
    if ka is ClassKind.LINEAR and kb is ClassKind.LINEAR:
        return Strategy.LINEAR_LINEAR, False
    if ka in _PARAMETRIC and kb in _PARAMETRIC:
        return Strategy.BASIS_BASIS, False
    if ka is ClassKind.NONPARAMETRIC and kb is ClassKind.NONPARAMETRIC:
        return Strategy.DOUBLE_NONPARAMETRIC, False
    if ka is ClassKind.NONPARAMETRIC:
        return (Strategy.PARTIALLY_LINEAR if kb is ClassKind.LINEAR else Strategy.SEMI_PARAMETRIC), False
    return (Strategy.PARTIALLY_LINEAR if ka is ClassKind.LINEAR else Strategy.SEMI_PARAMETRIC), True


@dataclass(frozen=True)
class FusionPlan:
    class_a: FunctionClass
    class_b: FunctionClass

    @property
    def strategy(self) -> Strategy:
        return plan_strategy(self.class_a, self.class_b)[0]

    @property
    def mirrored(self) -> bool:
        return plan_strategy(self.class_a, self.class_b)[1]

    def swapped(self) -> "FusionPlan":
        return FusionPlan(self.class_b, self.class_a)


def _maps_for(cls: FunctionClass, in_dim: int, out_dim: int) -> tuple[FeatureMap, ...]:
    if cls.kind is ClassKind.LINEAR:
        return linear_basis(in_dim, out_dim)
    return cls.maps


def _check_corpus(corpus: TrainingCorpus, plan: FusionPlan):
    strategy = plan.strategy
    if plan.class_a.kind is not ClassKind.ZERO and corpus.L1 < 1:
        raise CorpusError(f"{strategy.value}: class A is {plan.class_a.kind.value} but labeled1 is empty")
    if plan.class_b.kind is not ClassKind.ZERO and corpus.L2 < 1:
        raise CorpusError(f"{strategy.value}: class B is {plan.class_b.kind.value} but labeled2 is empty")
    if strategy in (Strategy.PARTIALLY_LINEAR, Strategy.SEMI_PARAMETRIC) and corpus.U < 2:
        raise CorpusError(f"{strategy.value}: needs at least two unlabeled pairs")


def fuse(
    corpus: TrainingCorpus,
    plan: FusionPlan,
    kernel: KernelConfig | None = None,
    cross_check: bool = False,
) -> Predictor:
    """Fit the multi-domain minimax predictor for ``plan`` on ``corpus``.

    ``kernel`` overrides the kernel settings of every conditional-mean fit.
    ``cross_check`` additionally records, for the linear/linear strategy,
    how far the labeled cross moments are from their orthogonality-principle
    substitutes.
    """
    strategy, mirrored = plan_strategy(plan.class_a, plan.class_b)
    if strategy is Strategy.DOUBLE_NONPARAMETRIC:
        raise OutOfScopeError(OUT_OF_SCOPE_MESSAGE)
    _check_corpus(corpus, plan)
    if mirrored:
        inner = fuse(corpus.swapped(), plan.swapped(), kernel, cross_check)
        return SwappedPredictor(inner, strategy=strategy.value)

    m1, m2, n = corpus.dims
    if strategy is Strategy.DEGENERATE_A:
        if plan.class_b.kind is ClassKind.ZERO:
            term = ZeroPredictor(m2, n, domain=2)
        else:
            term = fit_class(corpus.labeled2_x, corpus.labeled2_y, plan.class_b, 2, kernel)
        return AdditivePredictor((term,), (m1, m2), n, strategy.value)
    if strategy is Strategy.DEGENERATE_B:
        term = fit_class(corpus.labeled1_x, corpus.labeled1_y, plan.class_a, 1, kernel)
        return AdditivePredictor((term,), (m1, m2), n, strategy.value)
    if strategy is Strategy.LINEAR_LINEAR:
        pred = fuse_linear_linear(corpus.moments())
        if cross_check:
            info = {**pred.info, "orthogonality_gap": linear_orthogonality_gap(corpus)}
            pred = AdditivePredictor(pred.terms, pred.dims, pred.out_dim, pred.strategy, info)
        return pred
    if strategy is Strategy.BASIS_BASIS:
        return fuse_basis_basis(
            corpus, _maps_for(plan.class_a, m1, n), _maps_for(plan.class_b, m2, n)
        )
    cfg = kernel or plan.class_a.kernel
    if strategy is Strategy.PARTIALLY_LINEAR:
        return fuse_plmmse(corpus, cfg)
    return fuse_semiparametric(corpus, plan.class_b.maps, cfg)


def fuse_linear_linear(moments: MomentSet, rel_tol: float = DEFAULT_PINV_RTOL) -> AdditivePredictor:
    """Best linear predictor of ``Y`` from the stacked ``(X1, X2)``.

    ``[B1 B2] = [G_YX1 G_YX2] pinv([[G_X1X1, G_X1X2], [G_X2X1, G_X2X2]])``.
    """
    try:
        gy1 = moments.get("Y", "X1")
        gy2 = moments.get("Y", "X2")
        g11 = moments.get("X1", "X1")
        g12 = moments.get("X1", "X2")
        g22 = moments.get("X2", "X2")
    except KeyError as exc:
        raise CorpusError(f"linear fusion: {exc.args[0]}") from None
    m1, m2 = g11.shape[0], g22.shape[0]
    if gy1.shape[1] != m1 or gy2.shape[1] != m2 or g12.shape != (m1, m2) or gy1.shape[0] != gy2.shape[0]:
        raise CorpusError(
            "linear fusion: moment blocks have inconsistent dimensions "
            f"(G_YX1 {gy1.shape}, G_YX2 {gy2.shape}, G_X1X1 {g11.shape}, G_X1X2 {g12.shape}, G_X2X2 {g22.shape})"
        )
    block = np.block([[g11, g12], [g12.T, g22]])
    coef = np.hstack([gy1, gy2]) @ pseudo_inverse(block, rel_tol)
    terms = (LinearPredictor(coef[:, :m1], 1), LinearPredictor(coef[:, m1:], 2))
    return AdditivePredictor(terms, (m1, m2), gy1.shape[0], Strategy.LINEAR_LINEAR.value)


def linear_orthogonality_gap(corpus: TrainingCorpus) -> dict:
    """Largest entrywise gap between ``G_YXi`` and ``E[phi_i(Xi) Xi^T]`` over the unlabeled set."""
    gaps = {}
    for name, x, y, xu in (
        ("X1", corpus.labeled1_x, corpus.labeled1_y, corpus.unlabeled_x1),
        ("X2", corpus.labeled2_x, corpus.labeled2_y, corpus.unlabeled_x2),
    ):
        direct = second_moment(y, x)
        coef = direct @ pseudo_inverse(second_moment(x, x))
        substitute = coef @ second_moment(xu, xu)
        gaps[name] = float(np.max(np.abs(direct - substitute)))
    return gaps


def fuse_basis_basis(
    corpus: TrainingCorpus,
    maps_a: Sequence[FeatureMap],
    maps_b: Sequence[FeatureMap],
    rel_tol: float = DEFAULT_PINV_RTOL,
) -> AdditivePredictor:
    """Optimal coefficients over ``span(maps_a) + span(maps_b)``.

    Gram blocks come from the unlabeled set, label cross moments from the two
    labeled sets. The label cross moments are also re-derived through the
    single-domain fits (orthogonality substitution) and the discrepancy is
    recorded in the descriptor.
    """
    if not maps_a or not maps_b:
        raise CorpusError("basis fusion needs at least one map per domain")
    if corpus.L1 < 1 or corpus.L2 < 1:
        raise CorpusError("basis fusion needs both labeled sets")
    m1, m2, n = corpus.dims
    k1 = len(maps_a)
    fa = evaluate_maps(maps_a, corpus.unlabeled_x1, n)
    fb = evaluate_maps(maps_b, corpus.unlabeled_x2, n)
    f = np.concatenate([fa, fb], axis=1)
    gram = np.einsum("uid,ujd->ij", f, f) / corpus.U
    gram = 0.5 * (gram + gram.T)

    la = evaluate_maps(maps_a, corpus.labeled1_x, n)
    lb = evaluate_maps(maps_b, corpus.labeled2_x, n)
    ga_y = np.einsum("lid,ld->i", la, corpus.labeled1_y) / corpus.L1
    gb_y = np.einsum("lid,ld->i", lb, corpus.labeled2_y) / corpus.L2
    coef = pseudo_inverse(gram, rel_tol) @ np.concatenate([ga_y, gb_y])

    gap, tol = _basis_substitution_gap(corpus, maps_a, maps_b, fa, fb, la, lb, ga_y, gb_y)
    if gap > tol:
        logger.warning(
            "basis fusion: labeled cross moments differ from their orthogonality substitutes "
            "by %.3g (Monte-Carlo tolerance %.3g)",
            gap,
            tol,
        )
    terms = (
        BasisPredictor(coef[:k1], maps_a, m1, n, 1),
        BasisPredictor(coef[k1:], maps_b, m2, n, 2),
    )
    info = {"orthogonality_gap": gap, "orthogonality_tolerance": tol}
    return AdditivePredictor(terms, (m1, m2), n, Strategy.BASIS_BASIS.value, info)


def _basis_substitution_gap(corpus, maps_a, maps_b, fa, fb, la, lb, ga_y, gb_y):
    n = corpus.dims[2]
    phi_a = fit_basis(corpus.labeled1_x, corpus.labeled1_y, maps_a)
    psi_b = fit_basis(corpus.labeled2_x, corpus.labeled2_y, maps_b)
    gap, tol = 0.0, 1e-9
    for feats, lab_feats, fitted, y, direct, xu in (
        (fa, la, phi_a, corpus.labeled1_y, ga_y, corpus.unlabeled_x1),
        (fb, lb, psi_b, corpus.labeled2_y, gb_y, corpus.unlabeled_x2),
    ):
        pred = fitted._predict(xu)
        sub_terms = np.einsum("uid,ud->ui", feats, pred)
        lab_terms = np.einsum("lid,ld->li", lab_feats, y)
        substitute = sub_terms.mean(axis=0)
        gap = max(gap, float(np.max(np.abs(direct - substitute))))
        se = sub_terms.std(axis=0) / np.sqrt(len(sub_terms)) + lab_terms.std(axis=0) / np.sqrt(len(lab_terms))
        tol = max(tol, 3.0 * float(np.max(se)) + 1e-9)
    return gap, tol


def fuse_plmmse(corpus: TrainingCorpus, kernel: KernelConfig | None = None) -> PartiallyLinearPredictor:
    """Partially linear fusion ``E[Y|X1] + G_YW G_WW^+ W`` with ``W = X2 - E[X2|X1]``.

    Stages: kernel fit of ``E[X2|X1]`` on the unlabeled set; ``G_WW`` from
    the unlabeled innovations; ``G_YW = G_YX2 - G_Y,xi(X1)`` from the two
    labeled sets; kernel fit of ``E[Y|X1]`` on the first labeled set.
    """
    cfg = kernel or KernelConfig()
    if corpus.L1 < 2 or corpus.L2 < 1 or corpus.U < 2:
        raise CorpusError(f"partially linear fusion needs L1 >= 2, L2 >= 1, U >= 2; got {corpus.cardinalities()}")
    with _stage("conditional mean of X2 given X1"):
        xi = fit_kernel(corpus.unlabeled_x1, corpus.unlabeled_x2, cfg, domain=1)
    with _stage("innovation second moment"):
        w = corpus.unlabeled_x2 - xi._predict(corpus.unlabeled_x1)
        gww = second_moment(w, w)
        gww = 0.5 * (gww + gww.T)
    with _stage("label-innovation cross moment"):
        g_yx2 = second_moment(corpus.labeled2_y, corpus.labeled2_x)
        g_yxi = second_moment(corpus.labeled1_y, xi._predict(corpus.labeled1_x))
        floor = INNOVATION_FLOOR * float(np.trace(second_moment(corpus.unlabeled_x2, corpus.unlabeled_x2)))
        gain = (g_yx2 - g_yxi) @ pseudo_inverse(gww, abs_tol=floor)
    with _stage("conditional mean of Y given X1"):
        mean = fit_kernel(corpus.labeled1_x, corpus.labeled1_y, cfg, domain=1)
    return PartiallyLinearPredictor(mean, xi, gain)


class _stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(self.name, str(exc)) from exc
        return False


def fit_innovation(
    corpus: TrainingCorpus,
    class_a: FunctionClass,
    maps_b: Sequence[FeatureMap],
    kernel: KernelConfig | None = None,
    rel_tol: float = DEFAULT_PINV_RTOL,
) -> InnovationPredictor:
    """Least-squares fit of ``Y`` on the innovations ``psi_k(X2) - eta_k(X1)``.

    ``eta_k`` is the class-A optimal regressor of ``psi_k(X2)`` on ``X1``
    fitted on the unlabeled set. The cross moment with ``Y`` is assembled as
    ``E[psi_k(X2)^T Y]`` (labeled2) minus ``E[eta_k(X1)^T Y]`` (labeled1).
    """
    if not maps_b:
        raise CorpusError("innovation needs at least one domain-2 feature map")
    if corpus.U < 2:
        raise CorpusError("innovation needs at least two unlabeled pairs")
    if corpus.L2 < 1:
        raise CorpusError("innovation needs labeled domain-2 examples")
    if class_a.kind is not ClassKind.ZERO and corpus.L1 < 1:
        raise CorpusError("innovation with a non-zero class A needs labeled domain-1 examples")
    m1, m2, n = corpus.dims
    psi_u = evaluate_maps(maps_b, corpus.unlabeled_x2, n)
    regressors = []
    with _stage("regression of domain-2 features on X1"):
        for k in range(len(maps_b)):
            regressors.append(fit_class(corpus.unlabeled_x1, psi_u[:, k, :], class_a, 1, kernel))
    pred = InnovationPredictor(tuple(maps_b), tuple(regressors), np.zeros(len(maps_b)), (m1, m2), n)
    with _stage("innovation moments"):
        rho_u = pred.components(corpus.unlabeled_x1, corpus.unlabeled_x2)
        g_rr = np.einsum("uid,ujd->ij", rho_u, rho_u) / corpus.U
        g_rr = 0.5 * (g_rr + g_rr.T)
        psi_l = evaluate_maps(maps_b, corpus.labeled2_x, n)
        g_ry = np.einsum("lkd,ld->k", psi_l, corpus.labeled2_y) / corpus.L2
        if corpus.L1:
            eta_l = np.stack([r._predict(corpus.labeled1_x) for r in regressors], axis=1)
            g_ry = g_ry - np.einsum("lkd,ld->k", eta_l, corpus.labeled1_y) / corpus.L1
        floor = INNOVATION_FLOOR * float(np.einsum("uid,uid->", psi_u, psi_u)) / corpus.U
        coef = pseudo_inverse(g_rr, rel_tol, abs_tol=floor) @ g_ry
    return InnovationPredictor(tuple(maps_b), tuple(regressors), coef, (m1, m2), n)


def fuse_semiparametric(
    corpus: TrainingCorpus, maps_b: Sequence[FeatureMap], kernel: KernelConfig | None = None
) -> AdditivePredictor:
    """``E[Y|X1] + sum_k a_k (psi_k(X2) - E[psi_k(X2)|X1])`` fitted in two stages."""
    cfg = kernel or KernelConfig()
    if corpus.L1 < 2:
        raise CorpusError("semi-parametric fusion needs at least two labeled domain-1 examples")
    innovation = fit_innovation(corpus, FunctionClass.nonparametric(cfg), maps_b, cfg)
    with _stage("conditional mean of Y given X1"):
        mean = fit_kernel(corpus.labeled1_x, corpus.labeled1_y, cfg, domain=1)
    m1, m2, n = corpus.dims
    return AdditivePredictor((mean, innovation), (m1, m2), n, Strategy.SEMI_PARAMETRIC.value)
