"""Single-domain minimax-regret prediction.

When only ``X1`` is observed at test time, the worst-case regret optimal
predictor is the conditional mean of the multi-domain minimax predictor,
``rho_S(x1) = E[rho_M(X1, X2) | X1 = x1]``. It only needs the ``(X1, X2)``
marginal, so it is estimated by regressing ``rho_M`` evaluated on the
unlabeled pairs onto their ``x1``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import ClassKind, FunctionClass, KernelConfig, TrainingCorpus, linear_basis, pseudo_inverse, second_moment
from .errors import CorpusError
from .fusion import INNOVATION_FLOOR, FusionPlan, _stage, fit_innovation, fuse
from .kernel import fit_kernel
from .predictors import Predictor, SideInfoPredictor, ZeroPredictor
from .single import fit_class

logger = logging.getLogger(__name__)

# below this many unlabeled pairs E[rho_M | X1] is poorly estimated
SMALL_UNLABELED = 50
DEFAULT_VANISH_REL = 1e-3


def project(rho_m: Predictor, corpus: TrainingCorpus, kernel: KernelConfig | None = None) -> Predictor:
    """Kernel estimate of ``E[rho_m(X1, X2) | X1]`` from the unlabeled pairs."""
    if rho_m.domains != (1, 2):
        raise CorpusError("project expects a two-domain predictor")
    if corpus.U < 2:
        raise CorpusError("projection needs at least two unlabeled pairs")
    if corpus.U < SMALL_UNLABELED:
        logger.warning("projection from only %d unlabeled pairs; E[rho_M | X1] is poorly estimated", corpus.U)
    values = rho_m._predict(corpus.unlabeled_x1, corpus.unlabeled_x2)
    return fit_kernel(corpus.unlabeled_x1, values, kernel, domain=1)


def project_split_half(
    corpus: TrainingCorpus, plan: FusionPlan, kernel: KernelConfig | None = None
) -> Predictor:
    """Fuse on the first half of the unlabeled set and project on the second.

    Avoids reusing the same unlabeled pairs for both the fusion and the
    conditional-mean stage, at the price of half the data in each.
    """
    if corpus.U < 4:
        raise CorpusError("split-half projection needs at least four unlabeled pairs")
    half = corpus.U // 2
    first = TrainingCorpus(
        corpus.labeled1_x,
        corpus.labeled1_y,
        corpus.labeled2_x,
        corpus.labeled2_y,
        corpus.unlabeled_x1[:half],
        corpus.unlabeled_x2[:half],
    )
    second = TrainingCorpus(
        corpus.labeled1_x,
        corpus.labeled1_y,
        corpus.labeled2_x,
        corpus.labeled2_y,
        corpus.unlabeled_x1[half:],
        corpus.unlabeled_x2[half:],
    )
    return project(fuse(first, plan, kernel), second, kernel)


def shared_representation(
    corpus: TrainingCorpus, class_b: FunctionClass, kernel: KernelConfig | None = None
) -> Predictor:
    """``E[psi_B(X2) | X1]``: fit ``psi_B`` on labeled2, then regress it on ``X1``.

    Needs no domain-1 labels.
    """
    if corpus.L2 < 1:
        raise CorpusError("shared-representation requires labeled domain-2 examples")
    if corpus.U < 2:
        raise CorpusError("shared-representation needs at least two unlabeled pairs")
    m1, _, n = corpus.dims
    if class_b.kind is ClassKind.ZERO:
        return ZeroPredictor(m1, n, domain=1)
    psi = fit_class(corpus.labeled2_x, corpus.labeled2_y, class_b, 2, kernel)
    values = psi._predict(corpus.unlabeled_x2)
    return fit_kernel(corpus.unlabeled_x1, values, kernel or class_b.kernel, domain=1)


def cross_domain(corpus: TrainingCorpus, class_a: FunctionClass, kernel: KernelConfig | None = None) -> Predictor:
    """The single-domain fit ``phi_A`` on labeled1; domain-2 data cannot improve on it."""
    if class_a.kind is not ClassKind.ZERO and corpus.L1 < 1:
        raise CorpusError("cross-domain prediction needs labeled domain-1 examples")
    return fit_class(corpus.labeled1_x, corpus.labeled1_y, class_a, 1, kernel)


def side_info_linear_nonlinear(corpus: TrainingCorpus, kernel: KernelConfig | None = None) -> SideInfoPredictor:
    """Linear regression on ``X1`` helped by nonparametric side information ``X2``.

    ``rho_S(x1) = E[E[Y|X2]|X1] + G_YW G_WW^+ (x1 - E[E[X1|X2]|X1])`` with
    ``W = X1 - E[X1|X2]``. Every conditional mean is a kernel fit.
    """
    if corpus.L1 < 1 or corpus.L2 < 2 or corpus.U < 2:
        raise CorpusError(f"side-information fit needs L1 >= 1, L2 >= 2, U >= 2; got {corpus.cardinalities()}")
    cfg = kernel or KernelConfig()
    x1u, x2u = corpus.unlabeled_x1, corpus.unlabeled_x2
    with _stage("conditional mean of Y given X2"):
        y_given_x2 = fit_kernel(corpus.labeled2_x, corpus.labeled2_y, cfg, domain=2)
    with _stage("conditional mean of X1 given X2"):
        x1_given_x2 = fit_kernel(x2u, x1u, cfg, domain=2)
        x1_hat = x1_given_x2._predict(x2u)
    with _stage("projection onto X1"):
        base = fit_kernel(x1u, y_given_x2._predict(x2u), cfg, domain=1)
        smoother = fit_kernel(x1u, x1_hat, cfg, domain=1)
    with _stage("innovation moments"):
        w = x1u - x1_hat
        gww = second_moment(w, w)
        g_yw = second_moment(corpus.labeled1_y, corpus.labeled1_x) - second_moment(
            corpus.labeled2_y, x1_given_x2._predict(corpus.labeled2_x)
        )
        floor = INNOVATION_FLOOR * float(np.trace(second_moment(x1u, x1u)))
        gain = g_yw @ pseudo_inverse(0.5 * (gww + gww.T), abs_tol=floor)
    return SideInfoPredictor(base, smoother, gain)


@dataclass(frozen=True)
class ProjectionReport:
    predictor: Predictor
    innovation_norm: float
    vanished: bool
    vanish_tol: float


def check_innovation_vanishes(
    corpus: TrainingCorpus,
    class_a: FunctionClass,
    class_b: FunctionClass,
    kernel: KernelConfig | None = None,
    vanish_rel: float = DEFAULT_VANISH_REL,
) -> ProjectionReport:
    """Measure the projected innovation ``E[rho_{A,B}(X1, X2) | X1]`` on the unlabeled set.

    The single-domain predictor splits as ``phi_A(x1) + E[rho_{A,B} | X1]``;
    when the second term vanishes, domain-2 labels contribute nothing. The
    projected innovation is ``sum_k a_k (E[psi_k(X2)|X1] - eta_k(X1))``.
    ``vanished`` compares its mean squared norm with ``vanish_rel`` times the
    mean squared norm of the fused predictor over the unlabeled set.
    """
    plan = FusionPlan(class_a, class_b)
    fused = fuse(corpus, plan, kernel)
    cfg = kernel or class_a.kernel or class_b.kernel or KernelConfig()
    x1u, x2u = corpus.unlabeled_x1, corpus.unlabeled_x2
    rho_norm = float(np.mean(np.sum(fused._predict(x1u, x2u) ** 2, axis=1)))
    _, m2, n = corpus.dims

    if class_b.kind is ClassKind.ZERO:
        term = np.zeros((corpus.U, n))
    elif class_b.kind is ClassKind.NONPARAMETRIC:
        # no finite basis for B: take rho_M - phi_A as the innovation part
        phi_a = fit_class(corpus.labeled1_x, corpus.labeled1_y, class_a, 1, kernel)
        resid = fused._predict(x1u, x2u) - phi_a._predict(x1u)
        term = fit_kernel(x1u, resid, cfg)._predict(x1u)
    else:
        maps_b = linear_basis(m2, n) if class_b.kind is ClassKind.LINEAR else class_b.maps
        a_kernel = cfg if class_a.kind is ClassKind.NONPARAMETRIC else kernel
        innov = fit_innovation(corpus, class_a, maps_b, a_kernel)
        term = np.zeros((corpus.U, n))
        for k, fmap in enumerate(maps_b):
            if innov.coefficients[k] == 0.0:
                continue
            psi_k = fmap(x2u)
            cond = fit_kernel(x1u, psi_k, cfg)._predict(x1u)
            term += innov.coefficients[k] * (cond - innov.regressors[k]._predict(x1u))
    innovation_norm = float(np.mean(np.sum(term**2, axis=1)))
    tol = vanish_rel * rho_norm
    return ProjectionReport(project(fused, corpus, cfg), innovation_norm, innovation_norm <= tol, tol)
