"""The feasible family: all joints consistent with the known statistics.

A joint law of ``(X1, X2, Y)`` is feasible when its class-A optimal
predictor from ``X1`` is ``phi_A``, its class-B optimal predictor from
``X2`` is ``psi_B``, its ``(X1, X2)`` marginal is the given one and
``E[||Y||^2] = c``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import ClassKind, FunctionClass, linear_basis
from ..errors import CorpusError
from ..predictors import Predictor, evaluate_maps
from .discrete import DiscreteJoint, exact_class_optimal

CONDITIONS = ("A-optimality", "B-optimality", "marginal", "second-moment")
DEFAULT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class FeasibleFamilySpec:
    """Known statistics defining a feasible family.

    ``marginal12`` is an exact pmf over concatenated ``(x1, x2)``
    coordinates; ``marginal_moment`` is the raw second-moment matrix of the
    stacked ``(x1, x2)`` used by the Monte-Carlo check. At least one must be
    given.
    """

    phi_a: Predictor
    psi_b: Predictor
    c: float
    class_a: FunctionClass
    class_b: FunctionClass
    marginal12: dict | None = None
    marginal_moment: np.ndarray | None = None
    marginal_mean: np.ndarray | None = None

    def __post_init__(self):
        if not self.c > 0:
            raise CorpusError("c = E||Y||^2 must be positive")
        if self.marginal12 is None and self.marginal_moment is None:
            raise CorpusError("a family needs the (x1, x2) marginal or its moments")
        if self.marginal12 is not None and abs(sum(self.marginal12.values()) - 1.0) > 1e-12:
            raise CorpusError("marginal pmf does not sum to 1")


def family_of(dj: DiscreteJoint, class_a: FunctionClass, class_b: FunctionClass) -> FeasibleFamilySpec:
    """The family whose known statistics are those of ``dj``."""
    return FeasibleFamilySpec(
        phi_a=exact_class_optimal(dj, 1, class_a),
        psi_b=exact_class_optimal(dj, 2, class_b),
        c=dj.second_moment_y(),
        class_a=class_a,
        class_b=class_b,
        marginal12=dj.marginal12(),
    )


@dataclass(frozen=True)
class MembershipVerdict:
    member: bool
    residuals: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    @property
    def failing(self) -> list[str]:
        return [c for c in CONDITIONS if self.residuals[c] > self.tolerances[c]]


def check_membership(dj: DiscreteJoint, spec: FeasibleFamilySpec, tol: float = DEFAULT_TOL) -> MembershipVerdict:
    """Check the four feasibility conditions exactly on the support of ``dj``.

    The optimality conditions compare the exact class-optimal predictors of
    ``dj`` with the family's predictors on every atom.
    """
    if spec.marginal12 is None:
        raise CorpusError("exact membership needs the marginal pmf")
    res = {}
    for name, which, cls, target in (
        ("A-optimality", 1, spec.class_a, spec.phi_a),
        ("B-optimality", 2, spec.class_b, spec.psi_b),
    ):
        x = dj.domain(which)
        own = exact_class_optimal(dj, which, cls)._predict(x)
        res[name] = float(np.max(np.abs(own - target._predict(x))))
    marg = dj.marginal12()
    keys = set(marg) | set(spec.marginal12)
    res["marginal"] = max(abs(marg.get(k, 0.0) - spec.marginal12.get(k, 0.0)) for k in keys)
    res["second-moment"] = abs(dj.second_moment_y() - spec.c)
    tols = {c: tol for c in CONDITIONS}
    return MembershipVerdict(all(res[c] <= tol for c in CONDITIONS), res, tols)


def _generator_values(cls: FunctionClass, x: np.ndarray, out_dim: int) -> np.ndarray:
    if cls.kind is ClassKind.ZERO:
        return np.zeros((x.shape[0], 0, out_dim))
    if cls.kind is ClassKind.LINEAR:
        return evaluate_maps(linear_basis(x.shape[1], out_dim), x, out_dim)
    if cls.kind is ClassKind.BASIS:
        return evaluate_maps(cls.maps, x, out_dim)
    raise CorpusError("Monte-Carlo membership supports zero, linear and basis classes only")


def _mc_excess(stats: np.ndarray, target, n_sigma: float) -> tuple[float, float]:
    """Largest ``|mean - target|`` and the matching ``n_sigma * sd / sqrt(n)`` bound.

    Returns the worst ratio-violating pair, so ``residual <= tolerance``
    holds exactly when every statistic is within its own bound.
    """
    if stats.shape[1] == 0:
        return 0.0, 1e-12
    dev = np.abs(stats.mean(axis=0) - target)
    bound = n_sigma * stats.std(axis=0) / np.sqrt(stats.shape[0]) + 1e-12
    worst = int(np.argmax(dev / bound))
    return float(dev[worst]), float(bound[worst])


def check_membership_mc(
    x1: np.ndarray, x2: np.ndarray, y: np.ndarray, spec: FeasibleFamilySpec, n_sigma: float = 3.0
) -> MembershipVerdict:
    """Monte-Carlo membership check on a paired sample ``(x1, x2, y)``.

    Optimality is checked through the orthogonality of the residuals
    ``y - phi_A(x1)`` to every class generator, the marginal through its raw
    second moments (and means when given), and ``c`` directly. Every
    statistic must lie within ``n_sigma`` standard errors of its target.
    """
    if spec.marginal_moment is None:
        raise CorpusError("Monte-Carlo membership needs the marginal second moments")
    x1, x2, y = (np.asarray(a, dtype=float) for a in (x1, x2, y))
    if x1.shape[0] < 2:
        raise CorpusError("Monte-Carlo membership needs at least two samples")
    n_out = y.shape[1]
    res, tols = {}, {}
    for name, x, cls, pred in (
        ("A-optimality", x1, spec.class_a, spec.phi_a),
        ("B-optimality", x2, spec.class_b, spec.psi_b),
    ):
        gens = _generator_values(cls, x, n_out)
        resid = y - pred._predict(x)
        stats = np.einsum("nkd,nd->nk", gens, resid)
        res[name], tols[name] = _mc_excess(stats, 0.0, n_sigma)
    z = np.hstack([x1, x2])
    stats = (z[:, :, None] * z[:, None, :]).reshape(z.shape[0], -1)
    target = np.asarray(spec.marginal_moment, dtype=float).ravel()
    if spec.marginal_mean is not None:
        stats = np.hstack([stats, z])
        target = np.concatenate([target, np.asarray(spec.marginal_mean, dtype=float).ravel()])
    res["marginal"], tols["marginal"] = _mc_excess(stats, target, n_sigma)
    res["second-moment"], tols["second-moment"] = _mc_excess(np.sum(y**2, axis=1)[:, None], spec.c, n_sigma)
    return MembershipVerdict(all(res[c] <= tols[c] for c in CONDITIONS), res, tols)
