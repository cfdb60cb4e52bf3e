"""Closed-form Gaussian conditioning, mixtures and seeded samplers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import FunctionClass, TrainingCorpus, _frozen, pseudo_inverse
from ..errors import CorpusError
from ..predictors import LinearPredictor
from .discrete import DiscreteJoint
from .family import FeasibleFamilySpec


def _block_slices(dims):
    m1, m2, n = dims
    return slice(0, m1), slice(m1, m1 + m2), slice(m1 + m2, m1 + m2 + n)


@dataclass(frozen=True, eq=False)
class GaussianModel:
    """Zero-mean jointly Gaussian ``(X1, X2, Y)`` with covariance ``sigma``.

    ``dims = (M1, M2, N)`` gives the block sizes in that order.
    """

    sigma: np.ndarray
    dims: tuple[int, int, int] = (1, 1, 1)

    def __post_init__(self):
        s = _frozen(self.sigma)
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or min(dims) < 1:
            raise CorpusError("dims must be three positive block sizes")
        if s.shape != (sum(dims),) * 2:
            raise CorpusError(f"sigma has shape {s.shape}, expected {(sum(dims),) * 2}")
        if not np.all(np.isfinite(s)):
            raise CorpusError("sigma has non-finite entries")
        if np.max(np.abs(s - s.T)) > 1e-12:
            raise CorpusError("sigma is not symmetric")
        if np.min(np.linalg.eigvalsh(s)) < -1e-10:
            raise CorpusError("sigma is not positive semidefinite")
        object.__setattr__(self, "sigma", s)
        object.__setattr__(self, "dims", dims)

    def block(self, a: str, b: str) -> np.ndarray:
        sl = dict(zip(("X1", "X2", "Y"), _block_slices(self.dims)))
        return self.sigma[sl[a], sl[b]]

    def swapped(self) -> "GaussianModel":
        m1, m2, n = self.dims
        order = np.r_[m1 : m1 + m2, 0:m1, m1 + m2 : m1 + m2 + n]
        return GaussianModel(self.sigma[np.ix_(order, order)], (m2, m1, n))

    def sample(self, n: int, rng: np.random.Generator):
        if n < 0:
            raise CorpusError("sample size must be non-negative")
        # eigen-factor so singular covariances are handled
        w, v = np.linalg.eigh(self.sigma)
        factor = v * np.sqrt(np.clip(w, 0.0, None))
        z = rng.standard_normal((n, self.sigma.shape[0])) @ factor.T
        s1, s2, sy = _block_slices(self.dims)
        return z[:, s1], z[:, s2], z[:, sy]

    def second_moment_y(self) -> float:
        return float(np.trace(self.block("Y", "Y")))

    def family_spec(self) -> FeasibleFamilySpec:
        return _linear_family(self.sigma, self.dims)


def _linear_family(sigma, dims) -> FeasibleFamilySpec:
    s1, s2, sy = _block_slices(dims)
    xs = slice(0, dims[0] + dims[1])
    phi = sigma[sy, s1] @ pseudo_inverse(sigma[s1, s1])
    psi = sigma[sy, s2] @ pseudo_inverse(sigma[s2, s2])
    return FeasibleFamilySpec(
        phi_a=LinearPredictor(phi, 1),
        psi_b=LinearPredictor(psi, 2),
        c=float(np.trace(sigma[sy, sy])),
        class_a=FunctionClass.linear(),
        class_b=FunctionClass.linear(),
        marginal_moment=sigma[xs, xs].copy(),
        marginal_mean=np.zeros(dims[0] + dims[1]),
    )


@dataclass(frozen=True, eq=False)
class Mixture:
    """Finite mixture of zero-mean Gaussian models sharing block sizes."""

    components: tuple[GaussianModel, ...]
    weights: np.ndarray

    def __post_init__(self):
        comps = tuple(self.components)
        w = _frozen(self.weights, ndmin=1).ravel()
        if not comps or len(comps) != w.shape[0]:
            raise CorpusError("mixture needs one weight per component")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise CorpusError("mixture weights must be positive and sum to 1")
        if len({c.dims for c in comps}) != 1:
            raise CorpusError("mixture components have different block sizes")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", w)

    @property
    def dims(self):
        return self.components[0].dims

    @property
    def sigma(self) -> np.ndarray:
        """Overall raw second-moment matrix."""
        return sum(w * c.sigma for w, c in zip(self.weights, self.components))

    def sample(self, n: int, rng: np.random.Generator):
        if n < 0:
            raise CorpusError("sample size must be non-negative")
        labels = rng.choice(len(self.components), size=n, p=self.weights)
        d = sum(self.dims)
        z = np.empty((n, d))
        for j, comp in enumerate(self.components):
            idx = np.flatnonzero(labels == j)
            parts = comp.sample(idx.size, rng)
            z[idx] = np.hstack(parts)
        s1, s2, sy = _block_slices(self.dims)
        return z[:, s1], z[:, s2], z[:, sy]

    def second_moment_y(self) -> float:
        sy = _block_slices(self.dims)[2]
        return float(np.trace(self.sigma[sy, sy]))

    def family_spec(self) -> FeasibleFamilySpec:
        return _linear_family(self.sigma, self.dims)


# ---------------------------------------------------------------------------
# Analytic conditioning
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PartiallyLinearSolution:
    """``E[Y|X1] + gain (X2 - smoother X1)`` as coefficient matrices."""

    mean: np.ndarray
    smoother: np.ndarray
    gain: np.ndarray

    @property
    def coefficients(self) -> tuple[np.ndarray, np.ndarray]:
        """Total coefficients on ``x1`` and on ``x2``."""
        return self.mean - self.gain @ self.smoother, self.gain


@dataclass(frozen=True)
class GaussianReport:
    """Analytic conditional means (coefficient matrices) with their MSE and regret.

    For Gaussians the best linear maps coincide with the conditional means.
    ``regret`` is relative to ``E[Y | X1, X2]``.
    """

    y_given_x1: np.ndarray
    y_given_x2: np.ndarray
    y_given_x12: np.ndarray
    plmmse: PartiallyLinearSolution
    side_info: PartiallyLinearSolution
    mse: dict
    regret: dict

    @property
    def best_linear_x1(self):
        return self.y_given_x1

    @property
    def best_linear_x2(self):
        return self.y_given_x2

    @property
    def best_linear_x12(self):
        return self.y_given_x12


def _linear_mse(syy, syx, sxx, coef) -> float:
    return float(np.trace(syy - coef @ syx.T - syx @ coef.T + coef @ sxx @ coef.T))


def _partially_linear(g: GaussianModel) -> PartiallyLinearSolution:
    s11, s12, s22 = g.block("X1", "X1"), g.block("X1", "X2"), g.block("X2", "X2")
    sy1, sy2 = g.block("Y", "X1"), g.block("Y", "X2")
    p11 = pseudo_inverse(s11)
    smoother = s12.T @ p11
    gww = s22 - smoother @ s12
    gyw = sy2 - sy1 @ p11 @ s12
    floor = 1e-12 * max(float(np.trace(s22)), 1e-300)
    gain = gyw @ pseudo_inverse(0.5 * (gww + gww.T), abs_tol=floor)
    return PartiallyLinearSolution(sy1 @ p11, smoother, gain)


def gaussian_conditionals(g: GaussianModel) -> GaussianReport:
    """Closed-form conditional means of ``Y`` and their errors.

    Singular blocks are handled with the pseudo-inverse. ``side_info`` is
    the partially linear solution with the domains exchanged, i.e. the
    coefficients of ``E[Y|X2] + gain (X1 - smoother X2)``.
    """
    m1, m2, _ = g.dims
    syy = g.block("Y", "Y")
    s1 = g.block("Y", "X1")
    s2 = g.block("Y", "X2")
    s11, s22 = g.block("X1", "X1"), g.block("X2", "X2")
    sx = g.sigma[: m1 + m2, : m1 + m2]
    syx = np.hstack([s1, s2])
    c1 = s1 @ pseudo_inverse(s11)
    c2 = s2 @ pseudo_inverse(s22)
    c12 = syx @ pseudo_inverse(sx)
    pl = _partially_linear(g)
    pl_coef = np.hstack(pl.coefficients)
    mse = {
        "zero": float(np.trace(syy)),
        "x1": _linear_mse(syy, s1, s11, c1),
        "x2": _linear_mse(syy, s2, s22, c2),
        "x12": _linear_mse(syy, syx, sx, c12),
        "plmmse": _linear_mse(syy, syx, sx, pl_coef),
    }
    regret = {k: v - mse["x12"] for k, v in mse.items()}
    return GaussianReport(c1, c2, c12, pl, _partially_linear(g.swapped()), mse, regret)


# ---------------------------------------------------------------------------
# Samplers and corpora
# ---------------------------------------------------------------------------


def sample_gaussian(g: GaussianModel, n: int, seed: int):
    """``n`` seeded draws ``(x1, x2, y)`` from ``g``."""
    return g.sample(n, np.random.default_rng(seed))


def sample_mixture(components: Sequence[GaussianModel], weights, n: int, seed: int):
    return Mixture(tuple(components), np.asarray(weights, dtype=float)).sample(n, np.random.default_rng(seed))


def sample_discrete(dj: DiscreteJoint, n: int, seed: int):
    return dj.sample(n, np.random.default_rng(seed))


def build_corpus(model, L1: int, L2: int, U: int, seed: int) -> TrainingCorpus:
    """Three independent seeded draws marginalised to ``(x1, y)``, ``(x2, y)`` and ``(x1, x2)``.

    ``model`` is anything with ``sample(n, rng)`` returning ``(x1, x2, y)``.
    """
    if min(L1, L2) < 0 or U < 1:
        raise CorpusError(f"invalid counts L1={L1}, L2={L2}, U={U}")
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)]
    x1a, _, ya = model.sample(L1, rngs[0])
    _, x2b, yb = model.sample(L2, rngs[1])
    x1u, x2u, _ = model.sample(U, rngs[2])
    return TrainingCorpus(x1a, ya, x2b, yb, x1u, x2u)


# ---------------------------------------------------------------------------
# Named models
# ---------------------------------------------------------------------------

FEASIBLE_SIGMA = np.array([[1.0, 0.0, 0.1], [0.0, 1.0, 0.2], [0.1, 0.2, 1.0]])
MIXTURE_SIGMAS = (
    np.array([[1.0, 0.0, 0.2], [0.0, 1.0, 0.0], [0.2, 0.0, 1.0]]),
    np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.4], [0.0, 0.4, 1.0]]),
)
INFEASIBLE_SIGMA = np.array([[2.0, 0.0, 0.2], [0.0, 1.0, 0.2], [0.2, 0.2, 1.0]])


def preset(name: str):
    """Scalar example models: ``feasible-gaussian``, ``feasible-mixture``, ``infeasible-gaussian``.

    The three share ``phi_A = 0.1 x1``, ``psi_B = 0.2 x2`` and ``E[Y^2] = 1``;
    the last has ``E[X1^2] = 2`` and so a different ``(X1, X2)`` marginal.
    """
    if name == "feasible-gaussian":
        return GaussianModel(FEASIBLE_SIGMA)
    if name == "feasible-mixture":
        return Mixture(tuple(GaussianModel(s) for s in MIXTURE_SIGMAS), np.array([0.5, 0.5]))
    if name == "infeasible-gaussian":
        return GaussianModel(INFEASIBLE_SIGMA)
    raise CorpusError(f"unknown model preset '{name}'")


PRESETS = ("feasible-gaussian", "feasible-mixture", "infeasible-gaussian")
