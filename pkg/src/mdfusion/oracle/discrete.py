"""Exact computation on finite-support joint distributions of ``(X1, X2, Y)``.

Every function class is represented on a finite support by a finite set of
generator functions: coordinate maps for linear classes, the feature maps of
a basis class, and indicator functions of the support points for the class
of all functions. Class-optimal predictors are then probability-weighted
least-squares fits over the generators, solved exactly on the support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..core import ClassKind, FunctionClass, _frozen, linear_basis
from ..errors import CorpusError, OutOfScopeError
from ..predictors import Predictor, evaluate_maps

PROB_TOL = 1e-12
LSTSQ_RCOND = 1e-12


def _key(row) -> tuple:
    return tuple(float(v) for v in row)


@dataclass(frozen=True, eq=False)
class DiscreteJoint:
    """Probability table over atoms ``(x1, x2, y)``.

    Attributes
    ----------
    x1, x2, y : ndarray
        Atom coordinates, one row per atom.
    probs : ndarray
        Positive atom probabilities summing to one.
    """

    x1: np.ndarray
    x2: np.ndarray
    y: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        x1, x2, y = _frozen(self.x1), _frozen(self.x2), _frozen(self.y)
        p = _frozen(self.probs, ndmin=1).ravel()
        p.flags.writeable = False
        k = p.shape[0]
        if k == 0:
            raise CorpusError("a discrete joint needs at least one atom")
        if not (x1.shape[0] == x2.shape[0] == y.shape[0] == k):
            raise CorpusError("atom coordinate arrays and probabilities have different lengths")
        if np.any(p <= 0) or not np.all(np.isfinite(p)):
            raise CorpusError("atom probabilities must be positive")
        if abs(math.fsum(p) - 1.0) > PROB_TOL:
            raise CorpusError(f"atom probabilities sum to {math.fsum(p)!r}, not 1")
        for name, a in (("x1", x1), ("x2", x2), ("y", y)):
            if not np.all(np.isfinite(a)):
                raise CorpusError(f"{name} coordinates must be finite")
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "x2", x2)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_atoms(cls, support: Sequence[tuple], probs: Sequence[float]) -> "DiscreteJoint":
        """Build from a list of ``(x1, x2, y)`` triples and their probabilities."""
        if len(support) != len(probs):
            raise CorpusError("support and probabilities have different lengths")
        rows = [tuple(np.atleast_1d(np.asarray(c, dtype=float)) for c in atom) for atom in support]
        for i, r in enumerate(rows):
            if [c.shape for c in r] != [c.shape for c in rows[0]]:
                raise CorpusError(f"atom {i} has inconsistent dimensions")
        return cls(
            np.vstack([r[0] for r in rows]),
            np.vstack([r[1] for r in rows]),
            np.vstack([r[2] for r in rows]),
            np.asarray(probs, dtype=float),
        )

    @property
    def size(self) -> int:
        return self.probs.shape[0]

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.x1.shape[1], self.x2.shape[1], self.y.shape[1]

    @property
    def support(self) -> list[tuple]:
        return [(self.x1[k].copy(), self.x2[k].copy(), self.y[k].copy()) for k in range(self.size)]

    def domain(self, which: int) -> np.ndarray:
        if which not in (1, 2):
            raise ValueError("domain must be 1 or 2")
        return self.x1 if which == 1 else self.x2

    def swapped(self) -> "DiscreteJoint":
        return DiscreteJoint(self.x2, self.x1, self.y, self.probs)

    def expect(self, values) -> np.ndarray:
        """Expectation of per-atom ``values`` (leading axis indexes atoms)."""
        v = np.asarray(values, dtype=float)
        return np.tensordot(self.probs, v, axes=(0, 0))

    def second_moment_y(self) -> float:
        """``c = E[||Y||^2]``."""
        return float(self.expect(np.sum(self.y**2, axis=1)))

    def marginal12(self) -> dict[tuple, float]:
        """Pmf of ``(x1, x2)`` keyed by the concatenated coordinates."""
        out: dict[tuple, float] = {}
        for k in range(self.size):
            key = _key(self.x1[k]) + _key(self.x2[k])
            out[key] = out.get(key, 0.0) + float(self.probs[k])
        return out

    def conditional_mean(self, values, given: int | tuple[int, ...] = 1) -> np.ndarray:
        """Per-atom ``E[values | X_given]`` (``given`` is 1, 2 or ``(1, 2)``)."""
        v = np.asarray(values, dtype=float)
        groups = _group_keys(self, given)
        out = np.empty_like(v)
        for idx in groups.values():
            w = self.probs[idx]
            out[idx] = np.tensordot(w / w.sum(), v[idx], axes=(0, 0))
        return out

    def sample(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if n < 0:
            raise CorpusError("sample size must be non-negative")
        idx = rng.choice(self.size, size=n, p=self.probs)
        return self.x1[idx], self.x2[idx], self.y[idx]

    def to_text(self) -> str:
        """Human-readable table: one atom per line, coordinates then probability."""
        m1, m2, n = self.dims
        header = " ".join(
            [f"x1_{i}" for i in range(m1)] + [f"x2_{i}" for i in range(m2)] + [f"y_{i}" for i in range(n)] + ["p"]
        )
        lines = [header]
        for k in range(self.size):
            vals = list(self.x1[k]) + list(self.x2[k]) + list(self.y[k]) + [self.probs[k]]
            lines.append(" ".join(repr(float(v)) for v in vals))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "DiscreteJoint":
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if not lines:
            raise CorpusError("empty probability table")
        cols = lines[0].split()
        if cols[-1] != "p":
            raise CorpusError("probability table header must end with 'p'")
        m1 = sum(c.startswith("x1_") for c in cols)
        m2 = sum(c.startswith("x2_") for c in cols)
        n = sum(c.startswith("y_") for c in cols)
        rows = np.array([[float(v) for v in ln.split()] for ln in lines[1:]])
        if rows.ndim != 2 or rows.shape[1] != len(cols):
            raise CorpusError("probability table rows do not match the header")
        return cls(rows[:, :m1], rows[:, m1 : m1 + m2], rows[:, m1 + m2 : m1 + m2 + n], rows[:, -1])


def _group_keys(dj: DiscreteJoint, given) -> dict[tuple, list[int]]:
    given = (given,) if isinstance(given, int) else tuple(given)
    groups: dict[tuple, list[int]] = {}
    for k in range(dj.size):
        key = sum((_key(dj.domain(d)[k]) for d in given), ())
        groups.setdefault(key, []).append(k)
    return groups


# ---------------------------------------------------------------------------
# Generators of function classes on a finite support
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Generators:
    """Finite spanning set of a function class restricted to a support.

    ``table`` holds the distinct support points when the class is all
    functions; the generators are then indicator functions times unit
    vectors of the label space.
    """

    domain: int
    in_dim: int
    out_dim: int
    maps: tuple = ()
    table: np.ndarray | None = None

    @property
    def size(self) -> int:
        if self.table is not None:
            return self.table.shape[0] * self.out_dim
        return len(self.maps)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """``(n, size, out_dim)`` generator values."""
        n = x.shape[0]
        if self.table is not None:
            eq = np.all(x[:, None, :] == self.table[None, :, :], axis=2).astype(float)
            out = np.zeros((n, self.table.shape[0], self.out_dim, self.out_dim))
            for d in range(self.out_dim):
                out[:, :, d, d] = eq
            return out.reshape(n, self.size, self.out_dim)
        if not self.maps:
            return np.zeros((n, 0, self.out_dim))
        return evaluate_maps(self.maps, x, self.out_dim)

    def describe(self) -> dict:
        if self.table is not None:
            return {"domain": self.domain, "indicators": self.table.tolist()}
        return {"domain": self.domain, "maps": [m.name for m in self.maps]}


def class_generators(cls: FunctionClass, points: np.ndarray, out_dim: int, domain: int) -> Generators:
    """Generators of ``cls`` on the given support points of one domain."""
    in_dim = points.shape[1]
    if cls.kind is ClassKind.ZERO:
        return Generators(domain, in_dim, out_dim)
    if cls.kind is ClassKind.LINEAR:
        return Generators(domain, in_dim, out_dim, maps=linear_basis(in_dim, out_dim))
    if cls.kind is ClassKind.BASIS:
        return Generators(domain, in_dim, out_dim, maps=cls.maps)
    table = np.unique(points, axis=0)
    table.flags.writeable = False
    return Generators(domain, in_dim, out_dim, table=table)


@dataclass(frozen=True, eq=False)
class ExactPredictor(Predictor):
    """Linear combination of generators; evaluates anywhere, exact on the support."""

    generators: tuple[Generators, ...]
    coef: np.ndarray
    domains: tuple[int, ...]
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "coef", _frozen(self.coef, ndmin=1).ravel())
        object.__setattr__(self, "generators", tuple(self.generators))
        if self.coef.shape[0] != sum(g.size for g in self.generators):
            raise ValueError("coefficient count does not match the generators")

    @property
    def in_dims(self):
        dims = {g.domain: g.in_dim for g in self.generators}
        return tuple(dims[d] for d in self.domains)

    @property
    def out_dim(self):
        return self.generators[0].out_dim

    def features(self, *rows) -> np.ndarray:
        by_domain = dict(zip(self.domains, rows))
        return np.concatenate([g.evaluate(by_domain[g.domain]) for g in self.generators], axis=1)

    def _predict(self, *rows):
        return np.einsum("nkd,k->nd", self.features(*rows), self.coef)

    def at_atoms(self, dj: DiscreteJoint) -> np.ndarray:
        """Values on every atom of ``dj`` as ``(K, N)``."""
        return self._predict(*(dj.domain(d) for d in self.domains))

    def describe(self, include_data=False):
        return {
            "type": "exact",
            "domains": list(self.domains),
            "generators": [g.describe() for g in self.generators],
            "coef": self.coef.tolist(),
            **self.info,
        }


def weighted_lstsq(probs: np.ndarray, feats: np.ndarray, target: np.ndarray, scale: float | None = None) -> np.ndarray:
    """Coefficients minimising ``sum_k p_k ||target_k - feats_k @ a||^2``.

    ``feats`` is ``(K, G, N)`` and ``target`` is ``(K, N)``. Redundant
    generators get the minimum-norm solution; fitted values are unique.
    Singular values of the weighted design below ``LSTSQ_RCOND`` times
    ``max(sigma_max, scale)`` are dropped, so passing the norm of the
    unresidualised features as ``scale`` discards directions that are zero
    up to rounding.
    """
    k, g, n = feats.shape
    if g == 0:
        return np.zeros(0)
    sw = np.sqrt(probs)
    design = (feats * sw[:, None, None]).transpose(0, 2, 1).reshape(k * n, g)
    rhs = (target * sw[:, None]).reshape(k * n)
    u, sv, vt = np.linalg.svd(design, full_matrices=False)
    cutoff = LSTSQ_RCOND * max(sv[0] if sv.size else 0.0, scale or 0.0)
    keep = sv > cutoff
    if not np.any(keep):
        return np.zeros(g)
    return vt[keep].T @ ((u[:, keep].T @ rhs) / sv[keep])


def _fit(dj: DiscreteJoint, gens: Sequence[Generators], domains: tuple[int, ...], target) -> ExactPredictor:
    rows = [dj.domain(d) for d in domains]
    pred = ExactPredictor(tuple(gens), np.zeros(sum(g.size for g in gens)), domains)
    coef = weighted_lstsq(dj.probs, pred.features(*rows), target)
    return ExactPredictor(tuple(gens), coef, domains)


def exact_class_optimal(dj: DiscreteJoint, which_domain: int, cls: FunctionClass, target=None) -> ExactPredictor:
    """Exact class-optimal predictor of ``Y`` (or of ``target``) from one domain.

    For the class of all functions this is the conditional-mean table over
    the domain's support points.
    """
    x = dj.domain(which_domain)
    t = dj.y if target is None else np.asarray(target, dtype=float)
    gens = class_generators(cls, x, t.shape[1], which_domain)
    return _fit(dj, [gens], (which_domain,), t)


def _check_pair(class_a: FunctionClass, class_b: FunctionClass):
    if class_a.kind is ClassKind.NONPARAMETRIC and class_b.kind is ClassKind.NONPARAMETRIC:
        raise OutOfScopeError(
            "out of scope: C = all functions of (X1,X2) requires paired labeled data the problem setting lacks"
        )


def exact_minimax(dj: DiscreteJoint, class_a: FunctionClass, class_b: FunctionClass) -> ExactPredictor:
    """Least-squares optimal member of ``C = A + B`` on the support.

    When exactly one class is all functions, the result is also computed
    through the innovation decomposition and the largest pointwise gap
    between the two is stored as ``info["decomposition_gap"]``.
    """
    _check_pair(class_a, class_b)
    _, _, n = dj.dims
    gens = (
        class_generators(class_a, dj.x1, n, 1),
        class_generators(class_b, dj.x2, n, 2),
    )
    direct = _fit(dj, gens, (1, 2), dj.y)
    a_all = class_a.kind is ClassKind.NONPARAMETRIC
    b_all = class_b.kind is ClassKind.NONPARAMETRIC
    if a_all or b_all:
        split = exact_innovation(dj, class_a, class_b, swap=b_all)
        gap = float(np.max(np.abs(split.total - direct.at_atoms(dj))))
        direct = ExactPredictor(direct.generators, direct.coef, direct.domains, {"decomposition_gap": gap})
    return direct


@dataclass(frozen=True, eq=False)
class InnovationSplit:
    """``rho_C = base + innovation`` evaluated on the atoms.

    Unswapped: ``base = phi_A(x1)`` and the innovation spans
    ``psi_k(x2) - eta_k(x1)``. Swapped: ``base = psi_B(x2)`` and the roles
    of the domains are exchanged.
    """

    base: np.ndarray
    innovation: np.ndarray
    coefficients: np.ndarray
    components: np.ndarray
    swapped: bool

    @property
    def total(self) -> np.ndarray:
        return self.base + self.innovation


def exact_innovation(
    dj: DiscreteJoint, class_a: FunctionClass, class_b: FunctionClass, swap: bool = False
) -> InnovationSplit:
    """Exact decomposition ``rho_C = phi_A + sum_k a_k (psi_k - eta_k)``.

    ``eta_k`` is the class-A optimal predictor of ``psi_k(X2)`` from ``X1``.
    With ``swap`` the decomposition is taken around ``psi_B`` instead.
    """
    _check_pair(class_a, class_b)
    if swap:
        inner = exact_innovation(dj.swapped(), class_b, class_a)
        return InnovationSplit(inner.base, inner.innovation, inner.coefficients, inner.components, True)
    _, _, n = dj.dims
    phi_a = exact_class_optimal(dj, 1, class_a).at_atoms(dj)
    gb = class_generators(class_b, dj.x2, n, 2)
    psi = gb.evaluate(dj.x2)
    rho = np.empty_like(psi)
    for k in range(gb.size):
        eta_k = exact_class_optimal(dj, 1, class_a, target=psi[:, k, :]).at_atoms(dj)
        rho[:, k, :] = psi[:, k, :] - eta_k
    scale = float(np.sqrt(dj.expect(np.sum(psi**2, axis=(1, 2))))) if gb.size else 0.0
    coef = weighted_lstsq(dj.probs, rho, dj.y, scale)
    innovation = np.einsum("kgd,g->kd", rho, coef) if gb.size else np.zeros_like(dj.y)
    return InnovationSplit(phi_a, innovation, coef, rho, False)


def exact_single_domain(
    dj: DiscreteJoint, class_a: FunctionClass, class_b: FunctionClass, form: str = "direct"
) -> np.ndarray:
    """Exact ``E[rho_C | X1]`` on the atoms.

    ``form`` selects the route: ``"direct"`` conditions the fused predictor,
    ``"phi"`` uses ``phi_A(x1) + E[innovation | X1]`` and ``"psi"`` uses
    ``E[psi_B(X2) + innovation' | X1]`` with the decomposition around ``psi_B``.
    """
    if form == "direct":
        return dj.conditional_mean(exact_minimax(dj, class_a, class_b).at_atoms(dj), 1)
    if form == "phi":
        split = exact_innovation(dj, class_a, class_b)
        return split.base + dj.conditional_mean(split.innovation, 1)
    if form == "psi":
        split = exact_innovation(dj, class_a, class_b, swap=True)
        return dj.conditional_mean(split.total, 1)
    raise ValueError(f"unknown form '{form}'")


# ---------------------------------------------------------------------------
# Errors, regret and reflection
# ---------------------------------------------------------------------------


def exact_mse(dj: DiscreteJoint, values) -> float:
    """``E[||Y - values||^2]`` for per-atom predictions."""
    r = dj.y - np.asarray(values, dtype=float)
    return float(dj.expect(np.sum(r**2, axis=1)))


def exact_mmse(dj: DiscreteJoint, given: int | tuple[int, ...] = (1, 2)) -> float:
    return exact_mse(dj, dj.conditional_mean(dj.y, given))


def exact_regret(dj: DiscreteJoint, values, given: int | tuple[int, ...] = (1, 2)) -> float:
    """Regret as MSE minus MMSE given the observed domains."""
    return exact_mse(dj, values) - exact_mmse(dj, given)


def exact_regret_distance(dj: DiscreteJoint, values, given: int | tuple[int, ...] = (1, 2)) -> float:
    """Regret as ``E[||values - E[Y | X_given]||^2]``."""
    d = np.asarray(values, dtype=float) - dj.conditional_mean(dj.y, given)
    return float(dj.expect(np.sum(d**2, axis=1)))


def reflect(dj: DiscreteJoint, rho_c) -> DiscreteJoint:
    """Pushforward of ``(x1, x2, 2 rho_C(x1, x2) - y)``.

    ``rho_c`` is a two-domain predictor or its per-atom values. Atoms that
    land on the same coordinates are merged by summing probabilities.
    """
    values = rho_c.at_atoms(dj) if isinstance(rho_c, ExactPredictor) else (
        rho_c._predict(dj.x1, dj.x2) if isinstance(rho_c, Predictor) else np.asarray(rho_c, dtype=float)
    )
    y_new = 2.0 * values - dj.y
    merged: dict[tuple, int] = {}
    keep, probs = [], []
    for k in range(dj.size):
        key = (_key(dj.x1[k]), _key(dj.x2[k]), _key(y_new[k]))
        if key in merged:
            probs[merged[key]].append(dj.probs[k])
        else:
            merged[key] = len(keep)
            keep.append(k)
            probs.append([dj.probs[k]])
    p = np.array([math.fsum(g) for g in probs])
    idx = np.array(keep)
    return DiscreteJoint(dj.x1[idx], dj.x2[idx], y_new[idx], p / math.fsum(p))


def same_joint(a: DiscreteJoint, b: DiscreteJoint, tol: float = 0.0) -> bool:
    """Whether two tables define the same pmf up to ``tol``.

    Atoms are paired when every coordinate agrees within ``tol``; paired
    probabilities must also agree within ``tol``. With ``tol = 0`` the
    comparison is exact.
    """
    if a.size != b.size or a.dims != b.dims:
        return False
    ca = np.hstack([a.x1, a.x2, a.y])
    cb = np.hstack([b.x1, b.x2, b.y])
    used = np.zeros(b.size, dtype=bool)
    for k in range(a.size):
        close = np.all(np.abs(cb - ca[k]) <= tol, axis=1) & ~used
        match = np.flatnonzero(close & (np.abs(b.probs - a.probs[k]) <= tol))
        if match.size == 0:
            return False
        used[match[0]] = True
    return True


# ---------------------------------------------------------------------------
# Random instances
# ---------------------------------------------------------------------------


def random_joint(
    seed: int,
    dims: tuple[int, int, int] = (1, 1, 1),
    size: int | None = None,
    rational: bool = False,
    grid: int = 2,
) -> DiscreteJoint:
    """Seeded random table with 3-8 atoms on small integer grids.

    ``x`` coordinates are integers in ``[-grid, grid]`` so support values
    repeat across atoms; ``y`` coordinates are multiples of 1/4. With
    ``rational`` the probabilities are small-integer weights over their
    sum (so the table can be realised exactly by replicated samples),
    otherwise Dirichlet draws.
    """
    rng = np.random.default_rng(seed)
    m1, m2, n = dims
    k = int(size) if size is not None else int(rng.integers(3, 9))
    seen: set[tuple] = set()
    atoms = []
    while len(atoms) < k:
        x1 = rng.integers(-grid, grid + 1, size=m1).astype(float)
        x2 = rng.integers(-grid, grid + 1, size=m2).astype(float)
        y = rng.integers(-8, 9, size=n) / 4.0
        key = (_key(x1), _key(x2), _key(y))
        if key not in seen:
            seen.add(key)
            atoms.append((x1, x2, y))
    if rational:
        w = rng.integers(1, 10, size=k).astype(float)
    else:
        w = rng.dirichlet(np.ones(k))
    return DiscreteJoint.from_atoms(atoms, w / math.fsum(w))


def rational_counts(dj: DiscreteJoint, max_denominator: int = 10_000) -> np.ndarray:
    """Smallest integer atom counts proportional to the probabilities."""
    from fractions import Fraction

    fr = [Fraction(float(p)).limit_denominator(max_denominator) for p in dj.probs]
    lcm = 1
    for f in fr:
        lcm = lcm * f.denominator // math.gcd(lcm, f.denominator)
    counts = np.array([int(f * lcm) for f in fr])
    g = np.gcd.reduce(counts)
    return counts // g


def exact_corpus(dj: DiscreteJoint, repeats: int = 1):
    """Training corpus whose sample moments equal the table's exact moments.

    Every set holds each atom's projection replicated in proportion to its
    (rational) probability, times ``repeats``.
    """
    from ..core import TrainingCorpus

    counts = rational_counts(dj) * repeats
    idx = np.repeat(np.arange(dj.size), counts)
    return TrainingCorpus(dj.x1[idx], dj.y[idx], dj.x2[idx], dj.y[idx], dj.x1[idx], dj.x2[idx])
