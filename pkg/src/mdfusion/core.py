"""Core data types: training corpora, function classes, moments and the guarded pseudo-inverse."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import ClassSpecError, CorpusError

DEFAULT_PINV_RTOL = 1e-10


def _frozen(a, ndmin=2) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True, ndmin=ndmin)
    out.flags.writeable = False
    return out


def as_rows(x, dim: int | None = None) -> tuple[np.ndarray, bool]:
    """Coerce ``x`` to an ``(n, dim)`` float array.

    Returns the array and a flag telling whether the input was a single
    vector (so the caller can squeeze the output back).
    """
    arr = np.asarray(x, dtype=float)
    single = False
    if arr.ndim == 0:
        arr, single = arr.reshape(1, 1), True
    elif arr.ndim == 1:
        if dim == 1 and arr.shape[0] != 1:
            # a flat array of scalar samples
            arr = arr.reshape(-1, 1)
        else:
            arr, single = arr.reshape(1, -1), True
    if dim is not None and arr.shape[1] != dim:
        raise CorpusError(f"expected inputs of dimension {dim}, got {arr.shape[1]}")
    return arr, single


# ---------------------------------------------------------------------------
# Linear algebra
# ---------------------------------------------------------------------------


_TINY = np.finfo(float).tiny


def pseudo_inverse(m, rel_tol: float = DEFAULT_PINV_RTOL, abs_tol: float = 0.0) -> np.ndarray:
    """Moore-Penrose pseudo-inverse through the SVD.

    Singular values below ``rel_tol * sigma_max`` (or below ``abs_tol``)
    are treated as zero.
    """
    a = np.atleast_2d(np.asarray(m, dtype=float))
    if not np.all(np.isfinite(a)):
        raise ValueError("pseudo_inverse: matrix has non-finite entries")
    if rel_tol <= 0:
        raise ValueError("pseudo_inverse: rel_tol must be positive")
    if a.size == 0:
        return np.zeros(a.shape[::-1])
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    smax = s[0] if s.size else 0.0
    if smax == 0.0 or smax <= abs_tol:
        return np.zeros(a.shape[::-1])
    keep = (s > rel_tol * smax) & (s > abs_tol) & (s > _TINY)
    inv_s = np.zeros_like(s)
    inv_s[keep] = 1.0 / s[keep]
    return (vt.T * inv_s) @ u.T


def second_moment(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Sample cross moment ``(1/n) sum a_i b_i^T`` for row-stacked samples."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[0] != b.shape[0]:
        raise CorpusError(f"moment: {a.shape[0]} rows vs {b.shape[0]} rows")
    if a.shape[0] == 0:
        raise CorpusError("no samples")
    return a.T @ b / a.shape[0]


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentSet:
    """Second-order moment matrices keyed by ordered role pairs.

    Only one orientation of each pair needs to be stored; :meth:`get`
    returns the transpose for the reversed key.
    """

    gamma: Mapping[tuple[str, str], np.ndarray] = field(default_factory=dict)
    sample_counts: Mapping[tuple[str, str], int] = field(default_factory=dict)

    def __post_init__(self):
        frozen = {k: _frozen(v) for k, v in self.gamma.items()}
        object.__setattr__(self, "gamma", frozen)
        object.__setattr__(self, "sample_counts", dict(self.sample_counts))
        for (a, b), g in frozen.items():
            if (b, a) in frozen and not np.array_equal(frozen[(b, a)], g.T):
                if not np.allclose(frozen[(b, a)], g.T, atol=1e-12, rtol=0):
                    raise ValueError(f"moments ({a},{b}) and ({b},{a}) are not transposes")
            if a == b:
                sym = 0.5 * (g + g.T)
                if np.max(np.abs(g - sym), initial=0.0) > 1e-10:
                    raise ValueError(f"moment ({a},{a}) is not symmetric")
                eig = np.linalg.eigvalsh(sym) if sym.size else np.zeros(0)
                scale = max(1.0, float(np.max(np.abs(eig), initial=0.0)))
                if eig.size and eig.min() < -1e-10 * scale:
                    raise ValueError(f"moment ({a},{a}) is not positive semidefinite")

    def __contains__(self, key) -> bool:
        a, b = key
        return (a, b) in self.gamma or (b, a) in self.gamma

    def get(self, a: str, b: str) -> np.ndarray:
        if (a, b) in self.gamma:
            return self.gamma[(a, b)]
        if (b, a) in self.gamma:
            return self.gamma[(b, a)].T
        raise KeyError(f"moment ({a},{b}) not available")

    def count(self, a: str, b: str) -> int:
        return self.sample_counts.get((a, b), self.sample_counts.get((b, a), 0))

    def merged(self, other: "MomentSet") -> "MomentSet":
        return MomentSet({**self.gamma, **other.gamma}, {**self.sample_counts, **other.sample_counts})


def estimate_moments(samples: Sequence[tuple], roles: tuple[str, str] = ("A", "B")) -> MomentSet:
    """Sample cross moment ``Gamma_AB = (1/n) sum a_i b_i^T`` from a list of pairs.

    Each entry is accumulated with :func:`math.fsum`, so the result is exactly
    rounded: independent of sample order, and the swapped pair list yields the
    exact transpose.
    """
    if len(samples) == 0:
        raise CorpusError("no samples")
    a0, b0 = (np.atleast_1d(np.asarray(v, dtype=float)) for v in samples[0])
    da, db = a0.shape, b0.shape
    rows_a, rows_b = [], []
    for i, (a, b) in enumerate(samples):
        a = np.atleast_1d(np.asarray(a, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if a.ndim != 1 or b.ndim != 1 or a.shape != da or b.shape != db:
            raise CorpusError(
                f"sample {i} has dimensions ({a.size},{b.size}), expected ({da[0]},{db[0]})"
            )
        rows_a.append(a)
        rows_b.append(b)
    A = np.vstack(rows_a)
    B = np.vstack(rows_b)
    n = A.shape[0]
    prods = A[:, :, None] * B[:, None, :]
    gamma = np.empty((A.shape[1], B.shape[1]))
    for i in range(gamma.shape[0]):
        for j in range(gamma.shape[1]):
            gamma[i, j] = math.fsum(prods[:, i, j]) / n
    return MomentSet({roles: gamma}, {roles: n})


# ---------------------------------------------------------------------------
# Feature maps and function classes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureMap:
    """A named map from a batch of domain points ``(n, M)`` to ``(n, N)``."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray] = field(compare=False)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        out = np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)
        if out.ndim == 1:
            out = out[:, None]
        return out


def _elementwise(name, fn):
    return FeatureMap(name, fn)


def _coordinate(m: int) -> FeatureMap:
    return FeatureMap(f"coord:{m}", lambda x, m=m: x[:, [m]])


def _power(p: float) -> FeatureMap:
    return FeatureMap(f"pow:{p:g}", lambda x, p=p: x**p)


_NAMED_MAPS = {
    "identity": lambda x: x,
    "constant": np.ones_like,
    "square": np.square,
    "abs": np.abs,
    "sin": np.sin,
    "cos": np.cos,
}


def feature_map(spec: str) -> FeatureMap:
    """Build a feature map from its textual name.

    Recognised names: ``identity``, ``constant``, ``square``, ``abs``,
    ``sin``, ``cos``, ``pow:<p>`` (elementwise power) and ``coord:<m>``
    (the ``m``-th input coordinate as a single output).
    """
    spec = spec.strip()
    if spec in _NAMED_MAPS:
        return _elementwise(spec, _NAMED_MAPS[spec])
    kind, _, arg = spec.partition(":")
    try:
        if kind == "pow":
            return _power(float(arg))
        if kind == "coord":
            return _coordinate(int(arg))
    except ValueError:
        pass
    raise ClassSpecError(f"unknown feature map '{spec}'")


def linear_basis(in_dim: int, out_dim: int) -> tuple[FeatureMap, ...]:
    """Maps ``x -> x_m e_n`` spanning all linear functions R^in_dim -> R^out_dim."""
    maps = []
    for n in range(out_dim):
        for m in range(in_dim):

            def fn(x, m=m, n=n, out_dim=out_dim):
                out = np.zeros((x.shape[0], out_dim))
                out[:, n] = x[:, m]
                return out

            maps.append(FeatureMap(f"lin[{n},{m}]", fn))
    return tuple(maps)


class ClassKind(str, enum.Enum):
    ZERO = "zero"
    LINEAR = "linear"
    BASIS = "basis"
    NONPARAMETRIC = "nonparametric"


@dataclass(frozen=True)
class KernelConfig:
    """Settings of the locally weighted Gaussian-kernel regressor.

    ``regularization`` is relative: the ridge added to the local slope
    block is ``regularization * trace(local Gram)``.
    """

    bandwidth_constant: float = 0.1
    regularization: float = 1e-8
    order: int = 1

    def __post_init__(self):
        if not self.bandwidth_constant > 0:
            raise ClassSpecError("bandwidth_constant must be positive")
        if self.regularization < 0:
            raise ClassSpecError("regularization must be non-negative")
        if self.order not in (0, 1):
            raise ClassSpecError("kernel order must be 0 or 1")


@dataclass(frozen=True)
class FunctionClass:
    """Descriptor of an estimator class (always a linear subspace of functions)."""

    kind: ClassKind
    maps: tuple[FeatureMap, ...] = ()
    kernel: KernelConfig | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ClassKind(self.kind))
        object.__setattr__(self, "maps", tuple(self.maps))
        if self.kind is ClassKind.BASIS and not self.maps:
            raise ClassSpecError("basis class with K = 0 maps; use the zero class")
        if self.kind is not ClassKind.BASIS and self.maps:
            raise ClassSpecError(f"{self.kind.value} class takes no feature maps")
        if self.kind is ClassKind.NONPARAMETRIC and self.kernel is None:
            object.__setattr__(self, "kernel", KernelConfig())

    @classmethod
    def zero(cls) -> "FunctionClass":
        return cls(ClassKind.ZERO)

    @classmethod
    def linear(cls) -> "FunctionClass":
        return cls(ClassKind.LINEAR)

    @classmethod
    def basis(cls, maps: Iterable[FeatureMap | str]) -> "FunctionClass":
        return cls(ClassKind.BASIS, tuple(feature_map(m) if isinstance(m, str) else m for m in maps))

    @classmethod
    def nonparametric(cls, kernel: KernelConfig | None = None) -> "FunctionClass":
        return cls(ClassKind.NONPARAMETRIC, kernel=kernel or KernelConfig())

    # the population counterpart of a nonparametric fit is the class of all functions
    all_functions = nonparametric

    def describe(self) -> dict:
        out = {"kind": self.kind.value}
        if self.maps:
            out["maps"] = [m.name for m in self.maps]
        if self.kernel is not None:
            out["kernel"] = {
                "bandwidth_constant": self.kernel.bandwidth_constant,
                "regularization": self.kernel.regularization,
                "order": self.kernel.order,
            }
        return out


# ---------------------------------------------------------------------------
# Training corpus
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainingCorpus:
    """The three unpaired training sets.

    ``labeled1`` holds ``(x1, y)`` pairs, ``labeled2`` holds ``(x2, y)`` pairs
    and ``unlabeled`` holds ``(x1, x2)`` pairs. Rows of different sets are
    never matched against each other.
    """

    labeled1_x: np.ndarray
    labeled1_y: np.ndarray
    labeled2_x: np.ndarray
    labeled2_y: np.ndarray
    unlabeled_x1: np.ndarray
    unlabeled_x2: np.ndarray

    def __post_init__(self):
        for name in (
            "labeled1_x",
            "labeled1_y",
            "labeled2_x",
            "labeled2_y",
            "unlabeled_x1",
            "unlabeled_x2",
        ):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim == 1:
                arr = arr.reshape(-1, 1)
            if arr.ndim != 2:
                raise CorpusError(f"{name} must be a 2-D array")
            if not np.all(np.isfinite(arr)):
                raise CorpusError(f"{name} has non-finite entries")
            object.__setattr__(self, name, _frozen(arr))
        if self.labeled1_x.shape[0] != self.labeled1_y.shape[0]:
            raise CorpusError("labeled1: x and y row counts differ")
        if self.labeled2_x.shape[0] != self.labeled2_y.shape[0]:
            raise CorpusError("labeled2: x and y row counts differ")
        if self.unlabeled_x1.shape[0] != self.unlabeled_x2.shape[0]:
            raise CorpusError("unlabeled: x1 and x2 row counts differ")
        if self.U < 1:
            raise CorpusError("unlabeled set must contain at least one pair")
        m1, m2, n = self.dims
        if self.L1 and self.labeled1_x.shape[1] != m1:
            raise CorpusError(f"labeled1 x has dimension {self.labeled1_x.shape[1]}, unlabeled x1 has {m1}")
        if self.L2 and self.labeled2_x.shape[1] != m2:
            raise CorpusError(f"labeled2 x has dimension {self.labeled2_x.shape[1]}, unlabeled x2 has {m2}")
        if self.L1 and self.L2 and self.labeled1_y.shape[1] != self.labeled2_y.shape[1]:
            raise CorpusError("labeled sets disagree on the label dimension")

    @classmethod
    def from_pairs(cls, labeled1: Sequence, labeled2: Sequence, unlabeled: Sequence, dims=None):
        """Build from lists of vector pairs; ``dims=(M1, M2, N)`` is needed when a list is empty."""

        def stack(pairs, da, db):
            if len(pairs) == 0:
                return np.zeros((0, da or 1)), np.zeros((0, db or 1))
            a = [np.atleast_1d(np.asarray(p[0], dtype=float)) for p in pairs]
            b = [np.atleast_1d(np.asarray(p[1], dtype=float)) for p in pairs]
            for i, (u, v) in enumerate(zip(a, b)):
                if u.shape != a[0].shape or v.shape != b[0].shape:
                    raise CorpusError(f"pair {i} has inconsistent dimensions")
            return np.vstack(a), np.vstack(b)

        m1, m2, n = dims if dims is not None else (None, None, None)
        x1l, y1 = stack(labeled1, m1, n)
        x2l, y2 = stack(labeled2, m2, n)
        x1u, x2u = stack(unlabeled, m1, m2)
        return cls(x1l, y1, x2l, y2, x1u, x2u)

    @property
    def L1(self) -> int:
        return self.labeled1_x.shape[0]

    @property
    def L2(self) -> int:
        return self.labeled2_x.shape[0]

    @property
    def U(self) -> int:
        return self.unlabeled_x1.shape[0]

    @property
    def dims(self) -> tuple[int, int, int]:
        n = self.labeled1_y.shape[1] if self.L1 else self.labeled2_y.shape[1]
        return self.unlabeled_x1.shape[1], self.unlabeled_x2.shape[1], n

    def cardinalities(self) -> dict:
        return {"L1": self.L1, "L2": self.L2, "U": self.U}

    def swapped(self) -> "TrainingCorpus":
        """The same data with the roles of the two domains exchanged."""
        return TrainingCorpus(
            self.labeled2_x,
            self.labeled2_y,
            self.labeled1_x,
            self.labeled1_y,
            self.unlabeled_x2,
            self.unlabeled_x1,
        )

    def moments(self) -> MomentSet:
        """Raw second moments: label cross moments from the labeled sets, the rest from the unlabeled set."""
        gamma, counts = {}, {}
        if self.L1:
            gamma[("Y", "X1")] = second_moment(self.labeled1_y, self.labeled1_x)
            counts[("Y", "X1")] = self.L1
        if self.L2:
            gamma[("Y", "X2")] = second_moment(self.labeled2_y, self.labeled2_x)
            counts[("Y", "X2")] = self.L2
        x1, x2 = self.unlabeled_x1, self.unlabeled_x2
        g11 = second_moment(x1, x1)
        g22 = second_moment(x2, x2)
        gamma[("X1", "X1")] = 0.5 * (g11 + g11.T)
        gamma[("X2", "X2")] = 0.5 * (g22 + g22.T)
        gamma[("X1", "X2")] = second_moment(x1, x2)
        for key in (("X1", "X1"), ("X2", "X2"), ("X1", "X2")):
            counts[key] = self.U
        return MomentSet(gamma, counts)
