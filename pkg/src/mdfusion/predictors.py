"""Fitted predictors.

Every predictor is immutable and pure: ``predict`` depends only on its
arguments and on arrays frozen at construction time. One-domain predictors
take a single input batch, two-domain predictors take ``(x1, x2)``.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import FeatureMap, _frozen, as_rows
from .errors import CorpusError


def _tolist(a):
    return np.asarray(a).tolist()


class Predictor(abc.ABC):
    """Mapping from one or both domains to the label space R^N."""

    domains: tuple[int, ...]
    in_dims: tuple[int, ...]
    out_dim: int

    @property
    def arity(self) -> int:
        return len(self.domains)

    def predict(self, *inputs) -> np.ndarray:
        if len(inputs) != len(self.domains):
            raise TypeError(f"predictor on domains {self.domains} takes {len(self.domains)} input(s)")
        rows, singles = [], []
        for x, dim in zip(inputs, self.in_dims):
            arr, single = as_rows(x, dim)
            rows.append(arr)
            singles.append(single)
        n = {r.shape[0] for r in rows}
        if len(n) != 1:
            raise CorpusError("inputs of a two-domain predictor must have matching row counts")
        out = self._predict(*rows)
        if all(singles):
            return out[0]
        return out

    __call__ = predict

    @abc.abstractmethod
    def _predict(self, *rows: np.ndarray) -> np.ndarray:
        """Evaluate on row-stacked inputs; returns ``(n, out_dim)``."""

    @abc.abstractmethod
    def describe(self, include_data: bool = False) -> dict:
        """JSON-serialisable summary of the predictor."""


@dataclass(frozen=True, eq=False)
class ZeroPredictor(Predictor):
    in_dim: int
    out_dim: int
    domain: int = 1

    @property
    def domains(self):
        return (self.domain,)

    @property
    def in_dims(self):
        return (self.in_dim,)

    def _predict(self, x):
        return np.zeros((x.shape[0], self.out_dim))

    def describe(self, include_data=False):
        return {"type": "zero", "domain": self.domain, "in_dim": self.in_dim, "out_dim": self.out_dim}


@dataclass(frozen=True, eq=False)
class LinearPredictor(Predictor):
    """``x -> coef @ x`` with ``coef`` of shape ``(N, M)``."""

    coef: np.ndarray
    domain: int = 1

    def __post_init__(self):
        object.__setattr__(self, "coef", _frozen(self.coef))

    @property
    def domains(self):
        return (self.domain,)

    @property
    def in_dims(self):
        return (self.coef.shape[1],)

    @property
    def out_dim(self):
        return self.coef.shape[0]

    def _predict(self, x):
        return x @ self.coef.T

    def describe(self, include_data=False):
        return {"type": "linear", "domain": self.domain, "coef": _tolist(self.coef)}


def evaluate_maps(maps: Sequence[FeatureMap], x: np.ndarray, out_dim: int) -> np.ndarray:
    """Stack feature-map outputs into ``(n, K, out_dim)``; checks every map's output shape."""
    feats = np.empty((x.shape[0], len(maps), out_dim))
    for k, fmap in enumerate(maps):
        v = fmap(x)
        if v.shape != (x.shape[0], out_dim):
            raise CorpusError(
                f"feature map {k} ('{fmap.name}') emits shape {v.shape[1:]}, expected ({out_dim},)"
            )
        feats[:, k, :] = v
    return feats


@dataclass(frozen=True, eq=False)
class BasisPredictor(Predictor):
    """``x -> sum_k coef[k] * maps[k](x)``."""

    coef: np.ndarray
    maps: tuple[FeatureMap, ...]
    in_dim: int
    out_dim: int
    domain: int = 1

    def __post_init__(self):
        object.__setattr__(self, "coef", _frozen(self.coef, ndmin=1).ravel())
        object.__setattr__(self, "maps", tuple(self.maps))

    @property
    def domains(self):
        return (self.domain,)

    @property
    def in_dims(self):
        return (self.in_dim,)

    def _predict(self, x):
        return np.einsum("nkd,k->nd", evaluate_maps(self.maps, x, self.out_dim), self.coef)

    def describe(self, include_data=False):
        return {
            "type": "basis",
            "domain": self.domain,
            "maps": [m.name for m in self.maps],
            "coef": _tolist(self.coef),
        }


@dataclass(frozen=True, eq=False)
class AdditivePredictor(Predictor):
    """Sum of component predictors, each reading the domains it declares."""

    terms: tuple[Predictor, ...]
    dims: tuple[int, int]
    out_dim: int
    strategy: str = "additive"
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        for t in self.terms:
            if t.out_dim != self.out_dim:
                raise CorpusError("additive terms disagree on the label dimension")

    @property
    def domains(self):
        return (1, 2)

    @property
    def in_dims(self):
        return self.dims

    def _predict(self, x1, x2):
        by_domain = {1: x1, 2: x2}
        out = np.zeros((x1.shape[0], self.out_dim))
        for t in self.terms:
            out += t._predict(*(by_domain[d] for d in t.domains))
        return out

    def describe(self, include_data=False):
        return {
            "type": "two-domain",
            "strategy": self.strategy,
            "terms": [t.describe(include_data) for t in self.terms],
            **self.info,
        }


@dataclass(frozen=True, eq=False)
class InnovationPredictor(Predictor):
    """``(x1, x2) -> sum_k a_k (psi_k(x2) - eta_k(x1))``.

    ``eta_k`` is the class-optimal regressor of ``psi_k(X2)`` on ``X1``.
    """

    maps: tuple[FeatureMap, ...]
    regressors: tuple[Predictor, ...]
    coefficients: np.ndarray
    dims: tuple[int, int]
    out_dim: int

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))
        object.__setattr__(self, "regressors", tuple(self.regressors))
        object.__setattr__(self, "coefficients", _frozen(self.coefficients, ndmin=1).ravel())

    @property
    def domains(self):
        return (1, 2)

    @property
    def in_dims(self):
        return self.dims

    def components(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        """The innovations ``rho_k(x1, x2)`` stacked as ``(n, K, N)``."""
        psi = evaluate_maps(self.maps, x2, self.out_dim)
        eta = np.stack([r._predict(x1) for r in self.regressors], axis=1)
        return psi - eta

    def _predict(self, x1, x2):
        return np.einsum("nkd,k->nd", self.components(x1, x2), self.coefficients)

    def describe(self, include_data=False):
        return {
            "type": "innovation",
            "maps": [m.name for m in self.maps],
            "coefficients": _tolist(self.coefficients),
            "regressors": [r.describe(include_data) for r in self.regressors],
        }


@dataclass(frozen=True, eq=False)
class PartiallyLinearPredictor(Predictor):
    """``(x1, x2) -> mean(x1) + gain @ (x2 - smoother(x1))``."""

    mean: Predictor
    smoother: Predictor
    gain: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gain", _frozen(self.gain))

    @property
    def domains(self):
        return (1, 2)

    @property
    def in_dims(self):
        return (self.mean.in_dims[0], self.gain.shape[1])

    @property
    def out_dim(self):
        return self.mean.out_dim

    def innovation(self, x1, x2):
        return x2 - self.smoother._predict(x1)

    def _predict(self, x1, x2):
        return self.mean._predict(x1) + self.innovation(x1, x2) @ self.gain.T

    def describe(self, include_data=False):
        return {
            "type": "two-domain",
            "strategy": "PartiallyLinear",
            "gain": _tolist(self.gain),
            "mean": self.mean.describe(include_data),
            "smoother": self.smoother.describe(include_data),
        }


@dataclass(frozen=True, eq=False)
class SwappedPredictor(Predictor):
    """Presents a predictor fitted on the swapped corpus with the original argument order."""

    inner: Predictor
    strategy: str = ""

    @property
    def domains(self):
        return (1, 2)

    @property
    def in_dims(self):
        return self.inner.in_dims[::-1]

    @property
    def out_dim(self):
        return self.inner.out_dim

    def _predict(self, x1, x2):
        return self.inner._predict(x2, x1)

    def describe(self, include_data=False):
        return {
            "type": "two-domain",
            "strategy": self.strategy,
            "domains_swapped": True,
            "inner": self.inner.describe(include_data),
        }


@dataclass(frozen=True, eq=False)
class DomainRelabeled(Predictor):
    """A one-domain predictor relabelled to read the other domain."""

    inner: Predictor
    domain: int

    @property
    def domains(self):
        return (self.domain,)

    @property
    def in_dims(self):
        return self.inner.in_dims

    @property
    def out_dim(self):
        return self.inner.out_dim

    def _predict(self, x):
        return self.inner._predict(x)

    def describe(self, include_data=False):
        return {**self.inner.describe(include_data), "domain": self.domain}


def relabel(p: Predictor, domain: int) -> Predictor:
    """Return ``p`` as a predictor on ``domain`` (one-domain predictors only)."""
    if p.domains == (domain,):
        return p
    if isinstance(p, DomainRelabeled):
        return relabel(p.inner, domain)
    return DomainRelabeled(p, domain)


@dataclass(frozen=True, eq=False)
class SideInfoPredictor(Predictor):
    """``x1 -> base(x1) + gain @ (x1 - smoother(x1))``."""

    base: Predictor
    smoother: Predictor
    gain: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gain", _frozen(self.gain))

    @property
    def domains(self):
        return (1,)

    @property
    def in_dims(self):
        return self.base.in_dims

    @property
    def out_dim(self):
        return self.base.out_dim

    def _predict(self, x):
        return self.base._predict(x) + (x - self.smoother._predict(x)) @ self.gain.T

    def describe(self, include_data=False):
        return {
            "type": "side-info",
            "gain": _tolist(self.gain),
            "base": self.base.describe(include_data),
            "smoother": self.smoother.describe(include_data),
        }
