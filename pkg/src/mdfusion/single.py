"""Class-optimal single-domain estimators.

Each fitter returns the least-squares optimal member of its class given
``(x, y)`` samples, using raw (uncentred) sample moments.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import (
    DEFAULT_PINV_RTOL,
    ClassKind,
    FeatureMap,
    FunctionClass,
    KernelConfig,
    pseudo_inverse,
    second_moment,
)
from .errors import CorpusError
from .kernel import KernelRegressor, fit_kernel
from .predictors import BasisPredictor, LinearPredictor, Predictor, ZeroPredictor, evaluate_maps

__all__ = [
    "fit_zero",
    "fit_linear",
    "fit_basis",
    "fit_kernel",
    "fit_class",
    "basis_gram",
    "KernelRegressor",
]


def _samples(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim == 1:
        y = y[:, None]
    if x.shape[0] != y.shape[0]:
        raise CorpusError(f"{x.shape[0]} inputs vs {y.shape[0]} labels")
    if x.shape[0] == 0:
        raise CorpusError("no samples")
    return x, y


def fit_zero(in_dim: int = 1, out_dim: int = 1, domain: int = 1) -> ZeroPredictor:
    return ZeroPredictor(in_dim, out_dim, domain)


def fit_linear(x, y, domain: int = 1, rel_tol: float = DEFAULT_PINV_RTOL) -> LinearPredictor:
    """Best linear predictor ``Gamma_YX Gamma_XX^+ x``."""
    x, y = _samples(x, y)
    gxx = second_moment(x, x)
    coef = second_moment(y, x) @ pseudo_inverse(0.5 * (gxx + gxx.T), rel_tol)
    return LinearPredictor(coef, domain)


def basis_gram(maps: Sequence[FeatureMap], x, out_dim: int) -> np.ndarray:
    """``K x K`` matrix of sample means of ``phi_i(x)^T phi_j(x)``."""
    f = evaluate_maps(maps, x, out_dim)
    g = np.einsum("nid,njd->ij", f, f) / x.shape[0]
    return 0.5 * (g + g.T)


def fit_basis(
    x, y, maps: Sequence[FeatureMap], domain: int = 1, rel_tol: float = DEFAULT_PINV_RTOL
) -> BasisPredictor:
    """Least-squares coefficients ``a = Gamma_PhiPhi^+ Gamma_PhiY`` over the span of ``maps``."""
    x, y = _samples(x, y)
    if len(maps) == 0:
        raise CorpusError("basis class needs at least one feature map; use the zero class")
    f = evaluate_maps(maps, x, y.shape[1])
    gram = np.einsum("nid,njd->ij", f, f) / x.shape[0]
    cross = np.einsum("nid,nd->i", f, y) / x.shape[0]
    coef = pseudo_inverse(0.5 * (gram + gram.T), rel_tol) @ cross
    return BasisPredictor(coef, tuple(maps), x.shape[1], y.shape[1], domain)


def fit_class(x, y, cls: FunctionClass, domain: int = 1, kernel: KernelConfig | None = None) -> Predictor:
    """Dispatch to the fitter of ``cls``.

    For the zero class ``x``/``y`` may be empty arrays; they are only used
    for their dimensions.
    """
    if cls.kind is ClassKind.ZERO:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        in_dim = x.shape[1] if x.ndim == 2 else 1
        out_dim = y.shape[1] if y.ndim == 2 else 1
        return fit_zero(in_dim, out_dim, domain)
    if cls.kind is ClassKind.LINEAR:
        return fit_linear(x, y, domain)
    if cls.kind is ClassKind.BASIS:
        return fit_basis(x, y, cls.maps, domain)
    x, y = _samples(x, y)
    return fit_kernel(x, y, kernel or cls.kernel, domain)
