"""Locally weighted polynomial regression with a Gaussian kernel.

The bandwidth adapts to the query: ``h(q) = c * sqrt(mean_i ||q - x_i||^2)``
where the mean runs over all training inputs. Weights are
``exp(-||q - x_i||^2 / (2 h(q)^2))``. Order 1 fits a local affine model
centred at the query and returns its intercept; order 0 is the
Nadaraya-Watson weighted mean.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import KernelConfig, _frozen
from .errors import CorpusError
from .predictors import Predictor

logger = logging.getLogger(__name__)

# upper bound on the number of doubles in one (queries x train x dim) block
_BLOCK_ELEMENTS = 4_000_000


@dataclass(frozen=True, eq=False)
class KernelRegressor(Predictor):
    """Fitted kernel regressor; keeps its training data."""

    inputs: np.ndarray
    targets: np.ndarray
    config: KernelConfig = KernelConfig()
    domain: int = 1

    def __post_init__(self):
        x = _frozen(self.inputs)
        y = _frozen(self.targets)
        if x.shape[0] != y.shape[0]:
            raise CorpusError("kernel regression: inputs and targets have different row counts")
        if x.shape[0] < 1:
            raise CorpusError("kernel regression needs at least one training sample")
        if self.config.order == 1 and x.shape[0] < 2:
            raise CorpusError("locally linear kernel regression needs at least two training samples")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", y)
        # translation invariance: work in coordinates centred on the training mean
        center = x.mean(axis=0)
        xc = x - center
        xc.flags.writeable = False
        object.__setattr__(self, "_center", center)
        object.__setattr__(self, "_xc", xc)
        n, m = xc.shape
        object.__setattr__(self, "_xx", (xc[:, :, None] * xc[:, None, :]).reshape(n, m * m))
        object.__setattr__(self, "_xy", (xc[:, :, None] * y[:, None, :]).reshape(n, m * y.shape[1]))

    @property
    def domains(self):
        return (self.domain,)

    @property
    def in_dims(self):
        return (self.inputs.shape[1],)

    @property
    def out_dim(self):
        return self.targets.shape[1]

    @property
    def n_train(self) -> int:
        return self.inputs.shape[0]

    def _predict(self, q):
        values, n_fallback = self._evaluate(q)
        if n_fallback:
            logger.warning("kernel regression fell back to a uniform mean at %d queries", n_fallback)
        return values

    def predict_with_diagnostics(self, x) -> tuple[np.ndarray, int]:
        """Like :meth:`predict` on a batch, also returning the number of fallback queries."""
        q = np.asarray(x, dtype=float).reshape(-1, self.inputs.shape[1])
        return self._evaluate(q)

    def _evaluate(self, q: np.ndarray) -> tuple[np.ndarray, int]:
        q = np.asarray(q, dtype=float) - self._center
        n, m = self._xc.shape
        block = max(1, _BLOCK_ELEMENTS // max(1, n * max(m, self.out_dim)))
        out = np.empty((q.shape[0], self.out_dim))
        fallbacks = 0
        for start in range(0, q.shape[0], block):
            stop = min(start + block, q.shape[0])
            out[start:stop], nf = self._evaluate_block(q[start:stop])
            fallbacks += nf
        return out, fallbacks

    def _weights(self, q):
        diff = q[:, None, :] - self._xc[None, :, :]
        d2 = np.einsum("qnm,qnm->qn", diff, diff)
        h2 = self.config.bandwidth_constant**2 * d2.mean(axis=1)
        # rescaling all weights of a query by one constant leaves the local fit
        # unchanged, so distances are measured relative to the nearest point
        rel = d2 - d2.min(axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.exp(-rel / (2.0 * h2[:, None]))
        degenerate = h2 == 0.0
        if np.any(degenerate):
            # every training input coincides with the query
            w[degenerate] = 1.0
        return w

    def _evaluate_block(self, q):
        w = self._weights(q)
        y = self.targets
        s0 = w.sum(axis=1)
        b0 = w @ y
        if self.config.order == 0:
            return b0 / s0[:, None], 0

        x = self._xc
        m = x.shape[1]
        s1 = w @ x
        s2 = (w @ self._xx).reshape(-1, m, m)
        t = (w @ self._xy).reshape(-1, m, y.shape[1])
        # local design rows are [1, x_i - q]
        a = np.empty((q.shape[0], m + 1, m + 1))
        a[:, 0, 0] = s0
        a01 = s1 - s0[:, None] * q
        a[:, 0, 1:] = a01
        a[:, 1:, 0] = a01
        a[:, 1:, 1:] = (
            s2
            - s1[:, :, None] * q[:, None, :]
            - q[:, :, None] * s1[:, None, :]
            + s0[:, None, None] * q[:, :, None] * q[:, None, :]
        )
        rhs = np.empty((q.shape[0], m + 1, y.shape[1]))
        rhs[:, 0, :] = b0
        rhs[:, 1:, :] = t - q[:, :, None] * b0[:, None, :]

        ridge = self.config.regularization * np.trace(a, axis1=1, axis2=2)
        idx = np.arange(1, m + 1)
        a[:, idx, idx] += ridge[:, None]
        try:
            beta = np.linalg.solve(a, rhs)
        except np.linalg.LinAlgError:
            beta = np.linalg.pinv(a) @ rhs
        values = beta[:, 0, :]

        bad = ~np.all(np.isfinite(values), axis=1)
        if np.any(bad):
            values[bad] = y.mean(axis=0)
        return values, int(bad.sum())

    def describe(self, include_data=False):
        out = {
            "type": "kernel",
            "domain": self.domain,
            "n_train": self.n_train,
            "bandwidth_constant": self.config.bandwidth_constant,
            "regularization": self.config.regularization,
            "order": self.config.order,
        }
        if include_data:
            out["inputs"] = self.inputs.tolist()
            out["targets"] = self.targets.tolist()
        return out


def fit_kernel(x, y, config: KernelConfig | None = None, domain: int = 1) -> KernelRegressor:
    """Fit the Gaussian-kernel regressor of ``y`` on ``x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim == 1:
        y = y[:, None]
    return KernelRegressor(x, y, config or KernelConfig(), domain)
