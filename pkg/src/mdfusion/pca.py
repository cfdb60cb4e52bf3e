"""Principal component reduction with a deterministic sign convention."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, CorpusError


@dataclass(frozen=True)
class PCA:
    """Fitted projection ``z = (x - mean) @ components.T``.

    ``eigenvalues`` holds the full covariance spectrum (divisor ``n``) in
    decreasing order; ``components`` the leading ``dim`` directions.
    """

    mean: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray

    @property
    def dim(self) -> int:
        return self.components.shape[0]

    def transform(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) @ self.components.T

    def inverse(self, z) -> np.ndarray:
        return np.asarray(z, dtype=float) @ self.components + self.mean

    def dropped_variance(self) -> float:
        return float(np.sum(self.eigenvalues[self.dim :]))

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
        }


def fit_pca(x, dim: int) -> PCA:
    """Top ``dim`` principal directions of the mean-centred sample covariance.

    Each direction is signed so that its largest-magnitude entry is positive
    (the first such entry on ties).
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise CorpusError("PCA needs a non-empty 2-D sample")
    if not 1 <= dim <= x.shape[1]:
        raise ConfigError(f"PCA dimension {dim} outside 1..{x.shape[1]}")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / x.shape[0]
    w, v = np.linalg.eigh(0.5 * (cov + cov.T))
    order = np.argsort(w)[::-1]
    w, v = w[order], v[:, order]
    comps = v[:, :dim].T.copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PCA(mean, comps, np.clip(w, 0.0, None))
