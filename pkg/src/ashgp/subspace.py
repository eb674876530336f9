"""Gradient outer-product subspace estimation and adaptive dimension choice.

The average outer product of model gradients is eigendecomposed; its
leading eigenvectors span the directions along which the response varies
most.  The retained dimension is chosen by refitting the surrogate at
increasing dimension until the in-sample RMSE drops below a threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ashgp.rv import InvalidParameterError


@dataclass(frozen=True)
class SubspaceProjection:
    """Eigenpairs of the gradient outer-product matrix and the retained block."""

    eigenvalues: np.ndarray   # descending, length D
    eigenvectors: np.ndarray  # D x D, orthonormal columns, deterministic signs
    d_r: int

    def __post_init__(self):
        d = self.eigenvectors.shape[0]
        if not 1 <= self.d_r <= d:
            raise InvalidParameterError(f"retained dimension {self.d_r} outside 1..{d}")

    @property
    def w_r(self) -> np.ndarray:
        return self.eigenvectors[:, : self.d_r]

    def with_dimension(self, d_r: int) -> "SubspaceProjection":
        return SubspaceProjection(self.eigenvalues, self.eigenvectors, d_r)

    def spectral_gap(self) -> float:
        """Diagnostic ratio lambda_{d_r} / lambda_{d_r + 1}."""
        if self.d_r >= self.eigenvalues.size:
            return np.inf
        lo = self.eigenvalues[self.d_r]
        return float(self.eigenvalues[self.d_r - 1] / lo) if lo > 0 else np.inf


def estimate_c(grads: np.ndarray) -> np.ndarray:
    """Monte Carlo estimate (1/n) sum_i g_i g_i^T of the gradient outer product."""
    grads = np.asarray(grads, dtype=float)
    if grads.ndim != 2 or grads.shape[0] < 1:
        raise InvalidParameterError("gradient set must be a non-empty n x D matrix")
    if not np.all(np.isfinite(grads)):
        raise InvalidParameterError("gradient set contains non-finite entries")
    return grads.T @ grads / grads.shape[0]


def _fix_signs(w: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive.

    Ties broken by the lowest row index, which argmax already gives.
    """
    idx = np.argmax(np.abs(w), axis=0)
    signs = np.sign(w[idx, np.arange(w.shape[1])])
    signs[signs == 0] = 1.0
    return w * signs


def eigendecompose(c: np.ndarray, d_r: int = 1) -> SubspaceProjection:
    """Descending-ordered eigendecomposition with deterministic signs."""
    c = np.asarray(c, dtype=float)
    scale = max(np.abs(c).max(), 1e-300)
    if np.abs(c - c.T).max() > 1e-8 * scale:
        raise InvalidParameterError("matrix is not symmetric within tolerance")
    vals, vecs = np.linalg.eigh(0.5 * (c + c.T))
    order = np.argsort(vals)[::-1]
    return SubspaceProjection(vals[order], _fix_signs(vecs[:, order]), d_r)


def project(w_r: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Active-variable features psi_i = W_r^T x_i, rows paired with rows of x."""
    w_r = np.asarray(w_r, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != w_r.shape[0]:
        raise InvalidParameterError(
            f"input dimension {x.shape[-1]} does not match projection rows {w_r.shape[0]}"
        )
    return x @ w_r


@dataclass(frozen=True)
class DimensionSelection:
    """Outcome of the adaptive dimension search."""

    d_r: int
    surrogate: object
    projection: SubspaceProjection
    errors: np.ndarray   # RMSE trace over trial dimensions 1..len(errors)
    converged: bool


def select_dimension(
    x: np.ndarray,
    y: np.ndarray,
    grads: np.ndarray,
    eps_threshold: float,
    fitter: Callable[[np.ndarray, np.ndarray, int], object],
    d_max: int = None,
) -> DimensionSelection:
    """Smallest dimension whose surrogate reaches in-sample RMSE <= threshold.

    ``fitter(psi, y, d_r)`` must return a model with a
    ``predict(psi) -> (mean, var)`` method.  Uses only the existing
    training triples; no new model evaluations are made.  If no trial
    dimension qualifies, returns d_max flagged as non-converged.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[0] < 2:
        raise InvalidParameterError("dimension selection needs at least two training points")
    if eps_threshold <= 0:
        raise InvalidParameterError("dimension-error threshold must be positive")
    d = x.shape[1]
    if d_max is None:
        d_max = min(d, 10)
    d_max = min(d_max, d)
    proj = eigendecompose(estimate_c(grads))
    errors = []
    surrogate = None
    for d_r in range(1, d_max + 1):
        psi = project(proj.eigenvectors[:, :d_r], x)
        surrogate = fitter(psi, y, d_r)
        mu, _ = surrogate.predict(psi)
        eps = float(np.sqrt(np.mean((y - mu) ** 2)))
        errors.append(eps)
        if eps <= eps_threshold:
            return DimensionSelection(d_r, surrogate, proj.with_dimension(d_r), np.array(errors), True)
    return DimensionSelection(d_max, surrogate, proj.with_dimension(d_max), np.array(errors), False)
