"""Computational-model interface and the analytic benchmark models.

A model maps a natural-units input vector to a scalar response and its
gradient.  ``value_batch`` exists so Monte Carlo baselines can vectorize;
it must agree with ``value`` entrywise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ashgp.rv import InvalidParameterError


@dataclass(frozen=True)
class ModelEval:
    """Model response and its gradient with respect to the inputs."""

    y: float
    grad: np.ndarray


def gradient_fd(value: Callable[[np.ndarray], float], x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient, h_j = step * max(|x_j|, 1)."""
    if step <= 0:
        raise InvalidParameterError(f"finite-difference step must be positive, got {step}")
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for j in range(x.size):
        h = step * max(abs(x[j]), 1.0)
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        grad[j] = (value(xp) - value(xm)) / (2 * h)
    return grad


@dataclass(frozen=True)
class ProductModel:
    """Separable product benchmark y = prod_j (4 x_j - 2 + lam_j) / (1 + lam_j).

    Small lam_j makes coordinate j influential; the default parameter
    vector has lam_j = 1 for the first four coordinates and 500 for the
    rest, so the effective dimension is four.
    """

    dimension: int
    lambdas: np.ndarray = None
    threshold: float = 0.65

    def __post_init__(self):
        lam = self.lambdas
        if lam is None:
            lam = np.where(np.arange(self.dimension) < 4, 1.0, 500.0)
        lam = np.asarray(lam, dtype=float)
        if lam.shape != (self.dimension,):
            raise InvalidParameterError(f"lambda vector must have length {self.dimension}")
        if np.any(lam < 0):
            raise InvalidParameterError("lambda parameters must be non-negative")
        object.__setattr__(self, "lambdas", lam)

    def _factors(self, x: np.ndarray) -> np.ndarray:
        return (4.0 * x - 2.0 + self.lambdas) / (1.0 + self.lambdas)

    def value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise InvalidParameterError(f"expected input of length {self.dimension}, got {x.shape}")
        return float(np.prod(self._factors(x)))

    def value_batch(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.prod(self._factors(x), axis=-1)

    def evaluate(self, x: np.ndarray) -> ModelEval:
        x = np.asarray(x, dtype=float)
        f = self._factors(x)
        # Leave-one-out products; recomputed directly when a factor is zero
        # so the gradient stays exact there.
        y = float(np.prod(f))
        zero = f == 0.0
        if not zero.any():
            loo = y / f
        else:
            loo = np.zeros(self.dimension)
            if zero.sum() == 1:
                k = int(np.argmax(zero))
                loo[k] = np.prod(f[np.arange(self.dimension) != k])
            # two or more zero factors: every leave-one-out product is 0
        grad = (4.0 / (1.0 + self.lambdas)) * loo
        return ModelEval(y, grad)


@dataclass(frozen=True)
class LinearModel:
    """Linear benchmark y = beta0 * sqrt(D) - sum_j x_j with constant gradient."""

    dimension: int
    beta0: float = 3.0
    threshold: float = 0.0

    def value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise InvalidParameterError(f"expected input of length {self.dimension}, got {x.shape}")
        return float(self.beta0 * np.sqrt(self.dimension) - np.sum(x))

    def value_batch(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.beta0 * np.sqrt(self.dimension) - np.sum(x, axis=-1)

    def evaluate(self, x: np.ndarray) -> ModelEval:
        return ModelEval(self.value(x), -np.ones(self.dimension))


@dataclass
class CountingModel:
    """Wrapper counting response and gradient evaluations of an inner model."""

    inner: object
    n_value: int = 0
    n_grad: int = 0

    @property
    def dimension(self) -> int:
        return self.inner.dimension

    @property
    def threshold(self) -> float:
        return self.inner.threshold

    def value(self, x: np.ndarray) -> float:
        self.n_value += 1
        return self.inner.value(x)

    def value_batch(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        self.n_value += x.shape[0]
        return self.inner.value_batch(x)

    def evaluate(self, x: np.ndarray) -> ModelEval:
        self.n_value += 1
        self.n_grad += 1
        return self.inner.evaluate(x)
