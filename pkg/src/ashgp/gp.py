"""Squared-exponential ARD kernel and homoscedastic GP regression.

The homoscedastic model is fitted by multi-start L-BFGS maximization of
the exact log marginal likelihood with analytic gradients; all covariance
solves go through a jittered Cholesky factorization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.optimize import minimize

from ashgp.rv import InvalidParameterError

JITTER = 1e-8


class ConditioningError(RuntimeError):
    """Covariance matrix is not positive definite even after jitter."""


class OptimizerFailure(RuntimeError):
    """No optimizer restart improved on its starting point."""


@dataclass(frozen=True)
class SeArdKernel:
    """Squared-exponential kernel with one lengthscale per input dimension."""

    variance: float
    lengthscales: np.ndarray

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        if self.variance <= 0 or np.any(ls <= 0):
            raise InvalidParameterError("kernel parameters must be strictly positive")
        object.__setattr__(self, "lengthscales", ls)

    def __call__(self, a: np.ndarray, b: np.ndarray = None) -> np.ndarray:
        a = np.atleast_2d(a)
        b = a if b is None else np.atleast_2d(b)
        return self.variance * np.exp(-0.5 * _sqdist(a / self.lengthscales, b / self.lengthscales))

    def diag(self, a: np.ndarray) -> np.ndarray:
        return np.full(np.atleast_2d(a).shape[0], self.variance)


def _sqdist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d2 = np.sum(a**2, axis=1)[:, None] + np.sum(b**2, axis=1)[None, :] - 2.0 * (a @ b.T)
    return np.maximum(d2, 0.0)


def kernel_with_grads(log_var: float, log_ls: np.ndarray, x: np.ndarray):
    """Kernel matrix K(x, x) and its derivatives w.r.t. log-parameters.

    Returns (K, dK/dlog_var, [dK/dlog_ls_d for each d]).
    """
    ls = np.exp(log_ls)
    xs = x / ls
    k = np.exp(log_var) * np.exp(-0.5 * _sqdist(xs, xs))
    dls = []
    for d in range(x.shape[1]):
        delta = (xs[:, d][:, None] - xs[:, d][None, :]) ** 2
        dls.append(k * delta)
    return k, k, dls


def chol_with_jitter(a: np.ndarray):
    """Cholesky factor of a symmetric matrix, escalating jitter if needed."""
    base = JITTER * max(np.mean(np.diag(a)), 1e-300)
    for boost in (0.0, 1.0, 1e2, 1e4, 1e6):
        try:
            return np.linalg.cholesky(a + base * boost * np.eye(a.shape[0]))
        except np.linalg.LinAlgError:
            continue
    raise ConditioningError("matrix not positive definite after jitter escalation")


def gp_log_marginal(kernel: SeArdKernel, noise_variance: float, x: np.ndarray, y: np.ndarray) -> float:
    """Exact Gaussian log marginal likelihood under homoscedastic noise."""
    x = np.atleast_2d(x)
    y = np.asarray(y, dtype=float)
    n = y.size
    l = chol_with_jitter(kernel(x) + noise_variance * np.eye(n))
    alpha = solve_triangular(l.T, solve_triangular(l, y, lower=True), lower=False)
    return float(-0.5 * y @ alpha - np.sum(np.log(np.diag(l))) - 0.5 * n * np.log(2 * np.pi))


def _gp_objective(theta: np.ndarray, x: np.ndarray, y: np.ndarray):
    """Negative log marginal likelihood and gradient in log-parameters.

    theta = [log signal variance, log lengthscales (d), log noise variance].
    """
    n, d = x.shape
    log_var, log_ls, log_noise = theta[0], theta[1 : 1 + d], theta[1 + d]
    k, dk_var, dk_ls = kernel_with_grads(log_var, log_ls, x)
    sigma = k + np.exp(log_noise) * np.eye(n)
    l = chol_with_jitter(sigma)
    alpha = solve_triangular(l.T, solve_triangular(l, y, lower=True), lower=False)
    logml = -0.5 * y @ alpha - np.sum(np.log(np.diag(l))) - 0.5 * n * np.log(2 * np.pi)
    linv = solve_triangular(l, np.eye(n), lower=True)
    sigma_inv = linv.T @ linv
    gmat = 0.5 * (np.outer(alpha, alpha) - sigma_inv)
    grad = np.empty_like(theta)
    grad[0] = np.sum(gmat * dk_var)
    for j in range(d):
        grad[1 + j] = np.sum(gmat * dk_ls[j])
    grad[1 + d] = np.trace(gmat) * np.exp(log_noise)
    return -logml, -grad


@dataclass
class GpModel:
    """Fitted homoscedastic GP with cached training factorization."""

    kernel: SeArdKernel
    noise_variance: float
    x: np.ndarray
    y: np.ndarray
    log_marginal: float

    def __post_init__(self):
        self.x = np.atleast_2d(self.x)
        self.y = np.asarray(self.y, dtype=float)
        n = self.y.size
        self._chol = chol_with_jitter(self.kernel(self.x) + self.noise_variance * np.eye(n))
        self._alpha = solve_triangular(
            self._chol.T, solve_triangular(self._chol, self.y, lower=True), lower=False
        )

    def predict(self, x_star: np.ndarray):
        """Predictive mean and (non-negative) variance at new points."""
        x_star = np.atleast_2d(x_star)
        k_star = self.kernel(self.x, x_star)
        mean = k_star.T @ self._alpha
        v = solve_triangular(self._chol, k_star, lower=True)
        var = self.kernel.diag(x_star) - np.sum(v**2, axis=0)
        return mean, np.maximum(var, 0.0)


def gp_fit(
    x: np.ndarray,
    y: np.ndarray,
    restarts: int = 5,
    max_iter: int = 500,
    seed: int = 0,
) -> GpModel:
    """Multi-start maximum-likelihood fit of kernel and noise parameters."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    n, d = x.shape
    if n < 2:
        raise InvalidParameterError("GP fit needs at least two points")
    med = _median_pairwise_distance(x)
    var0 = max(np.var(y), 1e-12)
    rng = np.random.default_rng(seed)
    best = None
    ls_scales = np.logspace(-1, 1, restarts)
    for r in range(restarts):
        theta0 = np.concatenate(
            [
                [np.log(var0)],
                np.full(d, np.log(max(ls_scales[r] * med, 1e-8))),
                [np.log(var0 * 10 ** rng.uniform(-4, -1))],
            ]
        )
        # lengthscales bounded below at a fraction of the median pairwise
        # distance and noise bounded below relative to the data variance:
        # the data cannot resolve shorter correlations or smaller noise, and
        # the bounds exclude the degenerate spike fit on duplicated points
        ls_floor = np.log(max(0.05 * med, 1e-10))
        noise_floor = np.log(1e-6 * var0)
        bounds = (
            [(-25.0, 25.0)]
            + [(ls_floor, 25.0)] * d
            + [(max(noise_floor, -25.0), 25.0)]
        )
        try:
            res = minimize(
                _gp_objective,
                theta0,
                args=(x, y),
                jac=True,
                method="L-BFGS-B",
                bounds=bounds,
                options={"maxiter": max_iter, "ftol": 1e-12},
            )
        except ConditioningError:
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise OptimizerFailure("all GP fit restarts failed")
    theta = best.x
    kernel = SeArdKernel(float(np.exp(theta[0])), np.exp(theta[1 : 1 + d]))
    return GpModel(kernel, float(np.exp(theta[1 + d])), x, y, -float(best.fun))


def _median_pairwise_distance(x: np.ndarray) -> float:
    n = x.shape[0]
    if n > 500:
        idx = np.random.default_rng(0).choice(n, 500, replace=False)
        x = x[idx]
    d2 = _sqdist(x, x)
    vals = np.sqrt(d2[np.triu_indices_from(d2, k=1)])
    med = float(np.median(vals)) if vals.size else 1.0
    return med if med > 0 else 1.0
