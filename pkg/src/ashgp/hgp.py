"""Marginalized-variational heteroscedastic GP regression.

The observation noise variance is exp(g) with a second latent GP g; the
hyperparameters and the variational diagonal are fitted jointly by
quasi-Newton ascent on an analytically tractable lower bound of the
marginal likelihood, with hand-derived gradients.

Reparameterization (lam is the non-negative variational diagonal):
    s = lam - 1/2
    m = K_g s + mu0 * 1
    V = (K_g^{-1} + diag(lam))^{-1}
    R = diag(exp(m - diag(V)/2))
    bound = ln N(y; 0, K_f + R) - tr(V)/4 - KL(N(m, V) || N(mu0*1, K_g))
All matrix inverses are routed through Cholesky factors of
A = I + sqrt(lam) K_g sqrt(lam), which stays well conditioned as lam -> 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize

from ashgp.gp import JITTER, ConditioningError, OptimizerFailure, SeArdKernel, chol_with_jitter, _sqdist, _median_pairwise_distance
from ashgp.rv import InvalidParameterError

_LOG_2PI = np.log(2.0 * np.pi)

# Box constraints on the log/linear optimization variables, in standardized
# data space (outputs scaled to unit variance).
_BOUNDS = {
    "log_var_f": (-15.0, 8.0),
    "log_ls": (-8.0, 8.0),
    "log_var_g": (-15.0, 8.0),
    # noise floored at 1e-6 of the output variance: smaller values only
    # enable degenerate interpolating fits the data cannot support
    "mu0": (np.log(1e-6), 8.0),
    "log_lam": (-12.0, 6.0),
}


@dataclass(frozen=True)
class Prediction:
    """Predictive mean/variance with the variance split kept for diagnostics."""

    mean: np.ndarray
    variance: np.ndarray
    gamma2: np.ndarray     # GP-posterior part of the variance
    exp_term: np.ndarray   # heteroscedastic noise part


@dataclass(frozen=True)
class HgpConfig:
    restarts: int = 5
    max_iter: int = 500
    seed: int = 0
    warm_start: Optional[dict] = None
    # additional initialization states raced alongside the primary starts;
    # states fitted on fewer input dimensions are padded to the current one
    extra_starts: tuple = ()


def gaussian_kl(m: np.ndarray, v: np.ndarray, mu0: float, k_g: np.ndarray) -> float:
    """KL(N(m, V) || N(mu0*1, K_g)) for dense covariance matrices."""
    n = m.size
    lg = chol_with_jitter(k_g)
    lv = chol_with_jitter(v)
    delta = m - mu0
    half = solve_triangular(lg, np.column_stack([delta[:, None], lv]), lower=True)
    quad = float(np.sum(half[:, 0] ** 2))
    tr = float(np.sum(half[:, 1:] ** 2))
    logdet = 2.0 * float(np.sum(np.log(np.diag(lg))) - np.sum(np.log(np.diag(lv))))
    return 0.5 * (tr + quad - n + logdet)


def _kernel_matrices(log_var: float, log_ls: np.ndarray, x: np.ndarray, jitter: float):
    ls = np.exp(log_ls)
    xs = x / ls
    q = np.exp(-0.5 * _sqdist(xs, xs))
    k = np.exp(log_var) * (q + jitter * np.eye(x.shape[0]))
    return k, xs


def _unpack(theta: np.ndarray, d: int):
    log_vf = theta[0]
    log_lf = theta[1 : 1 + d]
    log_vg = theta[1 + d]
    log_lg = theta[2 + d : 2 + 2 * d]
    mu0 = theta[2 + 2 * d]
    log_lam = theta[3 + 2 * d :]
    return log_vf, log_lf, log_vg, log_lg, mu0, log_lam


def bound_value(
    kernel_f: SeArdKernel,
    kernel_g: SeArdKernel,
    mu0: float,
    lam: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    jitter: float = JITTER,
) -> float:
    """Variational lower bound at explicit parameters (no standardization)."""
    x = np.atleast_2d(x)
    y = np.asarray(y, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise InvalidParameterError("variational diagonal must be non-negative")
    d = x.shape[1]
    theta = np.concatenate(
        [
            [np.log(kernel_f.variance)],
            np.log(kernel_f.lengthscales),
            [np.log(kernel_g.variance)],
            np.log(kernel_g.lengthscales),
            [mu0],
            np.log(np.maximum(lam, 1e-300)),
        ]
    )
    val, _ = _bound_and_grad(theta, x, y, jitter)
    return val


def _bound_and_grad(theta: np.ndarray, x: np.ndarray, y: np.ndarray, jitter: float = JITTER):
    """Bound value and analytic gradient w.r.t. the packed parameters."""
    n, d = x.shape
    log_vf, log_lf, log_vg, log_lg, mu0, log_lam = _unpack(theta, d)
    lam = np.exp(log_lam)
    s = lam - 0.5
    kf, xf = _kernel_matrices(log_vf, log_lf, x, jitter)
    kg, xg = _kernel_matrices(log_vg, log_lg, x, jitter)

    sq = np.sqrt(lam)
    a = np.eye(n) + sq[:, None] * kg * sq[None, :]
    la = chol_with_jitter(a)
    # c1 = A^{-1} diag(sq) K_g ; B = (I + diag(lam) K_g)^{-1} = I - diag(sq) c1
    c1 = cho_solve((la, True), sq[:, None] * kg)
    b = np.eye(n) - sq[:, None] * c1
    v = kg - (kg * sq[None, :]) @ c1
    v_diag = np.diag(v).copy()
    m = kg @ s + mu0
    r = np.exp(np.clip(m - 0.5 * v_diag, -100.0, 100.0))

    sigma = kf + np.diag(r)
    ls = chol_with_jitter(sigma)
    alpha = cho_solve((ls, True), y)
    term1 = -0.5 * y @ alpha - np.sum(np.log(np.diag(ls))) - 0.5 * n * _LOG_2PI
    term2 = -0.25 * np.sum(v_diag)
    logdet_a = 2.0 * np.sum(np.log(np.diag(la)))
    kg_s = kg @ s
    term3 = -0.5 * (np.trace(b) + logdet_a - n + s @ kg_s)
    bound = float(term1 + term2 + term3)

    # --- gradient assembly ---
    linv = solve_triangular(ls, np.eye(n), lower=True)
    sigma_inv = linv.T @ linv
    gf = 0.5 * (np.outer(alpha, alpha) - sigma_inv)
    r_bar = np.diag(gf) * r
    w = -0.25 - 0.5 * r_bar          # diagonal of d(bound)/dV

    bw = b * w[None, :]
    b2 = b @ b
    vwv_diag = np.einsum("ij,j,ji->i", v, w, v)

    # elementwise d(bound)/dK_g
    ghat_g = (
        np.outer(r_bar, s)
        + bw @ b.T
        - 0.5 * (-(b2 * lam[None, :]).T + (b * lam[None, :]).T + np.outer(s, s))
    )
    grad_mu0 = float(np.sum(r_bar))
    grad_lam = (
        kg @ r_bar
        - vwv_diag
        - 0.5 * (-np.einsum("ij,ji->i", kg, b2) + np.einsum("ij,ji->i", kg, b) + 2.0 * kg_s)
    )

    grad = np.empty_like(theta)
    grad[0] = np.sum(gf * kf)
    for j in range(d):
        delta = (xf[:, j][:, None] - xf[:, j][None, :]) ** 2
        grad[1 + j] = np.sum(gf * kf * delta)
    grad[1 + d] = np.sum(ghat_g * kg)
    for j in range(d):
        delta = (xg[:, j][:, None] - xg[:, j][None, :]) ** 2
        grad[2 + d + j] = np.sum(ghat_g * kg * delta)
    grad[2 + 2 * d] = grad_mu0
    grad[3 + 2 * d :] = grad_lam * lam
    return bound, grad


@dataclass
class HgpModel:
    """Fitted heteroscedastic GP in standardized input/output space."""

    kernel_f: SeArdKernel
    kernel_g: SeArdKernel
    mu0: float
    lam: np.ndarray
    x_std: np.ndarray      # standardized training features
    y_std: np.ndarray      # standardized training outputs
    x_shift: np.ndarray
    x_scale: np.ndarray
    y_shift: float
    y_scale: float
    bound: float           # lower-bound value at the fitted parameters

    def __post_init__(self):
        n = self.y_std.size
        kf = self.kernel_f(self.x_std) + self.kernel_f.variance * JITTER * np.eye(n)
        kg = self.kernel_g(self.x_std) + self.kernel_g.variance * JITTER * np.eye(n)
        self._s = self.lam - 0.5
        sq = np.sqrt(self.lam)
        a = np.eye(n) + sq[:, None] * kg * sq[None, :]
        self._la = chol_with_jitter(a)
        c1 = cho_solve((self._la, True), sq[:, None] * kg)
        v = kg - (kg * sq[None, :]) @ c1
        m = kg @ self._s + self.mu0
        self._r = np.exp(np.clip(m - 0.5 * np.diag(v), -100.0, 100.0))
        self._ls = chol_with_jitter(kf + np.diag(self._r))
        self._alpha = cho_solve((self._ls, True), self.y_std)
        self._sq = sq

    @property
    def n_train(self) -> int:
        return self.y_std.size

    def _standardize(self, psi: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(psi) - self.x_shift) / self.x_scale

    def predict_full(self, psi: np.ndarray) -> Prediction:
        """Predictive mean and variance in natural units."""
        z = self._standardize(psi)
        kf_star = self.kernel_f(self.x_std, z)
        kg_star = self.kernel_g(self.x_std, z)
        mean = kf_star.T @ self._alpha
        half_f = solve_triangular(self._ls, kf_star, lower=True)
        gamma2 = np.maximum(self.kernel_f.variance - np.sum(half_f**2, axis=0), 0.0)
        chi = kg_star.T @ self._s + self.mu0
        half_g = solve_triangular(self._la, self._sq[:, None] * kg_star, lower=True)
        eta2 = np.maximum(self.kernel_g.variance - np.sum(half_g**2, axis=0), 0.0)
        exp_term = np.exp(np.clip(chi + 0.5 * eta2, -100.0, 100.0))
        ys2 = self.y_scale**2
        return Prediction(
            mean=self.y_shift + self.y_scale * mean,
            variance=ys2 * (exp_term + gamma2),
            gamma2=ys2 * gamma2,
            exp_term=ys2 * exp_term,
        )

    def predict(self, psi: np.ndarray):
        p = self.predict_full(psi)
        return p.mean, p.variance

    def hyperparameters(self) -> dict:
        """JSON-serializable snapshot of the fitted parameters."""
        return {
            "kernel_f": {
                "variance": self.kernel_f.variance,
                "lengthscales": self.kernel_f.lengthscales.tolist(),
            },
            "kernel_g": {
                "variance": self.kernel_g.variance,
                "lengthscales": self.kernel_g.lengthscales.tolist(),
            },
            "mu0": self.mu0,
            "lam": self.lam.tolist(),
            "bound": self.bound,
            "x_shift": self.x_shift.tolist(),
            "x_scale": self.x_scale.tolist(),
            "y_shift": self.y_shift,
            "y_scale": self.y_scale,
        }

    def warm_start_state(self) -> dict:
        """Parameters reusable to initialize a refit on a grown training set."""
        return {
            "log_vf": np.log(self.kernel_f.variance),
            "log_lf": np.log(self.kernel_f.lengthscales),
            "log_vg": np.log(self.kernel_g.variance),
            "log_lg": np.log(self.kernel_g.lengthscales),
            "mu0": self.mu0,
            "lam": self.lam,
            "x_scale_old": self.x_scale,
        }


def hgp_bound(model: HgpModel) -> float:
    """Lower bound of the fitted model (standardized data space)."""
    return model.bound


def _start_from_state(ws: dict, n: int, d: int, med: float) -> np.ndarray:
    """Build an optimizer start vector from a previously fitted state.

    The variational diagonal is padded/truncated to the current n and
    lengthscale vectors fitted on fewer dimensions are padded with the
    median pairwise distance, so a lower-dimensional fit can seed the fit
    one dimension up.
    """
    lam0 = np.asarray(ws["lam"], dtype=float)
    if lam0.size < n:
        lam0 = np.concatenate([lam0, np.full(n - lam0.size, 0.5)])
    lam0 = np.clip(lam0[:n], np.exp(_BOUNDS["log_lam"][0]), np.exp(_BOUNDS["log_lam"][1]))

    def pad(log_ls):
        log_ls = np.atleast_1d(np.asarray(log_ls, dtype=float))
        if log_ls.size < d:
            fill = np.full(d - log_ls.size, np.log(max(med, 1e-6)))
            log_ls = np.concatenate([log_ls, fill])
        return log_ls[:d]

    return np.concatenate(
        [
            [ws["log_vf"]],
            pad(ws["log_lf"]),
            [ws["log_vg"]],
            pad(ws["log_lg"]),
            [ws["mu0"]],
            np.log(lam0),
        ]
    )


def _theta_bounds(n: int, d: int, ls_floor: float = _BOUNDS["log_ls"][0]):
    ls = (max(ls_floor, _BOUNDS["log_ls"][0]), _BOUNDS["log_ls"][1])
    return (
        [_BOUNDS["log_var_f"]]
        + [ls] * d
        + [_BOUNDS["log_var_g"]]
        + [ls] * d
        + [_BOUNDS["mu0"]]
        + [_BOUNDS["log_lam"]] * n
    )


def _negative(theta, x, y):
    val, grad = _bound_and_grad(theta, x, y)
    return -val, -grad


def hgp_fit(psi: np.ndarray, y: np.ndarray, config: HgpConfig = HgpConfig()) -> HgpModel:
    """Fit kernels, mu0, and the variational diagonal by bound maximization.

    Inputs are standardized per feature and outputs to zero mean / unit
    variance internally; predictions are given back in natural units.
    With ``config.warm_start`` a single optimization starts from the
    provided parameters, otherwise multi-start initialization is used.
    """
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    y = np.asarray(y, dtype=float)
    n, d = psi.shape
    if n < 3:
        raise InvalidParameterError("hGP fit needs at least three points")
    x_shift = psi.mean(axis=0)
    x_scale = psi.std(axis=0)
    x_scale[x_scale <= 0] = 1.0
    y_shift = float(y.mean())
    y_scale = float(y.std())
    if y_scale <= 0:
        y_scale = 1.0
    xs = (psi - x_shift) / x_scale
    ys = (y - y_shift) / y_scale

    med = _median_pairwise_distance(xs)
    starts = []
    if config.warm_start is not None:
        starts.append(_start_from_state(config.warm_start, n, d, med))
    for state in config.extra_starts:
        starts.append(_start_from_state(state, n, d, med))
    if config.warm_start is None:
        rng = np.random.default_rng(config.seed)
        scales = np.logspace(-0.5, 1, config.restarts)
        # sweep initial noise levels together with lengthscales: the bound
        # surface has distinct low-noise and high-noise basins and a single
        # noise init often misses the better one
        noise0 = (1e-1, 1e-2, 1e-3, 1e-4)
        for r in range(config.restarts):
            log_ls0 = np.full(d, np.log(max(scales[r] * med, 1e-6)))
            start = np.concatenate(
                [
                    [0.0],                      # signal variance 1 (unit-variance outputs)
                    log_ls0,
                    [0.0],
                    log_ls0 + rng.uniform(-0.3, 0.3, d),
                    [np.log(noise0[r % len(noise0)])],
                    np.log(np.full(n, 0.5)),    # homoscedastic self-consistent point
                ]
            )
            starts.append(start)

    # lengthscales floored at a fraction of the median pairwise distance:
    # shorter correlations let the mean thread through every training point,
    # which destroys the in-sample error signal dimension selection relies on
    bounds = _theta_bounds(n, d, np.log(max(0.2 * med, 1e-8)))
    best = None
    for theta0 in starts:
        theta0 = np.clip(theta0, [b[0] for b in bounds], [b[1] for b in bounds])
        try:
            res = minimize(
                _negative,
                theta0,
                args=(xs, ys),
                jac=True,
                method="L-BFGS-B",
                bounds=bounds,
                options={"maxiter": config.max_iter, "ftol": 1e-7 / max(1.0, n)},
            )
        except ConditioningError:
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise OptimizerFailure("all hGP fit restarts failed")
    log_vf, log_lf, log_vg, log_lg, mu0, log_lam = _unpack(best.x, d)
    return HgpModel(
        kernel_f=SeArdKernel(float(np.exp(log_vf)), np.exp(log_lf)),
        kernel_g=SeArdKernel(float(np.exp(log_vg)), np.exp(log_lg)),
        mu0=float(mu0),
        lam=np.exp(log_lam),
        x_std=xs,
        y_std=ys,
        x_shift=x_shift,
        x_scale=x_scale,
        y_shift=y_shift,
        y_scale=y_scale,
        bound=-float(best.fun),
    )
