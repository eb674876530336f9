"""Heteroscedastic GP: variational bound, analytic gradients, fitting,
and predictions."""

import numpy as np
import pytest

from ashgp.gp import GpModel, SeArdKernel
from ashgp.hgp import (
    HgpConfig,
    HgpModel,
    _bound_and_grad,
    bound_value,
    gaussian_kl,
    hgp_fit,
)
from ashgp.rv import InvalidParameterError


def _random_theta(rng, n, d):
    return np.concatenate(
        [
            [rng.uniform(-1, 1)],            # log signal variance (f)
            rng.uniform(-1, 1, d),           # log lengthscales (f)
            [rng.uniform(-1, 1)],            # log signal variance (g)
            rng.uniform(-1, 1, d),           # log lengthscales (g)
            [rng.uniform(-3, 0)],            # mu0
            rng.uniform(-2, 1, n),           # log variational diagonal
        ]
    )


class TestBoundGradient:
    @pytest.mark.parametrize("n,d", [(5, 1), (12, 2), (20, 3)])
    def test_matches_finite_differences(self, n, d):
        rng = np.random.default_rng(n + d)
        x = rng.normal(size=(n, d))
        y = rng.normal(size=n)
        theta = _random_theta(rng, n, d)
        val, grad = _bound_and_grad(theta, x, y)
        h = 1e-6
        fd = np.empty_like(theta)
        for j in range(theta.size):
            tp, tm = theta.copy(), theta.copy()
            tp[j] += h
            tm[j] -= h
            fd[j] = (_bound_and_grad(tp, x, y)[0] - _bound_and_grad(tm, x, y)[0]) / (2 * h)
        scale = np.maximum(np.abs(fd), 1e-6)
        assert np.max(np.abs(grad - fd) / scale) < 1e-4


class TestKl:
    def test_zero_at_prior_matching_point(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(6, 1))
        k_g = SeArdKernel(1.3, np.array([0.8]))(x) + 1e-10 * np.eye(6)
        mu0 = -1.7
        m = np.full(6, mu0)
        assert gaussian_kl(m, k_g, mu0, k_g) == pytest.approx(0.0, abs=1e-8)

    def test_positive_otherwise(self):
        rng = np.random.default_rng(9)
        x = rng.normal(size=(5, 1))
        k_g = SeArdKernel(1.0, np.array([1.0]))(x) + 1e-8 * np.eye(5)
        assert gaussian_kl(np.ones(5), k_g, 0.0, k_g) > 0


class TestBoundIsLowerBound:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_bound_below_mc_marginal(self, seed):
        # exact marginal likelihood by Monte Carlo over the latent noise GP
        rng = np.random.default_rng(seed)
        n = 4
        x = rng.normal(size=(n, 1))
        y = rng.normal(size=n)
        kf = SeArdKernel(0.9, np.array([1.2]))
        kg = SeArdKernel(0.6, np.array([0.8]))
        mu0 = -1.0
        lam = rng.uniform(0.1, 1.0, n)
        b = bound_value(kf, kg, mu0, lam, x, y)

        k_f = kf(x) + 0.9 * 1e-8 * np.eye(n)
        k_g = kg(x) + 0.6 * 1e-8 * np.eye(n)
        chol = np.linalg.cholesky(k_g)
        nmc = 200_000
        g = mu0 + (chol @ rng.standard_normal((n, nmc))).T
        sigma = k_f[None, :, :] + np.exp(g)[:, :, None] * np.eye(n)[None, :, :]
        l = np.linalg.cholesky(sigma)
        z = np.linalg.solve(l, np.broadcast_to(y[:, None], (nmc, n, 1)).copy())[:, :, 0]
        logdiag = np.log(np.einsum("kii->ki", l)).sum(axis=1)
        dens = np.exp(-0.5 * np.sum(z**2, axis=1) - logdiag - 0.5 * n * np.log(2 * np.pi))
        est = dens.mean()
        se = dens.std(ddof=1) / np.sqrt(nmc)
        assert np.exp(b) <= est + 3 * se


class TestHomoscedasticLimit:
    def test_predictions_match_exact_gp(self):
        rng = np.random.default_rng(10)
        n = 12
        x = rng.uniform(size=(n, 1))
        y = np.sin(4 * x[:, 0])
        kf = SeArdKernel(1.4, np.array([0.6]))
        mu0 = np.log(0.05)
        # kernel_g scale -> 0 and lam = 1/2 give m = mu0*1, V ~ 0, so the
        # noise matrix collapses to the constant exp(mu0)
        model = HgpModel(
            kernel_f=kf,
            kernel_g=SeArdKernel(1e-14, np.array([1.0])),
            mu0=mu0,
            lam=np.full(n, 0.5),
            x_std=x,
            y_std=y,
            x_shift=np.zeros(1),
            x_scale=np.ones(1),
            y_shift=0.0,
            y_scale=1.0,
            bound=0.0,
        )
        gp = GpModel(kf, float(np.exp(mu0)), x, y, 0.0)
        star = np.linspace(0, 1, 15)[:, None]
        mu_h, var_h = model.predict(star)
        p = model.predict_full(star)
        mu_g, var_g = gp.predict(star)
        assert np.allclose(mu_h, mu_g, atol=1e-6)
        assert np.allclose(p.gamma2, var_g, atol=1e-6)
        assert np.allclose(p.exp_term, np.exp(mu0), atol=1e-6)
        assert np.all(var_h >= p.gamma2)


class TestHgpFit:
    def test_needs_three_points(self):
        with pytest.raises(InvalidParameterError):
            hgp_fit(np.zeros((2, 1)), np.zeros(2))

    def test_homoscedastic_noise_spread_small(self):
        rng = np.random.default_rng(11)
        n = 100
        x = rng.uniform(size=(n, 1))
        y = np.sin(3 * x[:, 0]) + 0.2 * rng.normal(size=n)
        model = hgp_fit(x, y, HgpConfig(restarts=3, seed=0))
        r = model._r
        assert r.max() / r.min() <= 3.0

    def test_heteroscedastic_noise_localized(self):
        rng = np.random.default_rng(12)
        n = 120
        x = rng.uniform(size=(n, 1))
        noise = np.where(x[:, 0] < 0.5, 0.05, 0.5)
        y = np.sin(3 * x[:, 0]) + noise * rng.normal(size=n)
        model = hgp_fit(x, y, HgpConfig(restarts=3, seed=0))
        left = model._r[x[:, 0] < 0.5].mean()
        right = model._r[x[:, 0] >= 0.5].mean()
        assert right > left

    def test_ascent_contract(self):
        rng = np.random.default_rng(13)
        x = rng.uniform(size=(30, 1))
        y = np.cos(2 * x[:, 0]) + 0.1 * rng.normal(size=30)
        model = hgp_fit(x, y, HgpConfig(restarts=3, seed=0))
        assert np.isfinite(model.bound)
        warm = hgp_fit(x, y, HgpConfig(warm_start=model.warm_start_state()))
        assert warm.bound >= model.bound - 1e-6

    def test_noiseless_in_sample_rmse(self):
        rng = np.random.default_rng(14)
        n = 50
        x = rng.uniform(size=(n, 2))
        y = np.sin(2 * x[:, 0]) + x[:, 1] ** 2
        model = hgp_fit(x, y, HgpConfig(restarts=3, seed=0))
        mu, _ = model.predict(x)
        rmse = np.sqrt(np.mean((mu - y) ** 2))
        assert rmse <= 1e-3 * np.std(y)

    def test_variance_strictly_positive(self):
        rng = np.random.default_rng(15)
        x = rng.uniform(size=(20, 1))
        y = x[:, 0] + 0.1 * rng.normal(size=20)
        model = hgp_fit(x, y, HgpConfig(restarts=2, seed=0))
        star = rng.uniform(-2, 3, size=(50, 1))
        _, var = model.predict(star)
        assert np.all(var > 0)

    def test_reorder_invariance(self):
        rng = np.random.default_rng(16)
        n = 25
        x = rng.uniform(size=(n, 1))
        y = np.sin(5 * x[:, 0]) + 0.05 * rng.normal(size=n)
        model = hgp_fit(x, y, HgpConfig(restarts=2, seed=0))
        perm = rng.permutation(n)
        reordered = HgpModel(
            kernel_f=model.kernel_f,
            kernel_g=model.kernel_g,
            mu0=model.mu0,
            lam=model.lam[perm],
            x_std=model.x_std[perm],
            y_std=model.y_std[perm],
            x_shift=model.x_shift,
            x_scale=model.x_scale,
            y_shift=model.y_shift,
            y_scale=model.y_scale,
            bound=model.bound,
        )
        star = np.linspace(0, 1, 7)[:, None]
        assert np.allclose(model.predict(star)[0], reordered.predict(star)[0], atol=1e-8)

    def test_negative_variational_diagonal_rejected(self):
        kf = SeArdKernel(1.0, np.array([1.0]))
        with pytest.raises(InvalidParameterError):
            bound_value(kf, kf, 0.0, np.array([-0.1, 0.5, 0.5]),
                        np.zeros((3, 1)), np.zeros(3))
