"""Crude Monte Carlo and first-order (HL-RF) reference solvers."""

import numpy as np
import pytest
from scipy.special import ndtr

from ashgp.baselines import form_hlrf, mcs
from ashgp.models import LinearModel, ProductModel
from ashgp.rv import (
    InvalidParameterError,
    standard_normal_vector,
    uniform_vector,
)


class TestMcs:
    def test_symmetric_median(self):
        model = LinearModel(1, beta0=0.0)  # y = -x1, threshold 0
        result = mcs(model, standard_normal_vector(1), 100_000, seed=0)
        assert abs(result.pf - 0.5) <= 3 * result.cov * result.pf

    def test_linear_exact_reference(self):
        model = LinearModel(100, beta0=-3.0)
        result = mcs(model, standard_normal_vector(100), 1_000_000, seed=0)
        exact = float(ndtr(-3.0))
        se = np.sqrt(exact * (1 - exact) / 1_000_000)
        assert abs(result.pf - exact) <= 3 * se

    def test_seed_determinism_and_disjoint_seeds(self):
        model = LinearModel(5, beta0=-2.0)
        spec = standard_normal_vector(5)
        a = mcs(model, spec, 200_000, seed=1)
        b = mcs(model, spec, 200_000, seed=1)
        c = mcs(model, spec, 200_000, seed=2)
        assert a.pf == b.pf
        se = a.cov * a.pf
        assert abs(a.pf - c.pf) < 6 * np.sqrt(2) * se

    def test_block_merge_consistency(self):
        # estimates must not depend on how many blocks cover n
        model = LinearModel(3, beta0=-1.0)
        spec = standard_normal_vector(3)
        full = mcs(model, spec, 25_000, seed=5)
        assert full.n_failures == round(full.pf * 25_000)
        assert 0.0 <= full.pf <= 1.0

    def test_invalid_n(self):
        with pytest.raises(InvalidParameterError):
            mcs(LinearModel(2, beta0=1.0), standard_normal_vector(2), 0, seed=0)

    def test_cov_formula(self):
        model = LinearModel(2, beta0=-1.0)
        result = mcs(model, standard_normal_vector(2), 50_000, seed=3)
        assert result.cov == pytest.approx(
            np.sqrt((1 - result.pf) / (result.pf * 50_000)), rel=1e-12
        )


class TestFormHlrf:
    def test_linear_gaussian_exact(self):
        model = LinearModel(100, beta0=-3.0)
        result = form_hlrf(model, standard_normal_vector(100))
        assert result.converged
        assert abs(result.beta - 3.0) < 1e-6
        exact = float(ndtr(-3.0))
        assert abs(result.pf - exact) / exact < 1e-9

    def test_design_point_norm_equals_beta(self):
        model = LinearModel(30, beta0=-2.0)
        result = form_hlrf(model, standard_normal_vector(30))
        assert np.linalg.norm(result.design_point) == pytest.approx(abs(result.beta), abs=1e-8)

    def test_design_point_stationarity(self):
        model = LinearModel(10, beta0=-2.5)
        result = form_hlrf(model, standard_normal_vector(10))
        # g(u*) = y_f - M(x(u*)) should vanish at the design point
        from ashgp.rv import from_standard

        x_star = from_standard(standard_normal_vector(10), result.design_point)
        g = model.threshold - model.value(x_star)
        assert abs(g) < 1e-6 * max(1.0, abs(model.value(np.zeros(10))))

    def test_gradient_antiparallel_to_design_point(self):
        model = LinearModel(10, beta0=-2.5)
        spec = standard_normal_vector(10)
        result = form_hlrf(model, spec)
        from ashgp.rv import from_standard, transform_jacobian_diag

        u = result.design_point
        e = model.evaluate(from_standard(spec, u))
        grad_g = -transform_jacobian_diag(spec, u) * e.grad
        cos = grad_g @ u / (np.linalg.norm(grad_g) * np.linalg.norm(u))
        assert abs(abs(cos) - 1.0) < 1e-8

    def test_negative_beta_when_median_fails(self):
        # beta0 = +3 puts the median deep in the failure domain (M >= 0)
        model = LinearModel(50, beta0=3.0)
        result = form_hlrf(model, standard_normal_vector(50))
        assert result.beta == pytest.approx(-3.0, abs=1e-6)

    def test_product_model_converged_case(self):
        model = ProductModel(30, threshold=0.65)
        result = form_hlrf(model, uniform_vector(30))
        assert result.converged
        assert 0.0 < result.pf < 1.0
        assert np.linalg.norm(result.design_point) == pytest.approx(abs(result.beta), abs=1e-8)

    def test_nonconvergence_flagged_not_raised(self):
        # a design point requiring several coordinates near the uniform
        # support boundary makes plain HL-RF oscillate; the result must be
        # flagged, not raised
        model = ProductModel(30, threshold=1.8)
        result = form_hlrf(model, uniform_vector(30))
        assert not result.converged

    def test_iteration_budget_flagged(self):
        model = ProductModel(6, threshold=1.5)
        result = form_hlrf(model, uniform_vector(6), max_iter=1)
        assert not result.converged
