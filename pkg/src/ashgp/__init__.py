"""Adaptive active-subspace heteroscedastic-GP metamodeling for
high-dimensional reliability analysis.

The package couples three ingredients: a gradient-based active-subspace
projection that finds the few directions along which an expensive model
actually varies, a heteroscedastic Gaussian process surrogate fitted in
that low-dimensional feature space, and an active-learning loop that
spends model evaluations near the limit-state surface.  Crude Monte
Carlo and FORM baselines plus three built-in benchmark models are
included for validation.
"""

from ashgp.rv import (
    MarginalSpec,
    RandomVectorSpec,
    lognormal_from_mean_cov,
    sample,
    to_standard,
    from_standard,
)
from ashgp.subspace import SubspaceProjection, estimate_c, eigendecompose, project
from ashgp.learner import LearnerConfig, RunRecord, run_adaptive
from ashgp.baselines import mcs, form_hlrf

__version__ = "0.1.0"
