"""Adaptive learning loop: candidate management, acquisition, surrogate
Monte Carlo failure-probability estimation, and convergence monitoring.

The loop alternates between (re)identifying the active subspace from the
training gradients, fitting the heteroscedastic GP in the retained
feature space, estimating the failure probability over a large fixed
sample pool with surrogate means, and acquiring the candidate point that
is close to the limit-state surface yet farthest from existing training
points.

Inputs are standardized per marginal (z = (x - mean)/std) before
subspace estimation so that mixed-unit problems do not bias the gradient
outer product; gradients transform with the same diagonal scaling.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import ndtri

from ashgp import rv as rvmod
from ashgp import subspace as asub
from ashgp.hgp import HgpConfig, HgpModel, hgp_fit
from ashgp.models import CountingModel
from ashgp.rv import InvalidParameterError, RandomVectorSpec, Stream

SIGMA_FLOOR = 1e-12
_POOL_BLOCK = 100_000


@dataclass(frozen=True)
class LearnerConfig:
    """Run settings for the adaptive loop.

    ``eps_d_rel`` sets the dimension-selection threshold as a fraction of
    the training-output standard deviation; ``eps_d_abs`` overrides it
    with an absolute threshold when given.
    """

    n_initial: int = 50
    n_pool: int = 1_000_000          # surrogate-MCS estimation pool (Eq. of record)
    n_candidates: int = 10_000       # working pool screened for acquisition
    eps_c: float = 2.0               # learning cutoff in predictive std units
    eps1_tol: float = 1e-3
    eps2_tol: float = 1e-3
    eps_d_rel: float = 0.02
    eps_d_abs: Optional[float] = None
    d_max: Optional[int] = None      # default min(D, 10)
    max_iterations: int = 300
    seed: int = 0
    hgp_restarts: int = 5
    hgp_max_iter: int = 500

    def __post_init__(self):
        if self.eps_c <= 0 or self.eps1_tol <= 0 or self.eps2_tol <= 0:
            raise InvalidParameterError("tolerances must be positive")
        if self.eps_d_rel <= 0 and self.eps_d_abs is None:
            raise InvalidParameterError("dimension threshold must be positive")
        if self.n_candidates < 1 or self.n_pool < 1:
            raise InvalidParameterError("pool sizes must be positive")
        if self.n_initial > self.n_pool / 100:
            raise InvalidParameterError(
                f"initial DoE size {self.n_initial} violates n_initial <= n_pool/100 "
                f"(n_pool = {self.n_pool})"
            )
        if self.max_iterations < 0:
            raise InvalidParameterError("max_iterations must be >= 0")


@dataclass
class IterationRecord:
    iteration: int
    pf: float
    eps1: float
    eps2: float
    d_r: int
    dim_converged: bool
    eigenvalues: np.ndarray
    n_s: int
    selected_index: int = -1
    dim_errors: Optional[np.ndarray] = None  # RMSE trace over trial dimensions


@dataclass
class RunRecord:
    """Full history of one adaptive (or global-DoE) run."""

    pf: float
    beta_g: float
    n_s: int
    n_g: int
    converged: bool
    stop_reason: str
    iterations: list = field(default_factory=list)
    seed: int = 0
    final_d_r: int = 0
    training_x: Optional[np.ndarray] = None
    training_y: Optional[np.ndarray] = None
    training_features: Optional[np.ndarray] = None
    training_pred: Optional[np.ndarray] = None
    candidate_features: Optional[np.ndarray] = None
    candidate_pred: Optional[np.ndarray] = None
    predict: Optional[Callable] = None   # final surrogate: x -> (mean, var)
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "pf": self.pf,
            "beta_g": self.beta_g,
            "n_s": self.n_s,
            "n_g": self.n_g,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "seed": self.seed,
            "final_d_r": self.final_d_r,
            "error": self.error,
            "iterations": [
                {
                    "iteration": it.iteration,
                    "pf": it.pf,
                    "eps1": it.eps1,
                    "eps2": it.eps2,
                    "d_r": it.d_r,
                    "dim_converged": it.dim_converged,
                    "eigenvalues": list(it.eigenvalues[:8]),
                    "n_s": it.n_s,
                    "selected_index": it.selected_index,
                }
                for it in self.iterations
            ],
        }


def critical_set(features: np.ndarray, hgp: HgpModel, y_f: float, eps_c: float) -> np.ndarray:
    """Indices of candidates within eps_c predictive stds of the threshold."""
    if eps_c <= 0 and eps_c != 0.0:
        raise InvalidParameterError("learning cutoff must be non-negative")
    mu, var = hgp.predict(features)
    sigma = np.maximum(np.sqrt(var), SIGMA_FLOOR)
    return np.flatnonzero(np.abs(y_f - mu) / sigma <= eps_c)


def select_next(
    critical: np.ndarray,
    features: np.ndarray,
    training_features: np.ndarray,
    hgp: HgpModel = None,
    y_f: float = None,
) -> int:
    """Candidate index maximizing min-distance to the training features.

    Ties break toward the lowest candidate index.  An empty critical set
    falls back to the candidate with the smallest |y_f - mu| / sigma.
    """
    if features.shape[0] == 0:
        raise InvalidParameterError("candidate pool is empty")
    if training_features.shape[0] == 0:
        raise InvalidParameterError("training set is empty")
    if critical.size == 0:
        if hgp is None or y_f is None:
            raise InvalidParameterError("empty critical set needs the surrogate for the fallback")
        mu, var = hgp.predict(features)
        sigma = np.maximum(np.sqrt(var), SIGMA_FLOOR)
        return int(np.argmin(np.abs(y_f - mu) / sigma))
    dists = cdist(features[critical], np.atleast_2d(training_features)).min(axis=1)
    return int(critical[np.argmax(dists)])


def estimate_pf(features: np.ndarray, hgp: HgpModel, y_f: float) -> float:
    """Fraction of the pool whose predictive mean reaches the threshold."""
    mu, _ = hgp.predict(features)
    return float(np.mean(mu >= y_f))


def check_convergence(pf_history, eps1_tol: float, eps2_tol: float):
    """(converged, eps1, eps2) from the failure-probability history.

    eps1 is the latest relative change, eps2 the change of eps1 between
    the last two steps.  A zero estimate yields eps1 = inf (never
    converged) instead of a division fault.
    """
    hist = list(pf_history)
    eps1 = np.inf
    eps2 = np.inf
    if len(hist) >= 2:
        eps1 = abs((hist[-1] - hist[-2]) / hist[-1]) if hist[-1] != 0 else np.inf
    if len(hist) >= 3:
        prev = abs((hist[-2] - hist[-3]) / hist[-2]) if hist[-2] != 0 else np.inf
        eps2 = abs(prev - eps1) if np.isfinite(prev) and np.isfinite(eps1) else np.inf
    converged = len(hist) >= 3 and eps1 <= eps1_tol and eps2 <= eps2_tol
    return converged, float(eps1), float(eps2)


class _PoolPredictor:
    """Streams the fixed estimation pool in blocks to bound memory.

    The pool is defined by (seed, MCS stream) and identical across
    learning iterations; standardized blocks are cached in float32.
    """

    def __init__(self, spec: RandomVectorSpec, n: int, seed: int, shift, scale):
        self.spec = spec
        self.n = n
        self.seed = seed
        self.shift = shift
        self.scale = scale
        self._blocks: list[np.ndarray] = []

    def _iter_blocks(self):
        if self._blocks:
            yield from self._blocks
            return
        done = 0
        b = 0
        while done < self.n:
            size = min(_POOL_BLOCK, self.n - done)
            x = rvmod.sample(self.spec, size, self.seed, Stream.MCS, iteration=b)
            z = ((x - self.shift) / self.scale).astype(np.float32)
            self._blocks.append(z)
            done += size
            b += 1
            yield z

    def estimate_pf(self, w_r: np.ndarray, hgp: HgpModel, y_f: float) -> float:
        count = 0
        for z in self._iter_blocks():
            psi = z.astype(np.float64) @ w_r
            mu, _ = hgp.predict(psi)
            count += int(np.count_nonzero(mu >= y_f))
        return count / self.n


def run_adaptive(model, spec: RandomVectorSpec, config: LearnerConfig) -> RunRecord:
    """Execute the full adaptive loop and return its run record.

    ``max_iterations = 0`` gives the non-adaptive, global-DoE estimate
    from the initial points alone.
    """
    counting = CountingModel(model)
    d = spec.dimension
    if getattr(model, "dimension", d) != d:
        raise InvalidParameterError("model and random-vector dimensions differ")
    y_f = model.threshold
    d_max = config.d_max if config.d_max is not None else min(d, 10)
    shift = spec.means()
    scale = spec.stds()

    x_train = rvmod.sample(spec, config.n_initial, config.seed, Stream.INITIAL_DOE)
    evals = [counting.evaluate(x) for x in x_train]
    y_train = np.array([e.y for e in evals])
    grads = np.array([e.grad for e in evals])

    pool = _PoolPredictor(spec, config.n_pool, config.seed, shift, scale)
    record = RunRecord(pf=np.nan, beta_g=np.nan, n_s=0, n_g=0, converged=False,
                       stop_reason="", seed=config.seed)
    pf_history: list[float] = []
    warm: dict[int, dict] = {}   # per-dimension hGP warm-start cache

    fit_count = [0]
    prev_fit = {"d_r": None, "state": None}

    def fitter(psi, y, d_r):
        ws = warm.get(d_r)
        # dimension selection walks d_r upward, so the fit one dimension
        # below (with the new lengthscale padded to the data scale) is a
        # strong extra start: it stops a stale basin at this d_r from
        # masking structure the lower-dimensional fit already found
        extra = ()
        if prev_fit["d_r"] == d_r - 1 and prev_fit["state"] is not None:
            extra = (prev_fit["state"],)
        cfg = HgpConfig(
            restarts=config.hgp_restarts,
            max_iter=config.hgp_max_iter,
            seed=config.seed,
            warm_start=ws,
            extra_starts=extra,
        )
        fitted = hgp_fit(psi, y, cfg)
        if ws is not None:
            # a warm start can stay trapped in a stale basin as the data
            # grows; race it against a short cold multi-start every time
            fit_count[0] += 1
            cold = hgp_fit(psi, y, dataclasses.replace(
                cfg,
                warm_start=None,
                restarts=max(2, config.hgp_restarts // 2),
                seed=config.seed + fit_count[0],
            ))
            if cold.bound > fitted.bound:
                fitted = cold
        warm[d_r] = fitted.warm_start_state()
        prev_fit["d_r"], prev_fit["state"] = d_r, warm[d_r]
        return fitted

    selection = None
    stop_reason = "budget"
    try:
        for m in range(config.max_iterations + 1):
            z_train = (x_train - shift) / scale
            grads_z = grads * scale
            eps_t = config.eps_d_abs
            if eps_t is None:
                eps_t = config.eps_d_rel * max(float(np.std(y_train)), 1e-300)
            selection = asub.select_dimension(z_train, y_train, grads_z, eps_t, fitter, d_max)
            hgp = selection.surrogate
            w_r = selection.projection.w_r

            pf = pool.estimate_pf(w_r, hgp, y_f)
            pf_history.append(pf)
            converged, eps1, eps2 = check_convergence(pf_history, config.eps1_tol, config.eps2_tol)
            it = IterationRecord(
                iteration=m,
                pf=pf,
                eps1=eps1,
                eps2=eps2,
                d_r=selection.d_r,
                dim_converged=selection.converged,
                eigenvalues=selection.projection.eigenvalues,
                n_s=counting.n_value,
                dim_errors=selection.errors,
            )
            record.iterations.append(it)
            if converged:
                stop_reason = "converged"
                break
            if m == config.max_iterations:
                stop_reason = "budget" if config.max_iterations > 0 else "global_doe"
                break

            cand_x = rvmod.sample(spec, config.n_candidates, config.seed,
                                  Stream.CANDIDATES, iteration=m)
            cand_z = (cand_x - shift) / scale
            cand_psi = cand_z @ w_r
            train_psi = z_train @ w_r
            crit = critical_set(cand_psi, hgp, y_f, config.eps_c)
            k = select_next(crit, cand_psi, train_psi, hgp, y_f)
            it.selected_index = k
            e = counting.evaluate(cand_x[k])
            x_train = np.vstack([x_train, cand_x[k]])
            y_train = np.append(y_train, e.y)
            grads = np.vstack([grads, e.grad])
    except Exception as exc:  # attach the partial record for post-mortem
        record.error = f"{type(exc).__name__}: {exc}"
        record.stop_reason = "error"
        _finalize(record, pf_history, counting, selection, x_train, y_train, shift, scale)
        raise LearnerError(record) from exc

    record.converged = stop_reason == "converged"
    record.stop_reason = stop_reason
    _finalize(record, pf_history, counting, selection, x_train, y_train, shift, scale)
    if selection is not None and record.pf is not None:
        cand_x = rvmod.sample(spec, config.n_candidates, config.seed,
                              Stream.CANDIDATES, iteration=len(record.iterations))
        cand_psi = ((cand_x - shift) / scale) @ selection.projection.w_r
        mu, _ = selection.surrogate.predict(cand_psi)
        record.candidate_features = cand_psi
        record.candidate_pred = mu
    return record


class LearnerError(RuntimeError):
    """Raised when a stage fails; carries the partial run record."""

    def __init__(self, record: RunRecord):
        super().__init__(record.error or "learner failed")
        self.record = record


def _finalize(record, pf_history, counting, selection, x_train, y_train, shift, scale):
    record.pf = pf_history[-1] if pf_history else np.nan
    record.beta_g = float(-ndtri(record.pf)) if pf_history and 0 < record.pf < 1 else np.nan
    record.n_s = counting.n_value
    record.n_g = counting.n_grad
    record.training_x = x_train
    record.training_y = y_train
    if selection is not None:
        record.final_d_r = selection.d_r
        record.training_features = ((x_train - shift) / scale) @ selection.projection.w_r
        record.training_pred = selection.surrogate.predict(record.training_features)[0]
        w_r, surrogate = selection.projection.w_r, selection.surrogate
        record.predict = lambda x: surrogate.predict(
            ((np.atleast_2d(x) - shift) / scale) @ w_r
        )
