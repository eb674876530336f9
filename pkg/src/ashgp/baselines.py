"""Reference solvers: crude Monte Carlo and FORM (HL-RF)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from ashgp import rv as rvmod
from ashgp.rv import InvalidParameterError, RandomVectorSpec, Stream

MCS_BLOCK = 10_000


@dataclass(frozen=True)
class McsResult:
    pf: float
    n: int
    cov: float
    seed: int
    n_failures: int

    def to_dict(self) -> dict:
        return {"method": "mcs", "pf": self.pf, "n": self.n, "cov": self.cov,
                "seed": self.seed, "n_failures": self.n_failures}


@dataclass(frozen=True)
class FormResult:
    beta: float
    pf: float
    design_point: np.ndarray
    iterations: int
    converged: bool

    def to_dict(self) -> dict:
        return {"method": "form", "beta": self.beta, "pf": self.pf,
                "iterations": self.iterations, "converged": self.converged,
                "design_point": self.design_point.tolist()}


def mcs(model, spec: RandomVectorSpec, n: int, seed: int) -> McsResult:
    """Crude Monte Carlo estimate of P(M(X) >= y_f).

    Samples are drawn in fixed-size blocks with one sub-stream per block,
    so the merged estimate does not depend on how blocks are scheduled.
    """
    if n < 1:
        raise InvalidParameterError(f"sample size must be >= 1, got {n}")
    y_f = model.threshold
    failures = 0
    done = 0
    block = 0
    while done < n:
        size = min(MCS_BLOCK, n - done)
        x = rvmod.sample(spec, size, seed, Stream.MCS, iteration=block)
        try:
            y = model.value_batch(x)
        except Exception as exc:
            raise RuntimeError(f"model evaluation failed in MCS block {block}") from exc
        failures += int(np.count_nonzero(y >= y_f))
        done += size
        block += 1
    pf = failures / n
    cov = float(np.sqrt((1.0 - pf) / (pf * n))) if pf > 0 else np.inf
    return McsResult(pf=pf, n=n, cov=cov, seed=seed, n_failures=failures)


def form_hlrf(
    model,
    spec: RandomVectorSpec,
    start: np.ndarray = None,
    max_iter: int = 100,
    tol: float = 1e-8,
) -> FormResult:
    """HL-RF search for the most probable failure point in u-space.

    The limit state is g(u) = y_f - M(x(u)); its gradient uses the model
    gradient and the diagonal transform Jacobian.  Non-convergence yields
    a flagged result, not an exception.
    """
    d = spec.dimension
    u = np.zeros(d) if start is None else np.asarray(start, dtype=float).copy()
    y_f = model.threshold

    def g_and_grad(u):
        x = rvmod.from_standard(spec, u)
        e = model.evaluate(x)
        jac = rvmod.transform_jacobian_diag(spec, u)
        return y_f - e.y, -jac * e.grad

    g0, _ = g_and_grad(np.zeros(d))
    converged = False
    iterations = 0
    for k in range(max_iter):
        g, grad = g_and_grad(u)
        norm2 = float(grad @ grad)
        if norm2 <= 0:
            break
        u_new = ((grad @ u - g) / norm2) * grad
        iterations = k + 1
        step = float(np.linalg.norm(u_new - u))
        u = u_new
        if step <= tol:
            converged = True
            break
    beta = float(np.linalg.norm(u))
    if g0 < 0:
        # median point already failed: the reliability index is negative
        beta = -beta
    return FormResult(beta=beta, pf=float(ndtr(-beta)), design_point=u,
                      iterations=iterations, converged=converged)
