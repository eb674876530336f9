"""Marginal distributions, seeded sampling, and isoprobabilistic transforms.

All random vectors are assumed to have independent marginals (Gaussian,
lognormal, or uniform).  Sampling uses the counter-based Philox generator
with explicit stream separation so that, e.g., regenerating the candidate
pool never perturbs the Monte Carlo reference stream.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Sequence

import numpy as np
from scipy.special import ndtr, ndtri


class InvalidParameterError(ValueError):
    """Distribution or configuration parameters violate their constraints."""


class DomainError(ValueError):
    """A value lies outside the support of its marginal distribution."""


class Dist(str, Enum):
    GAUSSIAN = "gaussian"
    LOGNORMAL = "lognormal"
    UNIFORM = "uniform"


class Stream(IntEnum):
    """Named RNG streams, one per sampling purpose."""

    CANDIDATES = 0
    INITIAL_DOE = 1
    MCS = 2
    SURROGATE_POOL = 3


@dataclass(frozen=True)
class MarginalSpec:
    """One marginal distribution in natural units.

    Parameter convention: Gaussian (mean, std); lognormal
    (underlying-normal location, scale); uniform (lower, upper).
    """

    kind: Dist
    p1: float
    p2: float

    def __post_init__(self):
        if not (np.isfinite(self.p1) and np.isfinite(self.p2)):
            raise InvalidParameterError(f"non-finite parameters ({self.p1}, {self.p2})")
        if self.kind in (Dist.GAUSSIAN, Dist.LOGNORMAL) and self.p2 <= 0:
            raise InvalidParameterError(f"{self.kind.value} scale must be positive, got {self.p2}")
        if self.kind is Dist.UNIFORM and self.p2 <= self.p1:
            raise InvalidParameterError(f"uniform bounds must satisfy upper > lower, got ({self.p1}, {self.p2})")

    @property
    def mean(self) -> float:
        if self.kind is Dist.GAUSSIAN:
            return self.p1
        if self.kind is Dist.LOGNORMAL:
            return float(np.exp(self.p1 + 0.5 * self.p2**2))
        return 0.5 * (self.p1 + self.p2)

    @property
    def std(self) -> float:
        if self.kind is Dist.GAUSSIAN:
            return self.p2
        if self.kind is Dist.LOGNORMAL:
            return self.mean * float(np.sqrt(np.expm1(self.p2**2)))
        return (self.p2 - self.p1) / np.sqrt(12.0)

    def in_support(self, x) -> np.ndarray:
        x = np.asarray(x)
        if self.kind is Dist.GAUSSIAN:
            return np.isfinite(x)
        if self.kind is Dist.LOGNORMAL:
            return x > 0
        return (x >= self.p1) & (x <= self.p2)


def lognormal_from_mean_cov(mean: float, cov: float) -> MarginalSpec:
    """Lognormal marginal from its mean and coefficient of variation."""
    if mean <= 0 or cov <= 0:
        raise InvalidParameterError(f"mean and c.o.v. must be positive, got ({mean}, {cov})")
    sigma_ln = float(np.sqrt(np.log1p(cov**2)))
    mu_ln = float(np.log(mean)) - 0.5 * sigma_ln**2
    return MarginalSpec(Dist.LOGNORMAL, mu_ln, sigma_ln)


@dataclass(frozen=True)
class RandomVectorSpec:
    """An independent random vector defined by its marginals."""

    marginals: tuple[MarginalSpec, ...]

    def __init__(self, marginals: Sequence[MarginalSpec]):
        if len(marginals) < 1:
            raise InvalidParameterError("random vector needs at least one marginal")
        object.__setattr__(self, "marginals", tuple(marginals))

    @property
    def dimension(self) -> int:
        return len(self.marginals)

    def means(self) -> np.ndarray:
        return np.array([m.mean for m in self.marginals])

    def stds(self) -> np.ndarray:
        return np.array([m.std for m in self.marginals])


def stream_rng(seed: int, stream: int, iteration: int = 0) -> np.random.Generator:
    """Philox generator for (seed, stream, iteration).

    Distinct (stream, iteration) pairs give statistically independent
    streams under the same user seed.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), int(iteration)))
    return np.random.Generator(np.random.Philox(ss))


def _sample_column(m: MarginalSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    if m.kind is Dist.GAUSSIAN:
        return m.p1 + m.p2 * rng.standard_normal(n)
    if m.kind is Dist.LOGNORMAL:
        return np.exp(m.p1 + m.p2 * rng.standard_normal(n))
    return m.p1 + (m.p2 - m.p1) * rng.random(n)


def sample(
    spec: RandomVectorSpec,
    n: int,
    seed: int,
    stream: int = Stream.CANDIDATES,
    iteration: int = 0,
) -> np.ndarray:
    """Draw n i.i.d. realizations, bit-reproducible for fixed arguments."""
    if n < 1:
        raise InvalidParameterError(f"sample size must be >= 1, got {n}")
    rng = stream_rng(seed, stream, iteration)
    out = np.empty((n, spec.dimension))
    for j, m in enumerate(spec.marginals):
        out[:, j] = _sample_column(m, n, rng)
    return out


def _to_standard_1d(m: MarginalSpec, x: np.ndarray) -> np.ndarray:
    if m.kind is Dist.GAUSSIAN:
        return (x - m.p1) / m.p2
    if m.kind is Dist.LOGNORMAL:
        return (np.log(x) - m.p1) / m.p2
    # evaluate from the nearer support endpoint so both tails keep full
    # floating-point resolution
    f = (x - m.p1) / (m.p2 - m.p1)
    comp = (m.p2 - x) / (m.p2 - m.p1)
    return np.where(f <= 0.5, ndtri(f), -ndtri(comp))


def _from_standard_1d(m: MarginalSpec, u: np.ndarray) -> np.ndarray:
    if m.kind is Dist.GAUSSIAN:
        return m.p1 + m.p2 * u
    if m.kind is Dist.LOGNORMAL:
        return np.exp(m.p1 + m.p2 * u)
    # anchor at the nearer support endpoint so extreme u keep the tail
    # probability at full floating-point resolution
    rng = m.p2 - m.p1
    return np.where(u <= 0, m.p1 + rng * ndtr(u), m.p2 - rng * ndtr(-u))


def to_standard(spec: RandomVectorSpec, x: np.ndarray) -> np.ndarray:
    """Map natural coordinates to standard-normal space, u_j = Phi^-1(F_j(x_j)).

    Works on a single vector or a matrix whose last axis has length D.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.dimension:
        raise InvalidParameterError(f"expected last axis {spec.dimension}, got {x.shape[-1]}")
    u = np.empty_like(x)
    for j, m in enumerate(spec.marginals):
        xj = x[..., j]
        if not np.all(m.in_support(xj)):
            raise DomainError(f"coordinate {j} outside the support of its marginal")
        u[..., j] = _to_standard_1d(m, xj)
    return u


def from_standard(spec: RandomVectorSpec, u: np.ndarray) -> np.ndarray:
    """Inverse of :func:`to_standard`."""
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != spec.dimension:
        raise InvalidParameterError(f"expected last axis {spec.dimension}, got {u.shape[-1]}")
    x = np.empty_like(u)
    for j, m in enumerate(spec.marginals):
        x[..., j] = _from_standard_1d(m, u[..., j])
    return x


def transform_jacobian_diag(spec: RandomVectorSpec, u: np.ndarray) -> np.ndarray:
    """Diagonal of dx/du at u (independence makes the Jacobian diagonal)."""
    u = np.asarray(u, dtype=float)
    jac = np.empty_like(u)
    phi = np.exp(-0.5 * u**2) / np.sqrt(2 * np.pi)
    for j, m in enumerate(spec.marginals):
        if m.kind is Dist.GAUSSIAN:
            jac[..., j] = m.p2
        elif m.kind is Dist.LOGNORMAL:
            jac[..., j] = m.p2 * np.exp(m.p1 + m.p2 * u[..., j])
        else:
            jac[..., j] = (m.p2 - m.p1) * phi[..., j]
    return jac


def uniform_vector(d: int, lower: float = 0.0, upper: float = 1.0) -> RandomVectorSpec:
    """D independent uniform marginals on [lower, upper]."""
    return RandomVectorSpec([MarginalSpec(Dist.UNIFORM, lower, upper)] * d)


def standard_normal_vector(d: int) -> RandomVectorSpec:
    """D independent standard Gaussian marginals."""
    return RandomVectorSpec([MarginalSpec(Dist.GAUSSIAN, 0.0, 1.0)] * d)
