"""Disturbance processes with replayable per-step sampling.

sample(proc, t) is a pure function of (proc.seed, t): each step keys its
own counter-based generator, so episodes replay bit-identically and any
window of steps can be regenerated without generating its past.

Families cover the regimes the regret guarantees care about: gaussian
(sub-Gaussian, the logarithmic-regret assumptions hold), laplace (finite
fourth moment, *not* sub-Gaussian, so only the sqrt(T) guarantee
applies), student_t with df > 4 (heavy-tailed, fourth moment finite),
scaled_bernoulli (bounded), and zero (sanity checks).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt
from typing import Optional

import numpy as np

from .rng import STREAM_ESTIMATION, STREAM_NOISE, keyed_rng

_FAMILIES = ("gaussian", "laplace", "student_t", "scaled_bernoulli", "zero")


@dataclass(frozen=True)
class NoiseProcess:
    family: str
    scale: float
    dim: int
    seed: int
    df: Optional[float] = None

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}")
        if self.scale < 0.0:
            raise ValueError("scale must be nonnegative")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.family == "student_t":
            if self.df is None or self.df <= 4.0:
                raise ValueError("student_t requires df > 4 (finite fourth moment)")


@dataclass(frozen=True)
class MomentEstimate:
    """Empirical moment summary: sigma_w_1 ~ E||w||, sigma_w_4 ~ (E||w||^4)^(1/4),
    sigma_lower holds sigma-underbar (root of the smallest covariance eigenvalue)."""

    sigma_w_1: float
    sigma_w_4: float
    sigma_lower: float
    samples: int


def sample(proc: NoiseProcess, t: int) -> np.ndarray:
    """Disturbance w_t; the zero vector for t < 0 by convention."""
    if t < 0 or proc.family == "zero" or proc.scale == 0.0:
        return np.zeros(proc.dim)
    rng = keyed_rng(proc.seed, STREAM_NOISE, t)
    if proc.family == "gaussian":
        return proc.scale * rng.standard_normal(proc.dim)
    if proc.family == "laplace":
        return rng.laplace(0.0, proc.scale, size=proc.dim)
    if proc.family == "student_t":
        return proc.scale * rng.standard_t(proc.df, size=proc.dim)
    # scaled_bernoulli: +-scale equiprobably per component
    return proc.scale * (2.0 * rng.integers(0, 2, size=proc.dim) - 1.0)


def _batch(proc: NoiseProcess, n: int) -> np.ndarray:
    """n draws from one dedicated estimation stream (not the per-t stream)."""
    rng = keyed_rng(proc.seed, STREAM_ESTIMATION, 0)
    if proc.family == "zero" or proc.scale == 0.0:
        return np.zeros((n, proc.dim))
    if proc.family == "gaussian":
        return proc.scale * rng.standard_normal((n, proc.dim))
    if proc.family == "laplace":
        return rng.laplace(0.0, proc.scale, size=(n, proc.dim))
    if proc.family == "student_t":
        return proc.scale * rng.standard_t(proc.df, size=(n, proc.dim))
    return proc.scale * (2.0 * rng.integers(0, 2, size=(n, proc.dim)) - 1.0)


def estimate_moments(proc: NoiseProcess, n_samples: int = 100_000) -> MomentEstimate:
    """Monte-Carlo moment estimates from a deterministic estimation stream."""
    if n_samples < 1000:
        raise ValueError("need at least 1000 samples for stable moment estimates")
    X = _batch(proc, n_samples)
    norms = np.linalg.norm(X, axis=1)
    cov = np.cov(X, rowvar=False).reshape(proc.dim, proc.dim)
    lam_min = float(np.linalg.eigvalsh(cov).min())
    return MomentEstimate(
        sigma_w_1=float(norms.mean()),
        sigma_w_4=float(np.mean(norms ** 4) ** 0.25),
        sigma_lower=sqrt(max(lam_min, 0.0)),
        samples=n_samples,
    )


def _component_moments(proc: NoiseProcess) -> tuple[float, float]:
    """(variance, fourth moment) of a single component, exact per family."""
    s = proc.scale
    if proc.family == "zero" or s == 0.0:
        return 0.0, 0.0
    if proc.family == "gaussian":
        return s ** 2, 3.0 * s ** 4
    if proc.family == "laplace":
        return 2.0 * s ** 2, 24.0 * s ** 4
    if proc.family == "student_t":
        df = float(proc.df)
        return s ** 2 * df / (df - 2.0), s ** 4 * 3.0 * df ** 2 / ((df - 2.0) * (df - 4.0))
    return s ** 2, s ** 4  # scaled_bernoulli


def population_sigma_w(proc: NoiseProcess) -> float:
    """sqrt(E||w||^2), a valid bound for E||w|| in the first-moment assumption."""
    m2, _ = _component_moments(proc)
    return sqrt(proc.dim * m2)


def population_sigma_w4(proc: NoiseProcess) -> float:
    """(E||w||^4)^(1/4) from exact component moments (components independent)."""
    m2, m4 = _component_moments(proc)
    fourth = proc.dim * m4 + proc.dim * (proc.dim - 1) * m2 ** 2
    return fourth ** 0.25


def population_sigma_lower(proc: NoiseProcess) -> float:
    """Exact sigma-underbar: per-component standard deviation (covariance is
    isotropic for every family here)."""
    m2, _ = _component_moments(proc)
    return sqrt(m2)
