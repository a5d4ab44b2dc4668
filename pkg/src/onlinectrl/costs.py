"""Convex stage costs and cost schedules.

Costs are revealed online: the learner commits u_t first and only then
receives c_t. That ordering is enforced structurally by CostSchedule:
the only learner-facing accessor is reveal(t, u), which takes the
committed input.

Every cost carries the constants the theory consumes: a gradient-growth
bound G_c >= 1 with ||grad_x c|| <= G_c ||x|| and ||grad_u c|| <= G_c ||u||,
and curvature bounds alpha I <= hess c <= beta I when available.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .rng import STREAM_COST, keyed_rng

_PSD_TOL = -1e-10
_SYM_TOL = 1e-10


@dataclass(frozen=True)
class CostFunction:
    value: Callable[[np.ndarray, np.ndarray], float]
    grad_x: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad_u: Callable[[np.ndarray, np.ndarray], np.ndarray]
    G_c: float
    alpha: Optional[float] = None
    beta: Optional[float] = None
    hessian: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    value_batch: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None


def _check_psd(mat: np.ndarray, name: str) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name} must be square, got shape {mat.shape}")
    if np.abs(mat - mat.T).max(initial=0.0) > _SYM_TOL:
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(mat).min() < _PSD_TOL:
        raise ValueError(f"{name} must be positive semidefinite")
    return mat


def quadratic_cost(Qmat: np.ndarray, Rmat: np.ndarray) -> CostFunction:
    """c(x, u) = x'Qx + u'Ru for symmetric PSD Q, R.

    G_c = max(2||Q||, 2||R||, 1); curvature bounds come from the extreme
    eigenvalues of blockdiag(Q, R), with alpha reported only when strictly
    positive.
    """
    Q = _check_psd(Qmat, "Q")
    R = _check_psd(Rmat, "R")
    eigs = np.concatenate([np.linalg.eigvalsh(Q), np.linalg.eigvalsh(R)])
    lo, hi = 2.0 * eigs.min(), 2.0 * eigs.max()
    hess_const = 2.0 * np.block([
        [Q, np.zeros((Q.shape[0], R.shape[0]))],
        [np.zeros((R.shape[0], Q.shape[0])), R],
    ])
    return CostFunction(
        value=lambda x, u: float(x @ Q @ x + u @ R @ u),
        grad_x=lambda x, u: 2.0 * (Q @ x),
        grad_u=lambda x, u: 2.0 * (R @ u),
        G_c=max(2.0 * float(np.linalg.norm(Q, 2)), 2.0 * float(np.linalg.norm(R, 2)), 1.0),
        alpha=lo if lo > 0.0 else None,
        beta=hi if hi > 0.0 else None,
        hessian=lambda x, u: hess_const,
        value_batch=lambda X, U: np.einsum("ci,ij,cj->c", X, Q, X)
        + np.einsum("ci,ij,cj->c", U, R, U),
    )


@dataclass
class CostSchedule:
    """Sequence of per-step costs over a fixed horizon.

    generator(t) is the offline accessor (comparators may replay it
    freely); the learner goes through reveal(t, u), which requires the
    committed input. Subclasses may record reveal calls to audit the
    protocol ordering.
    """

    generator: Callable[[int], CostFunction]
    horizon: int
    g_c: float
    alpha: Optional[float] = None
    beta: Optional[float] = None
    family: str = "custom"
    meta: dict = field(default_factory=dict)

    def reveal(self, t: int, u: np.ndarray) -> CostFunction:
        if not 0 <= t < self.horizon:
            raise ValueError(f"step {t} outside horizon [0, {self.horizon})")
        return self.generator(t)


def constant_schedule(cost: CostFunction, T: int) -> CostSchedule:
    return CostSchedule(generator=lambda t: cost, horizon=T, g_c=cost.G_c,
                        alpha=cost.alpha, beta=cost.beta, family="quadratic")


def _random_psd(rng: np.random.Generator, n: int) -> np.ndarray:
    """Random PSD matrix with spectral norm uniform in [0.1, 1]."""
    target = rng.uniform(0.1, 1.0)
    if n == 1:
        return np.array([[target]])
    X = rng.standard_normal((n, n))
    G = X @ X.T
    return G * (target / np.linalg.norm(G, 2))


def adversarial_convex_schedule(seed: int, T: int, n_x: int, n_u: int) -> CostSchedule:
    """Per-step random quadratics c_t(x,u) = x'Q_t x + u'R_t u.

    Q_t and R_t are PSD with spectral norm in [0.1, 1], drawn
    deterministically per (seed, t), so any step can be regenerated
    independently of the others. Family-level constants: G_c = 2 from the
    norm cap; beta = 2; alpha = 0.2 in the scalar case (where the norm
    floor is also an eigenvalue floor) and unreported otherwise.
    """

    def gen(t: int) -> CostFunction:
        rng = keyed_rng(seed, STREAM_COST, t)
        return quadratic_cost(_random_psd(rng, n_x), _random_psd(rng, n_u))

    alpha = 0.2 if (n_x == 1 and n_u == 1) else None
    return CostSchedule(generator=gen, horizon=T, g_c=2.0, alpha=alpha, beta=2.0,
                        family="random_quadratic", meta={"seed": seed})


def materialize(schedule: CostSchedule) -> CostSchedule:
    """Pre-instantiate every step's cost; semantics unchanged, lookups O(1).

    Worth doing before batch runs where comparator rollouts revisit each
    step many times.
    """
    costs = [schedule.generator(t) for t in range(schedule.horizon)]
    return CostSchedule(generator=costs.__getitem__, horizon=schedule.horizon,
                        g_c=schedule.g_c, alpha=schedule.alpha, beta=schedule.beta,
                        family=schedule.family, meta=dict(schedule.meta))
