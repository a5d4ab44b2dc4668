"""Disturbance-action policies and their admissible set.

A policy is a stabilizing base gain K plus H matrices M^[0..H-1] acting
on the last H observed disturbances:

    u_t = -K x_t + sum_{i=1}^{H} M^[i-1] w_{t-i},   w_s = 0 for s < 0.

The admissible set M is a product of spectral-norm balls, one per block:
||M^[i]|| <= 2 kappa_B kappa^3 (1-gamma)^i. Projection onto it therefore
factorizes into per-block singular-value clipping, which is exact for
the Frobenius metric on the stacked blocks.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil, log, sqrt
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class PolicyParams:
    """Stacked disturbance-action blocks, shape (H, n_u, n_x)."""

    blocks: np.ndarray

    def __post_init__(self):
        if self.blocks.ndim != 3:
            raise ValueError(f"blocks must be (H, n_u, n_x), got shape {self.blocks.shape}")

    @property
    def H(self) -> int:
        return self.blocks.shape[0]

    def frob_norm(self) -> float:
        return float(np.linalg.norm(self.blocks))


def zero_policy(H: int, n_u: int, n_x: int) -> PolicyParams:
    return PolicyParams(np.zeros((H, n_u, n_x)))


def policy_from_blocks(blocks: Sequence[np.ndarray]) -> PolicyParams:
    return PolicyParams(np.array([np.asarray(b, dtype=float) for b in blocks]))


def horizon_H(T: int, gamma: float) -> int:
    """Memory length H = ceil(2 ln(T) / gamma). Horizons below 3 are rejected."""
    if T < 3:
        raise ValueError(f"horizon T must be >= 3, got {T}")
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    return ceil(2.0 * log(T) / gamma)


def admissible_radii(H: int, kappa: float, gamma: float, kappa_B: float) -> np.ndarray:
    """Per-block spectral-norm radii 2 kappa_B kappa^3 (1-gamma)^i, i = 0..H-1."""
    return 2.0 * kappa_B * kappa ** 3 * (1.0 - gamma) ** np.arange(H)


def policy_class_diameter(n: int, kappa: float, gamma: float, kappa_B: float) -> float:
    """Frobenius diameter D = 4 kappa_B kappa^3 sqrt(n) / gamma, n = max(n_x, n_u)."""
    return 4.0 * kappa_B * kappa ** 3 * sqrt(n) / gamma


def block_spectral_norms(M: PolicyParams) -> np.ndarray:
    if M.blocks.shape[1] == 1 and M.blocks.shape[2] == 1:
        return np.abs(M.blocks[:, 0, 0])
    return np.linalg.svd(M.blocks, compute_uv=False)[:, 0]


def is_admissible(M: PolicyParams, kappa: float, gamma: float, kappa_B: float,
                  tol: float = 1e-9) -> bool:
    radii = admissible_radii(M.H, kappa, gamma, kappa_B)
    return bool(np.all(block_spectral_norms(M) <= radii + tol))


def project(M_raw: PolicyParams, kappa: float, gamma: float,
            kappa_B: float) -> PolicyParams:
    """Frobenius projection onto the admissible set.

    Each block's singular values are clipped at that block's radius; the
    set is a Cartesian product over blocks, so blockwise clipping is the
    exact joint projection. Blocks already inside are passed through the
    SVD round-trip, which is reproduction-exact for 1x1 blocks and within
    machine roundoff otherwise.
    """
    blocks = M_raw.blocks
    radii = admissible_radii(M_raw.H, kappa, gamma, kappa_B)
    if blocks.shape[1] == 1 and blocks.shape[2] == 1:
        clipped = np.clip(blocks[:, 0, 0], -radii, radii)
        return PolicyParams(clipped.reshape(-1, 1, 1))
    U, s, Vt = np.linalg.svd(blocks, full_matrices=False)
    s = np.minimum(s, radii[:, None])
    return PolicyParams(np.einsum("hij,hj,hjk->hik", U, s, Vt))


def sample_admissible(rng: np.random.Generator, H: int, n_u: int, n_x: int,
                      kappa: float, gamma: float, kappa_B: float) -> PolicyParams:
    """Random point of the admissible set, roughly uniform in block norm."""
    radii = admissible_radii(H, kappa, gamma, kappa_B)
    blocks = rng.standard_normal((H, n_u, n_x))
    norms = np.linalg.svd(blocks, compute_uv=False)[:, 0]
    scale = radii * rng.uniform(0.0, 1.0, size=H) / np.maximum(norms, 1e-300)
    return PolicyParams(blocks * scale[:, None, None])


class NoiseHistory:
    """Ring of recent disturbances, most recent first, zero-padded.

    After t pushes, window(k)[m] = w_{t-1-m} for m < k, with zeros where
    the index would be negative. The learner keeps one history of length
    2H+1 (the surrogate window) and hands its first H rows to the policy.
    """

    def __init__(self, capacity: int, dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.dim = dim
        self._buf = np.zeros((capacity, dim))

    def push(self, w: np.ndarray) -> None:
        self._buf[1:] = self._buf[:-1]
        self._buf[0] = w

    def window(self, k: int | None = None) -> np.ndarray:
        if k is None:
            k = self.capacity
        if not 1 <= k <= self.capacity:
            raise ValueError(f"window size {k} outside [1, {self.capacity}]")
        return self._buf[:k]


def control_input(K: np.ndarray, M: PolicyParams, x: np.ndarray,
                  hist: NoiseHistory | np.ndarray) -> np.ndarray:
    """u = -K x + sum_i M^[i-1] w_{t-i} given the recent-disturbance window."""
    win = hist.window(M.H) if isinstance(hist, NoiseHistory) else np.asarray(hist)[:M.H]
    if win.shape[0] < M.H:
        raise ValueError(f"history window holds {win.shape[0]} rows, policy needs {M.H}")
    return -K @ x + np.einsum("mux,mx->u", M.blocks, win)


def comparator_params(K: np.ndarray, K_star: np.ndarray, A: np.ndarray,
                      B: np.ndarray, H: int, kappa: float,
                      gamma: float) -> PolicyParams:
    """Blocks M^[i] = (K - K*) (A - B K*)^i that make the K-based policy
    imitate the gain K* up to H-step truncation.

    Both gains are assumed certified for the shared (kappa, gamma); under
    that assumption the construction always lands in the admissible set,
    so a membership failure indicates an internal inconsistency.
    """
    K = np.asarray(K, dtype=float)
    K_star = np.asarray(K_star, dtype=float)
    A_star = np.asarray(A, dtype=float) - np.asarray(B, dtype=float) @ K_star
    diff = K - K_star
    blocks = np.empty((H, K.shape[0], K.shape[1]))
    P = np.eye(A_star.shape[0])
    for i in range(H):
        blocks[i] = diff @ P
        P = P @ A_star
    M = PolicyParams(blocks)
    kappa_B = max(float(np.linalg.norm(B, 2)), 1.0)
    if not is_admissible(M, kappa, gamma, kappa_B):
        raise RuntimeError("comparator construction left the admissible set; "
                           "gains are not certified for a shared (kappa, gamma)")
    return M
