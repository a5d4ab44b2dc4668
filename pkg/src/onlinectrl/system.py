"""Known linear plant x_{t+1} = A x_t + B u_t + w_t.

The dynamics matrices are known exactly; the disturbance w_t is whatever
the environment injects. Because A and B are known, the realized
disturbance can be recovered from consecutive states, which is what the
learner feeds to its policy and gradient computations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np


def spectral_norm(mat: np.ndarray) -> float:
    return float(np.linalg.norm(mat, 2))


@dataclass(frozen=True)
class LinearSystem:
    """Dynamics pair (A, B) with cached dimensions and kappa_B = max(||B||, 1)."""

    A: np.ndarray
    B: np.ndarray
    n_x: int
    n_u: int
    kappa_B: float


@dataclass
class SystemState:
    t: int
    x: np.ndarray


def make_system(A: Any, B: Any) -> LinearSystem:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"A must be square, got shape {A.shape}")
    if B.ndim != 2 or B.shape[0] != A.shape[0]:
        raise ValueError(f"B must be {A.shape[0]} x n_u, got shape {B.shape}")
    if not (np.isfinite(A).all() and np.isfinite(B).all()):
        raise ValueError("A and B must be finite")
    return LinearSystem(A=A, B=B, n_x=A.shape[0], n_u=B.shape[1],
                        kappa_B=max(spectral_norm(B), 1.0))


def system_from_json(doc: dict) -> LinearSystem:
    """Build a system from a parsed JSON document {"A": [[...]], "B": [[...]]}.

    Ragged rows are rejected by the array conversion.
    """
    for key in ("A", "B"):
        if key not in doc:
            raise ValueError(f"system document missing {key!r}")
    try:
        A = np.array(doc["A"], dtype=float)
        B = np.array(doc["B"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"system matrices must be rectangular numeric arrays: {exc}") from None
    return make_system(A, B)


def initial_state(sys: LinearSystem, x0: np.ndarray | None = None) -> SystemState:
    """State at t = 0. Default start is the origin; a nonzero start is opt-in."""
    if x0 is None:
        x = np.zeros(sys.n_x)
    else:
        x = np.asarray(x0, dtype=float)
        if x.shape != (sys.n_x,):
            raise ValueError(f"x0 must have shape ({sys.n_x},), got {x.shape}")
    return SystemState(t=0, x=x)


def step(sys: LinearSystem, state: SystemState, u: np.ndarray, w: np.ndarray) -> SystemState:
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if u.shape != (sys.n_u,):
        raise ValueError(f"u must have shape ({sys.n_u},), got {u.shape}")
    if w.shape != (sys.n_x,):
        raise ValueError(f"w must have shape ({sys.n_x},), got {w.shape}")
    x_next = sys.A @ state.x + sys.B @ u + w
    return SystemState(t=state.t + 1, x=x_next)


def recover_noise(sys: LinearSystem, x_next: np.ndarray, x: np.ndarray,
                  u: np.ndarray) -> np.ndarray:
    """Realized disturbance w_t = x_{t+1} - A x_t - B u_t."""
    return np.asarray(x_next, dtype=float) - sys.A @ x - sys.B @ u
