"""Benchmark policies evaluated on the same disturbance realization.

Regret is measured against a policy class replayed on exactly the noise
the learner saw. Three comparators are provided: the best fixed strongly
stable gain from a finite candidate set, the disturbance-action policy
induced by a reference gain, and the best fixed disturbance-action
parameters found by offline projected gradient descent on the surrogate
objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .costs import CostSchedule
from .learner import EpisodeRecord, noise_fingerprint
from .policy import (PolicyParams, comparator_params, project, zero_policy)
from .rng import STREAM_SEARCH, keyed_rng
from .stability import StabilityCertificate, make_closed_loop
from .surrogate import SurrogateKernel
from .system import LinearSystem


@dataclass
class ComparatorResult:
    kind: str
    cumulative_cost: float
    per_step_costs: np.ndarray
    descriptor: dict
    search_meta: dict
    noise_hash: str
    surrogate_cost: Optional[float] = None


def _stage_values(cost, X: np.ndarray, U: np.ndarray) -> np.ndarray:
    """Stage cost for a batch of (state, input) pairs, one per row."""
    if cost.value_batch is not None:
        return cost.value_batch(X, U)
    return np.array([cost.value(X[c], U[c]) for c in range(X.shape[0])])


def best_fixed_K(sys: LinearSystem, candidates: Sequence[np.ndarray],
                 cost_schedule: CostSchedule,
                 realized_noise: np.ndarray) -> ComparatorResult:
    """Cheapest fixed linear gain u = -Kx over the candidate set.

    All candidates are rolled out in one batch on the shared noise; ties
    go to the first index.
    """
    if len(candidates) == 0:
        raise ValueError("candidate set is empty")
    ws = np.asarray(realized_noise, dtype=float)
    T = ws.shape[0]
    if cost_schedule.horizon < T:
        raise ValueError("cost schedule shorter than the noise sequence")
    Ks = np.stack([np.asarray(K, dtype=float) for K in candidates])
    if Ks.shape[1:] != (sys.n_u, sys.n_x):
        raise ValueError(f"candidate gains must be ({sys.n_u}, {sys.n_x})")
    A_Ks = sys.A[None, :, :] - np.matmul(sys.B, Ks)

    C = Ks.shape[0]
    X = np.zeros((C, sys.n_x))
    costs = np.empty((C, T))
    for t in range(T):
        U = -np.einsum("cux,cx->cu", Ks, X)
        costs[:, t] = _stage_values(cost_schedule.generator(t), X, U)
        X = np.einsum("cxy,cy->cx", A_Ks, X) + ws[t]

    totals = costs.sum(axis=1)
    best = int(np.argmin(totals))
    return ComparatorResult(
        kind="fixed_gain",
        cumulative_cost=float(totals[best]),
        per_step_costs=costs[best],
        descriptor={"K": Ks[best].tolist(), "index": best},
        search_meta={"candidate_costs": totals.tolist()},
        noise_hash=noise_fingerprint(ws),
    )


def _rollout_dap(sys: LinearSystem, K: np.ndarray, M: PolicyParams,
                 cost_schedule: CostSchedule, ws: np.ndarray) -> np.ndarray:
    """Stage costs of a fixed disturbance-action policy on given noise."""
    T = ws.shape[0]
    H = M.H
    x = np.zeros(sys.n_x)
    win = np.zeros((H, sys.n_x))  # win[m] = w_{t-1-m}
    costs = np.empty(T)
    for t in range(T):
        u = -K @ x + np.einsum("mux,mx->u", M.blocks, win)
        costs[t] = cost_schedule.generator(t).value(x, u)
        x = sys.A @ x + sys.B @ u + ws[t]
        if H > 0:
            win[1:] = win[:-1]
            win[0] = ws[t]
    return costs


def mstar_rollout(sys: LinearSystem, K: np.ndarray, K_star: np.ndarray,
                  cost_schedule: CostSchedule, realized_noise: np.ndarray,
                  H: int, kappa: float, gamma: float) -> ComparatorResult:
    """Replay of the disturbance-action parameters induced by K_star.

    Block i equals (K - K_star)(A - B K_star)^i; when both gains satisfy
    the same (kappa, gamma) stability bounds these blocks are admissible
    and the policy imitates u = -K_star x up to a tail the class cannot
    express.
    """
    ws = np.asarray(realized_noise, dtype=float)
    K = np.asarray(K, dtype=float)
    K_star = np.asarray(K_star, dtype=float)
    M_star = comparator_params(K, K_star, sys.A, sys.B, H, kappa, gamma)
    costs = _rollout_dap(sys, K, M_star, cost_schedule, ws)
    return ComparatorResult(
        kind="mstar",
        cumulative_cost=float(costs.sum()),
        per_step_costs=costs,
        descriptor={"K": K.tolist(), "K_star": K_star.tolist(), "H": H},
        search_meta={"M_star_frob": float(M_star.frob_norm())},
        noise_hash=noise_fingerprint(ws),
    )


def _window_matrix(ws: np.ndarray, H: int) -> np.ndarray:
    """Wmat[t, m] = w_{t-1-m} for m in [0, 2H], zero before the start."""
    T, n_x = ws.shape
    Z = np.vstack([np.zeros((2 * H + 1, n_x)), ws])
    Wmat = np.empty((T, 2 * H + 1, n_x))
    for t in range(T):
        Wmat[t] = Z[t:t + 2 * H + 1][::-1]
    return Wmat


def best_fixed_M(sys: LinearSystem, K: np.ndarray, cert: StabilityCertificate,
                 cost_schedule: CostSchedule, realized_noise: np.ndarray,
                 H: int, optimizer_budget: int = 500,
                 starts: Sequence[PolicyParams] | None = None) -> ComparatorResult:
    """Best fixed admissible parameters in hindsight, by offline PGD.

    The search objective is the summed surrogate cost, which is convex in
    the parameters; the reported cumulative cost is an exact closed-loop
    rollout of the winner. Extra starting points supplement the default
    zero start. The step size is 1/L with L estimated by power iteration
    on gradient differences.
    """
    ws = np.asarray(realized_noise, dtype=float)
    T = ws.shape[0]
    K = np.asarray(K, dtype=float)
    kappa, gamma, kappa_B = cert.kappa, cert.gamma, sys.kappa_B
    cl = make_closed_loop(sys, K, i_max=H)
    kern = SurrogateKernel(cl, sys.B, H)
    Wmat = _window_matrix(ws, H)
    stage = [cost_schedule.generator(t) for t in range(T)]

    def objective(blocks: np.ndarray) -> float:
        return sum(kern.value(stage[t], blocks, Wmat[t]) for t in range(T))

    def gradient(blocks: np.ndarray) -> np.ndarray:
        G = np.zeros_like(blocks)
        for t in range(T):
            g, _, _ = kern.grad(stage[t], blocks, Wmat[t])
            G += g
        return G

    M_zero = zero_policy(H, sys.n_u, sys.n_x)
    g0 = gradient(M_zero.blocks)
    rng = keyed_rng(0, STREAM_SEARCH, step=T)
    v = rng.standard_normal(M_zero.blocks.shape)
    v /= max(np.linalg.norm(v), 1e-300)
    L_hat = 1.0
    eps = 1e-4
    for _ in range(12):
        Hv = (gradient(M_zero.blocks + eps * v) - g0) / eps
        L_new = float(np.linalg.norm(Hv))
        if L_new < 1e-12:
            break
        v = Hv / L_new
        if abs(L_new - L_hat) <= 1e-6 * L_hat:
            L_hat = L_new
            break
        L_hat = L_new
    step = 1.0 / max(L_hat, 1e-12)

    points = [M_zero] + (list(starts) if starts else [])
    finals = []
    objectives = []
    for start in points:
        M = project(start, kappa, gamma, kappa_B)
        for _ in range(optimizer_budget):
            G = gradient(M.blocks)
            M = project(PolicyParams(M.blocks - step * G), kappa, gamma, kappa_B)
        finals.append(M)
        objectives.append(objective(M.blocks))
    best = int(np.argmin(objectives))
    M_best = finals[best]

    costs = _rollout_dap(sys, K, M_best, cost_schedule, ws)
    return ComparatorResult(
        kind="fixed_params",
        cumulative_cost=float(costs.sum()),
        per_step_costs=costs,
        descriptor={"H": H, "M_frob": float(M_best.frob_norm()),
                    "blocks": M_best.blocks.tolist()},
        search_meta={"objectives": [float(o) for o in objectives],
                     "lipschitz_estimate": float(L_hat),
                     "iterations": optimizer_budget,
                     "start_count": len(points)},
        noise_hash=noise_fingerprint(ws),
        surrogate_cost=float(objectives[best]),
    )


@dataclass
class RegretCurve:
    learner_cum: np.ndarray
    comparator_cum: np.ndarray
    checkpoints: dict = field(default_factory=dict)
    regret_final: float = 0.0
    burn_in: int = 0
    regret_after_burn_in: float = 0.0


def regret(record: EpisodeRecord, comp: ComparatorResult,
           burn_in: int = 0) -> RegretCurve:
    """Cumulative learner cost minus comparator cost on shared noise.

    Refuses to compare runs whose disturbance fingerprints differ. The
    primary number is the full-horizon difference; the burn-in variant
    drops the first burn_in steps of both sides and is secondary.
    """
    if record.noise_hash != comp.noise_hash:
        raise ValueError("comparator was run on a different noise realization")
    if not 0 <= burn_in < record.T:
        raise ValueError(f"burn_in {burn_in} outside [0, {record.T})")
    lc = record.cum_costs()
    cc = np.cumsum(comp.per_step_costs)
    T = record.T
    diff = lc - cc
    marks = sorted({max(1, T // 8), max(1, T // 4), max(1, T // 2), T})
    checkpoints = {int(s): float(diff[s - 1]) for s in marks}
    if burn_in > 0:
        after = float((lc[-1] - lc[burn_in - 1]) - (cc[-1] - cc[burn_in - 1]))
    else:
        after = float(diff[-1])
    return RegretCurve(
        learner_cum=lc, comparator_cum=cc, checkpoints=checkpoints,
        regret_final=float(diff[-1]), burn_in=burn_in,
        regret_after_burn_in=after,
    )
