import numpy as np
import pytest

from onlinectrl.costs import quadratic_cost
from onlinectrl.policy import sample_admissible, zero_policy
from onlinectrl.stability import make_closed_loop
from onlinectrl.surrogate import (SurrogateKernel, grad_f, hessian_frob_bound,
                                  psi, state_expansion, surrogate_cost_f,
                                  surrogate_point)
from onlinectrl.system import make_system

KAPPA, GAMMA, KAPPA_B = 1.0, 0.5, 1.0


def _random_instance(rng, n_max=3, H_max=4):
    """Stable diagonal loop with B = I and a random small gain."""
    n = int(rng.integers(1, n_max + 1))
    H = int(rng.integers(1, H_max + 1))
    A_K = np.diag(rng.uniform(-0.45, 0.45, size=n))
    K = 0.2 * rng.standard_normal((n, n))
    A = A_K + K
    sys_ = make_system(A, np.eye(n))
    return sys_, K, n, H


def _simulate(sys_, K, M_seq, ws):
    """Closed-loop rollout under time-varying policies; returns all states."""
    T = len(ws)
    H = M_seq[0].blocks.shape[0]
    xs = [np.zeros(sys_.n_x)]
    for t in range(T):
        u = -K @ xs[t]
        for i in range(1, H + 1):
            if t - i >= 0:
                u = u + M_seq[t].blocks[i - 1] @ ws[t - i]
        xs.append(sys_.A @ xs[t] + sys_.B @ u + ws[t])
    return xs


def _window(ws, t, length):
    """W[m] = w_{t-1-m}, zero before the start of time."""
    n_x = ws[0].shape[0]
    W = np.zeros((length, n_x))
    for m in range(length):
        k = t - 1 - m
        if k >= 0:
            W[m] = ws[k]
    return W


def test_state_expansion_equals_simulation_every_h():
    rng = np.random.default_rng(101)
    for _ in range(8):
        sys_, K, n, H = _random_instance(rng)
        T = int(rng.integers(4, 14))
        M_seq = [sample_admissible(rng, H, n, n, KAPPA, GAMMA, KAPPA_B)
                 for _ in range(T)]
        ws = [rng.standard_normal(n) for _ in range(T)]
        xs = _simulate(sys_, K, M_seq, ws)
        cl = make_closed_loop(sys_, K, i_max=H + T + 1)
        noise = np.stack(ws)
        for t in range(1, T + 1):
            for h in range(t):
                got = state_expansion(cl, sys_.B, M_seq, noise, t, h, H)
                np.testing.assert_allclose(got, xs[t], atol=1e-9,
                                           err_msg=f"t={t} h={h}")


def test_psi_validations():
    rng = np.random.default_rng(5)
    sys_, K, n, H = _random_instance(rng)
    cl = make_closed_loop(sys_, K, i_max=2 * H + 8)
    M = [sample_admissible(rng, H, n, n, KAPPA, GAMMA, KAPPA_B)
         for _ in range(3)]
    psi(cl, sys_.B, M[:3], t=5, i=0, h=2, H=H)
    with pytest.raises(ValueError):
        psi(cl, sys_.B, M[:3], t=1, i=0, h=2, H=H)   # h > t
    with pytest.raises(ValueError):
        psi(cl, sys_.B, M[:3], t=5, i=H + 3, h=2, H=H)  # i > H + h
    with pytest.raises(ValueError):
        psi(cl, sys_.B, M[:2], t=5, i=0, h=2, H=H)   # window length mismatch


def test_point_matches_frozen_policy_replay():
    rng = np.random.default_rng(202)
    for _ in range(10):
        sys_, K, n, H = _random_instance(rng)
        T = 2 * H + 6
        M = sample_admissible(rng, H, n, n, KAPPA, GAMMA, KAPPA_B)
        ws = [rng.standard_normal(n) for _ in range(T)]
        cl = make_closed_loop(sys_, K, i_max=H)
        kern = SurrogateKernel(cl, sys_.B, H)
        for t in (H + 1, T - 1, T):
            W = _window(ws, t, 2 * H + 1)
            y, v = kern.point(M.blocks, W)
            # replay: zero the state H+1 steps back, run the frozen policy
            x = np.zeros(n)
            for k in range(t - 1 - H, t):
                u = -K @ x
                for i in range(1, H + 1):
                    if k - i >= 0:
                        u = u + M.blocks[i - 1] @ ws[k - i]
                if k >= 0:
                    x = sys_.A @ x + sys_.B @ u + ws[k]
                else:
                    x = sys_.A @ x + sys_.B @ u
            np.testing.assert_allclose(y, x, atol=1e-10)
            v_expect = -K @ y
            for i in range(1, H + 1):
                if t - i >= 0:
                    v_expect = v_expect + M.blocks[i - 1] @ ws[t - i]
            np.testing.assert_allclose(v, v_expect, atol=1e-10)


def test_point_window_matches_varying_policy_replay():
    rng = np.random.default_rng(303)
    for _ in range(8):
        sys_, K, n, H = _random_instance(rng)
        t = 2 * H + 5
        ws = [rng.standard_normal(n) for _ in range(t)]
        window = [sample_admissible(rng, H, n, n, KAPPA, GAMMA, KAPPA_B)
                  for _ in range(H + 2)]  # M_{t-1-H}, ..., M_t
        cl = make_closed_loop(sys_, K, i_max=H)
        kern = SurrogateKernel(cl, sys_.B, H)
        W = _window(ws, t, 2 * H + 1)
        y, v = kern.point_window(window, W)
        x = np.zeros(n)
        for k in range(t - 1 - H, t):
            M_k = window[k - (t - 1 - H)].blocks
            u = -K @ x
            for i in range(1, H + 1):
                if k - i >= 0:
                    u = u + M_k[i - 1] @ ws[k - i]
            x = sys_.A @ x + sys_.B @ u + ws[k]
        np.testing.assert_allclose(y, x, atol=1e-10)
        v_expect = -K @ y
        for i in range(1, H + 1):
            v_expect = v_expect + window[H + 1].blocks[i - 1] @ ws[t - i]
        np.testing.assert_allclose(v, v_expect, atol=1e-10)


def test_truncation_error_bounded_by_decay():
    # zeroing the state H+1 steps back costs at most kappa^2 (1-gamma)^{H+1} ||x||
    rng = np.random.default_rng(404)
    sys_, K, n, H = _random_instance(rng)
    T = 2 * H + 9
    M = sample_admissible(rng, H, n, n, KAPPA, GAMMA, KAPPA_B)
    ws = [rng.standard_normal(n) for _ in range(T)]
    xs = _simulate(sys_, K, [M] * T, ws)
    cl = make_closed_loop(sys_, K, i_max=H)
    kern = SurrogateKernel(cl, sys_.B, H)
    y, _ = kern.point(M.blocks, _window(ws, T, 2 * H + 1))
    err = np.linalg.norm(xs[T] - y)
    bound = KAPPA ** 2 * (1 - GAMMA) ** (H + 1) * np.linalg.norm(xs[T - 1 - H])
    assert err <= bound + 1e-12


def test_grad_matches_finite_differences():
    rng = np.random.default_rng(505)
    for _ in range(12):
        sys_, K, n, H = _random_instance(rng)
        Qh = rng.standard_normal((n, n))
        Rh = rng.standard_normal((n, n))
        cost = quadratic_cost(Qh @ Qh.T + 0.2 * np.eye(n),
                              Rh @ Rh.T + 0.2 * np.eye(n))
        cl = make_closed_loop(sys_, K, i_max=H)
        kern = SurrogateKernel(cl, sys_.B, H)
        W = rng.standard_normal((2 * H + 1, n))
        M = sample_admissible(rng, H, n, n, KAPPA, GAMMA, KAPPA_B)
        G, y, v = kern.grad(cost, M.blocks, W)
        assert np.isfinite(cost.value(y, v))
        eps = 1e-6
        fd = np.zeros_like(G)
        for idx in np.ndindex(G.shape):
            up, dn = M.blocks.copy(), M.blocks.copy()
            up[idx] += eps
            dn[idx] -= eps
            fd[idx] = (kern.value(cost, up, W) - kern.value(cost, dn, W)) \
                / (2 * eps)
        denom = max(np.linalg.norm(fd), 1e-12)
        assert np.linalg.norm(G - fd) / denom <= 1e-6


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(606)
    sys_, K, n, H = _random_instance(rng)
    cl = make_closed_loop(sys_, K, i_max=H)
    kern = SurrogateKernel(cl, sys_.B, H)
    W = rng.standard_normal((2 * H + 1, n))
    M = sample_admissible(rng, H, n, n, KAPPA, GAMMA, KAPPA_B)
    J = kern.jacobian(W)
    p = H * n * n
    assert J.shape == (2 * n, p)
    eps = 1e-6
    flat = M.blocks.reshape(-1)
    for col in range(p):
        up, dn = flat.copy(), flat.copy()
        up[col] += eps
        dn[col] -= eps
        yu, vu = kern.point(up.reshape(H, n, n), W)
        yd, vd = kern.point(dn.reshape(H, n, n), W)
        fd = (np.concatenate([yu, vu]) - np.concatenate([yd, vd])) / (2 * eps)
        np.testing.assert_allclose(J[:, col], fd, atol=1e-7)


def test_hessian_bound_matches_quadratic_hessian():
    rng = np.random.default_rng(707)
    sys_, K, n, H = _random_instance(rng)
    cost = quadratic_cost(np.eye(n), 0.5 * np.eye(n))
    cl = make_closed_loop(sys_, K, i_max=H)
    kern = SurrogateKernel(cl, sys_.B, H)
    W = rng.standard_normal((2 * H + 1, n))
    M = sample_admissible(rng, H, n, n, KAPPA, GAMMA, KAPPA_B)
    got = hessian_frob_bound(cost, cl, sys_.B, M, W, t=2 * H + 2)
    # the surrogate is quadratic in M, so differentiate the gradient exactly
    p = H * n * n
    hess = np.zeros((p, p))
    eps = 1e-5
    for col in range(p):
        up = M.blocks.reshape(-1).copy()
        dn = up.copy()
        up[col] += eps
        dn[col] -= eps
        gu, _, _ = kern.grad(cost, up.reshape(H, n, n), W)
        gd, _, _ = kern.grad(cost, dn.reshape(H, n, n), W)
        hess[:, col] = (gu - gd).reshape(-1) / (2 * eps)
    assert np.isclose(got, np.linalg.norm(hess), rtol=1e-5)


def test_hessian_bound_requires_cost_hessian():
    from onlinectrl.costs import CostFunction
    rng = np.random.default_rng(3)
    sys_, K, n, H = _random_instance(rng)
    cl = make_closed_loop(sys_, K, i_max=H)
    bare = CostFunction(value=lambda x, u: float(x @ x + u @ u),
                        grad_x=lambda x, u: 2 * x,
                        grad_u=lambda x, u: 2 * u, G_c=2.0)
    M = zero_policy(H, n, n)
    with pytest.raises(NotImplementedError):
        hessian_frob_bound(bare, cl, sys_.B, M, np.zeros((2 * H + 1, n)), t=2 * H + 2)


def test_module_wrappers_consistent_with_kernel():
    rng = np.random.default_rng(808)
    sys_, K, n, H = _random_instance(rng)
    cl = make_closed_loop(sys_, K, i_max=H)
    kern = SurrogateKernel(cl, sys_.B, H)
    cost = quadratic_cost(np.eye(n), np.eye(n))
    W = rng.standard_normal((2 * H + 1, n))
    M = sample_admissible(rng, H, n, n, KAPPA, GAMMA, KAPPA_B)
    window = [M] * (H + 2)
    pt = surrogate_point(cl, sys_.B, window, W, t=2 * H + 2)
    y, v = kern.point(M.blocks, W)
    np.testing.assert_allclose(pt.y, y, atol=1e-12)
    np.testing.assert_allclose(pt.v, v, atol=1e-12)
    assert surrogate_cost_f(cost, cl, sys_.B, M, W, t=2 * H + 2) == \
        pytest.approx(kern.value(cost, M.blocks, W))
    g = grad_f(cost, cl, sys_.B, M, W, t=2 * H + 2)
    G, _, _ = kern.grad(cost, M.blocks, W)
    np.testing.assert_allclose(g.blocks, G, atol=1e-12)
