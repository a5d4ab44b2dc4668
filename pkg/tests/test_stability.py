import numpy as np
import pytest

from onlinectrl.stability import (CertificationError, build_certificate,
                                  certify, make_closed_loop,
                                  power_decay_check, validate_certificate)
from onlinectrl.system import make_system


def _scalar_system():
    return make_system(np.array([[0.5]]), np.array([[1.0]]))


def test_certify_scalar_deadbeat():
    sys_ = _scalar_system()
    cert = certify(sys_, np.array([[0.5]]), kappa=1.0, gamma=0.9)
    assert cert.diagonal
    assert cert.kappa == 1.0 and cert.gamma == 0.9
    # A - BK = 0, so P is the zero matrix
    assert np.linalg.norm(cert.P, 2) == 0.0


def test_certify_norm_violations_are_named():
    sys_ = _scalar_system()
    # A - BK = -0.7 passes gamma = 0.25 but ||K|| = 1.2 exceeds kappa = 1
    with pytest.raises(CertificationError) as exc:
        certify(sys_, np.array([[1.2]]), kappa=1.0, gamma=0.25)
    assert any("kappa" in v for v in exc.value.violations)
    with pytest.raises(CertificationError):
        # A - BK = 0.3 needs ||P|| <= 1 - gamma
        certify(sys_, np.array([[0.2]]), kappa=1.0, gamma=0.8)


def test_certify_rejects_bad_gamma():
    sys_ = _scalar_system()
    for gamma in (0.0, 1.5, -0.1):
        with pytest.raises((CertificationError, ValueError)):
            certify(sys_, np.array([[0.5]]), kappa=1.0, gamma=gamma)


def test_certify_defective_closed_loop_fails():
    # Jordan block: diagonalization breaks down, eigenvector matrix singular
    A = np.array([[0.5, 1.0], [0.0, 0.5]])
    sys_ = make_system(A, np.eye(2))
    with pytest.raises(CertificationError) as exc:
        certify(sys_, np.zeros((2, 2)), kappa=10.0, gamma=0.3)
    assert exc.value.reason == "defective"


def test_manual_certificate_for_jordan_block():
    # The defective loop still admits a non-diagonal witness:
    # Q = diag(1, 0.2) conjugates the Jordan block to P = [[.5,.2],[0,.5]]
    A = np.array([[0.5, 1.0], [0.0, 0.5]])
    sys_ = make_system(A, np.eye(2))
    K = np.zeros((2, 2))
    P = np.array([[0.5, 0.2], [0.0, 0.5]])
    Q = np.diag([1.0, 0.2])
    cert = build_certificate(kappa=5.0, gamma=0.35, P=P, Q=Q, A_K=A, K=K)
    assert not cert.diagonal
    assert validate_certificate(cert, A, K) == []
    cl = make_closed_loop(sys_, K, i_max=200)
    chk = power_decay_check(cl, cert, i_max=200)
    assert chk["ok"]
    assert np.all(chk["norms"] <= chk["bounds"] + 1e-9)


def test_build_certificate_rejects_wrong_witness():
    A = np.array([[0.5, 1.0], [0.0, 0.5]])
    P = np.array([[0.5, 0.2], [0.0, 0.5]])
    Q = np.diag([1.0, 0.25])  # reconstructs a different off-diagonal entry
    with pytest.raises(CertificationError):
        build_certificate(kappa=5.0, gamma=0.35, P=P, Q=Q, A_K=A,
                          K=np.zeros((2, 2)))


def test_validate_certificate_lists_each_violation():
    A = np.array([[0.5, 1.0], [0.0, 0.5]])
    P = np.array([[0.5, 0.2], [0.0, 0.5]])
    Q = np.diag([1.0, 0.2])
    cert = build_certificate(kappa=5.0, gamma=0.35, P=P, Q=Q, A_K=A,
                             K=np.zeros((2, 2)))
    bad = validate_certificate(cert, A + 0.01, cert.K if hasattr(cert, "K")
                               else np.zeros((2, 2)))
    assert any("reconstruct" in v for v in bad)


def test_closed_loop_powers_match_matrix_power():
    rng = np.random.default_rng(3)
    for _ in range(10):
        n = int(rng.integers(1, 4))
        A = 0.5 * rng.standard_normal((n, n)) / np.sqrt(n)
        sys_ = make_system(A, np.eye(n))
        K = 0.1 * rng.standard_normal((n, n))
        cl = make_closed_loop(sys_, K, i_max=12)
        A_K = A - K
        for i in range(13):
            np.testing.assert_allclose(cl.power(i),
                                       np.linalg.matrix_power(A_K, i),
                                       atol=1e-12)
        with pytest.raises(ValueError):
            cl.power(13)
        stack = cl.power_stack(5)
        assert stack.shape == (5, n, n)
        np.testing.assert_allclose(stack[3], cl.power(3))


def test_random_certificates_satisfy_definition_and_decay():
    # random diagonalizable loops, including complex eigenvalue pairs
    rng = np.random.default_rng(17)
    for trial in range(20):
        n = int(rng.integers(1, 5))
        A_K = rng.standard_normal((n, n)) / np.sqrt(n)
        rho = max(np.abs(np.linalg.eigvals(A_K)))
        A_K *= 0.7 / max(rho, 0.1)
        K = 0.2 * rng.standard_normal((n, n))
        B = np.eye(n)
        A = A_K + B @ K
        sys_ = make_system(A, B)
        rho = max(np.abs(np.linalg.eigvals(A_K)))
        gamma = 0.9 * (1.0 - rho)
        cert = certify(sys_, K, kappa=1e3, gamma=gamma)
        assert validate_certificate(cert, A_K, K) == []
        cl = make_closed_loop(sys_, K, i_max=int(np.ceil(10 / gamma)))
        chk = power_decay_check(cl, cert, i_max=int(np.ceil(10 / gamma)))
        assert chk["ok"], f"trial {trial}: decay bound violated"


def test_certify_tight_kappa_is_sharp():
    rng = np.random.default_rng(29)
    for _ in range(8):
        n = int(rng.integers(2, 4))
        A_K = rng.standard_normal((n, n)) / np.sqrt(n)
        rho = max(np.abs(np.linalg.eigvals(A_K)))
        A_K *= 0.6 / max(rho, 0.1)
        sys_ = make_system(A_K, np.eye(n))
        K = np.zeros((n, n))
        loose = certify(sys_, K, kappa=1e6, gamma=0.2)
        tight = max(np.linalg.norm(loose.Q, 2),
                    np.linalg.norm(loose.Q_inv, 2), 1.0)
        certify(sys_, K, kappa=tight * 1.001, gamma=0.2)
        if tight > 1.0:
            with pytest.raises(CertificationError):
                certify(sys_, K, kappa=tight * 0.98, gamma=0.2)
