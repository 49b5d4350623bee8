import math

import numpy as np
import pytest

from irscr.stats import (
    OutageBoundParams,
    chi2_cdf,
    chi2_inv_cdf,
    max_eigenvalue,
    outage_params,
    sta_it_lhs,
)


def test_quantile_at_zero():
    for dof in (1, 2, 7, 40):
        assert chi2_inv_cdf(dof, 0.0) == 0.0


def test_quantile_two_dof_closed_form():
    got = chi2_inv_cdf(2, 0.95)
    want = -2.0 * math.log(0.05)
    assert abs(got - want) <= 1e-9 * want


def test_quantile_against_monte_carlo():
    rng = np.random.default_rng(42)
    draws = rng.chisquare(16, size=10_000_000)
    emp = np.quantile(draws, 0.95)
    got = chi2_inv_cdf(16, 0.95)
    assert abs(got - emp) <= 5e-3 * emp


def test_quantile_monotone_in_p_and_dof():
    ps = [0.01, 0.2, 0.5, 0.9, 0.99, 0.9999]
    vals = [chi2_inv_cdf(6, p) for p in ps]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    dofs = [1, 2, 3, 5, 9, 17, 60]
    vals = [chi2_inv_cdf(d, 0.9) for d in dofs]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_quantile_domain_errors():
    with pytest.raises(ValueError):
        chi2_inv_cdf(4, 1.0)
    with pytest.raises(ValueError):
        chi2_inv_cdf(4, -0.1)
    with pytest.raises(ValueError):
        chi2_inv_cdf(0, 0.5)


def test_cdf_quantile_roundtrip():
    for dof in (2, 5, 24, 56):
        for p in (0.05, 0.5, 0.95):
            assert abs(chi2_cdf(dof, chi2_inv_cdf(dof, p)) - p) <= 1e-10


def test_max_eigenvalue_identity_and_diag():
    assert abs(max_eigenvalue(np.eye(5)) - 1.0) <= 1e-12
    assert abs(max_eigenvalue(np.diag([1.0, 2.0, 3.0])) - 3.0) <= 1e-12


def test_max_eigenvalue_vs_power_iteration():
    rng = np.random.default_rng(8)
    A = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    S = A @ A.conj().T
    v = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    for _ in range(10_000):
        v = S @ v
        v = v / np.linalg.norm(v)
    lam_pi = float(np.real(np.conj(v) @ S @ v))
    assert abs(max_eigenvalue(S) - lam_pi) <= 1e-8 * lam_pi


def test_max_eigenvalue_rejects_nonhermitian():
    with pytest.raises(ValueError):
        max_eigenvalue(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_outage_params_identity():
    p = outage_params(np.eye(4), 3, 1, 0.05)
    assert abs(p.theta - 4.0) <= 1e-12
    assert p.dof == 8


def test_outage_params_beta_one_removes_cap():
    p = outage_params(np.eye(4), 3, 1, 1.0)
    assert p.quantile == 0.0
    assert p.penalty == 0.0


def test_outage_params_quantile_incomplete_gamma_oracle():
    # dof=4: regularized lower gamma P(2, x/2) = 1 - e^-u (1+u), u = x/2
    p = outage_params(np.eye(2), 1, 1, 0.05)
    assert p.dof == 4

    def cdf4(x):
        u = 0.5 * x
        return 1.0 - math.exp(-u) * (1.0 + u)

    lo, hi = 0.0, 50.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if cdf4(mid) < 0.95:
            lo = mid
        else:
            hi = mid
    oracle = 0.5 * (lo + hi)
    assert abs(p.quantile - oracle) <= 1e-9 * oracle
    assert abs(p.quantile - 9.4877) <= 1e-4


def test_outage_params_dimension_check():
    with pytest.raises(Exception):
        outage_params(np.eye(5), 3, 1, 0.05)


def test_sta_it_lhs_zero_precoder():
    params = OutageBoundParams(theta=2.0, dof=8, quantile=5.0)
    W = np.zeros((3, 2))
    G = np.ones((4, 3), dtype=complex)
    pt = np.ones(4, dtype=complex)
    assert sta_it_lhs(params, W, pt, G) == 0.0


def test_sta_it_lhs_zero_quantile_is_nominal():
    rng = np.random.default_rng(2)
    W = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    G = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
    pt = np.exp(1j * rng.uniform(0, 2 * np.pi, 5))
    params = OutageBoundParams(theta=3.0, dof=30, quantile=0.0)
    nominal = np.linalg.norm((np.conj(pt) @ G) @ W) ** 2
    assert abs(sta_it_lhs(params, W, pt, G) - nominal) <= 1e-12 * nominal


def test_sta_it_lhs_matches_scalar_oracle():
    rng = np.random.default_rng(4)
    W = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    G = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
    pt = np.exp(1j * rng.uniform(0, 2 * np.pi, 5))
    params = OutageBoundParams(theta=1.7, dof=30, quantile=3.3)
    # term-by-term scalar evaluation
    w2 = sum(abs(W[i, k]) ** 2 for i in range(3) for k in range(2))
    row = [sum(np.conj(pt[n]) * G[n, m] for n in range(5)) for m in range(3)]
    nom = sum(abs(sum(row[m] * W[m, k] for m in range(3))) ** 2 for k in range(2))
    oracle = 1.7 * 3.3 * w2 + nom
    got = sta_it_lhs(params, W, pt, G)
    assert abs(got - oracle) <= 1e-12 * abs(oracle)


def test_surrogate_is_sufficient_for_outage():
    # whenever the deterministic side holds, the empirical outage satisfies
    # the target with margin (sufficiency direction)
    rng = np.random.default_rng(77)
    n, mt, beta = 3, 2, 0.1
    dim = (n + 1) * mt
    A = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    sigma = (A @ A.conj().T) / dim
    G = rng.standard_normal((n + 1, mt)) + 1j * rng.standard_normal((n + 1, mt))
    pt = np.concatenate([np.exp(1j * rng.uniform(0, 2 * np.pi, n)), [1.0]])
    W = rng.standard_normal((mt, 2)) + 1j * rng.standard_normal((mt, 2))
    params = outage_params(sigma, n, mt, beta)
    gamma_it = sta_it_lhs(params, W, pt, G) / 0.9  # deterministic side holds

    root = np.linalg.cholesky(sigma + 1e-12 * np.eye(dim))
    samples = 10_000
    t = (rng.standard_normal((dim, samples)) + 1j * rng.standard_normal((dim, samples))) / np.sqrt(2)
    z = root @ t
    zr = z[:n * mt, :].reshape(n, mt, samples, order="F")
    zd = z[n * mt:, :]
    base = np.conj(pt) @ G
    rows = base[:, None] + np.einsum("n,nms->ms", np.conj(pt[:n]), zr) + np.conj(zd)
    it = np.sum(np.abs(np.einsum("ms,mk->ks", rows, W)) ** 2, axis=0)
    satisfied = float(np.mean(it <= gamma_it))
    assert satisfied >= 1.0 - beta - 0.01
