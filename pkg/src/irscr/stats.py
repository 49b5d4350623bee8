"""Statistical primitives for the outage-constrained scheme.

The chi-square inverse CDF is built on a self-contained regularized lower
incomplete gamma function (series for x < a+1, Lentz continued fraction
otherwise) and a bracketed bisection refined by Newton steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError

_EPS = 1e-15
_ITMAX = 500
_TINY = 1e-300


def _gamma_series(a, x):
    ap = a
    summ = 1.0 / a
    delt = summ
    for _ in range(_ITMAX):
        ap += 1.0
        delt *= x / ap
        summ += delt
        if abs(delt) < abs(summ) * _EPS:
            break
    return summ * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cf(a, x):
    # modified Lentz evaluation of the continued fraction for Q(a, x)
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _ITMAX + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delt = d * c
        h *= delt
        if abs(delt - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def reg_lower_gamma(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x)."""
    if a <= 0.0:
        raise ValueError("a must be positive")
    if x < 0.0:
        raise ValueError("x must be nonnegative")
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cf(a, x)


def chi2_cdf(dof: int, x: float) -> float:
    """CDF of a chi-square variable with ``dof`` degrees of freedom."""
    if dof < 1:
        raise ValueError("dof must be >= 1")
    if x <= 0.0:
        return 0.0
    return reg_lower_gamma(0.5 * dof, 0.5 * x)


def _chi2_pdf(dof, x):
    if x <= 0.0:
        return 0.0
    a = 0.5 * dof
    return math.exp((a - 1.0) * math.log(x) - 0.5 * x - a * math.log(2.0) - math.lgamma(a))


def chi2_inv_cdf(dof: int, p: float) -> float:
    """Quantile of the chi-square distribution, P(X <= x) = p.

    Bracketed bisection localizes the root, Newton steps polish it to
    about 1e-12 relative accuracy.
    """
    if dof < 1:
        raise ValueError("dof must be >= 1")
    if p < 0.0 or p >= 1.0:
        raise ValueError("p must lie in [0, 1)")
    if p == 0.0:
        return 0.0

    lo, hi = 0.0, float(dof) + 10.0 * math.sqrt(2.0 * dof) + 10.0
    while chi2_cdf(dof, hi) < p:
        lo = hi
        hi *= 2.0
        if hi > 1e12:  # pragma: no cover
            break
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if chi2_cdf(dof, mid) < p:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(20):
        f = chi2_cdf(dof, x) - p
        fp = _chi2_pdf(dof, x)
        if fp <= 0.0:
            break
        step = f / fp
        x_new = x - step
        if x_new <= lo or x_new >= hi:
            x_new = 0.5 * (lo + hi)
        if chi2_cdf(dof, x_new) < p:
            lo = x_new
        else:
            hi = x_new
        if abs(x_new - x) <= 1e-13 * max(1.0, x):
            x = x_new
            break
        x = x_new
    return x


def max_eigenvalue(sigma: np.ndarray) -> float:
    """Largest eigenvalue of a Hermitian PSD matrix.

    The input is symmetrized before the eigen computation; inputs whose skew
    part exceeds the tolerance are rejected.
    """
    sigma = np.asarray(sigma)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise DimensionMismatchError("covariance must be square")
    skew = np.max(np.abs(sigma - sigma.conj().T), initial=0.0)
    if skew > 1e-12 * max(1.0, np.max(np.abs(sigma), initial=0.0)):
        raise ValueError("matrix is not Hermitian within tolerance")
    sym = 0.5 * (sigma + sigma.conj().T)
    return float(np.linalg.eigvalsh(sym)[-1])


@dataclass(frozen=True)
class OutageBoundParams:
    """Deterministic surrogate coefficients for one protected receiver."""

    theta: float      # (N+1) * lambda_max(Sigma)
    dof: int          # 2 * (N+1) * M_t
    quantile: float   # chi2_inv_cdf(dof, 1 - beta)

    @property
    def penalty(self):
        """Coefficient multiplying ||W||_F^2 in the surrogate."""
        return self.theta * self.quantile


def outage_params(sigma: np.ndarray, n_elements: int, m_antennas: int, beta: float) -> OutageBoundParams:
    """Surrogate parameters from the combined error covariance."""
    dim = (n_elements + 1) * m_antennas
    sigma = np.asarray(sigma)
    if sigma.shape != (dim, dim):
        raise DimensionMismatchError(
            f"covariance must be {(dim, dim)}, got {sigma.shape}")
    if not (0.0 <= beta <= 1.0):
        raise ValueError("beta must lie in [0, 1]")
    theta = (n_elements + 1) * max_eigenvalue(sigma)
    dof = 2 * dim
    quantile = 0.0 if beta >= 1.0 else chi2_inv_cdf(dof, 1.0 - beta)
    return OutageBoundParams(theta=theta, dof=dof, quantile=quantile)


def sta_it_lhs(params: OutageBoundParams, W: np.ndarray, phi_tilde: np.ndarray,
               G_hat: np.ndarray) -> float:
    """Left side of the deterministic interference surrogate."""
    W = np.asarray(W)
    phi_tilde = np.asarray(phi_tilde).ravel()
    G_hat = np.asarray(G_hat)
    if G_hat.shape[0] != phi_tilde.shape[0] or G_hat.shape[1] != W.shape[0]:
        raise DimensionMismatchError("surrogate operand shapes are inconsistent")
    w_norm2 = float(np.linalg.norm(W, "fro") ** 2)
    row = phi_tilde.conj() @ G_hat
    nominal = float(np.linalg.norm(row @ W) ** 2)
    return params.penalty * w_norm2 + nominal
