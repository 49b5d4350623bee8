"""Monte Carlo validation oracles, vectorized over error draws.

These evaluate solutions against the exact interference and rate expressions;
they are independent of the convex machinery that produced the solutions.
"""

from __future__ import annotations

import numpy as np

from ..channels import Scenario, UncertaintyModel, nominal_sinr, phi_tilde


def _psd_sqrt(sigma):
    sigma = np.asarray(sigma)
    sym = 0.5 * (sigma + sigma.conj().T)
    lam, U = np.linalg.eigh(sym)
    lam = np.clip(lam, 0.0, None)
    return (U * np.sqrt(lam)) @ U.conj().T


def _std_complex(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def monte_carlo_outage(W, phi, G_hat, sigma, gamma_it, samples, rng) -> float:
    """Fraction of Gaussian error draws pushing interference above the cap.

    ``sigma`` is the combined covariance of [vec(dG_r); dg_d]; draws are
    z = sigma^(1/2) t with t standard complex Gaussian.
    """
    if samples < 1000:
        raise ValueError("use at least 1000 samples")
    W = np.asarray(W)
    G_hat = np.asarray(G_hat)
    phi = np.asarray(phi).ravel()
    n_plus_1, mt = G_hat.shape
    n = n_plus_1 - 1
    root = _psd_sqrt(sigma)
    t = _std_complex(rng, (root.shape[0], samples))
    z = root @ t
    zr = z[:n * mt, :].reshape(n, mt, samples, order="F")
    zd = z[n * mt:, :]

    base = phi_tilde(phi).conj() @ G_hat            # (Mt,)
    err = np.einsum("n,nms->ms", phi.conj(), zr) + zd.conj()
    rows = base[:, None] + err                      # (Mt, S)
    it = np.sum(np.abs(np.einsum("ms,mk->ks", rows, W)) ** 2, axis=0)
    return float(np.mean(it > gamma_it))


def _ball_rows(rng, complex_dim, radius, samples, boundary_mask):
    z = _std_complex(rng, (complex_dim, samples))
    nrm = np.linalg.norm(z, axis=0)
    nrm[nrm == 0] = 1.0
    direction = z / nrm
    u = rng.uniform(0.0, 1.0, size=samples) ** (1.0 / (2.0 * complex_dim))
    r = np.where(boundary_mask, 1.0, u) * radius
    return direction * r


def worst_case_sample_it(W, phi, g_d_hat, G_r_hat, eps_d, eps_r, gamma_it,
                         samples, rng):
    """Largest interference over sampled error pairs; half on the spheres.

    Sampling can only under-estimate the true worst case, so this is a
    necessary-condition spot check: pass iff max <= cap * (1 + 1e-6).
    """
    if samples < 1000:
        raise ValueError("use at least 1000 samples")
    W = np.asarray(W)
    G_r_hat = np.asarray(G_r_hat)
    g_d_hat = np.asarray(g_d_hat).ravel()
    phi = np.asarray(phi).ravel()
    n, mt = G_r_hat.shape
    boundary = np.arange(samples) % 2 == 0
    dgd = _ball_rows(rng, mt, eps_d, samples, boundary)          # (Mt, S)
    dgr = _ball_rows(rng, n * mt, eps_r, samples, boundary)      # (N*Mt, S)
    dgr = dgr.reshape(n, mt, samples, order="F")

    base = np.conj(g_d_hat) + np.conj(phi) @ G_r_hat             # (Mt,)
    err = dgd.conj() + np.einsum("n,nms->ms", phi.conj(), dgr)
    rows = base[:, None] + err
    it = np.sum(np.abs(np.einsum("ms,mk->ks", rows, W)) ** 2, axis=0)
    worst = float(np.max(it)) if samples else 0.0
    return worst, worst <= gamma_it * (1.0 + 1e-6)


def certify_solution(scenario: Scenario, model: UncertaintyModel, W, phi,
                     mc_samples, rng) -> dict:
    """Hard per-solution certificates for either error model.

    Returns rate margins, the model-specific interference statistic per
    protected receiver, and overall pass flags.
    """
    W = np.asarray(W)
    margins = nominal_sinr(scenario, W, phi) / scenario.sinr_targets - 1.0
    out = {
        "sinr_margins": margins,
        "sinr_pass": bool(np.all(margins >= -1e-6)),
        "mc_outage": None,
        "wc_margin": None,
    }
    if model.mode == "bounded":
        worst_margin = np.inf
        ok_all = True
        for l in range(scenario.n_prs):
            cap = float(scenario.it_thresholds[l])
            worst, ok = worst_case_sample_it(
                W, phi, scenario.g_d_hat[l], scenario.G_r_hat[l],
                float(model.eps_d[l]), float(model.eps_r[l]), cap, mc_samples, rng)
            worst_margin = min(worst_margin, (cap - worst) / cap)
            ok_all = ok_all and ok
        out["wc_margin"] = float(worst_margin)
        out["it_pass"] = ok_all
    else:
        from ..sta import combined_channel

        worst_outage = 0.0
        ok_all = True
        for l in range(scenario.n_prs):
            cov = model.covariances[l]
            est = monte_carlo_outage(W, phi, combined_channel(scenario, l),
                                     cov.combined(), float(scenario.it_thresholds[l]),
                                     mc_samples, rng)
            beta = float(model.beta[l])
            stderr = np.sqrt(max(beta * (1.0 - beta), 1e-12) / mc_samples)
            ok_all = ok_all and (est <= beta + 2.0 * stderr)
            worst_outage = max(worst_outage, est)
        out["mc_outage"] = float(worst_outage)
        out["it_pass"] = ok_all
    out["pass"] = out["sinr_pass"] and out["it_pass"]
    return out
