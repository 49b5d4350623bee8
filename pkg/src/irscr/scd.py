"""Worst-case design for norm-bounded channel errors.

The interference cap robust over both error balls is enforced through one
linear matrix inequality per protected receiver (Schur lift of the norm
bound plus sign-definiteness multipliers rho1, rho2).  Rate constraints are
linearized around the previous precoder; phases are driven to unit modulus
with a penalty convex-concave loop.  A block-coordinate loop alternates the
two subproblems.
"""

from __future__ import annotations

import numpy as np

from .ccp import (
    add_sca_sinr_phi as sca_sinr_phi,
    penalty_ccp_phase,
    phase_sinr_coeffs,
    sinr_margins,
)
from .channels import (
    Scenario,
    UncertaintyModel,
    normalize_units,
    su_effective_channel,
)
from .conic import (
    Affine,
    ConicProgram,
    block_hermitian,
    concat,
    scale_matrix,
    solve,
    check_solution,
    OPTIMAL,
    INFEASIBLE,
)
from .errors import CcpStalledError, NumericalFailureError, SubproblemInfeasibleError
from .solution import AlgorithmOptions, BeamformingSolution


def _solve_checked(prog, options, label):
    res = solve(prog, options.solver_tol)
    if res.status == INFEASIBLE:
        raise SubproblemInfeasibleError(label)
    if res.status != OPTIMAL:
        raise NumericalFailureError(f"{label}: solver status {res.raw_status}")
    report = check_solution(prog, res, options.check_tol)
    if not report.passes:
        worst = report.worst
        raise NumericalFailureError(
            f"{label}: verification failed, {worst.kind} block {worst.index} "
            f"violation {worst.scaled:.3e}")
    return res


def build_it_lmi(prog, W, phi, rho1, rho2, g_d_hat, G_r_hat, eps_d, eps_r,
                 gamma_it, alpha=None, label="it-lmi"):
    """Emit the robust interference-cap LMI for one protected receiver.

    Exactly one of W / phi may be a variable expression, the other fixed;
    ``alpha``, when given, scales the cap (feasibility-checking variant).
    The block is affine in W for fixed phi and affine in phi through the
    estimated received row for fixed W.

    The emitted matrix is the congruence-scaled form (first row and column
    divided by sqrt(cap)), which is positive semidefinite exactly when the
    textbook block is and keeps entries O(1) for any cap.  Returns the
    matrix expression.
    """
    n, mt = G_r_hat.shape
    k = (W.shape if isinstance(W, Affine) else np.asarray(W).shape)[1]
    g_vec = np.asarray(g_d_hat).ravel()
    root = np.sqrt(gamma_it)

    if isinstance(W, Affine):
        heff = g_vec + np.asarray(G_r_hat).conj().T @ np.asarray(phi).ravel()
        bhat = W.H @ (heff / root)     # (K,) expression
        w_mat = W
    else:
        W = np.asarray(W)
        if isinstance(phi, Affine):
            bhat = (prog.constant(W.conj().T @ g_vec)
                    + (W.conj().T @ np.asarray(G_r_hat).conj().T) @ phi) * (1.0 / root)
        else:
            heff = g_vec + np.asarray(G_r_hat).conj().T @ np.asarray(phi).ravel()
            bhat = prog.constant(W.conj().T @ heff / root)
        w_mat = prog.constant(W)

    alpha_expr = alpha if isinstance(alpha, Affine) else prog.constant(
        alpha if alpha is not None else 1.0)
    corner = alpha_expr - (rho1 * float(n) + rho2) * (1.0 / gamma_it)
    bcol = bhat.reshape((k, 1))
    zkm = np.zeros((1, mt))
    zmk = np.zeros((mt, 1))
    mat = block_hermitian(prog, [
        [corner, bcol.H, zkm, zkm],
        [bcol, np.eye(k), (w_mat * eps_r).H, (w_mat * eps_d).H],
        [zmk, w_mat * eps_r, scale_matrix(rho1, np.eye(mt)), np.zeros((mt, mt))],
        [zmk, w_mat * eps_d, np.zeros((mt, mt)), scale_matrix(rho2, np.eye(mt))],
    ])
    prog.add_psd(mat, label=label)
    return mat


def sca_sinr_w(prog, W, W_t, h_hat, gamma_k, sigma2_k, k, label="sinr-w"):
    """Linearized rate constraint for user k around the precoder W_t.

    The useful-power quadratic is lower-bounded by its tangent at W_t; the
    interference quadratic stays exact and is lifted to one SOC block.
    """
    K = W_t.shape[1]
    c = h_hat * (np.conj(h_hat) @ W_t[:, k])     # H_hat w_t(k), rank-one shortcut
    lin = 2.0 * (np.conj(c) @ W[:, k]).real()
    gamma_tilde = float(np.abs(np.conj(h_hat) @ W_t[:, k]) ** 2 + gamma_k * sigma2_k)
    if K == 1 or gamma_k == 0.0:
        prog.add_ineq(lin - gamma_tilde, label=label)
        return
    others = [j for j in range(K) if j != k]
    u = concat([np.conj(h_hat) @ W[:, j] for j in others])
    prog.add_abs_sq_le(u, (lin - gamma_tilde) * (1.0 / gamma_k), label=label)


def _add_power_epigraph(prog, W):
    t = prog.add_real("t_pow")
    prog.add_abs_sq_le(W.ravel(), t, label="power")
    return t


def add_scd_it_constraints(prog, W, phi, scenario, model, alpha=None, prefix=""):
    """One robust LMI and multiplier pair per protected receiver."""
    rho = prog.add_real(prefix + "rho", (2, scenario.n_prs))
    prog.add_ineq(rho.ravel(), label=prefix + "rho-nonneg")
    for l in range(scenario.n_prs):
        build_it_lmi(
            prog, W, phi, rho[0, l], rho[1, l],
            scenario.g_d_hat[l], scenario.G_r_hat[l],
            float(model.eps_d[l]), float(model.eps_r[l]),
            float(scenario.it_thresholds[l]), alpha=alpha,
            label=f"{prefix}it-lmi-{l}")
    return rho


def solve_tpc_scd(scenario: Scenario, model: UncertaintyModel, phi: np.ndarray,
                  W_t: np.ndarray, options: AlgorithmOptions | None = None):
    """Precoder update: minimize power under linearized rates and robust caps.

    Requires (W_t, phi) jointly feasible so the expansion point is valid.
    Returns (W, rho) with rho the per-receiver multiplier pairs.
    """
    options = options or AlgorithmOptions()
    scenario, model, _ = normalize_units(scenario, model)
    prog = ConicProgram()
    W = prog.add_complex("W", (scenario.m_antennas, scenario.n_users))
    t = _add_power_epigraph(prog, W)
    prog.minimize(t)
    for k in range(scenario.n_users):
        h_hat = su_effective_channel(scenario, k, phi)
        sca_sinr_w(prog, W, W_t, h_hat, float(scenario.sinr_targets[k]),
                   float(scenario.noise_powers[k]), k, label=f"sinr-w-{k}")
    rho = add_scd_it_constraints(prog, W, phi, scenario, model)
    res = _solve_checked(prog, options, "tpc-scd")
    return res.values["W"], res.values["rho"]


def verify_it_lmi(scenario, model, W, phi, options, alpha_value: float = 1.0) -> bool:
    """Exact robust-cap check at a fixed (W, phi) via the multiplier LMI.

    Feasible iff there exist rho >= 0 making the LMI positive semidefinite;
    solved as a minimal-shift eigenvalue problem per receiver.
    """
    scenario, model, _ = normalize_units(scenario, model)
    for l in range(scenario.n_prs):
        prog = ConicProgram()
        rho = prog.add_real("rho", (2,))
        prog.add_ineq(rho, label="rho-nonneg")
        s = prog.add_real("s")
        prog.minimize(s)
        mat = build_it_lmi(
            prog, np.asarray(W), np.asarray(phi), rho[0], rho[1],
            scenario.g_d_hat[l], scenario.G_r_hat[l],
            float(model.eps_d[l]), float(model.eps_r[l]),
            float(scenario.it_thresholds[l]), alpha=alpha_value)
        # shift the last PSD block: LMI + s I >= 0
        prog.constraints.pop()
        side = mat.shape[0]
        prog.add_psd(mat + scale_matrix(s, np.eye(side)), label="shifted")
        res = solve(prog, options.solver_tol)
        if res.status != OPTIMAL:
            return False
        scale = max(1.0, float(scenario.it_thresholds[l]))
        if res.objective > options.check_tol * scale:
            return False
    return True


def solve_phase_penalty_ccp(scenario: Scenario, model: UncertaintyModel, W: np.ndarray,
                            phi_t: np.ndarray, options: AlgorithmOptions | None = None):
    """Phase update for the worst-case scheme (margin maximization)."""
    options = options or AlgorithmOptions()
    scenario, model, _ = normalize_units(scenario, model)

    def it_builder(prog, phi_expr):
        add_scd_it_constraints(prog, np.asarray(W), phi_expr, scenario, model)

    def verify_it(phi):
        return verify_it_lmi(scenario, model, W, phi, options)

    return penalty_ccp_phase(scenario, W, phi_t, options,
                             it_builder=it_builder, verify_it=verify_it)


def run_bcd_scd(scenario: Scenario, model: UncertaintyModel, options: AlgorithmOptions,
                init) -> BeamformingSolution:
    """Alternate precoder and phase updates until the power stalls."""
    scenario, model, _ = normalize_units(scenario, model)
    W, phi = np.asarray(init[0], dtype=complex), np.asarray(init[1], dtype=complex)
    trace = []
    prev = float(np.linalg.norm(W, "fro") ** 2)
    iterations = 0
    for t in range(options.t_max):
        try:
            W, _ = solve_tpc_scd(scenario, model, phi, W, options)
        except SubproblemInfeasibleError:
            if t == 0:
                raise
            break  # keep the last feasible iterate
        obj = float(np.linalg.norm(W, "fro") ** 2)
        trace.append(obj)
        iterations = t + 1
        if abs(prev - obj) / max(obj, 1e-300) < options.zeta:
            break
        prev = obj
        if t + 1 < options.t_max:
            try:
                phi = solve_phase_penalty_ccp(scenario, model, W, phi, options)
            except CcpStalledError:
                pass  # stalled inner loop: keep the current phases
    return BeamformingSolution(W=W, phi=phi, objective_trace=trace,
                               iterations=iterations, scheme="SCD")


__all__ = [
    "build_it_lmi",
    "sca_sinr_w",
    "sca_sinr_phi",
    "solve_tpc_scd",
    "solve_phase_penalty_ccp",
    "run_bcd_scd",
    "add_scd_it_constraints",
    "verify_it_lmi",
    "phase_sinr_coeffs",
    "sinr_margins",
]
