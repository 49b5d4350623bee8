"""Penalty convex-concave engine for the unit-modulus phase subproblems.

Both schemes share the same machinery: rate constraints linearized around
the previous phase vector (with optional tightening slacks), the unit-modulus
set relaxed to a linearized lower bound plus a convex upper bound with
penalized violations tau, and a growing penalty weight.  Interference
constraints are injected by the calling scheme.
"""

from __future__ import annotations

import numpy as np

from .channels import Scenario, cascade, nominal_sinr
from .conic import ConicProgram, solve, check_solution, OPTIMAL, INFEASIBLE
from .errors import CcpStalledError, NumericalFailureError, SubproblemInfeasibleError
from .solution import AlgorithmOptions


def phase_sinr_coeffs(scenario: Scenario, W: np.ndarray, k: int):
    """Quadratic-form data of user k's rate constraint in the phase vector.

    Returns (Omega_k, Omega_mk, omega_scal, omega_vec, V_mk) where
    Omega_mk = V_mk V_mk^H factors the interference quadratic.
    """
    H_rk = cascade(scenario.h_r[k], scenario.F)
    h_d = scenario.h_d[k]
    K = scenario.n_users
    w_k = W[:, k]
    others = [j for j in range(K) if j != k]
    W_mk = W[:, others] if others else np.zeros((scenario.m_antennas, 0), dtype=complex)
    gamma_k = float(scenario.sinr_targets[k])

    a_k = H_rk @ w_k
    omega_k = a_k[:, None] @ a_k[None, :].conj()
    V_mk = H_rk @ W_mk
    omega_mk = V_mk @ V_mk.conj().T
    hd_wk = np.conj(h_d) @ w_k
    hd_wmk = np.conj(h_d) @ W_mk
    omega_scal = float(np.abs(hd_wk) ** 2 - gamma_k * np.sum(np.abs(hd_wmk) ** 2))
    omega_vec = a_k * np.conj(hd_wk) - gamma_k * (V_mk @ hd_wmk.conj())
    return omega_k, omega_mk, omega_scal, omega_vec, V_mk


def phase_sinr_value(scenario: Scenario, W: np.ndarray, phi: np.ndarray, k: int) -> float:
    """Signed slack of user k's exact rate constraint in quadratic-form."""
    omega_k, omega_mk, omega_scal, omega_vec, _ = phase_sinr_coeffs(scenario, W, k)
    gamma_k = float(scenario.sinr_targets[k])
    phi = np.asarray(phi).ravel()
    quad = np.real(np.conj(phi) @ omega_k @ phi) - gamma_k * np.real(np.conj(phi) @ omega_mk @ phi)
    return quad + 2.0 * np.real(np.conj(omega_vec) @ phi) + omega_scal - gamma_k * float(
        scenario.noise_powers[k])


def _phase_sinr_scale(scenario, W, k):
    omega_k, _, omega_scal, omega_vec, V_mk = phase_sinr_coeffs(scenario, W, k)
    gamma_k = float(scenario.sinr_targets[k])
    lin_bound = float(np.max(np.abs(omega_vec), initial=0.0)) + float(
        np.max(np.abs(omega_k), initial=0.0)) * scenario.n_elements
    return max(abs(omega_scal), 2.0 * lin_bound,
               gamma_k * float(np.max(np.abs(V_mk), initial=0.0)) ** 2, 1e-12)


def phase_sinr_common_scale(scenario, W):
    """One positive scale for all users' phase-domain rate constraints.

    Dividing every constraint by the same factor keeps the margin objective's
    equal weighting while making the cone data O(1).
    """
    return max(_phase_sinr_scale(scenario, W, k) for k in range(scenario.n_users))


def add_sca_sinr_phi(prog, phi_expr, phi_t, W, scenario, k, slack=None, scale=None,
                     label="sinr-phi"):
    """Linearized rate constraint in the phase vector around phi_t.

    The block is divided by ``scale`` (slacks then live in scaled units),
    which keeps the penalty subproblems well conditioned.
    """
    omega_k, _, omega_scal, omega_vec, V_mk = phase_sinr_coeffs(scenario, W, k)
    gamma_k = float(scenario.sinr_targets[k])
    phi_t = np.asarray(phi_t).ravel()
    gamma_bar = omega_scal - float(np.real(np.conj(phi_t) @ omega_k @ phi_t)) - gamma_k * float(
        scenario.noise_powers[k])
    lin_row = omega_vec.conj() + np.conj(phi_t) @ omega_k
    if scale is None:
        scale = phase_sinr_common_scale(scenario, W)
    ell = prog.constant(gamma_bar / scale) + 2.0 * ((lin_row / scale) @ phi_expr).real()
    if slack is not None:
        ell = ell - slack
    if V_mk.shape[1] == 0 or gamma_k == 0.0:
        prog.add_ineq(ell, label=label)
        return
    u = np.sqrt(gamma_k / scale) * (V_mk.conj().T @ phi_expr)
    prog.add_abs_sq_le(u, ell, label=label)


def sinr_margins(scenario: Scenario, W: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Relative rate-constraint margins SINR_k / gamma_k - 1 (inf if gamma 0)."""
    sinr = nominal_sinr(scenario, W, phi)
    gam = scenario.sinr_targets
    with np.errstate(divide="ignore"):
        return np.where(gam > 0, sinr / np.where(gam > 0, gam, 1.0) - 1.0, np.inf)


def _l1(z):
    return float(np.sum(np.abs(z)))


def _project_unit(phi):
    mag = np.abs(phi)
    return np.where(mag > 1e-12, phi / np.where(mag > 1e-12, mag, 1.0), 1.0 + 0.0j)


def penalty_ccp_phase(scenario: Scenario, W: np.ndarray, phi0: np.ndarray,
                      options: AlgorithmOptions, *, it_builder, verify_it,
                      quad_objectives=None) -> np.ndarray:
    """Iterate the penalized phase subproblem until slacks vanish.

    ``it_builder(prog, phi_expr)`` injects the scheme's interference
    constraints for fixed W.  With ``quad_objectives`` (list of (V, b, const)
    triples, pre-scaled to O(1)) the engine minimizes the epigraph of their
    maximum instead of maximizing rate margins; this is the
    feasibility-checker variant.  ``verify_it(phi)`` must hold on the
    returned unit-modulus vector.
    """
    N = scenario.n_elements
    K = scenario.n_users
    margin_mode = quad_objectives is None
    kappa = options.kappa0
    phi_n = np.asarray(phi0, dtype=complex).ravel()
    history = []
    tau_val = None
    stagnant= 0
    prev_obj = None
    sinr_scale = phase_sinr_common_scale(scenario, W)

    for _ in range(options.ccp_max_iter):
        prog = ConicProgram()
        phi = prog.add_complex("phi", (N,))
        tau = prog.add_real("tau", (2 * N,))
        prog.add_ineq(tau, label="tau-nonneg")
        prog.add_ineq(options.tau_cap - tau, label="tau-cap")
        if margin_mode:
            slack = prog.add_real("slack", (K,))
            prog.add_ineq(slack, label="slack-nonneg")
        else:
            slack = None
        for k in range(K):
            add_sca_sinr_phi(prog, phi, phi_n, W, scenario, k,
                             slack=slack[k] if margin_mode else None,
                             scale=sinr_scale, label=f"sinr-phi-{k}")
        it_builder(prog, phi)
        # unit-modulus relaxation: linearized lower bound and convex upper bound
        for i in range(N):
            lower = tau[i] - 1.0 - float(np.abs(phi_n[i]) ** 2) \
                + 2.0 * (np.conj(phi_n[i]) * phi[i]).real()
            prog.add_ineq(lower, label=f"mod-lo-{i}")
            prog.add_abs_sq_le(phi[i], 1.0 + tau[N + i], label=f"mod-hi-{i}")
        if margin_mode:
            prog.minimize(-slack.sum() + kappa * tau.sum())
        else:
            epi = prog.add_real("epi")
            for V, b, const in quad_objectives:
                ell = epi - const - 2.0 * (np.conj(b) @ phi).real()
                if V.shape[1] == 0:
                    prog.add_ineq(ell, label="quad-epi")
                else:
                    prog.add_abs_sq_le(V.conj().T @ phi, ell, label="quad-epi")
            prog.minimize(epi + kappa * tau.sum())

        res = solve(prog, options.solver_tol)
        if res.status == INFEASIBLE:
            raise SubproblemInfeasibleError("phase subproblem infeasible")
        if res.status != OPTIMAL:
            raise NumericalFailureError(f"phase subproblem status {res.raw_status}")
        report = check_solution(prog, res, options.check_tol)
        if not report.passes:
            worst = report.worst
            raise NumericalFailureError(
                f"phase subproblem verification: {worst.kind} block {worst.label!r} "
                f"scaled violation {worst.scaled:.3e}")

        phi_new = np.asarray(res.values["phi"]).ravel()
        tau_val = np.asarray(res.values["tau"]).ravel()
        step = _l1(phi_new - phi_n)
        history.append(phi_new)
        phi_n = phi_new
        kappa = min(kappa * options.l_kappa, options.kappa_cap)
        if _l1(tau_val) <= options.l1:
            if step <= options.l2:
                break
            # slacks are settled but the step still exceeds the threshold;
            # accept once the subproblem objective has stopped improving
            # (bouncing between equally good iterates at solver noise)
            if prev_obj is not None and abs(prev_obj - res.objective) <= 1e-9 * max(
                    1.0, abs(res.objective)):
                stagnant += 1
                if stagnant >= 2:
                    break
            else:
                stagnant = 0
        else:
            stagnant = 0
        prev_obj = res.objective
    else:
        if tau_val is None or _l1(tau_val) > options.l1:
            raise CcpStalledError("penalty iteration cap reached with slack above threshold")

    # project to exact unit modulus and re-verify; fall back to the best
    # verified earlier iterate (projected) if the final one fails
    margin_tol = -1e-6
    best = None
    for cand in reversed(history):
        p = _project_unit(cand)
        m = float(np.min(sinr_margins(scenario, W, p)))
        if m >= margin_tol and verify_it(p):
            if best is None or m > best[1]:
                best = (p, m)
            if cand is history[-1]:
                return p
    if best is not None:
        return best[0]
    raise CcpStalledError("no iterate verified feasible after projection")


def random_unit_modulus(n: int, rng) -> np.ndarray:
    return np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=n))
