"""Outage-constrained design for Gaussian channel errors.

The probabilistic interference cap is replaced by its deterministic chi-square
surrogate.  The precoder step is a semidefinite relaxation over S_k = w_k w_k^H
whose optimum is rank one (checked at runtime, never randomized); the phase
step reuses the penalty machinery with one convex quadratic cap per protected
receiver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ccp import penalty_ccp_phase
from .channels import (
    Scenario,
    UncertaintyModel,
    combine,
    normalize_units,
    phi_tilde,
    su_effective_channel,
)
from .conic import ConicProgram, solve, check_solution, OPTIMAL, INFEASIBLE
from .errors import (
    CcpStalledError,
    NumericalFailureError,
    RankOneViolationError,
    SubproblemInfeasibleError,
)
from .solution import AlgorithmOptions, BeamformingSolution
from .stats import OutageBoundParams, outage_params, sta_it_lhs


def combined_channel(scenario: Scenario, l: int) -> np.ndarray:
    """Estimated combined channel of protected receiver l, (N+1) x Mt."""
    return combine(scenario.G_r_hat[l], scenario.g_d_hat[l])


def pr_outage_params(scenario: Scenario, model: UncertaintyModel, l: int) -> OutageBoundParams:
    """Surrogate coefficients from the receiver's block-diagonal covariance."""
    cov = model.covariances[l]
    return outage_params(cov.combined(), scenario.n_elements, scenario.m_antennas,
                         float(model.beta[l]))


@dataclass
class PhaseQuadratic:
    """Partition of the interference quadratic into phase coordinates."""

    B: np.ndarray        # (N, N) Hermitian
    b: np.ndarray        # (N,)
    b_last: float        # trailing diagonal element
    factor: np.ndarray   # (N, K) with B = factor @ factor^H


def build_phase_quadratic(G_hat: np.ndarray, W: np.ndarray) -> PhaseQuadratic:
    """Split X = (G_hat W)(G_hat W)^H so the extended-phase quadratic becomes
    phi^H B phi + 2 Re(b^H phi) + b_last."""
    rows = np.asarray(G_hat) @ np.asarray(W)          # (N+1, K)
    X = rows @ rows.conj().T
    n = X.shape[0] - 1
    return PhaseQuadratic(
        B=X[:n, :n],
        b=X[:n, n],
        b_last=float(X[n, n].real),
        factor=rows[:n, :],
    )


def extract_rank_one(S: np.ndarray, rank_tol: float | None = None,
                     zero_floor: float = 0.0) -> np.ndarray:
    """Principal component sqrt(lam1) u1 of a PSD matrix.

    The global phase is fixed by making the largest-magnitude entry real
    nonnegative.  With ``rank_tol`` set, raises when lam2/lam1 exceeds it;
    matrices whose top eigenvalue is below ``zero_floor`` are treated as the
    zero beam (solver noise, no ratio defined).
    """
    S = np.asarray(S)
    S = 0.5 * (S + S.conj().T)
    lam, U = np.linalg.eigh(S)
    lam1 = float(lam[-1])
    if lam1 <= max(zero_floor, 0.0):
        return np.zeros(S.shape[0], dtype=complex)
    if rank_tol is not None and S.shape[0] > 1:
        ratio = float(max(lam[-2], 0.0) / lam1)
        if ratio > rank_tol:
            raise RankOneViolationError(ratio, rank_tol)
    w = np.sqrt(lam1) * U[:, -1]
    pivot = int(np.argmax(np.abs(w)))
    if np.abs(w[pivot]) > 0:
        w = w * (np.conj(w[pivot]) / np.abs(w[pivot]))
    return w


def rank_ratio(S: np.ndarray, zero_floor: float = 0.0) -> float:
    S = np.asarray(S)
    if S.shape[0] < 2:
        return 0.0
    lam = np.linalg.eigvalsh(0.5 * (S + S.conj().T))
    if lam[-1] <= max(zero_floor, 0.0):
        return 0.0
    return float(max(lam[-2], 0.0) / lam[-1])


# eigenvalue ratios of every SDR solve in this process, for suite-level
# statistics; cleared by callers that want a fresh window
SDR_SOLVE_LOG = []


def _sdr_base(scenario, phi, caps, it_matrices):
    """Program skeleton: PSD blocks, exact SINR rows, scaled trace sums."""
    K, mt = scenario.n_users, scenario.m_antennas
    prog = ConicProgram()
    S = [prog.add_hermitian(f"S{k}", mt) for k in range(K)]
    for k in range(K):
        prog.add_psd(S[k], label=f"psd-S{k}")
    h_hats = [su_effective_channel(scenario, k, phi) for k in range(K)]
    for k in range(K):
        Hk = h_hats[k][:, None] @ h_hats[k][None, :].conj()
        gamma_k = float(scenario.sinr_targets[k])
        sig = (S[k] @ Hk).trace().real()
        interf = sum(((S[j] @ Hk).trace().real() for j in range(K) if j != k),
                     prog.constant(0.0))
        prog.add_ineq(sig - gamma_k * interf - gamma_k * float(scenario.noise_powers[k]),
                      label=f"sinr-{k}")
    # interference rows are rescaled to O(1) data (by cap or matrix norm,
    # whichever dominates), which keeps extraction ratios near solver accuracy
    row_scale = [max(caps[l], float(np.linalg.norm(D, 2)))
                 for l, D in enumerate(it_matrices)]
    sums = []
    for l, D in enumerate(it_matrices):
        s = row_scale[l]
        tot = sum(((S[k] @ (np.asarray(D) / s)).trace().real() for k in range(K)),
                  prog.constant(0.0))
        sums.append(tot)
    return prog, S, h_hats, sums, row_scale


def _sdr_run(prog, options, tol):
    res = solve(prog, tol)
    if res.status == INFEASIBLE:
        raise SubproblemInfeasibleError("SDR subproblem infeasible")
    if res.status != OPTIMAL:
        raise NumericalFailureError(f"SDR status {res.raw_status}")
    if not check_solution(prog, res, options.check_tol).passes:
        raise NumericalFailureError("SDR verification failed")
    return res


def _solve_sdr(scenario: Scenario, phi: np.ndarray, options: AlgorithmOptions,
               it_matrices, caps, objective: str, _tol=None):
    """Shared SDR core: SINR rows over S_k plus interference trace terms.

    objective "power": minimize sum tr(S_k) with hard caps tr-sum <= cap_l.
    objective "epigraph": minimize max_l (tr-sum_l - cap_l) with no hard caps,
    then re-minimize power at the achieved level so the extracted point keeps
    the rank-one structure even for singular interference matrices.
    Returns (W, max rank ratio, objective value).
    """
    K = scenario.n_users
    tol = _tol if _tol is not None else options.solver_tol
    # beams more than 60 dB below the noise floor count as zero
    floor = 1e-6 * float(np.mean(scenario.noise_powers))
    if objective == "power":
        prog, S, h_hats, sums, row_scale = _sdr_base(scenario, phi, caps, it_matrices)
        for l, tot in enumerate(sums):
            prog.add_ineq(caps[l] / row_scale[l] - tot, label=f"it-{l}")
        prog.minimize(sum((S[k].trace().real() for k in range(K)), prog.constant(0.0)))
        res = _sdr_run(prog, options, tol)
        objective_value = float(res.objective)
    else:
        # phase 1: best achievable epigraph of the scaled shortfalls
        prog, S, h_hats, sums, row_scale = _sdr_base(scenario, phi, caps, it_matrices)
        s = max(row_scale)
        epi = prog.add_real("epi")
        for l, tot in enumerate(sums):
            prog.add_ineq(epi - tot * (row_scale[l] / s) + caps[l] / s,
                          label=f"it-epi-{l}")
        prog.minimize(epi)
        res1 = _sdr_run(prog, options, tol)
        epi_star = float(res1.objective)
        objective_value = epi_star
        # phase 2: minimum power near that level; the pure-power objective
        # restores the rank-one optimality structure.  The slack ladder keeps
        # the feasible slab from becoming degenerately thin.
        res = None
        last_exc = None
        for slack in (1e-7, 1e-5, 1e-3):
            prog, S, h_hats, sums, row_scale = _sdr_base(scenario, phi, caps, it_matrices)
            bound = epi_star + slack * max(1.0, abs(epi_star))
            for l, tot in enumerate(sums):
                prog.add_ineq(prog.constant(bound + caps[l] / s) - tot * (row_scale[l] / s),
                              label=f"it-epi-{l}")
            prog.minimize(sum((S[k].trace().real() for k in range(K)), prog.constant(0.0)))
            try:
                cand = _sdr_run(prog, options, tol)
            except NumericalFailureError as exc:
                last_exc = exc
                continue
            res = cand
            ratios = [rank_ratio(res.values[f"S{k}"], floor) for k in range(K)]
            if max(ratios) <= options.rank_tol:
                break
        if res is None:
            raise last_exc

    S_vals = [res.values[f"S{k}"] for k in range(K)]
    worst_ratio = max(rank_ratio(Sv, floor) for Sv in S_vals)
    if worst_ratio > options.rank_tol and _tol is None:
        # flat optimal face at the default gap: one deterministic retry tighter
        return _solve_sdr(scenario, phi, options, it_matrices, caps, objective,
                          _tol=max(tol * 1e-3, 1e-12))
    SDR_SOLVE_LOG.append(worst_ratio)
    W = np.stack([extract_rank_one(Sv, options.rank_tol, floor) for Sv in S_vals], axis=1)
    W = _restore_rate_margins(scenario, W, h_hats)
    return W, worst_ratio, objective_value


def _restore_rate_margins(scenario, W, h_hats):
    """Scale up microscopically if rank-one extraction nicked a rate margin."""
    K = scenario.n_users
    need = 1.0
    for k in range(K):
        gamma_k = float(scenario.sinr_targets[k])
        if gamma_k == 0.0:
            continue
        sig = float(np.abs(np.conj(h_hats[k]) @ W[:, k]) ** 2)
        interf = sum(float(np.abs(np.conj(h_hats[k]) @ W[:, j]) ** 2)
                     for j in range(K) if j != k)
        headroom = sig - gamma_k * interf
        if headroom <= 0.0:
            raise NumericalFailureError("rank-one extraction destroyed a rate constraint")
        need = max(need, gamma_k * float(scenario.noise_powers[k]) / headroom)
    return W if need <= 1.0 else W * np.sqrt(need * (1.0 + 1e-12))


def solve_tpc_sta_sdp(scenario: Scenario, model: UncertaintyModel, phi: np.ndarray,
                      options: AlgorithmOptions | None = None):
    """Precoder update under the chi-square interference surrogate.

    Returns (W, worst eigenvalue ratio across the S_k).
    """
    options = options or AlgorithmOptions()
    scenario, model, _ = normalize_units(scenario, model)
    pt = phi_tilde(phi)
    it_matrices = []
    caps = []
    for l in range(scenario.n_prs):
        params = pr_outage_params(scenario, model, l)
        G = combined_channel(scenario, l)
        row = G.conj().T @ pt          # (Mt,)
        D = params.penalty * np.eye(scenario.m_antennas) + row[:, None] @ row[None, :].conj()
        it_matrices.append(D)
        caps.append(float(scenario.it_thresholds[l]))
    W, ratio, _ = _solve_sdr(scenario, phi, options, it_matrices, caps, "power")
    return W, ratio


def solve_phase_sta(scenario: Scenario, model: UncertaintyModel, W: np.ndarray,
                    phi_t: np.ndarray, options: AlgorithmOptions | None = None):
    """Phase update: margin maximization under per-receiver quadratic caps."""
    options = options or AlgorithmOptions()
    scenario, model, _ = normalize_units(scenario, model)
    W = np.asarray(W)
    w_norm2 = float(np.linalg.norm(W, "fro") ** 2)
    quads = []
    params_list = []
    for l in range(scenario.n_prs):
        params = pr_outage_params(scenario, model, l)
        params_list.append(params)
        pq = build_phase_quadratic(combined_channel(scenario, l), W)
        rhs = float(scenario.it_thresholds[l]) - params.penalty * w_norm2 - pq.b_last
        quads.append((pq, rhs))

    def it_builder(prog, phi_expr):
        for l, (pq, rhs) in enumerate(quads):
            ell = prog.constant(rhs) - 2.0 * (np.conj(pq.b) @ phi_expr).real()
            if pq.factor.shape[1] == 0:
                prog.add_ineq(ell, label=f"it-quad-{l}")
            else:
                prog.add_abs_sq_le(pq.factor.conj().T @ phi_expr, ell, label=f"it-quad-{l}")

    def verify_it(phi):
        pt = phi_tilde(phi)
        for l, params in enumerate(params_list):
            lhs = sta_it_lhs(params, W, pt, combined_channel(scenario, l))
            if lhs > float(scenario.it_thresholds[l]) * (1.0 + options.check_tol):
                return False
        return True

    return penalty_ccp_phase(scenario, W, phi_t, options,
                             it_builder=it_builder, verify_it=verify_it)


def run_bcd_sta(scenario: Scenario, model: UncertaintyModel, options: AlgorithmOptions,
                init) -> BeamformingSolution:
    """Alternate SDR precoder and phase updates until the power stalls."""
    scenario, model, _ = normalize_units(scenario, model)
    W, phi = np.asarray(init[0], dtype=complex), np.asarray(init[1], dtype=complex)
    trace = []
    prev = float(np.linalg.norm(W, "fro") ** 2)
    iterations = 0
    worst_ratio = 0.0
    for t in range(options.t_max):
        try:
            W, ratio = solve_tpc_sta_sdp(scenario, model, phi, options)
        except SubproblemInfeasibleError:
            if t == 0:
                raise
            break
        worst_ratio = max(worst_ratio, ratio)
        obj = float(np.linalg.norm(W, "fro") ** 2)
        trace.append(obj)
        iterations = t + 1
        if abs(prev - obj) / max(obj, 1e-300) < options.zeta:
            break
        prev = obj
        if t + 1 < options.t_max:
            try:
                phi = solve_phase_sta(scenario, model, W, phi, options)
            except CcpStalledError:
                pass
    return BeamformingSolution(W=W, phi=phi, objective_trace=trace,
                               iterations=iterations, scheme="STA",
                               rank_ratio=worst_ratio)


__all__ = [
    "PhaseQuadratic",
    "build_phase_quadratic",
    "combined_channel",
    "extract_rank_one",
    "pr_outage_params",
    "rank_ratio",
    "run_bcd_sta",
    "solve_phase_sta",
    "solve_tpc_sta_sdp",
]
