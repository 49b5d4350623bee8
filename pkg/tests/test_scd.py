import numpy as np
import pytest

from irscr.ccp import (
    add_sca_sinr_phi,
    phase_sinr_coeffs,
    phase_sinr_value,
    sinr_margins,
)
from irscr.channels import (
    it_power,
    nominal_sinr,
    normalize_units,
    sample_error,
    su_effective_channel,
)
from irscr.conic import ConicProgram
from irscr.errors import SubproblemInfeasibleError
from irscr.scd import (
    build_it_lmi,
    run_bcd_scd,
    sca_sinr_w,
    solve_phase_penalty_ccp,
    solve_tpc_scd,
    verify_it_lmi,
)
from conftest import make_instance


def _eval_abs_sq_margin(expr_value):
    """Recover ell - ||u||^2 from a stored [ell+1, 2u, ell-1] cone vector."""
    v = np.atleast_1d(expr_value)
    ell = 0.5 * np.real(v[0] + v[-1])
    u = v[1:-1] / 2.0
    return ell - float(np.linalg.norm(u) ** 2)


def _lmi_value(scenario, model, W, phi, rho1, rho2, l=0, alpha=None):
    prog = ConicProgram()
    mat = build_it_lmi(prog, np.asarray(W), np.asarray(phi),
                       prog.constant(rho1), prog.constant(rho2),
                       scenario.g_d_hat[l], scenario.G_r_hat[l],
                       float(model.eps_d[l]), float(model.eps_r[l]),
                       float(scenario.it_thresholds[l]), alpha=alpha)
    return mat.value({})


def test_lmi_nominal_schur_equivalence():
    # zero radii and multipliers: the block is PSD iff the received power
    # at the estimated channel stays below the cap
    scenario, bounded, _ = make_instance(seed=101, delta_g=0.0)
    rng = np.random.default_rng(0)
    W = 1e-6 * (rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2)))
    phi = np.exp(1j * rng.uniform(0, 2 * np.pi, 6))
    scenario, bounded, _c = normalize_units(scenario, bounded)
    nominal = it_power(scenario.g_d_hat[0], scenario.G_r_hat[0], phi, W)

    for cap_scale, expect_psd in ((2.0, True), (0.5, False)):
        sc2 = scenario
        sc2.it_thresholds[0] = cap_scale * nominal
        mat = _lmi_value(sc2, bounded, W, phi, 0.0, 0.0)
        lam = np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))[0]
        assert (lam >= -1e-12) == expect_psd


def test_lmi_zero_precoder_reduces_to_multiplier_budget():
    scenario, bounded, _ = make_instance(seed=102)
    scenario, bounded, _c = normalize_units(scenario, bounded)
    W = np.zeros((4, 2), dtype=complex)
    phi = np.ones(6)
    cap = float(scenario.it_thresholds[0])
    n = scenario.n_elements
    ok = _lmi_value(scenario, bounded, W, phi, cap / (4 * n), cap / 4)
    assert np.linalg.eigvalsh(0.5 * (ok + ok.conj().T))[0] >= -1e-12
    bad = _lmi_value(scenario, bounded, W, phi, cap / n, cap)  # rho1*N+rho2 = 2cap
    assert np.linalg.eigvalsh(0.5 * (bad + bad.conj().T))[0] < 0
    at_zero = _lmi_value(scenario, bounded, W, phi, 0.0, 0.0)
    assert np.linalg.eigvalsh(0.5 * (at_zero + at_zero.conj().T))[0] >= -1e-12


def test_lmi_implies_sampled_robustness(solved_instance):
    # any point certified by the multiplier LMI survives sampled errors
    scenario = solved_instance["scenario"]
    bounded = solved_instance["bounded"]
    sol = solved_instance["sol_scd"]
    rng = np.random.default_rng(55)
    cap = float(scenario.it_thresholds[0])
    for i in range(1000):
        dgd, dgr = sample_error(bounded, 0, rng, boundary=(i % 2 == 0))
        itv = it_power(scenario.g_d_hat[0] + dgd, scenario.G_r_hat[0] + dgr,
                       sol.phi, sol.W)
        assert itv <= cap * (1 + 1e-6)


def test_sca_w_tight_at_expansion_point():
    scenario, bounded, _ = make_instance(seed=103)
    scenario, bounded, _c = normalize_units(scenario, bounded)
    rng = np.random.default_rng(1)
    W_t = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    phi = np.exp(1j * rng.uniform(0, 2 * np.pi, 6))
    for k in range(2):
        h = su_effective_channel(scenario, k, phi)
        gamma_k = float(scenario.sinr_targets[k])
        sigma2 = float(scenario.noise_powers[k])
        prog = ConicProgram()
        W = prog.add_complex("W", (4, 2))
        sca_sinr_w(prog, W, W_t, h, gamma_k, sigma2, k)
        block = prog.constraints[-1]
        coords = {"W": np.concatenate([W_t.ravel(order="F").real,
                                       W_t.ravel(order="F").imag])}
        margin = _eval_abs_sq_margin(block.expr.value(coords)) * gamma_k
        sig = abs(np.conj(h) @ W_t[:, k]) ** 2
        interf = sum(abs(np.conj(h) @ W_t[:, j]) ** 2 for j in range(2) if j != k)
        true_val = sig - gamma_k * (interf + sigma2)
        scale = max(abs(true_val), sig, 1e-30)
        assert abs(margin - true_val) <= 1e-10 * scale


def test_sca_w_lower_bounds_true_constraint():
    # a precoder accepted by the linearized constraint satisfies the true one
    scenario, bounded, _ = make_instance(seed=104)
    scenario, bounded, _c = normalize_units(scenario, bounded)
    rng = np.random.default_rng(2)
    phi = np.exp(1j * rng.uniform(0, 2 * np.pi, 6))
    W_t = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    hits = 0
    for _ in range(1000):
        W = W_t + 0.5 * (rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2)))
        for k in range(2):
            h = su_effective_channel(scenario, k, phi)
            gamma_k = float(scenario.sinr_targets[k])
            sigma2 = float(scenario.noise_powers[k])
            c = h * (np.conj(h) @ W_t[:, k])
            lin = 2 * np.real(np.conj(c) @ W[:, k])
            gamma_tilde = abs(np.conj(h) @ W_t[:, k]) ** 2 + gamma_k * sigma2
            interf = sum(abs(np.conj(h) @ W[:, j]) ** 2 for j in range(2) if j != k)
            sca_ok = lin - gamma_k * interf >= gamma_tilde
            if sca_ok:
                hits += 1
                sig = abs(np.conj(h) @ W[:, k]) ** 2
                assert sig - gamma_k * (interf + sigma2) >= -1e-9 * max(sig, 1.0)
    assert hits > 0


def test_tpc_single_user_mrt_oracle():
    from irscr.feasibility import bootstrap_precoder
    from irscr.solution import AlgorithmOptions

    scenario, bounded, _ = make_instance(seed=105, k_users=1, delta_g=0.0,
                                         gamma_dbm=0.0)  # cap effectively inert
    rng = np.random.default_rng(3)
    phi = np.exp(1j * rng.uniform(0, 2 * np.pi, 6))
    h = su_effective_channel(scenario, 0, phi)
    W = bootstrap_precoder(scenario, phi, AlgorithmOptions())
    for _ in range(8):
        W, _rho = solve_tpc_scd(scenario, bounded, phi, W)
    expected = float(scenario.sinr_targets[0] * scenario.noise_powers[0]
                     / np.linalg.norm(h) ** 2)
    got = float(np.linalg.norm(W, "fro") ** 2)
    assert abs(got - expected) <= 1e-6 * expected
    # beam direction aligns with the effective channel
    w = W[:, 0]
    corr = abs(np.conj(h) @ w) / (np.linalg.norm(h) * np.linalg.norm(w))
    assert corr >= 1.0 - 1e-8


def test_tpc_robust_cost_nested_sets(solved_instance, options):
    scenario = solved_instance["scenario"]
    bounded = solved_instance["bounded"]
    sol = solved_instance["sol_scd"]
    import dataclasses

    zero = dataclasses.replace(bounded, eps_d=bounded.eps_d * 0.0,
                               eps_r=bounded.eps_r * 0.0)
    W_rob, _ = solve_tpc_scd(scenario, bounded, sol.phi, sol.W, options)
    W_nom, _ = solve_tpc_scd(scenario, zero, sol.phi, sol.W, options)
    assert np.linalg.norm(W_nom, "fro") ** 2 <= np.linalg.norm(W_rob, "fro") ** 2 * (1 + 1e-7)


def test_tpc_improves_on_feasible_expansion(solved_instance, options):
    scenario = solved_instance["scenario"]
    bounded = solved_instance["bounded"]
    verdict = solved_instance["v_scd"]
    W, _ = solve_tpc_scd(scenario, bounded, verdict.init_phi, verdict.init_W, options)
    assert (np.linalg.norm(W, "fro") ** 2
            <= np.linalg.norm(verdict.init_W, "fro") ** 2 * (1 + 1e-7))


def test_phase_sca_tight_at_expansion():
    scenario, bounded, _ = make_instance(seed=106)
    scenario, bounded, _c = normalize_units(scenario, bounded)
    rng = np.random.default_rng(4)
    W = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    phi_t = np.exp(1j * rng.uniform(0, 2 * np.pi, 6))
    for k in range(2):
        prog = ConicProgram()
        phi = prog.add_complex("phi", (6,))
        add_sca_sinr_phi(prog, phi, phi_t, W, scenario, k, slack=None, scale=1.0)
        block = prog.constraints[-1]
        coords = {"phi": np.concatenate([phi_t.real, phi_t.imag])}
        val = block.expr.value(coords)
        margin = (_eval_abs_sq_margin(val) if block.kind == "soc"
                  else float(np.real(np.atleast_1d(val)[0])))
        true_val = phase_sinr_value(scenario, W, phi_t, k)
        assert abs(margin - true_val) <= 1e-10 * max(1.0, abs(true_val))


def test_phase_coeffs_match_loop_oracle():
    scenario, _, _ = make_instance(seed=107)
    rng = np.random.default_rng(5)
    W = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    k = 0
    omega_k, omega_mk, omega_scal, omega_vec, _V = phase_sinr_coeffs(scenario, W, k)
    n, mt = scenario.n_elements, scenario.m_antennas
    gamma_k = float(scenario.sinr_targets[k])
    H_rk = np.zeros((n, mt), dtype=complex)
    for i in range(n):
        for m in range(mt):
            H_rk[i, m] = np.conj(scenario.h_r[k][i]) * scenario.F[i, m]
    w_k = W[:, k]
    w_j = W[:, 1]
    h_d = scenario.h_d[k]
    o_k = H_rk @ np.outer(w_k, np.conj(w_k)) @ H_rk.conj().T
    o_mk = H_rk @ np.outer(w_j, np.conj(w_j)) @ H_rk.conj().T
    o_scal = (abs(np.conj(h_d) @ w_k) ** 2
              - gamma_k * abs(np.conj(h_d) @ w_j) ** 2)
    o_vec = (H_rk @ np.outer(w_k, np.conj(w_k)) @ h_d
             - gamma_k * H_rk @ np.outer(w_j, np.conj(w_j)) @ h_d)
    scale = max(np.max(np.abs(o_k)), np.max(np.abs(o_vec)), abs(o_scal))
    assert np.max(np.abs(omega_k - o_k)) <= 1e-12 * scale
    assert np.max(np.abs(omega_mk - o_mk)) <= 1e-12 * scale
    assert abs(omega_scal - o_scal) <= 1e-12 * scale
    assert np.max(np.abs(omega_vec - o_vec)) <= 1e-12 * scale


def test_phase_coeffs_zero_beam_column():
    scenario, _, _ = make_instance(seed=108)
    rng = np.random.default_rng(6)
    W = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    W[:, 0] = 0.0
    omega_k, _omega_mk, _scal, omega_vec, _V = phase_sinr_coeffs(scenario, W, 0)
    assert np.allclose(omega_k, 0.0)
    # the remaining term is the pure interference part
    gamma_k = float(scenario.sinr_targets[0])
    H_rk = np.conj(scenario.h_r[0])[:, None] * scenario.F
    expect = -gamma_k * H_rk @ np.outer(W[:, 1], np.conj(W[:, 1])) @ scenario.h_d[0]
    assert np.allclose(omega_vec, expect)


def test_phase_step_returns_verified_unit_modulus(solved_instance, options):
    scenario = solved_instance["scenario"]
    bounded = solved_instance["bounded"]
    sol = solved_instance["sol_scd"]
    phi = solve_phase_penalty_ccp(scenario, bounded, sol.W, sol.phi, options)
    assert np.max(np.abs(np.abs(phi) - 1.0)) <= 1e-6
    margins = sinr_margins(scenario, sol.W, phi)
    assert np.min(margins) >= -1e-6
    assert verify_it_lmi(scenario, bounded, sol.W, phi, options)
    # the step may not degrade the worst margin below the warm start's floor
    before = float(np.min(sinr_margins(scenario, sol.W, sol.phi)))
    assert np.min(margins) >= min(0.0, before) - 1e-7


def test_phase_step_single_element():
    scenario, bounded, _ = make_instance(seed=109, n_elements=1, k_users=1)
    options_local = __import__("irscr.solution", fromlist=["AlgorithmOptions"]).AlgorithmOptions()
    from irscr.feasibility import check_feasibility_scd

    verdict = check_feasibility_scd(scenario, bounded, options_local,
                                    np.random.default_rng(1))
    assert verdict.feasible
    phi = solve_phase_penalty_ccp(scenario, bounded, verdict.init_W,
                                  verdict.init_phi, options_local)
    assert phi.shape == (1,)
    assert abs(abs(phi[0]) - 1.0) <= 1e-6


def test_bcd_zeta_infinite_single_iteration(solved_instance):
    from irscr.solution import AlgorithmOptions

    scenario = solved_instance["scenario"]
    bounded = solved_instance["bounded"]
    v = solved_instance["v_scd"]
    opts = AlgorithmOptions(zeta=np.inf)
    sol = run_bcd_scd(scenario, bounded, opts, (v.init_W, v.init_phi))
    assert sol.iterations == 1
    assert len(sol.objective_trace) == 1


def test_bcd_monotone_and_bounded_iterations(solved_instance, options):
    sol = solved_instance["sol_scd"]
    tr = sol.objective_trace
    assert sol.iterations <= options.t_max
    for a, b in zip(tr, tr[1:]):
        assert b <= a * (1 + 1e-7)


def test_bcd_solution_certificates(solved_instance):
    scenario = solved_instance["scenario"]
    bounded = solved_instance["bounded"]
    sol = solved_instance["sol_scd"]
    assert np.max(np.abs(np.abs(sol.phi) - 1.0)) <= 1e-6
    margins = nominal_sinr(scenario, sol.W, sol.phi) / scenario.sinr_targets - 1.0
    assert np.min(margins) >= -1e-6
    rng = np.random.default_rng(66)
    cap = float(scenario.it_thresholds[0])
    worst = 0.0
    for i in range(2000):
        dgd, dgr = sample_error(bounded, 0, rng, boundary=(i % 2 == 0))
        worst = max(worst, it_power(scenario.g_d_hat[0] + dgd,
                                    scenario.G_r_hat[0] + dgr, sol.phi, sol.W))
    assert worst <= cap * (1 + 1e-6)


def test_bcd_requires_feasible_first_step():
    # conflicting targets: rate system alone is infeasible at the start
    scenario, bounded, _ = make_instance(seed=110)
    scenario.h_d[1] = scenario.h_d[0]
    scenario.h_r[1] = scenario.h_r[0]
    rng = np.random.default_rng(2)
    phi0 = np.exp(1j * rng.uniform(0, 2 * np.pi, 6))
    W0 = 1e-9 * np.ones((4, 2), dtype=complex)
    with pytest.raises(SubproblemInfeasibleError):
        run_bcd_scd(scenario, bounded,
                    __import__("irscr.solution", fromlist=["AlgorithmOptions"]).AlgorithmOptions(),
                    (W0, phi0))
