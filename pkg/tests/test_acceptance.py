"""Acceptance suite: every criterion prints one PASS/FAIL line.

The battery instances use the reference parameter set (4 antennas, 2 users,
6 elements, rate 2, cap -80 dBm, beta 0.05, delta_g 0.05).  Power-ordering
comparisons use the 0.1 dB tolerance stated for the benchmark clause; exact
float comparison between two local optimizers is noise (see notes in the
repo README).
"""

import math

import numpy as np
import pytest

from irscr.channels import it_power, phi_tilde, sample_error
from irscr.harness import config_from_dict, run_experiment
from irscr.harness.emit import plot_csv_texts, records_csv_text, summary_json_text
from irscr.harness.oracles import certify_solution
from irscr.solution import AlgorithmOptions
from irscr.stats import chi2_inv_cdf
from conftest import make_instance

pytestmark = pytest.mark.acceptance

BATTERY_SEED = 20242  # all 20 instances feasible for both schemes at this seed
N_INSTANCES = 20
DB_TOL = 0.1


def _report(name, ok, detail=""):
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} {detail}")
    return ok


@pytest.fixture(scope="module")
def battery():
    cfg = config_from_dict({
        "parameters": {"m_antennas": 4, "n_elements": 6, "k_users": 2,
                       "rate": 2.0, "gamma_dbm": -80.0, "beta": 0.05,
                       "delta_g": 0.05},
        "schemes": ["SCD", "STA", "NoIRS-STA", "RandPhase-STA", "Prephase-STA"],
        "realizations": N_INSTANCES,
        "seed": BATTERY_SEED,
        "mc_samples": 10000,
        "figures": False,
    })
    result = run_experiment(cfg)
    by = {}
    for rec in result.records:
        by.setdefault(rec.scheme, {})[rec.realization_id] = rec
    return result, by


@pytest.fixture(scope="module")
def delta_sweep():
    cfg = config_from_dict({
        "parameters": {"n_elements": 6, "k_users": 2, "rate": 2.0,
                       "gamma_dbm": -80.0, "beta": 0.05},
        "sweep": {"delta_g": [0.02, 0.05, 0.1, 0.2], "m_antennas": [4, 6]},
        "schemes": ["SCD", "STA"],
        "realizations": 50,
        "seed": 31,
        "mc_samples": 1000,
        "workers": 2,
        "figures": False,
    })
    return run_experiment(cfg, feasibility_only=True)


@pytest.fixture(scope="module")
def n_sweep():
    cfg = config_from_dict({
        "parameters": {"m_antennas": 6, "k_users": 2, "rate": 2.0,
                       "gamma_dbm": -70.0, "beta": 0.05, "delta_g": 0.1},
        "sweep": {"n_elements": [5, 10, 15]},
        "schemes": ["SCD", "STA"],
        "realizations": 50,
        "seed": 37,
        "mc_samples": 1000,
        "workers": 2,
        "figures": False,
    })
    return run_experiment(cfg)


@pytest.fixture(scope="module")
def l_sweep():
    cfg = config_from_dict({
        "parameters": {"m_antennas": 4, "n_elements": 6, "k_users": 2,
                       "rate": 2.0, "gamma_dbm": -80.0, "beta": 0.05,
                       "delta_g": 0.1},
        "sweep": {"n_prs": [1, 2, 4]},
        "schemes": ["SCD", "STA"],
        "realizations": 50,
        "seed": 41,
        "mc_samples": 1000,
        "workers": 2,
        "figures": False,
    })
    return run_experiment(cfg)


def _terminated_by_tolerance(solution, opts):
    tr = solution.objective_trace
    if len(tr) < opts.t_max:
        return True
    return len(tr) >= 2 and abs(tr[-2] - tr[-1]) / tr[-1] < opts.zeta


def test_criterion_1_convergence(battery):
    result, by = battery
    opts = result.config.algorithm
    ok = True
    within10 = 0
    pairs = 0
    for rid in range(N_INSTANCES):
        for scheme in ("SCD", "STA"):
            rec = by[scheme][rid]
            assert rec.feasible, f"{scheme} #{rid} unexpectedly infeasible"
            sol = rec.solution
            ok &= _terminated_by_tolerance(sol, opts)
            ok &= rec.iterations <= 20
            for a, b in zip(sol.objective_trace, sol.objective_trace[1:]):
                ok &= b <= a * (1 + 1e-7)
            ok &= rec.runtime_ms <= 60_000.0
        pairs += 1
        if by["SCD"][rid].iterations <= 10 and by["STA"][rid].iterations <= 10:
            within10 += 1
    ok &= within10 >= math.ceil(0.9 * pairs)
    assert _report("criterion-1 convergence", ok,
                   f"(within-10: {within10}/{pairs})")


def test_criterion_2_robust_certificates(battery):
    result, by = battery
    ok = True
    for rec in result.records:
        if not rec.feasible:
            continue
        ok &= bool(rec.cert_pass)
        if rec.scheme == "SCD":
            ok &= rec.wc_margin is not None and rec.wc_margin >= -1e-6
        else:
            beta = 0.05
            stderr = math.sqrt(beta * (1 - beta) / 10000)
            ok &= rec.mc_outage is not None and rec.mc_outage <= beta + 2 * stderr
    assert _report("criterion-2 robust certificates", ok)


def test_criterion_3_rank_one(battery):
    from irscr.sta import SDR_SOLVE_LOG

    count = len(SDR_SOLVE_LOG)
    worst = max(SDR_SOLVE_LOG, default=np.inf)
    ok = count >= 100 and worst <= 1e-6
    assert _report("criterion-3 rank-one", ok,
                   f"(solves: {count}, worst ratio: {worst:.2e})")


def test_criterion_4_power_ordering(battery):
    result, by = battery
    wins = joint = 0
    bench_ok = True
    for rid in range(N_INSTANCES):
        scd, sta = by["SCD"][rid], by["STA"][rid]
        if scd.feasible and sta.feasible:
            joint += 1
            if sta.power_dbm <= scd.power_dbm + DB_TOL:
                wins += 1
        if sta.feasible:
            for scheme in ("NoIRS-STA", "RandPhase-STA", "Prephase-STA"):
                b = by[scheme][rid]
                if b.feasible:
                    bench_ok &= sta.power_dbm <= b.power_dbm + DB_TOL
    ok = joint > 0 and wins >= math.ceil(0.8 * joint) and bench_ok
    assert _report("criterion-4 power ordering", ok,
                   f"(STA<=SCD: {wins}/{joint}, benchmarks: {bench_ok})")


def _series(result, scheme, axis, metric, context=None):
    context = context or {}
    values = sorted(set(r.grid[axis] for r in result.records))
    out = []
    for v in values:
        sel = [r for r in result.records
               if r.scheme == scheme and r.grid[axis] == v
               and all(r.grid[a] == context[a] for a in context)]
        if metric == "feasibility_rate":
            out.append(sum(r.feasible for r in sel) / len(sel))
        else:
            pw = [r.power_w for r in sel if r.feasible]
            out.append(float(np.mean(pw)) if pw else None)
    return values, out


def _nonincreasing(seq):
    vals = [v for v in seq if v is not None]
    return all(b <= a * (1 + 1e-9) for a, b in zip(vals, vals[1:]))


def test_criterion_5_trend_reproduction(delta_sweep, n_sweep, l_sweep):
    checks = []

    for mt in (4, 6):
        okk = all(_nonincreasing(_series(delta_sweep, s, "delta_g",
                                         "feasibility_rate", {"m_antennas": mt})[1])
                  for s in ("SCD", "STA"))
        checks.append((f"feasibility vs delta_g @ Mt={mt}", okk))

    for s in ("SCD", "STA"):
        _, powers = _series(n_sweep, s, "n_elements", "mean_power")
        checks.append((f"power vs N ({s})", _nonincreasing(powers)))

    feas_ok = all(_nonincreasing(_series(l_sweep, s, "n_prs", "feasibility_rate")[1])
                  for s in ("SCD", "STA"))
    checks.append(("feasibility vs L", feas_ok))

    pow_ok = all(_nonincreasing(_series(l_sweep, s, "n_prs", "mean_power")[1])
                 for s in ("SCD", "STA"))
    checks.append(("power vs L", pow_ok))

    held = sum(ok for _, ok in checks)
    for name, okk in checks:
        print(f"  trend {name}: {'holds' if okk else 'violated'}")
    assert _report("criterion-5 trends", held >= 5, f"({held}/6 hold)")


def test_criterion_6_math_identities():
    rng = np.random.default_rng(606)

    # combined-channel chain equality
    from irscr.channels import cascade, combine

    worst = 0.0
    for _ in range(50):
        n, mt, k = 6, 4, 2
        F = rng.standard_normal((n, mt)) + 1j * rng.standard_normal((n, mt))
        g_r = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        g_d = rng.standard_normal(mt) + 1j * rng.standard_normal(mt)
        W = rng.standard_normal((mt, k)) + 1j * rng.standard_normal((mt, k))
        phi = np.exp(1j * rng.uniform(0, 2 * np.pi, n))
        G_r = cascade(g_r, F)
        lhs = np.conj(phi_tilde(phi)) @ combine(G_r, g_d) @ W
        rhs = (np.conj(g_d) + np.conj(phi) @ G_r) @ W
        worst = max(worst, np.max(np.abs(lhs - rhs)) / np.linalg.norm(rhs))
    chain_ok = worst <= 1e-10

    # quadratic partition identity
    from irscr.sta import build_phase_quadratic, combined_channel

    scenario, bounded, statistical = make_instance(seed=607)
    W = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    pq = build_phase_quadratic(combined_channel(scenario, 0), W)
    part_ok = True
    G = combined_channel(scenario, 0)
    for _ in range(100):
        phi = np.exp(1j * rng.uniform(0, 2 * np.pi, 6))
        pt = phi_tilde(phi)
        direct = float(np.linalg.norm((np.conj(pt) @ G) @ W) ** 2)
        split = float(np.real(np.conj(phi) @ pq.B @ phi)
                      + 2 * np.real(np.conj(pq.b) @ phi) + pq.b_last)
        part_ok &= abs(direct - split) <= 1e-10 * max(1.0, direct)

    # SCA tightness at the expansion point, both blocks
    from irscr.ccp import phase_sinr_coeffs, phase_sinr_value
    from irscr.channels import normalize_units, su_effective_channel

    sc_n, bnd_n, _ = normalize_units(scenario, bounded)
    W_t = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    phi_t = np.exp(1j * rng.uniform(0, 2 * np.pi, 6))
    tight_ok = True
    for k2 in range(2):
        h = su_effective_channel(sc_n, k2, phi_t)
        gamma_k = float(sc_n.sinr_targets[k2])
        sigma2 = float(sc_n.noise_powers[k2])
        c = h * (np.conj(h) @ W_t[:, k2])
        lin = 2 * np.real(np.conj(c) @ W_t[:, k2])
        gamma_tilde = abs(np.conj(h) @ W_t[:, k2]) ** 2 + gamma_k * sigma2
        interf = sum(abs(np.conj(h) @ W_t[:, j]) ** 2 for j in range(2) if j != k2)
        sca_val = lin - gamma_k * interf - gamma_tilde
        sig = abs(np.conj(h) @ W_t[:, k2]) ** 2
        true_val = sig - gamma_k * (interf + sigma2)
        tight_ok &= abs(sca_val - true_val) <= 1e-10 * max(1.0, abs(true_val), sig)

        omega_k, omega_mk, omega_scal, omega_vec, _V = phase_sinr_coeffs(sc_n, W_t, k2)
        gamma_bar = (omega_scal - float(np.real(np.conj(phi_t) @ omega_k @ phi_t))
                     - gamma_k * sigma2)
        lin_row = omega_vec.conj() + np.conj(phi_t) @ omega_k
        sca_phi = (gamma_bar + 2 * np.real(lin_row @ phi_t)
                   - gamma_k * float(np.real(np.conj(phi_t) @ omega_mk @ phi_t)))
        true_phi = phase_sinr_value(sc_n, W_t, phi_t, k2)
        tight_ok &= abs(sca_phi - true_phi) <= 1e-10 * max(1.0, abs(true_phi))

    # robust-cap block implies the sampled inequality
    from irscr.feasibility import check_feasibility_scd
    from irscr.scd import run_bcd_scd

    opts = AlgorithmOptions()
    v = check_feasibility_scd(scenario, bounded, opts, np.random.default_rng(8))
    sol = run_bcd_scd(scenario, bounded, opts, (v.init_W, v.init_phi))
    rng2 = np.random.default_rng(9)
    cap = float(scenario.it_thresholds[0])
    lmi_ok = True
    for i in range(1000):
        dgd, dgr = sample_error(bounded, 0, rng2, boundary=(i % 2 == 0))
        itv = it_power(scenario.g_d_hat[0] + dgd, scenario.G_r_hat[0] + dgr,
                       sol.phi, sol.W)
        lmi_ok &= itv <= cap * (1 + 1e-6)

    # chi-square inverse CDF: closed form and Monte Carlo
    want = -2.0 * math.log(0.05)
    chi_ok = abs(chi2_inv_cdf(2, 0.95) - want) <= 1e-9 * want
    draws = np.random.default_rng(10).chisquare(16, size=10_000_000)
    emp = float(np.quantile(draws, 0.95))
    chi_ok &= abs(chi2_inv_cdf(16, 0.95) - emp) <= 5e-3 * emp

    ok = chain_ok and part_ok and tight_ok and lmi_ok and chi_ok
    assert _report("criterion-6 math identities", ok,
                   f"(chain {chain_ok}, partition {part_ok}, tightness {tight_ok}, "
                   f"lmi {lmi_ok}, chi2 {chi_ok})")


def test_criterion_7_checker_soundness():
    from irscr.feasibility import check_feasibility_scd, check_feasibility_sta

    opts = AlgorithmOptions()
    ok = True
    for seed in range(700, 705):
        scenario, bounded, statistical = make_instance(seed=seed)
        v1 = check_feasibility_scd(scenario, bounded, opts, np.random.default_rng(seed))
        v2 = check_feasibility_sta(scenario, statistical, opts, np.random.default_rng(seed))
        for v, model in ((v1, bounded), (v2, statistical)):
            if not v.feasible:
                continue
            cert = certify_solution(scenario, model, v.init_W, v.init_phi,
                                    10000, np.random.default_rng(seed + 1))
            ok &= cert["pass"]

    scenario, bounded, statistical = make_instance(
        seed=305, gamma_dbm=-120.0, rate=4.0, delta_g=0.3)
    v1 = check_feasibility_scd(scenario, bounded, opts, np.random.default_rng(4))
    v2 = check_feasibility_sta(scenario, statistical, opts, np.random.default_rng(4))
    ok &= (not v1.feasible) and v1.iterations <= opts.feas_t_max
    ok &= (not v2.feasible) and v2.iterations <= opts.feas_t_max
    assert _report("criterion-7 checker soundness", ok)


def test_criterion_8_determinism():
    doc = {
        "parameters": {"m_antennas": 3, "n_elements": 4, "k_users": 2,
                       "rate": 1.0, "gamma_dbm": -80.0},
        "sweep": {"delta_g": [0.05, 0.2]},
        "schemes": ["SCD", "STA"],
        "realizations": 2,
        "seed": 808,
        "mc_samples": 1000,
        "figures": False,
    }
    a = run_experiment(config_from_dict(doc))
    b = run_experiment(config_from_dict(doc))
    ok = records_csv_text(a) == records_csv_text(b)
    ok &= summary_json_text(a) == summary_json_text(b)
    ok &= plot_csv_texts(a) == plot_csv_texts(b)
    # worker pool must not change the bytes either
    c = run_experiment(config_from_dict({**doc, "workers": 2}))
    ok &= records_csv_text(c) == records_csv_text(a)
    assert _report("criterion-8 determinism", ok)
