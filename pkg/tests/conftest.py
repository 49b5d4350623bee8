import numpy as np
import pytest

from irscr.channels import (
    CorrelationSpec,
    GeometryConfig,
    build_uncertainty_models,
    dbm_to_watt,
    generate_scenario,
)
from irscr.solution import AlgorithmOptions


@pytest.fixture(scope="session")
def geometry():
    return GeometryConfig()


@pytest.fixture(scope="session")
def options():
    return AlgorithmOptions()


def make_instance(seed=12345, m_antennas=4, n_elements=6, k_users=2, n_prs=1,
                  rate=2.0, gamma_dbm=-80.0, delta_g=0.05, beta=0.05, c_eta=0.9,
                  geometry=None):
    geometry = geometry or GeometryConfig()
    scenario = generate_scenario(
        geometry, m_antennas, n_elements, k_users, n_prs,
        [rate] * k_users, [dbm_to_watt(gamma_dbm)] * n_prs, seed)
    bounded, statistical = build_uncertainty_models(
        scenario, CorrelationSpec(c_eta, delta_g), beta)
    return scenario, bounded, statistical


@pytest.fixture(scope="session")
def small_instance():
    """One desk-scale realization shared by the scheme tests."""
    return make_instance(seed=12345)


@pytest.fixture(scope="session")
def solved_instance(small_instance, options):
    """Feasibility verdicts and converged solutions for both schemes."""
    from irscr.feasibility import check_feasibility_scd, check_feasibility_sta
    from irscr.scd import run_bcd_scd
    from irscr.sta import run_bcd_sta

    scenario, bounded, statistical = small_instance
    v_scd = check_feasibility_scd(scenario, bounded, options, np.random.default_rng(7))
    v_sta = check_feasibility_sta(scenario, statistical, options, np.random.default_rng(7))
    assert v_scd.feasible and v_sta.feasible
    sol_scd = run_bcd_scd(scenario, bounded, options, (v_scd.init_W, v_scd.init_phi))
    sol_sta = run_bcd_sta(scenario, statistical, options, (v_sta.init_W, v_sta.init_phi))
    return {
        "scenario": scenario,
        "bounded": bounded,
        "statistical": statistical,
        "v_scd": v_scd,
        "v_sta": v_sta,
        "sol_scd": sol_scd,
        "sol_sta": sol_sta,
    }
