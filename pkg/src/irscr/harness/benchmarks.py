"""Reference schemes: no surface, random phases, unit phases.

All three optimize the precoder with the outage-scheme SDR; they differ only
in how the phase vector is produced.
"""

from __future__ import annotations

import numpy as np

from ..channels import Scenario, UncertaintyModel, normalize_units
from ..errors import SubproblemInfeasibleError
from ..solution import AlgorithmOptions, BeamformingSolution
from ..sta import _solve_sdr, solve_tpc_sta_sdp
from ..stats import chi2_inv_cdf, max_eigenvalue


def benchmark_noirs(scenario: Scenario, model: UncertaintyModel,
                    options: AlgorithmOptions | None = None) -> BeamformingSolution:
    """No surface deployed: phases zeroed, direct channels only.

    The outage surrogate reduces to the direct-error system (covariance of
    dg_d alone, 2*Mt degrees of freedom).
    """
    options = options or AlgorithmOptions()
    scenario, model, _ = normalize_units(scenario, model)
    phi = np.zeros(scenario.n_elements, dtype=complex)
    it_matrices = []
    caps = []
    for l in range(scenario.n_prs):
        cov = model.covariances[l]
        beta = float(model.beta[l])
        quantile = 0.0 if beta >= 1.0 else chi2_inv_cdf(2 * scenario.m_antennas, 1.0 - beta)
        penalty = max_eigenvalue(cov.sigma_gd) * quantile
        g = scenario.g_d_hat[l]
        it_matrices.append(penalty * np.eye(scenario.m_antennas) + g[:, None] @ g[None, :].conj())
        caps.append(float(scenario.it_thresholds[l]))
    W, ratio, _ = _solve_sdr(scenario, phi, options, it_matrices, caps, "power")
    power = float(np.linalg.norm(W, "fro") ** 2)
    return BeamformingSolution(W=W, phi=phi, objective_trace=[power], iterations=1,
                               scheme="NoIRS-STA", rank_ratio=ratio)


def benchmark_prephase(scenario: Scenario, model: UncertaintyModel,
                       options: AlgorithmOptions | None = None) -> BeamformingSolution:
    """All phase shifts fixed to one; a single exact precoder solve."""
    options = options or AlgorithmOptions()
    if scenario.n_elements == 0:
        return benchmark_noirs(scenario, model, options)
    phi = np.ones(scenario.n_elements, dtype=complex)
    W, ratio = solve_tpc_sta_sdp(scenario, model, phi, options)
    power = float(np.linalg.norm(W, "fro") ** 2)
    return BeamformingSolution(W=W, phi=phi, objective_trace=[power], iterations=1,
                               scheme="Prephase-STA", rank_ratio=ratio)


def benchmark_randphase(scenario: Scenario, model: UncertaintyModel,
                        options: AlgorithmOptions | None, rng) -> BeamformingSolution:
    """Phases redrawn uniformly before each precoder step; last iterate kept.

    The alternation stops on the usual relative-power rule or the iteration
    budget; draws whose precoder problem is infeasible are skipped.
    """
    options = options or AlgorithmOptions()
    last = None
    trace = []
    prev = None
    ratio_worst = 0.0
    iterations = 0
    for t in range(options.t_max):
        phi = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=scenario.n_elements))
        try:
            W, ratio = solve_tpc_sta_sdp(scenario, model, phi, options)
        except SubproblemInfeasibleError:
            iterations = t + 1
            continue
        ratio_worst = max(ratio_worst, ratio)
        power = float(np.linalg.norm(W, "fro") ** 2)
        trace.append(power)
        iterations = t + 1
        last = BeamformingSolution(W=W, phi=phi, objective_trace=[],
                                   scheme="RandPhase-STA")
        if prev is not None and abs(prev - power) / max(power, 1e-300) < options.zeta:
            break
        prev = power
    if last is None:
        raise SubproblemInfeasibleError("no random phase draw was feasible")
    last.objective_trace = trace
    last.iterations = iterations
    last.rank_ratio = ratio_worst
    return last
