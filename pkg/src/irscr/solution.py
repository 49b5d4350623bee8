"""Result containers and algorithm options shared by both schemes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AlgorithmOptions:
    """Outer-loop, penalty-procedure and solver tolerances."""

    t_max: int = 20                # outer alternating iterations
    zeta: float = 1e-4             # relative objective-decrease stop threshold
    kappa0: float = 1e-3           # initial penalty weight
    l_kappa: float = 10.0          # penalty growth factor (> 1)
    kappa_cap: float = 1e4         # penalty ceiling
    l1: float = 1e-5               # slack-sum threshold for the inner loop
    l2: float = 1e-4               # phase-change threshold for the inner loop
    ccp_max_iter: int = 30         # inner penalty iterations cap
    tau_cap: float = 10.0          # hard bound on modulus slacks (inactive at convergence)
    feas_t_max: int = 10           # feasibility-checker alternations
    solver_tol: float = 1e-8
    check_tol: float = 1e-6        # independent constraint-verification tolerance
    rank_tol: float = 1e-6         # eigenvalue-ratio tolerance for rank-one extraction
    unit_modulus_tol: float = 1e-6

    def __post_init__(self):
        if self.zeta <= 0:
            raise ValueError("zeta must be positive")
        if self.l_kappa <= 1:
            raise ValueError("l_kappa must exceed 1")
        if self.l1 <= 0 or self.l2 <= 0:
            raise ValueError("l1 and l2 must be positive")


@dataclass
class BeamformingSolution:
    """Joint precoder / phase-shift design with its convergence record."""

    W: np.ndarray
    phi: np.ndarray
    objective_trace: list = field(default_factory=list)
    feasible: bool = True
    iterations: int = 0
    scheme: str = ""
    rank_ratio: float = 0.0   # worst eigenvalue ratio seen across SDP extractions

    @property
    def power_w(self) -> float:
        return float(np.linalg.norm(self.W, "fro") ** 2)

    @property
    def power_dbm(self) -> float:
        return float(10.0 * np.log10(self.power_w * 1000.0))


@dataclass
class FeasibilityVerdict:
    """Outcome of a feasibility checker plus the witnessing start point."""

    feasible: bool
    indicator: float
    init_W: np.ndarray | None
    init_phi: np.ndarray | None
    iterations: int
    indicator_trace: list = field(default_factory=list)
    rank_ratio: float = 0.0
