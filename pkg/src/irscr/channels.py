"""Scenario generation, cascaded/combined channels and uncertainty models.

Distance-dependent attenuation in dB is ``pl0 + 10 * alpha * log10(d / d0)``
and fading is Rayleigh: each channel entry is drawn CN(0, g) with g the
linear power gain of its link.  All randomness flows through explicit
numpy Generators; a scenario is bit-reproducible from its seed.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, InvalidGeometryError
from .stats import chi2_inv_cdf


@dataclass(frozen=True)
class GeometryConfig:
    """Node placement, propagation exponents and noise figures."""

    pr_position: tuple = (0.0, 0.0)
    st_position: tuple = (300.0, 0.0)
    irs_position: tuple = (300.0, 30.0)
    su_cell_center: tuple = (600.0, 0.0)
    cell_radius: float = 20.0
    pr_cell_radius: float = 200.0   # placement disc for multiple protected receivers
    alpha_irs: float = 2.2
    alpha_stu: float = 3.75
    pl0_db: float = 30.0
    d0: float = 1.0
    noise_density_dbm_hz: float = -174.0
    bandwidth_hz: float = 10e6

    def noise_power_w(self) -> float:
        return dbm_to_watt(self.noise_density_dbm_hz + 10.0 * np.log10(self.bandwidth_hz))


@dataclass(frozen=True)
class CorrelationSpec:
    """Exponential error-correlation profile and relative uncertainty level."""

    c_eta: float = 0.9
    delta_g: float = 0.05

    def __post_init__(self):
        if not (0.0 <= self.c_eta < 1.0):
            raise ValueError("c_eta must lie in [0, 1)")
        if not (0.0 <= self.delta_g < 1.0):
            raise ValueError("delta_g must lie in [0, 1)")


@dataclass
class Scenario:
    """One channel realization of the downlink with protected receivers."""

    m_antennas: int
    n_elements: int
    n_users: int
    n_prs: int
    F: np.ndarray            # (N, Mt) transmitter -> surface
    h_d: np.ndarray          # (K, Mt) direct user channels
    h_r: np.ndarray          # (K, N) surface -> user channels
    g_d_hat: np.ndarray      # (L, Mt) estimated direct channels to each PR
    G_r_hat: np.ndarray      # (L, N, Mt) estimated cascaded channels
    noise_powers: np.ndarray  # (K,) linear W
    sinr_targets: np.ndarray  # (K,) linear
    it_thresholds: np.ndarray  # (L,) linear W

    def validate(self):
        mt, n, k, l = self.m_antennas, self.n_elements, self.n_users, self.n_prs
        if min(mt, k, l) < 1 or n < 0:
            raise DimensionMismatchError("dimensions must be positive (N may be 0)")
        checks = [
            (self.F.shape, (n, mt)),
            (self.h_d.shape, (k, mt)),
            (self.h_r.shape, (k, n)),
            (self.g_d_hat.shape, (l, mt)),
            (self.G_r_hat.shape, (l, n, mt)),
            (self.noise_powers.shape, (k,)),
            (self.sinr_targets.shape, (k,)),
            (self.it_thresholds.shape, (l,)),
        ]
        for got, want in checks:
            if got != want:
                raise DimensionMismatchError(f"field shape {got} != {want}")
        if np.any(self.noise_powers <= 0) or np.any(self.it_thresholds <= 0):
            raise ValueError("noise powers and interference thresholds must be positive")
        if np.any(self.sinr_targets < 0):
            raise ValueError("SINR targets must be nonnegative")
        return self

    # -- serialization ---------------------------------------------------------

    def to_json_dict(self) -> dict:
        def cxl(a):
            a = np.asarray(a)
            return np.stack([a.real, a.imag], axis=-1).tolist()

        return {
            "m_antennas": self.m_antennas,
            "n_elements": self.n_elements,
            "n_users": self.n_users,
            "n_prs": self.n_prs,
            "F": cxl(self.F),
            "h_d": cxl(self.h_d),
            "h_r": cxl(self.h_r),
            "g_d_hat": cxl(self.g_d_hat),
            "G_r_hat": cxl(self.G_r_hat),
            "noise_powers": self.noise_powers.tolist(),
            "sinr_targets": self.sinr_targets.tolist(),
            "it_thresholds": self.it_thresholds.tolist(),
        }

    @staticmethod
    def from_json_dict(d: dict) -> "Scenario":
        def unc(a):
            arr = np.asarray(a, dtype=float)
            return arr[..., 0] + 1j * arr[..., 1]

        return Scenario(
            m_antennas=int(d["m_antennas"]),
            n_elements=int(d["n_elements"]),
            n_users=int(d["n_users"]),
            n_prs=int(d["n_prs"]),
            F=unc(d["F"]).reshape(d["n_elements"], d["m_antennas"]),
            h_d=unc(d["h_d"]).reshape(d["n_users"], d["m_antennas"]),
            h_r=unc(d["h_r"]).reshape(d["n_users"], d["n_elements"]),
            g_d_hat=unc(d["g_d_hat"]).reshape(d["n_prs"], d["m_antennas"]),
            G_r_hat=unc(d["G_r_hat"]).reshape(d["n_prs"], d["n_elements"], d["m_antennas"]),
            noise_powers=np.asarray(d["noise_powers"], dtype=float),
            sinr_targets=np.asarray(d["sinr_targets"], dtype=float),
            it_thresholds=np.asarray(d["it_thresholds"], dtype=float),
        ).validate()

    def digest(self) -> str:
        payload = json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    return 10.0 * np.log10(watt * 1000.0)


def path_loss_db(distance: float, alpha: float, pl0_db: float = 30.0, d0: float = 1.0) -> float:
    """Attenuation in dB at the given distance; strictly increasing in d."""
    if distance <= 0.0 or d0 <= 0.0:
        raise InvalidGeometryError("distances must be positive")
    if alpha <= 0.0:
        raise InvalidGeometryError("path-loss exponent must be positive")
    return pl0_db + 10.0 * alpha * np.log10(distance / d0)


def rate_to_sinr(rate: float) -> float:
    """Spectral-efficiency target (bit/s/Hz) to required linear SINR."""
    return float(2.0 ** rate - 1.0)


def _draw(rng, shape, gain):
    scale = np.sqrt(gain / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _dist(a, b):
    return float(np.hypot(a[0] - b[0], a[1] - b[1]))


def generate_scenario(geometry: GeometryConfig, m_antennas: int, n_elements: int,
                      n_users: int, n_prs: int, rate_targets, it_thresholds,
                      rng_seed) -> Scenario:
    """Draw one seeded realization of geometry and Rayleigh fading.

    Users are placed uniformly in the cell disc; with more than one protected
    receiver those are placed uniformly in a disc of radius ``pr_cell_radius``
    around the origin, otherwise the fixed ``pr_position`` is used.
    ``it_thresholds`` are linear watts.
    """
    if min(m_antennas, n_elements, n_users, n_prs) < 1:
        raise DimensionMismatchError("all dimensions must be >= 1")
    rate_targets = np.broadcast_to(np.asarray(rate_targets, dtype=float), (n_users,))
    it_thresholds = np.broadcast_to(np.asarray(it_thresholds, dtype=float), (n_prs,))
    if np.any(rate_targets < 0):
        raise ValueError("rate targets must be nonnegative")
    # independent child streams: the user-side draws do not shift when the
    # number of protected receivers changes, so sweeps stay seed-paired
    su_rng, pr_rng = np.random.default_rng(rng_seed).spawn(2)

    st = geometry.st_position
    irs = geometry.irs_position
    center = geometry.su_cell_center

    ang = su_rng.uniform(0.0, 2.0 * np.pi, size=n_users)
    rad = geometry.cell_radius * np.sqrt(su_rng.uniform(0.0, 1.0, size=n_users))
    su_pos = [(center[0] + r * np.cos(a), center[1] + r * np.sin(a)) for r, a in zip(rad, ang)]
    if n_prs == 1:
        pr_pos = [geometry.pr_position]
    else:
        ang_p = pr_rng.uniform(0.0, 2.0 * np.pi, size=n_prs)
        rad_p = geometry.pr_cell_radius * np.sqrt(pr_rng.uniform(0.0, 1.0, size=n_prs))
        pr_pos = [(r * np.cos(a), r * np.sin(a)) for r, a in zip(rad_p, ang_p)]

    def gain(a, b, alpha):
        return 10.0 ** (-path_loss_db(_dist(a, b), alpha, geometry.pl0_db, geometry.d0) / 10.0)

    F = _draw(su_rng, (n_elements, m_antennas), gain(st, irs, geometry.alpha_irs))
    h_d = np.stack([_draw(su_rng, (m_antennas,), gain(st, p, geometry.alpha_stu)) for p in su_pos])
    h_r = np.stack([_draw(su_rng, (n_elements,), gain(irs, p, geometry.alpha_irs)) for p in su_pos])
    g_d = np.stack([_draw(pr_rng, (m_antennas,), gain(st, p, geometry.alpha_stu)) for p in pr_pos])
    g_r = np.stack([_draw(pr_rng, (n_elements,), gain(irs, p, geometry.alpha_irs)) for p in pr_pos])
    G_r = np.stack([cascade(g_r[l], F) for l in range(n_prs)])

    sigma2 = geometry.noise_power_w()
    return Scenario(
        m_antennas=m_antennas,
        n_elements=n_elements,
        n_users=n_users,
        n_prs=n_prs,
        F=F,
        h_d=h_d,
        h_r=h_r,
        g_d_hat=g_d,
        G_r_hat=G_r,
        noise_powers=np.full(n_users, sigma2),
        sinr_targets=np.array([rate_to_sinr(r) for r in rate_targets]),
        it_thresholds=np.asarray(it_thresholds, dtype=float).copy(),
    ).validate()


# -- channel algebra -----------------------------------------------------------


def cascade(g_r: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Cascaded transmitter->surface->receiver channel diag(g_r^H) F."""
    g_r = np.asarray(g_r).ravel()
    F = np.asarray(F)
    if F.ndim != 2 or F.shape[0] != g_r.shape[0]:
        raise DimensionMismatchError("cascade: F rows must match g_r length")
    return np.conj(g_r)[:, None] * F


def combine(G_r: np.ndarray, g_d: np.ndarray) -> np.ndarray:
    """Stack cascaded and direct channels into one (N+1) x Mt matrix."""
    G_r = np.asarray(G_r)
    g_d = np.asarray(g_d).ravel()
    if G_r.ndim != 2 or G_r.shape[1] != g_d.shape[0]:
        raise DimensionMismatchError("combine: column counts must match")
    return np.vstack([G_r, np.conj(g_d)[None, :]])


def phi_tilde(phi: np.ndarray) -> np.ndarray:
    """Phase vector extended by the direct-path unity element."""
    return np.concatenate([np.asarray(phi).ravel(), [1.0]])


def su_effective_channel(scenario: Scenario, k: int, phi: np.ndarray) -> np.ndarray:
    """Effective user channel h_d + (diag(h_r^H) F)^H phi as a column vector."""
    H_rk = cascade(scenario.h_r[k], scenario.F)
    return scenario.h_d[k] + H_rk.conj().T @ np.asarray(phi).ravel()


def nominal_sinr(scenario: Scenario, W: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Per-user SINR at the nominal channels."""
    K = scenario.n_users
    out = np.zeros(K)
    for k in range(K):
        h = su_effective_channel(scenario, k, phi)
        sig = np.abs(np.conj(h) @ W[:, k]) ** 2
        others = np.delete(np.arange(K), k)
        interf = float(np.sum(np.abs(np.conj(h) @ W[:, others]) ** 2)) if K > 1 else 0.0
        out[k] = sig / (interf + scenario.noise_powers[k])
    return out


def it_power(g_d: np.ndarray, G_r: np.ndarray, phi: np.ndarray, W: np.ndarray) -> float:
    """Received interference power at a protected receiver."""
    row = np.conj(np.asarray(g_d).ravel()) + np.conj(np.asarray(phi).ravel()) @ np.asarray(G_r)
    return float(np.linalg.norm(row @ W) ** 2)


# -- uncertainty models --------------------------------------------------------


@dataclass
class CovarianceModel:
    """Error covariance of one protected receiver's channel pair.

    Carries the scalar variance parameters and square-root factors used to
    build the covariances, which radius calibration and samplers need.
    """

    sigma2_gd: float
    sigma2_gr: float
    sqrt_gd: np.ndarray   # (Mt, Mt) factor, Sigma_gd = sqrt_gd @ sqrt_gd^H
    sqrt_gr: np.ndarray   # (N*Mt, N*Mt)
    sigma_gd: np.ndarray  # (Mt, Mt)
    sigma_gr: np.ndarray  # (N*Mt, N*Mt)

    def combined(self) -> np.ndarray:
        """Block-diagonal covariance of [vec(dG_r); dg_d]."""
        n1, n2 = self.sigma_gr.shape[0], self.sigma_gd.shape[0]
        out = np.zeros((n1 + n2, n1 + n2), dtype=complex)
        out[:n1, :n1] = self.sigma_gr
        out[n1:, n1:] = self.sigma_gd
        return out


def correlation_matrix(dim: int, c_eta: float) -> np.ndarray:
    idx = np.arange(dim)
    return c_eta ** np.abs(idx[:, None] - idx[None, :])


def build_covariances(scenario: Scenario, spec: CorrelationSpec, l: int) -> CovarianceModel:
    """Correlated error covariances scaled to the estimated channel energy."""
    mt, n = scenario.m_antennas, scenario.n_elements
    C_gd = correlation_matrix(mt, spec.c_eta)
    C_gr = correlation_matrix(n * mt, spec.c_eta)
    d2 = spec.delta_g ** 2
    # normalization keeps the total error energy comparable with the
    # uncorrelated case: ||I||_F / ||C^2||_F
    sigma2_gd = d2 * float(np.linalg.norm(scenario.g_d_hat[l]) ** 2) * (
        np.sqrt(mt) / np.linalg.norm(C_gd @ C_gd, "fro"))
    sigma2_gr = d2 * float(np.linalg.norm(scenario.G_r_hat[l].ravel()) ** 2) * (
        np.sqrt(n * mt) / np.linalg.norm(C_gr @ C_gr, "fro"))
    sqrt_gd = np.sqrt(sigma2_gd) * C_gd
    sqrt_gr = np.sqrt(sigma2_gr) * C_gr
    return CovarianceModel(
        sigma2_gd=float(sigma2_gd),
        sigma2_gr=float(sigma2_gr),
        sqrt_gd=sqrt_gd.astype(complex),
        sqrt_gr=sqrt_gr.astype(complex),
        sigma_gd=(sqrt_gd @ sqrt_gd.conj().T).astype(complex),
        sigma_gr=(sqrt_gr @ sqrt_gr.conj().T).astype(complex),
    )


def calibrate_bounded_radii(cov: CovarianceModel, m_antennas: int, n_elements: int,
                            beta: float) -> tuple:
    """Uncertainty-ball radii matched to the statistical model's outage level."""
    if not (0.0 <= beta <= 1.0):
        raise ValueError("beta must lie in [0, 1]")
    if beta >= 1.0:
        return 0.0, 0.0
    eps_d = np.sqrt(cov.sigma2_gd / 2.0 * chi2_inv_cdf(2 * m_antennas, 1.0 - beta))
    eps_r = np.sqrt(cov.sigma2_gr / 2.0 * chi2_inv_cdf(2 * n_elements * m_antennas, 1.0 - beta))
    return float(eps_d), float(eps_r)


@dataclass
class UncertaintyModel:
    """Bounded or statistical description of the PR-channel errors."""

    mode: str                       # "bounded" | "statistical"
    covariances: list               # per-PR CovarianceModel
    beta: np.ndarray                # (L,) outage levels
    eps_d: np.ndarray | None = None  # (L,) bounded radii
    eps_r: np.ndarray | None = None

    def __post_init__(self):
        if self.mode not in ("bounded", "statistical"):
            raise ValueError("mode must be 'bounded' or 'statistical'")
        if np.any(self.beta < 0) or np.any(self.beta > 1):
            raise ValueError("beta must lie in [0, 1]")
        if self.mode == "bounded" and (self.eps_d is None or self.eps_r is None):
            raise ValueError("bounded mode requires radii")


def build_uncertainty_models(scenario: Scenario, spec: CorrelationSpec, beta) -> tuple:
    """Matched (bounded, statistical) models from one covariance calibration."""
    L = scenario.n_prs
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (L,)).copy()
    covs = [build_covariances(scenario, spec, l) for l in range(L)]
    radii = [calibrate_bounded_radii(covs[l], scenario.m_antennas, scenario.n_elements,
                                     beta[l]) for l in range(L)]
    eps_d = np.array([r[0] for r in radii])
    eps_r = np.array([r[1] for r in radii])
    bounded = UncertaintyModel("bounded", covs, beta, eps_d=eps_d, eps_r=eps_r)
    statistical = UncertaintyModel("statistical", covs, beta)
    return bounded, statistical


def normalize_units(scenario: Scenario, model: UncertaintyModel | None = None):
    """Rescale to noise-power units so conic data is well conditioned.

    Channel amplitudes scale by c = 1/sqrt(mean noise power), powers by c^2;
    the precoder and phase solutions of the rescaled problem are exactly
    those of the original, so nothing needs unscaling.  Idempotent.
    """
    c2 = 1.0 / float(np.mean(scenario.noise_powers))
    c = np.sqrt(c2)
    scaled = Scenario(
        m_antennas=scenario.m_antennas,
        n_elements=scenario.n_elements,
        n_users=scenario.n_users,
        n_prs=scenario.n_prs,
        F=scenario.F * c,
        h_d=scenario.h_d * c,
        h_r=scenario.h_r.copy(),
        g_d_hat=scenario.g_d_hat * c,
        G_r_hat=scenario.G_r_hat * c,
        noise_powers=scenario.noise_powers * c2,
        sinr_targets=scenario.sinr_targets.copy(),
        it_thresholds=scenario.it_thresholds * c2,
    )
    if model is None:
        return scaled, None, c
    covs = [
        CovarianceModel(
            sigma2_gd=cov.sigma2_gd * c2,
            sigma2_gr=cov.sigma2_gr * c2,
            sqrt_gd=cov.sqrt_gd * c,
            sqrt_gr=cov.sqrt_gr * c,
            sigma_gd=cov.sigma_gd * c2,
            sigma_gr=cov.sigma_gr * c2,
        )
        for cov in model.covariances
    ]
    scaled_model = UncertaintyModel(
        mode=model.mode,
        covariances=covs,
        beta=model.beta.copy(),
        eps_d=None if model.eps_d is None else model.eps_d * c,
        eps_r=None if model.eps_r is None else model.eps_r * c,
    )
    return scaled, scaled_model, c


def _ball_draw(rng, complex_dim: int, radius: float, boundary: bool) -> np.ndarray:
    z = rng.standard_normal(complex_dim) + 1j * rng.standard_normal(complex_dim)
    nrm = np.linalg.norm(z)
    if nrm == 0.0:  # pragma: no cover
        z = np.ones(complex_dim, dtype=complex)
        nrm = np.linalg.norm(z)
    direction = z / nrm
    if boundary:
        return radius * direction
    u = rng.uniform(0.0, 1.0)
    return radius * u ** (1.0 / (2.0 * complex_dim)) * direction


def sample_error(model: UncertaintyModel, l: int, rng, boundary: bool = False) -> tuple:
    """One draw (dg_d, dG_r) from the PR-l error model.

    Statistical mode draws z = Sigma^(1/2) t with t standard complex Gaussian
    (real and imaginary parts N(0, 1/2) each); bounded mode draws uniformly in
    the radius-eps ball, or exactly on the sphere when ``boundary`` is set.
    """
    cov = model.covariances[l]
    mt = cov.sqrt_gd.shape[0]
    nmt = cov.sqrt_gr.shape[0]
    n = nmt // mt if mt else 0
    if model.mode == "statistical":
        t_d = (rng.standard_normal(mt) + 1j * rng.standard_normal(mt)) / np.sqrt(2.0)
        t_r = (rng.standard_normal(nmt) + 1j * rng.standard_normal(nmt)) / np.sqrt(2.0)
        dgd = cov.sqrt_gd @ t_d
        dgr = (cov.sqrt_gr @ t_r).reshape(n, mt, order="F")
        return dgd, dgr
    dgd = _ball_draw(rng, mt, float(model.eps_d[l]), boundary)
    dgr = _ball_draw(rng, nmt, float(model.eps_r[l]), boundary).reshape(n, mt, order="F")
    return dgd, dgr
