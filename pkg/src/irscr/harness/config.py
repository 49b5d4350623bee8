"""Experiment configuration: JSON schema, validation and grid expansion."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, fields, replace

from ..channels import GeometryConfig
from ..errors import ConfigError
from ..solution import AlgorithmOptions

SCHEMES = ("SCD", "STA", "NoIRS-STA", "RandPhase-STA", "Prephase-STA")

SWEEP_AXES = ("delta_g", "n_elements", "m_antennas", "gamma_dbm", "rate",
              "n_prs", "beta", "pr_x", "irs_x")

_PARAM_KEYS = {"m_antennas", "n_elements", "k_users", "n_prs", "rate",
               "gamma_dbm", "beta", "delta_g", "c_eta", "pr_x", "irs_x"}


@dataclass
class ExperimentConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    m_antennas: int = 4
    n_elements: int = 6
    k_users: int = 2
    n_prs: int = 1
    rate: float = 2.0
    gamma_dbm: float = -80.0
    beta: float = 0.05
    delta_g: float = 0.05
    c_eta: float = 0.9
    pr_x: float | None = None
    irs_x: float | None = None
    sweep: dict = field(default_factory=dict)
    schemes: tuple = ("SCD", "STA")
    realizations: int = 50
    seed: int = 1
    mc_samples: int = 10000
    algorithm: AlgorithmOptions = field(default_factory=AlgorithmOptions)
    output_dir: str = "out"
    workers: int = 1
    record_runtime: bool = False
    figures: bool = True
    save_solutions: bool = False
    exhaustive_init: int = 0

    def __post_init__(self):
        if self.realizations < 1:
            raise ConfigError("realizations must be >= 1")
        if self.mc_samples < 1000:
            raise ConfigError("mc_samples must be >= 1000")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"unknown scheme {s!r}; choose from {SCHEMES}")
        for axis, values in self.sweep.items():
            if axis not in SWEEP_AXES:
                raise ConfigError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")
            if not isinstance(values, (list, tuple)) or len(values) == 0:
                raise ConfigError(f"sweep axis {axis!r} needs a nonempty list")

    def grid_points(self):
        """Cartesian product of sweep axes, in declaration order."""
        if not self.sweep:
            return [{}]
        axes = list(self.sweep.keys())
        return [dict(zip(axes, combo))
                for combo in itertools.product(*(self.sweep[a] for a in axes))]

    def point_params(self, point: dict) -> "ExperimentConfig":
        """Config with one grid point's overrides applied."""
        return replace(self, **point, sweep={})


def _take(d: dict, cls, what):
    allowed = {f.name for f in fields(cls)}
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown {what} keys: {sorted(unknown)}")
    return d


def config_from_dict(doc: dict) -> ExperimentConfig:
    doc = dict(doc)
    allowed_top = {"geometry", "parameters", "sweep", "schemes", "realizations",
                   "seed", "mc_samples", "algorithm", "output_dir", "workers",
                   "record_runtime", "figures", "save_solutions", "exhaustive_init"}
    unknown = set(doc) - allowed_top
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    kwargs = {}
    if "geometry" in doc:
        geo = _take(doc.pop("geometry"), GeometryConfig, "geometry")
        geo = {k: tuple(v) if isinstance(v, list) else v for k, v in geo.items()}
        kwargs["geometry"] = GeometryConfig(**geo)
    if "parameters" in doc:
        params = doc.pop("parameters")
        unknown = set(params) - _PARAM_KEYS
        if unknown:
            raise ConfigError(f"unknown parameter keys: {sorted(unknown)}")
        kwargs.update(params)
    if "algorithm" in doc:
        alg = _take(doc.pop("algorithm"), AlgorithmOptions, "algorithm")
        kwargs["algorithm"] = AlgorithmOptions(**alg)
    if "schemes" in doc:
        kwargs["schemes"] = tuple(doc.pop("schemes"))
    if "sweep" in doc:
        kwargs["sweep"] = dict(doc.pop("sweep"))
    kwargs.update(doc)
    try:
        return ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(doc)
