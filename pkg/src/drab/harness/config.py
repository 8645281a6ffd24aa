"""Experiment configuration: a YAML key/value tree validated into :class:`ExperimentConfig`.

Layout (every key optional except where noted)::

    scenario:
      n_sensors: 10
      spacing_wavelengths: 0.5
      true_doa_deg: 5
      presumed_doa_deg: 1
      sector_deg: [0, 10]
      interferers: [[-5, 30], [15, 30]]   # (doa_deg, inr_db) pairs
      noise_power: 1.0
      snr_db: 0
      phase_distortion_std: 0.02
    formulation: {kind: main_d1_d2, d1_support: frobenius_ball, z2_support: norm_shell}
    methods: [dro, mvdr_smi, mvdr_dl]      # dro = the formulation above; or a formulation kind
    nominal_source: sample_covariance      # or reconstructed_inc, exact_inc
    runs: 50
    T: 100
    master_seed: 2024
    sweep: {kind: snr, values: [-20, -10, 0, 10]}   # kind: none | snr | snapshots | param (+ name)
    parameters: {rho1_rel: 0.001, gamma1_rel: 0.01, ...}
    algorithm: {alpha: 1000, eta: 1.0e-6, max_iter: 50, tol: 1.0e-8, backend: auto}
    reconstruction: {grid_step_deg: 0.5}
    failure_threshold: 0.1
    workers: 1
"""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field, fields, replace

import yaml

from ..array_model import ArrayGeometry, ArrayScenario
from ..dro_builders import Formulation, FormulationKind

NOMINAL_SOURCES = ("sample_covariance", "reconstructed_inc", "exact_inc")
SWEEP_KINDS = ("none", "snr", "snapshots", "param")
BASELINES = ("mvdr_smi", "mvdr_dl")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Parameters:
    """Uncertainty-set radii, mostly relative to the nominal quantities of each run."""

    rho1_rel: float = 1e-3         # rho1 / ||S0||_F
    rho2_rel: float = 1.1          # rho2 / tr(S0)
    gamma1_rel: float = 0.01       # gamma1 / ||a0||
    gamma2: float = 0.1            # D2 and the Loewner-bounded ellipsoidal set
    gamma2_fro_rel: float = 0.01   # gamma2 / ||Sigmabar||_F for the Frobenius-ball set
    Delta: float = 0.1
    d1p_rho1: float = 0.1          # Loewner-bounded INC set
    eps_rel: float = 0.01          # eps / lambda_max(Rhat)
    sector_samples: int = 100
    q_loading: float = 1e-6


@dataclass(frozen=True)
class AlgorithmSettings:
    alpha: float = 1e3
    eta: float = 1e-6
    max_iter: int = 50
    tol: float = 1e-8
    backend: str = "auto"


@dataclass(frozen=True)
class SweepSpec:
    kind: str = "none"
    values: tuple = ()
    name: str = ""

    @property
    def label(self):
        return self.name if self.kind == "param" else self.kind


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ArrayScenario
    formulation: FormulationKind = field(default_factory=FormulationKind)
    methods: tuple = ("dro", "mvdr_smi", "mvdr_dl")
    nominal_source: str = "sample_covariance"
    runs: int = 50
    T: int = 100
    master_seed: int = 0
    sweep: SweepSpec = field(default_factory=SweepSpec)
    parameters: Parameters = field(default_factory=Parameters)
    algorithm: AlgorithmSettings = field(default_factory=AlgorithmSettings)
    grid_step_deg: float = 0.5
    failure_threshold: float = 0.1
    workers: int = 1

    def with_value(self, kind, name, value):
        """Copy with one sweep coordinate applied."""
        if kind == "snr":
            return replace(self, scenario=replace(self.scenario, snr_db=float(value)))
        if kind == "snapshots":
            return replace(self, T=int(value))
        if kind == "param":
            return apply_param(self, name, value)
        return self

    def to_dict(self):
        sc = self.scenario
        return {
            "scenario": {
                "n_sensors": sc.geometry.n_sensors,
                "spacing_wavelengths": sc.geometry.spacing_wavelengths,
                "true_doa_deg": sc.true_doa_deg, "presumed_doa_deg": sc.presumed_doa_deg,
                "sector_deg": list(sc.sector_deg),
                "interferers": [list(i) for i in sc.interferers],
                "noise_power": sc.noise_power, "snr_db": sc.snr_db,
                "phase_distortion_std": sc.phase_distortion_std,
            },
            "formulation": self.formulation.to_dict(),
            "methods": list(self.methods),
            "nominal_source": self.nominal_source,
            "runs": self.runs, "T": self.T, "master_seed": self.master_seed,
            "sweep": {"kind": self.sweep.kind, "values": list(self.sweep.values),
                      **({"name": self.sweep.name} if self.sweep.kind == "param" else {})},
            "parameters": asdict(self.parameters),
            "algorithm": asdict(self.algorithm),
            "reconstruction": {"grid_step_deg": self.grid_step_deg},
            "failure_threshold": self.failure_threshold,
            "workers": self.workers,
        }


_ALGO_KEYS = {f.name for f in fields(AlgorithmSettings)}
_PARAM_KEYS = {f.name for f in fields(Parameters)}


_INT_KEYS = {"sector_samples", "max_iter"}


def apply_param(config, name, value):
    if name not in _INT_KEYS | {"backend"}:
        value = float(value)
    elif name in _INT_KEYS:
        value = int(value)
    if name in _PARAM_KEYS:
        return replace(config, parameters=replace(config.parameters, **{name: value}))
    if name in _ALGO_KEYS:
        return replace(config, algorithm=replace(config.algorithm, **{name: value}))
    raise ConfigError(f"unknown sweep parameter {name!r}")


def _section(data, key):
    value = data.get(key) or {}
    if not isinstance(value, dict):
        raise ConfigError(f"'{key}' must be a mapping")
    return value


def _known(section, allowed, where):
    extra = set(section) - set(allowed)
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")


def _number(value, where, kind=float):
    try:
        return kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: expected a number, got {value!r}") from exc


def config_from_dict(data):
    """Validate a parsed config tree; raises :class:`ConfigError` on any problem."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    data = copy.deepcopy(data)
    _known(data, {"scenario", "formulation", "methods", "nominal_source", "runs", "T",
                  "master_seed", "sweep", "parameters", "algorithm", "reconstruction",
                  "failure_threshold", "workers"}, "config")
    try:
        s = _section(data, "scenario")
        _known(s, {"n_sensors", "spacing_wavelengths", "true_doa_deg", "presumed_doa_deg",
                   "sector_deg", "interferers", "noise_power", "snr_db",
                   "phase_distortion_std"}, "scenario")
        geometry = ArrayGeometry(int(s.get("n_sensors", 10)),
                                 float(s.get("spacing_wavelengths", 0.5)))
        scenario = ArrayScenario(
            geometry,
            true_doa_deg=float(s.get("true_doa_deg", 5.0)),
            presumed_doa_deg=float(s.get("presumed_doa_deg", 1.0)),
            sector_deg=tuple(s.get("sector_deg", (0.0, 10.0))),
            interferers=tuple(tuple(i) for i in s.get("interferers", ((-5, 30), (15, 30)))),
            noise_power=float(s.get("noise_power", 1.0)),
            snr_db=float(s.get("snr_db", 0.0)),
            phase_distortion_std=float(s.get("phase_distortion_std", 0.02)))

        f = _section(data, "formulation")
        _known(f, {"kind", "d1_support", "z2_support"}, "formulation")
        formulation = FormulationKind(**f)

        methods = tuple(data.get("methods", ("dro", "mvdr_smi", "mvdr_dl")))
        kinds = {k.value for k in Formulation}
        for m in methods:
            if m not in BASELINES and m != "dro" and m not in kinds:
                raise ConfigError(f"unknown method {m!r}")
        if not methods or len(set(methods)) != len(methods):
            raise ConfigError("methods must be a non-empty list without repeats")

        sw = _section(data, "sweep")
        _known(sw, {"kind", "values", "name"}, "sweep")
        kind = sw.get("kind", "none")
        if kind not in SWEEP_KINDS:
            raise ConfigError(f"unknown sweep kind {kind!r}")
        values = tuple(_number(v, "sweep.values") for v in (sw.get("values") or ()))
        if kind != "none" and not values:
            raise ConfigError("sweep values must be non-empty")
        name = sw.get("name", "")
        if kind == "param" and name not in _PARAM_KEYS | _ALGO_KEYS:
            raise ConfigError(f"unknown sweep parameter {name!r}")
        if kind == "snapshots" and any(v < 1 or v != int(v) for v in values):
            raise ConfigError("snapshot counts must be positive integers")

        p = _section(data, "parameters")
        _known(p, _PARAM_KEYS, "parameters")
        parameters = Parameters(**{k: _number(v, f"parameters.{k}",
                                              int if k == "sector_samples" else float)
                                   for k, v in p.items()})
        a = _section(data, "algorithm")
        _known(a, _ALGO_KEYS, "algorithm")
        algorithm = AlgorithmSettings(**{k: (v if k == "backend" else
                                             _number(v, f"algorithm.{k}",
                                                     int if k == "max_iter" else float))
                                         for k, v in a.items()})
        r = _section(data, "reconstruction")
        _known(r, {"grid_step_deg"}, "reconstruction")

        config = ExperimentConfig(
            scenario=scenario, formulation=formulation, methods=methods,
            nominal_source=data.get("nominal_source", "sample_covariance"),
            runs=_number(data.get("runs", 50), "runs", int),
            T=_number(data.get("T", 100), "T", int),
            master_seed=_number(data.get("master_seed", 0), "master_seed", int),
            sweep=SweepSpec(kind, values, name),
            parameters=parameters, algorithm=algorithm,
            grid_step_deg=_number(r.get("grid_step_deg", 0.5), "grid_step_deg"),
            failure_threshold=_number(data.get("failure_threshold", 0.1), "failure_threshold"),
            workers=_number(data.get("workers", 1), "workers", int))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    validate(config)
    return config


def validate(config):
    if config.nominal_source not in NOMINAL_SOURCES:
        raise ConfigError(f"unknown nominal_source {config.nominal_source!r}")
    if config.master_seed < 0:
        raise ConfigError("master_seed must be non-negative")
    if config.runs < 1:
        raise ConfigError("runs must be >= 1")
    if config.T < 1:
        raise ConfigError("T must be >= 1")
    if config.workers < 1:
        raise ConfigError("workers must be >= 1")
    if not 0 <= config.failure_threshold <= 1:
        raise ConfigError("failure_threshold must lie in [0, 1]")
    if config.algorithm.backend not in ("auto", "clarabel", "cvxopt"):
        raise ConfigError(f"unknown backend {config.algorithm.backend!r}")
    if config.algorithm.max_iter < 1 or not config.algorithm.alpha > 0 \
            or not config.algorithm.eta > 0:
        raise ConfigError("algorithm needs alpha > 0, eta > 0, max_iter >= 1")
    if not config.grid_step_deg > 0:
        raise ConfigError("grid_step_deg must be positive")


def load_config(path):
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    return config_from_dict(data)


def dump_config(config):
    return yaml.safe_dump(config.to_dict(), sort_keys=False)
