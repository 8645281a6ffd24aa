"""Monte Carlo driver, baselines, config handling and distribution samplers."""

from .baselines import mvdr_smi, noise_floor
from .config import ConfigError, ExperimentConfig, load_config
from .experiment import SweepResult, run_once, sweep
from .sampling import (DiscreteDistribution, check_z1, check_z2,
                       sample_feasible_distribution_z1, sample_feasible_distribution_z2)

__all__ = [
    "mvdr_smi", "noise_floor", "ConfigError", "ExperimentConfig", "load_config",
    "SweepResult", "run_once", "sweep", "DiscreteDistribution", "check_z1", "check_z2",
    "sample_feasible_distribution_z1", "sample_feasible_distribution_z2",
]
