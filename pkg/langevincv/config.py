"""
Created on 2026-10-18

@author: wf
"""
"""
Experiment configuration with presets for the standard experiments.
Stored as JSON or YAML with flat keys.
"""
import json
import logging
import os
from dataclasses import field
from enum import Enum
from typing import List, Optional

from basemkit.yamlable import lod_storable

from langevincv.bases import basis_from_spec
from langevincv.errors import ConfigError, LangevinCvError
from langevincv.samplers import Algorithm

logger = logging.getLogger(__name__)


class Preset(Enum):
    """The available experiments."""

    MIXTURE1D = "mixture1d"
    LOGISTIC = "logistic"
    PROBIT = "probit"
    GAUSSIAN_SANITY = "gaussian_sanity"
    ORACLE_SWEEP = "oracle_sweep"

    @classmethod
    def of_name(cls, name: str) -> "Preset":
        """Look up a preset by its name."""
        for preset in cls:
            if preset.value == name:
                return preset
        raise ConfigError(f"unknown preset '{name}', expected one of {[p.value for p in cls]}")

    @property
    def is_regression(self) -> bool:
        return self in (Preset.LOGISTIC, Preset.PROBIT)


@lod_storable
class ExperimentConfig:
    """
    Settings of an experiment run.

    Attributes:
        preset: name of the experiment
        algorithms: kernels to run (ULA, MALA, RWM)
        gamma_ula: step size of ULA
        gamma_mala: step size of MALA
        gamma_rwm: step size of RWM (proposal variance 2 gamma)
        burn_in: discarded steps N
        samples: retained states n
        replicas: independent chains R per algorithm
        seed: base seed of the replicas
        bases: basis spec strings, e.g. "first", "second", "gaussian_kernels(4,-4,4)"
        dim: dimension of the gaussian_sanity target
        data: csv file of a regression dataset, synthetic data if None
        label_column: name of the 0/1 column of the csv file
        intercept: prepend a constant covariate
        synthetic_n: observations of the synthetic dataset
        synthetic_dim: covariates of the synthetic dataset
        synthetic_seed: seed of the synthetic dataset
        prior_variance: variance of the Gaussian prior on the regression coefficients
        coefficients: "oracle" or "fitted" coefficient source of the one dimensional experiment
        split_fit: fit on an independently seeded chain instead of the estimation chain
        boundaries: truncation boundaries of the oracle sweep
        autocov_lags: number of autocovariance lags emitted for plotting
        workers: threads for the replicas, None for the default
        output_dir: directory of the result files
    """

    preset: str = Preset.MIXTURE1D.value
    algorithms: List[str] = field(default_factory=lambda: ["ULA", "MALA", "RWM"])
    gamma_ula: float = 1e-2
    gamma_mala: float = 5e-2
    gamma_rwm: float = 5e-2
    burn_in: int = 100000
    samples: int = 1000000
    replicas: int = 10
    seed: int = 0
    bases: List[str] = field(default_factory=lambda: ["gaussian_kernels(4,-4,4)"])
    dim: int = 1
    data: Optional[str] = None
    label_column: str = "y"
    intercept: bool = False
    synthetic_n: int = 100
    synthetic_dim: int = 4
    synthetic_seed: int = 1
    prior_variance: float = 100.0
    coefficients: str = "oracle"
    split_fit: bool = False
    boundaries: List[float] = field(default_factory=lambda: [3.0, 4.0, 5.0, 6.0])
    autocov_lags: int = 100
    workers: Optional[int] = None
    output_dir: str = "results"

    @classmethod
    def of_preset(cls, name: str) -> "ExperimentConfig":
        """
        The default configuration of a preset.
        """
        preset = Preset.of_name(name)
        config = cls(preset=preset.value)
        if preset.is_regression:
            config.replicas = 100
            config.bases = ["first", "second"]
            config.coefficients = "fitted"
        elif preset == Preset.GAUSSIAN_SANITY:
            config.dim = 2
            config.burn_in = 1000
            config.samples = 100000
            config.bases = ["first"]
            config.coefficients = "fitted"
        elif preset == Preset.ORACLE_SWEEP:
            config.algorithms = []
            config.bases = ["gaussian_kernels(5,-4,4)"]
        return config

    @classmethod
    def of_file(cls, path: str) -> "ExperimentConfig":
        """
        Load a configuration from a JSON or YAML file.

        Missing keys take the defaults of the preset named in the file.
        """
        if not os.path.isfile(path):
            raise ConfigError(f"config file {path} not found")
        try:
            if path.endswith((".yaml", ".yml")):
                loaded = cls.load_from_yaml_file(path)
                record = loaded.to_dict()
            else:
                with open(path, encoding="utf-8") as json_file:
                    record = json.load(json_file)
        except (ValueError, TypeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}")
        if not isinstance(record, dict):
            raise ConfigError(f"config {path} must be a mapping of flat keys")
        config = cls.of_preset(record.get("preset", Preset.MIXTURE1D.value))
        config.update(record)
        return config

    def update(self, overrides: dict):
        """
        Apply key value overrides, None values are ignored.
        """
        known = set(self.__dataclass_fields__)
        for key, value in overrides.items():
            if key not in known:
                raise ConfigError(f"unknown config key '{key}'")
            if value is not None:
                setattr(self, key, value)

    def gamma_of(self, algorithm: Algorithm) -> float:
        gammas = {
            Algorithm.ULA: self.gamma_ula,
            Algorithm.MALA: self.gamma_mala,
            Algorithm.RWM: self.gamma_rwm,
        }
        return gammas[algorithm]

    def set_gamma(self, gamma: float):
        """Use the same step size for all algorithms."""
        self.gamma_ula = self.gamma_mala = self.gamma_rwm = gamma

    @property
    def preset_kind(self) -> Preset:
        return Preset.of_name(self.preset)

    @property
    def algorithm_list(self) -> List[Algorithm]:
        try:
            algorithms = [Algorithm.of_name(name) for name in self.algorithms]
        except LangevinCvError as e:
            raise ConfigError(str(e))
        return algorithms

    def target_dim(self) -> int:
        preset = self.preset_kind
        if preset.is_regression:
            dim = self.synthetic_dim + (1 if self.intercept else 0)
        elif preset == Preset.GAUSSIAN_SANITY:
            dim = self.dim
        else:
            dim = 1
        return dim

    def validate(self) -> "ExperimentConfig":
        """
        Check the configuration.

        Raises:
            ConfigError: for the first problem found
        """
        preset = self.preset_kind
        self.algorithm_list
        if self.samples < 4:
            raise ConfigError(f"samples must be at least 4 but is {self.samples}")
        if self.burn_in < 0:
            raise ConfigError(f"burn_in must be non negative but is {self.burn_in}")
        if self.replicas < 1:
            raise ConfigError(f"replicas must be at least 1 but is {self.replicas}")
        for name in ("gamma_ula", "gamma_mala", "gamma_rwm"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive but is {getattr(self, name)}")
        if not self.seed >= 0:
            raise ConfigError(f"seed must be a non negative 64 bit integer but is {self.seed}")
        if self.coefficients not in ("oracle", "fitted"):
            raise ConfigError(f"coefficients must be 'oracle' or 'fitted' but is '{self.coefficients}'")
        if self.coefficients == "oracle" and preset not in (Preset.MIXTURE1D, Preset.ORACLE_SWEEP):
            raise ConfigError("oracle coefficients are available for the one dimensional mixture only")
        if not self.bases:
            raise ConfigError("at least one basis is needed")
        if self.data is not None and not preset.is_regression:
            raise ConfigError(f"a dataset is only used by regression presets, not by {preset.value}")
        if not self.boundaries or min(self.boundaries) <= 0:
            raise ConfigError("truncation boundaries must be positive")
        if not self.prior_variance > 0:
            raise ConfigError("prior_variance must be positive")
        # the regression dimension is known only after loading a csv file
        if self.data is None:
            for spec in self.bases:
                try:
                    basis_from_spec(spec, self.target_dim())
                except LangevinCvError as e:
                    raise ConfigError(f"basis '{spec}': {e}")
        return self

    def as_json(self) -> str:
        """Deterministic JSON with sorted keys."""
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)
