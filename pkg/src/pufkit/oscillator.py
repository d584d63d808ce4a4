"""
Ring-oscillator population model.

Each simulated chip owns a fixed vector of relative process deviations, one
per oscillator, drawn once when the population is created. A measured
frequency combines that deviation with a common-mode first-order
temperature/voltage response and a per-measurement jitter term::

    f = f_nom * (1 + p_j) * (1 + alpha_T*(T - t_nominal) + alpha_V*(V - v_nominal)) * (1 + eps)

All randomness comes from ``numpy.random.SeedSequence`` keyed by integer
tuples, so any measurement can be recomputed without storing noise streams.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import BoundsError, ConfigurationError

# domain tags keep deviation and noise streams disjoint
_DEVIATION_TAG = 0
_NOISE_TAG = 1


@dataclass(frozen=True)
class PopulationConfig:
    n_oscillators: int = 64
    f_nom: float = 100e6
    sigma_process: float = 0.01
    sigma_noise: float = 0.0005
    alpha_T: float = -2e-4
    alpha_V: float = 0.1
    t_nominal: float = 25.0
    v_nominal: float = 1.2
    counter_window: float | None = None
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if isinstance(self.n_oscillators, bool) or not isinstance(self.n_oscillators, (int, np.integer)):
            raise ConfigurationError("n_oscillators must be an integer", "n_oscillators")
        if self.n_oscillators < 2:
            raise ConfigurationError(f"n_oscillators must be >= 2, got {self.n_oscillators}", "n_oscillators")
        for name in ("f_nom", "sigma_process", "sigma_noise", "alpha_T", "alpha_V", "t_nominal", "v_nominal"):
            value = getattr(self, name)
            if not isinstance(value, (int, float, np.floating, np.integer)) or not math.isfinite(value):
                raise ConfigurationError(f"{name} must be a finite number, got {value!r}", name)
        if self.f_nom <= 0:
            raise ConfigurationError(f"f_nom must be > 0, got {self.f_nom}", "f_nom")
        if self.sigma_process <= 0:
            raise ConfigurationError(f"sigma_process must be > 0, got {self.sigma_process}", "sigma_process")
        if self.sigma_noise < 0:
            raise ConfigurationError(f"sigma_noise must be >= 0, got {self.sigma_noise}", "sigma_noise")
        if self.counter_window is not None and not (
            isinstance(self.counter_window, (int, float)) and math.isfinite(self.counter_window) and self.counter_window > 0
        ):
            raise ConfigurationError(f"counter_window must be > 0 when present, got {self.counter_window!r}", "counter_window")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}", "seed")

    @property
    def nominal(self) -> Environment:
        return Environment(self.t_nominal, self.v_nominal)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> PopulationConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config field(s): {sorted(unknown)}", sorted(unknown)[0])
        return cls(**data)


@dataclass(frozen=True)
class Environment:
    temperature: float
    voltage: float


@dataclass(frozen=True, eq=False)
class PufInstance:
    """One simulated chip. ``deviations`` is read-only after creation."""

    instance_id: int
    deviations: np.ndarray
    config: PopulationConfig = field(repr=False)

    def __post_init__(self):
        dev = np.array(self.deviations, dtype=np.float64)
        if dev.shape != (self.config.n_oscillators,):
            raise ConfigurationError(
                f"instance {self.instance_id} has {dev.size} deviations, expected {self.config.n_oscillators}",
                "deviations",
            )
        dev.setflags(write=False)
        object.__setattr__(self, "deviations", dev)

    @property
    def n_oscillators(self) -> int:
        return self.config.n_oscillators

    def __eq__(self, other):
        if not isinstance(other, PufInstance):
            return NotImplemented
        return (
            self.instance_id == other.instance_id
            and self.config == other.config
            and np.array_equal(self.deviations, other.deviations)
        )

    __hash__ = None


@dataclass(frozen=True)
class OscillatorPopulation:
    config: PopulationConfig
    instances: tuple[PufInstance, ...]

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        for i, inst in enumerate(self.instances):
            if inst.instance_id != i:
                raise ConfigurationError(f"instance ids must be 0..{len(self.instances) - 1} in order", "instances")

    def __len__(self) -> int:
        return len(self.instances)

    def __getitem__(self, idx: int) -> PufInstance:
        return self.instances[idx]

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "instances": [{"id": inst.instance_id, "deviations": inst.deviations.tolist()} for inst in self.instances],
        }

    @classmethod
    def from_dict(cls, data: dict) -> OscillatorPopulation:
        config = PopulationConfig.from_dict(data["config"])
        instances = [PufInstance(int(item["id"]), np.asarray(item["deviations"], dtype=np.float64), config) for item in data["instances"]]
        return cls(config, tuple(instances))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> OscillatorPopulation:
        return cls.from_dict(json.loads(Path(path).read_text()))


def _rng(*key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in key]))


def sample_deviations(config: PopulationConfig, instance_id: int) -> np.ndarray:
    """Process deviations of one instance; entry ``j`` belongs to oscillator ``j``."""
    return config.sigma_process * _rng(config.seed, _DEVIATION_TAG, instance_id).standard_normal(config.n_oscillators)


def create_population(config: PopulationConfig, n_instances: int) -> OscillatorPopulation:
    config.validate()
    if n_instances < 1:
        raise ConfigurationError(f"n_instances must be >= 1, got {n_instances}", "n_instances")
    return OscillatorPopulation(
        config, tuple(PufInstance(i, sample_deviations(config, i), config) for i in range(n_instances))
    )


def environment_factor(config: PopulationConfig, env: Environment) -> float:
    return 1.0 + config.alpha_T * (env.temperature - config.t_nominal) + config.alpha_V * (env.voltage - config.v_nominal)


def measurement_noise(instance: PufInstance, measurement_index: int) -> np.ndarray:
    """Relative jitter ``eps`` for every oscillator of one measurement."""
    config = instance.config
    if measurement_index < 0:
        raise ConfigurationError(f"measurement_index must be >= 0, got {measurement_index}", "measurement_index")
    if config.sigma_noise == 0:
        return np.zeros(config.n_oscillators)
    rng = _rng(config.seed, _NOISE_TAG, instance.instance_id, measurement_index)
    return config.sigma_noise * rng.standard_normal(config.n_oscillators)


def measure_all(instance: PufInstance, env: Environment | None = None, measurement_index: int | None = None) -> np.ndarray:
    """Frequencies (Hz) of every oscillator in one measurement.

    ``measurement_index=None`` gives the noise-free frequencies.
    """
    config = instance.config
    env = env or config.nominal
    freqs = config.f_nom * (1.0 + instance.deviations) * environment_factor(config, env)
    if measurement_index is not None:
        freqs = freqs * (1.0 + measurement_noise(instance, measurement_index))
    return freqs


def measure_frequency(
    instance: PufInstance, osc_index: int, env: Environment | None = None, measurement_index: int | None = None
) -> float:
    if not 0 <= osc_index < instance.n_oscillators:
        raise BoundsError(f"oscillator index {osc_index} outside [0, {instance.n_oscillators})")
    return float(measure_all(instance, env, measurement_index)[osc_index])


def count_cycles(frequency: float, window: float) -> int:
    return math.floor(frequency * window)
