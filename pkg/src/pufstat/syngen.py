"""Seeded synthetic RO frequency datasets with known ground truth.

The model composes each RO's true frequency additively:

    freq(i, j) = base + device_offset(j)
               + gradient_x(j) * x(i) + gradient_y(j) * y(i)
               + local(i, j) + ro_mean_offset(i)

where (x, y) are the RO's grid coordinates centered on the chip, every
random term is Gaussian with a configurable sigma, and each measurement
sample adds fresh Gaussian noise on top.

Determinism: device ``j`` consumes only the stream seeded by
``[seed, 0, j]`` and serial numbers only the stream seeded by ``[seed, 1]``,
so generating devices in any order, or in parallel, yields bit-identical
output. Serial numbers are a strictly increasing sequence with seeded
positive jitter. The ground truth record keeps every drawn frequency
component; per-sample measurement noise is not recorded, only its sigma.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import DeviceMeta, ReadingsTensor
from .errors import ConfigurationError
from .geometry import GridGeometry


@dataclass(frozen=True)
class SynthConfig:
    num_devices: int
    num_ros: int
    num_samples: int
    geometry: GridGeometry
    seed: int
    base_freq: float = 200.0
    device_sigma: float = 0.0
    gradient_x_sigma: float = 0.0
    gradient_y_sigma: float = 0.0
    local_sigma: float = 0.0
    meas_sigma: float = 0.0
    ro_mean_offsets: np.ndarray | None = None

    def __post_init__(self):
        if self.num_devices < 1 or self.num_ros < 1 or self.num_samples < 1:
            raise ConfigurationError("device, RO and sample counts must be positive")
        if self.num_ros % 2 != 0:
            raise ConfigurationError(
                f"RO count must be even for pairwise grouping, got {self.num_ros}"
            )
        if self.geometry.size != self.num_ros:
            raise ConfigurationError(
                f"geometry {self.geometry.describe()} has {self.geometry.size} "
                f"cells but num_ros is {self.num_ros}"
            )
        for name in ("device_sigma", "gradient_x_sigma", "gradient_y_sigma",
                     "local_sigma", "meas_sigma"):
            if getattr(self, name) < 0.0:
                raise ConfigurationError(f"{name} must be non-negative")
        if self.base_freq <= 0.0:
            raise ConfigurationError("base frequency must be positive MHz")
        if self.ro_mean_offsets is not None:
            offs = np.asarray(self.ro_mean_offsets, dtype=np.float64).ravel()
            if offs.size != self.num_ros:
                raise ConfigurationError(
                    f"ro_mean_offsets has {offs.size} entries for {self.num_ros} ROs"
                )
            offs.setflags(write=False)
            object.__setattr__(self, "ro_mean_offsets", offs)

    def to_dict(self) -> dict:
        return {
            "num_devices": self.num_devices,
            "num_ros": self.num_ros,
            "num_samples": self.num_samples,
            "geometry": self.geometry.describe(),
            "seed": self.seed,
            "base_freq": self.base_freq,
            "device_sigma": self.device_sigma,
            "gradient_x_sigma": self.gradient_x_sigma,
            "gradient_y_sigma": self.gradient_y_sigma,
            "local_sigma": self.local_sigma,
            "meas_sigma": self.meas_sigma,
            "ro_mean_offsets": (
                None if self.ro_mean_offsets is None else self.ro_mean_offsets.tolist()
            ),
        }


@dataclass(frozen=True)
class GroundTruth:
    """Every drawn frequency component, for oracle checks downstream."""

    config: dict
    coord_x: np.ndarray
    coord_y: np.ndarray
    device_offsets: np.ndarray
    gradients_x: np.ndarray
    gradients_y: np.ndarray
    local: np.ndarray
    ro_mean_offsets: np.ndarray
    serials: np.ndarray
    true_freq: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "coord_x": self.coord_x.tolist(),
            "coord_y": self.coord_y.tolist(),
            "device_offsets": self.device_offsets.tolist(),
            "gradients_x": self.gradients_x.tolist(),
            "gradients_y": self.gradients_y.tolist(),
            "local": self.local.tolist(),
            "ro_mean_offsets": self.ro_mean_offsets.tolist(),
            "serials": self.serials.tolist(),
            "true_freq": self.true_freq.tolist(),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), sort_keys=True) + "\n", encoding="utf-8"
        )


def generate(config: SynthConfig) -> tuple[ReadingsTensor, DeviceMeta, GroundTruth]:
    """Draw a full dataset plus metadata and ground truth from one seed."""
    num_j, num_i, num_t = config.num_devices, config.num_ros, config.num_samples
    xc, yc = config.geometry.centered_coordinates()
    ro_offs = (
        np.zeros(num_i)
        if config.ro_mean_offsets is None
        else np.asarray(config.ro_mean_offsets, dtype=np.float64)
    )

    readings = np.empty((num_j, num_i, num_t))
    true_freq = np.empty((num_i, num_j))
    device_offsets = np.empty(num_j)
    gradients_x = np.empty(num_j)
    gradients_y = np.empty(num_j)
    local = np.empty((num_i, num_j))
    for j in range(num_j):
        rng = np.random.default_rng([config.seed, 0, j])
        device_offsets[j] = rng.normal(0.0, config.device_sigma)
        gradients_x[j] = rng.normal(0.0, config.gradient_x_sigma)
        gradients_y[j] = rng.normal(0.0, config.gradient_y_sigma)
        local[:, j] = rng.normal(0.0, config.local_sigma, size=num_i)
        column = (
            config.base_freq
            + device_offsets[j]
            + gradients_x[j] * xc
            + gradients_y[j] * yc
            + local[:, j]
            + ro_offs
        )
        true_freq[:, j] = column
        noise = rng.normal(0.0, config.meas_sigma, size=(num_i, num_t))
        readings[j] = column[:, None] + noise

    serial_rng = np.random.default_rng([config.seed, 1])
    start = 100_000 + int(serial_rng.integers(0, 50_000))
    jitter = serial_rng.integers(1, 2_000, size=num_j)
    serials = start + np.cumsum(jitter)

    tensor = ReadingsTensor(
        readings,
        provenance={
            "source": "synthetic",
            "seed": config.seed,
            "num_devices": num_j,
            "num_ros": num_i,
            "num_samples": num_t,
        },
    )
    meta = DeviceMeta(serials)
    truth = GroundTruth(
        config=config.to_dict(),
        coord_x=xc,
        coord_y=yc,
        device_offsets=device_offsets,
        gradients_x=gradients_x,
        gradients_y=gradients_y,
        local=local,
        ro_mean_offsets=ro_offs,
        serials=np.asarray(serials),
        true_freq=true_freq,
    )
    return tensor, meta, truth


# Ready-made configurations for experiments and tests.
def preset(name: str, seed: int, **overrides) -> SynthConfig:
    """Named starting points: ``null`` (pure local noise, independent rows),
    ``spatial`` (device offsets plus x/y gradients), ``noisy`` (spatial plus
    per-sample measurement noise)."""
    presets = {
        "null": dict(
            num_devices=256, num_ros=512, num_samples=1,
            geometry=GridGeometry(16, 32, "col"),
            device_sigma=0.0, gradient_x_sigma=0.0, gradient_y_sigma=0.0,
            local_sigma=1.0, meas_sigma=0.0,
        ),
        "spatial": dict(
            num_devices=128, num_ros=128, num_samples=10,
            geometry=GridGeometry(8, 16, "col"),
            device_sigma=5.0, gradient_x_sigma=0.3, gradient_y_sigma=0.4,
            local_sigma=0.5, meas_sigma=0.05,
        ),
        "noisy": dict(
            num_devices=64, num_ros=128, num_samples=25,
            geometry=GridGeometry(8, 16, "col"),
            device_sigma=5.0, gradient_x_sigma=0.3, gradient_y_sigma=0.4,
            local_sigma=0.5, meas_sigma=0.5,
        ),
    }
    if name not in presets:
        raise ConfigurationError(
            f"unknown preset {name!r}; choose from {sorted(presets)}"
        )
    params = dict(presets[name])
    params.update(overrides)
    return SynthConfig(seed=seed, **params)
