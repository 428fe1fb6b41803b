"""Inertial measurement batches, sensor-error injection and dataset text IO."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

# Unit conversions. Internally: rad/s, rad/sqrt(s), m/s^2, m/s^1.5.
DEG = math.pi / 180.0
DEG_PER_HOUR = DEG / 3600.0  # deg/h -> rad/s
DEG_PER_SQRT_HOUR = DEG / 60.0  # deg/sqrt(h) -> rad/sqrt(s)
PER_SQRT_HOUR = 1.0 / 60.0  # x/sqrt(h) -> x/sqrt(s)


@dataclass(frozen=True, eq=False)
class ImuBatch:
    """``N`` uniformly spaced gyro/accelerometer samples over one interval.

    ``kind == "increments"``: row ``k`` holds the angular (rad) and velocity
    (m/s) increments over ``[t_start + k h, t_start + (k + 1) h]``.
    ``kind == "rates"``: row ``k`` holds angular rate and specific force at
    ``t_start + (k + 1) h``.
    """

    t_start: float
    t_span: float
    gyro: NDArray[np.float64]
    accel: NDArray[np.float64]
    kind: Literal["increments", "rates"] = "increments"

    def __post_init__(self) -> None:
        gyro = np.array(self.gyro, dtype=float)
        accel = np.array(self.accel, dtype=float)
        if gyro.ndim != 2 or gyro.shape[1] != 3 or gyro.shape != accel.shape:
            raise ValueError("gyro and accel must both have shape (N, 3)")
        if gyro.shape[0] < 2:
            raise ValueError("a batch needs at least 2 samples")
        if self.kind not in ("increments", "rates"):
            raise ValueError(f"unknown batch kind {self.kind!r}")
        if not self.t_span > 0:
            raise ValueError("t_span must be positive")
        gyro.setflags(write=False)
        accel.setflags(write=False)
        object.__setattr__(self, "gyro", gyro)
        object.__setattr__(self, "accel", accel)

    @property
    def n_samples(self) -> int:
        return self.gyro.shape[0]

    @property
    def dt(self) -> float:
        return self.t_span / self.n_samples


@dataclass(frozen=True)
class SensorSpec:
    """Constant bias plus white noise per axis, in internal units.

    Attributes
    ----------
    gyro_bias : rad/s
    gyro_arw : rad/sqrt(s)
    accel_bias : m/s^2
    accel_vrw : m/s^1.5
    seed : int
    """

    gyro_bias: float = 0.0
    gyro_arw: float = 0.0
    accel_bias: float = 0.0
    accel_vrw: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.gyro_bias, self.gyro_arw, self.accel_bias, self.accel_vrw) < 0:
            raise ValueError("sensor error magnitudes must be non-negative")

    @classmethod
    def from_datasheet(
        cls,
        gyro_bias_deg_h: float = 0.0,
        gyro_arw_deg_rt_h: float = 0.0,
        accel_bias: float = 0.0,
        accel_noise_per_rt_h: float = 0.0,
        seed: int = 0,
    ) -> "SensorSpec":
        """Build from deg/h, deg/sqrt(h), m/s^2 and (m/s)/sqrt(h) figures."""
        return cls(
            gyro_bias=gyro_bias_deg_h * DEG_PER_HOUR,
            gyro_arw=gyro_arw_deg_rt_h * DEG_PER_SQRT_HOUR,
            accel_bias=accel_bias,
            accel_vrw=accel_noise_per_rt_h * PER_SQRT_HOUR,
            seed=seed,
        )

    @property
    def is_perfect(self) -> bool:
        return self.gyro_bias == self.gyro_arw == self.accel_bias == self.accel_vrw == 0.0


PERFECT = SensorSpec()
NAV_GRADE = SensorSpec.from_datasheet(1e-4, 1e-4, 1e-5, 1e-6)
HIGH_GRADE = SensorSpec.from_datasheet(1e-5, 1e-5, 1e-6, 1e-7)
SENSOR_PRESETS = {"perfect": PERFECT, "nav": NAV_GRADE, "high": HIGH_GRADE}


def corrupt_increments(
    gyro: ArrayLike, accel: ArrayLike, dt: float, spec: SensorSpec
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Add ``bias * dt`` and N(0, (rw * sqrt(dt))^2) noise to increment streams.

    Noise is drawn from ``numpy.random.default_rng(spec.seed)``: gyro block
    first, then accelerometer block, so results are reproducible bit for bit.
    """
    gyro = np.array(gyro, dtype=float)
    accel = np.array(accel, dtype=float)
    if spec.is_perfect:
        return gyro, accel
    rng = np.random.default_rng(spec.seed)
    sq = math.sqrt(dt)
    gyro_noise = rng.standard_normal(gyro.shape)
    accel_noise = rng.standard_normal(accel.shape)
    gyro += spec.gyro_bias * dt + spec.gyro_arw * sq * gyro_noise
    accel += spec.accel_bias * dt + spec.accel_vrw * sq * accel_noise
    return gyro, accel


def inject_errors(batch: ImuBatch, spec: SensorSpec) -> ImuBatch:
    """Sensor errors applied to a single increment batch."""
    if batch.kind != "increments":
        raise ValueError("error injection expects an increments batch")
    gyro, accel = corrupt_increments(batch.gyro, batch.accel, batch.dt, spec)
    return replace(batch, gyro=gyro, accel=accel)


DATASET_HEADER = "t,dtheta_x,dtheta_y,dtheta_z,dv_x,dv_y,dv_z"


def save_increments(path: str | Path, t_end: ArrayLike, gyro: ArrayLike, accel: ArrayLike) -> None:
    """Write the columnar text dataset: one row per sample, ``t`` at sample end."""
    data = np.column_stack([np.asarray(t_end, dtype=float), np.asarray(gyro), np.asarray(accel)])
    path = Path(path)
    try:
        np.savetxt(path, data, delimiter=",", header=DATASET_HEADER, comments="", fmt="%.17g")
    except OSError as exc:
        raise OSError(f"cannot write dataset {path}: {exc}") from exc


def load_increments(path: str | Path) -> tuple[NDArray, NDArray, NDArray]:
    """Read a dataset written by :func:`save_increments` as ``(t, gyro, accel)``."""
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip()
    if header != DATASET_HEADER:
        raise ValueError(f"{path}: unexpected header {header!r}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 7:
        raise ValueError(f"{path}: expected 7 columns, found {data.shape[1]}")
    return data[:, 0], data[:, 1:4], data[:, 4:7]
