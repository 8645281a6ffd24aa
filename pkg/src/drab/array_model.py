"""Uniform linear array signal model: steering vectors, snapshots, SINR."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ArrayGeometry:
    n_sensors: int
    spacing_wavelengths: float = 0.5

    def __post_init__(self):
        if int(self.n_sensors) != self.n_sensors or self.n_sensors < 2:
            raise ValueError("n_sensors must be an integer >= 2")
        if not self.spacing_wavelengths > 0:
            raise ValueError("spacing_wavelengths must be positive")


@dataclass(frozen=True)
class ArrayScenario:
    """Ground truth for one simulated environment.

    Angles are in degrees (broadside is 0), powers are linear except the
    SNR/INR figures, which are in dB relative to ``noise_power``.
    """

    geometry: ArrayGeometry
    true_doa_deg: float
    presumed_doa_deg: float
    sector_deg: tuple
    interferers: tuple = ()
    noise_power: float = 1.0
    snr_db: float = 0.0
    phase_distortion_std: float = 0.0

    def __post_init__(self):
        lo, hi = self.sector_deg
        if lo > hi:
            raise ValueError("sector_deg must be an increasing interval")
        if not lo <= self.presumed_doa_deg <= hi:
            raise ValueError("presumed DOA lies outside the angular sector")
        if not self.noise_power > 0:
            raise ValueError("noise_power must be positive")
        if self.phase_distortion_std < 0:
            raise ValueError("phase_distortion_std must be non-negative")
        object.__setattr__(self, "sector_deg", (float(lo), float(hi)))
        object.__setattr__(self, "interferers",
                           tuple((float(d), float(p)) for d, p in self.interferers))
        for doa, _ in self.interferers:
            if lo <= doa <= hi:
                warnings.warn(f"interferer at {doa} deg lies inside the sector {self.sector_deg}",
                              stacklevel=2)

    @property
    def signal_power(self):
        return self.noise_power * 10.0 ** (self.snr_db / 10.0)

    @property
    def interferer_powers(self):
        return [self.noise_power * 10.0 ** (inr / 10.0) for _, inr in self.interferers]


@dataclass(frozen=True)
class SnapshotBlock:
    samples: np.ndarray  # (T, N): row t is y(t)
    seed: int
    a_true: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.samples.ndim != 2 or self.samples.shape[0] < 1:
            raise ValueError("a snapshot block needs at least one sample")

    @property
    def T(self):
        return self.samples.shape[0]


def ula_steering(geometry, theta_deg):
    """Steering vector with entries exp(j 2 pi d n sin(theta)), n = 0..N-1."""
    if abs(theta_deg) > 90:
        raise ValueError(f"angle {theta_deg} deg outside [-90, 90]")
    n = np.arange(geometry.n_sensors)
    phase = 2 * np.pi * geometry.spacing_wavelengths * n * np.sin(np.deg2rad(theta_deg))
    return np.exp(1j * phase)


def steering_matrix(geometry, thetas_deg):
    """Columns are ula_steering(theta) for each angle."""
    thetas = np.atleast_1d(np.asarray(thetas_deg, dtype=float))
    if np.any(np.abs(thetas) > 90):
        raise ValueError("angles must lie in [-90, 90]")
    n = np.arange(geometry.n_sensors)[:, None]
    return np.exp(2j * np.pi * geometry.spacing_wavelengths * n * np.sin(np.deg2rad(thetas)))


def distort_steering(a, std, seed):
    """Apply accumulated random phase errors along the array.

    Increments are i.i.d. N(0, std^2); sensor 0 is the phase reference and
    sensor n carries the sum of the first n increments.
    """
    if std < 0:
        raise ValueError("std must be non-negative")
    a = np.asarray(a, dtype=complex)
    if std == 0:
        return a.copy()
    rng = np.random.default_rng(seed)
    increments = rng.normal(0.0, std, size=a.size - 1)
    phase = np.concatenate([[0.0], np.cumsum(increments)])
    return a * np.exp(1j * phase)


def _cgauss(rng, shape, power):
    return np.sqrt(power / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def true_steering(scenario, seed):
    """Distorted actual steering vector of the desired source for one run."""
    a = ula_steering(scenario.geometry, scenario.true_doa_deg)
    return distort_steering(a, scenario.phase_distortion_std, seed)


def synth_snapshots(scenario, T, seed, a_true=None):
    """Draw T snapshots s(t) a_true + sum_k i_k(t) d(theta_k) + n(t).

    All waveforms are independent circular complex Gaussian streams. When
    ``a_true`` is omitted it is drawn from the distortion stream of ``seed``.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    ss = np.random.SeedSequence(seed)
    dist_seed, wave_seed = ss.spawn(2)
    if a_true is None:
        a_true = true_steering(scenario, dist_seed)
    rng = np.random.default_rng(wave_seed)
    N = scenario.geometry.n_sensors
    Y = _cgauss(rng, (T, N), scenario.noise_power)
    if scenario.signal_power > 0:
        Y += np.outer(_cgauss(rng, T, scenario.signal_power), a_true)
    for (doa, _), power in zip(scenario.interferers, scenario.interferer_powers):
        Y += np.outer(_cgauss(rng, T, power), ula_steering(scenario.geometry, doa))
    return SnapshotBlock(Y, seed, np.asarray(a_true))


def sample_covariance(block):
    Y = block.samples if isinstance(block, SnapshotBlock) else np.asarray(block)
    R = Y.T @ Y.conj() / Y.shape[0]
    return 0.5 * (R + R.conj().T)


def true_inc(scenario):
    N = scenario.geometry.n_sensors
    R = scenario.noise_power * np.eye(N, dtype=complex)
    for (doa, _), power in zip(scenario.interferers, scenario.interferer_powers):
        d = ula_steering(scenario.geometry, doa)
        R += power * np.outer(d, d.conj())
    return R


def output_sinr(w, a_true, sigma_s2, R_in):
    """Array output SINR in dB."""
    w = np.asarray(w, dtype=complex)
    if not np.any(w):
        raise ValueError("beamformer weight vector is zero")
    gain = np.abs(np.vdot(w, a_true)) ** 2
    denom = np.real(np.vdot(w, R_in @ w))
    return 10 * np.log10(sigma_s2 * gain / denom)


def optimal_sinr(a_true, sigma_s2, R_in):
    """SINR of w = R_in^{-1} a, i.e. sigma_s^2 a^H R_in^{-1} a, in dB."""
    try:
        x = np.linalg.solve(R_in, a_true)
    except np.linalg.LinAlgError as exc:
        raise ValueError("R_in is singular") from exc
    if np.linalg.cond(R_in) > 1e14:
        raise ValueError("R_in is singular")
    return 10 * np.log10(sigma_s2 * np.real(np.vdot(a_true, x)))
