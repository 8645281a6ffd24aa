"""Interference-plus-noise covariance reconstruction by integrating the Capon spectrum."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad_vec

from .array_model import steering_matrix, ula_steering


@dataclass(frozen=True)
class ReconstructionConfig:
    """Angular grid for the reconstruction.

    ``inversion_loading`` of None means 1e-6 tr(Rhat)/N. ``noise_floor``
    adds lambda_min(Rhat) I so the result is positive definite.

    ``rule`` is "adaptive" (grid cells are panels of an adaptive
    Gauss-Kronrod rule; needed because the spectrum peaks at strong
    interferers are far narrower than any practical grid) or "rectangle"
    (one spectrum sample per grid node).
    """

    excluded_sector_deg: tuple
    grid_step_deg: float = 0.5
    angle_range_deg: tuple = (-90.0, 90.0)
    inversion_loading: float = None
    noise_floor: bool = True
    rule: str = "adaptive"
    rel_tol: float = 1e-9

    def __post_init__(self):
        if self.rule not in ("adaptive", "rectangle"):
            raise ValueError(f"unknown integration rule {self.rule!r}")
        if not self.grid_step_deg > 0:
            raise ValueError("grid_step_deg must be positive")
        lo, hi = self.angle_range_deg
        elo, ehi = self.excluded_sector_deg
        if not -90 <= lo < hi <= 90:
            raise ValueError("angle_range_deg must be an increasing interval inside [-90, 90]")
        if not lo <= elo <= ehi <= hi:
            raise ValueError("excluded sector must lie inside the angle range")
        if self.inversion_loading is not None and self.inversion_loading < 0:
            raise ValueError("inversion_loading must be non-negative")


def integration_grid(cfg):
    """Grid angles (degrees) outside the excluded sector, with a fixed step."""
    lo, hi = cfg.angle_range_deg
    n = int(np.floor((hi - lo) / cfg.grid_step_deg + 1e-9))
    theta = lo + cfg.grid_step_deg * np.arange(n + 1)
    elo, ehi = cfg.excluded_sector_deg
    return theta[(theta < elo) | (theta > ehi)]


def capon_spectrum(Rhat, geometry, theta_deg, loading=0.0):
    """1 / (d^H (Rhat + loading I)^{-1} d) for each angle."""
    N = geometry.n_sensors
    R = np.asarray(Rhat, dtype=complex) + loading * np.eye(N)
    D = steering_matrix(geometry, theta_deg)
    try:
        sol = np.linalg.solve(R, D)
    except np.linalg.LinAlgError as exc:
        raise ValueError("loaded covariance is singular") from exc
    return 1.0 / np.real(np.einsum("ij,ij->j", D.conj(), sol))


def _panels(cfg):
    """Integration intervals (degrees) covering the angle range minus the excluded sector."""
    lo, hi = cfg.angle_range_deg
    elo, ehi = cfg.excluded_sector_deg
    out = []
    for a, b in ((lo, elo), (ehi, hi)):
        if b > a:
            n = max(1, int(np.ceil((b - a) / cfg.grid_step_deg - 1e-9)))
            out.append(np.linspace(a, b, n + 1))
    return out


def _adaptive_integral(Rinv, geometry, cfg):
    N = geometry.n_sensors

    def integrand(theta_deg):
        d = ula_steering(geometry, theta_deg)
        p = 1.0 / np.real(np.vdot(d, Rinv @ d))
        M = p * np.outer(d, d.conj())
        return np.concatenate([M.real.ravel(), M.imag.ravel()])

    total = np.zeros(2 * N * N)
    for nodes in _panels(cfg):
        val, _ = quad_vec(integrand, nodes[0], nodes[-1], epsrel=cfg.rel_tol, epsabs=0.0,
                          points=nodes[1:-1], limit=100000)
        total += val
    total *= np.pi / 180.0  # integrate over radians
    return total[:N * N].reshape(N, N) + 1j * total[N * N:].reshape(N, N)


def capon_reconstruct(Rhat, geometry, cfg: ReconstructionConfig):
    """Integral of P(theta) d(theta) d(theta)^H outside the excluded sector, dtheta in radians.

    P is the Capon spectrum of the loaded ``Rhat``. Raises ValueError when
    the loaded matrix is singular.
    """
    Rhat = 0.5 * (np.asarray(Rhat, dtype=complex) + np.conj(Rhat).T)
    N = geometry.n_sensors
    loading = (1e-6 * float(np.real(np.trace(Rhat))) / N if cfg.inversion_loading is None
               else cfg.inversion_loading)
    loaded = Rhat + loading * np.eye(N)
    if np.linalg.eigvalsh(loaded)[0] <= 0 or np.linalg.cond(loaded) > 1e14:
        raise ValueError("loaded covariance is singular")
    if cfg.rule == "rectangle":
        theta = integration_grid(cfg)
        D = steering_matrix(geometry, theta)
        weights = capon_spectrum(Rhat, geometry, theta, loading) * np.deg2rad(cfg.grid_step_deg)
        R = (D * weights) @ D.conj().T
    else:
        R = _adaptive_integral(np.linalg.inv(loaded), geometry, cfg)
    if cfg.noise_floor:
        R = R + max(float(np.linalg.eigvalsh(Rhat)[0]), 0.0) * np.eye(N)
    return 0.5 * (R + R.conj().T)
