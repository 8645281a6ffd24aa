"""Sample-matrix-inversion MVDR baselines."""

import numpy as np


def noise_floor(Rhat):
    """Smallest eigenvalue of the sample covariance, used as a noise-power estimate."""
    return float(np.linalg.eigvalsh(0.5 * (Rhat + np.conj(Rhat).T))[0])


def mvdr_smi(Rhat, d0, loading=0.0):
    """w proportional to (Rhat + loading I)^{-1} d0, scaled so that w^H d0 = 1."""
    if loading < 0:
        raise ValueError("loading must be non-negative")
    N = len(d0)
    R = np.asarray(Rhat, dtype=complex) + loading * np.eye(N)
    if np.linalg.cond(R) > 1e14:
        raise ValueError("loaded sample covariance is singular")
    x = np.linalg.solve(R, d0)
    return x / np.vdot(d0, x)
