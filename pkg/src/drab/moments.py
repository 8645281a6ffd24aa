"""Steering-vector moments and uncertainty-set parameter records."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .array_model import steering_matrix

FROBENIUS_BALL = "frobenius_ball"
TRACE_BALL = "trace_ball"
NORM_SHELL = "norm_shell"
UNBOUNDED = "unbounded"


def _herm(M):
    M = np.asarray(M, dtype=complex)
    return 0.5 * (M + M.conj().T)


def _min_eig(M):
    return float(np.linalg.eigvalsh(_herm(M))[0])


@dataclass(frozen=True)
class D1Params:
    """INC set: mean within ``rho1`` (Frobenius) of ``S0``; support radius ``rho2``."""

    rho1: float
    rho2: float
    S0: np.ndarray
    support_kind: str = FROBENIUS_BALL

    def __post_init__(self):
        if self.rho1 < 0 or not self.rho2 > 0:
            raise ValueError("need rho1 >= 0 and rho2 > 0")
        if self.support_kind not in (FROBENIUS_BALL, TRACE_BALL):
            raise ValueError(f"unknown support kind {self.support_kind!r}")
        S0 = np.asarray(self.S0, dtype=complex)
        if _min_eig(S0) < -1e-9 * max(1.0, np.abs(S0).max()):
            raise ValueError("S0 must be Hermitian PSD")
        object.__setattr__(self, "S0", S0)

    @property
    def N(self):
        return self.S0.shape[0]


@dataclass(frozen=True)
class D1PrimeParams:
    """INC set with (1 -/+ rho1)(S0 + eps I) Loewner bounds on the mean."""

    rho1: float
    eps: float
    S0: np.ndarray
    rho2: float
    support_kind: str = FROBENIUS_BALL

    def __post_init__(self):
        if not 0 <= self.rho1 < 1:
            raise ValueError("rho1 must lie in [0, 1)")
        if not self.eps > 0 or not self.rho2 > 0:
            raise ValueError("need eps > 0 and rho2 > 0")
        S0 = np.asarray(self.S0, dtype=complex)
        if _min_eig(S0 + self.eps * np.eye(S0.shape[0])) <= 0:
            raise ValueError("S0 + eps I must be positive definite")
        object.__setattr__(self, "S0", S0)

    @property
    def N(self):
        return self.S0.shape[0]


@dataclass(frozen=True)
class D2Params:
    """Steering-vector set with mean ball radius ``gamma1`` and second-moment bound."""

    gamma1: float
    gamma2: float
    a0: np.ndarray
    Sigma: np.ndarray
    Delta: float = 0.1
    support_kind: str = NORM_SHELL

    def __post_init__(self):
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ValueError("gamma1 and gamma2 must be non-negative")
        if not 0 < self.Delta < 1:
            raise ValueError("Delta must lie in (0, 1)")
        if self.support_kind not in (NORM_SHELL, UNBOUNDED):
            raise ValueError(f"unknown support kind {self.support_kind!r}")
        Sigma = np.asarray(self.Sigma, dtype=complex)
        if _min_eig(Sigma) <= 0:
            raise ValueError("Sigma must be positive definite")
        object.__setattr__(self, "Sigma", Sigma)
        object.__setattr__(self, "a0", np.asarray(self.a0, dtype=complex))

    @property
    def N(self):
        return self.a0.size

    @property
    def second_moment_bound(self):
        return (1 + self.gamma2) * self.Sigma + np.outer(self.a0, self.a0.conj())


@dataclass(frozen=True)
class D2PrimeParams:
    """Ellipsoidal mean set (squared radius ``gamma1``, shape ``Q``) and a
    Frobenius ball of radius ``gamma2`` around ``Sigmabar`` for the centered
    second moment."""

    gamma1: float
    gamma2: float
    abar: np.ndarray
    Sigmabar: np.ndarray
    Q: np.ndarray
    Delta: float = 0.1

    def __post_init__(self):
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ValueError("gamma1 and gamma2 must be non-negative")
        if not 0 < self.Delta < 1:
            raise ValueError("Delta must lie in (0, 1)")
        Q = np.asarray(self.Q, dtype=complex)
        if _min_eig(Q) <= 0:
            raise ValueError("Q must be positive definite")
        Sb = np.asarray(self.Sigmabar, dtype=complex)
        if np.abs(Sb - Sb.conj().T).max() > 1e-10 * max(1.0, np.abs(Sb).max()):
            raise ValueError("Sigmabar must be Hermitian")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "Sigmabar", Sb)
        object.__setattr__(self, "abar", np.asarray(self.abar, dtype=complex))

    @property
    def N(self):
        return self.abar.size


@dataclass(frozen=True)
class D2PPParams(D2PrimeParams):
    """Like :class:`D2PrimeParams` but with the Loewner bound
    E[(a - abar)(a - abar)^H] <= (1 + gamma2) Sigmabar."""

    def __post_init__(self):
        super().__post_init__()
        if _min_eig(self.Sigmabar) <= 0:
            raise ValueError("Sigmabar must be positive definite")


def sector_moments(geometry, sector, L=100, seed=0, loading=None):
    """Empirical mean and covariance of steering vectors over a sector.

    Angles are drawn uniformly from ``sector`` (degrees). ``loading`` is
    added to the covariance diagonal; ``None`` selects 1e-6 tr(Sigma)/N.

    Returns:
        (a0, Sigma)
    """
    if L < 2:
        raise ValueError("L must be >= 2")
    if loading is not None and loading < 0:
        raise ValueError("loading must be non-negative")
    lo, hi = sector
    thetas = np.random.default_rng(seed).uniform(lo, hi, size=L)
    D = steering_matrix(geometry, thetas)
    a0 = D.mean(axis=1)
    C = D - a0[:, None]
    Sigma = _herm(C @ C.conj().T / L)
    N = geometry.n_sensors
    if loading is None:
        loading = 1e-6 * float(np.real(np.trace(Sigma))) / N
    Sigma = Sigma + loading * np.eye(N)
    if _min_eig(Sigma) <= 0:
        raise ValueError("sector covariance is singular; use a positive loading")
    return a0, Sigma


def default_params(S0, a0, Sigma, scenario=None):
    """(D1, D2) records with the default radii used throughout the study."""
    S0 = _herm(S0)
    d1 = D1Params(rho1=1e-3 * np.linalg.norm(S0, "fro"),
                  rho2=1.1 * float(np.real(np.trace(S0))), S0=S0)
    d2 = D2Params(gamma1=0.01 * np.linalg.norm(a0), gamma2=0.1, a0=a0, Sigma=Sigma, Delta=0.1)
    return d1, d2


def random_shape_matrix(N, seed):
    """Q = U U^H + 1e-6 I with U standard complex Gaussian."""
    rng = np.random.default_rng(seed)
    U = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / np.sqrt(2)
    return _herm(U @ U.conj().T) + 1e-6 * np.eye(N)


def default_d2prime(a0, Sigma, Q, Delta=0.1):
    return D2PrimeParams(gamma1=0.01 * np.linalg.norm(a0),
                         gamma2=0.01 * np.linalg.norm(Sigma, "fro"),
                         abar=a0, Sigmabar=Sigma, Q=Q, Delta=Delta)


def default_d2pp(a0, Sigma, Q, Delta=0.1):
    return D2PPParams(gamma1=0.01 * np.linalg.norm(a0), gamma2=0.1,
                      abar=a0, Sigmabar=Sigma, Q=Q, Delta=Delta)


def default_d1prime(S0, Rhat):
    S0 = _herm(S0)
    return D1PrimeParams(rho1=0.1, eps=0.01 * float(np.linalg.eigvalsh(_herm(Rhat))[-1]),
                         S0=S0, rho2=1.1 * float(np.real(np.trace(S0))))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

_RECORDS = {cls.__name__: cls for cls in
            (D1Params, D1PrimeParams, D2Params, D2PrimeParams, D2PPParams)}


def _encode(value):
    if isinstance(value, np.ndarray):
        return {"re": np.real(value).tolist(), "im": np.imag(value).tolist()}
    if isinstance(value, np.generic):
        return value.item()
    return value


def _decode(value):
    if isinstance(value, dict) and set(value) == {"re", "im"}:
        return np.asarray(value["re"], dtype=float) + 1j * np.asarray(value["im"], dtype=float)
    return value


def params_to_dict(params):
    """Plain nested dict (JSON/YAML friendly) describing a parameter record."""
    out = {"type": type(params).__name__}
    for f in fields(params):
        out[f.name] = _encode(getattr(params, f.name))
    return out


def params_from_dict(data):
    data = dict(data)
    cls = _RECORDS[data.pop("type")]
    return cls(**{k: _decode(v) for k, v in data.items()})


__all__ = [
    "D1Params", "D1PrimeParams", "D2Params", "D2PrimeParams", "D2PPParams",
    "sector_moments", "default_params", "default_d1prime", "default_d2prime", "default_d2pp",
    "random_shape_matrix", "params_to_dict", "params_from_dict",
    "FROBENIUS_BALL", "TRACE_BALL", "NORM_SHELL", "UNBOUNDED",
]
