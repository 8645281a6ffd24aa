"""LMI relaxations of the distributionally robust beamforming problems.

Each builder returns a :class:`~drab.hermitian_conic.ConicProblemIR` in which
the rank-one term w w^H has been replaced by a PSD variable ``W``. Variable
names in the IR:

    W      relaxation of w w^H (PSD)
    X      multiplier of the INC mean-similarity constraint
    Xp     second INC multiplier, only for the Loewner-bounded INC set (PSD)
    Z      multiplier of the second-moment constraint
    xv     complex vector multiplier of the mean constraint
    x0     scalar multiplier of the normalization constraint
    tau1   shell multiplier for ||a||^2 <= (1 + Delta) N   (<= 0)
    tau2   shell multiplier for ||a||^2 >= (1 - Delta) N   (<= 0)
    t_*    epigraph scalars of norm / largest-eigenvalue terms

``x0`` and ``xv`` are the scalar and vector multipliers that share one
symbol in the derivation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .hermitian_conic import Affine, ProblemBuilder, bordered, herm_vec
from .moments import (FROBENIUS_BALL, NORM_SHELL, TRACE_BALL, UNBOUNDED, D1Params,
                      D1PrimeParams, D2Params, D2PPParams, D2PrimeParams)


class Formulation(str, enum.Enum):
    MAIN = "main_d1_d2"
    D2_PRIME = "alt_d2_prime"
    D2_PP = "alt_d2_pp"
    D1_PRIME = "alt_d1_prime"


@dataclass(frozen=True)
class FormulationKind:
    kind: Formulation = Formulation.MAIN
    d1_support: str = FROBENIUS_BALL
    z2_support: str = NORM_SHELL

    def __post_init__(self):
        object.__setattr__(self, "kind", Formulation(self.kind))
        if self.d1_support not in (FROBENIUS_BALL, TRACE_BALL):
            raise ValueError(f"unknown INC support {self.d1_support!r}")
        if self.z2_support not in (NORM_SHELL, UNBOUNDED):
            raise ValueError(f"unknown steering support {self.z2_support!r}")
        if self.kind is Formulation.D1_PRIME and self.d1_support != FROBENIUS_BALL:
            raise ValueError("the Loewner-bounded INC set is built with the Frobenius-norm term")
        if self.kind in (Formulation.D2_PRIME, Formulation.D2_PP) and self.z2_support != NORM_SHELL:
            raise ValueError("the ellipsoidal steering sets are built on the norm shell")

    def to_dict(self):
        return {"kind": self.kind.value, "d1_support": self.d1_support,
                "z2_support": self.z2_support}


@dataclass
class DualVariables:
    W: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    xv: np.ndarray
    x0: float
    tau1: float = 0.0
    tau2: float = 0.0
    Xp: np.ndarray = None
    epigraphs: dict = None

    @classmethod
    def from_solution(cls, problem, x):
        vals = problem.decode(x)
        epi = {k: v for k, v in vals.items() if k.startswith("t_")}
        return cls(W=vals["W"], X=vals["X"], Z=vals["Z"], xv=vals["xv"], x0=vals["x0"],
                   tau1=vals.get("tau1", 0.0), tau2=vals.get("tau2", 0.0),
                   Xp=vals.get("Xp"), epigraphs=epi)


def _check_dims(*arrays):
    sizes = {np.asarray(a).shape[0] for a in arrays}
    if len(sizes) != 1:
        raise ValueError(f"dimension mismatch between parameter records: {sorted(sizes)}")
    return sizes.pop()


def _shell_shift(N, Delta, tau1, tau2):
    """Top-left and corner contributions of tau1*[I, 0; 0, -(1+D)N] + tau2*[-I, 0; 0, (1-D)N]."""
    top = (tau1 - tau2) * np.eye(N)
    corner = tau1 * (-(1 + Delta) * N) + tau2 * ((1 - Delta) * N)
    return top, corner


def _shell_multipliers(b, N, Delta, support):
    if support == UNBOUNDED:
        zero = Affine.constant(0.0)
        return zero, zero
    tau1 = b.real("tau1")
    tau2 = b.real("tau2")
    b.add_nonneg(-tau1, "tau1<=0")
    b.add_nonneg(-tau2, "tau2<=0")
    return tau1, tau2


def _inc_objective(b, W, X, d1):
    """rho1 ||X||_F + delta_Z1(W + X) - tr(X S0)."""
    t_x = b.frob_epigraph("t_X", X)
    if d1.support_kind == TRACE_BALL:
        t_s = b.lambda_max_epigraph("t_lmax", W + X)
    else:
        t_s = b.frob_epigraph("t_WX", W + X)
    return d1.rho1 * t_x + d1.rho2 * t_s - X.inner(d1.S0)


def _d2_block(b, W, d2):
    """Normalization constraint and S-procedure LMI for the moment set D2."""
    N = d2.N
    Z = b.herm("Z", N)
    xv = b.cvec("xv", N)
    x0 = b.real("x0")
    tau1, tau2 = _shell_multipliers(b, N, d2.Delta, d2.support_kind)
    b.add_psd(Z, "Z>=0")
    t_xv = b.norm_epigraph("t_xv", xv)
    M = d2.second_moment_bound
    b.add_nonneg(x0 + xv.vdot(d2.a0) - d2.gamma1 * t_xv - Z.inner(M) - 1.0, "normalization")
    top, corner = _shell_shift(N, d2.Delta, tau1, tau2)
    lmi = bordered(W + Z - top, -0.5 * xv, -x0 - corner)
    b.add_psd(lmi, "S-procedure LMI")
    return Z


def build_main_relaxation(d1: D1Params, d2: D2Params) -> "ConicProblemIR":
    """Relaxation with the INC set D1 and the moment set D2."""
    N = _check_dims(d1.S0, d2.a0, d2.Sigma)
    b = ProblemBuilder()
    W = b.herm("W", N)
    X = b.herm("X", N)
    b.add_psd(W, "W>=0")
    _d2_block(b, W, d2)
    b.minimize(_inc_objective(b, W, X, d1))
    return b.build({"formulation": Formulation.MAIN.value, "N": N})


def _ellipsoid_block(b, W, d2p, psd_Z):
    N = d2p.N
    Z = b.herm("Z", N)
    xv = b.cvec("xv", N)
    x0 = b.real("x0")
    tau1, tau2 = _shell_multipliers(b, N, d2p.Delta, NORM_SHELL)
    Q_half = _psd_sqrt(d2p.Q)
    t_q = b.norm_epigraph("t_Qxv", _matvec(Q_half, xv))
    abar = d2p.abar
    centered = d2p.Sigmabar - np.outer(abar, abar.conj())
    lhs = -x0 + 2 * xv.vdot(abar) - Z.inner(centered) - 1.0 - 2 * np.sqrt(d2p.gamma1) * t_q
    if psd_Z:
        b.add_psd(Z, "Z>=0")
        lhs = lhs - d2p.gamma2 * Z.inner(d2p.Sigmabar)
    else:
        t_z = b.frob_epigraph("t_Z", Z)
        lhs = lhs - d2p.gamma2 * t_z
    b.add_nonneg(lhs, "normalization")
    top, corner = _shell_shift(N, d2p.Delta, tau1, tau2)
    lmi = bordered(W + Z - top, -_z_times(Z, abar) - xv, x0 - corner)
    b.add_psd(lmi, "S-procedure LMI")
    return Z


def _matvec(M, v):
    """Constant matrix times vector expression."""
    return Affine(v.coef @ np.asarray(M).T, np.asarray(M) @ v.const)


def _z_times(Z, a):
    """Matrix expression times constant vector."""
    return Affine(Z.coef @ a, Z.const @ a)


def _psd_sqrt(Q):
    vals, vecs = np.linalg.eigh(0.5 * (Q + Q.conj().T))
    if vals[0] <= 0:
        raise ValueError("Q must be positive definite")
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def build_d2prime_relaxation(d1: D1Params, d2p: D2PrimeParams):
    """Relaxation with D1 and the ellipsoid/Frobenius-ball steering set; Z is sign-free."""
    N = _check_dims(d1.S0, d2p.abar, d2p.Q)
    b = ProblemBuilder()
    W = b.herm("W", N)
    X = b.herm("X", N)
    b.add_psd(W, "W>=0")
    _ellipsoid_block(b, W, d2p, psd_Z=False)
    b.minimize(_inc_objective(b, W, X, d1))
    return b.build({"formulation": Formulation.D2_PRIME.value, "N": N})


def build_d2pp_relaxation(d1: D1Params, d2pp: D2PPParams):
    """Relaxation with D1 and the ellipsoid/Loewner-bound steering set; Z is PSD."""
    N = _check_dims(d1.S0, d2pp.abar, d2pp.Q)
    b = ProblemBuilder()
    W = b.herm("W", N)
    X = b.herm("X", N)
    b.add_psd(W, "W>=0")
    _ellipsoid_block(b, W, d2pp, psd_Z=True)
    b.minimize(_inc_objective(b, W, X, d1))
    return b.build({"formulation": Formulation.D2_PP.value, "N": N})


def build_d1prime_relaxation(d1p: D1PrimeParams, d2: D2Params):
    """Relaxation with the Loewner-bounded INC set and D2."""
    N = _check_dims(d1p.S0, d2.a0, d2.Sigma)
    b = ProblemBuilder()
    W = b.herm("W", N)
    X = b.herm("X", N)
    Xp = b.herm("Xp", N)
    b.add_psd(W, "W>=0")
    b.add_psd(X, "X>=0")
    b.add_psd(Xp, "Xp>=0")
    _d2_block(b, W, d2)
    S_loaded = d1p.S0 + d1p.eps * np.eye(N)
    t = b.frob_epigraph("t_WXXp", W + X - Xp)
    b.minimize(d1p.rho2 * t + (1 + d1p.rho1) * Xp.inner(S_loaded)
               - (1 - d1p.rho1) * X.inner(S_loaded))
    return b.build({"formulation": Formulation.D1_PRIME.value, "N": N})


def build_relaxation(formulation: FormulationKind, inc_params, steer_params):
    """Dispatch on the formulation; support kinds of the records follow ``formulation``."""
    kind = formulation.kind
    if kind is Formulation.MAIN:
        return build_main_relaxation(replace(inc_params, support_kind=formulation.d1_support),
                                     replace(steer_params, support_kind=formulation.z2_support))
    if kind is Formulation.D2_PRIME:
        return build_d2prime_relaxation(replace(inc_params, support_kind=formulation.d1_support),
                                        steer_params)
    if kind is Formulation.D2_PP:
        return build_d2pp_relaxation(replace(inc_params, support_kind=formulation.d1_support),
                                     steer_params)
    return build_d1prime_relaxation(inc_params,
                                    replace(steer_params, support_kind=formulation.z2_support))


def build_penalty_problem(base, W_k, alpha):
    """Add alpha * (tr(W) - tr(W W_k) / ||W_k||_F) to the objective of ``base``."""
    W_k = np.asarray(W_k)
    norm = np.linalg.norm(W_k, "fro")
    if norm == 0:
        raise ValueError("W_k must be nonzero")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    info = base.variables["W"]
    N = info.dim
    c = base.c.copy()
    c[info.slice] += alpha * (herm_vec(np.eye(N)) - herm_vec(0.5 * (W_k + W_k.conj().T)) / norm)
    return base.with_objective(c)


def penalty_value(W, W_k):
    """tr(W) - tr(W W_k) / ||W_k||_F."""
    return float(np.real(np.trace(W)) - np.real(np.vdot(W_k, W)) / np.linalg.norm(W_k, "fro"))


# ---------------------------------------------------------------------------
# support functions and dual values (diagnostics / weak-duality checks)
# ---------------------------------------------------------------------------

def support_value_frobenius(A, rho2):
    return float(rho2 * np.linalg.norm(A, "fro"))


def support_value_trace(A, rho2):
    # no clamping at zero: the zero matrix is feasible, so for A with only
    # negative eigenvalues this undercuts the true support value
    return float(rho2 * np.linalg.eigvalsh(0.5 * (A + np.conj(A).T))[-1])


def inc_dual_value(d1, v: DualVariables):
    """Upper bound on max E[tr(R W)] over the INC set, evaluated at (W, X)."""
    if isinstance(d1, D1PrimeParams):
        S = d1.S0 + d1.eps * np.eye(d1.N)
        A = v.W + v.X - v.Xp
        return (support_value_frobenius(A, d1.rho2)
                + float(np.real(np.trace(((1 + d1.rho1) * v.Xp - (1 - d1.rho1) * v.X) @ S))))
    A = v.W + v.X
    support = (support_value_trace(A, d1.rho2) if d1.support_kind == TRACE_BALL
               else support_value_frobenius(A, d1.rho2))
    return (d1.rho1 * np.linalg.norm(v.X, "fro") + support
            - float(np.real(np.trace(v.X @ d1.S0))))


def steering_dual_value(d2, v: DualVariables):
    """Lower bound on min E[a^H W a] over the steering set, at the multipliers in ``v``."""
    if isinstance(d2, D2Params):
        return float(v.x0 + np.real(np.vdot(d2.a0, v.xv)) - d2.gamma1 * np.linalg.norm(v.xv)
                     - np.real(np.trace(v.Z @ d2.second_moment_bound)))
    abar = d2.abar
    Q_half = _psd_sqrt(d2.Q)
    value = (-v.x0 + 2 * np.real(np.vdot(abar, v.xv))
             - np.real(np.trace(v.Z @ (d2.Sigmabar - np.outer(abar, abar.conj()))))
             - 2 * np.sqrt(d2.gamma1) * np.linalg.norm(Q_half @ v.xv))
    if isinstance(d2, D2PPParams):
        value -= d2.gamma2 * np.real(np.trace(d2.Sigmabar @ v.Z))
    else:
        value -= d2.gamma2 * np.linalg.norm(v.Z, "fro")
    return float(value)


def lmi_matrix(steer_params, v: DualVariables, W=None):
    """The S-procedure matrix (left side minus shell terms) with W optionally replaced."""
    W = v.W if W is None else W
    N = W.shape[0]
    if isinstance(steer_params, D2Params):
        Delta = steer_params.Delta
        shell = steer_params.support_kind == NORM_SHELL
        tau1, tau2 = (v.tau1, v.tau2) if shell else (0.0, 0.0)
        top, corner = _shell_shift(N, Delta, tau1, tau2)
        M = np.zeros((N + 1, N + 1), dtype=complex)
        M[:N, :N] = W + v.Z - top
        M[:N, N] = -0.5 * v.xv
        M[N, :N] = -0.5 * v.xv.conj()
        M[N, N] = -v.x0 - corner
        return M
    top, corner = _shell_shift(N, steer_params.Delta, v.tau1, v.tau2)
    col = -v.Z @ steer_params.abar - v.xv
    M = np.zeros((N + 1, N + 1), dtype=complex)
    M[:N, :N] = W + v.Z - top
    M[:N, N] = col
    M[N, :N] = col.conj()
    M[N, N] = v.x0 - corner
    return M


def qmi_violation(steer_params, v: DualVariables, w):
    """Largest violation of the non-relaxed constraints with W = w w^H.

    The INC-side variables do not enter any constraint coupling W except
    through the objective, so feasibility reduces to the steering block
    (plus PSD-ness of Z where required).
    """
    W = np.outer(w, np.conj(w))
    M = lmi_matrix(steer_params, v, W)
    viol = [max(0.0, -np.linalg.eigvalsh(0.5 * (M + M.conj().T))[0]),
            max(0.0, 1.0 - steering_dual_value(steer_params, v)),
            max(0.0, v.tau1), max(0.0, v.tau2)]
    if not (isinstance(steer_params, D2PrimeParams) and not isinstance(steer_params, D2PPParams)):
        viol.append(max(0.0, -np.linalg.eigvalsh(0.5 * (v.Z + v.Z.conj().T))[0]))
    return float(max(viol))
