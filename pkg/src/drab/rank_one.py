"""Rank-one certificate and the penalty iteration that drives W to rank one."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .dro_builders import (DualVariables, FormulationKind, build_penalty_problem,
                           build_relaxation, penalty_value, qmi_violation)
from .hermitian_conic import DEFAULT_TOL, solve

DEFAULT_ALPHA = 1e3
DEFAULT_ETA = 1e-6
DEFAULT_MAX_ITER = 50
EIGEN_RATIO_FLAG = 1e-3


def _eigh(W):
    return np.linalg.eigh(0.5 * (W + np.conj(W).T))


def rank_gap(W):
    """tr(W) - ||W||_F; zero exactly when the PSD matrix W has rank at most one."""
    W = np.asarray(W)
    return float(np.real(np.trace(W)) - np.linalg.norm(W, "fro"))


def eigen_ratio(W):
    vals = _eigh(np.asarray(W))[0]
    if vals[-1] <= 0:
        return float("nan")
    return float(max(vals[-2], 0.0) / vals[-1]) if vals.size > 1 else 0.0


def extract_w(W):
    """Principal-eigenpair factor w with W ~ w w^H.

    The phase is fixed so that the largest-modulus entry of w is real positive.
    """
    W = np.asarray(W, dtype=complex)
    vals, vecs = _eigh(W)
    lam = vals[-1]
    if not lam > 0:
        raise ValueError("W has no positive eigenvalue")
    w = np.sqrt(lam) * vecs[:, -1]
    k = int(np.argmax(np.abs(w)))
    w = w * (np.abs(w[k]) / w[k])
    w[k] = w[k].real
    return w


@dataclass
class RankOneDiagnostics:
    relaxation_value: float = float("nan")
    objective_sequence: list = field(default_factory=list)
    penalty_sequence: list = field(default_factory=list)
    iterations: int = 0
    final_rank_gap: float = float("nan")
    eigen_ratio: float = float("nan")
    flagged: bool = False
    solve_seconds: float = 0.0
    qmi_violation: float = float("nan")

    def to_dict(self):
        return asdict(self)


@dataclass
class BeamformerResult:
    w: np.ndarray
    W: np.ndarray
    diagnostics: RankOneDiagnostics
    formulation: FormulationKind
    duals: DualVariables = field(default=None, repr=False)

    def to_dict(self):
        return {"w": {"re": self.w.real.tolist(), "im": self.w.imag.tolist()},
                "formulation": self.formulation.to_dict(),
                "diagnostics": self.diagnostics.to_dict()}


class RankOneError(RuntimeError):
    def __init__(self, message, diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class SolverError(RankOneError):
    """The conic solver did not return an optimum at some iterate."""


class MaxIterationsError(RankOneError):
    """The stopping rule did not trigger within ``max_iter`` penalty solves."""


def _solve_or_raise(problem, tol, diag, stage, backend):
    sol = solve(problem, tol=tol, backend=backend)
    diag.solve_seconds += sol.solve_seconds
    if not sol.optimal:
        raise SolverError(f"{stage}: solver returned {sol.status.value} ({sol.raw_status})", diag)
    return sol


def algorithm1(formulation: FormulationKind, inc_params, steer_params, alpha=DEFAULT_ALPHA,
               eta=DEFAULT_ETA, max_iter=DEFAULT_MAX_ITER, tol=DEFAULT_TOL, backend="auto"):
    """Solve the relaxation, then re-solve with the linearized rank penalty until rank one.

    Each penalty round k minimizes the relaxation objective plus
    alpha * (tr W - tr(W W_k) / ||W_k||_F); it stops once that penalty,
    evaluated at the new iterate, is at most ``eta``.

    Raises:
        SolverError: a solve did not reach optimality; carries partial diagnostics.
        MaxIterationsError: the stopping rule did not trigger in ``max_iter`` rounds.
    """
    if not alpha > 0 or not eta > 0:
        raise ValueError("alpha and eta must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    t0 = time.perf_counter()
    diag = RankOneDiagnostics()
    base = build_relaxation(formulation, inc_params, steer_params)
    sol = _solve_or_raise(base, tol, diag, "relaxation", backend)
    diag.relaxation_value = sol.objective_value
    W = base.value("W", sol.x)
    gap = rank_gap(W)

    if gap > eta:
        for k in range(max_iter):
            problem = build_penalty_problem(base, W, alpha)
            sol = _solve_or_raise(problem, tol, diag, f"penalty round {k + 1}", backend)
            W_next = base.value("W", sol.x)
            step = penalty_value(W_next, W)
            diag.objective_sequence.append(sol.objective_value)
            diag.penalty_sequence.append(step)
            diag.iterations = k + 1
            W = W_next
            if step <= eta:
                break
        else:
            diag.final_rank_gap = rank_gap(W)
            diag.eigen_ratio = eigen_ratio(W)
            raise MaxIterationsError(f"no rank-one solution after {max_iter} rounds", diag)

    duals = DualVariables.from_solution(base, sol.x)
    w = extract_w(W)
    diag.final_rank_gap = rank_gap(W)
    diag.eigen_ratio = eigen_ratio(W)
    diag.flagged = bool(diag.eigen_ratio > EIGEN_RATIO_FLAG)
    diag.qmi_violation = qmi_violation(steer_params, duals, w)
    diag.solve_seconds = time.perf_counter() - t0
    return BeamformerResult(w=w, W=W, diagnostics=diag, formulation=formulation, duals=duals)
