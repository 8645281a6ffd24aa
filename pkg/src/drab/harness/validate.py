"""Quick property suites behind ``drab validate``."""

from __future__ import annotations

import numpy as np

from ..array_model import (ArrayGeometry, ArrayScenario, sample_covariance, synth_snapshots)
from ..dro_builders import (DualVariables, FormulationKind, build_main_relaxation,
                            inc_dual_value, steering_dual_value)
from ..hermitian_conic import herm_embed, herm_vec, solve
from ..moments import default_params, sector_moments
from ..rank_one import algorithm1, rank_gap
from .sampling import sample_feasible_distribution_z1, sample_feasible_distribution_z2


def random_hermitian(rng, N):
    A = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    return 0.5 * (A + A.conj().T)


def random_psd(rng, N, rank):
    G = rng.standard_normal((N, rank)) + 1j * rng.standard_normal((N, rank))
    return G @ G.conj().T


def numerical_rank(W, rel=1e-9):
    vals = np.linalg.eigvalsh(W)
    return int(np.sum(vals > rel * max(vals[-1], 0)))


def check_isometry(trials, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        N = int(rng.integers(1, 13))
        X = random_hermitian(rng, N)
        fro = np.linalg.norm(X, "fro")
        worst = max(worst, abs(np.linalg.norm(herm_vec(X)) - fro) / fro)
        ex = np.linalg.eigvalsh(X)
        ee = np.linalg.eigvalsh(herm_embed(X))
        worst = max(worst, np.max(np.abs(np.repeat(ex, 2) - ee)) / max(1.0, np.abs(ex).max()))
    return worst <= 1e-12, f"worst relative error {worst:.2e}"


def check_rank_certificate(trials, seed=0):
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(trials):
        N = int(rng.integers(2, 13))
        r = int(rng.integers(1, N + 1))
        W = random_psd(rng, N, r)
        W /= np.linalg.norm(W, "fro")
        gap = rank_gap(W)
        if gap < -1e-10 or (gap <= 1e-10) != (numerical_rank(W) == 1):
            bad += 1
    return bad == 0, f"{bad} mismatches in {trials}"


def weak_duality_instance(seed=0, N=5):
    geo = ArrayGeometry(N)
    sc = ArrayScenario(geo, 5.0, 1.0, (0.0, 10.0), ((-5.0, 30.0), (15.0, 30.0)), snr_db=0.0,
                       phase_distortion_std=0.02)
    R = sample_covariance(synth_snapshots(sc, 100, seed))
    a0, Sigma = sector_moments(geo, sc.sector_deg)
    return default_params(R, a0, Sigma)


def weak_duality_gaps(d1, d2, count, seed=0):
    """(max objective-side excess, min constraint-side slack, min sampled expectation)."""
    problem = build_main_relaxation(d1, d2)
    sol = solve(problem)
    if not sol.optimal:
        raise RuntimeError(f"relaxation not solved: {sol.status.value}")
    v = DualVariables.from_solution(problem, sol.x)
    upper = inc_dual_value(d1, v)
    lower = steering_dual_value(d2, v)
    z1 = sample_feasible_distribution_z1(d1, count, seed)
    z2 = sample_feasible_distribution_z2(d2, count, seed + 1)
    e1 = [d.expect(lambda R: np.real(np.trace(R @ v.W))) for d in z1]
    e2 = [d.expect(lambda a: np.real(np.vdot(a, v.W @ a))) for d in z2]
    return max(e1) - upper, min(e2) - lower, min(e2)


def check_weak_duality(count, seed=0):
    d1, d2 = weak_duality_instance(seed)
    over, slack, low = weak_duality_gaps(d1, d2, count, seed)
    ok = over <= 1e-6 and slack >= -1e-6 and low >= 1 - 1e-6
    return ok, f"objective excess {over:.2e}, constraint slack {slack:.2e}"


def check_algorithm(scenarios, seed=0):
    geo = ArrayGeometry(10)
    bad = []
    for k in range(scenarios):
        sc = ArrayScenario(geo, 5.0, 1.0, (0.0, 10.0), ((-5.0, 30.0), (15.0, 30.0)),
                           snr_db=0.0, phase_distortion_std=0.02)
        R = sample_covariance(synth_snapshots(sc, 100, seed + k))
        a0, Sigma = sector_moments(geo, sc.sector_deg)
        d1, d2 = default_params(R, a0, Sigma)
        diag = algorithm1(FormulationKind(), d1, d2).diagnostics
        v = diag.objective_sequence
        mono = all(b <= a + 1e-6 * max(1.0, abs(a)) for a, b in zip(v, v[1:]))
        if not (mono and min(diag.penalty_sequence, default=0.0) >= -1e-9
                and diag.eigen_ratio <= 1e-3 and diag.qmi_violation <= 1e-6):
            bad.append(k)
    return not bad, f"{scenarios - len(bad)}/{scenarios} scenarios pass"


SUITES = {
    "isometry": lambda quick: check_isometry(100 if quick else 1000),
    "rank_certificate": lambda quick: check_rank_certificate(100 if quick else 1000),
    "weak_duality": lambda quick: check_weak_duality(20 if quick else 100),
    "algorithm": lambda quick: check_algorithm(2 if quick else 10),
}


def run_suites(quick=True):
    results = []
    for name, fn in SUITES.items():
        try:
            ok, detail = fn(quick)
        except Exception as exc:  # a crashing suite is a failing suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))
    return results
