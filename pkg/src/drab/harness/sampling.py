"""Discrete distributions inside the moment sets, used by the weak-duality checks.

Every sampler filters its output through the matching membership checker,
so a returned distribution is feasible by construction and by test.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..moments import NORM_SHELL, TRACE_BALL, D1Params, D2Params

CHECK_TOL = 1e-9


@dataclass(frozen=True)
class DiscreteDistribution:
    atoms: tuple
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(self.atoms) != w.size or w.size == 0:
            raise ValueError("need one weight per atom")
        object.__setattr__(self, "weights", w)

    def mean(self):
        return sum(p * np.asarray(a) for p, a in zip(self.weights, self.atoms))

    def second_moment(self):
        return sum(p * np.outer(a, np.conj(a)) for p, a in zip(self.weights, self.atoms))

    def expect(self, fn):
        return float(sum(p * fn(a) for p, a in zip(self.weights, self.atoms)))


def mixture(dists, weights):
    atoms, ws = [], []
    for d, q in zip(dists, weights):
        atoms.extend(d.atoms)
        ws.extend(q * d.weights)
    return DiscreteDistribution(tuple(atoms), np.asarray(ws))


def _herm(M):
    return 0.5 * (M + np.conj(M).T)


def _weights_ok(dist, tol):
    w = dist.weights
    return bool(np.all(w >= -tol) and abs(w.sum() - 1) <= tol)


def _in_z1(d1, R, tol):
    if np.linalg.eigvalsh(_herm(R))[0] < -tol:
        return False
    size = np.real(np.trace(R)) if d1.support_kind == TRACE_BALL else np.linalg.norm(R, "fro")
    return bool(size <= d1.rho2 * (1 + tol))


def check_z1(d1: D1Params, dist: DiscreteDistribution, tol=CHECK_TOL):
    """True when every atom lies in the INC support set and the mean constraints hold."""
    scale = max(1.0, np.linalg.norm(d1.S0, "fro"))
    if not _weights_ok(dist, tol):
        return False
    if not all(_in_z1(d1, R, tol * scale) for R in dist.atoms):
        return False
    M = dist.mean()
    return bool(np.linalg.norm(M - d1.S0, "fro") <= d1.rho1 + tol * scale
                and np.linalg.eigvalsh(_herm(M))[0] >= -tol * scale)


def _in_shell(d2, a, tol):
    if d2.support_kind != NORM_SHELL:
        return True
    N, n2 = d2.N, np.vdot(a, a).real
    return bool((1 - d2.Delta) * N * (1 - tol) <= n2 <= (1 + d2.Delta) * N * (1 + tol))


def check_z2(d2: D2Params, dist: DiscreteDistribution, tol=CHECK_TOL):
    """True when every atom is on the norm shell and both moment constraints hold."""
    if not _weights_ok(dist, tol):
        return False
    if not all(_in_shell(d2, a, tol) for a in dist.atoms):
        return False
    scale = max(1.0, d2.N)
    if np.linalg.norm(dist.mean() - d2.a0) > d2.gamma1 + tol * scale:
        return False
    gap = _herm(dist.second_moment() - d2.second_moment_bound)
    return bool(np.linalg.eigvalsh(gap)[-1] <= tol * scale)


def _random_herm(rng, N):
    A = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    H = _herm(A)
    return H / np.linalg.norm(H, "fro")


def _psd_project(M):
    vals, vecs = np.linalg.eigh(_herm(M))
    return _herm((vecs * np.clip(vals, 0, None)) @ vecs.conj().T)


def _max_step(d1, M, H):
    """Largest t with M +/- t H inside the support set (M assumed inside)."""
    lo, hi = 0.0, 1.0
    while _in_z1(d1, M + hi * H, 0) and _in_z1(d1, M - hi * H, 0) and hi < 1e12:
        lo, hi = hi, 2 * hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _in_z1(d1, M + mid * H, 0) and _in_z1(d1, M - mid * H, 0):
            lo = mid
        else:
            hi = mid
    return lo


def _pair_distribution(d1, rng, mean_radius):
    N = d1.N
    M = _psd_project(d1.S0 + mean_radius * _random_herm(rng, N))
    if not _in_z1(d1, M, 0):
        return None
    k = int(rng.integers(1, 4))
    atoms, weights = [], []
    split = rng.dirichlet(np.ones(k))
    for q in split:
        H = _random_herm(rng, N)
        t = _max_step(d1, M, H) * rng.uniform(0.1, 0.95)
        atoms += [M + t * H, M - t * H]
        weights += [q / 2, q / 2]
    return DiscreteDistribution(tuple(_herm(a) for a in atoms), np.asarray(weights))


def sample_feasible_distribution_z1(d1: D1Params, count, seed):
    """``count`` distributions satisfying the INC moment set; the point mass at S0 comes first
    whenever S0 lies in the support set.

    Raises ValueError if no feasible distribution can be produced.
    """
    rng = np.random.default_rng(seed)
    out = []
    if _in_z1(d1, d1.S0, 0):
        out.append(DiscreteDistribution((d1.S0.copy(),), np.ones(1)))
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > 50 * count + 100:
            raise ValueError("could not sample feasible distributions for these radii")
        if out and rng.random() < 0.25:
            picks = rng.choice(len(out), size=min(len(out), 3), replace=False)
            cand = mixture([out[i] for i in picks], rng.dirichlet(np.ones(len(picks))))
        else:
            cand = _pair_distribution(d1, rng, d1.rho1 * rng.uniform(0, 0.99))
        if cand is not None and check_z1(d1, cand):
            out.append(cand)
    return out[:count]


def _shell_pairs(d2, rng, center):
    """Pairs center +/- v_j along the eigenvectors of Sigma, mean exactly ``center``."""
    N = d2.N
    lam, U = np.linalg.eigh(d2.Sigma)
    c2 = np.vdot(center, center).real
    t_lo = max((1 - d2.Delta) * N - c2, 0.0)
    t_hi = (1 + d2.Delta) * N - c2
    if t_hi <= t_lo:
        return None
    t = rng.uniform(t_lo, t_hi, size=N)
    cap = (1 + d2.gamma2) * lam / t   # keeps p_j t_j <= (1 + gamma2) lambda_j
    if cap.sum() < 1:
        return None
    p = cap * rng.uniform(0.05, 1.0, size=N)
    p = p / p.sum() if p.sum() >= 1 else cap / cap.sum()
    atoms, weights = [], []
    for j in range(N):
        u = U[:, j]
        phase = np.pi / 2 - np.angle(np.vdot(center, u))  # makes Re(center^H v) = 0
        v = np.sqrt(t[j]) * np.exp(1j * phase) * u
        atoms += [center + v, center - v]
        weights += [p[j] / 2, p[j] / 2]
    return DiscreteDistribution(tuple(atoms), np.asarray(weights))


def sample_feasible_distribution_z2(d2: D2Params, count, seed):
    """``count`` distributions satisfying the steering-vector moment set.

    The first entry is the point mass at a0 rescaled onto the shell when
    that happens to be feasible; the rest are mean-preserving pairs around
    shrunken means plus random mixtures.
    """
    rng = np.random.default_rng(seed)
    out = []
    a0 = d2.a0
    n0 = np.linalg.norm(a0)
    if n0 > 0:
        point = DiscreteDistribution((a0 * np.sqrt(d2.N) / n0,), np.ones(1))
        if check_z2(d2, point):
            out.append(point)
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > 50 * count + 100:
            raise ValueError("could not sample feasible distributions for these radii")
        if out and rng.random() < 0.25:
            picks = rng.choice(len(out), size=min(len(out), 3), replace=False)
            cand = mixture([out[i] for i in picks], rng.dirichlet(np.ones(len(picks))))
        else:
            shrink = rng.uniform(0, 0.99) * d2.gamma1 / n0 if n0 > 0 else 0.0
            cand = _shell_pairs(d2, rng, (1 - shrink) * a0)
        if cand is not None and check_z2(d2, cand):
            out.append(cand)
    return out[:count]
