"""Monte Carlo runs and parameter sweeps."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..array_model import (optimal_sinr, output_sinr, sample_covariance, synth_snapshots,
                           true_inc, ula_steering)
from ..dro_builders import Formulation, FormulationKind
from ..inc_reconstruct import ReconstructionConfig, capon_reconstruct
from ..moments import (D1Params, D1PrimeParams, D2Params, D2PPParams, D2PrimeParams,
                       random_shape_matrix, sector_moments)
from ..rank_one import RankOneError, algorithm1
from .baselines import mvdr_smi, noise_floor
from .config import BASELINES

CSV_COLUMNS = ("sweep_name", "sweep_value", "method", "mean_sinr_db", "std_sinr_db", "runs",
               "failures", "mean_iters", "mean_seconds")
OPTIMAL = "optimal"

# stream ids for per-run seeds
STREAM_SNAPSHOTS = 0
STREAM_SHAPE = 1
STREAM_SECTOR = 2


def derived_seed(master_seed, run_index, stream):
    """Integer seed for one (master seed, run, stream) triple via SeedSequence hashing."""
    ss = np.random.SeedSequence([int(master_seed), int(run_index), int(stream)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def formulation_for(config, method):
    if method == "dro":
        return config.formulation
    kind = Formulation(method)
    if kind is Formulation.MAIN:
        return replace(config.formulation, kind=kind)
    if kind is Formulation.D1_PRIME:
        return FormulationKind(kind, z2_support=config.formulation.z2_support)
    return FormulationKind(kind, d1_support=config.formulation.d1_support)


def uncertainty_params(kind, S0, Rhat, a0, Sigma, Q, p):
    """Parameter records for one run from the relative radii in ``p``."""
    S0 = 0.5 * (S0 + S0.conj().T)
    tr = float(np.real(np.trace(S0)))
    if kind is Formulation.D1_PRIME:
        eps = p.eps_rel * float(np.linalg.eigvalsh(0.5 * (Rhat + Rhat.conj().T))[-1])
        inc = D1PrimeParams(rho1=p.d1p_rho1, eps=eps, S0=S0, rho2=p.rho2_rel * tr)
    else:
        inc = D1Params(rho1=p.rho1_rel * np.linalg.norm(S0, "fro"), rho2=p.rho2_rel * tr, S0=S0)
    g1 = p.gamma1_rel * np.linalg.norm(a0)
    if kind is Formulation.D2_PRIME:
        steer = D2PrimeParams(g1, p.gamma2_fro_rel * np.linalg.norm(Sigma, "fro"), a0, Sigma, Q,
                              p.Delta)
    elif kind is Formulation.D2_PP:
        steer = D2PPParams(g1, p.gamma2, a0, Sigma, Q, p.Delta)
    else:
        steer = D2Params(g1, p.gamma2, a0, Sigma, p.Delta)
    return inc, steer


def nominal_inc(config, Rhat):
    sc = config.scenario
    if config.nominal_source == "exact_inc":
        return true_inc(sc)
    if config.nominal_source == "reconstructed_inc":
        cfg = ReconstructionConfig(sc.sector_deg, grid_step_deg=config.grid_step_deg)
        return capon_reconstruct(Rhat, sc.geometry, cfg)
    return Rhat


@dataclass
class RunOutcome:
    run_index: int
    sweep_value: float
    sinr_db: dict = field(default_factory=dict)
    iterations: dict = field(default_factory=dict)
    seconds: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)


def run_once(config, run_index, sweep_value=float("nan")):
    """Evaluate every configured method on one Monte Carlo realization.

    Deterministic in (config.master_seed, run_index). Solver and iteration
    failures are recorded in ``errors`` and as NaN SINR, never raised.
    """
    sc = config.scenario
    geo = sc.geometry
    out = RunOutcome(run_index, sweep_value)
    block = synth_snapshots(sc, config.T, derived_seed(config.master_seed, run_index,
                                                       STREAM_SNAPSHOTS))
    a_true = block.a_true
    R_in = true_inc(sc)
    sigma_s2 = sc.signal_power
    Rhat = sample_covariance(block)
    d0 = ula_steering(geo, sc.presumed_doa_deg)
    out.sinr_db[OPTIMAL] = float(optimal_sinr(a_true, sigma_s2, R_in))

    needs_dro = any(m not in BASELINES for m in config.methods)
    if needs_dro:
        S0 = nominal_inc(config, Rhat)
        a0, Sigma = sector_moments(geo, sc.sector_deg, L=config.parameters.sector_samples,
                                   seed=derived_seed(config.master_seed, 0, STREAM_SECTOR))
        Q = random_shape_matrix(geo.n_sensors, derived_seed(config.master_seed, run_index,
                                                            STREAM_SHAPE))
        if config.parameters.q_loading != 1e-6:
            Q = Q + (config.parameters.q_loading - 1e-6) * np.eye(geo.n_sensors)

    alg = config.algorithm
    for method in config.methods:
        t0 = time.perf_counter()
        try:
            if method == "mvdr_smi":
                w = mvdr_smi(Rhat, d0, 0.0)
                out.iterations[method] = 0
            elif method == "mvdr_dl":
                w = mvdr_smi(Rhat, d0, 10.0 * max(noise_floor(Rhat), 0.0))
                out.iterations[method] = 0
            else:
                kind = formulation_for(config, method)
                inc, steer = uncertainty_params(kind.kind, S0, Rhat, a0, Sigma, Q,
                                                config.parameters)
                res = algorithm1(kind, inc, steer, alpha=alg.alpha, eta=alg.eta,
                                 max_iter=alg.max_iter, tol=alg.tol, backend=alg.backend)
                w = res.w
                out.iterations[method] = res.diagnostics.iterations
                out.diagnostics[method] = res.diagnostics.to_dict()
            out.sinr_db[method] = float(output_sinr(w, a_true, sigma_s2, R_in))
        except (RankOneError, ValueError, np.linalg.LinAlgError) as exc:
            out.sinr_db[method] = float("nan")
            out.errors[method] = f"{type(exc).__name__}: {exc}"
            if isinstance(exc, RankOneError):
                out.diagnostics[method] = exc.diagnostics.to_dict()
        out.seconds[method] = time.perf_counter() - t0
    return out


@dataclass
class SweepRow:
    sweep_name: str
    sweep_value: float
    method: str
    mean_sinr_db: float
    std_sinr_db: float
    runs: int
    failures: int
    mean_iters: float
    mean_seconds: float


@dataclass
class SweepResult:
    rows: list
    outcomes: list
    config: object = None
    timing: bool = False

    def failure_rate(self):
        """Failure fraction over all optimization-based method evaluations."""
        dro = [r for r in self.rows if r.method not in BASELINES and r.method != OPTIMAL]
        total = sum(r.runs for r in dro)
        return sum(r.failures for r in dro) / total if total else 0.0

    def row(self, value, method):
        for r in self.rows:
            if r.method == method and r.sweep_value == value:
                return r
        raise KeyError((value, method))

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.rows:
            writer.writerow([r.sweep_name, _fmt(r.sweep_value), r.method, _fmt(r.mean_sinr_db),
                             _fmt(r.std_sinr_db), r.runs, r.failures, _fmt(r.mean_iters),
                             _fmt(r.mean_seconds)])
        return buf.getvalue()

    def to_json(self):
        runs = []
        for o in self.outcomes:
            entry = {"run_index": o.run_index, "sweep_value": o.sweep_value,
                     "sinr_db": o.sinr_db, "iterations": o.iterations, "errors": o.errors,
                     "diagnostics": {m: {k: v for k, v in d.items()
                                         if self.timing or k != "solve_seconds"}
                                     for m, d in o.diagnostics.items()}}
            if self.timing:
                entry["seconds"] = o.seconds
            runs.append(entry)
        doc = {"config": self.config.to_dict() if self.config is not None else None,
               "columns": list(CSV_COLUMNS),
               "rows": [vars(r) for r in self.rows], "runs": runs}
        return json.dumps(_clean(doc), indent=1, sort_keys=False) + "\n"


def _fmt(x):
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.6f}" if isinstance(x, float) else str(x)


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return None if not math.isfinite(obj) else float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _task(args):
    config, run_index, value = args
    return run_once(config, run_index, value)


def sweep_points(config):
    sw = config.sweep
    if sw.kind == "none":
        return "snr", [config.scenario.snr_db], [config]
    values = sorted(sw.values)
    return sw.label, values, [config.with_value(sw.kind, sw.name, v) for v in values]


def sweep(config, timing=False, progress=None):
    """Run ``config.runs`` realizations at each sweep value and aggregate per method.

    Run i reuses the same seeds at every sweep value. Rows are sorted by sweep
    value, then follow the configured method order with the optimal-SINR
    reference last.
    """
    name, values, configs = sweep_points(config)
    tasks = [(cfg, i, float(v)) for v, cfg in zip(values, configs) for i in range(config.runs)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(_task, tasks, chunksize=1))
    else:
        outcomes = []
        for k, t in enumerate(tasks):
            outcomes.append(_task(t))
            if progress is not None:
                progress(k + 1, len(tasks))

    rows = []
    methods = list(config.methods) + [OPTIMAL]
    for v in values:
        group = [o for o in outcomes if o.sweep_value == float(v)]
        for m in methods:
            sinr = np.array([o.sinr_db[m] for o in group])
            ok = np.isfinite(sinr)
            iters = [o.iterations.get(m, 0) for o, good in zip(group, ok) if good]
            secs = [o.seconds.get(m, 0.0) for o in group]
            rows.append(SweepRow(
                sweep_name=name, sweep_value=float(v), method=m,
                mean_sinr_db=float(sinr[ok].mean()) if ok.any() else float("nan"),
                std_sinr_db=float(sinr[ok].std()) if ok.any() else float("nan"),
                runs=len(group), failures=int((~ok).sum()),
                mean_iters=float(np.mean(iters)) if iters else float("nan"),
                mean_seconds=float(np.mean(secs)) if (timing and secs) else float("nan")))
    return SweepResult(rows, outcomes, config, timing)
