"""Acceptance criteria, one test each, at their stated tolerances and sizes.

Every test records a PASS/FAIL line in RESULTS; the lines are printed as they
happen and again in the terminal summary (see conftest.py).
"""

import os
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy.linalg import subspace_angles

from conftest import make_scenario
from drab.array_model import sample_covariance, steering_matrix, synth_snapshots
from drab.dro_builders import FormulationKind
from drab.harness import load_config, sweep
from drab.harness.validate import check_isometry, check_rank_certificate, weak_duality_gaps, \
    weak_duality_instance
from drab.inc_reconstruct import ReconstructionConfig, capon_reconstruct
from drab.moments import default_params, sector_moments
from drab.rank_one import EIGEN_RATIO_FLAG, MaxIterationsError, algorithm1

CONFIGS = os.path.join(os.path.dirname(os.path.abspath(__file__)), os.pardir, "configs")
RESULTS = []


def report(name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def config(name):
    return load_config(os.path.join(CONFIGS, name))


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def algorithm_checks(diag, extracted=True):
    """Criteria 4(a), (b), (d), (e) for one set of diagnostics; returns failed labels.

    (e) needs an extracted w, which a run stopped by max_iter does not have.
    """
    v = diag["objective_sequence"]
    bad = []
    if not all(b <= a + 1e-6 * abs(a) for a, b in zip(v, v[1:])):
        bad.append("a")
    if min(diag["penalty_sequence"], default=0.0) < -1e-9:
        bad.append("b")
    if not diag["eigen_ratio"] <= EIGEN_RATIO_FLAG:
        bad.append("d")
    if extracted and not diag["qmi_violation"] <= 1e-6:
        bad.append("e")
    return bad


def test_criterion_1_rank_certificate():
    (ok, detail), secs = timed(check_rank_certificate, 1000, seed=2024)
    report("1 rank-one certificate", ok and secs < 5, f"{detail}, {secs:.2f}s")


def test_criterion_2_isometry():
    (ok, detail), secs = timed(check_isometry, 1000, seed=2024)
    report("2 vectorization isometry", ok and secs < 5, f"{detail}, {secs:.2f}s")


def test_criterion_3_weak_duality():
    d1, d2 = weak_duality_instance(seed=0, N=5)
    (over, slack, low), secs = timed(weak_duality_gaps, d1, d2, 100, seed=0)
    ok = over <= 1e-6 and slack >= -1e-6 and low >= 1 - 1e-6 and secs < 120
    report("3 weak duality", ok,
           f"max objective excess {over:.3e}, min constraint slack {slack:.3e}, "
           f"min constraint expectation {low:.4f}, {secs:.1f}s")


def test_criterion_4_algorithm():
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    terminated, failures = 0, {}
    for k in range(50):
        snr = float(rng.uniform(-10, 20))
        sc = make_scenario(10, snr_db=snr)
        Rhat = sample_covariance(synth_snapshots(sc, 100, int(rng.integers(2**31))))
        a0, Sigma = sector_moments(sc.geometry, sc.sector_deg)
        d1, d2 = default_params(Rhat, a0, Sigma)
        try:
            diag = algorithm1(FormulationKind(), d1, d2).diagnostics
        except MaxIterationsError as exc:
            failures[k] = ["c"] + algorithm_checks(exc.diagnostics.to_dict(), extracted=False)
            continue
        terminated += 1
        bad = algorithm_checks(diag.to_dict())
        if bad:
            failures[k] = bad
    secs = time.perf_counter() - t0
    other = {k: v for k, v in failures.items() if v != ["c"]}
    ok = terminated >= 48 and not other and secs < 900
    report("4 penalty iteration", ok,
           f"{terminated}/50 terminated, check failures {other or 'none'}, {secs:.0f}s")


def test_criterion_5_snr_sweep():
    res, secs = timed(sweep, config("snr_sweep.yaml"))
    bad = []
    for v in (-20.0, -15.0, -10.0, -5.0, 0.0, 5.0, 10.0):
        dro, dl, opt = (res.row(v, m).mean_sinr_db for m in ("dro", "mvdr_dl", "optimal"))
        if not dro >= dl:
            bad.append(f"{v:g} dB below loading baseline ({dro:.2f} < {dl:.2f})")
        if v <= 0 and not opt - dro <= 4.0:
            bad.append(f"{v:g} dB gap {opt - dro:.2f} dB")
    gaps = [res.row(v, "optimal").mean_sinr_db - res.row(v, "dro").mean_sinr_db
            for v in (-20.0, -10.0, 0.0)]
    report("5 SNR sweep, sample covariance", not bad and secs < 1800,
           f"{'; '.join(bad) or 'DRO >= MVDR-DL everywhere'}, gaps to optimal at -20/-10/0 dB "
           + "/".join(f"{g:.2f}" for g in gaps) + f", {secs:.0f}s")


def test_criterion_6_exact_inc():
    res, secs = timed(sweep, config("snr_sweep_exact_inc.yaml"))
    gaps = [res.row(v, "optimal").mean_sinr_db - res.row(v, "dro").mean_sinr_db
            for v in res.config.sweep.values]
    failures = sum(res.row(v, "dro").failures for v in res.config.sweep.values)
    ok = max(gaps) <= 2.0 and failures == 0 and len(gaps) == 11 and secs < 1200
    report("6 SNR sweep, exact INC, T=10", ok,
           f"largest gap to optimal {max(gaps):.3f} dB over {len(gaps)} points, {secs:.0f}s")


def test_criterion_7_sensitivity():
    spreads, total = {}, 0.0
    for name in ("rho1_sensitivity.yaml", "gamma1_sensitivity.yaml"):
        res, secs = timed(sweep, config(name))
        total += secs
        means = [res.row(v, "dro").mean_sinr_db for v in res.config.sweep.values]
        spreads[res.config.sweep.name] = max(means) - min(means)
    ok = all(s <= 2.0 for s in spreads.values()) and total < 1800
    report("7 radius sensitivity", ok,
           ", ".join(f"{k} spread {s:.3f} dB" for k, s in spreads.items()) + f", {total:.0f}s")


def test_criterion_8_alternative_sets():
    cfg = config("alt_sets_snr.yaml")
    res, secs = timed(sweep, cfg)
    alt = ("alt_d2_prime", "alt_d2_pp", "alt_d1_prime")
    bad = []
    for v in (-10.0, 0.0, 10.0):
        for m in alt:
            if res.row(v, m).failures:
                bad.append(f"{m} at {v:g} dB: {res.row(v, m).failures} failures")
        for o in res.outcomes:
            if o.sweep_value != v:
                continue
            for m in alt:
                if m in o.diagnostics and m not in o.errors:
                    failed = algorithm_checks(o.diagnostics[m])
                    if failed:
                        bad.append(f"{m} run {o.run_index} at {v:g} dB fails 4{failed}")
    d1p = res.row(20.0, "alt_d1_prime").mean_sinr_db
    main = res.row(20.0, "main_d1_d2").mean_sinr_db
    if not d1p - main >= 0:
        bad.append(f"Loewner INC set at 20 dB {d1p:.2f} < {main:.2f}")
    report("8 alternative sets", not bad and secs < 1200,
           f"{'; '.join(bad) or 'all optimal and 4(a)-(e) hold'}, 20 dB: Loewner INC "
           f"{d1p:.2f} vs main {main:.2f} dB, {secs:.0f}s")


def test_criterion_9_determinism(tmp_path):
    outs = []
    cfg = os.path.join(CONFIGS, "snr_sweep.yaml")
    for k in range(2):
        out = tmp_path / f"run{k}"
        proc = subprocess.run([sys.executable, "-m", "drab.cli", "sweep-snr", "--config", cfg,
                               "--out", str(out), "--runs", "3"], capture_output=True)
        assert proc.returncode == 0, proc.stderr.decode()
        outs.append((out / "results.csv").read_bytes())
    report("9 determinism", outs[0] == outs[1] and len(outs[0]) > 0,
           f"{len(outs[0])}-byte CSV identical across two CLI invocations")


def test_criterion_10_reconstruction():
    sc = make_scenario(10, snr_db=10.0)
    Rhat = sample_covariance(synth_snapshots(sc, 100, 10))
    R = capon_reconstruct(Rhat, sc.geometry, ReconstructionConfig(sc.sector_deg))
    top = np.linalg.eigh(R)[1][:, -2:]
    span = steering_matrix(sc.geometry, [-5.0, 15.0])
    angle = float(np.rad2deg(subspace_angles(top, span).max()))
    coarse = capon_reconstruct(Rhat, sc.geometry, ReconstructionConfig(sc.sector_deg, 1.0))
    fine = capon_reconstruct(Rhat, sc.geometry, ReconstructionConfig(sc.sector_deg, 0.25))
    change = float(np.linalg.norm(coarse - fine) / np.linalg.norm(fine))
    report("10 INC reconstruction", angle <= 5.0 and change <= 0.02,
           f"subspace angle {angle:.3f} deg, grid refinement change {100 * change:.2e}%")
