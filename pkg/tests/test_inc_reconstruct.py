import numpy as np
import pytest
from scipy.linalg import subspace_angles

from conftest import make_scenario
from drab.array_model import (ArrayGeometry, sample_covariance, steering_matrix, synth_snapshots,
                              ula_steering)
from drab.inc_reconstruct import (ReconstructionConfig, capon_reconstruct, capon_spectrum,
                                  integration_grid)


def test_identity_rectangle_rule():
    geo = ArrayGeometry(4)
    cfg = ReconstructionConfig((0.0, 10.0), grid_step_deg=1.0, inversion_loading=0.0,
                               noise_floor=False, rule="rectangle")
    theta = integration_grid(cfg)
    D = steering_matrix(geo, theta)
    expected = np.deg2rad(1.0) / 4 * D @ D.conj().T
    np.testing.assert_allclose(capon_reconstruct(np.eye(4), geo, cfg), expected, atol=1e-12)


def test_grid_excludes_sector():
    cfg = ReconstructionConfig((0.0, 10.0), grid_step_deg=0.5)
    theta = integration_grid(cfg)
    assert theta[0] == -90.0 and theta[-1] == 90.0
    assert not np.any((theta >= 0) & (theta <= 10))


def test_capon_spectrum_identity():
    geo = ArrayGeometry(6)
    np.testing.assert_allclose(capon_spectrum(np.eye(6), geo, [-30.0, 0.0, 45.0]), 1 / 6)


def test_adaptive_matches_dense_trapezoid():
    # smooth spectrum (weak interferer), so a dense trapezoid rule is an accurate reference
    geo = ArrayGeometry(4)
    d = ula_steering(geo, 30.0)
    R = np.eye(4) + 2.0 * np.outer(d, d.conj())
    cfg = ReconstructionConfig((0.0, 10.0), grid_step_deg=1.0, inversion_loading=0.0,
                               noise_floor=False)
    ours = capon_reconstruct(R, geo, cfg)
    ref = np.zeros((4, 4), complex)
    for lo, hi in ((-90.0, 0.0), (10.0, 90.0)):
        theta = np.linspace(lo, hi, 200001)
        D = steering_matrix(geo, theta)
        p = capon_spectrum(R, geo, theta)
        w = np.full(theta.size, theta[1] - theta[0])
        w[[0, -1]] /= 2
        ref += (D * (p * np.deg2rad(w))) @ D.conj().T
    np.testing.assert_allclose(ours, ref, rtol=0, atol=1e-8 * np.linalg.norm(ref))


def test_output_hermitian_psd_and_interferer_subspace():
    sc = make_scenario(10, snr_db=10.0)
    Rhat = sample_covariance(synth_snapshots(sc, 100, 0))
    cfg = ReconstructionConfig(sc.sector_deg)
    R = capon_reconstruct(Rhat, sc.geometry, cfg)
    np.testing.assert_allclose(R, R.conj().T, atol=0)
    vals, vecs = np.linalg.eigh(R)
    assert vals[0] > 0
    span = steering_matrix(sc.geometry, [-5.0, 15.0])
    assert np.rad2deg(subspace_angles(vecs[:, -2:], span).max()) <= 5.0


def test_noise_floor_adds_min_eigenvalue():
    sc = make_scenario(6)
    Rhat = sample_covariance(synth_snapshots(sc, 50, 1))
    base = ReconstructionConfig(sc.sector_deg, noise_floor=False, rule="rectangle")
    withf = ReconstructionConfig(sc.sector_deg, noise_floor=True, rule="rectangle")
    diff = capon_reconstruct(Rhat, sc.geometry, withf) - capon_reconstruct(Rhat, sc.geometry, base)
    np.testing.assert_allclose(diff, np.linalg.eigvalsh(Rhat)[0] * np.eye(6), atol=1e-12)


def test_singular_input_rejected():
    geo = ArrayGeometry(3)
    cfg = ReconstructionConfig((0.0, 10.0), inversion_loading=0.0)
    with pytest.raises(ValueError):
        capon_reconstruct(np.zeros((3, 3)), geo, cfg)
    with pytest.raises(ValueError):
        capon_spectrum(np.zeros((3, 3)), geo, [0.0])


@pytest.mark.parametrize("kwargs", [
    {"grid_step_deg": 0.0},
    {"rule": "simpson"},
    {"angle_range_deg": (10.0, -10.0)},
    {"excluded_sector_deg": (-95.0, 0.0)},
    {"inversion_loading": -1.0},
])
def test_config_validation(kwargs):
    args = {"excluded_sector_deg": (0.0, 10.0), **kwargs}
    with pytest.raises(ValueError):
        ReconstructionConfig(**args)
