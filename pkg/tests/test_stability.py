"""Tests for the full-stability moduli and their sampled verification."""

import numpy as np
import pytest
from fullstab.exceptions import NonContractiveRegime, UnsupportedPotential
from fullstab.model import IndicatorBox, QuadraticPlusIndicator, load_instance
from fullstab.stability import (
    SampleConfig,
    aubin_modulus_estimate,
    theoretical_moduli,
    verify_holder_full_stability,
    verify_lipschitz_full_stability,
    verify_prox_hausdorff_estimate,
    verify_usogc,
)
from fullstab.utils import fixture_path


def test_theoretical_moduli():
    """The closed-form constants match hand computations."""
    report = theoretical_moduli(1.0, 1.0, 0.0, 1.0, rho=0.5, eta=0.01)
    assert report.alpha == pytest.approx(0.0)
    assert report.kappa0 == pytest.approx(1.0)
    assert report.kappa == pytest.approx(1.0)
    assert report.ell1 == pytest.approx(3.0 + np.sqrt(13.0))
    assert report.ell2 == pytest.approx(4.0)
    assert report.gamma1_kappa == pytest.approx(np.sqrt(0.02))
    assert report.gamma1_sigma == pytest.approx(np.sqrt(0.02))
    assert report.gamma2_sigma == pytest.approx(1.0)
    assert report.gamma2_kappa == pytest.approx(1.0)
    assert report.to_dict()["theory"]["gamma2_kappa"] == report.gamma2_kappa
    assert report.passed is None
    with pytest.raises(NonContractiveRegime):
        theoretical_moduli(1.0, 1.0, 1.0, 0.5, rho=0.5)


def test_sample_config_validation():
    """At least two samples and a positive radius are required."""
    with pytest.raises(ValueError):
        SampleConfig(count=1)
    with pytest.raises(ValueError):
        SampleConfig(eta=0.0)


def test_lipschitz_verification():
    """The diagonal instance passes the Lipschitzian inequality."""
    inst = load_instance(fixture_path("ex72_sigma2"))
    report = verify_lipschitz_full_stability(inst, SampleConfig(count=100, seed=5))
    assert report.passed
    assert report.canonical_pass
    assert report.monotone_pass
    assert np.isfinite(report.ell_lipschitz)
    assert report.samples == 100
    assert report.to_dict()["inputs"]["sigma"] == pytest.approx(2.0)


def test_lipschitz_verification_is_deterministic():
    """Seeded verifications are reproducible and independent of the worker count."""
    inst = load_instance(fixture_path("ex72_sigma2"))
    cfg = SampleConfig(count=40, seed=11)
    serial = verify_lipschitz_full_stability(inst, cfg)
    parallel = verify_lipschitz_full_stability(inst, cfg, jobs=4)
    assert serial.ell_lipschitz == parallel.ell_lipschitz
    assert serial.worst_violation == parallel.worst_violation


def test_quasi_variational_verification():
    """The moving-set instance passes both inequalities."""
    inst = load_instance(fixture_path("aqvi1"))
    cfg = SampleConfig(count=100, seed=1)
    lipschitz = verify_lipschitz_full_stability(inst, cfg)
    assert lipschitz.passed
    assert lipschitz.canonical_pass
    assert lipschitz.kappa == pytest.approx(1.0 - 1e-6)
    holder = verify_holder_full_stability(inst, cfg)
    assert holder.passed
    assert holder.ell_holder is not None
    assert aubin_modulus_estimate(inst, SampleConfig(count=20)) == pytest.approx(1.0, abs=1e-3)


def test_non_contractive_verification():
    """Verification refuses instances outside the contraction regime."""
    inst = load_instance(fixture_path("ex72_sigma1"))
    with pytest.raises(NonContractiveRegime):
        verify_lipschitz_full_stability(inst, SampleConfig(count=10))


def test_prox_hausdorff_estimate():
    """The proximal mapping moves no faster than the bound in the set distance."""
    inst = load_instance(fixture_path("box_moving"))
    check = verify_prox_hausdorff_estimate(inst, SampleConfig(count=30, seed=2))
    assert check.name == "prox-hausdorff"
    assert check.holds
    assert check.data["violations"] == 0
    assert aubin_modulus_estimate(inst, SampleConfig(count=20)) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(UnsupportedPotential):
        verify_prox_hausdorff_estimate(load_instance(fixture_path("ex72_sigma2")))


def test_uniform_growth():
    """Second-order growth holds with the curvature of the quadratic and fails above it."""
    potential = QuadraticPlusIndicator(
        np.array([[1.0]]), IndicatorBox(np.zeros(1), np.full(1, np.inf))
    )
    center = (np.zeros(1), np.zeros(0), np.zeros(1))
    cfg = SampleConfig(count=100, seed=4)
    assert verify_usogc(potential, center, 1.0, cfg).holds
    failing = verify_usogc(potential, center, 2.0, cfg)
    assert not failing.holds
    assert failing.data["witness"] is not None
    box = load_instance(fixture_path("box"))
    convex = verify_usogc(box.potential, (box.reference.x, box.reference.p, box.v_hat), 0.0, cfg)
    assert convex.holds


def test_prox_hausdorff_estimate_on_moving_interval():
    """Five hundred sampled parameter pairs respect the bound with the constants of the proximal step."""
    inst = load_instance(fixture_path("box_moving"))
    check = verify_prox_hausdorff_estimate(inst, SampleConfig(count=500, seed=8))
    assert check.holds
    assert check.data["violations"] == 0
    assert check.data["samples"] == 500
    lam, r = check.data["lambda"], check.data["r"]
    kappa0 = 1.0 - lam * r
    assert 0.0 < kappa0 < 1.0
    assert check.data["ell1"] == pytest.approx(3.0 + np.sqrt(9.0 + 4.0 * kappa0))
    assert check.data["ell2"] == pytest.approx(2.0 * np.sqrt(2.0 * (2.0 * 0.5 + lam) * kappa0))
    assert check.data["worst_ratio"] <= 1.0

    # C(p) = [0, 1 + p], whose Hausdorff distance near x = 1 is |p1 - p2|.
    rng = np.random.default_rng(8)
    ell1, ell2 = check.data["ell1"], check.data["ell2"]
    anchor = inst.reference.x + lam * inst.v_hat
    for _ in range(500):
        v = anchor + rng.uniform(-1e-2, 1e-2, size=1)
        p1, p2 = rng.uniform(-1e-2, 1e-2, size=(2, 1))
        gap = abs(float(np.clip(v, 0.0, 1.0 + p1)[0] - np.clip(v, 0.0, 1.0 + p2)[0]))
        theta = abs(float(p1[0] - p2[0]))
        assert gap <= theta + 1e-12
        assert gap <= (ell1 * theta + ell2 * np.sqrt(theta)) / (2.0 * kappa0) + 1e-12
