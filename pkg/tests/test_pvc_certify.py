"""Tests for constraint qualifications and the full-stability certificate."""

import numpy as np
import pytest
from scipy.linalg import null_space
from fullstab.exceptions import InfeasiblePoint, UnsupportedPotential
from fullstab.model import BaseMapSpec, PVSInstance, ReferencePoint, SmoothIneq, load_instance
from fullstab.pvc_certify import (
    active_set,
    certify_full_stability,
    crcq_check,
    gssosc_check,
    gusosc_check,
    licq_check,
    mfcq_check,
    multipliers,
    scoc_bordered_determinant,
)
from fullstab.stability import SampleConfig, verify_lipschitz_full_stability
from fullstab.utils import fixture_path


def _reference(inst):
    ref = inst.reference
    return ref.x, ref.p, ref.q, ref.v


def _half_plane_instance(Q: np.ndarray) -> PVSInstance:
    """Return the system over {x_1 <= 0} with reference subgradient (1, 0) at the origin."""
    return PVSInstance(
        n=2,
        l=0,
        m=0,
        base=BaseMapSpec(c=np.zeros(2), Q=Q, B=np.zeros((2, 0)), D=np.zeros((2, 0))),
        potential=SmoothIneq(
            A=np.zeros((1, 2, 2)),
            b=np.array([[1.0, 0.0]]),
            g=np.zeros((1, 0)),
            d=np.zeros(1),
        ),
        reference=ReferencePoint(
            x=np.zeros(2), p=np.zeros(0), q=np.zeros(0), v=np.array([1.0, 0.0])
        ),
    )


def test_constraint_qualifications():
    """Four active affine constraints in three dimensions satisfy MFCQ and CRCQ but not LICQ."""
    inst = load_instance(fixture_path("ex94"))
    spec = inst.potential
    x, p, _, _ = _reference(inst)
    assert active_set(spec, x, p).indices == (0, 1, 2, 3)
    mfcq = mfcq_check(spec, x, p)
    assert mfcq.holds
    assert mfcq.data["margin"] == pytest.approx(1.0)
    licq = licq_check(spec, x, p)
    assert not licq.holds
    assert licq.data["rank"] == 3
    assert crcq_check(spec, x, p).holds


def test_infeasible_point():
    """Points violating a constraint have no active set."""
    inst = load_instance(fixture_path("ex94"))
    with pytest.raises(InfeasiblePoint):
        active_set(inst.potential, np.array([1.0, 0.0, 0.0]), np.zeros(2))


def test_degenerate_quadratic_constraint():
    """A constraint with a vanishing gradient breaks both qualifications."""
    spec = SmoothIneq(
        A=np.array([[[2.0, 0.0], [0.0, 2.0]]]),
        b=np.zeros((1, 2)),
        g=np.zeros((1, 0)),
        d=np.zeros(1),
    )
    crcq = crcq_check(spec, np.zeros(2), np.zeros(0))
    assert not crcq.holds
    assert crcq.data["failing_subset"] == [0]
    mfcq = mfcq_check(spec, np.zeros(2), np.zeros(0))
    assert not mfcq.holds
    assert mfcq.data["margin"] == pytest.approx(0.0, abs=1e-12)


def test_multiplier_polytope():
    """The multiplier set is a bounded segment with two vertices."""
    inst = load_instance(fixture_path("ex94"))
    polytope = multipliers(inst.potential, inst, *_reference(inst))
    assert polytope.bounded
    assert polytope.vertices.shape == (2, 4)
    assert np.allclose(polytope.vertices[0], [3 / 8, 5 / 8, 0.0, 0.0])
    assert np.allclose(polytope.vertices[1], [0.0, 1 / 4, 3 / 8, 3 / 8])
    for vertex in polytope.vertices:
        assert polytope.stationarity_residual(vertex) <= 1e-9


def test_second_order_conditions():
    """The pointwise condition fails where the uniform one holds."""
    inst = load_instance(fixture_path("ex94"))
    spec = inst.potential
    gssosc = gssosc_check(spec, inst, *_reference(inst))
    assert not gssosc.holds
    assert gssosc.data["min_curvature"] == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(gssosc.data["failing_multiplier"], [3 / 8, 5 / 8, 0.0, 0.0])
    gusosc = gusosc_check(spec, inst, count=100)
    assert gusosc.holds
    assert gusosc.data["ell_best"] == np.inf
    scoc = scoc_bordered_determinant(spec, inst, gssosc.data["failing_multiplier"])
    assert scoc.holds


def test_certificate_with_dependent_gradients():
    """Full stability is certified through the uniform route only."""
    report = certify_full_stability(load_instance(fixture_path("ex94")), count=100)
    assert report.certified
    assert report.verdict == "FULLY_STABLE"
    assert report.routes == {"uniform": True, "pointwise": None}
    assert set(report.checks) == {
        "MFCQ", "LICQ", "CRCQ", "multipliers", "GSSOSC", "GUSOSC", "SCOC_det_zero",
    }
    assert report.to_dict()["checks"]["LICQ"]["holds"] is False


def test_certificate_unconstrained():
    """Without constraints the verdict follows the definiteness of Q."""
    convex = certify_full_stability(load_instance(fixture_path("unconstrained_convex")), count=50)
    assert convex.verdict == "FULLY_STABLE"
    assert convex.routes == {"uniform": True, "pointwise": True}
    negdef = certify_full_stability(load_instance(fixture_path("unconstrained_negdef")), count=50)
    assert negdef.verdict == "NOT_CERTIFIED"
    assert not negdef.certified


def test_certification_routes_agree():
    """Under independent gradients both routes reach the same verdict."""
    rng = np.random.default_rng(0)
    for sign in (1.0, -1.0, 1.0, -1.0):
        Q = rng.normal(size=(2, 2))
        Q[1, 1] = sign * rng.uniform(0.5, 2.0)
        report = certify_full_stability(_half_plane_instance(Q), count=50)
        assert report.routes["pointwise"] == report.routes["uniform"]
        assert report.certified == (sign > 0)


def test_certificate_requires_inequality_system():
    """Potentials other than inequality systems are refused."""
    with pytest.raises(UnsupportedPotential):
        certify_full_stability(load_instance(fixture_path("box")))


def _random_licq_instance(rng: np.random.Generator, Q: np.ndarray):
    """Return a system in R^3 with one or two independent affine constraints active at the origin.

    Each multiplier is positive or zero with equal chance; the least curvature
    of Q on the null space of the positive-multiplier gradients is returned
    with the instance.
    """
    k = int(rng.integers(1, 3))
    b = rng.normal(size=(k, 3))
    multiplier = np.where(rng.uniform(size=k) < 0.5, 0.0, rng.uniform(0.5, 2.0, size=k))
    inst = PVSInstance(
        n=3,
        l=0,
        m=0,
        base=BaseMapSpec(c=np.zeros(3), Q=Q, B=np.zeros((3, 0)), D=np.zeros((3, 0))),
        potential=SmoothIneq(A=np.zeros((k, 3, 3)), b=b, g=np.zeros((k, 0)), d=np.zeros(k)),
        reference=ReferencePoint(x=np.zeros(3), p=np.zeros(0), q=np.zeros(0), v=b.T @ multiplier),
    )
    basis = null_space(b[multiplier > 0]) if np.any(multiplier > 0) else np.eye(3)
    return inst, float(np.linalg.eigvalsh(basis.T @ Q @ basis)[0])


def _random_symmetric(rng: np.random.Generator, signs: np.ndarray, low: float = 0.3) -> np.ndarray:
    rotation, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    Q = rotation @ np.diag(signs * rng.uniform(low, 2.0, size=3)) @ rotation.T
    return 0.5 * (Q + Q.T)


def test_certification_routes_agree_on_random_instances():
    """On twenty random instances with independent gradients both routes give the expected verdict."""
    rng = np.random.default_rng(29)
    built = 0
    while built < 20:
        Q = _random_symmetric(rng, rng.choice([-1.0, 1.0], size=3))
        inst, curvature = _random_licq_instance(rng, Q)
        if abs(curvature) < 0.2:
            continue
        built += 1
        report = certify_full_stability(inst, count=100, seed=built)
        assert report.checks["LICQ"].holds
        assert report.routes["pointwise"] == report.routes["uniform"]
        assert report.certified == (curvature > 0)
        assert report.checks["GSSOSC"].data["min_curvature"] == pytest.approx(curvature, abs=1e-8)
        if report.checks["GSSOSC"].holds:
            assert report.checks["GUSOSC"].holds
        assert not report.notes


def test_certified_instances_pass_verification():
    """Certified instances with a monotone base map pass the sampled Lipschitzian inequality."""
    rng = np.random.default_rng(31)
    for seed in range(5):
        inst, curvature = _random_licq_instance(rng, _random_symmetric(rng, np.ones(3), low=1.0))
        assert curvature > 0
        report = certify_full_stability(inst, count=50, seed=seed)
        assert report.verdict == "FULLY_STABLE"
        verification = verify_lipschitz_full_stability(inst, SampleConfig(count=20, seed=seed))
        assert verification.passed
    convex = load_instance(fixture_path("unconstrained_convex"))
    assert certify_full_stability(convex, count=50).certified
    assert verify_lipschitz_full_stability(convex, SampleConfig(count=40)).passed
