"""Test commands of the CLI to check if they are working as expected."""

import json
import subprocess
from typing import List
import compress_json
import numpy as np
import pytest
from fullstab.utils import fixture_path


def run(arguments: List[str]) -> subprocess.CompletedProcess:
    """Run the command line interface with the provided arguments."""
    return subprocess.run(["fullstab", *arguments], capture_output=True, text=True)


def test_solve():
    """Test solve command inside the contraction regime."""
    completed = run(
        ["solve", "--instance", fixture_path("ex72_sigma2"), "--v", "0.7", "0.7", "--p", "0", "0"]
    )
    assert completed.returncode == 0
    document = json.loads(completed.stdout)
    assert document["manifest"]["command"] == "solve"
    assert document["report"]["solution"]["x"] == pytest.approx([0.7, 0.7], abs=1e-8)


def test_solve_probe():
    """Test solve command outside the contraction regime."""
    completed = run(["solve", "--instance", fixture_path("ex72_sigma1"), "--v", "0.5", "0.5"])
    assert completed.returncode == 2
    probe = json.loads(completed.stdout)["report"]["probe"]
    assert probe["solution_set"] == "empty"
    assert not probe["declined"]


def test_solve_grid(tmp_path):
    """Test solve command on a parameter grid."""
    grid = tmp_path / "grid.csv"
    grid.write_text("v0,v1\n0.1,0.2\n-0.2,0.4\n")
    output = str(tmp_path / "grid.json")
    completed = run(
        ["solve", "--instance", fixture_path("ex72_sigma2"), "--grid", str(grid), "--out", output]
    )
    assert completed.returncode == 0
    rows = compress_json.load(output)["report"]["grid"]
    assert rows[0]["x0"] == pytest.approx(0.1, abs=1e-8)
    assert rows[1]["x0"] == pytest.approx(0.0, abs=1e-8)


def test_certify_pvc():
    """Test certify-pvc command exit codes."""
    certified = run(["certify-pvc", "--instance", fixture_path("ex94"), "--samples", "100"])
    assert certified.returncode == 0
    assert json.loads(certified.stdout)["report"]["verdict"] == "FULLY_STABLE"
    refused = run(
        ["certify-pvc", "--instance", fixture_path("unconstrained_negdef"), "--samples", "50"]
    )
    assert refused.returncode == 1
    assert json.loads(refused.stdout)["report"]["verdict"] == "NOT_CERTIFIED"


def test_certify_pvi():
    """Test certify-pvi command on a box instance."""
    completed = run(["certify-pvi", "--instance", fixture_path("box")])
    assert completed.returncode == 0
    checks = json.loads(completed.stdout)["report"]["checks"]
    assert [check["condition"] for check in checks] == [
        "pvi-closure",
        "pvi-critical-span",
        "mor",
        "pointbased-lipschitz",
    ]
    assert all(check["holds"] for check in checks)


def test_threshold():
    """Test threshold command on a concave quadratic over the orthant."""
    completed = run(["threshold", "--instance", fixture_path("ex72_sigma2"), "--samples", "200"])
    assert completed.returncode == 0
    report = json.loads(completed.stdout)["report"]
    methods = [estimate["method"] for estimate in report["estimates"]]
    assert methods == ["hypomonotone-sampling", "pointbased-coderivative"]
    assert report["estimates"][1]["R_est"] == pytest.approx(1.0)
    assert report["constants"]["r"] == pytest.approx(1.01)


def test_moduli():
    """Test moduli command with and without sampling."""
    theoretical = run(["moduli", "--instance", fixture_path("aqvi1")])
    assert theoretical.returncode == 0
    report = json.loads(theoretical.stdout)["report"]
    assert report["inputs"]["sigma"] == pytest.approx(1.0)
    measured = run(["moduli", "--instance", fixture_path("aqvi1"), "--samples", "50"])
    assert measured.returncode == 0
    manifest = json.loads(measured.stdout)["manifest"]
    assert manifest["overrides"] == {"samples": 50}


def test_cones():
    """Test cones command on a box instance."""
    completed = run(["cones", "--instance", fixture_path("box")])
    assert completed.returncode == 0
    report = json.loads(completed.stdout)["report"]
    assert {"tangent", "normal", "critical", "critical_difference", "limit", "limit_box"} <= set(
        report
    )


def test_missing_instance(tmp_path):
    """Test that a missing instance file is reported with exit code 1."""
    completed = run(["cones", "--instance", str(tmp_path / "missing.json")])
    assert completed.returncode == 1
    assert completed.stderr


def test_reproducible_output():
    """Test that two runs with the same seed print the same report."""
    arguments = ["certify-pvc", "--instance", fixture_path("ex94"), "--samples", "50", "--seed", "7"]
    first, second = run(arguments), run(arguments)
    assert first.stdout == second.stdout
    assert json.loads(first.stdout)["manifest"]["seed"] == 7


def test_certify_pvc_golden():
    """Test the checks reported by certify-pvc on four constraints with dependent gradients."""
    completed = run(["certify-pvc", "--instance", fixture_path("ex94"), "--samples", "100"])
    assert completed.returncode == 0
    report = json.loads(completed.stdout)["report"]
    checks = report["checks"]
    assert report["routes"] == {"uniform": True, "pointwise": None}
    assert checks["MFCQ"]["holds"] is True
    assert checks["MFCQ"]["margin"] == pytest.approx(1.0)
    assert checks["MFCQ"]["active"] == [0, 1, 2, 3]
    assert checks["LICQ"]["holds"] is False
    assert checks["LICQ"]["rank"] == 3
    assert checks["CRCQ"]["holds"] is True
    assert checks["multipliers"]["vertices"] == pytest.approx(
        [[3 / 8, 5 / 8, 0.0, 0.0], [0.0, 1 / 4, 3 / 8, 3 / 8]]
    )
    assert checks["GSSOSC"]["holds"] is False
    assert checks["GSSOSC"]["min_curvature"] == pytest.approx(0.0, abs=1e-12)
    assert checks["GUSOSC"]["holds"] is True
    assert checks["GUSOSC"]["ell_best"] == "inf"
    assert checks["SCOC_det_zero"]["holds"] is True
    assert report["notes"] == ["LICQ fails: the GSSOSC route is inapplicable"]


def test_solve_golden():
    """Test the solution and solver constants reported on the diagonal instance."""
    completed = run(
        [
            "solve", "--instance", fixture_path("ex72_sigma2"),
            "--v", "-0.4", "0.6", "--p", "0", "0", "--q", "0", "0", "--starts", "5",
        ]
    )
    assert completed.returncode == 0
    report = json.loads(completed.stdout)["report"]
    solution = report["solution"]
    assert solution["x"] == pytest.approx([0.0, 0.6], abs=1e-8)
    assert solution["r"] == pytest.approx(1.01)
    # sigma = 2, L = |[Q B D]| = sqrt(6), r = 1.01
    lam = solution["lambda"]
    assert lam == pytest.approx(0.99 / (6.0 - 1.01**2))
    assert solution["alpha"] == pytest.approx(np.sqrt(1.0 - 4.0 * lam + 6.0 * lam**2) / (1.0 - 1.01 * lam))
    assert solution["measured_rate"] <= solution["alpha"] + 1e-2
    assert solution["inclusion_residual"] <= 1e-8
    assert solution["super_contractive"] is False
    starts = report["random_starts"]
    assert starts["agree"] is True
    assert len(starts["solutions"]) == 5
    for x in starts["solutions"]:
        assert x == pytest.approx([0.0, 0.6], abs=1e-8)


def test_threshold_golden():
    """Test every threshold estimate of a concave quadratic over the orthant."""
    completed = run(["threshold", "--instance", fixture_path("ex72_sigma2"), "--samples", "200"])
    assert completed.returncode == 0
    report = json.loads(completed.stdout)["report"]
    sampled, pointbased = report["estimates"]
    assert sampled["R_est"] == pytest.approx(1.0, rel=1e-6)
    assert sampled["samples"] == 200
    assert pointbased["R_est"] == pytest.approx(1.0)
    assert pointbased["tau"] == pytest.approx(-1.0)
    assert report["constants"]["R"] == pytest.approx(1.0)
    assert report["constants"]["provenance"] == "closed-form"
