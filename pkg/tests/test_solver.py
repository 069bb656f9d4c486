"""Tests for the contraction solver and its failure probe."""

import numpy as np
import pandas as pd
import pytest
from fullstab.exceptions import (
    MaxIterationsExceeded,
    NonContractiveRegime,
    ProxParameterError,
    UnsupportedPotential,
)
from fullstab.model import (
    BaseMapSpec,
    IndicatorPolyhedron,
    PVSInstance,
    ReferencePoint,
    load_instance,
)
from fullstab.solver import (
    SolverConfig,
    contraction_factor,
    prepare_solver,
    select_lambda,
    separable_solution_sets,
    solve,
    solve_certified_failure_probe,
    solve_from_random_starts,
    solve_grid,
)
from fullstab.utils import fixture_path


def test_step_selection():
    """The default step keeps the map contractive."""
    inst = load_instance(fixture_path("ex72_sigma2"))
    setup = prepare_solver(inst)
    assert setup.lam == pytest.approx(0.99 / 4.9799, rel=1e-6)
    assert setup.alpha == pytest.approx(0.8318, abs=1e-3)
    assert setup.alpha < 1
    with pytest.raises(NonContractiveRegime):
        select_lambda(1.0, 2.0, 1.0)
    with pytest.raises(ProxParameterError):
        contraction_factor(1.0, 2.0, 3.0, 1.0)


def test_solve_concave_orthant():
    """Solutions of the diagonal system are found in closed form."""
    inst = load_instance(fixture_path("ex72_sigma2"))
    result = solve(inst, np.array([0.7, 0.7]), np.zeros(2), np.zeros(2))
    assert np.allclose(result.x, [0.7, 0.7], atol=1e-8)
    assert result.inclusion_residual <= 1e-8
    assert result.measured_rate <= result.alpha + 0.01
    assert result.to_dict()["lambda"] == result.lam
    shifted = solve(inst, np.zeros(2), np.array([0.1, 0.1]), np.zeros(2))
    assert np.allclose(shifted.x, [0.0, 0.0], atol=1e-8)


def test_solve_quasi_variational():
    """The moving constraint set is tracked from any start."""
    inst = load_instance(fixture_path("aqvi1"))
    setup = prepare_solver(inst)
    assert setup.lam == pytest.approx(0.5, rel=1e-5)
    for start in (0.0, 5.0, -3.0):
        result = solve(
            inst, np.array([2.0]), np.array([1.0]), np.array([0.0]), start=np.array([start])
        )
        assert result.x[0] == pytest.approx(1.0, abs=1e-8)


def test_solver_configuration_errors():
    """Invalid configurations are rejected."""
    with pytest.raises(ProxParameterError):
        SolverConfig(lam=-1.0)
    with pytest.raises(ValueError):
        SolverConfig(max_iter=0)
    inst = load_instance(fixture_path("ex72_sigma2"))
    with pytest.raises(ProxParameterError):
        prepare_solver(inst, SolverConfig(lam=1.0))
    with pytest.raises(MaxIterationsExceeded):
        solve(inst, np.array([0.7, 0.7]), np.zeros(2), np.zeros(2), SolverConfig(max_iter=1))


def test_non_contractive_regime():
    """The solver refuses instances whose monotonicity does not beat the threshold."""
    inst = load_instance(fixture_path("ex72_sigma1"))
    with pytest.raises(NonContractiveRegime):
        prepare_solver(inst)
    with pytest.raises(NonContractiveRegime):
        solve(inst, np.zeros(2), np.zeros(2), np.zeros(2))


def test_failure_probe():
    """The probe reports empty and non-unique solution sets."""
    inst = load_instance(fixture_path("ex72_sigma1"))
    empty = solve_certified_failure_probe(inst, np.array([0.5, 0.5]), np.zeros(2), np.zeros(2))
    assert not empty.declined
    assert empty.solution_set == "empty"
    assert empty.witness["coordinate"] == 0
    many = solve_certified_failure_probe(inst, np.zeros(2), np.zeros(2), np.zeros(2))
    assert many.solution_set == "non-unique"
    contractive = load_instance(fixture_path("ex72_sigma2"))
    declined = solve_certified_failure_probe(contractive, np.zeros(2), np.zeros(2), np.zeros(2))
    assert declined.declined
    assert declined.to_dict()["solution_set"] is None


def test_separable_solution_sets():
    """Separable instances are solved coordinate by coordinate."""
    inst = load_instance(fixture_path("box"))
    sets = separable_solution_sets(inst, np.array([0.5, -1.0]), np.zeros(0), np.zeros(0))
    assert sets == [[(0.5, 0.5)], [(0.0, 0.0)]]
    with pytest.raises(UnsupportedPotential):
        separable_solution_sets(
            load_instance(fixture_path("ex94")), np.zeros(3), np.zeros(2), np.zeros(0)
        )


def test_solve_grid():
    """Every row of a grid is solved and missing columns take reference values."""
    inst = load_instance(fixture_path("ex72_sigma2"))
    frame = pd.DataFrame({"v0": [0.1, 0.3, -0.2], "v1": [0.2, 0.0, 0.4]})
    solved = solve_grid(inst, frame, jobs=2)
    assert np.allclose(solved["x0"], [0.1, 0.3, 0.0], atol=1e-8)
    assert np.allclose(solved["x1"], [0.2, 0.0, 0.4], atol=1e-8)
    assert (solved["residual"] <= 1e-8).all()


def _ill_conditioned_instance() -> PVSInstance:
    """Return a polyhedral system with a symmetric positive definite Q of condition number 16."""
    rotation, _ = np.linalg.qr(np.random.default_rng(7).normal(size=(3, 3)))
    Q = rotation @ np.diag([0.5, 3.0, 8.0]) @ rotation.T
    Q = (Q + Q.T) / 2
    x = np.ones(3)
    return PVSInstance(
        n=3,
        l=0,
        m=0,
        base=BaseMapSpec(c=np.zeros(3), Q=Q, B=np.zeros((3, 0)), D=np.zeros((3, 0))),
        potential=IndicatorPolyhedron(
            np.vstack([-np.eye(3), np.ones((1, 3))]), np.array([0.0, 0.0, 0.0, 10.0])
        ),
        reference=ReferencePoint(x=x, p=np.zeros(0), q=np.zeros(0), v=Q @ x),
        constants={"r": 1e-6},
    )


def test_solve_ill_conditioned_polyhedral_system():
    """Slowly contracting iterations still reach the solution within the residual tolerance."""
    inst = _ill_conditioned_instance()
    setup = prepare_solver(inst)
    assert setup.alpha > 0.99
    rng = np.random.default_rng(0)
    for _ in range(20):
        v = inst.reference.v + rng.uniform(-1e-2, 1e-2, size=3)
        result = solve(inst, v, np.zeros(0), np.zeros(0), setup=setup)
        assert result.inclusion_residual <= 1e-8
        assert result.fixed_point_residual <= 1e-10
        assert np.allclose(result.x, np.linalg.solve(inst.base.Q, v), atol=1e-7)
        assert result.measured_rate <= result.alpha + 0.01


def test_random_starts_agree():
    """Starts drawn around the reference point reach the same solution."""
    inst = load_instance(fixture_path("aqvi1"))
    cfg = SolverConfig(delta=0.5)
    spread = solve_from_random_starts(
        inst, np.array([2.0]), np.array([1.0]), np.array([0.0]), cfg, count=10, seed=3
    )
    assert spread.starts.shape == (10, 1)
    assert np.all(np.abs(spread.starts[:, 0] - 1.0) <= 0.5)
    assert np.allclose(spread.solutions[:, 0], 1.0, atol=1e-8)
    assert spread.agrees(cfg.tol)
    assert spread.to_dict()["spread"] == spread.spread
    ill_conditioned = _ill_conditioned_instance()
    ill = solve_from_random_starts(
        ill_conditioned, ill_conditioned.reference.v, np.zeros(0), np.zeros(0)
    )
    assert np.allclose(ill.solutions, 1.0, atol=1e-7)
    assert ill.spread <= 1e-7
    with pytest.raises(ValueError):
        SolverConfig(delta=0.0)
    with pytest.raises(ValueError):
        solve_from_random_starts(inst, np.array([2.0]), np.array([1.0]), np.array([0.0]), count=0)
