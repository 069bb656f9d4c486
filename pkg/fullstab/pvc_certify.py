"""Submodule providing full-stability certificates for variational conditions over inequality systems.

The feasible set is C(p) = {x : phi_i(x, p) <= 0} with quadratic phi_i,
and the system is v in f(x, p, q) + N_C(p)(x). Under MFCQ the normal cone
is generated by the active gradients, so the system reads
v = f(x, p, q) + sum_i lambda_i grad phi_i(x, p) over the multiplier set.
A reference solution is certified fully stable when MFCQ, CRCQ and the
uniform second-order condition over a neighborhood of the graph hold;
under LICQ the pointwise second-order condition at the reference
multiplier is an equivalent route.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from typing import Any, Dict, List, Optional, Tuple
import warnings
import numpy as np
from scipy.optimize import linprog, nnls
from tqdm.auto import tqdm
from typeguard import typechecked
from fullstab.exceptions import (
    EmptyMultiplierSet,
    InfeasiblePoint,
    LPFailure,
    MFCQFailure,
    NoIndependentSubset,
    SizeLimitExceeded,
    UnboundedMultiplierSet,
    UnsupportedPotential,
)
from fullstab.model import PVSInstance, SmoothIneq
from fullstab.polyhedra import cone_min_curvature
from fullstab.reports import CertificateReport, CheckResult
from fullstab.utils import null_space_basis, restricted_min_eigenvalue, sample_ball

ACTIVE_TOL = 1e-8
MFCQ_TOL = 1e-8
RANK_RTOL = 1e-9
MULTIPLIER_TOL = 1e-9
CURVATURE_TOL = 1e-9
GUSOSC_TOL = 1e-6
DETERMINANT_TOL = 1e-9
SUBSET_LIMIT = 12
INTERIOR_SAMPLES = 100


@dataclass(frozen=True)
class ActiveSet:
    """Indices of the constraints active at a point."""

    indices: Tuple[int, ...]

    def positive(self, multiplier: np.ndarray, tol: float = MULTIPLIER_TOL) -> Tuple[int, ...]:
        """Return the active indices with a positive multiplier."""
        return tuple(i for i in self.indices if multiplier[i] > tol)

    def __len__(self) -> int:
        return len(self.indices)


def _require_smooth(inst: PVSInstance) -> SmoothIneq:
    if not isinstance(inst.potential, SmoothIneq):
        raise UnsupportedPotential(inst.potential.kind, "variational condition certificates")
    return inst.potential


def _rank(rows: np.ndarray) -> int:
    if rows.shape[0] == 0 or not np.any(rows):
        return 0
    singular = np.linalg.svd(rows, compute_uv=False)
    return int(np.sum(singular > RANK_RTOL * singular[0]))


@typechecked
def active_set(spec: SmoothIneq, x: np.ndarray, p: np.ndarray, tol: float = ACTIVE_TOL) -> ActiveSet:
    """Return the constraints with |phi_i(x, p)| <= tol.

    Raises
    ------
    InfeasiblePoint
        When some constraint is violated by more than the tolerance.

    >>> spec = SmoothIneq(np.zeros((1, 1, 1)), np.array([[1.0]]), np.zeros((1, 0)), np.zeros(1))
    >>> active_set(spec, np.zeros(1), np.zeros(0)).indices
    (0,)
    """
    values = spec.phi(x, p)
    for index, value in enumerate(values):
        if value > tol:
            raise InfeasiblePoint(index, float(value))
    return ActiveSet(tuple(int(i) for i in np.flatnonzero(values >= -tol)))


@typechecked
def mfcq_check(spec: SmoothIneq, x: np.ndarray, p: np.ndarray) -> CheckResult:
    """Check MFCQ by the linear program max t s.t. <grad phi_i, d> <= -t, |d|_inf <= 1.

    MFCQ holds when the optimal margin t exceeds 1e-8; the optimal d is
    the witness direction. Without active constraints it holds vacuously
    with an infinite margin.

    Raises
    ------
    LPFailure
        When the linear program cannot be solved.
    """
    active = active_set(spec, x, p)
    n = spec.n
    if not len(active):
        return CheckResult("MFCQ", True, {"margin": float("inf"), "witness": None, "active": []})
    gradients = spec.gradients(x, p)[list(active.indices)]
    result = linprog(
        np.concatenate([np.zeros(n), [-1.0]]),
        A_ub=np.hstack([gradients, np.ones((gradients.shape[0], 1))]),
        b_ub=np.zeros(gradients.shape[0]),
        bounds=[(-1.0, 1.0)] * n + [(None, None)],
        method="highs",
    )
    if result.status != 0:
        raise LPFailure(result.message)
    margin = float(-result.fun)
    return CheckResult(
        "MFCQ",
        margin > MFCQ_TOL,
        {"margin": margin, "witness": result.x[:n], "active": list(active.indices)},
    )


@typechecked
def licq_check(spec: SmoothIneq, x: np.ndarray, p: np.ndarray) -> CheckResult:
    """Check linear independence of the active gradients (SVD rank, tolerance 1e-9 sigma_max)."""
    active = active_set(spec, x, p)
    rank = _rank(spec.gradients(x, p)[list(active.indices)])
    return CheckResult("LICQ", rank == len(active), {"rank": rank, "active": list(active.indices)})


@typechecked
def crcq_check(
    spec: SmoothIneq,
    x: np.ndarray,
    p: np.ndarray,
    delta: float = 1e-2,
    grid: int = 50,
    seed: int = 42,
) -> CheckResult:
    """Check that every subfamily of active gradients keeps its rank near (x, p).

    Points are sampled in the delta-ball of (x, p); the reference is included.

    Raises
    ------
    SizeLimitExceeded
        When more than 12 constraints are active.
    """
    active = active_set(spec, x, p)
    if len(active) > SUBSET_LIMIT:
        raise SizeLimitExceeded("CRCQ subset enumeration", 2 ** len(active), 2**SUBSET_LIMIT)
    rng = np.random.default_rng(seed)
    points = [(x, p)] + [
        (x + sample_ball(rng, spec.n, delta), p + sample_ball(rng, spec.l, delta))
        for _ in range(grid)
    ]
    gradients = [spec.gradients(point, parameter) for point, parameter in points]
    for size in range(1, len(active) + 1):
        for subset in combinations(active.indices, size):
            ranks = {_rank(matrix[list(subset)]) for matrix in gradients}
            if len(ranks) > 1:
                return CheckResult(
                    "CRCQ",
                    False,
                    {"failing_subset": list(subset), "ranks": sorted(ranks), "samples": grid},
                )
    return CheckResult("CRCQ", True, {"failing_subset": None, "samples": grid, "seed": seed})


@dataclass
class MultiplierPolytope:
    """Multiplier set {lambda >= 0 : grad phi_I' lambda_I = v - f, lambda_i = 0 off I}."""

    active: ActiveSet
    gradients: np.ndarray
    rhs: np.ndarray
    vertices: np.ndarray
    bounded: bool

    def stationarity_residual(self, multiplier: np.ndarray) -> float:
        """Return |sum_i lambda_i grad phi_i - (v - f)|."""
        return float(np.linalg.norm(self.gradients.T @ multiplier - self.rhs))

    def to_dict(self) -> Dict[str, Any]:
        """Return the polytope as a dictionary."""
        return {
            "active": list(self.active.indices),
            "equality_matrix": self.gradients.T.tolist(),
            "rhs": self.rhs.tolist(),
            "vertices": self.vertices.tolist(),
            "bounded": self.bounded,
        }


def _lagrangian_hessian(inst: PVSInstance, spec: SmoothIneq, multiplier: np.ndarray) -> np.ndarray:
    return inst.base.Q + np.einsum("k,kij->ij", multiplier, spec.A)


@typechecked
def multipliers(
    spec: SmoothIneq,
    inst: PVSInstance,
    x: np.ndarray,
    p: np.ndarray,
    q: np.ndarray,
    v: np.ndarray,
) -> MultiplierPolytope:
    """Return the multiplier set at (x, p, q, v) with its vertices.

    Vertices are the basic feasible solutions: for each subset B of the
    active constraints of size rank(grad phi_I) with independent gradients,
    the solution of grad phi_B' lambda_B = v - f is kept when nonnegative.
    Boundedness is decided by the linear program max sum mu over
    {mu >= 0, grad phi_I' mu = 0, mu <= 1}.

    Raises
    ------
    EmptyMultiplierSet
        When v - f is not a nonnegative combination of the active gradients.
    SizeLimitExceeded
        When more than 12 constraints are active.
    """
    active = active_set(spec, x, p)
    if len(active) > SUBSET_LIMIT:
        raise SizeLimitExceeded("multiplier vertex enumeration", 2 ** len(active), 2**SUBSET_LIMIT)
    s = spec.n_constraints
    gradients = spec.gradients(x, p)
    rhs = v - inst.base(x, p, q)
    indices = list(active.indices)
    rows = gradients[indices]
    if indices:
        _, residual = nnls(rows.T, rhs)
    else:
        residual = float(np.linalg.norm(rhs))
    if residual > MULTIPLIER_TOL * max(1.0, float(np.linalg.norm(rhs))):
        raise EmptyMultiplierSet(float(residual))

    bounded = True
    if indices:
        result = linprog(
            -np.ones(len(indices)),
            A_eq=rows.T,
            b_eq=np.zeros(spec.n),
            bounds=[(0.0, 1.0)] * len(indices),
            method="highs",
        )
        if result.status != 0:
            raise LPFailure(result.message)
        bounded = bool(-result.fun <= MULTIPLIER_TOL)

    rank = _rank(rows)
    vertices: List[np.ndarray] = []
    for subset in combinations(indices, rank):
        basis = gradients[list(subset)]
        if _rank(basis) < rank:
            continue
        multiplier = np.zeros(s)
        if subset:
            multiplier[list(subset)] = np.linalg.lstsq(basis.T, rhs, rcond=None)[0]
        if multiplier.min(initial=0.0) < -1e-12:
            continue
        if np.linalg.norm(gradients.T @ multiplier - rhs) > MULTIPLIER_TOL * max(1.0, float(np.linalg.norm(rhs))):
            continue
        multiplier = np.maximum(multiplier, 0.0)
        if not any(np.linalg.norm(multiplier - vertex) <= 1e-9 for vertex in vertices):
            vertices.append(multiplier)
    return MultiplierPolytope(
        active=active,
        gradients=gradients,
        rhs=rhs,
        vertices=np.array(vertices).reshape(len(vertices), s),
        bounded=bounded,
    )


def _reference(inst: PVSInstance) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    ref = inst.reference
    return ref.x, ref.p, ref.q, ref.v


@typechecked
def gssosc_check(
    spec: SmoothIneq,
    inst: PVSInstance,
    x: np.ndarray,
    p: np.ndarray,
    q: np.ndarray,
    v: np.ndarray,
    samples: int = INTERIOR_SAMPLES,
    seed: int = 42,
) -> CheckResult:
    """Check positive definiteness of the Lagrangian Hessian on null(grad phi_I+) for all multipliers.

    The condition is checked at every vertex of the multiplier set and at
    sampled convex combinations of the vertices; the positive index set
    changes across the set, so the sampled part is not exhaustive.

    Raises
    ------
    UnboundedMultiplierSet
        When the multiplier set is unbounded.
    """
    polytope = multipliers(spec, inst, x, p, q, v)
    if not polytope.bounded:
        raise UnboundedMultiplierSet()
    rng = np.random.default_rng(seed)
    candidates = list(polytope.vertices)
    if polytope.vertices.shape[0] > 1:
        weights = rng.dirichlet(np.ones(polytope.vertices.shape[0]), size=samples)
        candidates.extend(weights @ polytope.vertices)
    worst, failing, witness = np.inf, None, None
    for multiplier in candidates:
        positive = polytope.active.positive(multiplier)
        basis = null_space_basis(polytope.gradients[list(positive)], spec.n) if positive else np.eye(spec.n)
        value, direction = restricted_min_eigenvalue(_lagrangian_hessian(inst, spec, multiplier), basis)
        if value < worst:
            worst, failing, witness = value, multiplier, direction
    holds = bool(worst > CURVATURE_TOL)
    return CheckResult(
        "GSSOSC",
        holds,
        {
            "min_curvature": worst,
            "failing_multiplier": None if holds else failing,
            "witness": None if holds else witness,
            "vertices": polytope.vertices,
            "checked": len(candidates),
            "caveat": "vertices and sampled interior multipliers only",
        },
    )


def _cone_curvature(
    spec: SmoothIneq, inst: PVSInstance, polytope: MultiplierPolytope
) -> Tuple[float, Optional[np.ndarray], Optional[np.ndarray]]:
    """Return the least curvature over the test cones of the vertices of a multiplier set."""
    worst, witness, failing = np.inf, None, None
    for multiplier in polytope.vertices:
        positive = polytope.active.positive(multiplier)
        zero = [i for i in polytope.active.indices if i not in positive]
        value, direction = cone_min_curvature(
            _lagrangian_hessian(inst, spec, multiplier),
            polytope.gradients[list(positive)].reshape(len(positive), spec.n),
            polytope.gradients[zero].reshape(len(zero), spec.n),
        )
        if value < worst:
            worst, witness, failing = value, direction, multiplier
    return worst, witness, failing


def _graph_samples(
    spec: SmoothIneq, inst: PVSInstance, eta: float, count: int, seed: int
) -> List[Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]:
    """Sample points of the multiplier graph in the eta-ball of the reference, reference first."""
    x_ref, p_ref, q_ref, v_ref = _reference(inst)
    rng = np.random.default_rng(seed)
    radius = eta / 3.0
    samples = [(x_ref, p_ref, q_ref, v_ref)]
    attempts = 0
    while len(samples) < count and attempts < 20 * count:
        attempts += 1
        p = p_ref + sample_ball(rng, inst.l, radius)
        q = q_ref + sample_ball(rng, inst.m, radius)
        x = spec.project(x_ref + sample_ball(rng, inst.n, radius), p)
        indices = list(np.flatnonzero(spec.phi(x, p) >= -ACTIVE_TOL))
        target = v_ref + sample_ball(rng, inst.n, radius) - inst.base(x, p, q)
        v = inst.base(x, p, q)
        if indices:
            weights, _ = nnls(spec.gradients(x, p)[indices].T, target)
            v = v + spec.gradients(x, p)[indices].T @ weights
        distance = np.sqrt(
            np.sum((x - x_ref) ** 2)
            + np.sum((p - p_ref) ** 2)
            + np.sum((q - q_ref) ** 2)
            + np.sum((v - v_ref) ** 2)
        )
        if distance <= eta:
            samples.append((x, p, q, v))
    return samples


@typechecked
def gusosc_check(
    spec: SmoothIneq,
    inst: PVSInstance,
    eta: float = 1e-2,
    count: int = 500,
    seed: int = 42,
    jobs: int = 1,
    verbose: bool = False,
) -> CheckResult:
    """Check the uniform second-order condition on a neighborhood of the reference in the multiplier graph.

    For each sampled (x, p, q, v) and each vertex lambda of its multiplier
    set, u'H(lambda)u is minimized over the unit vectors of the cone
    {<grad phi_i, u> = 0 for i in I+, <grad phi_i, u> >= 0 for i in I minus I+}
    by face enumeration. The condition holds with the least value found
    when it exceeds 1e-6.

    Raises
    ------
    MFCQFailure
        When MFCQ fails at the reference point.
    """
    x_ref, p_ref, _, _ = _reference(inst)
    mfcq = mfcq_check(spec, x_ref, p_ref)
    if not mfcq.holds:
        raise MFCQFailure(mfcq.data["margin"])
    samples = _graph_samples(spec, inst, eta, count, seed)

    def run(sample):
        return _cone_curvature(spec, inst, multipliers(spec, inst, *sample))

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as executor:
        results = list(
            tqdm(
                executor.map(run, samples),
                total=len(samples),
                desc="Checking uniform second-order condition",
                unit="sample",
                leave=False,
                dynamic_ncols=True,
                disable=not verbose,
            )
        )
    position = int(np.argmin([value for value, _, _ in results]))
    best, witness, failing = results[position]
    holds = bool(best > GUSOSC_TOL)
    return CheckResult(
        "GUSOSC",
        holds,
        {
            "ell_best": best,
            "witness": None if holds else {"u": witness, "multiplier": failing, "x": samples[position][0]},
            "samples": len(samples),
            "eta": eta,
            "seed": seed,
        },
    )


@typechecked
def scoc_bordered_determinant(spec: SmoothIneq, inst: PVSInstance, multiplier: np.ndarray) -> CheckResult:
    """Return the determinants of [[H, G_J'], [-G_J, 0]] at the reference point.

    J ranges over the maximal subsets of I+ with independent gradients;
    without positive multipliers the determinant of H alone is returned.

    Raises
    ------
    NoIndependentSubset
        When the positive-multiplier gradients all vanish.
    """
    x, p, _, _ = _reference(inst)
    active = active_set(spec, x, p)
    positive = active.positive(multiplier)
    gradients = spec.gradients(x, p)
    H = _lagrangian_hessian(inst, spec, multiplier)
    rank = _rank(gradients[list(positive)])
    if positive and rank == 0:
        raise NoIndependentSubset()
    determinants = []
    for subset in combinations(positive, rank):
        G = gradients[list(subset)]
        if _rank(G) < rank:
            continue
        k = len(subset)
        matrix = np.block([[H, G.T], [-G, np.zeros((k, k))]])
        scale = max(1.0, float(np.linalg.norm(matrix, ord=2)) ** matrix.shape[0])
        determinants.append(
            {"subset": list(subset), "determinant": float(np.linalg.det(matrix)), "scale": scale}
        )
    any_zero = any(abs(item["determinant"]) <= DETERMINANT_TOL * item["scale"] for item in determinants)
    return CheckResult(
        "SCOC_det_zero",
        any_zero,
        {"determinants": determinants, "multiplier": multiplier},
    )


@typechecked
def certify_full_stability(
    inst: PVSInstance,
    eta: float = 1e-2,
    count: int = 500,
    seed: int = 42,
    delta: float = 1e-2,
    jobs: int = 1,
    verbose: bool = False,
) -> CertificateReport:
    """Run every check at the reference point and decide full stability.

    The verdict is FULLY_STABLE when MFCQ, CRCQ and GUSOSC hold. When LICQ
    holds, the route through GSSOSC is also decided and a disagreement
    between the two routes is reported as a software error.

    Raises
    ------
    UnsupportedPotential
        When the potential is not an inequality system.
    """
    spec = _require_smooth(inst)
    x, p, q, v = _reference(inst)
    checks: Dict[str, CheckResult] = {}
    notes: List[str] = []
    checks["MFCQ"] = mfcq_check(spec, x, p)
    checks["LICQ"] = licq_check(spec, x, p)
    checks["CRCQ"] = crcq_check(spec, x, p, delta=delta, seed=seed)
    polytope = multipliers(spec, inst, x, p, q, v)
    checks["multipliers"] = CheckResult("multipliers", polytope.bounded, polytope.to_dict())
    try:
        checks["GSSOSC"] = gssosc_check(spec, inst, x, p, q, v, seed=seed)
    except UnboundedMultiplierSet as error:
        checks["GSSOSC"] = CheckResult("GSSOSC", None, {"reason": str(error)})
    try:
        checks["GUSOSC"] = gusosc_check(spec, inst, eta=eta, count=count, seed=seed, jobs=jobs, verbose=verbose)
    except MFCQFailure as error:
        checks["GUSOSC"] = CheckResult("GUSOSC", None, {"reason": str(error)})
    if polytope.vertices.shape[0]:
        failing = checks["GSSOSC"].data.get("failing_multiplier")
        multiplier = np.asarray(failing if failing is not None else polytope.vertices[0], dtype=float)
        try:
            checks["SCOC_det_zero"] = scoc_bordered_determinant(spec, inst, multiplier)
        except NoIndependentSubset as error:
            checks["SCOC_det_zero"] = CheckResult("SCOC_det_zero", None, {"reason": str(error)})

    uniform_route = bool(checks["MFCQ"].holds and checks["CRCQ"].holds and checks["GUSOSC"].holds)
    pointwise_route = None
    if checks["LICQ"].holds:
        pointwise_route = bool(checks["GSSOSC"].holds)
        if pointwise_route != uniform_route:
            message = (
                "Certification routes disagree under LICQ: "
                f"uniform route {uniform_route}, pointwise route {pointwise_route}"
            )
            warnings.warn(message, stacklevel=2)
            notes.append(message)
    else:
        notes.append("LICQ fails: the GSSOSC route is inapplicable")
    return CertificateReport(
        verdict="FULLY_STABLE" if uniform_route else "NOT_CERTIFIED",
        checks=checks,
        routes={"uniform": uniform_route, "pointwise": pointwise_route},
        tolerances={
            "active": ACTIVE_TOL,
            "mfcq": MFCQ_TOL,
            "curvature": CURVATURE_TOL,
            "gusosc": GUSOSC_TOL,
            "determinant": DETERMINANT_TOL,
            "eta": eta,
            "delta": delta,
        },
        seed=seed,
        notes=notes,
    )
