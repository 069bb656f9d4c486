"""Submodule providing proximal mappings and threshold-of-prox-regularity calculators."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import ceil
from typing import Any, Dict, List, Optional, Tuple
import numpy as np
from scipy.optimize import nnls
from tqdm.auto import tqdm
from typeguard import typechecked
from fullstab.exceptions import (
    InfeasiblePolyhedron,
    InsufficientSamples,
    ProxParameterError,
    ReferenceResidualError,
    UnsupportedPotential,
)
from fullstab.model import (
    IndicatorBox,
    PotentialConstants,
    Potential,
    PVSInstance,
    QuadraticPlusIndicator,
    strong_monotonicity_modulus,
)
from fullstab.pointbased import coordinate_cone
from fullstab.polyhedra import cone_distance, cone_min_curvature
from fullstab.qp import solve_qp
from fullstab.utils import sample_ball

DEFAULT_ETA = 1e-2
PAIR_FLOOR = 1e-6
GROUP_SIZE = 250
CENTER_TOL = 1e-9

Center = Tuple[np.ndarray, np.ndarray, np.ndarray]


@dataclass(frozen=True)
class ProxQuery:
    """Query of the proximal mapping: solve v in x + lam * subdifferential of g(., p) at x."""

    lam: float
    v: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        if not self.lam > 0:
            raise ProxParameterError(f"lambda={self.lam} must be positive")


@dataclass
class SubgradientSample:
    """Point (x, p, v) of the graph of the partial subdifferential."""

    x: np.ndarray
    p: np.ndarray
    v: np.ndarray
    residual: float

    def to_dict(self) -> Dict[str, Any]:
        """Return the sample as a dictionary."""
        return {
            "x": self.x.tolist(),
            "p": self.p.tolist(),
            "v": self.v.tolist(),
            "residual": self.residual,
        }


@dataclass
class ThresholdEstimate:
    """Estimate of the threshold of prox-regularity."""

    R_est: float
    method: str
    eta: Optional[float]
    samples: int
    tau: Optional[float] = None
    witness: Optional[np.ndarray] = None

    def to_dict(self) -> Dict[str, Any]:
        """Return the estimate as a dictionary."""
        return {
            "R_est": self.R_est,
            "method": self.method,
            "eta": self.eta,
            "samples": self.samples,
            "tau": self.tau,
            "witness": None if self.witness is None else self.witness.tolist(),
        }


@typechecked
def prox_map(potential: Potential, query: ProxQuery) -> np.ndarray:
    """Return the localized solution x of v in x + lam * subdifferential of g(., p) at x.

    For indicators this is the projection onto C(p); for a quadratic plus
    indicator it minimizes 1/2|x - v|^2 + lam/2 x'Wx over C(p), which is
    a strictly convex problem exactly when I + lam W is positive definite.

    Parameters
    ----------
    potential : Potential
        The potential g.
    query : ProxQuery
        The parameter lam and the point (v, p).

    Raises
    ------
    ProxParameterError
        When lam is at least the inverse of the known threshold, or
        when I + lam W is not positive definite.
    """
    threshold = potential.threshold()
    if threshold is not None and threshold > 0 and query.lam * threshold >= 1.0:
        raise ProxParameterError(
            f"lambda={query.lam} must be below 1/R with threshold R={threshold}"
        )
    if not isinstance(potential, QuadraticPlusIndicator):
        return potential.project(query.v, query.p)

    H = np.eye(potential.n) + query.lam * potential.W
    if np.linalg.eigvalsh(H)[0] <= 1e-12:
        raise ProxParameterError("I + lambda W is not positive definite")
    inner = potential.inner
    if isinstance(inner, IndicatorBox) and np.count_nonzero(H - np.diag(np.diag(H))) == 0:
        lower, upper = inner.bounds(query.p)
        return np.clip(query.v / np.diag(H), lower, upper)
    C = potential.polyhedron(query.p)
    return solve_qp(H, -query.v, C.G, C.h, C.feasible_point).x


@typechecked
def prox_residual(potential: Potential, query: ProxQuery, x: np.ndarray) -> float:
    """Return the residual of v in x + lam * subdifferential of g(., p) at x."""
    normal = query.v - x - query.lam * potential.smooth_gradient(x)
    return potential.infeasibility(x, query.p) + cone_distance(
        potential.normal_generators(x, query.p), normal
    )


@typechecked
def sample_subdifferential_graph(
    potential: Potential,
    center: Center,
    eta: float,
    count: int,
    seed: int,
    parameter: Optional[np.ndarray] = None,
) -> List[SubgradientSample]:
    """Sample points of the subdifferential graph near a reference point.

    Each attempt perturbs p, projects a perturbation of x onto C(p) (landing
    on a face of the set), and builds a normal vector from the constraints
    active there: the part of the reference normal that the face still
    supports plus a random nonnegative combination of the active normals.
    Attempts whose sample leaves the ball of radius eta around the center
    are discarded. Samples are generated sequentially, so a smaller count
    with the same seed returns a prefix of a larger one.

    Parameters
    ----------
    potential : Potential
        The potential g.
    center : Tuple[np.ndarray, np.ndarray, np.ndarray]
        The reference triple (x, p, v) with v a subgradient of g(., p) at x.
    eta : float
        Radius of the sampling ball.
    count : int
        Number of samples to return.
    seed : int
        Seed of the random stream.
    parameter : Optional[np.ndarray]
        When given, all samples use this value of p.

    Raises
    ------
    ReferenceResidualError
        When the center is not on the graph.
    """
    x_ref, p_ref, v_ref = center
    residual = potential.subgradient_residual(x_ref, p_ref, v_ref)
    if residual > CENTER_TOL:
        raise ReferenceResidualError(residual, CENTER_TOL)
    if count == 0:
        return []
    rng = np.random.default_rng(seed)
    radius = eta / 3.0
    W = potential.hessian
    reference_normal = v_ref - W @ x_ref
    samples: List[SubgradientSample] = []
    attempts = 0
    while len(samples) < count and attempts < 20 * count:
        attempts += 1
        if parameter is not None:
            p = np.asarray(parameter, dtype=float)
        else:
            p = p_ref + sample_ball(rng, p_ref.shape[0], radius)
        try:
            x = potential.project(x_ref + sample_ball(rng, x_ref.shape[0], radius), p)
        except InfeasiblePolyhedron:
            continue
        normals = potential.normal_generators(x, p)
        u = np.zeros_like(x)
        if normals.shape[0]:
            anchor, _ = nnls(normals.T, reference_normal)
            scale = radius / (normals.shape[0] * max(np.linalg.norm(normals, axis=1).max(), 1e-12))
            mask = rng.uniform(size=normals.shape[0]) < 0.5
            u = normals.T @ (anchor + mask * rng.uniform(0.0, scale, size=normals.shape[0]))
        v = W @ x + u
        distance = np.sqrt(
            np.sum((x - x_ref) ** 2) + np.sum((p - p_ref) ** 2) + np.sum((v - v_ref) ** 2)
        )
        if distance > eta:
            continue
        samples.append(
            SubgradientSample(x=x, p=p, v=v, residual=potential.subgradient_residual(x, p, v))
        )
    return samples


def _pairwise_hypomonotonicity(samples: List[SubgradientSample]) -> float:
    """Return the largest -<dv, dx>/|dx|^2 over pairs with |dx| above the floor."""
    if len(samples) < 2:
        return -np.inf
    X = np.array([sample.x for sample in samples])
    V = np.array([sample.v for sample in samples])
    dX = X[:, None, :] - X[None, :, :]
    dV = V[:, None, :] - V[None, :, :]
    squared = np.sum(dX**2, axis=-1)
    inner = np.sum(dV * dX, axis=-1)
    usable = np.triu(squared >= PAIR_FLOOR**2, k=1)
    if not np.any(usable):
        return -np.inf
    return float(np.max(-inner[usable] / squared[usable]))


@typechecked
def threshold_estimate_hypomonotone(
    potential: Potential,
    center: Center,
    eta: float = DEFAULT_ETA,
    count: int = 1000,
    seed: int = 42,
    jobs: int = 1,
    verbose: bool = False,
) -> ThresholdEstimate:
    """Estimate the threshold of prox-regularity from sampled hypomonotonicity.

    Samples are drawn in groups sharing one value of p (the first group
    uses the reference p). Within each group the estimate is the largest
    value of -<v1 - v2, x1 - x2> / |x1 - x2|^2, and groups are merged by
    maximum, so the result does not depend on the number of workers.

    Parameters
    ----------
    potential : Potential
        The potential g.
    center : Tuple[np.ndarray, np.ndarray, np.ndarray]
        Reference triple (x, p, v).
    eta : float
        Sampling radius.
    count : int
        Total number of samples.
    seed : int
        Seed of the random stream.
    jobs : int
        Number of worker threads.
    verbose : bool
        Whether to show a progress bar.

    Raises
    ------
    InsufficientSamples
        When fewer than two samples are produced.
    """
    x_ref, p_ref, v_ref = center
    groups = max(1, ceil(count / GROUP_SIZE))
    children = np.random.SeedSequence(seed).spawn(groups)

    def run_group(index: int) -> Tuple[float, int]:
        size = min(GROUP_SIZE, count - index * GROUP_SIZE)
        parameter = p_ref
        if index > 0 and p_ref.shape[0] > 0:
            parameter = p_ref + sample_ball(
                np.random.default_rng(children[index]), p_ref.shape[0], eta / 3.0
            )
        samples = sample_subdifferential_graph(
            potential,
            center,
            eta,
            size,
            int(children[index].generate_state(1)[0]),
            parameter=parameter,
        )
        return _pairwise_hypomonotonicity(samples), len(samples)

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as executor:
        results = list(
            tqdm(
                executor.map(run_group, range(groups)),
                total=groups,
                desc="Sampling subgradient graph",
                unit="group",
                leave=False,
                dynamic_ncols=True,
                disable=not verbose,
            )
        )
    produced = sum(size for _, size in results)
    if produced < 2:
        raise InsufficientSamples(produced, 2)
    return ThresholdEstimate(
        R_est=max(0.0, max(value for value, _ in results)),
        method="hypomonotone-sampling",
        eta=eta,
        samples=produced,
    )


@typechecked
def threshold_pointbased_box(
    potential: Potential, x_ref: np.ndarray, v_ref: np.ndarray
) -> ThresholdEstimate:
    """Compute the threshold of a quadratic-plus-box potential from its coderivative.

    The second-order subdifferential splits as W plus the coderivative of
    the box normal cone, which acts coordinate by coordinate. Coordinates
    on a ray piece force w_i = 0, every other piece contributes a term
    <z_i, w_i> whose infimum is 0, so tau_0 is the least value of w'Ww on
    the unit sphere of the remaining coordinates, and R = max(0, -tau_0).

    Parameters
    ----------
    potential : Potential
        A parameter-free quadratic-plus-box potential (or a plain box).
    x_ref : np.ndarray
        Reference point.
    v_ref : np.ndarray
        Reference subgradient.

    Raises
    ------
    UnsupportedPotential
        When the potential is not a box class or its box moves with p.
    """
    inner = potential.inner if isinstance(potential, QuadraticPlusIndicator) else potential
    if not isinstance(inner, IndicatorBox) or np.any(inner.S):
        raise UnsupportedPotential(potential.kind, "threshold_pointbased_box")
    p = np.zeros(potential.l)
    lower, upper = inner.bounds(p)
    normal = v_ref - potential.smooth_gradient(x_ref)
    E, S = coordinate_cone(lower, upper, x_ref, normal, kind="limiting")
    tau, witness = cone_min_curvature(potential.hessian, E, S)
    return ThresholdEstimate(
        R_est=max(0.0, -tau) if np.isfinite(tau) else 0.0,
        method="pointbased-coderivative",
        eta=None,
        samples=0,
        tau=tau,
        witness=witness,
    )


@typechecked
def potential_constants(
    inst: PVSInstance,
    r: Optional[float] = None,
    eta: float = DEFAULT_ETA,
    count: int = 1000,
    seed: int = 42,
    jobs: int = 1,
) -> PotentialConstants:
    """Return the prox-parameter r and threshold R used for an instance.

    The threshold is taken in closed form when the potential class provides
    it, otherwise from the hypomonotonicity estimator. Without an explicit
    r (argument or instance "constants" block) the default is
    R + min(0.01 max(1, sigma - R), (sigma - R) / 2) for closed-form
    thresholds below sigma, R + 0.01 when sigma does not exceed R, and the
    estimate inflated by 10% otherwise.
    """
    threshold = inst.potential.threshold()
    provenance = "closed-form"
    if threshold is None:
        center = (inst.reference.x, inst.reference.p, inst.v_hat)
        threshold = threshold_estimate_hypomonotone(
            inst.potential, center, eta=eta, count=count, seed=seed, jobs=jobs
        ).R_est
        provenance = "estimated"
    if r is None:
        r = inst.constants.get("r")
    if r is None:
        if provenance == "estimated":
            r = max(1.1 * threshold, 1e-6)
        else:
            gap = strong_monotonicity_modulus(inst) - threshold
            r = threshold + (min(0.01 * max(1.0, gap), 0.5 * gap) if gap > 0 else 0.01)
    return PotentialConstants(r=float(r), R=float(threshold), provenance=provenance)
