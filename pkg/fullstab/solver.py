"""Submodule providing the contraction fixed-point solver for parametric variational systems.

The solution of v in f(x, p, q) + subdifferential of g(., p) at x is the
fixed point of H(x) = P(x + lam v - lam f(x, p, q), p), where P is the
proximal mapping of g with parameter lam. When the strong monotonicity
modulus sigma of f exceeds the prox-parameter r of g, a small enough lam
makes H a contraction with factor
alpha = sqrt(1 - 2 lam sigma + lam^2 L^2) / (1 - r lam).
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple
import warnings
import numpy as np
import pandas as pd
from tqdm.auto import tqdm
from typeguard import typechecked
from fullstab.exceptions import (
    ContractionViolation,
    FullStabilityError,
    MaxIterationsExceeded,
    NonContractiveRegime,
    PairSolveError,
    ProxParameterError,
    SolutionResidualError,
    UnsupportedPotential,
)
from fullstab.model import (
    IndicatorBox,
    PotentialConstants,
    PVSInstance,
    QuadraticPlusIndicator,
    lipschitz_modulus,
    strong_monotonicity_modulus,
)
from fullstab.prox import ProxQuery, potential_constants, prox_map
from fullstab.reports import FailureProbe, SolveResult
from fullstab.utils import as_vector, sample_ball

RATE_SLACK = 0.01
VIOLATION_STREAK = 25
RESIDUAL_TOL = 1e-8
RATIO_FLOOR = 1e-12


@dataclass
class SolverConfig:
    """Configuration of the contraction solver.

    Parameters
    ----------
    lam : Optional[float]
        Proximal step, selected automatically when None.
    tol : float
        Stop when two consecutive iterates are closer than this.
    max_iter : int
        Maximal number of iterations.
    r : Optional[float]
        Prox-parameter overriding the instance or default value.
    delta : float
        Radius of the ball around the reference point used for random starts.
    """

    lam: Optional[float] = None
    tol: float = 1e-10
    max_iter: int = 10_000
    r: Optional[float] = None
    delta: float = 1e-2

    def __post_init__(self):
        if self.lam is not None and self.lam <= 0:
            raise ProxParameterError(f"lambda={self.lam} must be positive")
        if self.tol <= 0:
            raise ValueError(f"Tolerance must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")
        if self.delta <= 0:
            raise ValueError(f"delta must be positive, got {self.delta}")


@typechecked
def select_lambda(sigma: float, L: float, r: float) -> float:
    """Return the proximal step, half of the largest step keeping the map contractive.

    Parameters
    ----------
    sigma : float
        Strong monotonicity modulus of the base map.
    L : float
        Lipschitz modulus of the base map.
    r : float
        Prox-parameter of the potential.

    Raises
    ------
    NonContractiveRegime
        When sigma does not exceed r.

    >>> select_lambda(1.0, 2.0, 0.0)
    0.25
    >>> select_lambda(1.0, 1.0, 0.0)
    1.0
    """
    if sigma <= r:
        raise NonContractiveRegime(sigma, r)
    candidates = [1.0]
    if r > 0:
        candidates.append(0.9 / r)
    if L > r:
        candidates.append((sigma - r) / (L**2 - r**2))
    return float(min(candidates))


def _radicand(lam: float, sigma: float, L: float) -> float:
    return 1.0 - 2.0 * lam * sigma + lam**2 * L**2


@typechecked
def contraction_factor(lam: float, sigma: float, L: float, r: float) -> float:
    """Return alpha = sqrt(1 - 2 lam sigma + lam^2 L^2) / (1 - r lam).

    A negative radicand is clamped to zero with a warning.

    Raises
    ------
    ProxParameterError
        When lam is not in (0, 1/r).

    >>> contraction_factor(1.0, 1.0, 1.0, 0.0)
    0.0
    """
    if lam <= 0 or lam * r >= 1.0:
        raise ProxParameterError(f"lambda={lam} must lie in (0, 1/r) with r={r}")
    radicand = _radicand(lam, sigma, L)
    if radicand < 0:
        warnings.warn(
            f"Negative radicand {radicand:.3e} in the contraction factor: the moduli are "
            "super-contractive (L < sigma), clamping to zero.",
            stacklevel=2,
        )
        radicand = 0.0
    return float(np.sqrt(radicand) / (1.0 - r * lam))


@dataclass
class SolverSetup:
    """Moduli and step shared by every solve of one instance."""

    sigma: float
    L: float
    constants: PotentialConstants
    lam: float
    alpha: float
    super_contractive: bool


@typechecked
def prepare_solver(
    inst: PVSInstance,
    cfg: Optional[SolverConfig] = None,
    constants: Optional[PotentialConstants] = None,
) -> SolverSetup:
    """Compute the moduli, the prox-parameter and the proximal step of an instance.

    Raises
    ------
    NonContractiveRegime
        When sigma does not exceed r.
    ProxParameterError
        When the configured lambda does not give a contraction.
    """
    cfg = cfg or SolverConfig()
    sigma = strong_monotonicity_modulus(inst)
    L = lipschitz_modulus(inst)
    if constants is None:
        constants = potential_constants(inst, r=cfg.r)
    r = constants.r
    if sigma <= r:
        raise NonContractiveRegime(sigma, r)
    lam = cfg.lam if cfg.lam is not None else select_lambda(sigma, L, r)
    super_contractive = _radicand(lam, sigma, L) < 0
    alpha = contraction_factor(lam, sigma, L, r)
    if alpha >= 1.0:
        raise ProxParameterError(
            f"lambda={lam} gives contraction factor {alpha:.6g} >= 1: "
            f"2(sigma - r) > lambda (L^2 - r^2) is required"
        )
    return SolverSetup(sigma, L, constants, lam, alpha, super_contractive)


@typechecked
def solve(
    inst: PVSInstance,
    v: np.ndarray,
    p: np.ndarray,
    q: np.ndarray,
    cfg: Optional[SolverConfig] = None,
    start: Optional[np.ndarray] = None,
    setup: Optional[SolverSetup] = None,
) -> SolveResult:
    """Solve v in f(x, p, q) + subdifferential of g(., p) at x by contraction iterations.

    Iterates x_{k+1} = P(x_k + lam v - lam f(x_k, p, q), p) from the
    reference x (or the given start) until two iterates are closer than
    the tolerance and, in addition, either the a posteriori error bound
    alpha / (1 - alpha) times the step is within the tolerance or the
    inclusion residual is within 1e-8. The reported number of iterations
    excludes the final confirming step, and the measured rate is the
    largest ratio of consecutive step lengths.

    Parameters
    ----------
    inst : PVSInstance
        The instance.
    v : np.ndarray
        Left-hand side of the inclusion.
    p : np.ndarray
        First parameter.
    q : np.ndarray
        Second parameter.
    cfg : Optional[SolverConfig]
        Solver configuration.
    start : Optional[np.ndarray]
        Starting point, the reference point by default.
    setup : Optional[SolverSetup]
        Precomputed moduli and step, see prepare_solver.

    Raises
    ------
    NonContractiveRegime
        When sigma does not exceed r.
    ContractionViolation
        When the step ratio exceeds alpha + 0.01 for 25 consecutive iterations.
    MaxIterationsExceeded
        When the tolerance is not reached within max_iter iterations.
    SolutionResidualError
        When the limit point violates the inclusion by more than 1e-8.
    """
    cfg = cfg or SolverConfig()
    setup = setup or prepare_solver(inst, cfg)
    v = as_vector(v, inst.n, name="v")
    p = as_vector(p, inst.l, name="p")
    q = as_vector(q, inst.m, name="q")
    lam = setup.lam
    x = inst.reference.x.copy() if start is None else as_vector(start, inst.n, name="start")
    error_factor = setup.alpha / (1.0 - setup.alpha)
    previous = None
    rate = 0.0
    streak = 0
    step = np.inf
    for iteration in range(cfg.max_iter):
        argument = x + lam * v - lam * inst.base(x, p, q)
        y = prox_map(inst.potential, ProxQuery(lam, argument, p))
        step = float(np.linalg.norm(y - x))
        x = y
        if step <= cfg.tol:
            # The distance to the fixed point is at most alpha / (1 - alpha) times the step.
            if error_factor * step <= cfg.tol:
                break
            if inst.inclusion_residual(x, v, p, q) <= RESIDUAL_TOL:
                break
        if previous is not None and previous > RATIO_FLOOR * max(1.0, float(np.linalg.norm(x))):
            ratio = step / previous
            rate = max(rate, ratio)
            streak = streak + 1 if ratio > setup.alpha + RATE_SLACK else 0
            if streak >= VIOLATION_STREAK:
                raise ContractionViolation(ratio, setup.alpha, streak)
        previous = step
    else:
        raise MaxIterationsExceeded(cfg.max_iter, step)
    residual = inst.inclusion_residual(x, v, p, q)
    if residual > RESIDUAL_TOL:
        raise SolutionResidualError(residual)
    return SolveResult(
        x=x,
        iterations=iteration,
        measured_rate=rate,
        alpha=setup.alpha,
        fixed_point_residual=step,
        inclusion_residual=residual,
        lam=lam,
        r=setup.constants.r,
        super_contractive=setup.super_contractive,
    )


@dataclass
class StartSpread:
    """Solutions reached from random starts around the reference point."""

    starts: np.ndarray
    solutions: np.ndarray
    spread: float

    def agrees(self, tol: float) -> bool:
        """Return whether every pair of solutions is within ten times the tolerance."""
        return bool(self.spread <= 10.0 * tol)

    def to_dict(self):
        return {
            "starts": self.starts.tolist(),
            "solutions": self.solutions.tolist(),
            "spread": self.spread,
        }


@typechecked
def solve_from_random_starts(
    inst: PVSInstance,
    v: np.ndarray,
    p: np.ndarray,
    q: np.ndarray,
    cfg: Optional[SolverConfig] = None,
    count: int = 10,
    seed: int = 42,
) -> StartSpread:
    """Solve from starts drawn uniformly in the ball of radius delta around the reference x.

    The spread is the largest pairwise distance between the solutions;
    a single-valued localization keeps it within ten times the tolerance.

    Raises
    ------
    ValueError
        When count is not positive.
    PairSolveError
        When the solve from some start fails, with the start position.
    """
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    cfg = cfg or SolverConfig()
    setup = prepare_solver(inst, cfg)
    rng = np.random.default_rng(seed)
    starts = np.array(
        [inst.reference.x + sample_ball(rng, inst.n, cfg.delta) for _ in range(count)]
    )
    solutions = []
    for index, start in enumerate(starts):
        try:
            solutions.append(solve(inst, v, p, q, cfg, start=start, setup=setup).x)
        except FullStabilityError as error:
            raise PairSolveError(index, str(error)) from error
    solutions = np.array(solutions)
    differences = solutions[:, None, :] - solutions[None, :, :]
    spread = float(np.max(np.linalg.norm(differences, axis=-1)))
    return StartSpread(starts=starts, solutions=solutions, spread=spread)


def _separable_data(inst: PVSInstance) -> Tuple[np.ndarray, IndicatorBox]:
    """Return the diagonal slopes and the box of a separable instance."""
    potential = inst.potential
    W = np.zeros((inst.n, inst.n))
    if isinstance(potential, QuadraticPlusIndicator):
        W, potential = potential.W, potential.inner
    slopes = inst.base.Q + W
    if not isinstance(potential, IndicatorBox) or np.count_nonzero(slopes - np.diag(np.diag(slopes))):
        raise UnsupportedPotential(inst.potential.kind, "separable_solution_sets")
    return np.diag(slopes), potential


@typechecked
def separable_solution_sets(
    inst: PVSInstance, v: np.ndarray, p: np.ndarray, q: np.ndarray
) -> List[List[Tuple[float, float]]]:
    """Return the exact solution set of a separable instance, coordinate by coordinate.

    For a diagonal Q + W and a box C(p) every coordinate solves
    s_i - k_i x_i in N_[a_i, b_i](x_i), with k_i the diagonal entry and
    s_i = v_i - c_i - (Bp + Dq)_i. Each coordinate gets a list of closed
    intervals (points are degenerate intervals); the solution set is
    their product, empty when one of the lists is empty.

    Raises
    ------
    UnsupportedPotential
        When the instance is not separable.
    """
    slopes, box = _separable_data(inst)
    lower, upper = box.bounds(as_vector(p, inst.l, name="p"))
    base = inst.base
    rhs = (
        as_vector(v, inst.n, name="v")
        - base.c
        - base.B @ as_vector(p, inst.l, name="p")
        - base.D @ as_vector(q, inst.m, name="q")
    )
    solutions: List[List[Tuple[float, float]]] = []
    for a, b, k, s in zip(lower, upper, slopes, rhs):
        if b - a <= 0:
            solutions.append([(float(a), float(a))])
            continue
        if abs(k) <= 1e-14:
            if abs(s) <= 1e-14:
                solutions.append([(float(a), float(b))])
                continue
            coordinate = []
        else:
            root = s / k
            coordinate = [(float(root), float(root))] if a < root < b else []
        if np.isfinite(a) and s - k * a <= 1e-14:
            coordinate.append((float(a), float(a)))
        if np.isfinite(b) and s - k * b >= -1e-14:
            coordinate.append((float(b), float(b)))
        solutions.append(sorted(set(coordinate)))
    return solutions


@typechecked
def solve_certified_failure_probe(
    inst: PVSInstance,
    v: np.ndarray,
    p: np.ndarray,
    q: np.ndarray,
    cfg: Optional[SolverConfig] = None,
) -> FailureProbe:
    """Report why the contraction solver refuses an instance and probe its solvability.

    When sigma exceeds the threshold R the probe declines and points to
    solve. Otherwise the separable solver decides whether the solution
    set at (v, p, q) is empty, unique or not unique; an empty set comes
    with the coordinate of c + Bp + Dq - v that no normal cone can absorb.
    """
    cfg = cfg or SolverConfig()
    sigma = strong_monotonicity_modulus(inst)
    constants = potential_constants(inst, r=cfg.r)
    if sigma > constants.R:
        return FailureProbe(
            sigma=sigma,
            R=constants.R,
            declined=True,
            message="sigma exceeds the threshold of prox-regularity: use solve",
        )
    message = (
        f"sigma={sigma:.6g} does not exceed the threshold R={constants.R:.6g}: "
        "no single-valued localization is guaranteed and the contraction is refused"
    )
    try:
        sets = separable_solution_sets(inst, v, p, q)
    except UnsupportedPotential:
        return FailureProbe(
            sigma=sigma, R=constants.R, declined=False, message=f"{message}; solvability not probed"
        )
    base = inst.base
    offset = base.c + base.B @ p + base.D @ q - v
    empty = [i for i, coordinate in enumerate(sets) if not coordinate]
    if empty:
        return FailureProbe(
            sigma=sigma,
            R=constants.R,
            declined=False,
            solution_set="empty",
            witness={"coordinate": empty[0], "offset": offset, "solutions": sets},
            message=message,
        )
    unique = all(len(coordinate) == 1 and coordinate[0][0] == coordinate[0][1] for coordinate in sets)
    return FailureProbe(
        sigma=sigma,
        R=constants.R,
        declined=False,
        solution_set="unique" if unique else "non-unique",
        witness={"offset": offset, "solutions": sets},
        message=message,
    )


def _columns(frame: pd.DataFrame, prefix: str, size: int, default: np.ndarray) -> np.ndarray:
    names = [f"{prefix}{i}" for i in range(size)]
    values = np.tile(default, (len(frame), 1))
    for i, name in enumerate(names):
        if name in frame.columns:
            values[:, i] = frame[name].to_numpy(dtype=float)
    return values


@typechecked
def solve_grid(
    inst: PVSInstance,
    frame: pd.DataFrame,
    cfg: Optional[SolverConfig] = None,
    jobs: int = 1,
    verbose: bool = False,
) -> pd.DataFrame:
    """Solve the instance on every row of a parameter grid.

    Columns v0.., p0.., q0.. give the coordinates of (v, p, q); missing
    columns take the reference values. The returned frame appends the
    solution columns x0.., the iteration count and the inclusion residual.

    Raises
    ------
    PairSolveError
        When the solve of some row fails, with the row position.
    """
    cfg = cfg or SolverConfig()
    setup = prepare_solver(inst, cfg)
    ref = inst.reference
    V = _columns(frame, "v", inst.n, ref.v)
    P = _columns(frame, "p", inst.l, ref.p)
    Q = _columns(frame, "q", inst.m, ref.q)

    def run(index: int) -> SolveResult:
        try:
            return solve(inst, V[index], P[index], Q[index], cfg, setup=setup)
        except FullStabilityError as error:
            raise PairSolveError(index, str(error)) from error

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as executor:
        results = list(
            tqdm(
                executor.map(run, range(len(frame))),
                total=len(frame),
                desc="Solving parameter grid",
                unit="row",
                leave=False,
                dynamic_ncols=True,
                disable=not verbose,
            )
        )
    solved = frame.copy()
    for i in range(inst.n):
        solved[f"x{i}"] = [result.x[i] for result in results]
    solved["iterations"] = [result.iterations for result in results]
    solved["residual"] = [result.inclusion_residual for result in results]
    return solved
