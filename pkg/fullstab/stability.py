"""Submodule providing empirical checks of full stability and of the quantitative moduli.

Sampled pairs of perturbations are solved with the contraction solver and
compared against the full-stability inequality
|v1 - v2 - 2 kappa (x1 - x2)| <= |v1 - v2| + ell (d(p1, p2)^e + d(q1, q2)),
with exponent e = 1 (Lipschitzian) or e = 1/2 (Hölderian). The least ell
is computed in closed form per pair and maximized over the pairs.
Samples can falsify or evidence the property, never prove it.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple
import warnings
import numpy as np
from tqdm.auto import tqdm
from typeguard import typechecked
from fullstab.exceptions import (
    FullStabilityError,
    NonContractiveRegime,
    PairSolveError,
    ProxParameterError,
    UnsupportedPotential,
)
from fullstab.model import (
    IndicatorBox,
    Potential,
    PVSInstance,
    QuadraticPlusIndicator,
    lipschitz_modulus,
    strong_monotonicity_modulus,
)
from fullstab.polyhedra import hausdorff_local
from fullstab.prox import ProxQuery, potential_constants, prox_map, sample_subdifferential_graph
from fullstab.reports import CheckResult, ModuliReport
from fullstab.solver import SolverConfig, contraction_factor, prepare_solver, select_lambda, solve
from fullstab.utils import sample_ball

CANONICAL_TOL = 1e-7
MONOTONE_TOL = 1e-8
GROWTH_TOL = 1e-9
BOUND_SLACK = 1e-9
HAUSDORFF_SAMPLES = 50
UNBOUNDED_RATIO = 1e6
PAIR_KINDS = ("canonical", "p", "q", "joint")


@dataclass
class SampleConfig:
    """Configuration of the sampling checks.

    Parameters
    ----------
    eta : float
        Radius of the sampling neighborhood of the reference point.
    count : int
        Number of sampled pairs.
    seed : int
        Seed of the random stream.
    """

    eta: float = 1e-2
    count: int = 1000
    seed: int = 42

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.count < 2:
            raise ValueError(f"At least two samples are required, got {self.count}")


@typechecked
def theoretical_moduli(
    sigma: float,
    L: float,
    r: float,
    lam: float,
    rho: float,
    eta: float = 1e-2,
    ell_prox: float = 0.0,
) -> ModuliReport:
    """Return the closed-form constants of the contraction argument.

    Three variants of gamma1 are reported: with the radicand
    1 + lam^2 L^2 - 2 lam kappa, with the radicand of alpha (sigma in place
    of kappa), and the Lipschitzian one without the sqrt(2 eta) factor.
    gamma2 comes with the same two radicands; the kappa variants are None
    when their denominator is not positive.

    Parameters
    ----------
    sigma : float
        Strong monotonicity modulus.
    L : float
        Lipschitz modulus of the base map.
    r : float
        Prox-parameter.
    lam : float
        Proximal step.
    rho : float
        Radius of the prox estimate.
    eta : float
        Radius of the parameter neighborhood.
    ell_prox : float
        Modulus of the proximal mapping in p.

    Raises
    ------
    NonContractiveRegime
        When sigma does not exceed r or alpha is not below one.
    """
    if sigma <= r:
        raise NonContractiveRegime(sigma, r)
    alpha = contraction_factor(lam, sigma, L, r)
    if alpha >= 1.0:
        raise NonContractiveRegime(sigma, r)
    kappa0 = 1.0 - lam * r
    kappa = sigma - r
    scale = lam * L / kappa0
    denominator_sigma = 1.0 - alpha
    denominator_kappa = 1.0 - np.sqrt(max(0.0, 1.0 + lam**2 * L**2 - 2.0 * lam * kappa)) / kappa0
    notes = []
    gamma1_kappa = gamma2_kappa = None
    if denominator_kappa > 0:
        gamma1_kappa = float((scale * np.sqrt(2.0 * eta) + ell_prox) / denominator_kappa)
        gamma2_kappa = float(scale / denominator_kappa)
    else:
        notes.append(
            "gamma1 and gamma2 with the kappa radicand are undefined: non-positive denominator"
        )
    return ModuliReport(
        sigma=sigma,
        L=L,
        r=r,
        lam=lam,
        rho=rho,
        eta=eta,
        kappa0=kappa0,
        kappa=kappa,
        alpha=alpha,
        ell1=float(3.0 + np.sqrt(9.0 + 4.0 * kappa0)),
        ell2=float(2.0 * np.sqrt(2.0 * (2.0 * rho + lam) * kappa0)),
        gamma1_kappa=gamma1_kappa,
        gamma1_sigma=float((scale * np.sqrt(2.0 * eta) + ell_prox) / denominator_sigma),
        gamma1_lipschitz=float((scale + ell_prox) / denominator_sigma),
        gamma2_kappa=gamma2_kappa,
        gamma2_sigma=float(scale / denominator_sigma),
        ell_prox=ell_prox,
        notes=notes,
    )


def _sample_pairs(
    inst: PVSInstance, cfg: SampleConfig
) -> List[Tuple[str, Tuple[np.ndarray, ...], Tuple[np.ndarray, ...]]]:
    """Return pairs of (v, p, q) in the eta-ball, cycling over the perturbation kinds."""
    rng = np.random.default_rng(cfg.seed)
    ref = inst.reference
    n, l, m = inst.n, inst.l, inst.m
    center = np.concatenate([ref.v, ref.p, ref.q])
    pairs = []
    for index in range(cfg.count):
        kind = PAIR_KINDS[index % len(PAIR_KINDS)]
        first = center + sample_ball(rng, n + l + m, cfg.eta / 2.0)
        second = center + sample_ball(rng, n + l + m, cfg.eta / 2.0)
        if kind in ("canonical", "q"):
            second[n : n + l] = first[n : n + l]
        if kind in ("canonical", "p"):
            second[n + l :] = first[n + l :]
        pairs.append(
            (
                kind,
                (first[:n], first[n : n + l], first[n + l :]),
                (second[:n], second[n : n + l], second[n + l :]),
            )
        )
    return pairs


def _prox_parameter_modulus(inst: PVSInstance, cfg: SampleConfig) -> float:
    """Return a modulus of the proximal mapping with respect to p."""
    potential = inst.potential.indicator
    if inst.l == 0:
        return 0.0
    if isinstance(potential, IndicatorBox):
        return float(np.linalg.norm(potential.S, ord=2))
    return aubin_modulus_estimate(inst, SampleConfig(eta=cfg.eta, count=20, seed=cfg.seed))


def _verify(
    inst: PVSInstance,
    cfg: SampleConfig,
    solver_cfg: Optional[SolverConfig],
    exponent: float,
    jobs: int,
    verbose: bool,
) -> ModuliReport:
    solver_cfg = solver_cfg or SolverConfig()
    setup = prepare_solver(inst, solver_cfg)
    report = theoretical_moduli(
        setup.sigma,
        setup.L,
        setup.constants.r,
        setup.lam,
        rho=cfg.eta,
        eta=cfg.eta,
        ell_prox=_prox_parameter_modulus(inst, cfg) if exponent < 1 else 0.0,
    )
    pairs = _sample_pairs(inst, cfg)

    def run(index: int) -> Tuple[np.ndarray, np.ndarray]:
        _, first, second = pairs[index]
        try:
            return (
                solve(inst, *first, solver_cfg, setup=setup).x,
                solve(inst, *second, solver_cfg, setup=setup).x,
            )
        except FullStabilityError as error:
            raise PairSolveError(index, str(error)) from error

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as executor:
        solutions = list(
            tqdm(
                executor.map(run, range(len(pairs))),
                total=len(pairs),
                desc="Solving sampled pairs",
                unit="pair",
                leave=False,
                dynamic_ncols=True,
                disable=not verbose,
            )
        )

    kappa = report.kappa
    ells: Dict[str, float] = {kind: 0.0 for kind in PAIR_KINDS}
    canonical_margin = -np.inf
    monotone_pass = True
    worst = -np.inf
    for (kind, first, second), (x1, x2) in zip(pairs, solutions):
        dx = x1 - x2
        dv = first[0] - second[0]
        lhs = float(np.linalg.norm(dv - 2.0 * kappa * dx))
        distance = float(
            np.linalg.norm(first[1] - second[1]) ** exponent + np.linalg.norm(first[2] - second[2])
        )
        if distance <= 0.0:
            canonical_margin = max(canonical_margin, lhs - float(np.linalg.norm(dv)))
            monotone_pass &= bool(dv @ dx >= kappa * dx @ dx - MONOTONE_TOL)
            continue
        ells[kind] = max(ells[kind], max(0.0, (lhs - float(np.linalg.norm(dv))) / distance))
    ell = max(ells.values())
    for (kind, first, second), (x1, x2) in zip(pairs, solutions):
        distance = float(
            np.linalg.norm(first[1] - second[1]) ** exponent + np.linalg.norm(first[2] - second[2])
        )
        bound = (float(np.linalg.norm(first[0] - second[0])) + ell * distance) / kappa
        worst = max(worst, float(np.linalg.norm(x1 - x2)) - bound)

    canonical_pass = bool(canonical_margin <= CANONICAL_TOL)
    if canonical_pass != monotone_pass:
        warnings.warn(
            "The canonical inequality and its monotone form disagree on the sampled pairs.",
            stacklevel=3,
        )
    passed = bool(canonical_pass and monotone_pass and np.isfinite(ell) and worst <= BOUND_SLACK)
    report.ell_p = max(ells["p"], ells["joint"]) if inst.l else 0.0
    report.ell_q = ells["q"]
    report.canonical_margin = canonical_margin if np.isfinite(canonical_margin) else None
    report.canonical_pass = canonical_pass
    report.monotone_pass = monotone_pass
    report.worst_violation = worst
    report.samples = len(pairs)
    report.seed = cfg.seed
    if exponent < 1:
        report.ell_holder = ell
        bound_p = 2.0 * kappa * report.gamma1_sigma
        bound_q = 2.0 * kappa * report.gamma2_sigma
        report.notes.append(
            f"measured p-modulus {ells['p']:.6g} against 2 kappa gamma1 = {bound_p:.6g}; "
            f"measured q-modulus {ells['q']:.6g} against 2 kappa gamma2 = {bound_q:.6g}"
        )
        passed = passed and ells["p"] <= bound_p + BOUND_SLACK and ells["q"] <= bound_q + BOUND_SLACK
    else:
        report.ell_lipschitz = ell
    report.passed = bool(passed)
    return report


@typechecked
def verify_lipschitz_full_stability(
    inst: PVSInstance,
    cfg: Optional[SampleConfig] = None,
    solver_cfg: Optional[SolverConfig] = None,
    jobs: int = 1,
    verbose: bool = False,
) -> ModuliReport:
    """Measure the least ell in the Lipschitzian full-stability inequality.

    Pairs cycle over four kinds: equal (p, q) (the canonical perturbation,
    which must pass with ell = 0), p-only, q-only and joint perturbations.

    Raises
    ------
    NonContractiveRegime
        When sigma does not exceed r.
    PairSolveError
        When a solve fails, with the index of the pair.
    """
    return _verify(inst, cfg or SampleConfig(), solver_cfg, 1.0, jobs, verbose)


@typechecked
def verify_holder_full_stability(
    inst: PVSInstance,
    cfg: Optional[SampleConfig] = None,
    solver_cfg: Optional[SolverConfig] = None,
    jobs: int = 1,
    verbose: bool = False,
) -> ModuliReport:
    """Measure the least ell in the Hölderian inequality, with d(p1, p2)^(1/2).

    The measured p- and q-moduli are also compared with 2 kappa gamma1 and
    2 kappa gamma2, and the comparison enters the verdict.
    """
    return _verify(inst, cfg or SampleConfig(), solver_cfg, 0.5, jobs, verbose)


def _moving_indicator(inst: PVSInstance) -> Potential:
    potential = inst.potential
    if isinstance(potential, QuadraticPlusIndicator) or not potential.is_polyhedral:
        raise UnsupportedPotential(potential.kind, "indicator of a moving polyhedron required")
    return potential


@typechecked
def verify_prox_hausdorff_estimate(
    inst: PVSInstance,
    cfg: Optional[SampleConfig] = None,
    radius: float = 0.5,
    lam: Optional[float] = None,
) -> CheckResult:
    """Check the prox estimate |P(v, p1) - P(v, p2)| <= (ell1 theta + ell2 sqrt(theta)) / (2 kappa0).

    theta is the local Hausdorff distance of C(p1) and C(p2) around the
    reference point; its upper value (box relaxation) is used so that the
    sampling slack of the estimate never produces a false violation.

    Parameters
    ----------
    inst : PVSInstance
        Instance whose potential is the indicator of a moving polyhedron.
    cfg : Optional[SampleConfig]
        Sampling configuration.
    radius : float
        Radius of the ball around the reference point, also used as rho.
    lam : Optional[float]
        Proximal step, selected as in the solver when None.
    """
    cfg = cfg or SampleConfig()
    potential = _moving_indicator(inst)
    constants = potential_constants(inst)
    r = constants.r
    if lam is None:
        lam = select_lambda(strong_monotonicity_modulus(inst), lipschitz_modulus(inst), r)
    if lam * r >= 1.0:
        raise ProxParameterError(f"lambda={lam} must be below 1/r with r={r}")
    kappa0 = 1.0 - lam * r
    ell1 = float(3.0 + np.sqrt(9.0 + 4.0 * kappa0))
    ell2 = float(2.0 * np.sqrt(2.0 * (2.0 * radius + lam) * kappa0))
    rng = np.random.default_rng(cfg.seed)
    ref = inst.reference
    anchor = ref.x + lam * inst.v_hat
    violations, worst = 0, 0.0
    for _ in range(cfg.count):
        v = anchor + sample_ball(rng, inst.n, cfg.eta)
        p1 = ref.p + sample_ball(rng, inst.l, cfg.eta)
        p2 = ref.p + sample_ball(rng, inst.l, cfg.eta)
        gap = float(
            np.linalg.norm(
                prox_map(potential, ProxQuery(lam, v, p1)) - prox_map(potential, ProxQuery(lam, v, p2))
            )
        )
        theta = hausdorff_local(
            potential.polyhedron(p1),
            potential.polyhedron(p2),
            ref.x,
            radius,
            samples=HAUSDORFF_SAMPLES,
            seed=int(rng.integers(2**31)),
        ).theta_upper
        bound = (ell1 * theta + ell2 * np.sqrt(theta)) / (2.0 * kappa0)
        if gap > bound + BOUND_SLACK:
            violations += 1
        if bound > 0:
            worst = max(worst, gap / bound)
    return CheckResult(
        name="prox-hausdorff",
        holds=violations == 0,
        data={
            "violations": violations,
            "worst_ratio": worst,
            "ell1": ell1,
            "ell2": ell2,
            "lambda": lam,
            "r": r,
            "radius": radius,
            "samples": cfg.count,
            "seed": cfg.seed,
        },
    )


@typechecked
def verify_usogc(
    potential: Potential,
    center: Tuple[np.ndarray, np.ndarray, np.ndarray],
    ell: float,
    cfg: Optional[SampleConfig] = None,
) -> CheckResult:
    """Check the uniform second-order growth h(x, p) >= h(u, p) + <v, x - u> + ell/2 |x - u|^2.

    Graph points (u, p, v) are sampled around the center and x is drawn in
    the eta-ball of the reference point, projected onto C(p) since the
    inequality is trivial where h is infinite.
    """
    cfg = cfg or SampleConfig()
    rng = np.random.default_rng(cfg.seed)
    x_ref = center[0]
    samples = sample_subdifferential_graph(potential, center, cfg.eta, cfg.count, cfg.seed)
    worst, witness = np.inf, None
    for sample in samples:
        x = potential.project(x_ref + sample_ball(rng, x_ref.shape[0], cfg.eta), sample.p)
        gap = (
            potential.value(x, sample.p)
            - potential.value(sample.x, sample.p)
            - sample.v @ (x - sample.x)
            - 0.5 * ell * float(np.sum((x - sample.x) ** 2))
        )
        if gap < worst:
            worst, witness = float(gap), {"x": x, "u": sample.x, "p": sample.p, "v": sample.v}
    return CheckResult(
        name="usogc",
        holds=bool(worst >= -GROWTH_TOL),
        data={
            "ell": ell,
            "worst_gap": worst,
            "witness": witness if worst < -GROWTH_TOL else None,
            "samples": len(samples),
            "seed": cfg.seed,
        },
    )


@typechecked
def aubin_modulus_estimate(
    inst: PVSInstance, cfg: Optional[SampleConfig] = None, radius: float = 0.5
) -> float:
    """Estimate the Lipschitz-like modulus of p -> C(p) around the reference point.

    The estimate is the largest ratio of the local Hausdorff distance of
    C(p1) and C(p2) near the reference point to |p1 - p2| over sampled
    parameter pairs. A ratio above 1e6 is reported as unbounded.
    """
    cfg = cfg or SampleConfig()
    potential = _moving_indicator(inst)
    if inst.l == 0:
        return 0.0
    rng = np.random.default_rng(cfg.seed)
    ref = inst.reference
    estimate = 0.0
    for _ in range(cfg.count):
        p1 = ref.p + sample_ball(rng, inst.l, cfg.eta)
        p2 = ref.p + sample_ball(rng, inst.l, cfg.eta)
        distance = float(np.linalg.norm(p1 - p2))
        if distance <= 0.0:
            continue
        theta = hausdorff_local(
            potential.polyhedron(p1),
            potential.polyhedron(p2),
            ref.x,
            radius,
            samples=HAUSDORFF_SAMPLES,
            seed=int(rng.integers(2**31)),
        ).theta
        estimate = max(estimate, theta / distance)
    if estimate > UNBOUNDED_RATIO:
        warnings.warn(
            f"Lipschitz-like ratio {estimate:.3e} looks unbounded: a constraint "
            "qualification probably fails at the reference point.",
            stacklevel=2,
        )
        return float("inf")
    return float(estimate)
