"""CLI for the fullstab package."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional
import argparse
import json
import sys
import time
import compress_json
import pandas as pd
from dict_hash import sha256
from fullstab.__version__ import __version__
from fullstab.exceptions import FullStabilityError, NonContractiveRegime, UnsupportedPotential
from fullstab.model import (
    IndicatorBox,
    PVSInstance,
    QuadraticPlusIndicator,
    load_instance,
)
from fullstab.pointbased import (
    check_mor_condition,
    check_pointbased_lipschitz,
    cone_limit_box,
    cone_limit_polyhedral,
    pvi_positive_definiteness,
)
from fullstab.polyhedra import cone_difference_span, critical_cone, normal_cone, tangent_cone
from fullstab.prox import (
    potential_constants,
    threshold_estimate_hypomonotone,
    threshold_pointbased_box,
)
from fullstab.pvc_certify import certify_full_stability
from fullstab.solver import (
    SolverConfig,
    prepare_solver,
    solve,
    solve_certified_failure_probe,
    solve_from_random_starts,
    solve_grid,
)
from fullstab.stability import (
    SampleConfig,
    theoretical_moduli,
    verify_holder_full_stability,
    verify_lipschitz_full_stability,
)
from fullstab.utils import as_vector, to_jsonable

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PROBE = 2


@dataclass
class RunManifest:
    """Record of the command, inputs and settings behind a report."""

    command: str
    instance: str
    seed: int
    tolerances: Dict[str, float]
    overrides: Dict[str, Any] = field(default_factory=dict)
    version: str = __version__
    wall_clock: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        """Return the manifest as a dictionary, with the digest of its reproducible part."""
        data = to_jsonable(
            {
                "command": self.command,
                "instance": self.instance,
                "seed": self.seed,
                "tolerances": self.tolerances,
                "overrides": self.overrides,
                "version": self.version,
            }
        )
        data["digest"] = sha256(data)
        if self.wall_clock is not None:
            data["wall_clock"] = self.wall_clock
        return data


def _add_common_arguments(parser: argparse.ArgumentParser):
    parser.add_argument(
        "--instance",
        type=str,
        required=True,
        help="Path to the instance JSON file (with optional compression)",
    )
    parser.add_argument(
        "--seed",
        type=int,
        default=42,
        help="Seed of every randomized procedure",
    )
    parser.add_argument(
        "--eta",
        type=float,
        default=1e-2,
        help="Radius of the sampling neighborhood of the reference point",
    )
    parser.add_argument(
        "--samples",
        type=int,
        default=None,
        help="Number of samples drawn by the sampling checks",
    )
    parser.add_argument(
        "--tol",
        type=float,
        default=1e-10,
        help="Stopping tolerance of the contraction solver",
    )
    parser.add_argument(
        "--jobs",
        type=int,
        default=1,
        help="Number of worker threads of the sampling loops",
    )
    parser.add_argument(
        "--out",
        type=str,
        default=None,
        help="Output path expected to be a JSON (with optional compression)",
    )
    parser.add_argument(
        "--r",
        type=float,
        default=None,
        help="Prox-parameter overriding the instance file",
    )
    parser.add_argument(
        "--lam",
        type=float,
        default=None,
        help="Proximal step of the contraction solver",
    )
    parser.add_argument(
        "--timing",
        action="store_true",
        help="Whether to record the wall-clock time in the manifest",
    )
    parser.add_argument(
        "--verbose",
        action="store_true",
        help="Whether to show progress bars",
    )


def build_parser():
    """Build the argument parser."""
    parser = argparse.ArgumentParser(
        prog="fullstab",
        description="Solve parametric variational systems and certify full stability",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    solve_parser = subparsers.add_parser("solve", help="Solve the system at (v, p, q)")
    _add_common_arguments(solve_parser)
    for name in ("v", "p", "q"):
        solve_parser.add_argument(
            f"--{name}",
            type=float,
            nargs="*",
            default=None,
            help=f"Coordinates of {name}, the reference value when omitted",
        )
    solve_parser.add_argument(
        "--grid",
        type=str,
        default=None,
        help="CSV file with columns v0.., p0.., q0.. to solve row by row",
    )
    solve_parser.add_argument(
        "--starts",
        type=int,
        default=None,
        help="Number of random starts in the delta ball around the reference x",
    )
    solve_parser.add_argument(
        "--delta",
        type=float,
        default=1e-2,
        help="Radius of the ball of the random starts",
    )

    for command, description in (
        ("certify-pvc", "Certify full stability of a variational condition over inequalities"),
        ("certify-pvi", "Check the pointbased conditions of a polyhedral variational inequality"),
        ("threshold", "Compute the threshold of prox-regularity of the potential"),
        ("cones", "List the tangent, normal, critical and limiting cones at the reference"),
    ):
        _add_common_arguments(subparsers.add_parser(command, help=description))

    moduli_parser = subparsers.add_parser("moduli", help="Report the moduli of full stability")
    _add_common_arguments(moduli_parser)
    moduli_parser.add_argument(
        "--rho",
        type=float,
        default=None,
        help="Radius of the prox estimate, eta when omitted",
    )
    moduli_parser.add_argument(
        "--holder",
        action="store_true",
        help="Whether to measure the Hölderian instead of the Lipschitzian inequality",
    )
    return parser


def _solver_config(args) -> SolverConfig:
    return SolverConfig(lam=args.lam, tol=args.tol, r=args.r, delta=getattr(args, "delta", 1e-2))


def _sample_config(args, default_count: int) -> SampleConfig:
    return SampleConfig(
        eta=args.eta,
        count=default_count if args.samples is None else args.samples,
        seed=args.seed,
    )


def _overrides(args, names: List[str]) -> Dict[str, Any]:
    """Return the flags explicitly given on the command line among the provided names."""
    return {name: getattr(args, name) for name in names if getattr(args, name, None) is not None}


def _emit(report: Dict[str, Any], manifest: RunManifest, args, summary: str):
    """Write the report with its manifest to --out or stdout and the summary to stderr."""
    if args.timing:
        manifest.wall_clock = time.perf_counter() - args.started
    document = {"manifest": manifest.to_dict(), "report": to_jsonable(report)}
    if args.out is not None:
        compress_json.dump(document, args.out)
    else:
        print(json.dumps(document, indent=2))
    print(summary, file=sys.stderr)


def _box_inner(inst: PVSInstance) -> Optional[IndicatorBox]:
    potential = inst.potential
    if isinstance(potential, QuadraticPlusIndicator):
        potential = potential.inner
    return potential if isinstance(potential, IndicatorBox) else None


def cmd_solve(args, inst: PVSInstance, manifest: RunManifest) -> int:
    """Solve the instance, or run the failure probe outside the contraction regime."""
    cfg = _solver_config(args)
    ref = inst.reference
    v = ref.v if args.v is None else as_vector(args.v, inst.n, name="v")
    p = ref.p if args.p is None else as_vector(args.p, inst.l, name="p")
    q = ref.q if args.q is None else as_vector(args.q, inst.m, name="q")
    try:
        setup = prepare_solver(inst, cfg)
    except NonContractiveRegime:
        probe = solve_certified_failure_probe(inst, v, p, q, cfg)
        _emit({"probe": probe.to_dict()}, manifest, args, repr(probe))
        return EXIT_PROBE

    if args.grid is not None:
        solved = solve_grid(inst, pd.read_csv(args.grid), cfg, jobs=args.jobs, verbose=args.verbose)
        _emit({"grid": solved.to_dict(orient="records")}, manifest, args, solved.to_string())
        return EXIT_OK

    result = solve(inst, v, p, q, cfg, setup=setup)
    report = {"solution": result.to_dict()}
    if args.starts is not None:
        spread = solve_from_random_starts(inst, v, p, q, cfg, count=args.starts, seed=args.seed)
        report["random_starts"] = spread.to_dict()
        report["random_starts"]["agree"] = spread.agrees(cfg.tol)
    _emit(report, manifest, args, repr(result))
    return EXIT_OK


def cmd_certify_pvc(args, inst: PVSInstance, manifest: RunManifest) -> int:
    """Certify full stability of the reference solution; exit 0 iff it is certified."""
    report = certify_full_stability(
        inst,
        eta=args.eta,
        count=500 if args.samples is None else args.samples,
        seed=args.seed,
        jobs=args.jobs,
        verbose=args.verbose,
    )
    _emit(report.to_dict(), manifest, args, repr(report))
    return EXIT_OK if report.certified else EXIT_ERROR


def cmd_certify_pvi(args, inst: PVSInstance, manifest: RunManifest) -> int:
    """Run both positive-definiteness tests, and the coderivative tests on box potentials."""
    checks = [
        pvi_positive_definiteness(inst, "closure"),
        pvi_positive_definiteness(inst, "critical-span"),
    ]
    if _box_inner(inst) is not None:
        checks.append(check_mor_condition(inst))
        checks.append(check_pointbased_lipschitz(inst))
    table = pd.DataFrame(
        [{"condition": check.condition, "holds": check.holds, "value": check.value} for check in checks]
    )
    _emit({"checks": [check.to_dict() for check in checks]}, manifest, args, table.to_string(index=False))
    return EXIT_OK if checks[1].holds else EXIT_ERROR


def cmd_moduli(args, inst: PVSInstance, manifest: RunManifest) -> int:
    """Report the theoretical moduli, and the measured ones when samples are requested."""
    cfg = _solver_config(args)
    if args.samples is None:
        setup = prepare_solver(inst, cfg)
        report = theoretical_moduli(
            setup.sigma,
            setup.L,
            setup.constants.r,
            setup.lam,
            rho=args.eta if args.rho is None else args.rho,
            eta=args.eta,
        )
    else:
        verify = verify_holder_full_stability if args.holder else verify_lipschitz_full_stability
        report = verify(
            inst, _sample_config(args, 1000), cfg, jobs=args.jobs, verbose=args.verbose
        )
    _emit(report.to_dict(), manifest, args, repr(report))
    return EXIT_OK if report.passed is not False else EXIT_ERROR


def cmd_threshold(args, inst: PVSInstance, manifest: RunManifest) -> int:
    """Report the threshold of prox-regularity by every available method."""
    ref = inst.reference
    count = 1000 if args.samples is None else args.samples
    estimates = [
        threshold_estimate_hypomonotone(
            inst.potential,
            (ref.x, ref.p, inst.v_hat),
            eta=args.eta,
            count=count,
            seed=args.seed,
            jobs=args.jobs,
            verbose=args.verbose,
        )
    ]
    box = _box_inner(inst)
    if box is not None and not box.S.any():
        estimates.append(threshold_pointbased_box(inst.potential, ref.x, inst.v_hat))
    constants = potential_constants(
        inst, r=args.r, eta=args.eta, count=count, seed=args.seed, jobs=args.jobs
    )
    table = pd.DataFrame(
        [{"method": estimate.method, "R": estimate.R_est} for estimate in estimates]
        + [{"method": constants.provenance, "R": constants.R}]
    )
    _emit(
        {
            "estimates": [estimate.to_dict() for estimate in estimates],
            "constants": constants.to_dict(),
        },
        manifest,
        args,
        table.to_string(index=False),
    )
    return EXIT_OK


def cmd_cones(args, inst: PVSInstance, manifest: RunManifest) -> int:
    """List the cones of the feasible set at the reference point."""
    potential = inst.potential
    if not potential.is_polyhedral:
        raise UnsupportedPotential(potential.kind, "cone listings")
    ref = inst.reference
    C = potential.polyhedron(ref.p)
    normal = inst.v_hat - potential.smooth_gradient(ref.x)
    critical = critical_cone(C, ref.x, normal)
    cones = {
        "tangent": tangent_cone(C, ref.x),
        "normal": normal_cone(C, ref.x),
        "critical": critical,
        "critical_difference": cone_difference_span(critical),
    }
    report: Dict[str, Any] = {name: cone.to_dict() for name, cone in cones.items()}
    report["limit"] = cone_limit_polyhedral(C, ref.x, normal).to_dict()
    box = _box_inner(inst)
    if box is not None:
        a, b = box.bounds(ref.p)
        report["limit_box"] = cone_limit_box(a, b, ref.x, normal).to_dict()
    table = pd.DataFrame(
        [
            {"cone": name, "span dimension": cone.span_dimension(), "subspace": cone.is_subspace}
            for name, cone in cones.items()
        ]
    )
    _emit(report, manifest, args, table.to_string(index=False))
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "certify-pvc": cmd_certify_pvc,
    "certify-pvi": cmd_certify_pvi,
    "moduli": cmd_moduli,
    "threshold": cmd_threshold,
    "cones": cmd_cones,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main function."""
    parser = build_parser()
    args = parser.parse_args(argv)
    args.started = time.perf_counter()
    manifest = RunManifest(
        command=args.command,
        instance=args.instance,
        seed=args.seed,
        tolerances={"tol": args.tol, "eta": args.eta},
        overrides=_overrides(
            args, ["r", "lam", "samples", "rho", "v", "p", "q", "grid", "starts"]
        ),
    )
    try:
        inst = load_instance(args.instance)
        return COMMANDS[args.command](args, inst, manifest)
    except (FullStabilityError, OSError, ValueError) as error:
        print(f"{type(error).__name__}: {error}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
