"""Python package solving parametric variational systems and certifying the full stability of their solutions."""

from fullstab.model import PVSInstance, load_instance
from fullstab.solver import (
    SolverConfig,
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
from fullstab.pvc_certify import certify_full_stability
from fullstab.pointbased import check_pointbased_lipschitz, pvi_positive_definiteness
from fullstab.prox import potential_constants, threshold_estimate_hypomonotone
from fullstab.reports import CertificateReport, ModuliReport, SolveResult

__all__ = [
    "PVSInstance",
    "load_instance",
    "SolverConfig",
    "solve",
    "solve_certified_failure_probe",
    "solve_grid",
    "solve_from_random_starts",
    "SampleConfig",
    "theoretical_moduli",
    "verify_holder_full_stability",
    "verify_lipschitz_full_stability",
    "certify_full_stability",
    "check_pointbased_lipschitz",
    "pvi_positive_definiteness",
    "potential_constants",
    "threshold_estimate_hypomonotone",
    "CertificateReport",
    "ModuliReport",
    "SolveResult",
]
