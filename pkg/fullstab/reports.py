"""Submodule for the report dataclasses."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple
import numpy as np
from fullstab.utils import to_jsonable

# ANSI escape codes for colors
RESET = "\033[0m"
BOLD = "\033[1m"
CYAN = "\033[96m"
GREEN = "\033[92m"
YELLOW = "\033[93m"
RED = "\033[91m"


def _verdict(holds: Optional[bool]) -> str:
    if holds is None:
        return f"{YELLOW}n/a{RESET}"
    return f"{GREEN}holds{RESET}" if holds else f"{RED}fails{RESET}"


def _format(entries: List[Tuple[str, Any]]) -> str:
    return "\n".join(f"{BOLD}{CYAN}{key}{RESET}: {value}" for key, value in entries)


@dataclass
class SolveResult:
    """Solve result dataclass."""

    x: np.ndarray
    iterations: int
    measured_rate: float
    alpha: float
    fixed_point_residual: float
    inclusion_residual: float
    lam: float
    r: float
    super_contractive: bool = False

    def to_dict(self) -> Dict[str, Any]:
        """Return the solve result as a dictionary."""
        return to_jsonable(
            {
                "x": self.x,
                "iterations": self.iterations,
                "measured_rate": self.measured_rate,
                "alpha": self.alpha,
                "fixed_point_residual": self.fixed_point_residual,
                "inclusion_residual": self.inclusion_residual,
                "lambda": self.lam,
                "r": self.r,
                "super_contractive": self.super_contractive,
            }
        )

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SolveResult":
        """Create a solve result from its dictionary."""
        return cls(
            x=np.asarray(data["x"], dtype=float),
            iterations=int(data["iterations"]),
            measured_rate=float(data["measured_rate"]),
            alpha=float(data["alpha"]),
            fixed_point_residual=float(data["fixed_point_residual"]),
            inclusion_residual=float(data["inclusion_residual"]),
            lam=float(data["lambda"]),
            r=float(data["r"]),
            super_contractive=bool(data.get("super_contractive", False)),
        )

    def __repr__(self) -> str:
        """Return a concise, human-readable summary of the solve."""
        return _format(
            [
                ("Solution", np.array2string(self.x, precision=6)),
                ("Iterations", self.iterations),
                ("Rate", f"{self.measured_rate:.4g} (alpha {self.alpha:.4g})"),
                ("Residual", f"{self.inclusion_residual:.2e}"),
            ]
        )


@dataclass
class FailureProbe:
    """Report of the diagnostic run on instances outside the contraction regime."""

    sigma: float
    R: float
    declined: bool
    solution_set: Optional[str] = None
    witness: Optional[Dict[str, Any]] = None
    message: str = ""

    def to_dict(self) -> Dict[str, Any]:
        """Return the probe report as a dictionary."""
        return to_jsonable(
            {
                "sigma": self.sigma,
                "R": self.R,
                "declined": self.declined,
                "solution_set": self.solution_set,
                "witness": self.witness,
                "message": self.message,
            }
        )

    def __repr__(self) -> str:
        return _format(
            [
                ("Regime", f"sigma={self.sigma:.4g}, R={self.R:.4g}"),
                ("Solution set", self.solution_set or "n/a"),
                ("Message", self.message),
            ]
        )


@dataclass
class ModuliReport:
    """Theoretical moduli of the contraction argument and, optionally, measured constants."""

    sigma: float
    L: float
    r: float
    lam: float
    rho: float
    eta: float
    kappa0: float
    kappa: float
    alpha: float
    ell1: float
    ell2: float
    gamma1_kappa: Optional[float]
    gamma1_sigma: Optional[float]
    gamma1_lipschitz: Optional[float]
    gamma2_kappa: Optional[float]
    gamma2_sigma: Optional[float]
    ell_prox: float = 0.0
    ell_lipschitz: Optional[float] = None
    ell_holder: Optional[float] = None
    ell_p: Optional[float] = None
    ell_q: Optional[float] = None
    canonical_margin: Optional[float] = None
    canonical_pass: Optional[bool] = None
    monotone_pass: Optional[bool] = None
    worst_violation: Optional[float] = None
    samples: int = 0
    seed: Optional[int] = None
    passed: Optional[bool] = None
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        """Return the report as a dictionary."""
        return to_jsonable(
            {
                "inputs": {
                    "sigma": self.sigma,
                    "L": self.L,
                    "r": self.r,
                    "lambda": self.lam,
                    "rho": self.rho,
                    "eta": self.eta,
                    "ell_prox": self.ell_prox,
                },
                "theory": {
                    "kappa0": self.kappa0,
                    "kappa": self.kappa,
                    "alpha": self.alpha,
                    "ell1": self.ell1,
                    "ell2": self.ell2,
                    "gamma1_kappa": self.gamma1_kappa,
                    "gamma1_sigma": self.gamma1_sigma,
                    "gamma1_lipschitz": self.gamma1_lipschitz,
                    "gamma2_kappa": self.gamma2_kappa,
                    "gamma2_sigma": self.gamma2_sigma,
                },
                "measured": {
                    "ell_lipschitz": self.ell_lipschitz,
                    "ell_holder": self.ell_holder,
                    "ell_p": self.ell_p,
                    "ell_q": self.ell_q,
                    "canonical_margin": self.canonical_margin,
                    "canonical_pass": self.canonical_pass,
                    "monotone_pass": self.monotone_pass,
                    "worst_violation": self.worst_violation,
                    "samples": self.samples,
                    "seed": self.seed,
                },
                "passed": self.passed,
                "notes": self.notes,
            }
        )

    def __repr__(self) -> str:
        """Return a concise, human-readable summary of the moduli."""
        entries = [
            ("kappa", f"{self.kappa:.6g}"),
            ("alpha", f"{self.alpha:.6g}"),
            ("ell1 / ell2", f"{self.ell1:.6g} / {self.ell2:.6g}"),
            ("gamma1 / gamma2", f"{self.gamma1_kappa} / {self.gamma2_kappa}"),
        ]
        if self.ell_lipschitz is not None:
            entries.append(("measured ell (Lipschitz)", f"{self.ell_lipschitz:.6g}"))
        if self.ell_holder is not None:
            entries.append(("measured ell (Holder)", f"{self.ell_holder:.6g}"))
        if self.passed is not None:
            entries.append(("Verdict", _verdict(self.passed)))
        return _format(entries)


@dataclass
class CheckResult:
    """Verdict of a single certificate check with its witness data."""

    name: str
    holds: Optional[bool]
    data: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        """Return the check as a dictionary."""
        return to_jsonable({"name": self.name, "holds": self.holds, **self.data})


@dataclass
class CertificateReport:
    """Certificate report dataclass."""

    verdict: str
    checks: Dict[str, CheckResult]
    routes: Dict[str, Optional[bool]]
    tolerances: Dict[str, float]
    seed: int
    notes: List[str] = field(default_factory=list)

    @property
    def certified(self) -> bool:
        """Whether the reference solution was certified fully stable."""
        return self.verdict == "FULLY_STABLE"

    def to_dict(self) -> Dict[str, Any]:
        """Return the certificate as a dictionary."""
        return to_jsonable(
            {
                "verdict": self.verdict,
                "checks": {name: check.to_dict() for name, check in self.checks.items()},
                "routes": self.routes,
                "tolerances": self.tolerances,
                "seed": self.seed,
                "notes": self.notes,
            }
        )

    def __repr__(self) -> str:
        """Return a concise, human-readable summary of the certificate."""
        color = GREEN if self.certified else RED
        entries: List[Tuple[str, Any]] = [("Verdict", f"{BOLD}{color}{self.verdict}{RESET}")]
        for name, check in self.checks.items():
            entries.append((f"└── {name}", _verdict(check.holds)))
        return _format(entries)
