"""Submodule providing the parametric variational system data model.

An instance describes v in f(x, p, q) + subdifferential of g(., p) at x,
with an affine base map f(x, p, q) = c + Qx + Bp + Dq and a potential g
taken from a small family of classes with closed-form subgradients.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple, Type
import numpy as np
import compress_json
from scipy.optimize import minimize
from typeguard import typechecked
from fullstab.exceptions import (
    InfeasiblePolyhedron,
    InstanceSchemaError,
    ProxParameterError,
    ReferenceResidualError,
    ShapeMismatchError,
    UnsupportedPotential,
)
from fullstab.polyhedra import Polyhedron, cone_distance, project
from fullstab.utils import as_matrix, as_vector

SCHEMA_VERSION = 1
REFERENCE_TOL = 1e-9
ACTIVE_TOL = 1e-8
FEASIBILITY_TOL = 1e-9
POLYHEDRON_CACHE_SIZE = 256

POTENTIAL_KINDS: Dict[str, Type["Potential"]] = {}


def _bounds_from_list(values, size: int, default: float, name: str) -> np.ndarray:
    """Read box bounds where null entries (or a missing list) mean unbounded."""
    if values is None:
        return np.full(size, default)
    if len(values) != size:
        raise ShapeMismatchError(name, (size,), (len(values),))
    return np.array([default if value is None else float(value) for value in values])


class Potential:
    """Base class of the supported potentials g(x, p).

    Every subclass exposes the feasible set C(p) of its indicator part,
    the Hessian W of its quadratic part (zero for pure indicators) and
    the generators of the normal cone to C(p) at a point, from which
    membership in the partial subdifferential is tested.
    """

    kind: str = ""

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        if cls.kind:
            POTENTIAL_KINDS[cls.kind] = cls

    def __init__(self, n: int, l: int):
        self._n = n
        self._l = l

    @property
    def n(self) -> int:
        """Decision dimension."""
        return self._n

    @property
    def l(self) -> int:
        """Parameter dimension."""
        return self._l

    @property
    def hessian(self) -> np.ndarray:
        """Hessian of the quadratic part of the potential."""
        return np.zeros((self._n, self._n))

    @property
    def is_polyhedral(self) -> bool:
        """Whether C(p) is a polyhedron for every p."""
        return True

    @property
    def indicator(self) -> "Potential":
        """The indicator part of the potential."""
        return self

    def polyhedron(self, p: np.ndarray) -> Polyhedron:
        """Return C(p) as a polyhedron."""
        raise UnsupportedPotential(self.kind, "polyhedron")

    def project(self, x: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Return the Euclidean projection of x onto C(p)."""
        return project(x, self.polyhedron(p))

    def infeasibility(self, x: np.ndarray, p: np.ndarray) -> float:
        """Return the largest violation of the constraints of C(p) at x."""
        return self.polyhedron(p).violation(x)

    def normal_generators(self, x: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Return rows generating the normal cone to C(p) at x."""
        C = self.polyhedron(p)
        return C.G[C.active_rows(x, ACTIVE_TOL)]

    def smooth_gradient(self, x: np.ndarray) -> np.ndarray:
        """Return the gradient of the quadratic part at x."""
        return self.hessian @ x

    @typechecked
    def subgradient_residual(self, x: np.ndarray, p: np.ndarray, v: np.ndarray) -> float:
        """Return a residual of the membership of v in the partial subdifferential at (x, p).

        The residual adds the constraint violation at x to the distance of
        v minus the smooth gradient from the cone of active constraint normals.
        """
        violation = self.infeasibility(x, p)
        normal = v - self.smooth_gradient(x)
        return violation + cone_distance(self.normal_generators(x, p), normal)

    def value(self, x: np.ndarray, p: np.ndarray) -> float:
        """Return g(x, p), infinite outside C(p)."""
        if self.infeasibility(x, p) > FEASIBILITY_TOL:
            return float("inf")
        return float(0.5 * x @ self.hessian @ x)

    def threshold(self) -> Optional[float]:
        """Return the closed-form threshold of prox-regularity, or None when unknown."""
        return 0.0

    def to_dict(self) -> Dict[str, Any]:
        """Return the potential as a dictionary."""
        raise NotImplementedError

    @classmethod
    def from_dict(cls, data: Dict[str, Any], n: int, l: int) -> "Potential":
        """Build the potential described by the dictionary, dispatching on its kind."""
        kind = data.get("kind")
        if kind not in POTENTIAL_KINDS:
            raise InstanceSchemaError(
                "potential.kind", f"unknown kind {kind!r}, expected one of {sorted(POTENTIAL_KINDS)}"
            )
        return POTENTIAL_KINDS[kind].build(data, n, l)

    @classmethod
    def build(cls, data: Dict[str, Any], n: int, l: int) -> "Potential":
        """Build an instance of this class from its dictionary."""
        raise NotImplementedError


class PolyhedralIndicator(Potential):
    """Indicator of a polyhedron whose right-hand side depends on the parameter."""

    def __init__(self, n: int, l: int):
        super().__init__(n, l)
        self._polyhedra: Dict[bytes, Polyhedron] = {}

    def constraints(self, p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Return (G, rhs) with C(p) = {x : Gx <= rhs}."""
        raise NotImplementedError

    def polyhedron(self, p: np.ndarray) -> Polyhedron:
        key = np.asarray(p, dtype=float).tobytes()
        if key not in self._polyhedra:
            if len(self._polyhedra) >= POLYHEDRON_CACHE_SIZE:
                self._polyhedra.clear()
            G, rhs = self.constraints(np.asarray(p, dtype=float))
            self._polyhedra[key] = Polyhedron(G, rhs)
        return self._polyhedra[key]

    def infeasibility(self, x: np.ndarray, p: np.ndarray) -> float:
        G, rhs = self.constraints(np.asarray(p, dtype=float))
        if G.shape[0] == 0:
            return 0.0
        return float(max(0.0, np.max(G @ x - rhs)))


class IndicatorPolyhedron(PolyhedralIndicator):
    """Indicator of C(p) = {x : Gx <= h + Hp}; H = 0 gives a fixed polyhedron."""

    kind = "indicator_polyhedron"

    def __init__(self, G: np.ndarray, h: np.ndarray, H: Optional[np.ndarray] = None, l: int = 0):
        super().__init__(G.shape[1], l)
        self.G = G
        self.h = h
        self.H = H if H is not None else np.zeros((G.shape[0], l))

    def constraints(self, p):
        return self.G, self.h + self.H @ p

    def to_dict(self):
        return {"kind": self.kind, "G": self.G.tolist(), "h": self.h.tolist(), "H": self.H.tolist()}

    @classmethod
    def build(cls, data, n, l):
        G = as_matrix(data.get("G", []), cols=n, name="potential.G")
        h = as_vector(data.get("h", []), G.shape[0], name="potential.h")
        H = as_matrix(data.get("H"), G.shape[0], l, name="potential.H")
        return cls(G, h, H, l)


class IndicatorAffineQVI(PolyhedralIndicator):
    """Indicator of C(p) = {x : Ax <= p, x >= 0}."""

    kind = "indicator_affine_qvi"

    def __init__(self, A: np.ndarray):
        super().__init__(A.shape[1], A.shape[0])
        self.A = A

    def constraints(self, p):
        return (
            np.vstack([self.A, -np.eye(self._n)]),
            np.concatenate([p, np.zeros(self._n)]),
        )

    def to_dict(self):
        return {"kind": self.kind, "A": self.A.tolist()}

    @classmethod
    def build(cls, data, n, l):
        if "A" not in data:
            raise InstanceSchemaError("potential.A", "missing constraint matrix")
        return cls(as_matrix(data["A"], l, n, name="potential.A"))


class IndicatorBox(PolyhedralIndicator):
    """Indicator of the shifted box C(p) = [a, b] + Sp."""

    kind = "indicator_box"

    def __init__(self, a: np.ndarray, b: np.ndarray, S: Optional[np.ndarray] = None, l: int = 0):
        super().__init__(a.shape[0], l)
        if np.any(a > b):
            raise InfeasiblePolyhedron("box lower bound exceeds upper bound")
        self.a = a
        self.b = b
        self.S = S if S is not None else np.zeros((a.shape[0], l))

    def bounds(self, p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Return the lower and upper bounds of C(p)."""
        shift = self.S @ p
        return self.a + shift, self.b + shift

    def constraints(self, p):
        lower, upper = self.bounds(p)
        rows, rhs = [], []
        for i in range(self._n):
            if np.isfinite(upper[i]):
                rows.append(np.eye(self._n)[i])
                rhs.append(upper[i])
            if np.isfinite(lower[i]):
                rows.append(-np.eye(self._n)[i])
                rhs.append(-lower[i])
        return np.array(rows).reshape(len(rows), self._n), np.array(rhs)

    def project(self, x, p):
        lower, upper = self.bounds(p)
        return np.clip(x, lower, upper)

    def to_dict(self):
        return {
            "kind": self.kind,
            "a": [None if np.isinf(value) else float(value) for value in self.a],
            "b": [None if np.isinf(value) else float(value) for value in self.b],
            "shift": self.S.tolist(),
        }

    @classmethod
    def build(cls, data, n, l):
        a = _bounds_from_list(data.get("a"), n, -np.inf, "potential.a")
        b = _bounds_from_list(data.get("b"), n, np.inf, "potential.b")
        S = as_matrix(data.get("shift"), n, l, name="potential.shift")
        return cls(a, b, S, l)


class QuadraticPlusIndicator(Potential):
    """Potential g(x, p) = 1/2 x'Wx + indicator of C(p)."""

    kind = "quadratic_plus_indicator"

    def __init__(self, W: np.ndarray, inner: PolyhedralIndicator):
        super().__init__(inner.n, inner.l)
        if not np.allclose(W, W.T, atol=1e-12):
            raise InstanceSchemaError("potential.W", "matrix must be symmetric")
        self.W = W
        self.inner = inner

    @property
    def hessian(self):
        return self.W

    @property
    def indicator(self):
        return self.inner

    def polyhedron(self, p):
        return self.inner.polyhedron(p)

    def project(self, x, p):
        return self.inner.project(x, p)

    def infeasibility(self, x, p):
        return self.inner.infeasibility(x, p)

    def threshold(self):
        return max(0.0, -float(np.linalg.eigvalsh(self.W)[0]))

    def to_dict(self):
        return {"kind": self.kind, "W": self.W.tolist(), "inner": self.inner.to_dict()}

    @classmethod
    def build(cls, data, n, l):
        if "inner" not in data:
            raise InstanceSchemaError("potential.inner", "missing inner indicator")
        inner = Potential.from_dict(data["inner"], n, l)
        if not isinstance(inner, PolyhedralIndicator):
            raise InstanceSchemaError("potential.inner", "inner potential must be an indicator")
        return cls(as_matrix(data.get("W"), n, n, name="potential.W"), inner)


class SmoothIneq(Potential):
    """Indicator of C(p) = {x : phi_i(x, p) <= 0} with quadratic constraint functions.

    Each phi_i(x, p) = 1/2 x'A_i x + b_i'x + g_i'p + d_i.
    """

    kind = "smooth_ineq"

    def __init__(self, A: np.ndarray, b: np.ndarray, g: np.ndarray, d: np.ndarray):
        super().__init__(b.shape[1], g.shape[1])
        for i, matrix in enumerate(A):
            if not np.allclose(matrix, matrix.T, atol=1e-12):
                raise InstanceSchemaError(f"potential.A[{i}]", "matrix must be symmetric")
        self.A = A
        self.b = b
        self.g = g
        self.d = d
        self._polyhedra: Dict[bytes, Polyhedron] = {}

    @property
    def n_constraints(self) -> int:
        """Number of constraint functions."""
        return self.b.shape[0]

    @property
    def is_affine(self) -> bool:
        """Whether every constraint function is affine in x."""
        return not np.any(self.A)

    @property
    def is_polyhedral(self):
        return self.is_affine

    def phi(self, x: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Return the vector of constraint values at (x, p)."""
        quadratic = 0.5 * np.einsum("i,kij,j->k", x, self.A, x)
        return quadratic + self.b @ x + self.g @ p + self.d

    def gradients(self, x: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Return the x-gradients of the constraint functions, one per row."""
        return np.einsum("kij,j->ki", self.A, x) + self.b

    def active_indices(self, x: np.ndarray, p: np.ndarray, tol: float = ACTIVE_TOL) -> np.ndarray:
        """Return the indices with phi_i(x, p) >= -tol."""
        return np.flatnonzero(self.phi(x, p) >= -tol)

    def polyhedron(self, p):
        if not self.is_affine:
            raise UnsupportedPotential(self.kind, "polyhedron (quadratic constraints)")
        key = np.asarray(p, dtype=float).tobytes()
        if key not in self._polyhedra:
            if len(self._polyhedra) >= POLYHEDRON_CACHE_SIZE:
                self._polyhedra.clear()
            self._polyhedra[key] = Polyhedron(self.b, -self.d - self.g @ p)
        return self._polyhedra[key]

    def project(self, x, p):
        if self.is_affine:
            return project(x, self.polyhedron(p))
        result = minimize(
            lambda y: 0.5 * np.sum((y - x) ** 2),
            x,
            jac=lambda y: y - x,
            constraints=[
                {
                    "type": "ineq",
                    "fun": lambda y: -self.phi(y, p),
                    "jac": lambda y: -self.gradients(y, p),
                }
            ],
            method="SLSQP",
            options={"ftol": 1e-14, "maxiter": 500},
        )
        if not result.success:
            raise ProxParameterError(f"projection onto C(p) failed: {result.message}")
        return result.x

    def infeasibility(self, x, p):
        if self.n_constraints == 0:
            return 0.0
        return float(max(0.0, np.max(self.phi(x, p))))

    def normal_generators(self, x, p):
        return self.gradients(x, p)[self.active_indices(x, p)]

    def threshold(self):
        if all(np.linalg.eigvalsh(matrix)[0] >= -1e-12 for matrix in self.A):
            return 0.0
        return None

    def to_dict(self):
        return {
            "kind": self.kind,
            "A": self.A.tolist(),
            "b": self.b.tolist(),
            "g": self.g.tolist(),
            "d": self.d.tolist(),
        }

    @classmethod
    def build(cls, data, n, l):
        b = as_matrix(data.get("b", []), cols=n, name="potential.b")
        s = b.shape[0]
        if data.get("A") is None:
            A = np.zeros((s, n, n))
        else:
            A = np.asarray(data["A"], dtype=float)
            if A.shape != (s, n, n):
                raise ShapeMismatchError("potential.A", (s, n, n), A.shape)
        g = as_matrix(data.get("g"), s, l, name="potential.g")
        d = as_vector(data.get("d"), s, name="potential.d")
        return cls(A, b, g, d)


@dataclass(frozen=True, eq=False)
class BaseMapSpec:
    """Affine base map f(x, p, q) = c + Qx + Bp + Dq."""

    c: np.ndarray
    Q: np.ndarray
    B: np.ndarray
    D: np.ndarray

    def __call__(self, x: np.ndarray, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        return self.c + self.Q @ x + self.B @ p + self.D @ q

    def to_dict(self) -> Dict[str, list]:
        """Return the base map as a dictionary."""
        return {
            "c": self.c.tolist(),
            "Q": self.Q.tolist(),
            "B": self.B.tolist(),
            "D": self.D.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], n: int, l: int, m: int) -> "BaseMapSpec":
        """Create the base map from a dictionary; missing B and D are zero."""
        if "Q" not in data:
            raise InstanceSchemaError("base.Q", "missing matrix")
        return cls(
            c=as_vector(data.get("c"), n, name="base.c"),
            Q=as_matrix(data["Q"], n, n, name="base.Q"),
            B=as_matrix(data.get("B"), n, l, name="base.B"),
            D=as_matrix(data.get("D"), n, m, name="base.D"),
        )


@dataclass(frozen=True, eq=False)
class ReferencePoint:
    """Reference quadruple around which the solution map is studied."""

    x: np.ndarray
    p: np.ndarray
    q: np.ndarray
    v: np.ndarray

    def to_dict(self) -> Dict[str, list]:
        """Return the reference point as a dictionary."""
        return {"x": self.x.tolist(), "p": self.p.tolist(), "q": self.q.tolist(), "v": self.v.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any], n: int, l: int, m: int) -> "ReferencePoint":
        """Create the reference point from a dictionary."""
        return cls(
            x=as_vector(data.get("x"), n, name="reference.x"),
            p=as_vector(data.get("p"), l, name="reference.p"),
            q=as_vector(data.get("q"), m, name="reference.q"),
            v=as_vector(data.get("v"), n, name="reference.v"),
        )


@dataclass(frozen=True)
class PotentialConstants:
    """Prox-parameter r and threshold of prox-regularity of a potential."""

    r: float
    R: float
    provenance: str

    def __post_init__(self):
        if self.provenance not in ("closed-form", "estimated"):
            raise ValueError(f"Unknown provenance {self.provenance!r}")
        if self.r <= 0 or self.R < 0:
            raise ProxParameterError(f"r={self.r} must be positive and R={self.R} nonnegative")
        if self.provenance == "closed-form" and self.r <= self.R:
            raise ProxParameterError(
                f"r={self.r} must exceed the closed-form threshold R={self.R}"
            )

    def to_dict(self) -> Dict[str, Any]:
        """Return the constants as a dictionary."""
        return {"r": self.r, "R": self.R, "provenance": self.provenance}


@dataclass(frozen=True, eq=False)
class PVSInstance:
    """Parametric variational system v in f(x, p, q) + subdifferential of g(., p)."""

    n: int
    l: int
    m: int
    base: BaseMapSpec
    potential: Potential
    reference: ReferencePoint
    name: str = "instance"
    constants: Dict[str, float] = field(default_factory=dict)

    @property
    def v_hat(self) -> np.ndarray:
        """Reference subgradient v - f(x, p, q), recomputed on every access."""
        ref = self.reference
        return ref.v - self.base(ref.x, ref.p, ref.q)

    def reference_residual(self) -> float:
        """Return the residual of the reference quadruple in the inclusion."""
        return self.potential.subgradient_residual(self.reference.x, self.reference.p, self.v_hat)

    def inclusion_residual(self, x: np.ndarray, v: np.ndarray, p: np.ndarray, q: np.ndarray) -> float:
        """Return the residual of v in f(x, p, q) + subdifferential of g(., p) at x."""
        return self.potential.subgradient_residual(x, p, v - self.base(x, p, q))

    def to_dict(self) -> Dict[str, Any]:
        """Return the instance in the file schema."""
        data = {
            "version": SCHEMA_VERSION,
            "name": self.name,
            "dims": {"n": self.n, "l": self.l, "m": self.m},
            "base": self.base.to_dict(),
            "potential": self.potential.to_dict(),
            "reference": self.reference.to_dict(),
        }
        if self.constants:
            data["constants"] = dict(self.constants)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PVSInstance":
        """Create and validate an instance from a dictionary in the file schema.

        Raises
        ------
        InstanceSchemaError
            When a required field is missing or malformed.
        ShapeMismatchError
            When coefficient shapes disagree with the declared dimensions.
        ReferenceResidualError
            When the reference quadruple violates the inclusion by more than 1e-9.
        """
        for key in ("version", "dims", "base", "potential", "reference"):
            if key not in data:
                raise InstanceSchemaError(key, "missing required field")
        if data["version"] != SCHEMA_VERSION:
            raise InstanceSchemaError("version", f"unsupported version {data['version']!r}")
        dims = data["dims"]
        for key in ("n", "l", "m"):
            if not isinstance(dims.get(key), int) or dims[key] < 0:
                raise InstanceSchemaError(f"dims.{key}", "expected a nonnegative integer")
        n, l, m = dims["n"], dims["l"], dims["m"]
        if n == 0:
            raise InstanceSchemaError("dims.n", "decision dimension must be positive")
        potential = Potential.from_dict(data["potential"], n, l)
        if potential.n != n or potential.l != l:
            raise ShapeMismatchError("potential", (n, l), (potential.n, potential.l))
        constants = {key: float(value) for key, value in data.get("constants", {}).items()}
        instance = cls(
            n=n,
            l=l,
            m=m,
            base=BaseMapSpec.from_dict(data["base"], n, l, m),
            potential=potential,
            reference=ReferencePoint.from_dict(data["reference"], n, l, m),
            name=str(data.get("name", "instance")),
            constants=constants,
        )
        residual = instance.reference_residual()
        if residual > REFERENCE_TOL:
            raise ReferenceResidualError(residual, REFERENCE_TOL)
        return instance


@typechecked
def load_instance(path: str) -> PVSInstance:
    """Load and validate an instance file.

    Parameters
    ----------
    path : str
        Path to a JSON document, optionally compressed (as supported by compress_json).
    """
    data = compress_json.load(path)
    if not isinstance(data, dict):
        raise InstanceSchemaError("<root>", "expected a JSON object")
    return PVSInstance.from_dict(data)


@typechecked
def evaluate_base(inst: PVSInstance, x: np.ndarray, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Return f(x, p, q) = c + Qx + Bp + Dq."""
    x = as_vector(x, inst.n, name="x")
    p = as_vector(p, inst.l, name="p")
    q = as_vector(q, inst.m, name="q")
    return inst.base(x, p, q)


@typechecked
def strong_monotonicity_modulus(inst: PVSInstance) -> float:
    """Return the smallest eigenvalue of the symmetric part of Q.

    For an affine base map this is the exact, global strong monotonicity
    modulus; a negative value means f is not monotone.
    """
    Q = inst.base.Q
    return float(np.linalg.eigvalsh(0.5 * (Q + Q.T))[0])


@typechecked
def lipschitz_modulus(inst: PVSInstance) -> float:
    """Return the spectral norm of the concatenation [Q B D]."""
    base = inst.base
    return float(np.linalg.norm(np.hstack([base.Q, base.B, base.D]), ord=2))


@typechecked
def blockwise_lipschitz_modulus(inst: PVSInstance) -> float:
    """Return max(|Q|, |B|, |D|) in spectral norm, the constant for the sum metric."""
    base = inst.base
    return float(
        max(
            np.linalg.norm(block, ord=2) if block.size else 0.0
            for block in (base.Q, base.B, base.D)
        )
    )
