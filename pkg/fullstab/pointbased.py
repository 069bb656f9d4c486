"""Submodule providing pointbased second-order conditions for box and polyhedral potentials.

The coderivative of the normal cone mapping of an interval is tabulated
piece by piece (interior segment, two corners, two rays, degenerate
interval) and checked against a brute-force oracle that computes normal
cones to the graph, seen as a finite union of convex polyhedral pieces.
Box normal cones are products of interval ones, so every check reduces to
a quadratic form minimized over a cone of sign patterns.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict, List, Optional, Tuple
import numpy as np
from scipy.optimize import nnls
from typeguard import typechecked
from fullstab.exceptions import (
    NotANormalVector,
    PointNotInSet,
    TableValidationError,
    UnsupportedPotential,
)
from fullstab.model import (
    IndicatorBox,
    PVSInstance,
    QuadraticPlusIndicator,
)
from fullstab.polyhedra import (
    ACTIVE_TOL,
    PolyCone,
    Polyhedron,
    cone_difference_span,
    cone_min_curvature,
    critical_cone,
    normal_cone,
    project,
    tangent_cone,
)
from fullstab.utils import null_space_basis, restricted_min_eigenvalue, sample_ball, span_basis

GRAPH_TOL = 1e-9
CURVATURE_TOL = 1e-9
ORACLE_STEP = 1e-3
KINDS = ("regular", "limiting")
PIECES = ("interior", "lower-corner", "upper-corner", "lower-ray", "upper-ray", "degenerate")


@dataclass(frozen=True)
class Interval:
    """Closed interval of the real line, possibly unbounded."""

    lo: float
    hi: float

    def contains(self, z: float, tol: float = GRAPH_TOL) -> bool:
        """Whether z lies in the interval."""
        return self.lo - tol <= z <= self.hi + tol

    def is_close(self, other: "Interval", tol: float = 1e-7) -> bool:
        """Whether both endpoints agree, infinite endpoints included."""
        return all(
            (np.isinf(mine) and mine == theirs) or abs(mine - theirs) <= tol
            for mine, theirs in ((self.lo, other.lo), (self.hi, other.hi))
        )

    def to_list(self) -> List[float]:
        """Return the endpoints as a list."""
        return [self.lo, self.hi]


ZERO = Interval(0.0, 0.0)
REALS = Interval(-np.inf, np.inf)
NONPOSITIVE = Interval(-np.inf, 0.0)
NONNEGATIVE = Interval(0.0, np.inf)


@dataclass(frozen=True)
class IntervalGraphPiece:
    """Piece of the graph of the normal cone mapping of an interval.

    >>> IntervalGraphPiece("lower-corner").coderivative(1.0, "limiting")
    Interval(lo=0.0, hi=0.0)
    >>> IntervalGraphPiece("lower-corner").coderivative(1.0, "regular") is None
    True
    """

    piece: str

    def __post_init__(self):
        if self.piece not in PIECES:
            raise ValueError(f"Unknown piece {self.piece!r}, expected one of {PIECES}")

    def coderivative(self, w: float, kind: str) -> Optional[Interval]:
        """Return the coderivative at direction w, None for the empty set."""
        if kind not in KINDS:
            raise ValueError(f"Unknown kind {kind!r}, expected one of {KINDS}")
        sign = 0 if abs(w) <= GRAPH_TOL else (1 if w > 0 else -1)
        if self.piece == "interior":
            return ZERO
        if self.piece in ("lower-ray", "upper-ray", "degenerate"):
            return REALS if sign == 0 else None
        if self.piece == "lower-corner":
            if kind == "regular":
                return NONPOSITIVE if sign <= 0 else None
            return {1: ZERO, -1: NONPOSITIVE, 0: REALS}[sign]
        if kind == "regular":
            return NONNEGATIVE if sign >= 0 else None
        return {1: NONNEGATIVE, -1: ZERO, 0: REALS}[sign]


def classify_piece(a: float, b: float, x: float, v: float) -> IntervalGraphPiece:
    """Return the piece of gph N_[a, b] containing (x, v).

    Raises
    ------
    PointNotInSet
        When x is outside [a, b].
    NotANormalVector
        When v is not normal to [a, b] at x.
    """
    if x < a - GRAPH_TOL or x > b + GRAPH_TOL:
        raise PointNotInSet(max(a - x, x - b))
    if b - a <= GRAPH_TOL:
        return IntervalGraphPiece("degenerate")
    at_lower = abs(x - a) <= GRAPH_TOL
    at_upper = abs(x - b) <= GRAPH_TOL
    if at_lower:
        if v > GRAPH_TOL:
            raise NotANormalVector(v)
        return IntervalGraphPiece("lower-ray" if v < -GRAPH_TOL else "lower-corner")
    if at_upper:
        if v < -GRAPH_TOL:
            raise NotANormalVector(-v)
        return IntervalGraphPiece("upper-ray" if v > GRAPH_TOL else "upper-corner")
    if abs(v) > GRAPH_TOL:
        raise NotANormalVector(abs(v))
    return IntervalGraphPiece("interior")


def interval_graph_pieces(a: float, b: float) -> List[Polyhedron]:
    """Return gph N_[a, b] in the (x, v) plane as a union of convex polyhedra."""
    pieces = []
    if b - a > GRAPH_TOL:
        rows = [[0.0, 1.0], [0.0, -1.0]]
        rhs = [0.0, 0.0]
        if np.isfinite(b):
            rows.append([1.0, 0.0])
            rhs.append(b)
        if np.isfinite(a):
            rows.append([-1.0, 0.0])
            rhs.append(-a)
        pieces.append(Polyhedron(np.array(rows), np.array(rhs)))
    if np.isfinite(a):
        pieces.append(Polyhedron(np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]]), np.array([a, -a, 0.0])))
    if np.isfinite(b):
        pieces.append(
            Polyhedron(np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, -1.0]]), np.array([b, -b, 0.0]))
        )
    return pieces


def _intersect_cones(cones: List[PolyCone], dimension: int) -> PolyCone:
    return PolyCone(
        M=np.vstack([cone.inequalities for cone in cones] or [np.zeros((0, dimension))]),
        E=np.vstack([cone.equalities for cone in cones] or [np.zeros((0, dimension))]),
        dimension=dimension,
    )


def _regular_normal_cone(pieces: List[Polyhedron], point: np.ndarray) -> PolyCone:
    """Regular normal cone to a union of convex pieces: intersect the piece normal cones."""
    dimension = point.shape[0]
    containing = [piece for piece in pieces if piece.contains(point, tol=GRAPH_TOL)]
    if not containing:
        raise PointNotInSet(min(piece.violation(point) for piece in pieces))
    return _intersect_cones([normal_cone(piece, point) for piece in containing], dimension)


@typechecked
def graph_normal_cone_oracle(
    pieces: List[Polyhedron], point: np.ndarray, kind: str, step: float = ORACLE_STEP
) -> List[PolyCone]:
    """Return the normal cones to a union of convex polyhedra at a point.

    The regular normal cone is the intersection of the normal cones of the
    pieces containing the point. The limiting normal cone is the union of
    regular normal cones at the point and at points of the pieces within
    the given step, obtained by projecting axis and diagonal displacements;
    polyhedral normal cones are locally constant on relative interiors of
    faces, so these nearby points realize every limit.

    Parameters
    ----------
    pieces : List[Polyhedron]
        Convex pieces whose union is the set.
    point : np.ndarray
        Point of the union.
    kind : str
        Either "regular" or "limiting".
    step : float
        Distance of the nearby points.
    """
    if kind not in KINDS:
        raise ValueError(f"Unknown kind {kind!r}, expected one of {KINDS}")
    regular = _regular_normal_cone(pieces, point)
    if kind == "regular":
        return [regular]
    dimension = point.shape[0]
    directions = [np.eye(dimension)[i] * sign for i in range(dimension) for sign in (1.0, -1.0)]
    for i in range(dimension):
        for j in range(i + 1, dimension):
            for si in (1.0, -1.0):
                for sj in (1.0, -1.0):
                    directions.append((si * np.eye(dimension)[i] + sj * np.eye(dimension)[j]) / np.sqrt(2))
    cones = [regular]
    for piece in pieces:
        if piece.violation(point) > step:
            continue
        for direction in directions:
            nearby = project(point + step * direction, piece)
            if np.linalg.norm(nearby - point) > 2 * step:
                continue
            cones.append(_regular_normal_cone(pieces, nearby))
    return cones


def _slice_interval(cone: PolyCone, w: float) -> Optional[Interval]:
    """Return {z : (z, -w) in cone} for a cone of the plane."""
    lo, hi = -np.inf, np.inf
    for row in cone.inequalities:
        bound = row[1] * w
        if abs(row[0]) <= GRAPH_TOL:
            if -bound > GRAPH_TOL:
                return None
        elif row[0] > 0:
            hi = min(hi, bound / row[0])
        else:
            lo = max(lo, bound / row[0])
    for row in cone.equalities:
        value = row[1] * w
        if abs(row[0]) <= GRAPH_TOL:
            if abs(value) > GRAPH_TOL:
                return None
        else:
            lo = max(lo, value / row[0])
            hi = min(hi, value / row[0])
    if lo > hi + GRAPH_TOL:
        return None
    return Interval(lo, max(lo, hi))


def _union_interval(intervals: List[Optional[Interval]]) -> Optional[Interval]:
    """Merge intervals into one; the union must be connected."""
    present = sorted((item for item in intervals if item is not None), key=lambda item: item.lo)
    if not present:
        return None
    lo, hi = present[0].lo, present[0].hi
    for item in present[1:]:
        if item.lo > hi + GRAPH_TOL:
            raise ValueError("Union of coderivative slices is not an interval")
        hi = max(hi, item.hi)
    return Interval(lo, hi)


@typechecked
def oracle_coderivative(a: float, b: float, x: float, v: float, w: float, kind: str) -> Optional[Interval]:
    """Return the coderivative of N_[a, b] at (x, v) in direction w from the graph oracle."""
    cones = graph_normal_cone_oracle(interval_graph_pieces(a, b), np.array([x, v]), kind)
    return _union_interval([_slice_interval(cone, w) for cone in cones])


def interval_graph_points(a: float, b: float, count: int) -> List[Tuple[float, float]]:
    """Return points spread over the graph of N_[a, b], corners included."""
    points: List[Tuple[float, float]] = []
    span = (b - a) if np.isfinite(a) and np.isfinite(b) else 2.0
    start = a if np.isfinite(a) else (b - span if np.isfinite(b) else -1.0)
    for x in np.linspace(start, start + span, count):
        points.append((float(x), 0.0))
    for v in np.linspace(-1.0, -1.0 / count, count):
        if np.isfinite(a):
            points.append((float(a), float(v)))
        if np.isfinite(b):
            points.append((float(b), float(-v)))
    return points


@typechecked
def validate_coderivative_tables(
    intervals: Tuple[Tuple[float, float], ...] = ((0.0, 1.0), (0.0, np.inf), (-np.inf, np.inf)),
    points: int = 50,
    directions: int = 50,
) -> int:
    """Compare the coderivative tables with the graph oracle and return the number of checks.

    Raises
    ------
    TableValidationError
        On the first disagreement, or when a regular value is not contained
        in the limiting one.
    """
    checks = 0
    for a, b in intervals:
        pieces = interval_graph_pieces(a, b)
        for x, v in interval_graph_points(a, b, points):
            piece = classify_piece(a, b, x, v)
            cones = {
                kind: graph_normal_cone_oracle(pieces, np.array([x, v]), kind) for kind in KINDS
            }
            for w in np.concatenate([np.linspace(-1.0, 1.0, directions), [0.0]]):
                values = {}
                for kind in KINDS:
                    table = piece.coderivative(float(w), kind)
                    oracle = _union_interval([_slice_interval(cone, float(w)) for cone in cones[kind]])
                    if (table is None) != (oracle is None) or (
                        table is not None and not table.is_close(oracle)
                    ):
                        raise TableValidationError(piece.piece, kind, float(w))
                    values[kind] = table
                    checks += 1
                regular, limiting = values["regular"], values["limiting"]
                if regular is not None and (
                    limiting is None or regular.lo < limiting.lo - 1e-9 or regular.hi > limiting.hi + 1e-9
                ):
                    raise TableValidationError(piece.piece, "regular-in-limiting", float(w))
    return checks


@lru_cache(maxsize=None)
def _tables_validated() -> bool:
    validate_coderivative_tables(points=5, directions=5)
    return True


def _box_data(potential) -> Tuple[IndicatorBox, np.ndarray]:
    """Return the box part of a box-class potential and the Hessian of its quadratic part."""
    if isinstance(potential, QuadraticPlusIndicator) and isinstance(potential.inner, IndicatorBox):
        return potential.inner, potential.W
    if isinstance(potential, IndicatorBox):
        return potential, np.zeros((potential.n, potential.n))
    raise UnsupportedPotential(potential.kind, "box coderivative")


@typechecked
def coderivative_box_normal(
    a: np.ndarray, b: np.ndarray, x: np.ndarray, v: np.ndarray, w: np.ndarray, kind: str
) -> List[Optional[Interval]]:
    """Return the coderivative of the box normal cone, one interval (or None) per coordinate.

    The coderivative of N_[a, b] at (x, v) in direction w is the product
    of the interval coderivatives; an empty coordinate makes it empty.
    """
    _tables_validated()
    return [
        classify_piece(a[i], b[i], x[i], v[i]).coderivative(float(w[i]), kind)
        for i in range(x.shape[0])
    ]


@typechecked
def coordinate_cone(
    a: np.ndarray, b: np.ndarray, x: np.ndarray, v: np.ndarray, kind: str
) -> Tuple[np.ndarray, np.ndarray]:
    """Return (E, S) describing the directions w where the box coderivative is nonempty.

    The coderivative of N_[a, b] at (x, v) is nonempty exactly on
    {w : Ew = 0, Sw >= 0}, and there the infimum of <z, w> over its
    elements z is 0, attained coordinatewise.
    """
    _tables_validated()
    n = x.shape[0]
    equalities, signs = [], []
    for i in range(n):
        piece = classify_piece(a[i], b[i], x[i], v[i]).piece
        if piece in ("lower-ray", "upper-ray", "degenerate"):
            equalities.append(np.eye(n)[i])
        elif kind == "regular" and piece == "lower-corner":
            signs.append(-np.eye(n)[i])
        elif kind == "regular" and piece == "upper-corner":
            signs.append(np.eye(n)[i])
    return (
        np.array(equalities).reshape(len(equalities), n),
        np.array(signs).reshape(len(signs), n),
    )


@dataclass
class ConditionCheck:
    """Verdict of a pointbased condition with its witness."""

    condition: str
    holds: bool
    value: Optional[float] = None
    witness: Optional[np.ndarray] = None
    details: Optional[Dict[str, Any]] = None

    def to_dict(self) -> Dict[str, Any]:
        """Return the verdict as a dictionary."""
        return {
            "condition": self.condition,
            "holds": self.holds,
            "value": self.value,
            "witness": None if self.witness is None else self.witness.tolist(),
            "details": self.details or {},
        }


def parametric_box_graph_pieces(a: float, b: float, s: float) -> List[Polyhedron]:
    """Return gph of (x, p) -> N_[a + sp, b + sp](x) in (x, p, v) space as convex pieces."""
    pieces = []
    if b - a > GRAPH_TOL:
        rows = [[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]
        rhs = [0.0, 0.0]
        if np.isfinite(b):
            rows.append([1.0, -s, 0.0])
            rhs.append(b)
        if np.isfinite(a):
            rows.append([-1.0, s, 0.0])
            rhs.append(-a)
        pieces.append(Polyhedron(np.array(rows), np.array(rhs)))
    if np.isfinite(a):
        pieces.append(
            Polyhedron(
                np.array([[1.0, -s, 0.0], [-1.0, s, 0.0], [0.0, 0.0, 1.0]]), np.array([a, -a, 0.0])
            )
        )
    if np.isfinite(b):
        pieces.append(
            Polyhedron(
                np.array([[1.0, -s, 0.0], [-1.0, s, 0.0], [0.0, 0.0, -1.0]]), np.array([b, -b, 0.0])
            )
        )
    return pieces


def _parametric_normal_sign(a: float, b: float, s: float, x: float, p: float, v: float) -> Optional[float]:
    """Return the sign of a limiting normal (0, sign, 0) to the parametric graph, None when there is none."""
    cones = graph_normal_cone_oracle(
        parametric_box_graph_pieces(a, b, s), np.array([x, p, v]), "limiting"
    )
    for cone in cones:
        for sign in (1.0, -1.0):
            if cone.contains(np.array([0.0, sign, 0.0])):
                return sign
    return None


@typechecked
def mor_condition_oracle(a: float, b: float, s: float, x: float, p: float, v: float) -> bool:
    """Evaluate the parametric condition on a scalar shifted interval through the graph oracle.

    The condition fails when some limiting normal (0, z, 0) with z != 0
    exists at (x, p, v), i.e. when (0, z) belongs to the coderivative at 0.
    """
    return _parametric_normal_sign(a, b, s, x, p, v) is None


@typechecked
def check_mor_condition(inst: PVSInstance) -> ConditionCheck:
    """Check (0, z) in the coderivative of the subdifferential at 0 implies z = 0.

    For g(x, p) = indicator of [a, b] + Sp the graph of the subgradient
    mapping is the product over coordinates of the graphs of
    (x_i, t_i) -> N_[a_i, b_i](x_i - t_i) pulled back by t = Sp. Each
    coordinate with a nonzero shift row is evaluated on its own
    parametric graph by the normal cone oracle, and a normal (0, tau, 0)
    there yields the witness z = tau S_i. The composed limiting table
    predicts the same verdict: its elements at 0 are (y, -S'y) with y in
    the box coderivative at 0, so a vanishing x-component forces z = 0.

    Raises
    ------
    UnsupportedPotential
        When the potential is not of box class.
    TableValidationError
        When the oracle and the composed table disagree.
    """
    box, W = _box_data(inst.potential)
    ref = inst.reference
    a, b = box.bounds(np.zeros(inst.l))
    shift = box.S @ ref.p
    shifted = ref.x - shift
    normal = inst.v_hat - W @ ref.x
    pieces = [classify_piece(a[i], b[i], shifted[i], normal[i]) for i in range(inst.n)]
    table = [piece.coderivative(0.0, "limiting") for piece in pieces]
    predicted = all(value is not None and value.contains(0.0) for value in table)
    witness = None
    evaluated = []
    for i in range(inst.n):
        if not np.any(box.S[i]):
            continue
        evaluated.append(i)
        sign = _parametric_normal_sign(
            float(a[i]), float(b[i]), 1.0, float(ref.x[i]), float(shift[i]), float(normal[i])
        )
        if sign is not None:
            witness = sign * box.S[i]
            break
    holds = witness is None
    if predicted and not holds:
        raise TableValidationError(pieces[evaluated[-1]].piece, "parametric", 0.0)
    return ConditionCheck(
        condition="mor",
        holds=holds,
        witness=witness,
        details={
            "pieces": [piece.piece for piece in pieces],
            "shifted_coordinates": evaluated,
        },
    )


@typechecked
def check_pointbased_lipschitz(inst: PVSInstance) -> ConditionCheck:
    """Check <Qw, w> + <z, w> > 0 for all w != 0 and z in the limiting second-order subdifferential.

    Together with the parametric condition of check_mor_condition this
    characterizes Lipschitzian full stability for box-class potentials.
    """
    mor = check_mor_condition(inst)
    box, W = _box_data(inst.potential)
    ref = inst.reference
    a, b = box.bounds(np.zeros(inst.l))
    E, S = coordinate_cone(a, b, ref.x - box.S @ ref.p, inst.v_hat - W @ ref.x, "limiting")
    curvature, witness = cone_min_curvature(inst.base.Q + W, E, S)
    return ConditionCheck(
        condition="pointbased-lipschitz",
        holds=bool(curvature > CURVATURE_TOL and mor.holds),
        value=curvature,
        witness=witness,
        details={"mor": mor.holds},
    )


@typechecked
def check_neighborhood_condition(
    inst: PVSInstance, eta: float = 1e-2, count: int = 200, seed: int = 42
) -> ConditionCheck:
    """Estimate the least kappa_0 with <Qw, w> + <z, w> >= kappa_0 |w|^2 near the reference.

    The condition uses the regular coderivative at sampled graph points
    (x, p, u) of the box normal cone around the reference; each sample
    contributes the least curvature of Q + W over its sign cone.
    """
    box, W = _box_data(inst.potential)
    ref = inst.reference
    rng = np.random.default_rng(seed)
    a, b = box.bounds(np.zeros(inst.l))
    H = inst.base.Q + W
    base_x = ref.x - box.S @ ref.p
    base_u = inst.v_hat - W @ ref.x
    kappa, witness = cone_min_curvature(H, *coordinate_cone(a, b, base_x, base_u, "regular"))
    for _ in range(count):
        x = np.clip(base_x + sample_ball(rng, inst.n, eta / 3.0), a, b)
        u = np.zeros(inst.n)
        for i in range(inst.n):
            jitter = rng.uniform(0.0, eta / 3.0) * (rng.uniform() < 0.5)
            if abs(x[i] - a[i]) <= GRAPH_TOL and abs(x[i] - b[i]) <= GRAPH_TOL:
                u[i] = base_u[i] + rng.uniform(-eta / 3.0, eta / 3.0)
            elif abs(x[i] - a[i]) <= GRAPH_TOL:
                u[i] = min(0.0, base_u[i]) - jitter
            elif abs(x[i] - b[i]) <= GRAPH_TOL:
                u[i] = max(0.0, base_u[i]) + jitter
        value, direction = cone_min_curvature(H, *coordinate_cone(a, b, x, u, "regular"))
        if value < kappa:
            kappa, witness = value, direction
    return ConditionCheck(
        condition="neighborhood",
        holds=bool(kappa > CURVATURE_TOL),
        value=kappa,
        witness=witness,
        details={"eta": eta, "samples": count, "seed": seed},
    )


@dataclass
class ConeLimit:
    """Outer limit of critical cones along the normal cone graph."""

    H: PolyCone
    mode: str
    provenance: str

    def to_dict(self) -> Dict[str, Any]:
        """Return the cone limit as a dictionary."""
        return {"mode": self.mode, "provenance": self.provenance, "H": self.H.to_dict()}


@typechecked
def cone_limit_polyhedral(C: Polyhedron, x: np.ndarray, v: np.ndarray, mode: str = "strong") -> ConeLimit:
    """Return the limit of critical cones at (x, v) of a polyhedral set, K - K.

    In finite dimensions the weak and strong limits coincide, so the mode
    is recorded only as provenance.
    """
    if mode not in ("weak", "strong"):
        raise ValueError(f"Unknown mode {mode!r}")
    return ConeLimit(
        H=cone_difference_span(critical_cone(C, x, v)),
        mode=mode,
        provenance="finite-dimensional polyhedral set: weak and strong limits coincide",
    )


@typechecked
def cone_limit_box(a: np.ndarray, b: np.ndarray, x: np.ndarray, v: np.ndarray) -> ConeLimit:
    """Return the coordinate subspace {u : u_i v_i = 0} of a box at (x, v).

    Degenerate coordinates (a_i = b_i) are pinned as well.
    """
    for i in range(x.shape[0]):
        classify_piece(a[i], b[i], x[i], v[i])
    n = x.shape[0]
    free = [i for i in range(n) if abs(v[i]) <= GRAPH_TOL and b[i] - a[i] > GRAPH_TOL]
    basis = np.eye(n)[:, free]
    return ConeLimit(
        H=PolyCone.subspace(basis, n),
        mode="strong",
        provenance="coordinate box: coordinates with nonzero normal component are pinned",
    )


@typechecked
def sampled_cone_limit_oracle(
    C: Polyhedron, x: np.ndarray, v: np.ndarray, count: int = 50, radius: float = 1e-3, seed: int = 42
) -> List[PolyCone]:
    """Return the critical cones at sampled graph points near (x, v).

    Even samples move from x into the relative interior of the critical
    face, along a positive combination of the generators of the critical
    cone, where v stays normal. Odd samples project a perturbed x onto C,
    keep the points whose active rows still generate v and perturb the
    normal along those rows. The union of the returned cones approximates
    the outer limit of critical cones along the normal cone graph.
    """
    rng = np.random.default_rng(seed)
    n = C.dimension
    directions = _cone_columns(critical_cone(C, x, v))
    slack = np.maximum(C.h - C.G @ x, 0.0)
    cones: List[PolyCone] = []
    for index in range(count):
        if index % 2 == 0:
            d = directions @ rng.uniform(0.5, 1.5, directions.shape[1])
            length = float(np.linalg.norm(d))
            step = 0.0 if length == 0.0 else radius * rng.uniform(0.1, 1.0) / length
            growth = C.G @ d
            blocking = (growth > 1e-12) & (slack > ACTIVE_TOL)
            if np.any(blocking):
                step = min(step, 0.5 * float(np.min(slack[blocking] / growth[blocking])))
            cones.append(critical_cone(C, x + step * d, v))
            continue
        nearby = project(x + sample_ball(rng, n, radius), C)
        rows = C.G[C.active_rows(nearby)]
        if rows.shape[0] == 0:
            if np.linalg.norm(v) > 0:
                continue
            cones.append(critical_cone(C, nearby, v))
            continue
        _, residual = nnls(rows.T, v)
        if residual > 1e-9 * max(1.0, float(np.linalg.norm(v))):
            continue
        weights = (rng.uniform(size=rows.shape[0]) < 0.5) * rng.uniform(0.0, radius, rows.shape[0])
        cones.append(critical_cone(C, nearby, v + rows.T @ weights))
    return cones


def _cone_columns(cone: PolyCone) -> np.ndarray:
    return np.hstack([cone.generators.T, cone.lineality])


def in_sampled_limit(cones: List[PolyCone], direction: np.ndarray, tol: float = 1e-8) -> bool:
    """Whether the direction lies in one of the sampled critical cones."""
    return any(cone.contains(direction, tol=tol) for cone in cones)


def _pvi_data(inst: PVSInstance) -> Tuple[Polyhedron, np.ndarray, np.ndarray]:
    potential = inst.potential
    if not potential.is_polyhedral:
        raise UnsupportedPotential(potential.kind, "pvi_positive_definiteness")
    ref = inst.reference
    C = potential.polyhedron(ref.p)
    return C, inst.base.Q + potential.hessian, inst.v_hat - potential.smooth_gradient(ref.x)


@typechecked
def pvi_positive_definiteness(inst: PVSInstance, variant: str = "critical-span") -> ConditionCheck:
    """Check positive definiteness of the symmetrized Jacobian on the test subspace.

    The "closure" variant uses span(T_C) intersected with the orthogonal
    of the reference normal, the "critical-span" variant uses K - K for
    the critical cone K. For polyhedral sets in finite dimensions both are
    necessary and sufficient for Lipschitzian full stability.
    """
    C, H, normal = _pvi_data(inst)
    n = inst.n
    x = inst.reference.x
    if variant == "closure":
        tangent = span_basis(_cone_columns(tangent_cone(C, x)), n)
        if tangent.shape[1] and np.linalg.norm(normal) > 0:
            basis = tangent @ null_space_basis((normal @ tangent).reshape(1, -1), tangent.shape[1])
        else:
            basis = tangent
        basis = span_basis(basis, n)
    elif variant == "critical-span":
        basis = cone_difference_span(critical_cone(C, x, normal)).lineality
    else:
        raise ValueError(f"Unknown variant {variant!r}, expected 'closure' or 'critical-span'")
    value, witness = restricted_min_eigenvalue(H, basis)
    return ConditionCheck(
        condition=f"pvi-{variant}",
        holds=bool(value > CURVATURE_TOL),
        value=value,
        witness=witness,
        details={
            "subspace_dimension": int(basis.shape[1]),
            "equivalence": "in finite dimensions with polyhedral C both variants "
            "are equivalent to Lipschitzian full stability",
        },
    )
