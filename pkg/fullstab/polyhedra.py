"""Submodule providing polyhedral set and cone geometry.

Sets are stored in inequality form {x : Gx <= h}; cones as
{w : Ew = 0, Mw <= 0}, with their generator form (extreme rays plus a
lineality basis) computed lazily by enumeration of row subsets.
"""

from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Dict, List, Optional, Sequence, Tuple, Union
import numpy as np
from scipy.optimize import linprog, nnls
from typeguard import typechecked
from fullstab.exceptions import (
    EmptyIntersection,
    InfeasiblePolyhedron,
    LPFailure,
    NotANormalVector,
    PointNotInSet,
    SizeLimitExceeded,
)
from fullstab.qp import solve_qp
from fullstab.utils import (
    as_matrix,
    as_vector,
    null_space_basis,
    sample_sphere,
    span_basis,
)

ACTIVE_TOL = 1e-8
MEMBERSHIP_TOL = 1e-9
CONE_TOL = 1e-9
FACE_LIMIT = 20
ENUMERATION_LIMIT = 250_000


def _run_linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None):
    """Run the HiGHS LP solver, dropping empty constraint blocks."""
    if A_ub is not None and A_ub.shape[0] == 0:
        A_ub, b_ub = None, None
    if A_eq is not None and A_eq.shape[0] == 0:
        A_eq, b_eq = None, None
    return linprog(
        c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs"
    )


def cone_distance(rows: np.ndarray, vector: np.ndarray) -> float:
    """Return the distance of the vector from the cone generated by the rows."""
    if rows.shape[0] == 0:
        return float(np.linalg.norm(vector))
    _, residual = nnls(rows.T, vector)
    return float(residual)


class Polyhedron:
    """Nonempty convex polyhedron {x : Gx <= h}."""

    @typechecked
    def __init__(self, G: np.ndarray, h: np.ndarray):
        """Create the polyhedron, certifying that it is nonempty.

        Parameters
        ----------
        G : np.ndarray
            Constraint matrix with one row per inequality.
        h : np.ndarray
            Right-hand side.

        Raises
        ------
        InfeasiblePolyhedron
            When no point satisfies the inequalities.
        """
        self._G = as_matrix(G, name="G")
        self._h = as_vector(h, self._G.shape[0], name="h")
        self._bounds = self._coordinate_bounds()
        self._point = self._find_feasible_point()

    @classmethod
    @typechecked
    def box(
        cls, lower: Union[Sequence[float], np.ndarray], upper: Union[Sequence[float], np.ndarray]
    ) -> "Polyhedron":
        """Return the box with the given (possibly infinite) bounds.

        >>> Polyhedron.box([0.0, 0.0], [1.0, np.inf]).n_constraints
        3
        """
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        n = lower.shape[0]
        rows, rhs = [], []
        for i in range(n):
            if np.isfinite(upper[i]):
                rows.append(np.eye(n)[i])
                rhs.append(upper[i])
            if np.isfinite(lower[i]):
                rows.append(-np.eye(n)[i])
                rhs.append(-lower[i])
        return cls(np.array(rows).reshape(len(rows), n), np.array(rhs))

    def _coordinate_bounds(self) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        """Return per-coordinate bounds when every row involves one coordinate."""
        n = self.dimension
        lower = np.full(n, -np.inf)
        upper = np.full(n, np.inf)
        for row, rhs in zip(self._G, self._h):
            support = np.flatnonzero(row)
            if support.size == 0:
                if rhs < 0:
                    raise InfeasiblePolyhedron("zero row with negative right-hand side")
                continue
            if support.size > 1:
                return None
            i = support[0]
            if row[i] > 0:
                upper[i] = min(upper[i], rhs / row[i])
            else:
                lower[i] = max(lower[i], rhs / row[i])
        if np.any(lower > upper):
            raise InfeasiblePolyhedron("empty coordinate interval")
        return lower, upper

    def _find_feasible_point(self) -> np.ndarray:
        if self._bounds is not None:
            lower, upper = self._bounds
            return np.clip(np.zeros(self.dimension), lower, upper)
        result = _run_linprog(
            np.zeros(self.dimension),
            A_ub=self._G,
            b_ub=self._h,
            bounds=[(None, None)] * self.dimension,
        )
        if result.status == 2:
            raise InfeasiblePolyhedron()
        if result.status != 0:
            raise LPFailure(result.message)
        return result.x

    @property
    def G(self) -> np.ndarray:
        """Constraint matrix."""
        return self._G

    @property
    def h(self) -> np.ndarray:
        """Constraint right-hand side."""
        return self._h

    @property
    def dimension(self) -> int:
        """Ambient dimension."""
        return self._G.shape[1]

    @property
    def n_constraints(self) -> int:
        """Number of inequalities."""
        return self._G.shape[0]

    @property
    def feasible_point(self) -> np.ndarray:
        """A point of the polyhedron found at construction."""
        return self._point.copy()

    @property
    def coordinate_bounds(self) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        """Lower and upper bounds when the polyhedron is a box, else None."""
        return self._bounds

    def violation(self, x: np.ndarray) -> float:
        """Return the largest constraint violation at x."""
        if self.n_constraints == 0:
            return 0.0
        return float(max(0.0, np.max(self._G @ x - self._h)))

    def contains(self, x: np.ndarray, tol: float = MEMBERSHIP_TOL) -> bool:
        """Return whether x satisfies all inequalities up to the tolerance."""
        return self.violation(x) <= tol

    def active_rows(self, x: np.ndarray, tol: float = ACTIVE_TOL) -> np.ndarray:
        """Return the indices of the inequalities active at x."""
        if self.n_constraints == 0:
            return np.zeros(0, dtype=int)
        return np.flatnonzero(self._G @ x - self._h >= -tol)

    def to_dict(self) -> Dict[str, list]:
        """Return the polyhedron as a dictionary."""
        return {"G": self._G.tolist(), "h": self._h.tolist()}

    def __repr__(self) -> str:
        return f"Polyhedron(dimension={self.dimension}, constraints={self.n_constraints})"


@typechecked
def project(x: np.ndarray, C: Polyhedron) -> np.ndarray:
    """Return the Euclidean projection of x onto the polyhedron.

    Parameters
    ----------
    x : np.ndarray
        Point to project.
    C : Polyhedron
        Target set.

    >>> project(np.array([1.0, -1.0]), Polyhedron.box([0.0, 0.0], [np.inf, np.inf]))
    array([1., 0.])
    """
    x = np.asarray(x, dtype=float)
    if C.coordinate_bounds is not None:
        lower, upper = C.coordinate_bounds
        return np.clip(x, lower, upper)
    if C.contains(x, tol=0.0):
        return x.copy()
    return solve_qp(np.eye(C.dimension), -x, C.G, C.h, C.feasible_point).x


def polytope_vertices(G: np.ndarray, h: np.ndarray, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
    """Return the vertices of the bounded polyhedron {x : Gx <= h}, one per row."""
    s, n = G.shape
    if comb(s, n) > ENUMERATION_LIMIT:
        raise SizeLimitExceeded("vertex enumeration", comb(s, n), ENUMERATION_LIMIT)
    vertices: List[np.ndarray] = []
    for subset in combinations(range(s), n):
        rows = G[list(subset)]
        if np.linalg.matrix_rank(rows) < n:
            continue
        candidate = np.linalg.solve(rows, h[list(subset)])
        if np.max(G @ candidate - h) > tol * max(1.0, np.abs(candidate).max()):
            continue
        if any(np.linalg.norm(candidate - vertex) <= 1e-9 for vertex in vertices):
            continue
        vertices.append(candidate)
    return np.array(vertices).reshape(len(vertices), n)


class PolyCone:
    """Polyhedral cone {w : Ew = 0, Mw <= 0} with a lazily computed generator form."""

    def __init__(
        self,
        M: Optional[np.ndarray] = None,
        E: Optional[np.ndarray] = None,
        dimension: Optional[int] = None,
    ):
        """Create the cone from its inequality and equality rows."""
        if dimension is None:
            for rows in (M, E):
                if rows is not None and np.ndim(rows) == 2:
                    dimension = np.shape(rows)[1]
                    break
        if dimension is None:
            raise ValueError("The ambient dimension of the cone cannot be inferred.")
        self._n = int(dimension)
        self._M = as_matrix(M, cols=self._n, name="M") if M is not None else np.zeros((0, self._n))
        self._E = as_matrix(E, cols=self._n, name="E") if E is not None else np.zeros((0, self._n))
        self._lineality: Optional[np.ndarray] = None
        self._rays: Optional[np.ndarray] = None

    @classmethod
    def from_generators(
        cls,
        generators: np.ndarray,
        lineality: Optional[np.ndarray] = None,
        dimension: Optional[int] = None,
    ) -> "PolyCone":
        """Return the cone generated by the rows plus the span of the lineality columns."""
        generators = np.asarray(generators, dtype=float)
        if dimension is None:
            dimension = generators.shape[-1]
        generators = generators.reshape(-1, dimension)
        if lineality is None:
            lineality = np.zeros((dimension, 0))
        polar = cls(M=generators, E=np.asarray(lineality).T, dimension=dimension)
        return cls(M=polar.generators, E=polar.lineality.T, dimension=dimension)

    @classmethod
    def subspace(cls, basis: np.ndarray, dimension: int) -> "PolyCone":
        """Return the linear subspace spanned by the basis columns, as a cone."""
        basis = np.asarray(basis, dtype=float).reshape(dimension, -1)
        orthogonal = null_space_basis(basis.T, dimension) if basis.shape[1] else np.eye(dimension)
        return cls(E=orthogonal.T, dimension=dimension)

    @property
    def dimension(self) -> int:
        """Ambient dimension."""
        return self._n

    @property
    def inequalities(self) -> np.ndarray:
        """Rows of M in {w : Ew = 0, Mw <= 0}."""
        return self._M

    @property
    def equalities(self) -> np.ndarray:
        """Rows of E in {w : Ew = 0, Mw <= 0}."""
        return self._E

    @property
    def lineality(self) -> np.ndarray:
        """Orthonormal basis (columns) of the largest subspace inside the cone."""
        if self._lineality is None:
            self._lineality = null_space_basis(np.vstack([self._E, self._M]), self._n)
        return self._lineality

    @property
    def generators(self) -> np.ndarray:
        """Unit extreme rays of the pointed part, one per row."""
        if self._rays is None:
            self._rays = self._enumerate_rays()
        return self._rays

    def _enumerate_rays(self) -> np.ndarray:
        n = self._n
        base = np.vstack([self._E, self.lineality.T])
        base_rank = np.linalg.matrix_rank(base) if base.shape[0] else 0
        needed = n - 1 - base_rank
        s = self._M.shape[0]
        if needed < 0 or s == 0 or needed > s:
            return np.zeros((0, n))
        if comb(s, needed) > ENUMERATION_LIMIT:
            raise SizeLimitExceeded("extreme ray enumeration", comb(s, needed), ENUMERATION_LIMIT)
        rays: List[np.ndarray] = []
        for subset in combinations(range(s), needed):
            stacked = np.vstack([base, self._M[list(subset)]])
            direction = null_space_basis(stacked, n)
            if direction.shape[1] != 1:
                continue
            for candidate in (direction[:, 0], -direction[:, 0]):
                values = self._M @ candidate
                if np.all(values <= CONE_TOL) and np.any(values < -CONE_TOL):
                    if not any(np.linalg.norm(candidate - ray) <= 1e-8 for ray in rays):
                        rays.append(candidate)
        return np.array(rays).reshape(len(rays), n)

    @property
    def is_subspace(self) -> bool:
        """Whether the cone is a linear subspace."""
        return self.generators.shape[0] == 0

    @property
    def is_trivial(self) -> bool:
        """Whether the cone is {0}."""
        return self.is_subspace and self.lineality.shape[1] == 0

    def span_dimension(self) -> int:
        """Dimension of the linear span of the cone."""
        return span_basis(np.hstack([self.generators.T, self.lineality]), self._n).shape[1]

    def contains(self, w: np.ndarray, tol: float = CONE_TOL) -> bool:
        """Membership test through the inequality form."""
        w = np.asarray(w, dtype=float)
        scale = tol * max(1.0, float(np.linalg.norm(w)))
        if self._E.shape[0] and np.max(np.abs(self._E @ w)) > scale:
            return False
        if self._M.shape[0] and np.max(self._M @ w) > scale:
            return False
        return True

    def contains_generated(self, w: np.ndarray, tol: float = CONE_TOL) -> bool:
        """Membership test through the generator form."""
        w = np.asarray(w, dtype=float)
        rows = np.vstack([self.generators, self.lineality.T, -self.lineality.T])
        return cone_distance(rows, w) <= tol * max(1.0, float(np.linalg.norm(w)))

    def polar(self) -> "PolyCone":
        """Return the polar cone {y : <y, w> <= 0 for all w in the cone}."""
        return PolyCone(M=self.generators, E=self.lineality.T, dimension=self._n)

    def to_dict(self) -> Dict[str, list]:
        """Return both representations of the cone as a dictionary."""
        return {
            "dimension": self._n,
            "inequalities": self._M.tolist(),
            "equalities": self._E.tolist(),
            "generators": self.generators.tolist(),
            "lineality": self.lineality.T.tolist(),
            "is_subspace": self.is_subspace,
        }

    def __repr__(self) -> str:
        return (
            f"PolyCone(dimension={self._n}, rays={self.generators.shape[0]}, "
            f"lineality={self.lineality.shape[1]})"
        )


def _require_member(C: Polyhedron, x: np.ndarray):
    if not C.contains(x):
        raise PointNotInSet(C.violation(x))


@typechecked
def tangent_cone(C: Polyhedron, x: np.ndarray) -> PolyCone:
    """Return the tangent cone {w : G_I w <= 0} at a point of the polyhedron.

    Raises
    ------
    PointNotInSet
        When x violates the constraints by more than the membership tolerance.
    """
    _require_member(C, x)
    return PolyCone(M=C.G[C.active_rows(x)], dimension=C.dimension)


@typechecked
def normal_cone(C: Polyhedron, x: np.ndarray) -> PolyCone:
    """Return the normal cone generated by the active constraint rows at x."""
    _require_member(C, x)
    return PolyCone.from_generators(C.G[C.active_rows(x)], dimension=C.dimension)


@typechecked
def critical_cone(C: Polyhedron, x: np.ndarray, v: np.ndarray) -> PolyCone:
    """Return the critical cone, the tangent cone at x intersected with the orthogonal of v.

    Raises
    ------
    NotANormalVector
        When v is not in the normal cone of C at x.
    """
    _require_member(C, x)
    active = C.G[C.active_rows(x)]
    distance = cone_distance(active, v)
    if distance > CONE_TOL * max(1.0, float(np.linalg.norm(v))):
        raise NotANormalVector(distance)
    equalities = v.reshape(1, -1) if np.linalg.norm(v) > 0 else None
    return PolyCone(M=active, E=equalities, dimension=C.dimension)


@typechecked
def cone_difference_span(K: PolyCone) -> PolyCone:
    """Return K - K, the linear span of the cone, as a subspace cone."""
    basis = span_basis(np.hstack([K.generators.T, K.lineality]), K.dimension)
    return PolyCone.subspace(basis, K.dimension)


@dataclass(frozen=True)
class Face:
    """Face of a cone, given by the inequality rows holding with equality."""

    equality: Tuple[int, ...]
    inequality: Tuple[int, ...]
    interior_point: np.ndarray = field(compare=False, repr=False)

    def to_dict(self) -> Dict[str, list]:
        """Return the face as a dictionary."""
        return {"equality": list(self.equality), "inequality": list(self.inequality)}


def _face_closure(K: PolyCone, fixed: Tuple[int, ...]) -> Tuple[Tuple[int, ...], np.ndarray]:
    """Return the implied equality set of a row set and a relative interior point."""
    M = K.inequalities
    n = K.dimension
    rest = [i for i in range(M.shape[0]) if i not in fixed]
    equalities = np.vstack([K.equalities, M[list(fixed)]])
    implicit: List[int] = []
    points: List[np.ndarray] = []
    for i in rest:
        result = _run_linprog(
            M[i],
            A_ub=M[rest],
            b_ub=np.zeros(len(rest)),
            A_eq=equalities,
            b_eq=np.zeros(equalities.shape[0]),
            bounds=[(-1.0, 1.0)] * n,
        )
        if result.status != 0:
            raise LPFailure(result.message)
        if result.fun >= -CONE_TOL:
            implicit.append(i)
        else:
            points.append(result.x)
    point = np.mean(points, axis=0) if points else np.zeros(n)
    return tuple(sorted(set(fixed) | set(implicit))), point


@typechecked
def face_enumeration(K: PolyCone) -> List[Face]:
    """Return all faces of a cone given in inequality form.

    Faces are found breadth-first: each face is closed under implied
    equalities, and its children add one more inequality row.

    Raises
    ------
    SizeLimitExceeded
        When the cone has more than 20 inequality rows.
    """
    s = K.inequalities.shape[0]
    if s > FACE_LIMIT:
        raise SizeLimitExceeded("cone inequality system", s, FACE_LIMIT)
    closures: Dict[Tuple[int, ...], Tuple[Tuple[int, ...], np.ndarray]] = {}

    def closure(fixed: Tuple[int, ...]):
        if fixed not in closures:
            closures[fixed] = _face_closure(K, fixed)
        return closures[fixed]

    root, point = closure(())
    faces: Dict[Tuple[int, ...], Face] = {
        root: Face(root, tuple(i for i in range(s) if i not in root), point)
    }
    queue = [root]
    while queue:
        current = queue.pop(0)
        for i in range(s):
            if i in current:
                continue
            child, point = closure(tuple(sorted(current + (i,))))
            if child not in faces:
                faces[child] = Face(child, tuple(j for j in range(s) if j not in child), point)
                queue.append(child)
    return sorted(faces.values(), key=lambda face: (len(face.equality), face.equality))


def _nonzero_cone_point(A: np.ndarray, dimension: int) -> Optional[np.ndarray]:
    """Return a nonzero y with Ay <= 0, or None when only y = 0 qualifies."""
    if A.shape[0] == 0:
        return np.eye(dimension)[0]
    kernel = null_space_basis(A, dimension)
    if kernel.shape[1] > 0:
        return kernel[:, 0]
    result = _run_linprog(
        A.sum(axis=0),
        A_ub=A,
        b_ub=np.zeros(A.shape[0]),
        bounds=[(-1.0, 1.0)] * dimension,
    )
    if result.status != 0:
        raise LPFailure(result.message)
    if result.fun < -CONE_TOL:
        return result.x
    return None


@typechecked
def cone_min_curvature(
    H: np.ndarray, E: np.ndarray, S: np.ndarray
) -> Tuple[float, Optional[np.ndarray]]:
    """Return the minimum of u'Hu over {Eu = 0, Su >= 0, |u| = 1} and a minimizer.

    The minimum is attained in the relative interior of some face, where
    the minimizer is an eigenvector of H restricted to the face's span.
    For each face the eigenvalues are scanned in increasing order and the
    first one whose eigenspace meets the face is kept.

    Parameters
    ----------
    H : np.ndarray
        Square matrix, symmetrized before use.
    E : np.ndarray
        Equality rows, possibly none.
    S : np.ndarray
        Sign rows, possibly none.

    Returns
    -------
    Tuple[float, Optional[np.ndarray]]
        The minimal curvature and a unit witness, or (inf, None) when the cone is {0}.
    """
    n = H.shape[0]
    symmetric = 0.5 * (H + H.T)
    cone = PolyCone(M=-S.reshape(-1, n), E=E.reshape(-1, n), dimension=n)
    best, witness = float("inf"), None
    for face in face_enumeration(cone):
        basis = null_space_basis(
            np.vstack([cone.equalities, cone.inequalities[list(face.equality)]]), n
        )
        if basis.shape[1] == 0:
            continue
        eigenvalues, eigenvectors = np.linalg.eigh(basis.T @ symmetric @ basis)
        rest = cone.inequalities[list(face.inequality)]
        start = 0
        while start < eigenvalues.shape[0] and eigenvalues[start] < best:
            stop = start + 1
            while stop < eigenvalues.shape[0] and eigenvalues[stop] - eigenvalues[start] <= (
                1e-9 * max(1.0, abs(eigenvalues[start]))
            ):
                stop += 1
            eigenspace = basis @ eigenvectors[:, start:stop]
            y = _nonzero_cone_point(rest @ eigenspace, stop - start)
            if y is not None:
                direction = eigenspace @ y
                best = float(eigenvalues[start])
                witness = direction / np.linalg.norm(direction)
                break
            start = stop
    return best, witness


@dataclass
class LocalHausdorff:
    """Local Pompeiu-Hausdorff distance between two polyhedra around a ball."""

    theta: float
    theta_upper: float
    center: np.ndarray
    radius: float
    samples: int

    @property
    def resolution(self) -> float:
        """Gap between the box-relaxed upper value and the ball estimate."""
        return self.theta_upper - self.theta

    def to_dict(self) -> Dict:
        """Return the estimate as a dictionary."""
        return {
            "theta": self.theta,
            "theta_upper": self.theta_upper,
            "resolution": self.resolution,
            "center": self.center.tolist(),
            "radius": self.radius,
            "samples": self.samples,
        }


def _distance(x: np.ndarray, C: Polyhedron) -> float:
    return float(np.linalg.norm(x - project(x, C)))


def _directed_hausdorff(
    source: Polyhedron,
    target: Polyhedron,
    center: np.ndarray,
    radius: float,
    samples: int,
    rng: np.random.Generator,
) -> Tuple[float, float]:
    """Return the ball-restricted and box-relaxed excess of source over target."""
    n = source.dimension
    anchor = project(center, source)
    distance = float(np.linalg.norm(anchor - center))
    if distance > radius * (1.0 + 1e-12):
        raise EmptyIntersection(distance, radius)
    vertices = polytope_vertices(
        np.vstack([source.G, np.eye(n), -np.eye(n)]),
        np.concatenate([source.h, center + radius, radius - center]),
    )
    upper = max((_distance(vertex, target) for vertex in vertices), default=0.0)
    points = [anchor] + [
        vertex for vertex in vertices if np.linalg.norm(vertex - center) <= radius * (1 + 1e-12)
    ]
    for _ in range(samples):
        candidate = project(center + radius * sample_sphere(rng, n), source)
        if np.linalg.norm(candidate - center) <= radius * (1 + 1e-12):
            points.append(candidate)
    lower = max(_distance(point, target) for point in points)
    return lower, max(lower, upper)


@typechecked
def hausdorff_local(
    C1: Polyhedron,
    C2: Polyhedron,
    center: np.ndarray,
    radius: float,
    samples: int = 1000,
    seed: int = 0,
) -> LocalHausdorff:
    """Estimate the Pompeiu-Hausdorff distance of two polyhedra restricted to a ball.

    The estimate takes the largest distance to the other set over the
    vertices of each set intersected with the bounding box of the ball that
    fall inside the ball, plus sampled boundary points. The same distance
    over all the box vertices bounds it from above, and the gap between the
    two is reported as the resolution.

    Parameters
    ----------
    C1 : Polyhedron
        First set.
    C2 : Polyhedron
        Second set.
    center : np.ndarray
        Center of the ball.
    radius : float
        Radius of the ball.
    samples : int
        Number of boundary samples per set.
    seed : int
        Seed of the boundary sampling.

    Raises
    ------
    EmptyIntersection
        When one of the sets does not meet the ball.
    """
    rng = np.random.default_rng(seed)
    lower_12, upper_12 = _directed_hausdorff(C1, C2, center, radius, samples, rng)
    lower_21, upper_21 = _directed_hausdorff(C2, C1, center, radius, samples, rng)
    return LocalHausdorff(
        theta=max(lower_12, lower_21),
        theta_upper=max(upper_12, upper_21),
        center=np.asarray(center, dtype=float),
        radius=float(radius),
        samples=samples,
    )
