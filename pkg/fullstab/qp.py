"""Submodule providing a dense primal active-set solver for small convex QPs.

The solver minimizes 1/2 y'Hy + g'y subject to Gy <= h for a positive
definite H, starting from a feasible point. Each iteration solves the
equality-constrained subproblem of the working set through its KKT block
system, takes the longest feasible step along the resulting direction,
and drops the working constraint with the most negative multiplier once
the direction vanishes. Ties are broken by the smallest constraint index.
"""

from dataclasses import dataclass
from typing import List, Optional
import numpy as np
from typeguard import typechecked
from fullstab.exceptions import QPIterationLimit

QP_TOLERANCE = 1e-10


@dataclass
class QPResult:
    """Solution of a convex quadratic program."""

    x: np.ndarray
    multipliers: np.ndarray
    working_set: List[int]
    iterations: int

    def kkt_residual(self, H: np.ndarray, g: np.ndarray, G: np.ndarray, h: np.ndarray) -> float:
        """Return the largest violation among the KKT conditions of the program."""
        stationarity = H @ self.x + g + G.T @ self.multipliers
        slack = G @ self.x - h if G.shape[0] else np.zeros(0)
        return float(
            max(
                np.linalg.norm(stationarity, ord=np.inf),
                np.max(slack, initial=0.0),
                np.max(-self.multipliers, initial=0.0),
                np.max(np.abs(self.multipliers * slack), initial=0.0),
            )
        )


def _solve_equality_subproblem(
    H: np.ndarray, gradient: np.ndarray, G_working: np.ndarray
) -> np.ndarray:
    n = H.shape[0]
    k = G_working.shape[0]
    kkt = np.block([[H, G_working.T], [G_working, np.zeros((k, k))]])
    rhs = np.concatenate([-gradient, np.zeros(k)])
    try:
        return np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(kkt, rhs, rcond=None)[0][: n + k]


@typechecked
def solve_qp(
    H: np.ndarray,
    g: np.ndarray,
    G: np.ndarray,
    h: np.ndarray,
    x0: np.ndarray,
    tol: float = QP_TOLERANCE,
    max_iter: Optional[int] = None,
) -> QPResult:
    """Solve min 1/2 y'Hy + g'y subject to Gy <= h.

    Parameters
    ----------
    H : np.ndarray
        Positive definite n x n matrix.
    g : np.ndarray
        Linear term.
    G : np.ndarray
        Constraint matrix with n columns, possibly without rows.
    h : np.ndarray
        Constraint right-hand side.
    x0 : np.ndarray
        Feasible starting point.
    tol : float
        Tolerance on the step norm and on the multipliers.
    max_iter : Optional[int]
        Iteration limit, by default proportional to the problem size.

    Raises
    ------
    QPIterationLimit
        When the working set keeps changing after max_iter iterations.
    """
    n = H.shape[0]
    s = G.shape[0]
    if max_iter is None:
        max_iter = 50 * (n + s) + 100
    x = np.array(x0, dtype=float)
    working: List[int] = []

    for iteration in range(max_iter):
        G_working = G[working] if working else np.zeros((0, n))
        solution = _solve_equality_subproblem(H, H @ x + g, G_working)
        direction = solution[:n]
        working_multipliers = solution[n:]

        if np.linalg.norm(direction) <= tol * max(1.0, np.linalg.norm(x)):
            if working_multipliers.size == 0 or working_multipliers.min() >= -tol:
                multipliers = np.zeros(s)
                multipliers[working] = np.maximum(working_multipliers, 0.0)
                return QPResult(
                    x=x, multipliers=multipliers, working_set=sorted(working), iterations=iteration
                )
            # Most negative multiplier leaves, smallest constraint index on ties.
            most_negative = working_multipliers.min()
            candidates = [
                working[position]
                for position, value in enumerate(working_multipliers)
                if value <= most_negative + tol
            ]
            working.remove(min(candidates))
            continue

        step = 1.0
        blocking: Optional[int] = None
        for index in range(s):
            if index in working:
                continue
            increase = G[index] @ direction
            if increase <= tol:
                continue
            ratio = max(h[index] - G[index] @ x, 0.0) / increase
            if ratio < step - 1e-14:
                step = ratio
                blocking = index
        x = x + step * direction
        if blocking is not None:
            working.append(blocking)

    raise QPIterationLimit(max_iter)
