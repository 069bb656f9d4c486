"""Submodule providing the smallest eigenvalue of a quadratic form on a subspace."""

from typing import Optional, Tuple
import numpy as np


def restricted_min_eigenvalue(
    hessian: np.ndarray, basis: np.ndarray
) -> Tuple[float, Optional[np.ndarray]]:
    """Return the least value of u'Hu over unit vectors u in the span of the basis.

    Parameters
    ----------
    hessian : np.ndarray
        Square matrix, symmetrized before use.
    basis : np.ndarray
        Orthonormal basis of the subspace, as columns.

    Returns
    -------
    Tuple[float, Optional[np.ndarray]]
        The minimal eigenvalue and a unit minimizing vector in the ambient space,
        or (inf, None) for the trivial subspace.
    """
    if basis.shape[1] == 0:
        return float("inf"), None
    symmetric = 0.5 * (hessian + hessian.T)
    reduced = basis.T @ symmetric @ basis
    eigenvalues, eigenvectors = np.linalg.eigh(0.5 * (reduced + reduced.T))
    witness = basis @ eigenvectors[:, 0]
    return float(eigenvalues[0]), witness / np.linalg.norm(witness)
