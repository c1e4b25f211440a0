"""Small numerical helpers shared by the operator modules.

Vectors and matrices are held in cylinder coordinates, where the inner
product is weighted by the diagonal Gram matrix ``diag(M)``.  Multiplying a
coordinate vector by ``sqrt(M)`` moves it to orthonormal coordinates, in
which weighted norms become Euclidean norms.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import svds

DENSE_LIMIT = 512


def as_dense(matrix) -> np.ndarray:
    return matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix)


def to_orthonormal(matrix, dom_measures, cod_measures) -> np.ndarray:
    """``G_cod^{1/2} T G_dom^{-1/2}`` as a dense array."""
    m = as_dense(matrix)
    return np.sqrt(cod_measures)[:, None] * m / np.sqrt(dom_measures)[None, :]


def weighted_adjoint(matrix, dom_measures, cod_measures):
    """``G_dom^{-1} T^T G_cod``: the adjoint for the weighted inner products."""
    if sp.issparse(matrix):
        return sp.diags(1.0 / dom_measures) @ matrix.T @ sp.diags(cod_measures)
    return (matrix.T * cod_measures[None, :]) / dom_measures[:, None]


def operator_norm(matrix) -> float:
    """Largest singular value; dense SVD for small problems, Lanczos otherwise."""
    if min(matrix.shape) == 0:
        return 0.0
    if min(matrix.shape) <= DENSE_LIMIT:
        return float(np.linalg.norm(as_dense(matrix), 2))
    return float(svds(sp.csr_matrix(matrix), k=1, tol=0, return_singular_vectors=False)[0])


def numerical_rank(matrix, rtol: float = 1e-9) -> int:
    m = as_dense(matrix)
    if m.size == 0:
        return 0
    sv = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(sv > rtol * sv[0])) if sv[0] > 0 else 0


def orthonormal_span(columns: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis (Euclidean) of the column span."""
    if columns.size == 0:
        return np.zeros((columns.shape[0], 0))
    u, sv, _ = np.linalg.svd(columns, full_matrices=False)
    if sv.size == 0 or sv[0] == 0:
        return np.zeros((columns.shape[0], 0))
    return u[:, sv > rtol * sv[0]]
