"""Vertex matrices, Perron-Frobenius data and the cylinder-set measure."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .kgraph import KGraph, KGraphError, Path

RESIDUAL_TOL = 1e-10
NORMALIZATION_TOL = 1e-12
RHO_AGREEMENT_TOL = 1e-9
MAX_ITER = 10**6


class NotStronglyConnected(KGraphError):
    pass


class ConvergenceFailure(RuntimeError):
    pass


def vertex_matrix(g: KGraph, color: int) -> np.ndarray:
    """``A[v, w]`` = number of color-``color`` edges with range v and source w."""
    idx = {v: n for n, v in enumerate(g.vertices)}
    a = np.zeros((len(idx), len(idx)), dtype=np.int64)
    for e in g.edges:
        if e.color == color:
            a[idx[e.range], idx[e.source]] += 1
    return a


def vertex_matrices(g: KGraph) -> list[np.ndarray]:
    return [vertex_matrix(g, c) for c in range(1, g.rank + 1)]


def is_strongly_connected(g: KGraph) -> bool:
    total = sum(vertex_matrices(g))
    n, _ = connected_components(total > 0, directed=True, connection="strong")
    return n == 1


@dataclass(frozen=True, eq=False)
class PFData:
    vertices: tuple[str, ...]
    rho: tuple[float, ...]
    kappa: np.ndarray
    iterations: int = 0

    def kappa_at(self, v: str) -> float:
        return float(self.kappa[self.vertices.index(v)])

    def scale(self, degree) -> float:
        """rho ** degree, i.e. rho_1^{n_1} ... rho_k^{n_k}."""
        return float(np.prod([r**n for r, n in zip(self.rho, degree)]))


def _power(matrix: np.ndarray, max_iter: int, tol: float):
    """Power iteration on ``I + matrix`` from the all-ones vector.

    The unit shift keeps the iteration aperiodic for irreducible inputs
    without moving the Perron eigenvector.
    """
    shifted = np.eye(len(matrix)) + matrix
    x = np.ones(len(matrix)) / len(matrix)
    growth = np.nan
    for it in range(1, max_iter + 1):
        y = shifted @ x
        new_growth = y.sum() / x.sum()
        y /= y.sum()
        done = np.max(np.abs(y - x)) <= tol and abs(new_growth - growth) <= tol * new_growth
        x, growth = y, new_growth
        if done:
            return x, growth - 1.0, it
    return x, growth - 1.0, max_iter


def perron_frobenius(g: KGraph, max_iter: int = MAX_ITER) -> PFData:
    if not is_strongly_connected(g):
        raise NotStronglyConnected(f"{g.name} is not strongly connected")
    mats = [a.astype(float) for a in vertex_matrices(g)]
    kappa, _, iterations = _power(sum(mats), max_iter, 1e-14)
    kappa = kappa / kappa.sum()
    rho = []
    for c, a in enumerate(mats, start=1):
        ak = a @ kappa
        r = float(kappa @ ak / (kappa @ kappa))
        if np.max(np.abs(ak - r * kappa)) > RESIDUAL_TOL * np.max(np.abs(kappa)):
            raise ConvergenceFailure(
                f"kappa is not an eigenvector of A_{c} (residual "
                f"{np.max(np.abs(ak - r * kappa)):.3e})"
            )
        _, r_own, _ = _power(a, max_iter, 1e-14)
        if abs(r_own - r) > RHO_AGREEMENT_TOL * max(1.0, r):
            raise ConvergenceFailure(
                f"spectral radius of A_{c}: {r_own!r} from power iteration, {r!r} from kappa"
            )
        rho.append(r)
    if np.any(kappa <= 0):
        raise ConvergenceFailure("Perron-Frobenius vector is not strictly positive")
    return PFData(tuple(g.vertices), tuple(rho), kappa, iterations)


def cylinder_measure(pf: PFData, lam: Path) -> float:
    """M([lam]) = rho^{-d(lam)} kappa_{s(lam)}."""
    return pf.kappa_at(lam.source) / pf.scale(lam.degree)
