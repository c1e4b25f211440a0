"""Graph wavelets: mother functions, scaled families and the orthogonal decomposition."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .kgraph import KGraph, KGraphError, Path
from .linalg import numerical_rank, orthonormal_span
from .measure import PFData
from .repspace import (
    LevelBasis,
    LevelVector,
    expand_to_level,
    inclusion,
    inner_product,
    level_basis,
    s_matrix,
)
from .report import Report

ORTHO_TOL = 1e-10
SPAN_TOL = 1e-9
RANK_RTOL = 1e-9


class EmptyDv(KGraphError):
    pass


@dataclass(frozen=True)
class MotherWavelet:
    vertex: str
    index: int
    vector: LevelVector


@dataclass(frozen=True)
class WaveletSpace:
    n: int
    labels: tuple[tuple[Path, int], ...]
    vectors: tuple[LevelVector, ...]
    basis: LevelBasis

    @property
    def expected_dim(self) -> int:
        g, J = self.basis.graph, self.basis.J
        upper = len(g.enumerate_paths(tuple((self.n + 1) * j for j in J)))
        return upper - len(g.enumerate_paths(tuple(self.n * j for j in J)))

    def matrix(self) -> np.ndarray:
        """Coefficient matrix, one column per wavelet."""
        if not self.vectors:
            return np.zeros((self.basis.dim, 0))
        return np.column_stack([v.coefficients for v in self.vectors])


def _shape(g: KGraph, J: Sequence[int] | None) -> tuple[int, ...]:
    return tuple(J) if J is not None else (1,) * g.rank


def d_v(g: KGraph, v: str, J: Sequence[int] | None = None) -> list[Path]:
    """D_v = v Lambda^J, canonically ordered (J = (1,...,1) by default)."""
    out = g.enumerate_paths(_shape(g, J), v)
    if not out:
        raise EmptyDv(f"no paths of degree {_shape(g, J)} end at {v!r}")
    return out


def mother_wavelets(
    g: KGraph, pf: PFData, v: str, J: Sequence[int] | None = None
) -> list[MotherWavelet]:
    """f^{i,v} = chi[lam_0]/M[lam_0] - chi[lam_i]/M[lam_i] for 1 <= i < #D_v."""
    basis = level_basis(g, pf, 1, J)
    dv = d_v(g, v, J)
    first = basis.index[dv[0]]
    out = []
    for i, lam in enumerate(dv[1:], start=1):
        c = np.zeros(basis.dim)
        j = basis.index[lam]
        c[first] = 1.0 / basis.measures[first]
        c[j] = -1.0 / basis.measures[j]
        out.append(MotherWavelet(v, i, LevelVector(basis, c)))
    return out


def wavelet_space(g: KGraph, pf: PFData, n: int, J: Sequence[int] | None = None) -> WaveletSpace:
    """The family S_lam f^{i,s(lam)} over d(lam) = n*J, at level n+1."""
    shape = _shape(g, J)
    dom = level_basis(g, pf, 1, J)
    cod = level_basis(g, pf, n + 1, J)
    mothers = {v: mother_wavelets(g, pf, v, J) for v in g.vertices}
    labels, vectors = [], []
    for lam in g.enumerate_paths(tuple(n * j for j in shape)):
        fam = mothers[lam.source]
        if not fam:
            continue
        s_lam = s_matrix(g, pf, lam, dom, cod)
        for f in fam:
            labels.append((lam, f.index))
            vectors.append(LevelVector(cod, s_lam @ f.vector.coefficients))
    return WaveletSpace(n, tuple(labels), tuple(vectors), cod)


def v0_basis(g: KGraph, pf: PFData, level: int = 0, J: Sequence[int] | None = None) -> list[LevelVector]:
    """Vertex indicators chi[v], expanded to ``level``."""
    basis = level_basis(g, pf, level, J)
    return [expand_to_level(g, pf, g.vertex_path(v), basis) for v in g.vertices]


def gram(vectors: Sequence[LevelVector]) -> np.ndarray:
    return np.array([[inner_product(a, b) for b in vectors] for a in vectors])


def _cosines(a: np.ndarray, b: np.ndarray) -> float:
    """Largest |<u,w>|/(|u||w|) over orthonormal-coordinate columns u of a, w of b."""
    if a.shape[1] == 0 or b.shape[1] == 0:
        return 0.0
    a = a / np.linalg.norm(a, axis=0)
    b = b / np.linalg.norm(b, axis=0)
    return float(np.max(np.abs(a.T @ b)))


def verify_decomposition(
    g: KGraph, pf: PFData, s: int, J: Sequence[int] | None = None,
    ortho_tol: float = ORTHO_TOL, span_tol: float = SPAN_TOL,
) -> Report:
    """V_0 + W_0 + ... + W_{s-1} inside the level-s space: orthogonal, right size, spanning."""
    if s < 1:
        raise ValueError("decomposition needs s >= 1")
    top = level_basis(g, pf, s, J)
    rep = Report("wavelet_decomposition", {"graph": g.name, "s": s, "J": list(top.J)})
    if not top.is_square:
        rep.notes.append("J-variant mother functions: first-vs-i-th difference family over v Lambda^J")
    root = np.sqrt(top.measures)[:, None]

    blocks = {"V0": np.column_stack([v.coefficients for v in v0_basis(g, pf, s, J)])}
    dims = {"V0": len(g.vertices)}
    for n in range(s):
        ws = wavelet_space(g, pf, n, J)
        blocks[f"W{n}"] = inclusion(ws.basis, top) @ ws.matrix()
        rank = numerical_rank(ws.matrix() * np.sqrt(ws.basis.measures)[:, None], RANK_RTOL)
        dims[f"W{n}"] = rank
        rep.check(f"dim W{n} = {ws.expected_dim}", abs(rank - ws.expected_dim), 0,
                  rank == ws.expected_dim == len(ws.vectors))
    on = {k: root * b for k, b in blocks.items()}

    worst = 0.0
    names = list(on)
    for a, b in ((a, b) for i, a in enumerate(names) for b in names[i + 1:]):
        worst = max(worst, _cosines(on[a], on[b]))
    rep.check("block orthogonality (max cosine)", worst, ortho_tol)

    total = sum(dims.values())
    rep.check(f"dim sum {total} = dim R_{s} {top.dim}", abs(total - top.dim), 0, total == top.dim)

    q = orthonormal_span(np.column_stack(list(on.values())), RANK_RTOL)
    residual = float(np.max(np.linalg.norm(np.eye(top.dim) - q @ q.T, axis=0)))
    rep.check("span residual", residual, span_tol)
    rep.tables["dimensions"] = dims
    rep.tables["dim_R"] = top.dim
    return rep
