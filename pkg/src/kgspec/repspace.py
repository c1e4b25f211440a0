"""Finite truncations of L^2(infinite path space, M) and the generators acting on them.

A level is given by an integer ``s`` and a shape ``J`` (all ones for the
square filtration).  Its basis is the set of cylinder indicators ``chi[eta]``
with ``d(eta) = s*J``; these cylinders are disjoint, so the Gram matrix is
``diag(M([eta]))``.  Operators are stored between explicit pairs of levels.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .kgraph import Degree, KGraph, KGraphError, Path, deg_add, deg_join, deg_leq, deg_sub
from .linalg import as_dense, to_orthonormal, weighted_adjoint
from .measure import PFData, cylinder_measure
from .report import Report

CK_TOL = 1e-10


class BasisMismatch(ValueError):
    pass


class DegreeTooLarge(ValueError):
    pass


class SourceMismatch(KGraphError):
    pass


class LevelTooSmall(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LevelBasis:
    graph: KGraph
    pf: PFData
    s: int
    J: Degree
    paths: tuple[Path, ...]
    measures: np.ndarray
    index: dict

    @property
    def degree(self) -> Degree:
        return tuple(self.s * j for j in self.J)

    @property
    def dim(self) -> int:
        return len(self.paths)

    @property
    def is_square(self) -> bool:
        return all(j == 1 for j in self.J)

    def same_space(self, other: "LevelBasis") -> bool:
        return self.graph is other.graph and self.degree == other.degree

    def __repr__(self) -> str:
        return f"LevelBasis(s={self.s}, J={self.J}, dim={self.dim})"


def level_basis(g: KGraph, pf: PFData, s: int, J: Sequence[int] | None = None) -> LevelBasis:
    if s < 0:
        raise ValueError("level must be non-negative")
    J = tuple(J) if J is not None else (1,) * g.rank
    if len(J) != g.rank or min(J) <= 0:
        raise ValueError(f"J = {J} must have {g.rank} positive entries")
    key = ("basis", id(pf), s, J)
    hit = g._cache.get(key)
    if hit is None:
        paths = tuple(g.enumerate_paths(tuple(s * j for j in J)))
        measures = np.array([cylinder_measure(pf, p) for p in paths])
        hit = LevelBasis(g, pf, s, J, paths, measures, {p: n for n, p in enumerate(paths)})
        g._cache[key] = hit
    return hit


@dataclass(frozen=True, eq=False)
class LevelVector:
    basis: LevelBasis
    coefficients: np.ndarray

    def __post_init__(self):
        if len(self.coefficients) != self.basis.dim:
            raise BasisMismatch("coefficient vector does not match basis size")

    def norm(self) -> float:
        return math.sqrt(max(inner_product(self, self).real, 0.0))

    def refine(self, fine: LevelBasis) -> "LevelVector":
        return LevelVector(fine, inclusion(self.basis, fine) @ self.coefficients)

    def orthonormal(self) -> np.ndarray:
        return np.sqrt(self.basis.measures) * self.coefficients


@dataclass(frozen=True, eq=False)
class LevelOperator:
    """Linear map between two levels; ``matrix`` is codomain x domain."""

    domain: LevelBasis
    codomain: LevelBasis
    matrix: object

    def dense(self) -> np.ndarray:
        return as_dense(self.matrix)

    def adjoint(self) -> "LevelOperator":
        m = weighted_adjoint(self.matrix, self.domain.measures, self.codomain.measures)
        return LevelOperator(self.codomain, self.domain, m)

    def orthonormal(self) -> np.ndarray:
        return to_orthonormal(self.matrix, self.domain.measures, self.codomain.measures)

    def include(self, fine: LevelBasis) -> "LevelOperator":
        """Follow this operator by the inclusion of its codomain into ``fine``."""
        if self.codomain.same_space(fine):
            return self
        return LevelOperator(self.domain, fine, inclusion(self.codomain, fine) @ self.matrix)

    def __matmul__(self, other):
        if isinstance(other, LevelOperator):
            if not self.domain.same_space(other.codomain):
                raise BasisMismatch("operator levels do not chain")
            return LevelOperator(other.domain, self.codomain, self.matrix @ other.matrix)
        if isinstance(other, LevelVector):
            if not self.domain.same_space(other.basis):
                raise BasisMismatch("vector is not in the operator's domain")
            return LevelVector(self.codomain, np.asarray(self.matrix @ other.coefficients).ravel())
        return NotImplemented

    def __add__(self, other: "LevelOperator") -> "LevelOperator":
        if not (self.domain.same_space(other.domain) and self.codomain.same_space(other.codomain)):
            raise BasisMismatch("operators act between different levels")
        return LevelOperator(self.domain, self.codomain, self.matrix + other.matrix)

    def __rmul__(self, c: float) -> "LevelOperator":
        return LevelOperator(self.domain, self.codomain, c * self.matrix)


# --- vectors -----------------------------------------------------------------

def _check_fits(eta: Path, basis: LevelBasis) -> None:
    if not deg_leq(eta.degree, basis.degree):
        raise DegreeTooLarge(f"d({eta}) = {eta.degree} exceeds level degree {basis.degree}")


def expand_rows(g: KGraph, eta: Path, basis: LevelBasis) -> list[int]:
    """Basis indices of the paths eta.zeta refining chi[eta] at ``basis``."""
    _check_fits(eta, basis)
    rest = deg_sub(basis.degree, eta.degree)
    return [basis.index[p] for p in g.extensions(eta, rest)]


def expand_to_level(g: KGraph, pf: PFData, eta: Path, basis: LevelBasis) -> LevelVector:
    """chi[eta] written in the cylinder basis of ``basis``."""
    c = np.zeros(basis.dim)
    c[expand_rows(g, eta, basis)] = 1.0
    return LevelVector(basis, c)


def inner_product(u: LevelVector, w: LevelVector) -> complex | float:
    if not u.basis.same_space(w.basis):
        raise BasisMismatch("vectors live at different levels; refine first")
    return np.sum(np.conj(u.coefficients) * w.coefficients * u.basis.measures)


def inclusion(coarse: LevelBasis, fine: LevelBasis) -> sp.csr_matrix:
    """Matrix of R(coarse) -> R(fine); each fine path lies under one coarse path."""
    if not deg_leq(coarse.degree, fine.degree):
        raise DegreeTooLarge(f"level {coarse.degree} is not below {fine.degree}")
    g = coarse.graph
    key = ("incl", id(coarse), id(fine))
    hit = g._cache.get(key)
    if hit is None:
        cols = [coarse.index[g.factorize(p, coarse.degree)[0]] for p in fine.paths]
        hit = sp.csr_matrix(
            (np.ones(fine.dim), (np.arange(fine.dim), cols)), shape=(fine.dim, coarse.dim)
        )
        g._cache[key] = hit
    return hit


def constants(basis: LevelBasis) -> LevelVector:
    """The constant function 1."""
    return LevelVector(basis, np.ones(basis.dim))


# --- level arithmetic ----------------------------------------------------------

def up_level(lam: Path, s: int, J: Sequence[int]) -> int:
    """Smallest level containing S_lam R_s (s + max_lam for square levels)."""
    return s + max(-(-d // j) for d, j in zip(lam.degree, J))


def down_level(lam: Path, s: int, J: Sequence[int]) -> int:
    """Smallest level containing S_lam^* R_s (max(s - min_lam, 0) for squares)."""
    return max(s - min(d // j for d, j in zip(lam.degree, J)), 0)


# --- generators ----------------------------------------------------------------

def s_matrix(g: KGraph, pf: PFData, lam: Path, dom: LevelBasis, cod: LevelBasis) -> sp.csr_matrix:
    """S_lam chi[eta] = rho^{d(lam)/2} chi[lam eta], column by column."""
    if not deg_leq(deg_add(lam.degree, dom.degree), cod.degree):
        raise DegreeTooLarge(f"S_{lam} does not map level {dom.degree} into {cod.degree}")
    key = ("S", lam, id(dom), id(cod))
    hit = g._cache.get(key)
    if hit is not None:
        return hit
    scale = math.sqrt(pf.scale(lam.degree))
    rows, cols = [], []
    for j, eta in enumerate(dom.paths):
        if eta.range != lam.source:
            continue
        r = expand_rows(g, g.compose(lam, eta), cod)
        rows += r
        cols += [j] * len(r)
    hit = sp.csr_matrix(
        (np.full(len(rows), scale), (rows, cols)), shape=(cod.dim, dom.dim)
    )
    g._cache[key] = hit
    return hit


def s_star_matrix(
    g: KGraph, pf: PFData, lam: Path, dom: LevelBasis, cod: LevelBasis
) -> sp.csr_matrix:
    """S_lam^* chi[eta] = rho^{-d(lam)/2} sum over Lambda^min(lam, eta) of chi[alpha]."""
    need = tuple(max(a - b, 0) for a, b in zip(dom.degree, lam.degree))
    if not deg_leq(need, cod.degree):
        raise DegreeTooLarge(f"S_{lam}^* does not map level {dom.degree} into {cod.degree}")
    key = ("S*", lam, id(dom), id(cod))
    hit = g._cache.get(key)
    if hit is not None:
        return hit
    scale = 1.0 / math.sqrt(pf.scale(lam.degree))
    rows, cols = [], []
    for j, eta in enumerate(dom.paths):
        if eta.range != lam.range:
            continue
        for alpha, _ in g.lambda_min(lam, eta):
            r = expand_rows(g, alpha, cod)
            rows += r
            cols += [j] * len(r)
    hit = sp.csr_matrix(
        (np.full(len(rows), scale), (rows, cols)), shape=(cod.dim, dom.dim)
    )
    hit.sum_duplicates()
    g._cache[key] = hit
    return hit


def s_operator(
    g: KGraph, pf: PFData, lam: Path, s: int, J: Sequence[int] | None = None,
    codomain: int | None = None,
) -> LevelOperator:
    """S_lam from level s to level s + max_lam (or ``codomain`` if given)."""
    dom = level_basis(g, pf, s, J)
    t = up_level(lam, s, dom.J) if codomain is None else codomain
    cod = level_basis(g, pf, t, J)
    return LevelOperator(dom, cod, s_matrix(g, pf, lam, dom, cod))


def s_star_operator(
    g: KGraph, pf: PFData, lam: Path, s: int, J: Sequence[int] | None = None,
    codomain: int | None = None,
) -> LevelOperator:
    """S_lam^* from level s to level max(s - min_lam, 0) (or ``codomain``)."""
    dom = level_basis(g, pf, s, J)
    t = down_level(lam, s, dom.J) if codomain is None else codomain
    cod = level_basis(g, pf, t, J)
    return LevelOperator(dom, cod, s_star_matrix(g, pf, lam, dom, cod))


Term = tuple[float, Path, Path]


def represent(
    g: KGraph, pf: PFData, terms: Iterable[Term], s: int, J: Sequence[int] | None = None
) -> LevelOperator:
    """pi(sum c_i s_{lam_i} s_{mu_i}^*) on level s, landing on level s + max_i max_{lam_i}."""
    terms = list(terms)
    if not terms:
        raise ValueError("empty formal sum")
    dom = level_basis(g, pf, s, J)
    for _, lam, mu in terms:
        if lam.source != mu.source:
            raise SourceMismatch(f"s({lam}) = {lam.source} != s({mu}) = {mu.source}")
        if dom.is_square and s < mu.max_degree:
            raise LevelTooSmall(f"level {s} is below max degree of {mu}")
    top = max(up_level(lam, s, dom.J) for _, lam, _ in terms)
    cod = level_basis(g, pf, top, J)
    total = sp.csr_matrix((cod.dim, dom.dim))
    for c, lam, mu in terms:
        mid = down_level(mu, s, dom.J)
        op = s_operator(g, pf, lam, mid, J) @ s_star_operator(g, pf, mu, s, J)
        total = total + c * op.include(cod).matrix
    return LevelOperator(dom, cod, sp.csr_matrix(total))


# --- Cuntz-Krieger relations ------------------------------------------------------

def _deviation(a: LevelOperator, b: LevelOperator) -> float:
    """Max entrywise difference after including both into a common level."""
    top = a.codomain if deg_leq(b.codomain.degree, a.codomain.degree) else b.codomain
    diff = a.include(top).matrix - b.include(top).matrix
    diff = as_dense(diff)
    return float(np.max(np.abs(diff))) if diff.size else 0.0


def generators(g: KGraph) -> list[Path]:
    """All paths with degree in {0,1}^k: the sample used by :func:`ck_verify`."""
    out: list[Path] = []
    for n in itertools.product((0, 1), repeat=g.rank):
        out += g.enumerate_paths(n)
    return out


def ck_verify(g: KGraph, pf: PFData, s: int = 2, tol: float = CK_TOL) -> Report:
    """Check (CK1)-(CK4) as matrix identities on the level-s space."""
    if s < 2:
        raise LevelTooSmall("Cuntz-Krieger verification needs s >= 2")
    rep = Report("cuntz_krieger", {"graph": g.name, "s": s})
    verts = [g.vertex_path(v) for v in g.vertices]
    proj = {v.range: s_operator(g, pf, v, s) for v in verts}

    ck1 = 0.0
    for v, w in itertools.product(verts, verts):
        lhs = proj[v.range] @ proj[w.range]
        rhs = proj[v.range] if v == w else 0.0 * proj[v.range]
        ck1 = max(ck1, _deviation(lhs, rhs))
    rep.check("CK1", ck1, tol)

    gens = generators(g)
    ck2 = 0.0
    pairs = 0
    for lam, eta in itertools.product(gens, gens):
        if lam.source != eta.range:
            continue
        pairs += 1
        inner = s_operator(g, pf, eta, s)
        lhs = s_operator(g, pf, lam, inner.codomain.s) @ inner
        rhs = s_operator(g, pf, g.compose(lam, eta), s)
        ck2 = max(ck2, _deviation(lhs, rhs))
    rep.check("CK2", ck2, tol)

    ck3 = 0.0
    for lam in gens:
        up = s_operator(g, pf, lam, s)
        lhs = s_star_operator(g, pf, lam, up.codomain.s) @ up
        ck3 = max(ck3, _deviation(lhs, proj[lam.source]))
    rep.check("CK3", ck3, tol)

    ck4 = 0.0
    for n in itertools.product((0, 1), repeat=g.rank):
        for v in g.vertices:
            total = None
            for lam in g.enumerate_paths(n, v):
                down = s_star_operator(g, pf, lam, s)
                term = s_operator(g, pf, lam, down.codomain.s) @ down
                total = term if total is None else total + term
            ck4 = max(ck4, _deviation(total, proj[v]))
    rep.check("CK4", ck4, tol)
    rep.tables["sampled_ck2_pairs"] = pairs
    return rep
