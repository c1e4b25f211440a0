"""The Dirac operator D = sum_q alpha_q (Xi_q - Xi_{q-1}) on a truncated space.

Constants (the range of Xi_{-1}) are annihilated by D.  Eigenspace bases are
held in orthonormal coordinates of the top level, one sparse block per
eigenvalue: block 0 is the constants, block q+1 is R_q minus R_{q-1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .kgraph import KGraph, Path
from .linalg import as_dense, operator_norm, orthonormal_span, weighted_adjoint
from .measure import PFData
from .repspace import (
    LevelBasis,
    LevelOperator,
    SourceMismatch,
    inclusion,
    level_basis,
    s_operator,
    s_star_operator,
)
from .report import Report
from .wavelets import wavelet_space

IDENTITY_TOL = 1e-8
PROJECTION_TOL = 1e-10
COMMUTATOR_SLACK = 1e-9
RESOLVENT_TOL = 1e-12


class LevelOutOfRange(ValueError):
    pass


class TruncationTooSmall(ValueError):
    pass


class SpectrumCollision(ValueError):
    pass


@dataclass(frozen=True)
class AlphaSequence:
    """Either the affine family alpha_q = slope*q + offset, or an explicit list."""

    slope: float = 1.0
    offset: float = 1.0
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.values is None:
            if self.slope <= 0 or self.offset <= 0:
                raise ValueError("affine alpha needs slope > 0 and offset > 0")
        else:
            v = self.values
            if not v or v[0] <= 0 or any(b <= a for a, b in zip(v, v[1:])):
                raise ValueError("explicit alpha must be positive and strictly increasing")

    @classmethod
    def explicit(cls, values: Sequence[float]) -> "AlphaSequence":
        return cls(values=tuple(float(x) for x in values))

    def __call__(self, q: int) -> float:
        if q < 0:
            raise ValueError("alpha is indexed from 0")
        if self.values is None:
            return self.slope * q + self.offset
        if q >= len(self.values):
            raise LevelOutOfRange(f"explicit alpha has only {len(self.values)} terms")
        return self.values[q]

    @property
    def gap_bound(self) -> float:
        if self.values is None:
            return self.slope
        return max((b - a for a, b in zip(self.values, self.values[1:])), default=0.0)

    def describe(self) -> dict:
        if self.values is None:
            return {"kind": "affine", "slope": self.slope, "offset": self.offset}
        return {"kind": "explicit", "values": list(self.values)}


def xi_projection(
    g: KGraph, pf: PFData, s: int, T: int, J: Sequence[int] | None = None
) -> LevelOperator:
    """Weighted-orthogonal projection of the level-T space onto R_s (s = -1: constants).

    The columns of the inclusion R_s -> R_T have Gram matrix diag(M_s), so the
    least-squares projector is B diag(1/M_s) B^T G_T.
    """
    if not -1 <= s <= T:
        raise LevelOutOfRange(f"need -1 <= s <= T, got s={s}, T={T}")
    top = level_basis(g, pf, T, J)
    if s == -1:
        m = np.outer(np.ones(top.dim), top.measures) / top.measures.sum()
    else:
        low = level_basis(g, pf, s, J)
        b = inclusion(low, top)
        m = as_dense(b @ sp.diags(1.0 / low.measures) @ b.T) * top.measures[None, :]
    return LevelOperator(top, top, m)


def _complement_blocks(g: KGraph, pf: PFData, T: int, J) -> list[sp.csc_matrix]:
    """Orthonormal bases of R_{-1}, R_0 - R_{-1}, ..., R_T - R_{T-1} in top-level
    orthonormal coordinates.

    Inside R_q each level-(q-1) cylinder splits into its children; the part of
    R_q orthogonal to R_{q-1} is, cylinder by cylinder, the complement of the
    unit vector sqrt(M(child)/M(parent)).
    """
    top = level_basis(g, pf, T, J)
    root_t = np.sqrt(top.measures)
    blocks = [sp.csc_matrix(root_t[:, None] / math.sqrt(top.measures.sum()))]
    for q in range(T + 1):
        here = level_basis(g, pf, q, J)
        if q == 0:
            groups = [np.arange(here.dim)]
            parent_mass = [here.measures.sum()]
        else:
            prev = level_basis(g, pf, q - 1, J)
            parent = inclusion(prev, here).tocoo()
            order = np.argsort(parent.col, kind="stable")
            rows, cols = parent.row[order], parent.col[order]
            groups = np.split(rows, np.flatnonzero(np.diff(cols)) + 1)
            parent_mass = prev.measures[np.unique(cols)]
        r_idx, c_idx, vals = [], [], []
        col = 0
        for members, mass in zip(groups, parent_mass):
            m = len(members)
            if m < 2:
                continue
            u = np.sqrt(here.measures[members] / mass)
            comp = sla.qr(u[:, None], mode="full")[0][:, 1:]
            for j in range(m - 1):
                r_idx += list(members)
                c_idx += [col + j] * m
                vals += list(comp[:, j])
            col += m - 1
        local = sp.csc_matrix((vals, (r_idx, c_idx)), shape=(here.dim, col))
        lift = (
            sp.diags(root_t) @ inclusion(here, top) @ sp.diags(1.0 / np.sqrt(here.measures))
        )
        blocks.append(sp.csc_matrix(lift @ local))
    return blocks


@dataclass(frozen=True, eq=False)
class DiracTruncation:
    graph: KGraph
    pf: PFData
    alpha: AlphaSequence
    T: int
    basis: LevelBasis
    blocks: tuple = field(repr=False)

    @property
    def J(self) -> tuple[int, ...]:
        return self.basis.J

    @property
    def eigenvalues(self) -> list[float]:
        """Eigenvalue per block: 0 on constants, then alpha_0 ... alpha_T."""
        return [0.0] + [self.alpha(q) for q in range(self.T + 1)]

    @property
    def multiplicities(self) -> list[int]:
        return [b.shape[1] for b in self.blocks]

    @cached_property
    def xi(self) -> list[np.ndarray]:
        """Xi_{-1}, Xi_0, ..., Xi_T as dense weighted-coordinate matrices."""
        return [
            xi_projection(self.graph, self.pf, s, self.T, self.J).dense()
            for s in range(-1, self.T + 1)
        ]

    @cached_property
    def projections(self) -> list[np.ndarray]:
        """Xi_hat_{q,q-1} = Xi_q - Xi_{q-1} for q = 0..T."""
        return [self.xi[q + 1] - self.xi[q] for q in range(self.T + 1)]

    @cached_property
    def matrix(self) -> np.ndarray:
        """sum_q alpha_q Xi_hat_{q,q-1} in weighted coordinates."""
        return sum(self.alpha(q) * p for q, p in enumerate(self.projections))

    def apply_orthonormal(self, x: np.ndarray) -> np.ndarray:
        """D applied to orthonormal-coordinate columns, block by block."""
        out = np.zeros_like(x, dtype=np.result_type(x, float))
        for lam, b in zip(self.eigenvalues, self.blocks):
            if lam and b.shape[1]:
                out += lam * (b @ (b.T @ x))
        return out


def dirac_truncation(
    g: KGraph, pf: PFData, alpha: AlphaSequence | None = None, T: int = 1,
    J: Sequence[int] | None = None,
) -> DiracTruncation:
    if T < 1:
        raise LevelOutOfRange("truncation level must be >= 1")
    alpha = alpha or AlphaSequence()
    alpha(T)  # explicit sequences must cover the truncation
    basis = level_basis(g, pf, T, J)
    blocks = tuple(_complement_blocks(g, pf, T, basis.J))
    return DiracTruncation(g, pf, alpha, T, basis, blocks)


def eigenspaces(dt: DiracTruncation) -> list[tuple[float, np.ndarray]]:
    """(eigenvalue, weighted-coordinate basis) for each nonzero-dimensional eigenspace.

    Basis columns are orthonormal in the weighted inner product.
    """
    scale = 1.0 / np.sqrt(dt.basis.measures)[:, None]
    return [
        (lam, scale * as_dense(b))
        for lam, b in zip(dt.eigenvalues, dt.blocks)
        if b.shape[1]
    ]


def spectrum(dt: DiracTruncation) -> list[tuple[float, int]]:
    return [(lam, b.shape[1]) for lam, b in zip(dt.eigenvalues, dt.blocks) if b.shape[1]]


def _projector_on(dt: DiracTruncation, weighted: np.ndarray) -> np.ndarray:
    root = np.sqrt(dt.basis.measures)
    q = orthonormal_span(root[:, None] * weighted)
    return q @ q.T


def verify_eigenspace_wavelet_identity(
    g: KGraph, pf: PFData, dt: DiracTruncation, q: int, tol: float = IDENTITY_TOL
) -> Report:
    """Compare the projector onto span W_q with Xi_hat_{q+1,q}."""
    if q + 1 > dt.T:
        raise LevelOutOfRange(f"need q + 1 <= T, got q={q}, T={dt.T}")
    rep = Report("eigenspace_wavelet_identity", {"graph": g.name, "q": q, "T": dt.T, "J": list(dt.J)})
    ws = wavelet_space(g, pf, q, dt.J)
    top = dt.basis
    vecs = inclusion(ws.basis, top) @ ws.matrix()
    p_w = _projector_on(dt, vecs) if vecs.shape[1] else np.zeros((top.dim, top.dim))
    root = np.sqrt(top.measures)
    xi_hat = dt.projections[q + 1]
    xi_on = root[:, None] * xi_hat / root[None, :]
    rep.check("||P_W - Xi_hat||", np.linalg.norm(p_w - xi_on, 2), tol)
    rep.tables["dim_W"] = int(round(np.trace(p_w)))
    rep.tables["rank_Xi_hat"] = int(round(np.trace(xi_on)))

    const = np.ones(top.dim)
    residual = np.max(np.abs(dt.xi[1] @ const - const))
    rep.check("constants in range(Xi_0)", residual, tol)
    if not top.is_square:
        rep.notes.append("J-variant: wavelets built per the rectangular difference family")
    return rep


def _ceilings(lam: Path, mu: Path, C: float) -> tuple[float, float]:
    lo, hi = lam.min_degree - mu.max_degree, lam.max_degree - mu.min_degree
    high = C * sum(abs(t) for t in range(lo, hi + 1))
    m, M = lam.max_degree - mu.min_degree, mu.max_degree
    low = C * (m * (m + 1) / 2 + M * (M + 1) / 2)
    return high, low


def commutator_norms(
    dt: DiracTruncation, lam: Path, mu: Path
) -> list[tuple[int, float, float]]:
    """(q, ||[D, S_lam S_mu^*] restricted to block q||, alpha_q) for 0 <= q <= T - max_lam - 1."""
    g, pf, top = dt.graph, dt.pf, dt.basis
    root = np.sqrt(top.measures)
    out = []
    for q in range(0, dt.T - lam.max_degree):
        block = dt.blocks[q + 1]
        if block.shape[1] == 0:
            out.append((q, 0.0, dt.alpha(q)))
            continue
        here = level_basis(g, pf, q)
        b = inclusion(here, top)
        # block vectors live in R_q: pull them back to level-q coordinates
        f = sp.diags(1.0 / here.measures) @ b.T @ sp.diags(root) @ block
        down = s_star_operator(g, pf, mu, q)
        up = s_operator(g, pf, lam, down.codomain.s)
        op = (up @ down).include(top)
        gvec = sp.diags(root) @ (op.matrix @ f)
        gvec = as_dense(gvec)
        comm = dt.apply_orthonormal(gvec) - dt.alpha(q) * gvec
        out.append((q, operator_norm(comm), dt.alpha(q)))
    return out


def commutator_sweep(
    g: KGraph, pf: PFData, alpha: AlphaSequence, lam: Path, mu: Path, T: int,
    dt: DiracTruncation | None = None,
) -> Report:
    """Norms of [D, S_lam S_mu^*] on each eigenspace against the analytic ceilings.

    For q > max_mu the ceiling is C * sum_{t=min_lam-max_mu}^{max_lam-min_mu} |t|.
    For q <= max_mu it is C * (m(m+1)/2 + M(M+1)/2) with m = max_lam - min_mu,
    M = max_mu, plus alpha_q: the image may have a constant component, where D
    is 0 rather than alpha_0.
    """
    if lam.source != mu.source:
        raise SourceMismatch(f"s({lam}) = {lam.source} != s({mu}) = {mu.source}")
    need = mu.max_degree + lam.max_degree + 2
    if T < need:
        raise TruncationTooSmall(f"T = {T} < max_mu + max_lam + 2 = {need}")
    if dt is None or dt.T != T or not dt.basis.is_square:
        dt = dirac_truncation(g, pf, alpha, T)
    C = alpha.gap_bound
    high, low = _ceilings(lam, mu, C)
    rep = Report(
        "commutator_sweep",
        {"graph": g.name, "lambda": str(lam), "mu": str(mu), "T": T, "alpha": alpha.describe(), "C": C},
    )
    rows = []
    for q, norm, a_q in commutator_norms(dt, lam, mu):
        if q > mu.max_degree:
            regime, ceiling, proof = "high", high, high
        else:
            regime, ceiling, proof = "low", low + a_q, low
        ok = norm <= ceiling + COMMUTATOR_SLACK
        rows.append({
            "q": q, "regime": regime, "norm": norm, "ceiling": ceiling,
            "proof_ceiling": proof, "within_proof_ceiling": norm <= proof + COMMUTATOR_SLACK,
            "passed": ok,
        })
        rep.check(f"q={q} norm <= ceiling", norm, ceiling + COMMUTATOR_SLACK, ok)
    rep.tables["per_q"] = rows
    rep.tables["high_ceiling"] = high
    return rep


def resolvent_decay(dt: DiracTruncation, z: complex = 1j, tol: float = RESOLVENT_TOL) -> Report:
    """Singular values of (D - z)^{-1} per eigenspace against 1/|alpha_q - z|."""
    for lam in dt.eigenvalues:
        if abs(lam - z) <= 1e-12:
            raise SpectrumCollision(f"z = {z} is an eigenvalue of D")
    rep = Report("resolvent_decay", {"graph": dt.graph.name, "T": dt.T, "z": [z.real, z.imag]})
    root = np.sqrt(dt.basis.measures)
    d_on = root[:, None] * dt.matrix / root[None, :]
    d_on = (d_on + d_on.T) / 2
    res = np.linalg.inv(d_on - z * np.eye(dt.basis.dim))
    rows = []
    worst = 0.0
    for label, lam, b in zip(["const"] + list(range(dt.T + 1)), dt.eigenvalues, dt.blocks):
        if b.shape[1] == 0:
            continue
        sv = np.linalg.svd(res @ as_dense(b), compute_uv=False)
        expected = 1.0 / abs(lam - z)
        dev = float(np.max(np.abs(sv - expected)))
        worst = max(worst, dev)
        rows.append({"block": label, "eigenvalue": lam, "multiplicity": b.shape[1],
                     "singular_value": float(sv.max()), "expected": expected, "deviation": dev})
    rep.check("max |sigma - 1/|alpha_q - z||", worst, tol)
    values = [r["singular_value"] for r in rows]
    rep.check("strictly decreasing", 0.0, 0.0, all(b < a for a, b in zip(values, values[1:])))
    rep.tables["blocks"] = rows
    return rep


def verify_dirac(dt: DiracTruncation, tol: float = PROJECTION_TOL) -> Report:
    """Projection algebra, completeness and weighted self-adjointness of D."""
    rep = Report("dirac_structure", {"graph": dt.graph.name, "T": dt.T, "J": list(dt.J)})
    projs = dt.projections
    worst = 0.0
    for i, p in enumerate(projs):
        for j, r in enumerate(projs):
            target = p if i == j else 0.0
            worst = max(worst, float(np.max(np.abs(p @ r - target))))
    rep.check("Xi_hat_q Xi_hat_r = delta_qr Xi_hat_q", worst, tol)
    total = dt.xi[0] + sum(projs)
    rep.check("Xi_-1 + sum Xi_hat = I", np.max(np.abs(total - np.eye(dt.basis.dim))), tol)
    m = dt.basis.measures
    rep.check("D = D^*", np.max(np.abs(dt.matrix - weighted_adjoint(dt.matrix, m, m))), 1e-12)
    rep.check("D 1 = 0", np.max(np.abs(dt.matrix @ np.ones(dt.basis.dim))), tol)
    mult = [int(round(np.trace(p))) for p in projs]
    rep.check("block ranks match", 0.0, 0.0, mult == dt.multiplicities[1:])
    rep.tables["multiplicities"] = [lam_m[1] for lam_m in spectrum(dt)]
    return rep
