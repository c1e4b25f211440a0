import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgspec.kgraph import Path
from kgspec.measure import cylinder_measure
from kgspec.repspace import (
    BasisMismatch,
    DegreeTooLarge,
    LevelTooSmall,
    LevelVector,
    SourceMismatch,
    ck_verify,
    constants,
    expand_to_level,
    inclusion,
    inner_product,
    level_basis,
    represent,
    s_matrix,
    s_operator,
    s_star_matrix,
    s_star_operator,
)

NAMES = ["o2", "trivial11", "flip23", "twovertex", "skew2v"]


def edge_paths(g):
    return [g.path([e.id]) for e in g.edges]


def coeffs(basis, mapping):
    """Coefficient vector from a {edge-tuple: value} dict."""
    c = np.zeros(basis.dim)
    for p, i in basis.index.items():
        c[i] = mapping.get(p.edges, 0.0)
    return c


# --- bases ----------------------------------------------------------------------

def test_level_dimensions(o2, flip23, graphs, pfs):
    assert level_basis(*o2, 3).dim == 8
    assert level_basis(*flip23, 2).dim == 36
    for name in NAMES:
        b = level_basis(graphs[name], pfs[name], 0)
        assert [p.range for p in b.paths] == list(graphs[name].vertices)


def test_level_rejects_bad_shape(flip23):
    with pytest.raises(ValueError):
        level_basis(*flip23, 1, (1,))
    with pytest.raises(ValueError):
        level_basis(*flip23, 1, (0, 1))


@pytest.mark.parametrize("name", NAMES)
def test_basis_measures_and_gram(graphs, pfs, name):
    g, pf = graphs[name], pfs[name]
    b = level_basis(g, pf, 2)
    assert len(set(b.paths)) == b.dim
    assert np.all(b.measures > 0)
    vecs = [LevelVector(b, row) for row in np.eye(b.dim)]
    gram = np.array([[inner_product(u, w) for w in vecs] for u in vecs])
    np.testing.assert_allclose(gram, np.diag([cylinder_measure(pf, p) for p in b.paths]), atol=0)


# --- expansion ------------------------------------------------------------------

def test_expand_examples(o2, twovertex):
    g, pf = o2
    b2 = level_basis(g, pf, 2)
    v = expand_to_level(g, pf, g.path(["e"]), b2)
    np.testing.assert_array_equal(v.coefficients, coeffs(b2, {("e", "e"): 1, ("e", "f"): 1}))
    same = expand_to_level(g, pf, g.path(["e", "f"]), b2)
    np.testing.assert_array_equal(same.coefficients, coeffs(b2, {("e", "f"): 1}))

    g, pf = twovertex
    b1 = level_basis(g, pf, 1)
    u = expand_to_level(g, pf, g.vertex_path("u"), b1)
    assert sorted(p.edges[0] for p in b1.paths if u.coefficients[b1.index[p]]) == ["uu", "uw"]


def test_expand_too_deep(o2):
    g, pf = o2
    with pytest.raises(DegreeTooLarge):
        expand_to_level(g, pf, g.path(["e", "e"]), level_basis(g, pf, 1))


@pytest.mark.parametrize("name", NAMES)
def test_constants_have_unit_norm(graphs, pfs, name):
    g, pf = graphs[name], pfs[name]
    for s in range(3):
        b = level_basis(g, pf, s)
        one = sum(expand_to_level(g, pf, g.vertex_path(v), b).coefficients for v in g.vertices)
        np.testing.assert_array_equal(one, constants(b).coefficients)
        assert inner_product(constants(b), constants(b)) == pytest.approx(1, abs=1e-12)


def test_inner_product_needs_common_level(o2):
    g, pf = o2
    with pytest.raises(BasisMismatch):
        inner_product(constants(level_basis(g, pf, 1)), constants(level_basis(g, pf, 2)))


@pytest.mark.parametrize("name", NAMES)
def test_refinement_consistency(graphs, pfs, name):
    g, pf = graphs[name], pfs[name]
    for s in range(2):
        coarse, fine = level_basis(g, pf, s), level_basis(g, pf, s + 1)
        for eta in g.enumerate_paths((s,) * g.rank):
            a = expand_to_level(g, pf, eta, coarse).refine(fine)
            b = expand_to_level(g, pf, eta, fine)
            np.testing.assert_array_equal(a.coefficients, b.coefficients)


@settings(max_examples=50, deadline=None)
@given(name=st.sampled_from(NAMES), seed=st.integers(0, 2**31))
def test_inner_product_independent_of_level(graphs, pfs, name, seed):
    g, pf = graphs[name], pfs[name]
    rng = np.random.default_rng(seed)
    b1, b3 = level_basis(g, pf, 1), level_basis(g, pf, 3)
    u = LevelVector(b1, rng.normal(size=b1.dim))
    w = LevelVector(b1, rng.normal(size=b1.dim))
    assert inner_product(u.refine(b3), w.refine(b3)) == pytest.approx(inner_product(u, w), abs=1e-12)


# --- generators -----------------------------------------------------------------

def test_s_vertex_is_projection(twovertex):
    g, pf = twovertex
    op = s_operator(g, pf, g.vertex_path("u"), 2)
    d = op.dense()
    np.testing.assert_array_equal(d, np.diag([float(p.range == "u") for p in op.domain.paths]))
    np.testing.assert_array_equal(s_star_operator(g, pf, g.vertex_path("u"), 2).dense(), d)


def test_s_edge_o2_example(o2):
    g, pf = o2
    op = s_operator(g, pf, g.path(["e"]), 1)
    assert op.codomain.s == 2
    col = op.dense()[:, op.domain.index[g.path(["f"])]]
    np.testing.assert_allclose(col, math.sqrt(2) * coeffs(op.codomain, {("e", "f"): 1}), atol=0)


def test_s_edge_flip_example(flip23):
    g, pf = flip23
    op = s_operator(g, pf, g.path(["b1"]), 0)
    expected = expand_to_level(g, pf, g.path(["b1"]), op.codomain).coefficients
    np.testing.assert_allclose(op.dense()[:, 0], math.sqrt(2) * expected, atol=1e-15)


def test_s_star_o2_example(o2):
    g, pf = o2
    op = s_star_operator(g, pf, g.path(["e"]), 1)
    assert op.codomain.s == 0
    d = op.dense()
    assert d[0, op.domain.index[g.path(["e"])]] == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert d[0, op.domain.index[g.path(["f"])]] == 0


def _dense_s_oracle(g, pf, lam, dom, cod):
    """S_lam by direct prefixing on every codomain basis path."""
    out = np.zeros((cod.dim, dom.dim))
    r = math.sqrt(pf.scale(lam.degree))
    for i, p in enumerate(cod.paths):
        if not all(a >= b for a, b in zip(p.degree, lam.degree)):
            continue
        head, tail = g.factorize(p, lam.degree)
        if head != lam:
            continue
        # tail lies under exactly one domain path
        cut = tuple(min(a, b) for a, b in zip(tail.degree, dom.degree))
        out[i, dom.index[g.factorize(tail, cut)[0]]] = r
    return out


@pytest.mark.parametrize("name", NAMES)
def test_s_matches_prefix_oracle(graphs, pfs, name):
    g, pf = graphs[name], pfs[name]
    for lam in edge_paths(g):
        for s in range(3):
            op = s_operator(g, pf, lam, s)
            np.testing.assert_allclose(op.dense(), _dense_s_oracle(g, pf, lam, op.domain, op.codomain))


@pytest.mark.parametrize("name", NAMES)
def test_adjointness(graphs, pfs, name):
    # <S* w, u>_t = <w, S u>_{t'} with w refined from level t to t' = t + max_lam
    g, pf = graphs[name], pfs[name]
    for lam in edge_paths(g) + [g.vertex_path(v) for v in g.vertices]:
        for t in range(4):
            here = level_basis(g, pf, t)
            up = level_basis(g, pf, t + lam.max_degree)
            star = s_star_matrix(g, pf, lam, here, here).toarray()
            a = s_matrix(g, pf, lam, here, up).toarray()
            incl = inclusion(here, up).toarray()
            oracle = np.diag(1 / here.measures) @ a.T @ np.diag(up.measures) @ incl
            assert np.max(np.abs(star - oracle), initial=0) <= 1e-12


@pytest.mark.parametrize("name", NAMES)
def test_isometry_on_initial_space(graphs, pfs, name):
    g, pf = graphs[name], pfs[name]
    rng = np.random.default_rng(7)
    s = 2
    for lam in edge_paths(g):
        op = s_operator(g, pf, lam, s)
        proj = represent(g, pf, [(1.0, g.vertex_path(lam.source), g.vertex_path(lam.source))], s)
        for _ in range(100):
            u = LevelVector(op.domain, rng.normal(size=op.domain.dim))
            assert (op @ u).norm() == pytest.approx((proj @ u).norm(), abs=1e-10)


@pytest.mark.parametrize("name", NAMES)
def test_operators_commute_with_inclusion(graphs, pfs, name):
    g, pf = graphs[name], pfs[name]
    for lam in edge_paths(g):
        low, high = s_operator(g, pf, lam, 1), s_operator(g, pf, lam, 2)
        lhs = inclusion(low.codomain, high.codomain) @ low.matrix
        rhs = high.matrix @ inclusion(low.domain, high.domain)
        assert abs(lhs - rhs).max() == 0


# --- represent -------------------------------------------------------------------

def test_represent_vertex_sum_is_identity(graphs, pfs):
    for name in NAMES:
        g, pf = graphs[name], pfs[name]
        terms = [(1.0, g.vertex_path(v), g.vertex_path(v)) for v in g.vertices]
        np.testing.assert_allclose(represent(g, pf, terms, 2).dense(), np.eye(level_basis(g, pf, 2).dim))


def test_represent_ck4_identity(o2):
    g, pf = o2
    e, f = g.path(["e"]), g.path(["f"])
    for s in (1, 2, 3):
        op = represent(g, pf, [(1.0, e, e), (1.0, f, f)], s)
        incl = inclusion(op.domain, op.codomain).toarray()
        np.testing.assert_allclose(op.dense(), incl, atol=1e-14)


@pytest.mark.parametrize("s, rank", [(1, 1), (3, 4)])
def test_represent_e_f_swap(o2, s, rank):
    g, pf = o2
    op = represent(g, pf, [(1.0, g.path(["e"]), g.path(["f"]))], s)
    d = op.dense()
    assert op.codomain.s == s + 1
    assert np.linalg.matrix_rank(d) == rank
    # oracle: apply to every basis vector, refining the image one level
    for j, p in enumerate(op.domain.paths):
        if p.edges[0] == "f":
            target = g.path(("e",) + p.edges[1:])
            expected = expand_to_level(g, pf, target, op.codomain).coefficients
        else:
            expected = np.zeros(op.codomain.dim)
        np.testing.assert_allclose(d[:, j], expected, atol=1e-14)


def test_represent_errors(twovertex, o2):
    g, pf = twovertex
    with pytest.raises(SourceMismatch):
        represent(g, pf, [(1.0, g.path(["uu"]), g.path(["uw"]))], 2)
    g, pf = o2
    with pytest.raises(LevelTooSmall):
        represent(g, pf, [(1.0, g.path(["e"]), g.path(["f", "f"]))], 1)
    with pytest.raises(ValueError):
        represent(g, pf, [], 1)


# --- Cuntz-Krieger ---------------------------------------------------------------

@pytest.mark.parametrize("name", NAMES)
def test_ck_verify(graphs, pfs, name):
    rep = ck_verify(graphs[name], pfs[name], 2)
    assert rep.passed, rep.failures()
    assert {c.name for c in rep.checks} == {"CK1", "CK2", "CK3", "CK4"}


def test_ck_verify_o2_tight(o2):
    rep = ck_verify(*o2, 2, tol=1e-12)
    assert rep.passed


def test_ck_verify_needs_level_two(o2):
    with pytest.raises(LevelTooSmall):
        ck_verify(*o2, 1)


def test_wrong_measure_breaks_refinement(twovertex):
    # the relations only see ratios of M, but additivity needs the true PF data
    from kgspec.measure import PFData

    g, pf = twovertex
    bad = PFData(pf.vertices, pf.rho, np.array([0.7, 0.3]), 0)
    assert ck_verify(g, bad, 2).passed
    b0, b1 = level_basis(g, bad, 0), level_basis(g, bad, 1)
    chi_u = expand_to_level(g, bad, g.vertex_path("u"), b0)
    assert abs(chi_u.norm() ** 2 - chi_u.refine(b1).norm() ** 2) == pytest.approx(0.2)
