"""Finite k-graphs presented by a colored skeleton and factorization squares.

Paths are stored in color-sorted normal form: all color-1 edges first, then
color-2 edges, and so on.  Paths read left to right from range to source, so
for ``lam = mu nu`` we have ``r(lam) = r(mu)`` and ``s(lam) = s(nu)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

Degree = tuple[int, ...]


class KGraphError(ValueError):
    """Base class for errors raised by the combinatorial layer."""


class NonBijectiveSquare(KGraphError):
    pass


class CubeInconsistent(KGraphError):
    pass


class SourceViolation(KGraphError):
    pass


class NotComposable(KGraphError):
    pass


class DegreeOutOfRange(KGraphError):
    pass


# --- degree arithmetic -----------------------------------------------------

def deg_leq(m: Sequence[int], n: Sequence[int]) -> bool:
    return all(a <= b for a, b in zip(m, n))


def deg_join(m: Sequence[int], n: Sequence[int]) -> Degree:
    return tuple(max(a, b) for a, b in zip(m, n))


def deg_add(m: Sequence[int], n: Sequence[int]) -> Degree:
    return tuple(a + b for a, b in zip(m, n))


def deg_sub(m: Sequence[int], n: Sequence[int]) -> Degree:
    if not deg_leq(n, m):
        raise DegreeOutOfRange(f"cannot subtract {tuple(n)} from {tuple(m)}")
    return tuple(a - b for a, b in zip(m, n))


def unit(k: int, color: int) -> Degree:
    return tuple(1 if c == color else 0 for c in range(1, k + 1))


# --- raw presentation --------------------------------------------------------

@dataclass(frozen=True)
class Edge:
    id: str
    color: int
    source: str
    range: str


@dataclass(frozen=True)
class Skeleton:
    vertices: tuple[str, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self):
        if len(set(self.vertices)) != len(self.vertices):
            raise KGraphError("duplicate vertex id")
        if len({e.id for e in self.edges}) != len(self.edges):
            raise KGraphError("duplicate edge id")
        known = set(self.vertices)
        for e in self.edges:
            if e.source not in known or e.range not in known:
                raise KGraphError(f"edge {e.id!r} has an undeclared endpoint")
            if e.color < 1:
                raise KGraphError(f"edge {e.id!r} has color {e.color} < 1")

    @property
    def rank(self) -> int:
        return max((e.color for e in self.edges), default=0)


@dataclass(frozen=True)
class Path:
    """A morphism of the k-graph in normal form.

    Degree-0 paths have an empty edge tuple and ``range == source``.
    """

    edges: tuple[str, ...]
    degree: Degree
    range: str
    source: str

    @property
    def is_vertex(self) -> bool:
        return not self.edges

    @property
    def max_degree(self) -> int:
        return max(self.degree)

    @property
    def min_degree(self) -> int:
        return min(self.degree)

    def __str__(self) -> str:
        return ".".join(self.edges) if self.edges else self.range


# --- the validated k-graph -------------------------------------------------

@dataclass(frozen=True, eq=False)
class KGraph:
    """A validated finite k-graph.  Build with :func:`validate_kgraph`."""

    rank: int
    skeleton: Skeleton
    # (f, g) with color(f) > color(g), s(f) = r(g)  ->  (g', f') sorted
    squares: dict[tuple[str, str], tuple[str, str]]
    name: str = "kgraph"
    _edge: dict[str, Edge] = field(init=False, repr=False)
    _inverse: dict[tuple[str, str], tuple[str, str]] = field(init=False, repr=False)
    _by_range: dict[tuple[str, int], tuple[str, ...]] = field(init=False, repr=False)
    _cache: dict = field(init=False, repr=False)

    def __post_init__(self):
        edge = {e.id: e for e in self.skeleton.edges}
        by_range: dict[tuple[str, int], list[str]] = {}
        for e in self.skeleton.edges:
            by_range.setdefault((e.range, e.color), []).append(e.id)
        object.__setattr__(self, "_edge", edge)
        object.__setattr__(self, "_inverse", {v: k for k, v in self.squares.items()})
        object.__setattr__(self, "_by_range", {k: tuple(v) for k, v in by_range.items()})
        object.__setattr__(self, "_cache", {})

    # basic accessors
    @property
    def vertices(self) -> tuple[str, ...]:
        return self.skeleton.vertices

    @property
    def edges(self) -> tuple[Edge, ...]:
        return self.skeleton.edges

    def edge(self, edge_id: str) -> Edge:
        return self._edge[edge_id]

    def color(self, edge_id: str) -> int:
        return self._edge[edge_id].color

    def edges_into(self, v: str, color: int) -> tuple[str, ...]:
        """Color-``color`` edges with range ``v``, in declaration order."""
        return self._by_range.get((v, color), ())

    def zero(self) -> Degree:
        return (0,) * self.rank

    def vertex_path(self, v: str) -> Path:
        if v not in self.vertices:
            raise KeyError(v)
        return Path((), self.zero(), v, v)

    def path(self, edge_ids: Iterable[str]) -> Path:
        """Normal form of a composable edge word, given in any color order."""
        word = list(edge_ids)
        if not word:
            raise ValueError("use vertex_path for degree-0 paths")
        for a, b in zip(word, word[1:]):
            if self._edge[a].source != self._edge[b].range:
                raise NotComposable(f"s({a}) != r({b})")
        return self._make(self._normalize(word))

    def _make(self, word: Sequence[str]) -> Path:
        deg = [0] * self.rank
        for e in word:
            deg[self._edge[e].color - 1] += 1
        return Path(
            tuple(word), tuple(deg), self._edge[word[0]].range, self._edge[word[-1]].source
        )

    # rewriting
    def _swap(self, x: str, y: str) -> tuple[str, str]:
        if self._edge[x].color > self._edge[y].color:
            return self.squares[(x, y)]
        return self._inverse[(x, y)]

    def _rewrite(self, word: Sequence[str], target: Sequence[int]) -> list[str]:
        """Bubble ``word`` into the color sequence ``target`` via squares."""
        w = list(word)
        for p, c in enumerate(target):
            q = p
            while self._edge[w[q]].color != c:
                q += 1
            for t in range(q - 1, p - 1, -1):
                w[t], w[t + 1] = self._swap(w[t], w[t + 1])
        return w

    def _normalize(self, word: Sequence[str]) -> list[str]:
        return self._rewrite(word, sorted(self._edge[e].color for e in word))

    # category operations
    def compose(self, left: Path, right: Path) -> Path:
        if left.source != right.range:
            raise NotComposable(f"s({left}) = {left.source} != r({right}) = {right.range}")
        if right.is_vertex:
            return left
        if left.is_vertex:
            return right
        key = ("c", left.edges, right.edges)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._make(self._normalize(left.edges + right.edges))
            self._cache[key] = hit
        return hit

    def factorize(self, path: Path, m: Sequence[int]) -> tuple[Path, Path]:
        m = tuple(m)
        if len(m) != self.rank or not deg_leq(m, path.degree) or min(m) < 0:
            raise DegreeOutOfRange(f"{m} is not <= d({path}) = {path.degree}")
        if not any(m):
            return self.vertex_path(path.range), path
        if m == path.degree:
            return path, self.vertex_path(path.source)
        key = ("f", path.edges, m)
        hit = self._cache.get(key)
        if hit is None:
            rest = deg_sub(path.degree, m)
            target = [c for c in range(1, self.rank + 1) for _ in range(m[c - 1])]
            cut = len(target)
            target += [c for c in range(1, self.rank + 1) for _ in range(rest[c - 1])]
            w = self._rewrite(path.edges, target)
            hit = (self._make(w[:cut]), self._make(w[cut:]))
            self._cache[key] = hit
        return hit

    def enumerate_paths(self, n: Sequence[int], v: str | None = None) -> list[Path]:
        """All paths of degree ``n`` (with range ``v`` if given), canonically ordered."""
        n = tuple(n)
        if len(n) != self.rank:
            raise ValueError(f"degree {n} has wrong length for a {self.rank}-graph")
        key = ("e", n, v)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        starts = self.vertices if v is None else (v,)
        if not any(n):
            out = [self.vertex_path(u) for u in starts]
        else:
            colors = [c for c in range(1, self.rank + 1) for _ in range(n[c - 1])]
            words: list[list[str]] = []
            for u in starts:
                self._extend(u, colors, [], words)
            out = [self._make(w) for w in words]
        self._cache[key] = out
        return out

    def _extend(self, at: str, colors: list[int], prefix: list[str], out: list) -> None:
        if len(prefix) == len(colors):
            out.append(list(prefix))
            return
        for e in self.edges_into(at, colors[len(prefix)]):
            prefix.append(e)
            self._extend(self._edge[e].source, colors, prefix, out)
            prefix.pop()

    def extensions(self, path: Path, n: Sequence[int]) -> list[Path]:
        """All ``path.zeta`` with ``d(zeta) = n``."""
        return [self.compose(path, z) for z in self.enumerate_paths(n, path.source)]

    def lambda_min(self, lam: Path, eta: Path) -> list[tuple[Path, Path]]:
        """Minimal common extensions: pairs (alpha, beta) with lam.alpha = eta.beta
        of degree d(lam) v d(eta).

        Brute force over extensions of whichever side needs fewer of them.
        """
        top = deg_join(lam.degree, eta.degree)
        if lam == eta:
            return [(self.vertex_path(lam.source), self.vertex_path(eta.source))]
        if self._count(deg_sub(top, lam.degree), lam.source) <= self._count(
            deg_sub(top, eta.degree), eta.source
        ):
            out = []
            for alpha in self.enumerate_paths(deg_sub(top, lam.degree), lam.source):
                head, beta = self.factorize(self.compose(lam, alpha), eta.degree)
                if head == eta:
                    out.append((alpha, beta))
            return out
        out = []
        for beta in self.enumerate_paths(deg_sub(top, eta.degree), eta.source):
            head, alpha = self.factorize(self.compose(eta, beta), lam.degree)
            if head == lam:
                out.append((alpha, beta))
        return out

    def _count(self, n: Degree, v: str) -> int:
        if not any(n):
            return 1
        key = ("n", n, v)
        if key not in self._cache:
            self._cache[key] = len(self.enumerate_paths(n, v))
        return self._cache[key]


# --- validation ----------------------------------------------------------------

def _square_sets(skeleton: Skeleton, i: int, j: int):
    """Composable pairs for colors i < j: (f of color j, g of color i) and the
    sorted pairs (g' of color i, f' of color j)."""
    by_color: dict[int, list[Edge]] = {}
    for e in skeleton.edges:
        by_color.setdefault(e.color, []).append(e)
    unsorted = {
        (f.id, g.id)
        for f in by_color.get(j, [])
        for g in by_color.get(i, [])
        if f.source == g.range
    }
    sorted_ = {
        (g.id, f.id)
        for g in by_color.get(i, [])
        for f in by_color.get(j, [])
        if g.source == f.range
    }
    return unsorted, sorted_


def validate_kgraph(
    skeleton: Skeleton,
    squares: Iterable[tuple[tuple[str, str], tuple[str, str]]],
    name: str = "kgraph",
) -> KGraph:
    """Check a skeleton-plus-squares presentation and return the k-graph.

    Each square is a pair of two-edge words with the same two colors in
    opposite orders; either side may be the out-of-order one.

    Raises NonBijectiveSquare, CubeInconsistent or SourceViolation.
    """
    k = skeleton.rank
    if k < 1:
        raise SourceViolation("graph has no edges")
    edge = {e.id: e for e in skeleton.edges}

    table: dict[tuple[str, str], tuple[str, str]] = {}
    for lhs, rhs in squares:
        for word in (lhs, rhs):
            for e in word:
                if e not in edge:
                    raise NonBijectiveSquare(f"square {lhs} -> {rhs} uses unknown edge {e!r}")
        cl = (edge[lhs[0]].color, edge[lhs[1]].color)
        cr = (edge[rhs[0]].color, edge[rhs[1]].color)
        if cl[0] == cl[1] or cr != cl[::-1]:
            raise NonBijectiveSquare(
                f"square {lhs} -> {rhs} does not swap two distinct colors"
            )
        if cl[0] < cl[1]:
            lhs, rhs = rhs, lhs
        (f, g), (g2, f2) = lhs, rhs
        if edge[f].source != edge[g].range or edge[g2].source != edge[f2].range:
            raise NonBijectiveSquare(f"square {lhs} -> {rhs} has a non-composable side")
        if edge[f].range != edge[g2].range or edge[g].source != edge[f2].source:
            raise NonBijectiveSquare(f"square {lhs} -> {rhs} does not match endpoints")
        if (f, g) in table and table[(f, g)] != (g2, f2):
            raise NonBijectiveSquare(f"pair {(f, g)} is assigned two factorizations")
        table[(f, g)] = (g2, f2)

    for i, j in itertools.combinations(range(1, k + 1), 2):
        unsorted, sorted_ = _square_sets(skeleton, i, j)
        for pair in sorted(unsorted):
            if pair not in table:
                raise NonBijectiveSquare(f"pair {pair} (colors {j},{i}) has no square")
        images: dict[tuple[str, str], tuple[str, str]] = {}
        for pair in sorted(unsorted):
            img = table[pair]
            if img in images:
                raise NonBijectiveSquare(
                    f"pairs {images[img]} and {pair} both map to {img}"
                )
            images[img] = pair
        for img in sorted(sorted_):
            if img not in images:
                raise NonBijectiveSquare(f"pair {img} (colors {i},{j}) is not hit by any square")

    for v in skeleton.vertices:
        for c in range(1, k + 1):
            if not any(e.range == v and e.color == c for e in skeleton.edges):
                raise SourceViolation(f"vertex {v!r} receives no edge of color {c}")

    g = KGraph(k, skeleton, table, name)
    if k >= 3:
        _check_cubes(g)
    return g


def _check_cubes(g: KGraph) -> None:
    """Both braid orders of sorting every reversed three-color word must agree."""
    for a, b, c in itertools.combinations(range(1, g.rank + 1), 3):
        # colors c > b > a, word x y z with x of color c
        for x in (e for e in g.edges if e.color == c):
            for y in g.edges_into(x.source, b):
                for z in g.edges_into(g.edge(y).source, a):
                    w1 = [x.id, y, z]
                    w1[0], w1[1] = g._swap(w1[0], w1[1])
                    w1[1], w1[2] = g._swap(w1[1], w1[2])
                    w1[0], w1[1] = g._swap(w1[0], w1[1])
                    w2 = [x.id, y, z]
                    w2[1], w2[2] = g._swap(w2[1], w2[2])
                    w2[0], w2[1] = g._swap(w2[0], w2[1])
                    w2[1], w2[2] = g._swap(w2[1], w2[2])
                    if w1 != w2:
                        raise CubeInconsistent(
                            f"triple {(x.id, y, z)} sorts to {w1} and to {w2}"
                        )
