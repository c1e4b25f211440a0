"""Reader for the ``.kg`` text format.

::

    [vertices]
    v
    [edges]
    # id color source range
    b1 1 v v
    [squares]
    # f g -> g' f'
    r1 b1 -> b1 r1

Rank is the largest color used.  ``#`` starts a comment.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .kgraph import Edge, KGraph, Skeleton, validate_kgraph

SECTIONS = ("vertices", "edges", "squares")


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


def parse_presentation(text: str):
    """Parse text into a skeleton and a list of squares (not yet validated)."""
    section = None
    vertices: list[str] = []
    edges: list[Edge] = []
    squares: list[tuple[tuple[str, str], tuple[str, str]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        col = raw.index(line[0]) + 1
        if line.startswith("["):
            name = line.strip("[]").strip().lower()
            if not line.endswith("]") or name not in SECTIONS:
                raise ParseError(f"unknown section header {line!r}", lineno, col)
            section = name
            continue
        tokens = line.split()
        if section is None:
            raise ParseError("content before any section header", lineno, col)
        if section == "vertices":
            if len(tokens) != 1:
                raise ParseError("expected one vertex id per line", lineno, col)
            vertices.append(tokens[0])
        elif section == "edges":
            if len(tokens) != 4:
                raise ParseError("expected 'id color source range'", lineno, col)
            try:
                color = int(tokens[1])
            except ValueError:
                raise ParseError(
                    f"color {tokens[1]!r} is not an integer", lineno, raw.index(tokens[1]) + 1
                ) from None
            edges.append(Edge(tokens[0], color, tokens[2], tokens[3]))
        else:
            if len(tokens) != 5 or tokens[2] != "->":
                raise ParseError("expected 'f g -> g2 f2'", lineno, col)
            squares.append(((tokens[0], tokens[1]), (tokens[3], tokens[4])))
    if not vertices:
        raise ParseError("no vertices declared", 1)
    try:
        skeleton = Skeleton(tuple(vertices), tuple(edges))
    except ValueError as exc:
        raise ParseError(str(exc), 1) from None
    return skeleton, squares


def loads(text: str, name: str = "kgraph") -> KGraph:
    skeleton, squares = parse_presentation(text)
    return validate_kgraph(skeleton, squares, name=name)


def load(path: str | Path) -> KGraph:
    path = Path(path)
    return loads(path.read_text(encoding="utf-8"), name=path.stem)


def bundled_path(name: str) -> Path:
    """Path of a fixture shipped in ``kgspec/data`` (``name`` with or without ``.kg``)."""
    if not name.endswith(".kg"):
        name += ".kg"
    return Path(str(resources.files("kgspec").joinpath("data", name)))


def load_bundled(name: str) -> KGraph:
    return load(bundled_path(name))


BUNDLED_VALID = ("o2", "trivial11", "flip23", "twovertex", "skew2v")
