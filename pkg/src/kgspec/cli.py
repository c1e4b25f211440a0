"""``kgspec`` command-line interface.

Exit codes: 0 all checks pass, 1 validation failure, 2 verification failure,
3 I/O, parse or usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .dirac import (
    AlphaSequence,
    commutator_sweep,
    dirac_truncation,
    resolvent_decay,
    spectrum,
    verify_dirac,
    verify_eigenspace_wavelet_identity,
)
from .graphfile import ParseError, bundled_path, load
from .kgraph import KGraph, KGraphError, Path as KPath
from .measure import (
    cylinder_measure,
    is_strongly_connected,
    perron_frobenius,
    vertex_matrices,
)
from .repspace import ck_verify, level_basis, s_operator
from .wavelets import gram, mother_wavelets, verify_decomposition, wavelet_space

EXIT_OK, EXIT_INVALID, EXIT_VERIFY, EXIT_IO = 0, 1, 2, 3
COMMANDS = ("validate", "info", "wavelets", "dirac", "commutators", "decompose")
DEFAULT_LEVEL = {"info": 3, "wavelets": 3, "decompose": 3, "dirac": 3, "commutators": 4}


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    graph_path: Path
    command: str
    level: int
    alpha: AlphaSequence
    J: tuple[int, ...] | None
    tol: float | None
    fmt: str
    out: Path | None
    pairs: list[tuple[str, str]]
    export: Path | None


def _int_list(raw: str) -> tuple[int, ...]:
    return tuple(int(x) for x in raw.split(",") if x.strip())


def _float_list(raw: str) -> tuple[float, ...]:
    return tuple(float(x) for x in raw.split(",") if x.strip())


def _resolve_graph(raw: str) -> Path:
    path = Path(raw)
    if path.exists():
        return path
    bundled = bundled_path(path.name)
    if bundled.exists():
        return bundled
    raise FileNotFoundError(f"graph file {raw!r} not found (and not a bundled fixture)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgspec",
        description="Truncated spectral triples for finite strongly connected k-graphs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("graph", help="graph file (.kg) or the name of a bundled fixture")
    parser.add_argument("--level", "-T", type=int, default=None, help="truncation level T")
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--alpha", default="1,1", help="affine alpha_q = a*q + b, given as a,b")
    group.add_argument("--alpha-list", default=None, help="explicit alpha_0,alpha_1,...")
    parser.add_argument("--J", default=None, help="rectangular shape j1,...,jk")
    parser.add_argument("--tol", type=float, default=None, help="override verification tolerance")
    parser.add_argument("--format", dest="fmt", choices=("text", "json", "csv"), default="text")
    parser.add_argument("--out", default=None, help="write the report here instead of stdout")
    parser.add_argument(
        "--pair", action="append", default=[], metavar="LAM:MU",
        help="commutator generator; paths are comma-separated edge ids or a vertex id",
    )
    parser.add_argument("--export", default=None, metavar="DIR",
                        help="write operator/wavelet coordinate lists into DIR")
    return parser


def parse_config(argv: list[str]) -> RunConfig:
    parser = _build_parser()

    def fail(message: str):
        raise UsageError(message)

    parser.error = fail  # argparse would exit with 2, which means verification failure here
    args = parser.parse_args(argv)
    if args.alpha_list:
        alpha = AlphaSequence.explicit(_float_list(args.alpha_list))
    else:
        a, b = _float_list(args.alpha)
        alpha = AlphaSequence(a, b)
    J = _int_list(args.J) if args.J else None
    if J is not None and min(J) <= 0:
        raise UsageError("--J entries must be positive")
    level = args.level if args.level is not None else DEFAULT_LEVEL.get(args.command, 2)
    if args.command in ("dirac", "commutators", "decompose", "wavelets") and level < 1:
        raise UsageError("--level must be >= 1 for spectral commands")
    pairs = []
    for raw in args.pair:
        if ":" not in raw:
            raise UsageError(f"--pair {raw!r} must look like LAM:MU")
        lam, mu = raw.split(":", 1)
        pairs.append((lam, mu))
    return RunConfig(
        graph_path=_resolve_graph(args.graph),
        command=args.command,
        level=level,
        alpha=alpha,
        J=J,
        tol=args.tol,
        fmt=args.fmt,
        out=Path(args.out) if args.out else None,
        pairs=pairs,
        export=Path(args.export) if args.export else None,
    )


def path_from_spec(g: KGraph, spec: str) -> KPath:
    """A vertex id, or edge ids separated by commas (any composable order)."""
    spec = spec.strip()
    if spec in g.vertices:
        return g.vertex_path(spec)
    edges = [e.strip() for e in spec.split(",") if e.strip()]
    known = {e.id for e in g.edges}
    missing = [e for e in edges if e not in known]
    if missing or not edges:
        raise UsageError(f"path spec {spec!r}: unknown vertex or edge {missing or spec!r}")
    return g.path(edges)


def _tol(cfg: RunConfig, default: float) -> float:
    return cfg.tol if cfg.tol is not None else default


def _write_coo(path: Path, rows: list[tuple]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for r in rows:
            fh.write("\t".join(str(x) for x in r) + "\n")


def _coo_rows(matrix) -> list[tuple[int, int, float]]:
    m = matrix.tocoo()
    order = np.lexsort((m.col, m.row))
    return [(int(m.row[i]), int(m.col[i]), float(m.data[i])) for i in order]


# --- commands -------------------------------------------------------------------------

def cmd_validate(cfg: RunConfig) -> tuple[dict, int]:
    try:
        g = load(cfg.graph_path)
    except KGraphError as exc:
        return {"valid": False, "error": type(exc).__name__, "message": str(exc)}, EXIT_INVALID
    counts = {str(c): sum(e.color == c for e in g.edges) for c in range(1, g.rank + 1)}
    return {
        "valid": True,
        "rank": g.rank,
        "vertices": len(g.vertices),
        "edges_per_color": counts,
        "strongly_connected": is_strongly_connected(g),
    }, EXIT_OK


def cmd_info(cfg: RunConfig) -> tuple[dict, int]:
    g = load(cfg.graph_path)
    pf = perron_frobenius(g)
    mats = vertex_matrices(g)
    commute = all(
        np.array_equal(a @ b, b @ a) for i, a in enumerate(mats) for b in mats[i + 1:]
    )
    ck = ck_verify(g, pf, 2, _tol(cfg, 1e-10))
    payload = {
        "rank": g.rank,
        "vertices": list(g.vertices),
        "edges_per_color": {str(c): sum(e.color == c for e in g.edges) for c in range(1, g.rank + 1)},
        "vertex_matrices": [a.tolist() for a in mats],
        "matrices_commute": commute,
        "rho": list(pf.rho),
        "kappa": dict(zip(g.vertices, pf.kappa.tolist())),
        "vertex_measure": {v: cylinder_measure(pf, g.vertex_path(v)) for v in g.vertices},
        "dim_R": {str(s): level_basis(g, pf, s, cfg.J).dim for s in range(cfg.level + 1)},
        "cuntz_krieger": ck.to_dict(),
    }
    if cfg.export:
        for e in g.edges:
            lam = g.path([e.id])
            op = s_operator(g, pf, lam, cfg.level, cfg.J)
            _write_coo(cfg.export / f"S_{e.id}_level{cfg.level}.coo", _coo_rows(op.matrix))
    ok = commute and ck.passed
    return payload, EXIT_OK if ok else EXIT_VERIFY


def cmd_wavelets(cfg: RunConfig) -> tuple[dict, int]:
    g = load(cfg.graph_path)
    pf = perron_frobenius(g)
    mothers = {}
    for v in g.vertices:
        fam = mother_wavelets(g, pf, v, cfg.J)
        mothers[v] = {"count": len(fam), "gram": gram([f.vector for f in fam]).real.tolist()}
    scales = []
    for n in range(cfg.level):
        ws = wavelet_space(g, pf, n, cfg.J)
        rank = int(np.linalg.matrix_rank(ws.matrix() * np.sqrt(ws.basis.measures)[:, None])) if ws.vectors else 0
        scales.append({"n": n, "vectors": len(ws.vectors), "rank": rank, "expected_dim": ws.expected_dim})
        if cfg.export:
            rows = []
            for (lam, i), vec in zip(ws.labels, ws.vectors):
                for r in np.flatnonzero(vec.coefficients):
                    rows.append((f"{lam}/{i}", int(r), float(vec.coefficients[r])))
            _write_coo(cfg.export / f"W{n}.coo", rows)
    ok = all(s["rank"] == s["expected_dim"] == s["vectors"] for s in scales)
    return {"mother_wavelets": mothers, "scales": scales}, EXIT_OK if ok else EXIT_VERIFY


def cmd_decompose(cfg: RunConfig) -> tuple[dict, int]:
    g = load(cfg.graph_path)
    pf = perron_frobenius(g)
    kwargs = {} if cfg.tol is None else {"ortho_tol": cfg.tol, "span_tol": cfg.tol}
    rep = verify_decomposition(g, pf, cfg.level, cfg.J, **kwargs)
    return {"decomposition": rep.to_dict()}, EXIT_OK if rep.passed else EXIT_VERIFY


def cmd_dirac(cfg: RunConfig) -> tuple[dict, int]:
    g = load(cfg.graph_path)
    pf = perron_frobenius(g)
    dt = dirac_truncation(g, pf, cfg.alpha, cfg.level, cfg.J)
    structure = verify_dirac(dt)
    identities = [
        verify_eigenspace_wavelet_identity(g, pf, dt, q, _tol(cfg, 1e-8))
        for q in range(cfg.level)
    ]
    resolvent = resolvent_decay(dt, 1j)
    spec = spectrum(dt)
    payload = {
        "spectrum": [{"eigenvalue": lam, "multiplicity": m} for lam, m in spec],
        "multiplicities": [m for _, m in spec],
        "structure": structure.to_dict(),
        "identities": [r.to_dict() for r in identities],
        "resolvent": resolvent.to_dict(),
        "notes": ["constants are assigned eigenvalue 0; R_0 minus constants carries alpha_0"],
    }
    if cfg.export:
        m = dt.matrix
        rows = [(int(i), int(j), float(m[i, j])) for i, j in zip(*np.nonzero(np.abs(m) > 1e-15))]
        _write_coo(cfg.export / f"dirac_T{cfg.level}.coo", rows)
    ok = structure.passed and resolvent.passed and all(r.passed for r in identities)
    return payload, EXIT_OK if ok else EXIT_VERIFY


def default_pairs(g: KGraph, T: int) -> list[tuple[KPath, KPath]]:
    """(v,v), (e,s(e)), (s(e),e) and (e,f) with s(e)=s(f), whenever they fit in T."""
    out = [(g.vertex_path(v), g.vertex_path(v)) for v in g.vertices]
    for e in g.edges:
        lam, v = g.path([e.id]), g.vertex_path(e.source)
        out += [(lam, v), (v, lam)]
    for e in g.edges:
        for f in g.edges:
            if e.id != f.id and e.source == f.source:
                out.append((g.path([e.id]), g.path([f.id])))
    return [(a, b) for a, b in out if a.max_degree + b.max_degree + 2 <= T]


def cmd_commutators(cfg: RunConfig) -> tuple[dict, int]:
    g = load(cfg.graph_path)
    pf = perron_frobenius(g)
    if cfg.pairs:
        pairs = [(path_from_spec(g, a), path_from_spec(g, b)) for a, b in cfg.pairs]
    else:
        pairs = default_pairs(g, cfg.level)
    dt = dirac_truncation(g, pf, cfg.alpha, cfg.level)
    dt_next = dirac_truncation(g, pf, cfg.alpha, cfg.level + 1) if _explicit_ok(cfg) else None
    results = []
    ok = True
    for lam, mu in pairs:
        rep = commutator_sweep(g, pf, cfg.alpha, lam, mu, cfg.level, dt)
        if dt_next is not None:
            nxt = commutator_sweep(g, pf, cfg.alpha, lam, mu, cfg.level + 1, dt_next)
            drift = max(
                (abs(a["norm"] - b["norm"]) for a, b in zip(rep.tables["per_q"], nxt.tables["per_q"])),
                default=0.0,
            )
            rep.check("drift between T and T+1", drift, _tol(cfg, 1e-10))
        ok = ok and rep.passed
        results.append(rep.to_dict())
    return {"pairs": results}, EXIT_OK if ok else EXIT_VERIFY


def _explicit_ok(cfg: RunConfig) -> bool:
    try:
        cfg.alpha(cfg.level + 1)
    except ValueError:
        return False
    return True


HANDLERS = {
    "validate": cmd_validate,
    "info": cmd_info,
    "wavelets": cmd_wavelets,
    "dirac": cmd_dirac,
    "commutators": cmd_commutators,
    "decompose": cmd_decompose,
}


# --- rendering ------------------------------------------------------------------------

def _to_builtin(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _to_builtin(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_builtin(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def _render_text(doc: dict) -> str:
    lines = [f"kgspec {doc['command']} {doc['graph']}  ->  {'PASS' if doc['passed'] else 'FAIL'}"]

    def walk(obj, indent):
        pad = "  " * indent
        if isinstance(obj, dict):
            if "checks" in obj and "name" in obj:
                lines.append(f"{pad}[{obj['name']}] {'pass' if obj['passed'] else 'FAIL'}")
                for c in obj["checks"]:
                    mark = "ok " if c["passed"] else "BAD"
                    lines.append(f"{pad}  {mark} {c['name']}: {c['value']:.3e} (tol {c['tol']:.1e})")
                for note in obj.get("notes", []):
                    lines.append(f"{pad}  note: {note}")
                for key, val in obj.get("tables", {}).items():
                    if isinstance(val, list) and val and isinstance(val[0], dict):
                        lines.append(f"{pad}  {key}:")
                        for row in val:
                            lines.append(f"{pad}    " + ", ".join(f"{k}={_fmt(v)}" for k, v in row.items()))
                    else:
                        lines.append(f"{pad}  {key}: {_fmt(val)}")
                return
            for key, val in obj.items():
                if isinstance(val, (dict, list)) and not _is_flat(val):
                    lines.append(f"{pad}{key}:")
                    walk(val, indent + 1)
                else:
                    lines.append(f"{pad}{key}: {_fmt(val)}")
        elif isinstance(obj, list):
            for item in obj:
                if isinstance(item, dict) and not any(isinstance(v, (dict, list)) for v in item.values()):
                    lines.append(f"{pad}- " + ", ".join(f"{k}={_fmt(v)}" for k, v in item.items()))
                    continue
                walk(item, indent)
                if not isinstance(item, dict):
                    lines.append(f"{pad}{_fmt(item)}")

    walk(doc["result"], 1)
    return "\n".join(lines) + "\n"


def _is_flat(val) -> bool:
    if isinstance(val, dict):
        return all(not isinstance(v, (dict, list)) or _is_flat(v) for v in val.values()) and len(val) <= 8
    return all(not isinstance(v, dict) for v in val)


def _fmt(val) -> str:
    if isinstance(val, float):
        return f"{val:.6g}"
    return json.dumps(val) if isinstance(val, (list, dict)) else str(val)


def _render_csv(doc: dict) -> str:
    """Flatten every check in the document into rows."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["report", "check", "value", "tol", "passed"])

    def walk(obj, prefix):
        if isinstance(obj, dict):
            if "checks" in obj and "name" in obj:
                label = obj["name"] + "".join(
                    f"[{k}={v}]" for k, v in sorted(obj.get("params", {}).items())
                    if k not in ("graph", "alpha")
                )
                for c in obj["checks"]:
                    writer.writerow([label, c["name"], repr(c["value"]), c["tol"], c["passed"]])
                return
            for key, val in obj.items():
                walk(val, f"{prefix}{key}.")
        elif isinstance(obj, list):
            for item in obj:
                walk(item, prefix)

    walk(doc["result"], "")
    if doc["command"] in ("validate", "info", "wavelets"):
        for key, val in doc["result"].items():
            if not isinstance(val, (dict, list)):
                writer.writerow(["summary", key, val, "", ""])
        if doc["command"] == "wavelets":
            for s in doc["result"]["scales"]:
                writer.writerow(["wavelets", f"W{s['n']}", s["rank"], s["expected_dim"],
                                 s["rank"] == s["expected_dim"]])
    return buf.getvalue()


def render(doc: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        return _render_csv(doc)
    return _render_text(doc)


def run(cfg: RunConfig) -> tuple[dict, int]:
    result, status = HANDLERS[cfg.command](cfg)
    doc = {
        "schema": 1,
        "command": cfg.command,
        "graph": cfg.graph_path.stem,
        "params": {
            "level": cfg.level,
            "alpha": cfg.alpha.describe(),
            "J": list(cfg.J) if cfg.J else None,
            "tol": cfg.tol,
        },
        "passed": status == EXIT_OK,
        "result": _to_builtin(result),
    }
    return doc, status


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
        doc, status = run(cfg)
    except (UsageError, ParseError, OSError) as exc:
        print(f"kgspec: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except KGraphError as exc:
        print(f"kgspec: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"kgspec: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_IO
    text = render(doc, cfg.fmt)
    if cfg.out:
        cfg.out.parent.mkdir(parents=True, exist_ok=True)
        cfg.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
