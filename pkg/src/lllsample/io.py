"""Instance formats, sample output, and scheme files.

Three instance formats are understood, all with 1-based variable ids on
the wire:

* DIMACS CNF: ``p cnf n m`` then clauses of signed literals ending in ``0``.
* Hypergraph coloring: ``p hyp n m q`` then one edge per line.
* Atomic CSP: ``p acsp n``, a ``d q_1 ... q_n`` line, then ``c v:a ...``
  constraint lines (values 0-based); comments start with ``#``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import AtomicConstraint, CspFormula, build_formula, compute_stats
from .errors import EmptyClause, ParseError, ValueOutOfDomain, VertexOutOfRange
from .projection import ProjectionScheme

log = logging.getLogger(__name__)

KINDS = ("cnf", "hypergraph-coloring", "atomic-csp")
CLASS_OF_KIND = {"cnf": "cnf", "hypergraph-coloring": "coloring", "atomic-csp": "general"}


@dataclass(frozen=True)
class InstanceDocument:
    kind: str
    formula: CspFormula
    meta: dict = field(default_factory=dict)
    edges: tuple[tuple[int, ...], ...] = ()
    clauses: tuple[tuple[int, ...], ...] = ()

    @property
    def instance_class(self) -> str:
        return CLASS_OF_KIND[self.kind]


def _content_lines(text: str, comment_prefixes: tuple[str, ...]):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or any(line == p.strip() or line.startswith(p) for p in comment_prefixes):
            continue
        yield lineno, line


def _ints(tokens: Sequence[str], lineno: int) -> list[int]:
    try:
        return [int(t) for t in tokens]
    except ValueError as exc:
        raise ParseError(f"expected integers, got {' '.join(tokens)!r}", lineno) from exc


def _header(lines, tag: str, count: int):
    try:
        lineno, line = next(lines)
    except StopIteration:
        raise ParseError(f"missing 'p {tag}' header") from None
    parts = line.split()
    if parts[:2] != ["p", tag] or len(parts) != 2 + count:
        raise ParseError(f"expected header 'p {tag}' with {count} integers, got {line!r}", lineno)
    vals = _ints(parts[2:], lineno)
    if any(v < 0 for v in vals):
        raise ParseError("header values must be nonnegative", lineno)
    return lineno, vals


# -- DIMACS CNF ---------------------------------------------------------------

def clause_to_constraint(clause: Sequence[int]) -> AtomicConstraint:
    """The unique falsifying assignment of a clause: each literal made false."""
    return AtomicConstraint(tuple(abs(l) - 1 for l in clause),
                            tuple(0 if l > 0 else 1 for l in clause))


def parse_dimacs_cnf(text: str) -> InstanceDocument:
    lines = _content_lines(text, ("c ", "c\t", "c", "%"))
    lineno, (n, m) = _header(lines, "cnf", 2)
    tokens: list[tuple[int, int]] = []
    for lineno, line in lines:
        if line.startswith("p"):
            raise ParseError("second header line", lineno)
        tokens.extend((lineno, t) for t in _ints(line.split(), lineno))
    clauses: list[tuple[int, ...]] = []
    current: list[int] = []
    clause_count = 0
    for lineno, lit in tokens:
        if lit == 0:
            clause_count += 1
            if not current:
                raise EmptyClause("empty clause", lineno)
            lits = list(dict.fromkeys(current))
            current = []
            if any(-l in lits for l in lits):
                log.warning("line %d: tautological clause %s dropped", lineno, lits)
                continue
            clauses.append(tuple(lits))
            continue
        if abs(lit) > n:
            raise ParseError(f"literal {lit} refers to a variable beyond n={n}", lineno)
        current.append(lit)
    if current:
        raise ParseError("last clause is not terminated by 0", tokens[-1][0])
    if clause_count != m:
        raise ParseError(f"header announces {m} clauses but {clause_count} were found")
    formula = build_formula([2] * n, [clause_to_constraint(c) for c in clauses])
    stats = compute_stats(formula)
    return InstanceDocument("cnf", formula, {"k": stats.k, "d": stats.d, "n": n, "m": len(clauses)},
                            clauses=tuple(clauses))


def serialize_dimacs_cnf(formula: CspFormula) -> str:
    out = [f"p cnf {formula.num_vars} {formula.m}"]
    for c in formula.constraints:
        lits = [(v + 1) if a == 0 else -(v + 1) for v, a in zip(c.scope, c.forbidden)]
        out.append(" ".join(str(l) for l in lits) + " 0")
    return "\n".join(out) + "\n"


# -- hypergraph coloring --------------------------------------------------------

def coloring_constraints(edges: Iterable[Sequence[int]], q: int) -> list[AtomicConstraint]:
    return [AtomicConstraint(tuple(e), (color,) * len(e)) for e in edges for color in range(q)]


def parse_hypergraph(text: str) -> InstanceDocument:
    lines = _content_lines(text, ("c ", "c\t", "#"))
    _, (n, m, q) = _header(lines, "hyp", 3)
    if q < 2:
        raise ParseError(f"need at least 2 colors, got {q}")
    edges: list[tuple[int, ...]] = []
    for lineno, line in lines:
        verts = _ints(line.split(), lineno)
        if not verts:
            raise ParseError("empty edge", lineno)
        for u in verts:
            if not 1 <= u <= n:
                raise VertexOutOfRange(f"vertex {u} not in 1..{n}", lineno)
        if len(set(verts)) != len(verts):
            raise ParseError(f"edge {verts} repeats a vertex", lineno)
        edges.append(tuple(u - 1 for u in verts))
    if len(edges) != m:
        raise ParseError(f"header announces {m} edges but {len(edges)} were found")
    formula = build_formula([q] * n, coloring_constraints(edges, q))
    degree = np.zeros(n, dtype=np.int64)
    for e in edges:
        degree[list(e)] += 1
    meta = {"k": max((len(e) for e in edges), default=0),
            "k_min": min((len(e) for e in edges), default=0),
            "Delta": int(degree.max(initial=0)), "q": q, "n": n, "m": m}
    return InstanceDocument("hypergraph-coloring", formula, meta, edges=tuple(edges))


def serialize_hypergraph(num_vertices: int, edges: Sequence[Sequence[int]], q: int) -> str:
    out = [f"p hyp {num_vertices} {len(edges)} {q}"]
    out.extend(" ".join(str(u + 1) for u in e) for e in edges)
    return "\n".join(out) + "\n"


# -- atomic CSP -----------------------------------------------------------------

def parse_atomic_csp(text: str) -> InstanceDocument:
    lines = _content_lines(text, ("#",))
    _, (n,) = _header(lines, "acsp", 1)
    domains = None
    cons: list[AtomicConstraint] = []
    for lineno, line in lines:
        parts = line.split()
        if parts[0] == "d":
            if domains is not None:
                raise ParseError("second domain line", lineno)
            domains = _ints(parts[1:], lineno)
            if len(domains) != n:
                raise ParseError(f"expected {n} domain sizes, got {len(domains)}", lineno)
            if any(q < 2 for q in domains):
                raise ParseError("domain sizes must be at least 2", lineno)
        elif parts[0] == "c":
            if domains is None:
                raise ParseError("constraint before the domain line", lineno)
            scope, forb = [], []
            for tok in parts[1:]:
                v, sep, a = tok.partition(":")
                if not sep:
                    raise ParseError(f"expected var:value, got {tok!r}", lineno)
                v, a = _ints([v, a], lineno)
                if not 1 <= v <= n:
                    raise ParseError(f"variable {v} not in 1..{n}", lineno)
                if not 0 <= a < domains[v - 1]:
                    raise ValueOutOfDomain(
                        f"line {lineno}: value {a} outside domain of variable {v} "
                        f"(size {domains[v - 1]})")
                scope.append(v - 1)
                forb.append(a)
            if len(set(scope)) != len(scope):
                raise ParseError("constraint repeats a variable", lineno)
            cons.append(AtomicConstraint(tuple(scope), tuple(forb)))
        else:
            raise ParseError(f"unrecognised line {line!r}", lineno)
    if domains is None:
        raise ParseError("missing 'd' line with domain sizes")
    formula = build_formula(domains, cons)
    stats = compute_stats(formula)
    return InstanceDocument("atomic-csp", formula, {"n": n, "m": len(cons), "k": stats.k, "d": stats.d})


def serialize_atomic_csp(formula: CspFormula) -> str:
    out = [f"p acsp {formula.num_vars}", "d " + " ".join(str(q) for q in formula.domain_sizes)]
    for c in formula.constraints:
        out.append("c " + " ".join(f"{v + 1}:{a}" for v, a in zip(c.scope, c.forbidden)))
    return "\n".join(out) + "\n"


# -- dispatch -------------------------------------------------------------------

def detect_kind(text: str) -> str:
    for raw in text.splitlines():
        parts = raw.split()
        if len(parts) >= 2 and parts[0] == "p":
            kind = {"cnf": "cnf", "hyp": "hypergraph-coloring", "acsp": "atomic-csp"}.get(parts[1])
            if kind:
                return kind
            raise ParseError(f"unknown format tag {parts[1]!r}")
    raise ParseError("no 'p' header line found")


def parse_instance(text: str) -> InstanceDocument:
    kind = detect_kind(text)
    return {"cnf": parse_dimacs_cnf, "hypergraph-coloring": parse_hypergraph,
            "atomic-csp": parse_atomic_csp}[kind](text)


def serialize_instance(doc: InstanceDocument) -> str:
    if doc.kind == "cnf":
        return serialize_dimacs_cnf(doc.formula)
    if doc.kind == "hypergraph-coloring":
        return serialize_hypergraph(doc.formula.num_vars, doc.edges, doc.meta["q"])
    return serialize_atomic_csp(doc.formula)


# -- samples and schemes ----------------------------------------------------------

def emit_samples(assignments, fmt: str = "lines", metadata: dict | None = None) -> str:
    rows = [[int(a) for a in row] for row in assignments]
    if fmt == "lines":
        return "".join(" ".join(str(a) for a in row) + "\n" for row in rows)
    if fmt == "json":
        return json.dumps({"samples": rows, "metadata": metadata or {}}, sort_keys=True) + "\n"
    raise ValueError(f"unknown sample format {fmt!r}; expected 'lines' or 'json'")


def parse_samples(text: str, fmt: str = "lines") -> list[list[int]]:
    if fmt == "lines":
        return [[int(t) for t in line.split()] for line in text.splitlines() if line.strip()]
    if fmt == "json":
        return json.loads(text)["samples"]
    raise ValueError(f"unknown sample format {fmt!r}")


def format_scheme(scheme: ProjectionScheme) -> str:
    return scheme.to_text() + "\n"


def parse_scheme(text: str, formula: CspFormula) -> ProjectionScheme:
    for lineno, line in _content_lines(text, ("#",)):
        parts = line.split()
        if parts[0] != "s":
            continue
        sizes = _ints(parts[1:], lineno)
        if len(sizes) != formula.num_vars:
            raise ParseError(f"scheme lists {len(sizes)} sizes for {formula.num_vars} variables",
                             lineno)
        try:
            return ProjectionScheme(formula.domain_sizes, tuple(sizes))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from exc
    raise ParseError("no 's' line in scheme file")
