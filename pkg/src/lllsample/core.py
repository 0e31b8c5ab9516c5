"""CSP formulas with atomic constraints.

A formula is a set of variables ``0..n-1`` with integer domains ``0..q_v-1``
and a list of atomic constraints.  Each atomic constraint is violated by
exactly one tuple of values on its scope (the *forbidden* tuple).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DomainTooSmall,
    DuplicateViolatingTuple,
    IncompleteAssignment,
    MalformedConstraint,
)


@dataclass(frozen=True)
class AtomicConstraint:
    scope: tuple[int, ...]
    forbidden: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "scope", tuple(int(v) for v in self.scope))
        object.__setattr__(self, "forbidden", tuple(int(a) for a in self.forbidden))
        if len(self.scope) != len(self.forbidden):
            raise MalformedConstraint(
                f"scope has {len(self.scope)} variables but forbidden tuple has "
                f"{len(self.forbidden)} entries"
            )
        if len(set(self.scope)) != len(self.scope):
            raise MalformedConstraint(f"repeated variable in scope {self.scope}")

    @property
    def width(self) -> int:
        return len(self.scope)

    def is_satisfied(self, assignment) -> bool:
        return any(assignment[v] != a for v, a in zip(self.scope, self.forbidden))


@dataclass(frozen=True)
class FlatFormula:
    """CSR arrays consumed by the compiled sampling kernels."""

    q: np.ndarray  # (n,) domain sizes
    cons_ptr: np.ndarray  # (m+1,)
    cons_var: np.ndarray  # (sum widths,)
    cons_forb: np.ndarray  # (sum widths,)
    var_ptr: np.ndarray  # (n+1,)
    var_cons: np.ndarray  # incidence C(v), constraint indices ascending
    adj_ptr: np.ndarray  # (m+1,)
    adj: np.ndarray  # dependency-graph neighbours


@dataclass(frozen=True)
class CspFormula:
    """Immutable formula ``(V, Q, C)``.

    Use :func:`build_formula` for user input; the bare constructor only
    requires domains of size at least one so that projected ("round-down")
    formulas over small alphabets can be represented too.
    """

    num_vars: int
    domain_sizes: tuple[int, ...]
    constraints: tuple[AtomicConstraint, ...]
    labels: tuple[tuple[str, ...], ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "domain_sizes", tuple(int(q) for q in self.domain_sizes))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if len(self.domain_sizes) != self.num_vars:
            raise MalformedConstraint(
                f"expected {self.num_vars} domain sizes, got {len(self.domain_sizes)}"
            )
        for v, q in enumerate(self.domain_sizes):
            if q < 1:
                raise DomainTooSmall(f"variable {v} has empty domain")
        for j, c in enumerate(self.constraints):
            for v, a in zip(c.scope, c.forbidden):
                if not 0 <= v < self.num_vars:
                    raise MalformedConstraint(f"constraint {j}: variable {v} out of range")
                if not 0 <= a < self.domain_sizes[v]:
                    raise MalformedConstraint(
                        f"constraint {j}: value {a} outside domain of variable {v} "
                        f"(size {self.domain_sizes[v]})"
                    )

    @property
    def n(self) -> int:
        return self.num_vars

    @property
    def m(self) -> int:
        return len(self.constraints)

    @cached_property
    def incidence(self) -> tuple[tuple[int, ...], ...]:
        """``C(v)``: indices of constraints whose scope contains ``v``."""
        inc: list[list[int]] = [[] for _ in range(self.num_vars)]
        for j, c in enumerate(self.constraints):
            for v in c.scope:
                inc[v].append(j)
        return tuple(tuple(lst) for lst in inc)

    @cached_property
    def flat(self) -> FlatFormula:
        widths = [c.width for c in self.constraints]
        cons_ptr = np.zeros(self.m + 1, dtype=np.int64)
        cons_ptr[1:] = np.cumsum(widths, dtype=np.int64)
        cons_var = np.fromiter((v for c in self.constraints for v in c.scope),
                               dtype=np.int64, count=int(cons_ptr[-1]))
        cons_forb = np.fromiter((a for c in self.constraints for a in c.forbidden),
                                dtype=np.int64, count=int(cons_ptr[-1]))
        inc = self.incidence
        var_ptr = np.zeros(self.num_vars + 1, dtype=np.int64)
        var_ptr[1:] = np.cumsum([len(x) for x in inc], dtype=np.int64)
        var_cons = np.fromiter((j for x in inc for j in x), dtype=np.int64,
                               count=int(var_ptr[-1]))
        graph = build_dependency_graph(self)
        adj_ptr = np.zeros(self.m + 1, dtype=np.int64)
        adj_ptr[1:] = np.cumsum([len(a) for a in graph.adjacency], dtype=np.int64)
        adj = np.fromiter((j for a in graph.adjacency for j in a), dtype=np.int64,
                          count=int(adj_ptr[-1]))
        return FlatFormula(
            q=np.asarray(self.domain_sizes, dtype=np.int64),
            cons_ptr=cons_ptr, cons_var=cons_var, cons_forb=cons_forb,
            var_ptr=var_ptr, var_cons=var_cons, adj_ptr=adj_ptr, adj=adj,
        )


@dataclass(frozen=True)
class FormulaStats:
    n: int
    m: int
    D: int
    k: int
    q: int
    p: Fraction
    log2_inv_p: float
    d: int  # max number of constraints containing one variable
    k_min: int = 0
    q_min: int = 0

    @property
    def homogeneous(self) -> bool:
        return self.q == self.q_min

    def as_dict(self) -> dict:
        return {
            "n": self.n, "m": self.m, "D": self.D, "k": self.k, "q": self.q,
            "d": self.d, "log2_inv_p": self.log2_inv_p,
        }


@dataclass(frozen=True)
class DependencyGraph:
    adjacency: tuple[tuple[int, ...], ...]
    incidence: tuple[tuple[int, ...], ...]

    @property
    def max_degree(self) -> int:
        return max((len(a) for a in self.adjacency), default=0)


def build_formula(domain_sizes: Sequence[int],
                  constraints: Iterable[AtomicConstraint | tuple],
                  labels=None) -> CspFormula:
    """Validate and build a formula.

    ``constraints`` may hold :class:`AtomicConstraint` objects or
    ``(scope, forbidden)`` pairs.
    """
    domain_sizes = tuple(int(q) for q in domain_sizes)
    for v, q in enumerate(domain_sizes):
        if q < 2:
            raise DomainTooSmall(f"variable {v} has domain size {q} < 2")
    cons = []
    for c in constraints:
        if not isinstance(c, AtomicConstraint):
            scope, forbidden = c
            c = AtomicConstraint(tuple(scope), tuple(forbidden))
        cons.append(c)
    return CspFormula(len(domain_sizes), domain_sizes, tuple(cons), labels)


def build_dependency_graph(formula: CspFormula) -> DependencyGraph:
    inc = formula.incidence
    adjacency = []
    for j, c in enumerate(formula.constraints):
        nbrs: set[int] = set()
        for v in c.scope:
            nbrs.update(inc[v])
        nbrs.discard(j)
        adjacency.append(tuple(sorted(nbrs)))
    return DependencyGraph(tuple(adjacency), inc)


def max_dependency_degree(formula: CspFormula) -> int:
    """Largest dependency-graph degree, computed once per distinct scope.

    Constraints sharing a scope share their neighbourhood, so colorings with
    many colors need only one neighbourhood per hyperedge.
    """
    inc = [np.asarray(x, dtype=np.int64) for x in formula.incidence]
    best = 0
    for scope in {tuple(sorted(c.scope)) for c in formula.constraints if c.scope}:
        nbrs = np.unique(np.concatenate([inc[v] for v in scope]))
        best = max(best, nbrs.size - 1)
    return best


def compute_stats(formula: CspFormula) -> FormulaStats:
    q = formula.domain_sizes
    if formula.constraints:
        log2_inv_p = min(sum(math.log2(q[v]) for v in c.scope) for c in formula.constraints)
        p = max(Fraction(1, math.prod(q[v] for v in c.scope)) for c in formula.constraints)
    else:
        # no bad events at all
        log2_inv_p = math.inf
        p = Fraction(0)
    return FormulaStats(
        n=formula.num_vars,
        m=formula.m,
        D=max_dependency_degree(formula),
        k=max((c.width for c in formula.constraints), default=0),
        q=max(q, default=0),
        p=p,
        log2_inv_p=log2_inv_p,
        d=max((len(x) for x in formula.incidence), default=0),
        k_min=min((c.width for c in formula.constraints), default=0),
        q_min=min(q, default=0),
    )


def atomize_general_constraint(scope: Sequence[int],
                               violating_set: Iterable[Sequence[int]]) -> list[AtomicConstraint]:
    """Split a general constraint into one atomic constraint per violating tuple."""
    scope = tuple(scope)
    seen = set()
    out = []
    for t in violating_set:
        t = tuple(int(a) for a in t)
        if len(t) != len(scope):
            raise MalformedConstraint(f"tuple {t} does not match scope {scope}")
        if t in seen:
            raise DuplicateViolatingTuple(f"violating tuple {t} listed twice")
        seen.add(t)
        out.append(AtomicConstraint(scope, t))
    return out


def evaluate(formula: CspFormula, assignment) -> bool:
    if len(assignment) != formula.num_vars or any(a is None for a in assignment):
        raise IncompleteAssignment(
            f"need a value for each of the {formula.num_vars} variables"
        )
    return all(c.is_satisfied(assignment) for c in formula.constraints)


def hypergraph_coloring_formula(num_vertices: int, edges: Sequence[Sequence[int]],
                                q: int) -> CspFormula:
    """Proper ``q``-colorings: edge ``e`` and color ``i`` forbid ``e`` being all ``i``."""
    cons = []
    for e in edges:
        e = tuple(e)
        for color in range(q):
            cons.append(AtomicConstraint(e, (color,) * len(e)))
    return build_formula([q] * num_vertices, cons)
