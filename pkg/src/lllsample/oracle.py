"""Brute-force ground truth for small formulas.

Solutions are enumerated exhaustively; every table derived from them keeps
exact rational probabilities.  Nothing here touches the sampling kernels,
so the oracle can arbitrate their output.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.stats import chi2

from .core import CspFormula
from .errors import BudgetExceeded, EmptySupport, NoSolutions, SampleSizeZero
from .projection import ProjectionScheme

DEFAULT_BUDGET = 10 ** 7


def _value_dtype(formula: CspFormula):
    top = max(formula.domain_sizes, default=1)
    for dt in (np.int8, np.int16, np.int32):
        if top <= np.iinfo(dt).max:
            return dt
    return np.int64


def _solve(formula: CspFormula, budget: int) -> np.ndarray:
    """All solutions as rows, in lexicographic order (variables by index, values ascending).

    The search extends every surviving partial assignment by one variable
    at a time and prunes with each constraint as soon as its last scope
    variable has been assigned.
    """
    n = formula.num_vars
    size = math.prod(formula.domain_sizes)
    if size > budget:
        raise BudgetExceeded(f"product of domain sizes {size} exceeds budget {budget}")
    closing: list[list] = [[] for _ in range(n)]
    for c in formula.constraints:
        if c.width == 0:
            # an empty scope is violated by every assignment
            return np.zeros((0, n), dtype=_value_dtype(formula))
        closing[max(c.scope)].append(c)
    dt = _value_dtype(formula)
    rows = np.zeros((1, 0), dtype=dt)
    for v in range(n):
        q = formula.domain_sizes[v]
        rows = np.hstack([np.repeat(rows, q, axis=0),
                          np.tile(np.arange(q, dtype=dt), rows.shape[0])[:, None]])
        if closing[v]:
            keep = np.ones(rows.shape[0], dtype=bool)
            for c in closing[v]:
                hit = np.ones(rows.shape[0], dtype=bool)
                for u, a in zip(c.scope, c.forbidden):
                    hit &= rows[:, u] == a
                keep &= ~hit
            rows = rows[keep]
        if rows.shape[0] == 0:
            return np.zeros((0, n), dtype=dt)
    return rows


def _as_key(row) -> tuple[int, ...]:
    return tuple(int(a) for a in row)


@dataclass
class ExactDistributions:
    """Uniform law ``mu`` over the enumerated solutions, with helpers for conditionals."""

    formula: CspFormula
    solutions: np.ndarray  # (count, n)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def count(self) -> int:
        return int(self.solutions.shape[0])

    @property
    def mu(self) -> dict[tuple[int, ...], Fraction]:
        if not self.count:
            return {}
        w = Fraction(1, self.count)
        return {_as_key(r): w for r in self.solutions}

    def projected_solutions(self, scheme: ProjectionScheme) -> np.ndarray:
        """``h`` applied to every solution, built from per-variable preimage tables."""
        key = ("proj", scheme.alphabet_sizes)
        if key not in self._cache:
            out = np.empty(self.solutions.shape, dtype=np.int64)
            for v in range(self.formula.num_vars):
                table = np.empty(scheme.domain_sizes[v], dtype=np.int64)
                for y in range(scheme.alphabet_sizes[v]):
                    table[list(scheme.preimage(v, y))] = y
                out[:, v] = table[self.solutions[:, v]]
            self._cache[key] = out
        return self._cache[key]


def enumerate_solutions(formula: CspFormula, budget: int = DEFAULT_BUDGET) -> ExactDistributions:
    return ExactDistributions(formula, _solve(formula, budget))


def _histogram(rows: np.ndarray, total: int) -> dict[tuple[int, ...], Fraction]:
    if rows.shape[1] == 0:
        return {(): Fraction(1)} if total else {}
    keys, counts = np.unique(rows, axis=0, return_counts=True)
    return {_as_key(k): Fraction(int(c), total) for k, c in zip(keys, counts)}


def exact_projected(formula: CspFormula, scheme: ProjectionScheme, budget: int = DEFAULT_BUDGET,
                    exact: ExactDistributions | None = None) -> dict[tuple[int, ...], Fraction]:
    """``nu``: law of ``h(X)`` for ``X`` uniform over solutions."""
    exact = exact or enumerate_solutions(formula, budget)
    if not exact.count:
        raise NoSolutions("formula has no satisfying assignment")
    return _histogram(exact.projected_solutions(scheme), exact.count)


def _support_mask(y_values, support, n: int) -> tuple[np.ndarray, np.ndarray]:
    support = np.asarray(support, dtype=bool)
    if support.shape != (n,):
        raise ValueError(f"support mask must have length {n}")
    return np.asarray(y_values, dtype=np.int64), support


def exact_conditional(formula: CspFormula, scheme: ProjectionScheme, y_values, support,
                      S: Sequence[int], budget: int = DEFAULT_BUDGET,
                      exact: ExactDistributions | None = None) -> dict[tuple[int, ...], Fraction]:
    """``mu_S`` conditioned on ``h(X)`` agreeing with ``y_values`` on ``support``.

    Keys are value tuples on ``S`` in the order given.
    """
    exact = exact or enumerate_solutions(formula, budget)
    y, lam = _support_mask(y_values, support, formula.num_vars)
    proj = exact.projected_solutions(scheme)
    agree = np.all(proj[:, lam] == y[lam], axis=1)
    hits = exact.solutions[agree]
    if hits.shape[0] == 0:
        raise EmptySupport("no solution projects onto the given partial configuration")
    return _histogram(hits[:, list(S)].astype(np.int64), hits.shape[0])


def nu_single_site(nu: Mapping[tuple[int, ...], Fraction], v: int,
                   y: Sequence[int]) -> dict[int, Fraction]:
    """``nu_v`` given ``y`` off ``v``, read directly from the ``nu`` table."""
    y = tuple(int(a) for a in y)
    rest = y[:v] + y[v + 1:]
    mass = {key[v]: p for key, p in nu.items() if key[:v] + key[v + 1:] == rest}
    total = sum(mass.values(), Fraction(0))
    if total == 0:
        raise EmptySupport(f"nu gives zero mass to the configuration off variable {v}")
    return {a: p / total for a, p in sorted(mass.items())}


def pushforward_single_site(formula: CspFormula, scheme: ProjectionScheme, v: int, y,
                            exact: ExactDistributions) -> dict[int, Fraction]:
    """``h_v`` applied to the exact conditional of ``X_v`` given ``y`` off ``v``."""
    support = np.ones(formula.num_vars, dtype=bool)
    support[v] = False
    cond = exact_conditional(formula, scheme, y, support, [v], exact=exact)
    out: dict[int, Fraction] = {}
    for (x,), p in cond.items():
        sym = scheme.evaluate(v, x)
        out[sym] = out.get(sym, Fraction(0)) + p
    return dict(sorted(out.items()))


@dataclass(frozen=True)
class DistanceReport:
    counts: dict
    exact: dict
    tv: float
    chi2_stat: float
    p_value: float
    sample_size: int

    def as_dict(self) -> dict:
        return {"tv": self.tv, "chi2": self.chi2_stat, "p_value": self.p_value,
                "sample_size": self.sample_size, "outcomes": len(self.exact)}


def tv_distance(empirical: Mapping, exact: Mapping) -> DistanceReport:
    """Half the L1 distance between empirical frequencies and an exact law.

    ``empirical`` maps outcomes to counts; ``exact`` maps outcomes to
    probabilities.  The chi-square test runs over the exact support; any
    empirical mass outside it forces ``p_value = 0``.
    """
    counts = Counter({k: int(c) for k, c in empirical.items() if c})
    total = sum(counts.values())
    if total == 0:
        raise SampleSizeZero("empirical distribution has no samples")
    outcomes = set(counts) | set(exact)
    tv = 0.5 * sum(abs(counts.get(o, 0) / total - float(exact.get(o, 0))) for o in outcomes)
    support = [o for o in exact if exact[o] > 0]
    outside = sum(c for o, c in counts.items() if o not in exact or exact[o] == 0)
    if outside:
        stat, pval = math.inf, 0.0
    elif len(support) <= 1:
        stat, pval = 0.0, 1.0
    else:
        expected = np.array([float(exact[o]) * total for o in support])
        observed = np.array([counts.get(o, 0) for o in support], dtype=float)
        stat = float(np.sum((observed - expected) ** 2 / expected))
        pval = float(chi2.sf(stat, len(support) - 1))
    return DistanceReport(dict(counts), dict(exact), min(tv, 1.0), stat, pval, total)


@dataclass(frozen=True)
class GlauberMatrix:
    states: list[tuple[int, ...]]
    nu: np.ndarray
    P: sparse.csr_matrix

    def detailed_balance_error(self) -> float:
        flow = sparse.diags(self.nu) @ self.P
        diff = flow - flow.T
        return float(abs(diff).max()) if diff.nnz else 0.0

    def stationary_residual(self) -> float:
        return float(np.max(np.abs(self.P.T @ self.nu - self.nu)))

    def row_sum_error(self) -> float:
        return float(np.max(np.abs(np.asarray(self.P.sum(axis=1)).ravel() - 1.0)))


def exact_glauber_matrix(formula: CspFormula, scheme: ProjectionScheme,
                         budget: int = DEFAULT_BUDGET, max_states: int = 10 ** 4,
                         exact: ExactDistributions | None = None) -> GlauberMatrix:
    """Single-site heat-bath chain on the support of ``nu``.

    From ``y`` the chain picks ``v`` uniformly and redraws ``y_v`` from
    ``nu`` conditioned on the other coordinates.  Entries are formed in
    exact arithmetic and converted to floats at the end.
    """
    nu = exact_projected(formula, scheme, budget, exact)
    if len(nu) > max_states:
        raise BudgetExceeded(f"support of nu has {len(nu)} > {max_states} states")
    states = sorted(nu)
    index = {y: i for i, y in enumerate(states)}
    n = formula.num_vars
    entries: dict[tuple[int, int], Fraction] = {}
    for v in range(n):
        groups: dict[tuple, list[tuple[int, ...]]] = {}
        for y in states:
            groups.setdefault(y[:v] + y[v + 1:], []).append(y)
        for members in groups.values():
            total = sum((nu[y] for y in members), Fraction(0))
            for y in members:
                i = index[y]
                for z in members:
                    key = (i, index[z])
                    entries[key] = entries.get(key, Fraction(0)) + nu[z] / (total * n)
    rows, cols = zip(*entries) if entries else ((), ())
    vals = [float(p) for p in entries.values()]
    P = sparse.csr_matrix((vals, (rows, cols)), shape=(len(states), len(states)))
    return GlauberMatrix(states, np.array([float(nu[y]) for y in states]), P)


def stationary_vector(P) -> np.ndarray:
    """Left eigenvector of ``P`` for the eigenvalue closest to one, normalised to sum one."""
    dense = P.toarray() if sparse.issparse(P) else np.asarray(P)
    w, vl = np.linalg.eig(dense.T)
    i = int(np.argmin(np.abs(w - 1.0)))
    vec = np.real(vl[:, i])
    return vec / vec.sum()


def spectral_gap(P) -> float:
    """One minus the second largest eigenvalue modulus; zero means the chain is reducible or periodic."""
    dense = P.toarray() if sparse.issparse(P) else np.asarray(P)
    mods = np.sort(np.abs(np.linalg.eigvals(dense)))[::-1]
    return float(1.0 - mods[1]) if mods.size > 1 else 1.0
