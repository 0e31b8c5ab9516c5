"""Random instance families used by the benchmarks and the test suites."""

from __future__ import annotations

import numpy as np

from .core import AtomicConstraint, CspFormula, build_formula, hypergraph_coloring_formula


def random_kcnf(n: int, m: int, k: int, rng: np.random.Generator) -> CspFormula:
    """``m`` clauses, each on ``k`` distinct variables with random signs."""
    cons = [(rng.choice(n, k, replace=False), rng.integers(0, 2, k)) for _ in range(m)]
    return build_formula([2] * n, cons)


def random_hyperedges(n: int, m: int, k: int, rng: np.random.Generator) -> list[tuple[int, ...]]:
    return [tuple(int(v) for v in rng.choice(n, k, replace=False)) for _ in range(m)]


def random_coloring(n: int, m: int, k: int, q: int, rng: np.random.Generator) -> CspFormula:
    return hypergraph_coloring_formula(n, random_hyperedges(n, m, k, rng), q)


def random_atomic_csp(domains, m: int, width_range: tuple[int, int],
                      rng: np.random.Generator) -> CspFormula:
    """``m`` atomic constraints with uniformly random scopes and forbidden values."""
    domains = [int(q) for q in domains]
    n = len(domains)
    cons = []
    for _ in range(m):
        w = int(rng.integers(width_range[0], width_range[1] + 1))
        scope = rng.choice(n, min(w, n), replace=False)
        cons.append(AtomicConstraint(tuple(int(v) for v in scope),
                                     tuple(int(rng.integers(domains[v])) for v in scope)))
    return build_formula(domains, cons)


def block_chain_scopes(num_constraints: int, block: int) -> list[tuple[int, ...]]:
    """Scopes ``B_i + B_(i+1)`` over consecutive blocks, so each variable meets at most two constraints."""
    return [tuple(range(i * block, (i + 2) * block)) for i in range(num_constraints)]


def block_chain_cnf(num_constraints: int, block: int, rng: np.random.Generator) -> CspFormula:
    """Wide clauses overlapping only their neighbours: ``d <= 2`` and ``D <= 2``."""
    n = (num_constraints + 1) * block
    scopes = block_chain_scopes(num_constraints, block)
    return build_formula([2] * n, [(sc, rng.integers(0, 2, len(sc))) for sc in scopes])


def block_chain_csp(num_constraints: int, block: int, domains,
                    rng: np.random.Generator) -> CspFormula:
    domains = [int(q) for q in domains]
    scopes = block_chain_scopes(num_constraints, block)
    cons = [(sc, [int(rng.integers(domains[v])) for v in sc]) for sc in scopes]
    return build_formula(domains, cons)


def log_uniform_domains(n: int, low: int, high: int, rng: np.random.Generator) -> list[int]:
    """Domain sizes spread evenly in ``log q`` over ``[low, high]``."""
    logs = rng.uniform(np.log2(low), np.log2(high + 1), n)
    return [int(min(high, max(low, np.floor(2.0 ** x)))) for x in logs]
