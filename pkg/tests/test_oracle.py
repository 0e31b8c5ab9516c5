import itertools
import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from lllsample.core import build_formula, evaluate
from lllsample.errors import BudgetExceeded, EmptySupport, NoSolutions, SampleSizeZero
from lllsample.generators import random_atomic_csp, random_kcnf
from lllsample.oracle import (
    enumerate_solutions,
    exact_conditional,
    exact_glauber_matrix,
    exact_projected,
    nu_single_site,
    pushforward_single_site,
    spectral_gap,
    stationary_vector,
    tv_distance,
)
from lllsample.projection import ProjectionScheme, random_scheme


def naive_solutions(formula):
    return [x for x in itertools.product(*(range(q) for q in formula.domain_sizes))
            if evaluate(formula, x)]


def test_single_clause_three_solutions():
    f = build_formula([2, 2], [((0, 1), (0, 0))])
    assert enumerate_solutions(f).count == 3


def test_unsatisfiable_pair_cover():
    f = build_formula([2, 2], [((0, 1), t) for t in itertools.product(range(2), repeat=2)])
    ex = enumerate_solutions(f)
    assert ex.count == 0
    with pytest.raises(NoSolutions):
        exact_projected(f, ProjectionScheme.identity(f), exact=ex)


def test_cnf_count_matches_naive_scan(rng):
    for _ in range(10):
        f = random_kcnf(10, 25, 3, rng)
        ex = enumerate_solutions(f)
        assert [tuple(r) for r in ex.solutions.tolist()] == naive_solutions(f)


def test_mixed_domain_enumeration_order(rng):
    f = random_atomic_csp(rng.integers(2, 5, 7), 12, (1, 3), rng)
    assert [tuple(r) for r in enumerate_solutions(f).solutions.tolist()] == naive_solutions(f)


def test_count_invariant_under_constraint_order(rng):
    f = random_kcnf(9, 20, 3, rng)
    g = build_formula(f.domain_sizes, list(reversed(f.constraints)))
    assert enumerate_solutions(f).count == enumerate_solutions(g).count


def test_budget():
    f = build_formula([2] * 30, [])
    with pytest.raises(BudgetExceeded):
        enumerate_solutions(f, budget=1000)


def test_mu_and_nu_sum_to_one(rng):
    f = random_atomic_csp(rng.integers(2, 5, 6), 6, (1, 3), rng)
    ex = enumerate_solutions(f)
    assert sum(ex.mu.values()) == 1
    nu = exact_projected(f, random_scheme(f, rng), exact=ex)
    assert sum(nu.values()) == 1


def test_identity_nu_equals_mu(rng):
    f = random_kcnf(7, 10, 3, rng)
    ex = enumerate_solutions(f)
    assert exact_projected(f, ProjectionScheme.identity(f), exact=ex) == ex.mu


def test_trivial_nu_is_point_mass(rng):
    f = random_kcnf(7, 10, 3, rng)
    assert exact_projected(f, ProjectionScheme.trivial(f)) == {(0,) * 7: Fraction(1)}


def test_nu_recount(rng):
    f = random_atomic_csp(rng.integers(2, 6, 6), 8, (1, 3), rng)
    sch = random_scheme(f, rng)
    sols = naive_solutions(f)
    counts = Counter(tuple(sch.evaluate(v, x[v]) for v in range(f.n)) for x in sols)
    expected = {y: Fraction(c, len(sols)) for y, c in counts.items()}
    assert exact_projected(f, sch) == expected


def test_conditional_with_empty_support_is_marginal(rng):
    f = random_kcnf(6, 8, 3, rng)
    sch = random_scheme(f, rng)
    sols = naive_solutions(f)
    cond = exact_conditional(f, sch, np.zeros(6), np.zeros(6, bool), [2, 4])
    marg = Counter((x[2], x[4]) for x in sols)
    assert cond == {k: Fraction(c, len(sols)) for k, c in marg.items()}


def test_conditional_identity_full_is_point_mass(rng):
    f = random_kcnf(6, 8, 3, rng)
    x = naive_solutions(f)[0]
    cond = exact_conditional(f, ProjectionScheme.identity(f), x, np.ones(6, bool), range(6))
    assert cond == {tuple(x): Fraction(1)}


def test_conditional_filter_recount(rng):
    sols = []
    while not sols:
        f = random_atomic_csp(rng.integers(2, 5, 7), 8, (2, 3), rng)
        sols = naive_solutions(f)
    sch = random_scheme(f, rng)
    for _ in range(10):
        x = sols[rng.integers(len(sols))]
        y = [sch.evaluate(v, x[v]) for v in range(f.n)]
        lam = rng.random(f.n) < 0.5
        S = sorted(rng.choice(f.n, 2, replace=False).tolist())
        hits = [s for s in sols if all(sch.evaluate(v, s[v]) == y[v] for v in range(f.n) if lam[v])]
        expected = Counter(tuple(s[v] for v in S) for s in hits)
        got = exact_conditional(f, sch, y, lam, S)
        assert got == {k: Fraction(c, len(hits)) for k, c in expected.items()}


def test_conditional_empty_support_error():
    f = build_formula([2, 2], [((0,), (0,))])
    with pytest.raises(EmptySupport):
        exact_conditional(f, ProjectionScheme.identity(f), [0, 0], [True, False], [1])


def test_single_site_paths_agree(rng):
    f = random_atomic_csp(rng.integers(2, 5, 6), 6, (1, 3), rng)
    sch = random_scheme(f, rng)
    ex = enumerate_solutions(f)
    nu = exact_projected(f, sch, exact=ex)
    for y in list(nu)[:10]:
        for v in range(f.n):
            assert nu_single_site(nu, v, y) == pushforward_single_site(f, sch, v, y, ex)


def test_tv_examples(rng):
    exact = {"a": Fraction(1, 2), "b": Fraction(1, 4), "c": Fraction(1, 4)}
    rep = tv_distance({"a": 200, "b": 100, "c": 100}, exact)
    assert rep.tv == 0 and rep.p_value == pytest.approx(1.0)
    assert tv_distance({"z": 5}, exact).tv == 1.0
    with pytest.raises(SampleSizeZero):
        tv_distance({}, exact)


def test_tv_concentration(rng):
    probs = np.array([0.1, 0.2, 0.3, 0.15, 0.15, 0.1])
    draws = rng.choice(6, 10 ** 5, p=probs)
    rep = tv_distance(Counter(draws.tolist()), dict(enumerate(probs)))
    assert rep.tv <= 3 * math.sqrt(6 / 10 ** 5)


def test_glauber_product_chain():
    f = build_formula([2, 3], [])
    chain = exact_glauber_matrix(f, ProjectionScheme.identity(f))
    P = chain.P.toarray()
    # product chain: pick a coordinate with prob 1/2, redraw it uniformly
    for i, y in enumerate(chain.states):
        for j, z in enumerate(chain.states):
            diff = [v for v in range(2) if y[v] != z[v]]
            if len(diff) > 1:
                expected = 0.0
            elif len(diff) == 1:
                expected = 0.5 / f.domain_sizes[diff[0]]
            else:
                expected = sum(0.5 / q for q in f.domain_sizes)
            assert P[i, j] == pytest.approx(expected, abs=1e-15)


def test_glauber_stochastic_reversible_stationary(rng):
    for _ in range(5):
        f = random_kcnf(7, 9, 3, rng)
        sch = random_scheme(f, rng)
        chain = exact_glauber_matrix(f, sch)
        assert chain.row_sum_error() <= 1e-12
        assert chain.detailed_balance_error() <= 1e-12
        assert chain.stationary_residual() <= 1e-10
        if spectral_gap(chain.P) > 1e-6:
            # power iteration as an independent route to the stationary vector
            vec = np.ones(len(chain.states)) / len(chain.states)
            for _ in range(20000):
                vec = chain.P.T @ vec
            assert np.max(np.abs(vec - chain.nu)) <= 1e-10
            assert np.max(np.abs(stationary_vector(chain.P) - chain.nu)) <= 1e-10


def test_glauber_state_budget(rng):
    f = build_formula([2] * 8, [])
    with pytest.raises(BudgetExceeded):
        exact_glauber_matrix(f, ProjectionScheme.identity(f), max_states=10)
