import itertools
import math

import numpy as np
import pytest
from scipy.stats import chisquare

from lllsample.core import build_formula, compute_stats, hypergraph_coloring_formula
from lllsample.errors import (
    ConstructionFailed,
    PreconditionViolated,
    SymbolOutOfAlphabet,
    TooLargeToEnumerate,
    ValueOutOfDomain,
)
from lllsample.generators import block_chain_cnf, random_atomic_csp, random_kcnf
from lllsample.projection import (
    ProjectionScheme,
    build_round_down,
    check_derived_lll_conditions,
    construct_general_scheme,
    construct_interval_scheme,
    construct_marking_scheme,
    evaluate_projection,
    interval_precondition,
    invert_projection,
    marked_counts,
    marking_window,
    project_forbidden,
    random_scheme,
    verify_entropy_criterion,
)

COLORING = (7 / 9, 2 / 3)
CNF = (21 / 25, 1 / 2)
GENERAL = (0.994, 0.577)


def scheme1(q, s):
    return ProjectionScheme((q,), (s,))


def brute_partition(q, s):
    """Interval sizes listed directly: remainder intervals first."""
    sizes = [q // s + 1] * (q % s) + [q // s] * (s - q % s)
    table = []
    for y, size in enumerate(sizes):
        table.extend([y] * size)
    return table


def test_even_split():
    assert evaluate_projection(scheme1(9, 3), 0, 5) == 1


def test_remainder_goes_first():
    sch = scheme1(7, 3)
    assert evaluate_projection(sch, 0, 2) == 0
    assert [sch.preimage_size(0, y) for y in range(3)] == [3, 2, 2]


def test_q650_s7_sizes():
    sch = scheme1(650, 7)
    sizes = np.bincount([sch.evaluate(0, x) for x in range(650)])
    assert sorted(sizes.tolist()) == [92] + [93] * 6


@pytest.mark.parametrize("q", [1, 2, 3, 7, 10, 64, 97])
def test_evaluate_matches_listed_partition(q):
    for s in range(1, q + 1):
        sch = scheme1(q, s)
        table = brute_partition(q, s)
        assert [sch.evaluate(0, x) for x in range(q)] == table
        assert sch.project(np.arange(q)[:, None]).ravel().tolist() == table


def test_domain_and_alphabet_errors(rng):
    sch = scheme1(7, 3)
    with pytest.raises(ValueOutOfDomain):
        sch.evaluate(0, 7)
    with pytest.raises(SymbolOutOfAlphabet):
        invert_projection(sch, 0, 3, rng)


def test_inversion_extremes(rng):
    ident = scheme1(5, 5)
    assert all(invert_projection(ident, 0, y, rng) == y for y in range(5))
    draws = [invert_projection(scheme1(5, 1), 0, 0, rng) for _ in range(2000)]
    assert set(draws) == set(range(5))


def test_inversion_uniform_q7_s3(rng):
    draws = np.array([invert_projection(scheme1(7, 3), 0, 0, rng) for _ in range(30000)])
    counts = np.bincount(draws, minlength=3)
    assert counts.sum() == 30000 and counts.size == 3
    assert chisquare(counts).pvalue > 1e-3


def test_evaluate_after_invert_is_identity(rng):
    for q in (2, 5, 13, 100):
        for s in range(1, q + 1):
            sch = scheme1(q, s)
            for y in range(s):
                assert sch.evaluate(0, sch.invert(0, y, rng)) == y


def test_interval_scheme_q650():
    f = hypergraph_coloring_formula(13, [tuple(range(13))], 650)
    sch = construct_interval_scheme(f, *COLORING)
    s = sch.alphabet_sizes[0]
    # s = ceil(650^(5/18)) certified with integers: (s-1)^18 < 650^5 <= s^18
    assert (s - 1) ** 18 < 650 ** 5 <= s ** 18
    assert s == 7
    assert verify_entropy_criterion(f, sch, *COLORING).passed


def test_interval_precondition_rejects_q6():
    f = hypergraph_coloring_formula(3, [(0, 1, 2)], 6)
    with pytest.raises(PreconditionViolated, match="q\\^"):
        construct_interval_scheme(f, *COLORING)
    assert interval_precondition(6, *COLORING)


def test_marking_no_constraints(rng):
    f = build_formula([2] * 5, [])
    sch = construct_marking_scheme(f, *CNF, 0.01, rng)
    assert sch.n == 5


def test_marking_windows_hold(rng):
    f = block_chain_cnf(5, 100, rng)
    sch = construct_marking_scheme(f, *CNF, 1e-3, rng)
    lo, hi = marking_window(200, *CNF)
    assert (lo, hi) == (32, 100)
    for c, t in zip(f.constraints, marked_counts(f, sch)):
        assert (1 - CNF[0]) * c.width <= t <= (1 - CNF[1]) * c.width
    assert verify_entropy_criterion(f, sch, *CNF).passed


def test_marking_failure_rate(rng):
    # k=200, d=2: the window holds with overwhelming probability, so failures are rare
    delta_fail = 0.01
    failures = 0
    for seed in range(100):
        f = block_chain_cnf(4, 100, np.random.default_rng(seed))
        try:
            construct_marking_scheme(f, *CNF, delta_fail, np.random.default_rng(seed))
        except ConstructionFailed:
            failures += 1
    assert failures / 100 <= delta_fail + 3 * math.sqrt(delta_fail * (1 - delta_fail) / 100)


def test_marking_precondition_enforced(rng):
    f = random_kcnf(10, 5, 3, rng)
    with pytest.raises(PreconditionViolated, match="k >="):
        construct_marking_scheme(f, *CNF, 0.01, rng)


def test_marking_impossible_window_fails(rng):
    # alpha=0.2, beta=0.1 on width 3 gives the empty window [3, 2]
    f = build_formula([2] * 3, [((0, 1, 2), (0, 0, 0))])
    with pytest.raises(ConstructionFailed):
        construct_marking_scheme(f, 0.2, 0.1, 0.5, rng, enforce_precondition=False)


def test_general_all_large_is_deterministic():
    f = build_formula([5000] * 4, [((0, 1, 2, 3), (1, 2, 3, 4))])
    rng = np.random.default_rng(0)
    state = rng.bit_generator.state
    sch = construct_general_scheme(f, *GENERAL, 0.01, rng, enforce_precondition=False)
    assert rng.bit_generator.state == state
    expected = math.ceil(5000 ** ((2 - sum(GENERAL)) / 2))
    assert sch.alphabet_sizes == (expected,) * 4


def test_general_on_booleans_matches_marking(rng):
    f = block_chain_cnf(4, 100, rng)
    a = construct_marking_scheme(f, *CNF, 0.01, np.random.default_rng(3), enforce_precondition=False)
    b = construct_general_scheme(f, *CNF, 0.01, np.random.default_rng(3), enforce_precondition=False)
    assert a == b


def test_general_precondition_enforced(rng):
    f = random_kcnf(10, 5, 3, rng)
    with pytest.raises(PreconditionViolated, match="log\\(1/p\\)"):
        construct_general_scheme(f, *GENERAL, 0.01, rng)


def test_entropy_extremes(rng):
    f = random_atomic_csp([4] * 6, 5, (2, 3), rng)
    ident = verify_entropy_criterion(f, ProjectionScheme.identity(f), 0.5, 0.3)
    assert ident.upper_ok and not ident.lower_ok
    assert all(c.ceil_sum == 0 for c in ident.per_constraint)
    triv = verify_entropy_criterion(f, ProjectionScheme.trivial(f), 0.5, 0.3)
    assert triv.lower_ok and not triv.upper_ok
    assert all(c.floor_sum == pytest.approx(c.total) for c in triv.per_constraint)


def test_entropy_matches_marked_counts(rng):
    f = block_chain_cnf(6, 20, rng)
    for _ in range(30):
        marks = rng.random(f.n) < 0.33
        sch = ProjectionScheme.from_marks(f, marks)
        report = verify_entropy_criterion(f, sch, *CNF)
        by_count = all((1 - CNF[0]) * c.width - 1e-9 <= t <= (1 - CNF[1]) * c.width + 1e-9
                       for c, t in zip(f.constraints, marked_counts(f, sch)))
        assert report.passed == by_count


def test_entropy_sums_recomputed(rng):
    f = random_atomic_csp(rng.integers(2, 50, 12), 10, (1, 5), rng)
    sch = random_scheme(f, rng)
    report = verify_entropy_criterion(f, sch, 0.9, 0.4)
    q, s = f.domain_sizes, sch.alphabet_sizes
    for c, row in zip(f.constraints, report.per_constraint):
        assert row.ceil_sum == pytest.approx(sum(math.log2(math.ceil(q[v] / s[v])) for v in c.scope))
        assert row.floor_sum == pytest.approx(sum(math.log2(math.floor(q[v] / s[v])) for v in c.scope))


def test_project_forbidden(rng):
    f = random_kcnf(6, 4, 3, rng)
    assert all(set(t) == {0} for t in project_forbidden(f, ProjectionScheme.trivial(f)))
    ident = ProjectionScheme.identity(f)
    assert project_forbidden(f, ident) == tuple(c.forbidden for c in f.constraints)
    g = random_atomic_csp(rng.integers(2, 9, 8), 6, (1, 4), rng)
    sch = random_scheme(g, rng)
    for c, tau in zip(g.constraints, project_forbidden(g, sch)):
        assert tau == tuple(brute_partition(g.domain_sizes[v], sch.alphabet_sizes[v])[a]
                            for v, a in zip(c.scope, c.forbidden))


def test_round_down_enumeration_agrees(rng):
    for _ in range(50):
        f = random_atomic_csp(rng.integers(2, 7, 5), 1, (1, 4), rng)
        sch = random_scheme(f, rng)
        rd = build_round_down(f, sch, verify=True)
        assert rd.constraints[0].forbidden == project_forbidden(f, sch)[0]


def test_round_down_identity_and_budget(rng):
    f = random_atomic_csp([3] * 6, 4, (2, 3), rng)
    rd = build_round_down(f, ProjectionScheme.identity(f))
    assert rd.constraints == f.constraints
    with pytest.raises(TooLargeToEnumerate):
        build_round_down(f, ProjectionScheme.identity(f), verify=True, budget=5)


def test_derived_conditions(rng):
    f = random_atomic_csp(rng.integers(2, 9, 8), 6, (2, 4), rng)
    ident = check_derived_lll_conditions(f, ProjectionScheme.identity(f), 0.9, 0.5, 1.0, 1.0)
    assert ident.ln_inv_p_round_down == pytest.approx(ident.ln_inv_p_original)
    triv = check_derived_lll_conditions(f, ProjectionScheme.trivial(f), 0.9, 0.5, 1.0, 1.0)
    assert triv.ln_inv_p_conditional == pytest.approx(triv.ln_inv_p_original)


def test_derived_conditions_interval_recomputed():
    f = hypergraph_coloring_formula(6, [(0, 1, 2), (2, 3, 4), (4, 5, 0)], 700)
    sch = construct_interval_scheme(f, *COLORING)
    rep = check_derived_lll_conditions(f, sch, *COLORING, 2.0, 3.0)
    s = sch.alphabet_sizes[0]
    assert rep.ln_inv_p_conditional == pytest.approx(3 * math.log(700 // s))
    worst_rd = min(3 * math.log(700) - sum(math.log(sch.preimage_size(0, y)) for _ in range(3))
                   for y in range(s))
    assert rep.ln_inv_p_round_down == pytest.approx(worst_rd)
    D = compute_stats(f).D
    assert rep.round_down_rhs == pytest.approx((1 - COLORING[0]) * (2 * math.log(D) + 3))
