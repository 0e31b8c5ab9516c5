import itertools
import json
import logging

import numpy as np
import pytest

from lllsample import io
from lllsample.core import build_formula, compute_stats, evaluate
from lllsample.errors import EmptyClause, ParseError, ValueOutOfDomain, VertexOutOfRange
from lllsample.generators import random_atomic_csp, random_hyperedges, random_kcnf
from lllsample.oracle import enumerate_solutions
from lllsample.projection import ProjectionScheme


def sig(formula):
    return formula.domain_sizes, [(c.scope, c.forbidden) for c in formula.constraints]


def test_cnf_clause_example():
    doc = io.parse_dimacs_cnf("p cnf 2 1\n1 -2 0\n")
    (c,) = doc.formula.constraints
    assert (c.scope, c.forbidden) == ((0, 1), (0, 1))
    assert doc.meta["k"] == 2 and doc.meta["d"] == 1


def test_cnf_duplicate_literal():
    (c,) = io.parse_dimacs_cnf("p cnf 1 1\n1 1 0\n").formula.constraints
    assert (c.scope, c.forbidden) == ((0,), (0,))


def test_cnf_tautology_dropped(caplog):
    with caplog.at_level(logging.WARNING):
        doc = io.parse_dimacs_cnf("p cnf 2 2\n1 -1 0\n2 0\n")
    assert doc.formula.m == 1
    assert "tautological" in caplog.text


def test_cnf_comments_and_multiline_clauses():
    doc = io.parse_dimacs_cnf("c hello\nc\np cnf 3 2\n1 2\n 3 0 -1\n0\n")
    assert [c.scope for c in doc.formula.constraints] == [(0, 1, 2), (0,)]


@pytest.mark.parametrize("text, exc", [
    ("p cnf 2 1\n0\n", EmptyClause),
    ("p cnf 2 2\n1 0\n", ParseError),
    ("p cnf 2 1\n1 3 0\n", ParseError),
    ("p cnf 2 1\n1 2\n", ParseError),
    ("1 2 0\n", ParseError),
    ("p cnf 2 1\n1 x 0\n", ParseError),
])
def test_cnf_errors(text, exc):
    with pytest.raises(exc):
        io.parse_dimacs_cnf(text)


def test_parse_error_carries_line_number():
    with pytest.raises(ParseError) as err:
        io.parse_dimacs_cnf("p cnf 2 1\n\n1 y 0\n")
    assert "3" in str(err.value)


def test_hypergraph_single_edge():
    doc = io.parse_hypergraph("p hyp 3 1 2\n1 2 3\n")
    assert [(c.scope, c.forbidden) for c in doc.formula.constraints] == [
        ((0, 1, 2), (0, 0, 0)), ((0, 1, 2), (1, 1, 1))]
    assert doc.meta["Delta"] == 1 and doc.meta["q"] == 2 and doc.meta["k"] == 3


def test_hypergraph_errors():
    with pytest.raises(ParseError):
        io.parse_hypergraph("p hyp 3 1 2\n1 1 2\n")
    with pytest.raises(VertexOutOfRange):
        io.parse_hypergraph("p hyp 3 1 2\n1 2 4\n")
    with pytest.raises(ParseError):
        io.parse_hypergraph("p hyp 3 2 2\n1 2 3\n")


def test_hypergraph_count_matches_proper_colorings():
    doc = io.parse_hypergraph("p hyp 4 2 3\n1 2 3\n3 4 1\n")
    proper = sum(1 for x in itertools.product(range(3), repeat=4)
                 if len({x[0], x[1], x[2]}) > 1 and len({x[2], x[3], x[0]}) > 1)
    assert enumerate_solutions(doc.formula).count == proper == 81 - 3 - 3 * 2 - 3 * 2
    assert doc.meta["Delta"] == 2


def test_atomic_csp_example():
    doc = io.parse_atomic_csp("p acsp 2\nd 3 3\nc 1:0 2:0\n")
    assert [(c.scope, c.forbidden) for c in doc.formula.constraints] == [((0, 1), (0, 0))]
    assert doc.formula.domain_sizes == (3, 3)


def test_atomic_csp_errors():
    with pytest.raises(ParseError):
        io.parse_atomic_csp("p acsp 2\nc 1:0 2:0\n")
    with pytest.raises(ParseError):
        io.parse_atomic_csp("p acsp 2\n")
    with pytest.raises(ValueOutOfDomain):
        io.parse_atomic_csp("p acsp 2\nd 3 3\nc 1:3\n")
    with pytest.raises(ParseError):
        io.parse_atomic_csp("p acsp 2\nd 3 3\nc 1:1 1:2\n")


def test_atomic_csp_stats_recomputed():
    doc = io.parse_atomic_csp("# mixed\np acsp 3\nd 2 3 4\nc 1:1 3:3\nc 2:2 3:0\n")
    st = compute_stats(doc.formula)
    assert (st.n, st.m, st.k, st.d, st.D) == (3, 2, 2, 2, 1)
    assert st.log2_inv_p == pytest.approx(min(np.log2(2 * 4), np.log2(3 * 4)))
    assert (doc.meta["k"], doc.meta["d"]) == (st.k, st.d)


def test_emit_samples():
    assert io.emit_samples([(0, 1, 2)]) == "0 1 2\n"
    assert io.emit_samples([]) == ""
    body = json.loads(io.emit_samples([], "json", {"seed": 3}))
    assert body == {"samples": [], "metadata": {"seed": 3}}
    rows = [[0, 1, 2], [2, 2, 0], [1, 0, 1]]
    for fmt in ("lines", "json"):
        assert io.parse_samples(io.emit_samples(rows, fmt), fmt) == rows
    with pytest.raises(ValueError):
        io.emit_samples(rows, "xml")


def corpus(seed=7):
    rng = np.random.default_rng(seed)
    docs = []
    for i in range(50):
        kind = i % 3
        if kind == 0:
            docs.append(io.parse_dimacs_cnf(io.serialize_dimacs_cnf(
                random_kcnf(int(rng.integers(3, 30)), int(rng.integers(0, 40)), 3, rng))))
        elif kind == 1:
            n = int(rng.integers(4, 30))
            docs.append(io.parse_hypergraph(io.serialize_hypergraph(
                n, random_hyperedges(n, int(rng.integers(1, 20)), 3, rng), int(rng.integers(2, 6)))))
        else:
            docs.append(io.parse_atomic_csp(io.serialize_atomic_csp(random_atomic_csp(
                rng.integers(2, 9, int(rng.integers(2, 20))), int(rng.integers(0, 15)), (1, 3), rng))))
    return docs


def test_round_trip_corpus():
    for doc in corpus():
        text = io.serialize_instance(doc)
        again = io.parse_instance(text)
        assert again.kind == doc.kind
        assert sig(again.formula) == sig(doc.formula)
        assert io.serialize_instance(again) == text


def test_detect_kind():
    assert io.detect_kind("c x\np cnf 1 0\n") == "cnf"
    assert io.detect_kind("p hyp 2 0 2\n") == "hypergraph-coloring"
    assert io.detect_kind("p acsp 1\nd 2\n") == "atomic-csp"
    with pytest.raises(ParseError):
        io.detect_kind("p wcnf 1 1\n")


def test_cnf_forbidden_tuple_truth_table():
    rng = np.random.default_rng(1)
    for w in range(1, 21):
        vars_ = rng.choice(40, w, replace=False) + 1
        lits = [int(v) if rng.random() < 0.5 else -int(v) for v in vars_]
        c = io.clause_to_constraint(lits)
        forbidden = []
        if w <= 12:
            for bits in itertools.product(range(2), repeat=w):
                clause_true = any((b == 1) if l > 0 else (b == 0) for l, b in zip(lits, bits))
                if not clause_true:
                    forbidden.append(bits)
            assert forbidden == [c.forbidden]
        else:
            # too many rows to scan; check the claimed tuple falsifies and each single flip satisfies
            t = c.forbidden
            assert not any((b == 1) if l > 0 else (b == 0) for l, b in zip(lits, t))
            for i in range(w):
                flip = list(t)
                flip[i] ^= 1
                assert any((b == 1) if l > 0 else (b == 0) for l, b in zip(lits, flip))


def test_scheme_file_round_trip():
    f = build_formula([5, 3, 2], [])
    sch = ProjectionScheme((5, 3, 2), (2, 3, 1))
    text = "# made by hand\n" + io.format_scheme(sch) + "# trailing note\n"
    assert io.parse_scheme(text, f).alphabet_sizes == (2, 3, 1)
    with pytest.raises(ParseError):
        io.parse_scheme("s 2 3\n", f)
    with pytest.raises(ParseError):
        io.parse_scheme("s 6 3 2\n", f)
    with pytest.raises(ParseError):
        io.parse_scheme("# nothing\n", f)


def test_parsed_cnf_semantics_match_clauses():
    rng = np.random.default_rng(4)
    text = io.serialize_dimacs_cnf(random_kcnf(6, 8, 3, rng))
    doc = io.parse_dimacs_cnf(text)
    for x in itertools.product(range(2), repeat=6):
        want = all(any((x[abs(l) - 1] == 1) if l > 0 else (x[abs(l) - 1] == 0) for l in cl)
                   for cl in doc.clauses)
        assert evaluate(doc.formula, x) == want
