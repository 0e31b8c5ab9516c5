"""Projection schemes: balanced interval maps ``h_v : [q_v] -> [s_v]``.

Every scheme here uses one canonical representation.  The domain
``0..q_v-1`` is cut into ``s_v`` consecutive intervals; the first
``q_v mod s_v`` intervals hold ``ceil(q_v/s_v)`` values and the rest hold
``floor(q_v/s_v)``.  Marking schemes are the special case ``s_v in {1, q_v}``.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import AtomicConstraint, CspFormula, compute_stats
from .errors import (
    ConstructionFailed,
    InvalidAlphaBeta,
    PreconditionViolated,
    SymbolOutOfAlphabet,
    TooLargeToEnumerate,
    ValueOutOfDomain,
)

log = logging.getLogger(__name__)

TOL = 1e-9


@dataclass(frozen=True)
class ProjectionScheme:
    domain_sizes: tuple[int, ...]
    alphabet_sizes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "domain_sizes", tuple(int(q) for q in self.domain_sizes))
        object.__setattr__(self, "alphabet_sizes", tuple(int(s) for s in self.alphabet_sizes))
        if len(self.domain_sizes) != len(self.alphabet_sizes):
            raise ValueError("domain and alphabet size lists differ in length")
        for v, (q, s) in enumerate(zip(self.domain_sizes, self.alphabet_sizes)):
            if not 1 <= s <= q:
                raise ValueError(f"variable {v}: alphabet size {s} not in [1, {q}]")

    @classmethod
    def identity(cls, formula: CspFormula) -> "ProjectionScheme":
        return cls(formula.domain_sizes, formula.domain_sizes)

    @classmethod
    def trivial(cls, formula: CspFormula) -> "ProjectionScheme":
        return cls(formula.domain_sizes, (1,) * formula.num_vars)

    @classmethod
    def from_marks(cls, formula: CspFormula, marked) -> "ProjectionScheme":
        q = formula.domain_sizes
        return cls(q, tuple(q[v] if marked[v] else 1 for v in range(len(q))))

    @property
    def n(self) -> int:
        return len(self.domain_sizes)

    @property
    def s_array(self) -> np.ndarray:
        return np.asarray(self.alphabet_sizes, dtype=np.int64)

    def preimage(self, v: int, y: int) -> range:
        """The interval ``h_v^{-1}(y)`` as a range of domain values."""
        q, s = self.domain_sizes[v], self.alphabet_sizes[v]
        if not 0 <= y < s:
            raise SymbolOutOfAlphabet(f"symbol {y} not in alphabet of size {s} (variable {v})")
        b, r = divmod(q, s)
        if y < r:
            lo = y * (b + 1)
            return range(lo, lo + b + 1)
        lo = r * (b + 1) + (y - r) * b
        return range(lo, lo + b)

    def preimage_size(self, v: int, y: int) -> int:
        return len(self.preimage(v, y))

    def evaluate(self, v: int, x: int) -> int:
        q, s = self.domain_sizes[v], self.alphabet_sizes[v]
        if not 0 <= x < q:
            raise ValueOutOfDomain(f"value {x} not in domain of size {q} (variable {v})")
        b, r = divmod(q, s)
        cut = r * (b + 1)
        if x < cut:
            return x // (b + 1)
        return r + (x - cut) // b

    def invert(self, v: int, y: int, rng: np.random.Generator) -> int:
        interval = self.preimage(v, y)
        if len(interval) == 1:
            return interval.start
        return interval.start + int(rng.integers(0, len(interval)))

    def project(self, x) -> np.ndarray:
        """Vectorised ``h`` applied to a full assignment or an array of them."""
        x = np.asarray(x, dtype=np.int64)
        q = np.asarray(self.domain_sizes, dtype=np.int64)
        s = self.s_array
        b = q // s
        r = q - b * s
        cut = r * (b + 1)
        return np.where(x < cut, x // (b + 1), r + (x - cut) // b)

    def to_text(self) -> str:
        return "s " + " ".join(str(s) for s in self.alphabet_sizes)


def evaluate_projection(scheme: ProjectionScheme, v: int, x: int) -> int:
    return scheme.evaluate(v, x)


def invert_projection(scheme: ProjectionScheme, v: int, y: int,
                      rng: np.random.Generator) -> int:
    return scheme.invert(v, y, rng)


def check_alpha_beta(alpha: float, beta: float) -> None:
    if not 0 < beta < alpha < 1:
        raise InvalidAlphaBeta(f"need 0 < beta < alpha < 1, got alpha={alpha}, beta={beta}")


# -- entropy criterion ------------------------------------------------------

@dataclass(frozen=True)
class ConstraintEntropy:
    ceil_sum: float  # sum log2 ceil(q_v/s_v)
    floor_sum: float  # sum log2 floor(q_v/s_v)
    total: float  # sum log2 q_v
    upper_ok: bool
    lower_ok: bool


@dataclass(frozen=True)
class EntropyReport:
    alpha: float
    beta: float
    balanced: bool
    per_constraint: tuple[ConstraintEntropy, ...]

    @property
    def upper_ok(self) -> bool:
        return all(c.upper_ok for c in self.per_constraint)

    @property
    def lower_ok(self) -> bool:
        return all(c.lower_ok for c in self.per_constraint)

    @property
    def passed(self) -> bool:
        return self.balanced and self.upper_ok and self.lower_ok

    def failing(self) -> list[int]:
        return [j for j, c in enumerate(self.per_constraint) if not (c.upper_ok and c.lower_ok)]

    def summary(self) -> str:
        bad = self.failing()
        return (f"entropy criterion alpha={self.alpha:g} beta={self.beta:g}: "
                f"{'pass' if self.passed else 'FAIL'} "
                f"({len(self.per_constraint) - len(bad)}/{len(self.per_constraint)} constraints ok)")


def _log_terms(scheme: ProjectionScheme):
    q = np.asarray(scheme.domain_sizes, dtype=np.int64)
    s = scheme.s_array
    lc = np.log2(-(-q // s))
    lf = np.log2(q // s)
    lq = np.log2(q)
    return lc, lf, lq


def verify_entropy_criterion(formula: CspFormula, scheme: ProjectionScheme,
                             alpha: float, beta: float) -> EntropyReport:
    lc, lf, lq = _log_terms(scheme)
    rows = []
    for c in formula.constraints:
        idx = list(c.scope)
        cs, fs, tot = float(lc[idx].sum()), float(lf[idx].sum()), float(lq[idx].sum())
        rows.append(ConstraintEntropy(
            ceil_sum=cs, floor_sum=fs, total=tot,
            upper_ok=cs <= alpha * tot + TOL,
            lower_ok=fs >= beta * tot - TOL,
        ))
    return EntropyReport(alpha, beta, _is_balanced(scheme), tuple(rows))


def _is_balanced(scheme: ProjectionScheme) -> bool:
    # holds by construction for interval maps; checked from the preimage sizes
    for v, (q, s) in enumerate(zip(scheme.domain_sizes, scheme.alphabet_sizes)):
        lo, hi = q // s, -(-q // s)
        sizes = {scheme.preimage_size(v, 0), scheme.preimage_size(v, s - 1)}
        if not all(lo <= z <= hi for z in sizes):
            return False
    return True


# -- constructors -------------------------------------------------------------

def _homogeneous_q(formula: CspFormula) -> int:
    qs = set(formula.domain_sizes)
    if not qs:
        return 0
    if len(qs) != 1:
        raise PreconditionViolated("domains are not homogeneous (q_v differs across variables)")
    return qs.pop()


def interval_precondition(q: int, alpha: float, beta: float) -> list[str]:
    """Return the failed inequalities for the deterministic interval scheme."""
    fails = []
    mid = q ** ((alpha + beta) / 2)
    if mid < 7:
        fails.append(f"7 <= q^((alpha+beta)/2) failed: q^((alpha+beta)/2) = {mid:.6g}")
    if mid > q / 6:
        fails.append(f"q^((alpha+beta)/2) <= q/6 failed: {mid:.6g} > {q / 6:.6g}")
    if math.log2(q) < 1 / (alpha - beta):
        fails.append(f"log q >= 1/(alpha-beta) failed: {math.log2(q):.6g} < {1 / (alpha - beta):.6g}")
    return fails


def marking_precondition(k: int, d: int, alpha: float, beta: float) -> list[str]:
    if k <= 0:
        return []
    need = (2 * math.log(2) / (alpha - beta) ** 2) * math.log2(2 * math.e * k * max(d, 1))
    if k < need:
        return [f"k >= (2 ln 2)/(alpha-beta)^2 * log(2e k d) failed: {k} < {need:.6g}"]
    return []


def general_precondition(log2_inv_p: float, D: int, alpha: float, beta: float) -> list[str]:
    logD = math.log2(D) if D > 0 else 0.0
    need = 25 / (alpha - beta) ** 3 * (logD + 3)
    if log2_inv_p < need:
        return [f"log(1/p) >= 25/(alpha-beta)^3 (log D + 3) failed: {log2_inv_p:.6g} < {need:.6g}"]
    return []


def construct_interval_scheme(formula: CspFormula, alpha: float, beta: float,
                              enforce_precondition: bool = True) -> ProjectionScheme:
    check_alpha_beta(alpha, beta)
    q = _homogeneous_q(formula)
    if q == 0:
        return ProjectionScheme((), ())
    if enforce_precondition:
        fails = interval_precondition(q, alpha, beta)
        if fails:
            raise PreconditionViolated("; ".join(fails))
    s = min(q, math.ceil(q ** ((2 - alpha - beta) / 2)))
    return ProjectionScheme(formula.domain_sizes, (s,) * formula.num_vars)


def mark_probability(alpha: float, beta: float) -> float:
    return (2 - alpha - beta) / 2


def marking_window(width: int, alpha: float, beta: float) -> tuple[int, int]:
    """Integer range of marked-variable counts allowed in a constraint of ``width``."""
    lo = math.ceil((1 - alpha) * width - TOL)
    hi = math.floor((1 - beta) * width + TOL)
    return lo, hi


def _moser_tardos(formula: CspFormula, eligible: np.ndarray, prob: float, violated,
                  attempts: int, cap: int, rng: np.random.Generator):
    """Shared resampling loop over variable marks.

    ``violated(marks)`` returns a boolean array over constraints and
    ``eligible`` flags variables whose marks are random.  The lowest-index
    violated constraint is always resampled first.
    """
    elig_idx = np.flatnonzero(eligible)
    scopes = [np.asarray(c.scope, dtype=np.int64) for c in formula.constraints]
    elig_scopes = [sc[eligible[sc]] for sc in scopes]
    for attempt in range(attempts):
        marks = np.zeros(formula.num_vars, dtype=bool)
        if elig_idx.size:
            marks[elig_idx] = rng.random(elig_idx.size) < prob
        resamples = 0
        while True:
            bad = np.flatnonzero(violated(marks))
            if bad.size == 0:
                log.debug("marking found on attempt %d after %d resamples", attempt, resamples)
                return marks
            if resamples >= cap:
                break
            sc = elig_scopes[int(bad[0])]
            if sc.size:
                marks[sc] = rng.random(sc.size) < prob
            resamples += 1
    raise ConstructionFailed(
        f"{attempts} Moser-Tardos attempts each exhausted the cap of {cap} resamples"
    )


def _attempts(delta_fail: float) -> int:
    return max(1, math.ceil(math.log2(1 / delta_fail)))


def construct_marking_scheme(formula: CspFormula, alpha: float, beta: float,
                             delta_fail: float, rng: np.random.Generator,
                             enforce_precondition: bool = True) -> ProjectionScheme:
    """Mark variables so each constraint keeps its marked count inside the window.

    Marked variables keep their full domain, unmarked ones collapse to one
    symbol.  Constraints of unequal width each use their own width in the
    window.
    """
    check_alpha_beta(alpha, beta)
    _homogeneous_q(formula)
    stats = compute_stats(formula)
    if enforce_precondition:
        widths = [c.width for c in formula.constraints]
        fails = marking_precondition(min(widths, default=0), stats.d, alpha, beta)
        if fails:
            raise PreconditionViolated("; ".join(fails))
    windows = np.array([marking_window(c.width, alpha, beta) for c in formula.constraints],
                       dtype=np.int64).reshape(formula.m, 2)
    seg = _segment_ids(formula)
    cons_var = formula.flat.cons_var

    def violated(marks):
        t = np.bincount(seg, weights=marks[cons_var], minlength=formula.m)
        return (t < windows[:, 0]) | (t > windows[:, 1])

    cap = math.ceil(4 * formula.num_vars / max(stats.k, 1))
    marks = _moser_tardos(formula, np.ones(formula.num_vars, dtype=bool),
                          mark_probability(alpha, beta), violated,
                          _attempts(delta_fail), cap, rng)
    return ProjectionScheme.from_marks(formula, marks)


def marked_counts(formula: CspFormula, scheme: ProjectionScheme) -> list[int]:
    """``t_c``: number of variables of each constraint with ``s_v = q_v``."""
    s, q = scheme.alphabet_sizes, scheme.domain_sizes
    return [sum(1 for v in c.scope if s[v] == q[v]) for c in formula.constraints]


def large_variables(formula: CspFormula, alpha: float, beta: float) -> np.ndarray:
    lq = np.log2(np.asarray(formula.domain_sizes, dtype=np.float64))
    return lq >= 5 / (alpha - beta)


def construct_general_scheme(formula: CspFormula, alpha: float, beta: float,
                             delta_fail: float, rng: np.random.Generator,
                             enforce_precondition: bool = True) -> ProjectionScheme:
    """Interval maps on large domains, Moser-Tardos marking on small ones."""
    check_alpha_beta(alpha, beta)
    stats = compute_stats(formula)
    if enforce_precondition:
        fails = general_precondition(stats.log2_inv_p, stats.D, alpha, beta)
        if fails:
            raise PreconditionViolated("; ".join(fails))
    q = np.asarray(formula.domain_sizes, dtype=np.int64)
    large = large_variables(formula, alpha, beta)
    s_large = np.minimum(q, np.ceil(q.astype(np.float64) ** ((2 - alpha - beta) / 2)).astype(np.int64))
    lq = np.log2(q.astype(np.float64))
    fixed_c = np.where(large, np.log2(-(-q // s_large)), 0.0)
    fixed_f = np.where(large, np.log2(q // s_large), 0.0)
    cons_var = formula.flat.cons_var
    seg = _segment_ids(formula)
    m = formula.m
    total = np.bincount(seg, weights=lq[cons_var], minlength=m)

    def violated(marks):
        # unmarked small variables contribute log q to both sums, marked ones 0
        contrib = np.where(large | marks, 0.0, lq)
        csum = np.bincount(seg, weights=(fixed_c + contrib)[cons_var], minlength=m)
        fsum = np.bincount(seg, weights=(fixed_f + contrib)[cons_var], minlength=m)
        return (csum > alpha * total + TOL) | (fsum < beta * total - TOL)

    cap = math.ceil(4 * formula.num_vars / max(stats.k, 1))
    marks = _moser_tardos(formula, ~large, mark_probability(alpha, beta), violated,
                          _attempts(delta_fail), cap, rng)
    s = np.where(large, s_large, np.where(marks, q, 1))
    return ProjectionScheme(formula.domain_sizes, tuple(int(x) for x in s))


def _segment_ids(formula: CspFormula) -> np.ndarray:
    """Constraint index of every entry of the flattened scopes."""
    return np.repeat(np.arange(formula.m), np.diff(formula.flat.cons_ptr))


# -- projected constraints and diagnostics -----------------------------------

def project_forbidden(formula: CspFormula, scheme: ProjectionScheme) -> tuple[tuple[int, ...], ...]:
    """``tau_c = h(F^c)`` for every constraint."""
    return tuple(
        tuple(scheme.evaluate(v, a) for v, a in zip(c.scope, c.forbidden))
        for c in formula.constraints
    )


def build_round_down(formula: CspFormula, scheme: ProjectionScheme, verify: bool = False,
                     budget: int = 10 ** 7) -> CspFormula:
    """The pessimistic projected formula over the alphabets.

    Because every constraint is atomic, the round-down constraint is atomic
    with forbidden tuple ``tau_c``.  With ``verify=True`` each constraint is
    rebuilt by enumerating all projected tuples and their preimages and the
    two constructions are compared.
    """
    taus = project_forbidden(formula, scheme)
    cons = [AtomicConstraint(c.scope, t) for c, t in zip(formula.constraints, taus)]
    if verify:
        work = 0
        for c in formula.constraints:
            work += math.prod(scheme.domain_sizes[v] for v in c.scope)
        if work > budget:
            raise TooLargeToEnumerate(f"round-down verification needs {work} > {budget} evaluations")
        for c, rd in zip(formula.constraints, cons):
            refuted = _enumerated_refutations(c, scheme)
            if refuted != [rd.forbidden]:
                raise AssertionError(f"round-down mismatch for {c}: {refuted}")
    return CspFormula(formula.num_vars, scheme.alphabet_sizes, tuple(cons))


def _enumerated_refutations(c: AtomicConstraint, scheme: ProjectionScheme) -> list[tuple[int, ...]]:
    alph = [range(scheme.alphabet_sizes[v]) for v in c.scope]
    out = []
    for y in itertools.product(*alph):
        pre = [scheme.preimage(v, b) for v, b in zip(c.scope, y)]
        if any(not c.is_satisfied(dict(zip(c.scope, x))) for x in itertools.product(*pre)):
            out.append(tuple(y))
    return out


@dataclass(frozen=True)
class DerivedLLLReport:
    A: float
    B: float
    D: int
    ln_inv_p_original: float
    ln_inv_p_round_down: float
    ln_inv_p_conditional: float
    round_down_rhs: float
    conditional_rhs: float

    @property
    def round_down_ok(self) -> bool:
        return self.ln_inv_p_round_down > self.round_down_rhs

    @property
    def conditional_ok(self) -> bool:
        return self.ln_inv_p_conditional > self.conditional_rhs


def check_derived_lll_conditions(formula: CspFormula, scheme: ProjectionScheme,
                                 alpha: float, beta: float, A: float, B: float) -> DerivedLLLReport:
    """Informational check of the round-down and conditional LLL inequalities.

    Round-down violation probability of ``c`` under ``rho`` is
    ``prod |h_v^{-1}(tau_c[v])| / q_v``; the worst conditional probability
    over pinned projected values is ``prod 1/floor(q_v/s_v)``.
    """
    stats = compute_stats(formula)
    taus = project_forbidden(formula, scheme)
    q, s = scheme.domain_sizes, scheme.alphabet_sizes
    ln_orig = ln_rd = ln_cond = math.inf
    for c, tau in zip(formula.constraints, taus):
        ln_orig = min(ln_orig, sum(math.log(q[v]) for v in c.scope))
        ln_rd = min(ln_rd, sum(math.log(q[v]) - math.log(scheme.preimage_size(v, t))
                               for v, t in zip(c.scope, tau)))
        ln_cond = min(ln_cond, sum(math.log(q[v] // s[v]) for v in c.scope))
    lnD = math.log(stats.D) if stats.D > 0 else 0.0
    base = A * lnD + B
    return DerivedLLLReport(A, B, stats.D, ln_orig, ln_rd, ln_cond,
                            (1 - alpha) * base, beta * base)


def preimage_fraction(scheme: ProjectionScheme, v: int, y: int) -> Fraction:
    """``rho_v(y)``: probability that a uniform value of ``v`` maps to ``y``."""
    return Fraction(scheme.preimage_size(v, y), scheme.domain_sizes[v])


def random_scheme(formula: CspFormula, rng: np.random.Generator) -> ProjectionScheme:
    """Uniformly random alphabet sizes; handy for tests and diagnostics."""
    return ProjectionScheme(formula.domain_sizes,
                            tuple(int(rng.integers(1, q + 1)) for q in formula.domain_sizes))


def scheme_from_sizes(formula: CspFormula, sizes: Sequence[int]) -> ProjectionScheme:
    return ProjectionScheme(formula.domain_sizes, tuple(sizes))
