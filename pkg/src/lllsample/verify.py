"""Oracle-backed checks run by ``lllsample verify`` on a small instance."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chisquare

from .core import CspFormula
from .oracle import (
    enumerate_solutions,
    exact_conditional,
    exact_glauber_matrix,
    exact_projected,
    nu_single_site,
    pushforward_single_site,
    tv_distance,
)
from .projection import ProjectionScheme
from .sampler import (
    PartialProjectedConfig,
    SamplerContext,
    SamplerSchedule,
    inverse_sample_many,
    invert_many,
    sample_assignments,
)

P_THRESHOLD = 1e-3


@dataclass
class CriterionResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        extras = ", ".join(f"{k}={_fmt(v)}" for k, v in self.detail.items())
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}" + (f" ({extras})" if extras else "")


def _fmt(v):
    return f"{v:.4g}" if isinstance(v, float) else str(v)


def _counts(rows) -> Counter:
    return Counter(tuple(int(a) for a in r) for r in rows)


def check_inverse_sampler(formula: CspFormula, scheme: ProjectionScheme, exact, rng,
                          draws: int, conditionings: int = 4) -> CriterionResult:
    """Conditioned on no exception, subroutine output matches the exact conditional law."""
    n = formula.num_vars
    big = SamplerSchedule(eps=0.5, T=0, delta=0.0, eta=0.0, R=10 ** 6, L=formula.m + 1)
    ctx = SamplerContext(formula, scheme)
    proj = exact.projected_solutions(scheme)
    worst_tv, worst_p, accepted_min = 0.0, 1.0, draws
    for _ in range(conditionings):
        y = proj[rng.integers(exact.count)]
        v = int(rng.integers(n))
        for cfg, S in ((PartialProjectedConfig.without(y, v), [v]),
                       (PartialProjectedConfig.full(y), list(range(n)))):
            ref = exact_conditional(formula, scheme, cfg.values, cfg.support, S, exact=exact)
            out, codes = inverse_sample_many(formula, scheme, big, cfg, S, draws, rng, ctx)
            ok = out[codes == 0]
            accepted_min = min(accepted_min, ok.shape[0])
            if ok.shape[0] == 0:
                return CriterionResult("inverse_sampler_exactness", False, {"accepted": 0})
            rep = tv_distance(_counts(ok), ref)
            worst_tv = max(worst_tv, rep.tv)
            worst_p = min(worst_p, rep.p_value)
    return CriterionResult("inverse_sampler_exactness", worst_p >= P_THRESHOLD,
                           {"min_p": worst_p, "max_tv": worst_tv, "accepted": accepted_min})


def check_oracle_paths(formula: CspFormula, scheme: ProjectionScheme, exact, rng,
                       pairs: int = 10) -> CriterionResult:
    """Single-site conditionals of ``nu`` agree with the pushforward of ``mu``'s, exactly."""
    nu = exact_projected(formula, scheme, exact=exact)
    states = sorted(nu)
    mismatches = 0
    for _ in range(pairs):
        y = states[rng.integers(len(states))]
        v = int(rng.integers(formula.num_vars))
        if nu_single_site(nu, v, y) != pushforward_single_site(formula, scheme, v, y, exact):
            mismatches += 1
    return CriterionResult("oracle_path_consistency", mismatches == 0,
                           {"pairs": pairs, "mismatches": mismatches})


def check_stationarity(formula: CspFormula, scheme: ProjectionScheme, exact,
                       max_states: int = 2000) -> CriterionResult:
    nu = exact_projected(formula, scheme, exact=exact)
    if len(nu) > max_states:
        return CriterionResult("stationarity", True, {"skipped": f"{len(nu)} states"})
    chain = exact_glauber_matrix(formula, scheme, exact=exact, max_states=max_states)
    balance = chain.detailed_balance_error()
    residual = chain.stationary_residual()
    return CriterionResult("stationarity", balance <= 1e-12 and residual <= 1e-10,
                           {"states": len(nu), "balance": balance, "residual": residual})


def check_inversion(scheme: ProjectionScheme, rng, draws: int) -> CriterionResult:
    """Preimage draws are uniform for every ``(v, y)``; failing pairs get one rerun."""
    tested = rejected = 0
    for v in range(scheme.n):
        for y in range(scheme.alphabet_sizes[v]):
            pre = scheme.preimage(v, y)
            if len(pre) == 1:
                continue
            tested += 1
            for attempt in range(2):
                out = invert_many(scheme, v, y, draws, rng)
                if out.min() < pre.start or out.max() >= pre.stop:
                    return CriterionResult("inversion_uniformity", False,
                                           {"variable": v, "symbol": y, "reason": "outside preimage"})
                obs = np.bincount(out - pre.start, minlength=len(pre))
                if chisquare(obs).pvalue >= P_THRESHOLD:
                    break
            else:
                rejected += 1
    return CriterionResult("inversion_uniformity", rejected == 0,
                           {"pairs": tested, "rejected": rejected})


def check_end_to_end(formula: CspFormula, scheme: ProjectionScheme, exact, seed: int,
                     chains: int, workers: int = 1) -> CriterionResult:
    n = formula.num_vars
    T = math.ceil(50 * n * math.log2(n)) if n > 1 else 50
    delta = 0.01 / (4 * (T + 1))
    schedule = SamplerSchedule(eps=0.01, T=T, delta=delta, eta=0.0, R=1000,
                               L=formula.m + 1, seed=seed, mode="forced")
    X, totals = sample_assignments(formula, scheme, schedule, chains, seed, workers)
    rep = tv_distance(_counts(X), exact.mu)
    return CriterionResult("end_to_end", rep.p_value >= P_THRESHOLD,
                           {"tv": rep.tv, "p": rep.p_value, "chains": chains, "T": T,
                            "exceptions": totals["giant_component"] + totals["rejection_overflow"]})


def run_battery(formula: CspFormula, scheme: ProjectionScheme, seed: int = 0,
                draws: int = 20000, chains: int = 2000, workers: int = 1,
                budget: int = 10 ** 7) -> list[CriterionResult]:
    """All checks; raises ``NoSolutions`` for an unsatisfiable formula."""
    rng = np.random.default_rng(seed)
    exact = enumerate_solutions(formula, budget)
    exact_projected(formula, scheme, exact=exact)  # raises NoSolutions early
    return [
        check_inverse_sampler(formula, scheme, exact, rng, draws),
        check_oracle_paths(formula, scheme, exact, rng),
        check_stationarity(formula, scheme, exact),
        check_inversion(scheme, rng, draws),
        check_end_to_end(formula, scheme, exact, seed, chains, workers),
    ]
