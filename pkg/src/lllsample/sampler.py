"""Projected Glauber dynamics and the inverse-sampling subroutine.

The heavy loops live in :mod:`lllsample._kernels`; this module handles the
schedule arithmetic, argument marshalling, and the per-chain RNG streams.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _kernels as K
from .core import CspFormula, FormulaStats, build_dependency_graph
from .errors import RegimeViolated
from .projection import ProjectionScheme, project_forbidden
from .regimes import default_params, regime_for_instance

log = logging.getLogger(__name__)

EXCEPTION_NAMES = {K.OK: "none", K.GIANT: "giant_component", K.OVERFLOW: "rejection_overflow"}


@dataclass(frozen=True)
class SamplerSchedule:
    eps: float
    T: int
    delta: float
    eta: float
    R: int
    L: int
    seed: int | None = None
    mode: str = "strict"
    overrides: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        d = asdict(self)
        d["overrides"] = list(self.overrides)
        d["warnings"] = list(self.warnings)
        return d


def default_steps(n: int, eps: float) -> int:
    return math.ceil(2 * n * math.log2(n / eps)) if n > 0 else 0


def trial_cap(n: int, delta: float, eta: float) -> int:
    """``R = ceil(10 (n/delta)^eta log(n/delta))``."""
    r = n / delta
    return math.ceil(10 * r ** eta * math.log2(r))


def component_cap(n: int, D: int, delta: float) -> int:
    """``L = ceil(2 D log(n D / delta))``; at least 1 so isolated constraints fit."""
    if D == 0:
        return 1
    return max(1, math.ceil(2 * D * math.log2(n * D / delta)))


def class_eta(cls: str, stats: FormulaStats, meta: dict | None = None,
              zeta: float | None = None) -> float:
    meta = meta or {}
    params = default_params(cls, zeta)
    if cls == "coloring":
        return params.eta(k=meta.get("k", stats.k), delta=meta.get("Delta", 0),
                          q=meta.get("q", stats.q))
    if cls == "cnf":
        return params.eta(k=meta.get("k", stats.k), d=meta.get("d", stats.d))
    return params.eta()


def derive_schedule(stats: FormulaStats, eps: float, cls: str = "general", *,
                    zeta: float | None = None, eta: float | None = None,
                    mode: str = "strict", meta: dict | None = None,
                    T: int | None = None, R: int | None = None, L: int | None = None,
                    seed: int | None = None) -> SamplerSchedule:
    """Fill in T, delta, eta, R and L for an instance of class ``cls``.

    In strict mode the class regime inequality must hold and ``eta`` comes
    from the class formula.  Forced mode accepts any instance and any
    ``eta`` override, recording a warning.
    """
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if mode not in ("strict", "forced"):
        raise ValueError(f"mode must be 'strict' or 'forced', got {mode!r}")
    meta = meta or {}
    warnings: list[str] = []
    overrides: list[str] = []
    regime = regime_for_instance(cls, stats, meta, zeta)
    if not regime.passed:
        if mode == "strict":
            raise RegimeViolated(
                f"{regime.inequality} fails (margin {regime.margin_bits:.4g} bits)"
            )
        warnings.append(f"forced mode: regime {regime.inequality} fails "
                        f"(margin {regime.margin_bits:.4g} bits)")
    if eta is None:
        eta = class_eta(cls, stats, meta, zeta)
    else:
        overrides.append("eta")
        if mode == "strict":
            raise RegimeViolated("an eta override requires forced mode")
        warnings.append(f"forced mode: eta overridden to {eta!r}")
    n = stats.n
    if T is None:
        T = default_steps(n, eps)
    else:
        overrides.append("T")
    delta = eps / (4 * (T + 1))
    if R is None:
        R = trial_cap(max(n, 1), delta, eta)
    else:
        overrides.append("R")
    if L is None:
        L = component_cap(max(n, 1), stats.D, delta)
    else:
        overrides.append("L")
    for w in warnings:
        log.warning(w)
    return SamplerSchedule(eps=eps, T=int(T), delta=delta, eta=eta, R=int(R), L=int(L),
                           seed=seed, mode=mode, overrides=tuple(overrides),
                           warnings=tuple(warnings))


@dataclass(frozen=True)
class PartialProjectedConfig:
    """Projected values ``y`` on the support ``Lambda`` (entries off the support are ignored)."""

    values: np.ndarray
    support: np.ndarray

    @classmethod
    def full(cls, values) -> "PartialProjectedConfig":
        values = np.asarray(values, dtype=np.int64)
        return cls(values, np.ones(values.shape[0], dtype=bool))

    @classmethod
    def without(cls, values, v: int) -> "PartialProjectedConfig":
        cfg = cls.full(values)
        cfg.support[v] = False
        return cfg

    def __post_init__(self):
        object.__setattr__(self, "values", np.ascontiguousarray(self.values, dtype=np.int64))
        object.__setattr__(self, "support", np.ascontiguousarray(self.support, dtype=np.bool_))


@dataclass(frozen=True)
class Component:
    variables: tuple[int, ...]
    constraints: tuple[int, ...]


class GiantComponent:
    """Returned by :func:`factorize` when a component exceeds ``L`` constraints."""

    def __repr__(self):
        return "GiantComponent()"


@dataclass(frozen=True)
class SampleOutcome:
    values: np.ndarray  # values on S, in the order S was given
    exception: str
    components: int
    trials: int
    scanned: int


@dataclass
class RunReport:
    assignment: np.ndarray
    giant: int
    overflow: int
    calls: int
    scanned: int
    trials: int
    max_scanned_step: int
    wall_time: float
    schedule: SamplerSchedule | None = None
    chain: int = 0

    @property
    def exceptions(self) -> int:
        return self.giant + self.overflow

    def as_dict(self) -> dict:
        return {
            "chain": self.chain, "assignment": [int(a) for a in self.assignment],
            "giant_component": self.giant, "rejection_overflow": self.overflow,
            "calls": self.calls, "scanned": self.scanned, "trials": self.trials,
        }


class SamplerContext:
    """Formula, scheme, and projected forbidden tuples flattened for the kernels.

    Owns reusable workspace arrays, so one context must not be shared by
    concurrently running chains.
    """

    def __init__(self, formula: CspFormula, scheme: ProjectionScheme):
        self.formula = formula
        self.scheme = scheme
        f = formula.flat
        self.f = f
        self.s = scheme.s_array
        taus = project_forbidden(formula, scheme)
        self.tau = np.fromiter((t for tau in taus for t in tau), dtype=np.int64,
                               count=int(f.cons_ptr[-1]))
        n, m = formula.num_vars, formula.m
        self.cmark = np.zeros(m, dtype=np.int64)
        self.vmark = np.zeros(n, dtype=np.int64)
        self.stamp = np.zeros(1, dtype=np.int64)
        self.stack = np.zeros(max(m, 1), dtype=np.int64)
        self.comp_cons = np.zeros(max(m, 1), dtype=np.int64)
        self.comp_vars = np.zeros(max(n, 1), dtype=np.int64)
        self.comp_cptr = np.zeros(n + 1, dtype=np.int64)
        self.comp_vptr = np.zeros(n + 1, dtype=np.int64)
        self.x = np.zeros(n, dtype=np.int64)
        self.in_lam = np.ones(n, dtype=np.bool_)
        self.seed = np.zeros(1, dtype=np.int64)
        self.everyone = np.arange(n, dtype=np.int64)
        self.step_stats = np.zeros(K.N_STATS, dtype=np.int64)

    @property
    def workspace(self):
        return (self.cmark, self.vmark, self.stamp, self.stack,
                self.comp_cons, self.comp_vars, self.comp_cptr, self.comp_vptr)

    @property
    def head(self):
        f = self.f
        return (f.cons_ptr, f.cons_var, self.tau, f.cons_forb, f.var_ptr, f.var_cons,
                f.adj_ptr, f.adj, f.q, self.s)


def _seeds(S) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(list(S), dtype=np.int64))


def is_satisfied_by_projection(constraint, tau_c, y: PartialProjectedConfig) -> bool:
    """True iff some pinned scope variable carries a symbol different from ``tau_c``.

    An empty intersection of the scope with the support gives ``False``.
    """
    return any(y.support[v] and y.values[v] != t for v, t in zip(constraint.scope, tau_c))


def factorize(formula: CspFormula, scheme: ProjectionScheme, y: PartialProjectedConfig,
              S: Sequence[int], L: int, ctx: SamplerContext | None = None):
    """Components of the constraints not satisfied by ``y`` that meet ``S``.

    Returns a list of :class:`Component` or a :class:`GiantComponent`
    marker, plus the statistics array ``[components, trials, scanned, constraints]``.
    """
    ctx = ctx or SamplerContext(formula, scheme)
    f = ctx.f
    stats = np.zeros(K.N_STATS, dtype=np.int64)
    code, ncomp = K.factorize(f.cons_ptr, f.cons_var, ctx.tau, f.var_ptr, f.var_cons,
                              f.adj_ptr, f.adj, y.values, y.support, _seeds(S), L,
                              *ctx.workspace, stats)
    if code == K.GIANT:
        return GiantComponent(), stats
    comps = []
    for i in range(ncomp):
        vs = ctx.comp_vars[ctx.comp_vptr[i]:ctx.comp_vptr[i + 1]]
        cs = ctx.comp_cons[ctx.comp_cptr[i]:ctx.comp_cptr[i + 1]]
        comps.append(Component(tuple(int(v) for v in vs), tuple(int(c) for c in cs)))
    return comps, stats


def rejection_sample_component(formula: CspFormula, scheme: ProjectionScheme,
                               component: Component, y: PartialProjectedConfig, R: int,
                               rng: np.random.Generator):
    """Values on ``component.variables`` (as a dict) or ``None`` on overflow."""
    ctx = SamplerContext(formula, scheme)
    f = ctx.f
    comp_vars = np.asarray(component.variables, dtype=np.int64)
    comp_cons = np.asarray(component.constraints, dtype=np.int64)
    x = np.zeros(formula.num_vars, dtype=np.int64)
    stats = np.zeros(K.N_STATS, dtype=np.int64)
    ok = K.rejection_sample(0, comp_cons.size, 0, comp_vars.size,
                            comp_cons if comp_cons.size else np.zeros(1, np.int64),
                            comp_vars if comp_vars.size else np.zeros(1, np.int64),
                            f.cons_ptr, f.cons_var, f.cons_forb, f.q, ctx.s,
                            y.values, y.support, R, x, rng, stats)
    if not ok:
        return None
    return {int(v): int(x[v]) for v in comp_vars}


def inverse_sample(formula: CspFormula, scheme: ProjectionScheme, schedule: SamplerSchedule,
                   y: PartialProjectedConfig, S: Sequence[int], rng: np.random.Generator,
                   ctx: SamplerContext | None = None) -> SampleOutcome:
    """Draw ``X_S`` from the solutions whose projection agrees with ``y`` on its support."""
    ctx = ctx or SamplerContext(formula, scheme)
    seeds = _seeds(S)
    if seeds.size == 0:
        raise ValueError("S must be nonempty")
    x = np.zeros(formula.num_vars, dtype=np.int64)
    stats = np.zeros(K.N_STATS, dtype=np.int64)
    code = K.inverse_sample(*ctx.head, y.values, y.support, seeds, schedule.L, schedule.R,
                            rng, x, *ctx.workspace, stats)
    return SampleOutcome(values=x[seeds].copy(), exception=EXCEPTION_NAMES[code],
                         components=int(stats[K.ST_COMPONENTS]),
                         trials=int(stats[K.ST_TRIALS]), scanned=int(stats[K.ST_SCANNED]))


def inverse_sample_many(formula: CspFormula, scheme: ProjectionScheme, schedule: SamplerSchedule,
                        y: PartialProjectedConfig, S: Sequence[int], N: int,
                        rng: np.random.Generator, ctx: SamplerContext | None = None):
    """``N`` independent subroutine calls; returns ``(values[N, |S|], exception codes[N])``."""
    ctx = ctx or SamplerContext(formula, scheme)
    seeds = _seeds(S)
    out = np.zeros((N, seeds.size), dtype=np.int64)
    codes = np.zeros(N, dtype=np.int64)
    stats = np.zeros(K.N_STATS, dtype=np.int64)
    K.inverse_sample_batch(*ctx.head, y.values, y.support, seeds, schedule.L, schedule.R,
                           rng, N, out, codes, ctx.x, *ctx.workspace, stats)
    return out, codes


def run_glauber(formula: CspFormula, scheme: ProjectionScheme, schedule: SamplerSchedule,
                rng: np.random.Generator, ctx: SamplerContext | None = None,
                chain: int = 0) -> RunReport:
    """One run: uniform start, ``T`` single-site updates of ``Y``, then full inversion."""
    ctx = ctx or SamplerContext(formula, scheme)
    n = formula.num_vars
    x = np.zeros(n, dtype=np.int64)
    y = np.zeros(n, dtype=np.int64)
    counts = np.zeros(3, dtype=np.int64)
    stats = np.zeros(K.N_STATS, dtype=np.int64)
    max_scanned = np.zeros(1, dtype=np.int64)
    t0 = time.perf_counter()
    K.run_chain(*ctx.head, schedule.T, schedule.L, schedule.R, rng, x, y, counts, stats,
                max_scanned, ctx.in_lam, ctx.seed, ctx.everyone, ctx.step_stats,
                *ctx.workspace)
    wall = time.perf_counter() - t0
    return RunReport(assignment=x, giant=int(counts[K.GIANT]), overflow=int(counts[K.OVERFLOW]),
                     calls=int(counts.sum()), scanned=int(stats[K.ST_SCANNED]),
                     trials=int(stats[K.ST_TRIALS]), max_scanned_step=int(max_scanned[0]),
                     wall_time=wall, schedule=schedule, chain=chain)


# -- independent chains --------------------------------------------------------

def chain_seed_sequence(master: int, index: int) -> np.random.SeedSequence:
    """Seed sequence of chain ``index``; the spawn key makes streams distinct per index."""
    return np.random.SeedSequence(entropy=master, spawn_key=(index,))


def chain_rng(master: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(chain_seed_sequence(master, index)))


def _run_range(formula, scheme, schedule, master, start, stop):
    ctx = SamplerContext(formula, scheme)
    return [run_glauber(formula, scheme, schedule, chain_rng(master, i), ctx, chain=i)
            for i in range(start, stop)]


def run_many(formula: CspFormula, scheme: ProjectionScheme, schedule: SamplerSchedule,
             N: int, workers: int = 1, seed: int | None = None) -> list[RunReport]:
    """``N`` independent chains; chain ``i`` uses ``chain_rng(seed, i)``.

    The result does not depend on ``workers``: chains are split into
    contiguous index blocks and reassembled in index order.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    master = schedule.seed if seed is None else seed
    if master is None:
        master = 0
    if workers <= 1 or N == 1:
        return _run_range(formula, scheme, schedule, master, 0, N)
    blocks = np.array_split(np.arange(N), min(workers, N))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_range, formula, scheme, schedule, master,
                               int(b[0]), int(b[-1]) + 1) for b in blocks if b.size]
        out: list[RunReport] = []
        for fut in futures:
            out.extend(fut.result())
    return out


def sample_assignments(formula: CspFormula, scheme: ProjectionScheme, schedule: SamplerSchedule,
                       N: int, seed: int, workers: int = 1) -> tuple[np.ndarray, dict]:
    """Final assignments of ``N`` chains as an ``(N, n)`` array plus exception totals."""
    reports = run_many(formula, scheme, schedule, N, workers, seed)
    X = np.stack([r.assignment for r in reports]) if reports else np.zeros((0, formula.num_vars))
    totals = {
        "giant_component": sum(r.giant for r in reports),
        "rejection_overflow": sum(r.overflow for r in reports),
        "calls": sum(r.calls for r in reports),
        "chains_with_exception": sum(1 for r in reports if r.exceptions),
    }
    return X, totals


def invert_many(scheme: ProjectionScheme, v: int, y: int, N: int,
                rng: np.random.Generator) -> np.ndarray:
    """``N`` kernel draws from ``h_v^{-1}(y)``."""
    q, s = scheme.domain_sizes[v], scheme.alphabet_sizes[v]
    if not 0 <= y < s:
        raise ValueError(f"symbol {y} not in alphabet of size {s}")
    out = np.zeros(N, dtype=np.int64)
    K.invert_batch(q, s, y, rng, N, out)
    return out
