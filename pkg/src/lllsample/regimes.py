"""Regime inequalities and per-class parameter defaults.

Margins are reported in bits (lhs minus rhs after expressing both sides in
log2 units).  A dependency degree of 0 contributes 0 to every ``log D``
term.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .core import FormulaStats, compute_stats
from .errors import InvalidAlphaBeta, PreconditionViolated
from .projection import (
    construct_general_scheme,
    construct_interval_scheme,
    construct_marking_scheme,
    general_precondition,
    interval_precondition,
    marking_precondition,
)

CLASSES = ("general", "coloring", "cnf")

GENERAL_ZETA_MAX = 2.0 ** -400
CNF_ZETA_MAX = 2.0 ** -20


@dataclass(frozen=True)
class RegimeParams:
    cls: str
    alpha: float
    beta: float
    zeta: float | None

    def eta(self, *, k: int = 0, d: int = 0, delta: int = 0, q: int = 0) -> float:
        if self.cls == "general":
            return self.zeta / 3
        if self.cls == "coloring":
            return 1.0 / (2 ** 9 * float(q * k * delta) ** 4) if q * k * delta else 1.0 / 2 ** 9
        return self.zeta / (3 * float(max(d, 1)) ** 4 * float(max(k, 1)) ** 4)


def default_params(cls: str, zeta: float | None = None) -> RegimeParams:
    if cls == "general":
        return RegimeParams("general", 0.994, 0.577, GENERAL_ZETA_MAX if zeta is None else zeta)
    if cls == "coloring":
        return RegimeParams("coloring", 7 / 9, 2 / 3, None)
    if cls == "cnf":
        return RegimeParams("cnf", 21 / 25, 1 / 2, CNF_ZETA_MAX if zeta is None else zeta)
    raise ValueError(f"unknown instance class {cls!r}; expected one of {CLASSES}")


@dataclass(frozen=True)
class RegimeCheck:
    name: str
    passed: bool
    inequality: str
    lhs: float
    rhs: float
    margin_bits: float
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


def _log2_or_zero(x: float) -> float:
    return math.log2(x) if x > 0 else 0.0


def _check_zeta(zeta: float, upper: float) -> None:
    if not 0 < zeta <= upper:
        raise ValueError(f"zeta must lie in (0, {upper!r}], got {zeta!r}")


def check_general(stats: FormulaStats, zeta: float = GENERAL_ZETA_MAX) -> RegimeCheck:
    """``ln(1/p) >= 350 ln D + 3 ln(1/zeta)``, evaluated in natural log as written."""
    _check_zeta(zeta, GENERAL_ZETA_MAX)
    log2_inv_p = stats.log2_inv_p
    lnD = math.log(stats.D) if stats.D > 0 else 0.0
    lhs = log2_inv_p * math.log(2)
    rhs = 350 * lnD + 3 * math.log(1 / zeta)
    margin = log2_inv_p - 350 * _log2_or_zero(stats.D) - 3 * math.log2(1 / zeta)
    return RegimeCheck(
        name="general",
        passed=lhs >= rhs - 1e-9 if math.isfinite(lhs) else True,
        inequality="ln(1/p) >= 350 ln D + 3 ln(1/zeta)",
        lhs=lhs, rhs=rhs, margin_bits=margin,
        details={"D": stats.D, "log2_inv_p": log2_inv_p, "zeta": zeta},
    )


def coloring_width_constant(k: int) -> float:
    """``(7k)^(9/(k-12))``; at most 15 whenever ``k >= 30``."""
    return (7 * k) ** (9 / (k - 12))


def check_coloring(k: int, delta: int, q: int) -> RegimeCheck:
    """``k >= 13`` and ``q >= max((7 k Delta)^(9/(k-12)), 650)``."""
    details: dict = {"k": k, "Delta": delta, "q": q}
    if k < 13:
        return RegimeCheck("coloring", False, "k >= 13 and q >= max((7k Delta)^(9/(k-12)), 650)",
                           lhs=float(k), rhs=13.0, margin_bits=-math.inf,
                           details={**details, "reason": "k >= 13 failed"})
    log2_q = math.log2(q)
    log2_first = 9 / (k - 12) * _log2_or_zero(7 * k * delta) if delta > 0 else -math.inf
    log2_thr = max(log2_first, math.log2(650))
    margin = log2_q - log2_thr
    if k >= 30:
        simple_thr = 15 * max(delta, 0) ** (9 / (k - 12)) + 650
        details["simplified"] = {
            "inequality": "q >= 15 Delta^(9/(k-12)) + 650",
            "threshold": simple_thr,
            "passed": q >= simple_thr,
            "width_constant": coloring_width_constant(k),
        }
    return RegimeCheck(
        name="coloring",
        passed=margin >= -1e-12,
        inequality="k >= 13 and q >= max((7k Delta)^(9/(k-12)), 650)",
        lhs=log2_q, rhs=log2_thr, margin_bits=margin, details=details,
    )


def check_cnf(k: int, d: int, zeta: float = CNF_ZETA_MAX) -> RegimeCheck:
    """``k >= 13 log d + 13 log k + 3 log(1/zeta)`` (all logs base 2)."""
    _check_zeta(zeta, CNF_ZETA_MAX)
    rhs = 13 * _log2_or_zero(d) + 13 * _log2_or_zero(k) + 3 * math.log2(1 / zeta)
    return RegimeCheck(
        name="cnf", passed=k >= rhs - 1e-12,
        inequality="k >= 13 log d + 13 log k + 3 log(1/zeta)",
        lhs=float(k), rhs=rhs, margin_bits=k - rhs,
        details={"k": k, "d": d, "zeta": zeta},
    )


def cnf_threshold_k(d: int, zeta: float = CNF_ZETA_MAX, k_max: int = 1 << 16) -> int:
    """Smallest clause width ``k`` passing :func:`check_cnf` for degree ``d``."""
    for k in range(1, k_max + 1):
        if check_cnf(k, d, zeta).passed:
            return k
    raise ValueError(f"no k <= {k_max} satisfies the cnf regime")


@dataclass(frozen=True)
class PreconditionReport:
    cls: str
    constructor: str | None
    passed: bool
    failures: dict

    def as_dict(self) -> dict:
        return asdict(self)


def check_projection_precondition(cls: str, stats: FormulaStats, alpha: float,
                                  beta: float) -> PreconditionReport:
    """Evaluate every constructor precondition and pick the one for ``cls``.

    Colorings prefer the deterministic interval scheme and fall back to the
    general scheme; CNF formulas use marking; general formulas use the
    mixed construction.
    """
    if not 0 < beta < alpha < 1:
        raise InvalidAlphaBeta(f"need 0 < beta < alpha < 1, got alpha={alpha}, beta={beta}")
    failures = {
        "interval": (interval_precondition(stats.q, alpha, beta) if stats.homogeneous and stats.q >= 2
                     else ["domains are not homogeneous"]),
        "marking": (marking_precondition(stats.k_min, stats.d, alpha, beta) if stats.homogeneous
                    else ["domains are not homogeneous"]),
        "general": general_precondition(stats.log2_inv_p, stats.D, alpha, beta),
    }
    order = {"coloring": ["interval", "general"], "cnf": ["marking"], "general": ["general"]}[cls]
    for name in order:
        if not failures[name]:
            return PreconditionReport(cls, name, True, failures)
    return PreconditionReport(cls, None, False, failures)


def regime_for_instance(cls: str, stats: FormulaStats, meta: dict, zeta: float | None = None) -> RegimeCheck:
    """Dispatch to the class-specific regime check."""
    if stats.m == 0:
        return RegimeCheck(cls, True, "no constraints", 0.0, 0.0, math.inf,
                           {"reason": "formula without constraints is a product distribution"})
    # widths may vary, so the width inequalities use the narrowest constraint
    if cls == "cnf":
        return check_cnf(stats.k_min, stats.d, CNF_ZETA_MAX if zeta is None else zeta)
    if cls == "coloring":
        return check_coloring(stats.k_min, meta.get("Delta", stats.d // max(stats.q, 1)),
                              stats.q)
    return check_general(stats, GENERAL_ZETA_MAX if zeta is None else zeta)


def scheme_for_class(formula, cls: str, rng, alpha: float | None = None, beta: float | None = None,
                     delta_fail: float = 1e-6, enforce_precondition: bool = True):
    """Build the projection scheme the class calls for, returning ``(scheme, constructor name)``.

    With ``enforce_precondition=False`` the class's first-choice constructor
    runs regardless of its precondition.
    """
    params = default_params(cls)
    alpha = params.alpha if alpha is None else alpha
    beta = params.beta if beta is None else beta
    stats = compute_stats(formula)
    if enforce_precondition:
        report = check_projection_precondition(cls, stats, alpha, beta)
        if not report.passed:
            reasons = "; ".join(f"{k}: {', '.join(v)}" for k, v in report.failures.items() if v)
            raise PreconditionViolated(reasons)
        name = report.constructor
    else:
        name = {"coloring": "interval", "cnf": "marking", "general": "general"}[cls]
    if name == "interval":
        scheme = construct_interval_scheme(formula, alpha, beta, enforce_precondition)
    elif name == "marking":
        scheme = construct_marking_scheme(formula, alpha, beta, delta_fail, rng, enforce_precondition)
    else:
        scheme = construct_general_scheme(formula, alpha, beta, delta_fail, rng, enforce_precondition)
    return scheme, name
