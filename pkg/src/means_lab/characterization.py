"""Analytic Jensen-convexity deciders for the mean families.

Each decider returns a :class:`~means_lab.convexity_lab.ConvexityVerdict`
whose ``method`` names the rule that fired.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .convexity_lab import (
    BajraktarevicMap,
    ConvexityVerdict,
    SearchBudget,
    Status,
    bivariate_convexity_test,
)
from .errors import ConvexityPreconditionError, DomainError, NonDifferentiableError
from .means_core import EQUAL_EXPONENT_TOL, GeneratorSpec, Interval, WeightSpec
from .quasideviation import Quasideviation, one_sided_derivatives

GAMMA_GRID = 1025
ZERO_RTOL = 1e-10
DEFAULT_BUDGET = SearchBudget(max_samples=20_000, n_vars=2, seed=0)

CONVEX = Status.CONVEX
NOT_CONVEX = Status.NOT_CONVEX
INCONCLUSIVE = Status.INCONCLUSIVE


def _verdict(status, method, **detail):
    return ConvexityVerdict(status, None, method, 0, None, detail)


# -- Gini auxiliaries ---------------------------------------------------------


def _positive(t):
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise DomainError("t must be positive")
    return t


def _expm1_ratio(d, L):
    """``(exp(d L) - 1) / d`` with the ``d -> 0`` limit ``L``."""
    if abs(d) < EQUAL_EXPONENT_TOL:
        return L
    return np.expm1(d * L) / d


def gamma(q: float, r: float, t):
    """``(t^q - t^r)/(q - r)``, or ``t^q log t`` when ``q == r``."""
    t = _positive(t)
    d = q - r
    L = np.log(t)
    if abs(d) < EQUAL_EXPONENT_TOL:
        out = t**q * L
    else:
        direct = (t**q - t**r) / d
        # cancellation-free form where d*log t is small
        stable = t**r * _expm1_ratio(d, L)
        out = np.where(np.abs(d * L) < 0.5, stable, direct)
    return out[()] if out.ndim == 0 else out


def gamma_second_derivative(q: float, r: float, t):
    """Second derivative of :func:`gamma`, continuous across ``q == r``."""
    t = _positive(t)
    d = q - r
    L = np.log(t)
    out = t ** (r - 2.0) * (q * (q - 1.0) * _expm1_ratio(d, L) + (q + r - 1.0))
    if abs(d) < EQUAL_EXPONENT_TOL:
        out = t ** (q - 2.0) * (q * (q - 1.0) * L + 2.0 * q - 1.0)
    return out[()] if np.ndim(out) == 0 else out


def beta(q: float, r: float) -> Optional[float]:
    """Threshold ratio for Gini convexity on subintervals; ``None`` where undefined."""
    if abs(q - r) < EQUAL_EXPONENT_TOL:
        if q * (q - 1.0) == 0:
            return None
        return math.exp(1.0 / q + 1.0 / (q - 1.0))
    if q * r * (q - 1.0) * (r - 1.0) <= 0:
        return None
    num, den = q * (q - 1.0), r * (r - 1.0)
    # orient the ratio above 1 so an integer ratio with exponent +-1 stays exact
    if num >= den:
        return (num / den) ** (1.0 / (q - r))
    return (den / num) ** (1.0 / (r - q))


def pq_difference(q: float, r: float, t):
    """``q(q-1) t^(q-2) - r(r-1) t^(r-2)``."""
    t = _positive(t)
    return q * (q - 1.0) * t ** (q - 2.0) - r * (r - 1.0) * t ** (r - 2.0)


@dataclass(frozen=True)
class GiniDecision:
    verdict: ConvexityVerdict
    case_label: str
    beta_value: Optional[float] = None
    gamma_second_derivative_min: Optional[float] = None

    @property
    def status(self) -> Status:
        return self.verdict.status


def decision_margin(q: float, r: float, a: float, b: float) -> float:
    """Relative distance of ``beta_{q,r}`` from the nearer of ``b/a`` and ``a/b`` (inf if undefined)."""
    bv = beta(q, r)
    if bv is None:
        return math.inf
    return min(abs(bv - b / a) / (b / a), abs(bv - a / b) / (a / b))


def decide_gini_subinterval(q: float, r: float, a: float, b: float) -> GiniDecision:
    """Jensen convexity of the Gini mean on ``(a, b)``, all arities."""
    if not (0 < a < b < math.inf):
        raise DomainError(f"need 0 < a < b < inf, got a={a}, b={b}")
    hi, lo = max(q, r), min(q, r)
    bv = beta(hi, lo)
    ts = np.linspace(a / b, b / a, GAMMA_GRID)
    gmin = float(np.min(gamma_second_derivative(hi, lo, ts)))
    ratio = b / a

    def out(status, label):
        rule = f"gini-subinterval:{label}"
        v = _verdict(status, rule, q=q, r=r, a=a, b=b)
        return GiniDecision(v, label, bv, gmin)

    if 0 <= lo <= 1 <= hi:
        return out(CONVEX, "global-(1)")
    if bv is not None:
        if hi < 1 <= hi + lo and bv <= a / b:
            return out(CONVEX, "case-(2)")
        if lo <= 0 and 1 <= hi + lo and bv >= ratio:
            return out(CONVEX, "case-(3)")
        if 1 <= lo and bv >= ratio:
            return out(CONVEX, "case-(4)")
    return out(NOT_CONVEX, "not-convex")


def decide_gini_global(q: float, r: float) -> ConvexityVerdict:
    """All-arity Jensen convexity of the Gini mean on the positive reals."""
    ok = 0 <= min(q, r) <= 1 <= max(q, r)
    return _verdict(CONVEX if ok else NOT_CONVEX, "gini-global", q=q, r=r)


def decide_gini_two_variable(q: float, r: float) -> ConvexityVerdict:
    """Two-variable Gini mean on the positive reals."""
    ok = 0 <= min(q, r) <= 1 <= q + r
    return _verdict(CONVEX if ok else NOT_CONVEX, "gini-two-variable", q=q, r=r)


def decide_holder(p: float) -> ConvexityVerdict:
    return _verdict(CONVEX if p >= 1 else NOT_CONVEX, "holder:p>=1", p=p)


# -- quasiarithmetic ----------------------------------------------------------


def decide_quasiarithmetic(f: GeneratorSpec, domain: Optional[Interval] = None,
                           budget: Optional[SearchBudget] = None) -> ConvexityVerdict:
    """Classify ``f''`` on a grid, then test ``f'/f''`` for positivity and convexity.

    ``f''`` counts as zero where ``|f''| < 1e-10 (1 + |f'|)``.  A grid that is
    partly zero without a sign change is reported Inconclusive.
    """
    if f.d1 is None or f.d2 is None:
        raise ValueError(f"generator {f.name} needs d1 and d2")
    domain = domain or f.domain
    budget = budget or DEFAULT_BUDGET
    t = domain.grid(GAMMA_GRID)
    g1 = np.asarray(f.d1(t), dtype=float)
    g2 = np.asarray(f.d2(t), dtype=float)
    if np.any(g1 == 0) or np.any(np.sign(g1[1:]) != np.sign(g1[:-1])):
        at = float(t[np.argmin(np.abs(g1))])
        raise ConvexityPreconditionError(f"f' vanishes near {at:g}", at=at)
    tol = ZERO_RTOL * (1.0 + np.abs(g1))
    pos, neg = g2 > tol, g2 < -tol
    if not (pos.any() or neg.any()):
        return _verdict(CONVEX, "qa:f''=0")
    if pos.any() and neg.any():
        return _verdict(NOT_CONVEX, "qa:f''-sign-change")
    if not (pos.all() or neg.all()):
        return _verdict(INCONCLUSIVE, "qa:f''-dead-zone")
    ratio = g1 / g2
    if np.any(ratio <= 0):
        return _verdict(NOT_CONVEX, "qa:f'/f''-not-positive", at=float(t[ratio <= 0][0]))
    d1, d2 = f.d1, f.d2

    def phi(x, u):
        return np.asarray(d1(x), dtype=float) / np.asarray(d2(x), dtype=float)

    chord = bivariate_convexity_test(phi, (domain, Interval(0.0, 1.0)), budget)
    if chord.not_convex:
        return ConvexityVerdict(NOT_CONVEX, chord.witness, "qa:f'/f''-not-convex", chord.samples_used,
                                chord.seed)
    return ConvexityVerdict(CONVEX, None, "qa:f'/f''-positive-convex", chord.samples_used, chord.seed)


# -- quasideviation constructions ---------------------------------------------


def _diagonal_quotients_agree(E: Quasideviation, points: int = 3) -> bool:
    """Left and right ``d1E(u, u)`` match at a few interior diagonal points."""
    lo, hi = E.domain.interior()
    for u in np.linspace(lo, hi, points + 2)[1:-1]:
        try:
            if one_sided_derivatives(E, float(u)).differ:
                return False
        except NonDifferentiableError:
            return False
    return True


def decide_scale_split(base: Quasideviation, alpha: float, beta: float,
                       base_convex: Optional[bool] = None) -> ConvexityVerdict:
    """Convexity of the mean of the piecewise-scaled quasideviation.

    ``base_convex`` overrides ``base.mean_convex``.  The "only if" direction
    needs ``base.gateaux_on_diagonal``; that flag is the caller's claim and
    is only sanity-checked against one-sided difference quotients.
    """
    if not (alpha > 0 and beta > 0):
        raise ValueError("scales must be positive")
    known = base.mean_convex if base_convex is None else base_convex
    smooth = base.gateaux_on_diagonal and _diagonal_quotients_agree(base)
    info = dict(alpha=alpha, beta=beta, base_convex=known, smooth=smooth,
                smooth_asserted=base.gateaux_on_diagonal)
    if alpha == beta:
        status = {True: CONVEX, False: NOT_CONVEX, None: INCONCLUSIVE}[known]
        return _verdict(status, "scale-split:uniform", **info)
    if known and alpha <= beta:
        return _verdict(CONVEX, "scale-split:convex-and-alpha<=beta", **info)
    if smooth and (known is False or alpha > beta):
        return _verdict(NOT_CONVEX, "scale-split:iff", **info)
    return _verdict(INCONCLUSIVE, "scale-split:undetermined", **info)


def decide_corollary_generator(f: GeneratorSpec, alpha: float, beta: float,
                               domain: Optional[Interval] = None,
                               budget: Optional[SearchBudget] = None) -> ConvexityVerdict:
    """Piecewise-scaled ``f(x) - f(u)``: convex iff ``alpha <= beta`` and the quasiarithmetic test passes."""
    if not (alpha > 0 and beta > 0):
        raise ValueError("scales must be positive")
    if alpha > beta:
        return _verdict(NOT_CONVEX, "corollary:alpha>beta", alpha=alpha, beta=beta)
    qa = decide_quasiarithmetic(f, domain, budget)
    return ConvexityVerdict(qa.status, qa.witness, "corollary:" + qa.method, qa.samples_used, qa.seed,
                            {"alpha": alpha, "beta": beta})


# -- Bajraktarević ------------------------------------------------------------


def _gini_exponents(f: GeneratorSpec, p: WeightSpec):
    """``(q, r)`` when ``(f, p)`` is a catalog pair generating a Gini mean."""
    ff, pf = f.family, p.family
    if ff is None or pf is None:
        return None
    if pf[0] == "const":
        r = 0.0
    elif pf[0] == "power":
        r = pf[1]
    else:
        return None
    if ff[0] == "power":
        return ff[1] + r, r
    if ff[0] == "log":
        return r, r
    return None


def decide_bajraktarevic(f: GeneratorSpec, p: WeightSpec, domain: Optional[Interval] = None,
                         budget: Optional[SearchBudget] = None) -> ConvexityVerdict:
    """Sample the two-variable map ``B_{f,p}`` for non-convexity, then apply closed forms.

    A sampled witness is definitive.  Without one the verdict is Convex or
    NotConvex only through a registered reduction (constant weight, or a
    Gini pair); otherwise Inconclusive.
    """
    domain = domain or f.domain
    budget = budget or DEFAULT_BUDGET
    B = BajraktarevicMap(f, p)
    B.require_nonvanishing(domain)
    sampled = bivariate_convexity_test(B, domain, budget)
    if sampled.not_convex:
        return ConvexityVerdict(NOT_CONVEX, sampled.witness, "bajraktarevic:B-not-convex", sampled.samples_used,
                                sampled.seed, sampled.detail)
    used, seed = sampled.samples_used, sampled.seed
    if p.family is not None and p.family[0] == "const" and f.d2 is not None:
        qa = decide_quasiarithmetic(f, domain, budget)
        return ConvexityVerdict(qa.status, qa.witness, "bajraktarevic->" + qa.method, used + qa.samples_used, seed)
    qr = _gini_exponents(f, p)
    if qr is not None and domain.lo >= 0:
        q, r = qr
        if domain.lo > 0 and math.isfinite(domain.hi):
            g = decide_gini_subinterval(q, r, domain.lo, domain.hi)
            return ConvexityVerdict(g.status, None, "bajraktarevic->" + g.verdict.method, used, seed,
                                    {"q": q, "r": r, "beta": g.beta_value, "case_label": g.case_label})
        g = decide_gini_global(q, r)
        return ConvexityVerdict(g.status, None, "bajraktarevic->gini-global", used, seed, {"q": q, "r": r})
    return ConvexityVerdict(INCONCLUSIVE, None, "sampling", used, seed, sampled.detail)
