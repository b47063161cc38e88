"""Quasideviations, their axioms, the mean equation and the standard constructions.

A quasideviation ``E(x, u)`` is stored as a vectorised callable on ``I x I``.
Analytic partials are optional; anything missing is estimated with
Richardson-extrapolated difference quotients.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import (
    AxiomViolation,
    ConvergenceError,
    ConvexityPreconditionError,
    NonDifferentiableError,
    NotNormalizableError,
)
from .means_core import GeneratorSpec, Interval, MeanValue, WeightSpec, as_points

BiFn = Callable[[np.ndarray, np.ndarray], np.ndarray]
UFn = Callable[[np.ndarray], np.ndarray]

ROOT_RTOL = 1e-13
ROOT_MAX_ITER = 200
SECANT_STEPS = 5
D3_GRID = 33
EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Quasideviation:
    """A two-variable function ``E`` on ``domain x domain``.

    ``diag_d1`` optionally gives the one-sided first partials on the
    diagonal as a ``(left, right)`` pair of functions of ``u``; ``diag_d2``
    gives ``u -> d2E(u, u)``.  ``mean_convex`` records known Jensen convexity
    of the generated mean (``None`` when unknown).
    """

    eval: BiFn
    domain: Interval
    d1: Optional[BiFn] = None
    d2: Optional[BiFn] = None
    diag_d1: Optional[tuple] = None
    diag_d2: Optional[UFn] = None
    gateaux_on_diagonal: bool = False
    name: str = "E"
    left_scale: float = 1.0
    right_scale: float = 1.0
    mean_convex: Optional[bool] = None
    base: Optional["Quasideviation"] = field(default=None, repr=False)

    def __call__(self, x, u):
        return self.eval(np.asarray(x, dtype=float), np.asarray(u, dtype=float))

    def diagonal_d1(self, u, side: str):
        """One-sided ``d1E(u, u)`` (``side`` is ``"left"`` or ``"right"``), vectorised in ``u``."""
        _check_side(side)
        u = np.asarray(u, dtype=float)
        if self.diag_d1 is not None:
            return np.asarray(self.diag_d1[0 if side == "left" else 1](u), dtype=float)
        if self.d1 is not None:
            return np.asarray(self.d1(u, u), dtype=float)
        return _one_sided_rows(self, u, side)[0]

    def diagonal_d2(self, u):
        u = np.asarray(u, dtype=float)
        if self.diag_d2 is not None:
            return np.asarray(self.diag_d2(u), dtype=float) + 0.0 * u
        if self.d2 is not None:
            return np.asarray(self.d2(u, u), dtype=float)
        return _central_d2_rows(self, u)


@dataclass(frozen=True)
class OneSidedDerivatives:
    left: float
    right: float
    at: float
    left_error: float = 0.0
    right_error: float = 0.0

    @property
    def differ(self) -> bool:
        """Gap exceeds 10x the combined error estimates."""
        return abs(self.right - self.left) > 10.0 * (self.left_error + self.right_error)


@dataclass
class AxiomReport:
    d1_pass: bool
    d2_pass: bool
    d3_pass: bool
    counterexamples: list
    samples_used: int
    seed: int
    d3_ties: int = 0

    @property
    def passed(self) -> bool:
        return self.d1_pass and self.d2_pass and self.d3_pass


def _check_side(side):
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def _step(E: Quasideviation, u, rel=1e-4):
    """Initial difference step, shrunk so ``u +- h`` stays inside the domain."""
    h = rel * (1.0 + np.abs(u))
    room = np.minimum(u - E.domain.lo, E.domain.hi - u)
    return np.minimum(h, 0.5 * room)


def _one_sided_rows(E: Quasideviation, u, side):
    """Richardson-extrapolated one-sided ``d1E(u, u)``; returns (value, error, raw quotients)."""
    u = np.asarray(u, dtype=float)
    h = _step(E, u)
    s = 1.0 if side == "right" else -1.0
    e0 = E(u, u)
    quots = []
    for k in range(3):
        hk = h / 2.0**k
        quots.append(s * (E(u + s * hk, u) - e0) / hk)
    d0, d1, d2 = quots
    r1a = 2.0 * d1 - d0
    r1b = 2.0 * d2 - d1
    r2 = (4.0 * r1b - r1a) / 3.0
    noise = 8.0 * EPS * (np.abs(e0) + np.abs(E(u + s * h, u)) + np.abs(r2) * h) / (h / 4.0)
    err = np.abs(r2 - r1b) + noise
    return r2, err, quots


def one_sided_partial(E: Quasideviation, u: float, side: str = "right") -> tuple[float, float]:
    """One-sided derivative of ``x -> E(x, u)`` at ``x = u``.

    Forward (``"right"``) or backward (``"left"``) quotients at ``h, h/2, h/4``
    with two Richardson levels.  Returns ``(estimate, error_estimate)``.
    Raises :class:`NonDifferentiableError` when the quotients grow instead of
    settling.
    """
    _check_side(side)
    u = float(u)
    if u not in E.domain:
        raise ValueError(f"u={u} outside {E.domain}")
    val, err, (d0, d1, d2) = _one_sided_rows(E, np.array(u), side)
    step1, step2 = abs(float(d1 - d0)), abs(float(d2 - d1))
    floor = float(err) + 1e-8 * (1.0 + abs(float(d2)))
    if step2 > 1.5 * step1 and step2 > floor:
        raise NonDifferentiableError(
            f"{side} difference quotients of {E.name} diverge at u={u}: {float(d0)!r}, {float(d1)!r}, {float(d2)!r}"
        )
    return float(val), float(err)


def one_sided_derivatives(E: Quasideviation, u: float) -> OneSidedDerivatives:
    lv, le = one_sided_partial(E, u, "left")
    rv, re_ = one_sided_partial(E, u, "right")
    return OneSidedDerivatives(left=lv, right=rv, at=float(u), left_error=le, right_error=re_)


def _central_d2_rows(E: Quasideviation, u):
    """Central-difference ``d2E(u, u)`` with two Richardson levels (ratio 4)."""
    u = np.asarray(u, dtype=float)
    h = _step(E, u, rel=1e-3)
    d = [(E(u, u + h / 2.0**k) - E(u, u - h / 2.0**k)) / (2.0 * h / 2.0**k) for k in range(3)]
    r1a = (4.0 * d[1] - d[0]) / 3.0
    r1b = (4.0 * d[2] - d[1]) / 3.0
    return (16.0 * r1b - r1a) / 15.0


# -- constructions ------------------------------------------------------------


def from_bajraktarevic(f: GeneratorSpec, p: WeightSpec) -> Quasideviation:
    """``E(x, u) = p(x) (f(x) - f(u))``, with ``f`` negated first if decreasing."""
    s = 1.0 if f.increasing else -1.0
    fe, pe = f.eval, p.eval

    def E(x, u):
        return s * pe(x) * (fe(x) - fe(u))

    d1 = d2 = diag_d2 = None
    diag_d1 = None
    if f.d1 is not None:
        fd1 = f.d1

        def d2(x, u):
            return -s * pe(x) * fd1(u)

        def diag_d2(u):
            return -s * pe(u) * fd1(u)

        if p.d1 is not None:
            pd1 = p.d1

            def d1(x, u):
                return s * (pd1(x) * (fe(x) - fe(u)) + pe(x) * fd1(x))

        def _diag(u):
            return s * pe(u) * fd1(u)

        diag_d1 = (_diag, _diag)
    return Quasideviation(
        eval=E,
        domain=f.domain,
        d1=d1,
        d2=d2,
        diag_d1=diag_d1,
        diag_d2=diag_d2,
        gateaux_on_diagonal=f.d1 is not None and p.d1 is not None,
        name=f"B[{f.name},{p.name}]",
    )


def difference(f: GeneratorSpec) -> Quasideviation:
    """``E(x, u) = f(x) - f(u)`` for increasing ``f`` (sign-corrected otherwise)."""
    const = WeightSpec(eval=lambda x: np.ones_like(np.asarray(x, dtype=float)), domain=f.domain,
                       d1=np.zeros_like, name="1", family=("const", 1.0))
    return replace(from_bajraktarevic(f, const), name=f"D[{f.name}]")


def scale_split(E: Quasideviation, alpha: float, beta: float) -> Quasideviation:
    """``alpha * E`` on ``x <= u`` and ``beta * E`` on ``x > u``."""
    alpha, beta = float(alpha), float(beta)
    if not (alpha > 0 and beta > 0):
        raise ValueError(f"scales must be positive, got alpha={alpha}, beta={beta}")
    ev = E.eval

    def Eab(x, u):
        v = ev(x, u)
        return np.where(x <= u, alpha * v, beta * v)

    def left(u):
        return alpha * E.diagonal_d1(u, "left")

    def right(u):
        return beta * E.diagonal_d1(u, "right")

    known = None
    if E.mean_convex and alpha <= beta:
        known = True
    elif alpha == beta:
        known = E.mean_convex
    return Quasideviation(
        eval=Eab,
        domain=E.domain,
        diag_d1=(left, right),
        gateaux_on_diagonal=E.gateaux_on_diagonal and alpha == beta,
        name=f"{E.name}[{alpha:g},{beta:g}]",
        left_scale=alpha,
        right_scale=beta,
        mean_convex=known,
        base=E,
    )


def _sample_grid(E: Quasideviation, num: int = 33):
    return E.domain.grid(num, pad=1e-3)


def normalize(E: Quasideviation) -> Quasideviation:
    """``E*(x, u) = -E(x, u) / d2E(u, u)``; the result has ``d2E*(u, u) = -1``."""
    grid = _sample_grid(E)
    dg = E.diagonal_d2(grid)
    if not np.all(np.isfinite(dg)) or np.any(dg >= 0):
        bad = grid[~(dg < 0)][0]
        raise NotNormalizableError(f"d2{E.name}(u,u) is not strictly negative at u={float(bad):g}")
    scale = E.diagonal_d2
    ev = E.eval

    def Estar(x, u):
        return -ev(x, u) / scale(u)

    d1 = None
    if E.d1 is not None:
        ed1 = E.d1

        def d1(x, u):
            return -ed1(x, u) / scale(u)

    diag_d1 = None
    if E.diag_d1 is not None:
        lft, rgt = E.diag_d1
        diag_d1 = (lambda u: -lft(u) / scale(u), lambda u: -rgt(u) / scale(u))
    return Quasideviation(
        eval=Estar,
        domain=E.domain,
        d1=d1,
        diag_d1=diag_d1,
        diag_d2=lambda u: -np.ones_like(np.asarray(u, dtype=float)),
        gateaux_on_diagonal=E.gateaux_on_diagonal,
        name=E.name if E.name.endswith("*") else E.name + "*",
        left_scale=E.left_scale,
        right_scale=E.right_scale,
        mean_convex=E.mean_convex,
        base=E.base,
    )


def normalized_plus(E: Quasideviation, side: str = "right") -> Quasideviation:
    """``E(x, u) / d1^{+-}E(u, u)``: ``E+`` for ``side="right"``, ``E-`` for ``"left"``.

    Raises :class:`ConvexityPreconditionError` when the one-sided derivative
    is not positive at some sampled ``u``; a convex mean requires it.
    """
    _check_side(side)
    grid = _sample_grid(E)
    c = E.diagonal_d1(grid, side)
    if not np.all(c > 0):
        bad = float(grid[~(c > 0)][0])
        raise ConvexityPreconditionError(f"{side} derivative of {E.name} at the diagonal is not positive", at=bad)
    ev = E.eval

    def divisor(u):
        return E.diagonal_d1(u, side)

    def Eplus(x, u):
        return ev(x, u) / divisor(u)

    mark = "+" if side == "right" else "-"
    return Quasideviation(
        eval=Eplus,
        domain=E.domain,
        gateaux_on_diagonal=E.gateaux_on_diagonal,
        name=f"{E.name}{mark}",
        mean_convex=E.mean_convex,
        base=E,
    )


# -- the mean equation --------------------------------------------------------


def deviation_mean(E: Quasideviation, x) -> MeanValue:
    """The unique ``u`` with ``sum_i E(x_i, u) = 0``.

    Sign bisection on ``[min x, max x]`` down to width ``1e-13 (1 + |u|)``,
    then up to five secant steps kept inside the final bracket.
    """
    pts = as_points(x, E.domain)
    lo, hi = float(pts.min()), float(pts.max())
    tag = "deviation"
    if lo == hi:
        return MeanValue(lo, tag, tuple(pts.tolist()))

    def S(u):
        return float(np.sum(E(pts, u)))

    slo, shi = S(lo), S(hi)
    if not (slo > 0 and shi < 0):
        raise AxiomViolation(
            f"sum of {E.name}(x_i, u) does not change sign on [{lo!r}, {hi!r}] "
            f"(values {slo!r}, {shi!r}); not a quasideviation"
        )
    for _ in range(ROOT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if hi - lo <= ROOT_RTOL * (1.0 + abs(mid)) or mid in (lo, hi):
            break
        sm = S(mid)
        if sm > 0:
            lo, slo = mid, sm
        elif sm < 0:
            hi, shi = mid, sm
        else:
            return MeanValue(mid, tag, tuple(pts.tolist()))
    else:
        raise ConvergenceError(f"bisection for {E.name} did not converge in {ROOT_MAX_ITER} iterations")
    best = 0.5 * (lo + hi)
    best_abs = abs(S(best))
    for _ in range(SECANT_STEPS):
        if shi == slo:
            break
        cand = hi - shi * (hi - lo) / (shi - slo)
        if not lo < cand < hi:
            break
        sc = S(cand)
        if abs(sc) >= best_abs:
            break
        best, best_abs = cand, abs(sc)
        if sc > 0:
            lo, slo = cand, sc
        elif sc < 0:
            hi, shi = cand, sc
        else:
            break
    return MeanValue(best, tag, tuple(pts.tolist()))


def deviation_rows(E: Quasideviation, X) -> np.ndarray:
    """Row-wise :func:`deviation_mean` by vectorised bisection (no secant polish)."""
    X = np.asarray(X, dtype=float)
    lo = X.min(axis=1)
    hi = X.max(axis=1)
    const = lo == hi
    live = ~const
    if live.any():
        slo = E(X, lo[:, None]).sum(axis=1)
        shi = E(X, hi[:, None]).sum(axis=1)
        bad = live & ~((slo > 0) & (shi < 0))
        if bad.any():
            row = X[np.flatnonzero(bad)[0]]
            raise AxiomViolation(f"sum of {E.name}(x_i, u) does not change sign for input {row.tolist()!r}")
    lo = lo.copy()
    hi = hi.copy()
    for _ in range(ROOT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        active = live & (hi - lo > ROOT_RTOL * (1.0 + np.abs(mid))) & (mid > lo) & (mid < hi)
        if not active.any():
            break
        s = E(X, mid[:, None]).sum(axis=1)
        lo = np.where(active & (s > 0), mid, lo)
        hi = np.where(active & (s < 0), mid, hi)
        exact = active & (s == 0)
        lo = np.where(exact, mid, lo)
        hi = np.where(exact, mid, hi)
    else:
        raise ConvergenceError(f"bisection for {E.name} did not converge in {ROOT_MAX_ITER} iterations")
    out = 0.5 * (lo + hi)
    out[const] = X[const, 0]
    return out


def deviation_evaluator(E: Quasideviation):
    def evaluate(X):
        return deviation_rows(E, X)

    evaluate.__name__ = f"deviation[{E.name}]"
    return evaluate


# -- axiom checks -------------------------------------------------------------


def check_axioms(E: Quasideviation, budget: int = 3000, seed: int = 0) -> AxiomReport:
    """Falsification-only check of the three quasideviation axioms.

    ``pass`` means no violation was found within ``budget`` samples.  Ties in
    the ratio test are counted in ``d3_ties`` instead of failing it.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    rng = np.random.default_rng(seed)
    lo, hi = E.domain.interior(1e-6)
    width = hi - lo
    examples = []
    n1 = max(1, budget // 3)
    n2 = max(1, budget // 3)
    n3 = max(1, (budget - n1 - n2) // D3_GRID)

    # (D1) sign condition, a quarter of the pairs on the diagonal
    x = rng.uniform(lo, hi, n1)
    u = rng.uniform(lo, hi, n1)
    u[: n1 // 4] = x[: n1 // 4]
    ev = E(x, u)
    bad = np.sign(ev) != np.sign(x - u)
    d1_pass = not bad.any()
    if not d1_pass:
        i = np.flatnonzero(bad)[0]
        examples.append(("D1", (float(x[i]), float(u[i]), float(ev[i]))))

    # (D2) continuity in u: symmetric jumps must shrink with the step
    x = rng.uniform(lo, hi, n2)
    u = rng.uniform(lo, hi, n2)
    u[: n2 // 2] = x[: n2 // 2]
    room = np.minimum(u - E.domain.lo, E.domain.hi - u)
    deltas = [np.minimum(width * 10.0**-k, 0.5 * room) for k in (2, 8)]
    jumps = [np.abs(E(x, u + d) - E(x, u - d)) for d in deltas]
    level = np.abs(E(x, u))
    bad = (jumps[1] > 1e-6 * (1.0 + level)) & (jumps[1] > 0.5 * jumps[0])
    d2_pass = not bad.any()
    if not d2_pass:
        i = np.flatnonzero(bad)[0]
        examples.append(("D2", (float(x[i]), float(u[i]), float(jumps[1][i]))))

    # (D3) u -> E(x,u)/E(y,u) strictly decreasing on (x, y)
    a = rng.uniform(lo, hi, n3)
    b = rng.uniform(lo, hi, n3)
    xs, ys = np.minimum(a, b), np.maximum(a, b)
    keep = ys - xs > 1e-9 * width
    xs, ys = xs[keep], ys[keep]
    k = np.arange(1, D3_GRID + 1) / (D3_GRID + 1.0)
    U = xs[:, None] + (ys - xs)[:, None] * k[None, :]
    R = E(xs[:, None], U) / E(ys[:, None], U)
    dR = np.diff(R, axis=1)
    tol = 1e-12 * (np.abs(R[:, 1:]) + np.abs(R[:, :-1]))
    rising = dR > tol
    ties = np.abs(dR) <= tol
    d3_pass = not rising.any()
    if not d3_pass:
        i, j = np.argwhere(rising)[0]
        examples.append(("D3", (float(xs[i]), float(ys[i]), float(U[i, j]), float(U[i, j + 1]))))

    used = n1 + n2 + int(keep.sum()) * D3_GRID
    return AxiomReport(d1_pass, d2_pass, d3_pass, examples, used, seed, d3_ties=int(ties.any(axis=1).sum()))
