"""Concrete mean families: Hölder, quasiarithmetic, Gini and Bajraktarević.

Scalar entry points (``holder_mean`` and friends) validate their input and
return a :class:`MeanValue`.  The ``*_evaluator`` factories build batched
callables ``X -> values`` over arrays of shape ``(m, n)``; those are what the
convexity falsifiers consume.

Functions stored in :class:`GeneratorSpec` / :class:`WeightSpec` must accept
numpy arrays elementwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .errors import DomainError, InversionError

EQUAL_EXPONENT_TOL = kernels.EQUAL_EXPONENT_TOL
INVERSION_RTOL = 1e-13
INVERSION_MAX_ITER = 200

ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Interval:
    """Open interval ``(lo, hi)``; either end may be infinite."""

    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if math.isnan(lo) or math.isnan(hi) or not lo < hi:
            raise DomainError(f"need lo < hi, got ({self.lo}, {self.hi})")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def parse(cls, text: str) -> "Interval":
        """Parse ``"lo:hi"``; ``inf``/``-inf`` are accepted."""
        parts = text.split(":")
        if len(parts) != 2:
            raise ValueError(f"interval must look like lo:hi, got {text!r}")
        return cls(float(parts[0]), float(parts[1]))

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return (x > self.lo) & (x < self.hi)

    def __contains__(self, x) -> bool:
        return bool(np.all(self.contains(x)))

    def window(self) -> tuple[float, float]:
        """A finite sub-box used for sampling unbounded intervals."""
        lo, hi = self.lo, self.hi
        if math.isinf(lo) and math.isinf(hi):
            return -10.0, 10.0
        if math.isinf(hi):
            return lo, lo + max(10.0, abs(lo))
        if math.isinf(lo):
            return hi - max(10.0, abs(hi)), hi
        return lo, hi

    def interior(self, pad: float = 1e-9) -> tuple[float, float]:
        """Closed box strictly inside the (windowed) interval."""
        lo, hi = self.window()
        eps = pad * (hi - lo)
        return lo + eps, hi - eps

    def grid(self, num: int, pad: float = 1e-6) -> np.ndarray:
        lo, hi = self.interior(pad)
        return np.linspace(lo, hi, num)

    def __str__(self) -> str:
        return f"({self.lo:g}, {self.hi:g})"


POSITIVE_REALS = Interval(0.0, math.inf)
REALS = Interval(-math.inf, math.inf)


@dataclass(frozen=True)
class GeneratorSpec:
    """Continuous strictly monotone generator ``f`` with optional derivatives.

    ``family`` is a catalog tag such as ``("power", 3.0)``; deciders use it to
    recognise closed-form reductions.
    """

    eval: ArrayFn
    domain: Interval = REALS
    monotonicity: str = "increasing"
    d1: Optional[ArrayFn] = None
    d2: Optional[ArrayFn] = None
    inverse: Optional[ArrayFn] = None
    name: str = "f"
    family: Optional[tuple] = None

    def __post_init__(self):
        if self.monotonicity not in ("increasing", "decreasing"):
            raise ValueError(f"monotonicity must be 'increasing' or 'decreasing', got {self.monotonicity!r}")

    def __call__(self, x):
        return self.eval(np.asarray(x, dtype=float))

    @property
    def increasing(self) -> bool:
        return self.monotonicity == "increasing"

    def check_monotone(self, num: int = 257) -> bool:
        t = self.domain.grid(num)
        diff = np.diff(self(t))
        return bool(np.all(diff > 0) if self.increasing else np.all(diff < 0))

    def check_c1_sharp(self, num: int = 257) -> bool:
        """True when ``d1`` exists and does not vanish on a sample grid."""
        if self.d1 is None:
            return False
        return bool(np.all(np.abs(self.d1(self.domain.grid(num))) > 0))


@dataclass(frozen=True)
class WeightSpec:
    """Positive weight function ``p`` with an optional derivative."""

    eval: ArrayFn
    domain: Interval = REALS
    d1: Optional[ArrayFn] = None
    name: str = "p"
    family: Optional[tuple] = None

    def __call__(self, x):
        return self.eval(np.asarray(x, dtype=float))

    def check_positive(self, num: int = 257) -> bool:
        return bool(np.all(self(self.domain.grid(num)) > 0))


@dataclass(frozen=True)
class GiniParams:
    q: float
    r: float

    def __post_init__(self):
        if not (math.isfinite(self.q) and math.isfinite(self.r)):
            raise DomainError("Gini exponents must be finite")

    @property
    def equal(self) -> bool:
        return abs(self.q - self.r) < EQUAL_EXPONENT_TOL

    def gamma(self, t):
        from .characterization import gamma

        return gamma(self.q, self.r, t)

    def beta(self):
        from .characterization import beta

        return beta(self.q, self.r)


@dataclass(frozen=True)
class MeanValue:
    value: float
    family: str
    inputs: tuple = field(repr=False)

    def __float__(self) -> float:
        return self.value

    def within_bounds(self) -> bool:
        return min(self.inputs) <= self.value <= max(self.inputs)


def as_points(x, domain: Interval = POSITIVE_REALS) -> np.ndarray:
    """Validate a nonempty finite vector lying in ``domain``."""
    arr = np.asarray(x, dtype=float).ravel()
    if arr.size == 0:
        raise DomainError("empty input")
    if not np.all(np.isfinite(arr)):
        raise DomainError("non-finite input")
    bad = ~domain.contains(arr)
    if bad.any():
        raise DomainError(f"entry {float(arr[bad][0]):g} outside {domain}")
    return arr


def _result(value, family, pts) -> MeanValue:
    return MeanValue(float(value), family, tuple(float(v) for v in pts))


def invert_monotone(f: ArrayFn, target, lo, hi, increasing: bool = True,
                    rtol: float = INVERSION_RTOL, max_iter: int = INVERSION_MAX_ITER):
    """Solve ``f(t) = target`` for ``t`` in ``[lo, hi]`` by bisection, elementwise.

    ``target``, ``lo`` and ``hi`` broadcast together.  Raises
    :class:`InversionError` when ``f`` does not bracket the target, which is
    how a non-monotone generator shows up.
    """
    target, lo, hi = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (target, lo, hi)))
    lo = lo.copy()
    hi = hi.copy()
    sgn = 1.0 if increasing else -1.0
    flo = sgn * (f(lo) - target)
    fhi = sgn * (f(hi) - target)
    slack = 1e-12 * (1.0 + np.abs(target))
    if np.any(flo > slack) or np.any(fhi < -slack):
        idx = np.flatnonzero((flo > slack) | (fhi < -slack))[0]
        raise InversionError(
            f"generator does not bracket {target.flat[idx]!r} on "
            f"[{lo.flat[idx]!r}, {hi.flat[idx]!r}]; not monotone as declared?"
        )
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        active = (hi - lo > rtol * np.maximum(np.abs(lo), np.abs(hi))) & (mid > lo) & (mid < hi)
        if not active.any():
            break
        g = sgn * (f(mid) - target)
        up = active & (g < 0)
        down = active & (g >= 0)
        lo = np.where(up, mid, lo)
        hi = np.where(down, mid, hi)
    else:
        raise InversionError(f"bisection did not converge in {max_iter} iterations")
    return 0.5 * (lo + hi)


def _invert(f: GeneratorSpec, y, lo, hi):
    if f.inverse is not None:
        t = np.asarray(f.inverse(np.asarray(y, dtype=float)), dtype=float)
    else:
        t = invert_monotone(f.eval, y, lo, hi, f.increasing)
    return np.minimum(np.maximum(t, lo), hi)


def holder_mean(p: float, x) -> MeanValue:
    """Power mean of exponent ``p``; the geometric mean for ``p == 0``."""
    pts = as_points(x)
    v = kernels.holder_rows(pts[None, :], float(p))[0]
    return _result(v, "holder", pts)


def gini_mean(g, x) -> MeanValue:
    """Gini mean; ``g`` is a :class:`GiniParams` or a ``(q, r)`` pair."""
    if not isinstance(g, GiniParams):
        g = GiniParams(*g)
    pts = as_points(x)
    v = kernels.gini_rows(pts[None, :], g.q, g.r)[0]
    return _result(v, "gini", pts)


def quasiarithmetic_mean(f: GeneratorSpec, x) -> MeanValue:
    pts = as_points(x, f.domain)
    lo, hi = pts.min(), pts.max()
    if lo == hi:
        return _result(lo, "quasiarithmetic", pts)
    y = np.mean(f(pts))
    return _result(_invert(f, y, lo, hi), "quasiarithmetic", pts)


def bajraktarevic_mean(f: GeneratorSpec, p: WeightSpec, x) -> MeanValue:
    pts = as_points(x, f.domain)
    if not p.domain.contains(pts).all():
        raise DomainError(f"inputs outside weight domain {p.domain}")
    lo, hi = pts.min(), pts.max()
    if lo == hi:
        return _result(lo, "bajraktarevic", pts)
    w = p(pts)
    if np.any(w <= 0):
        raise DomainError("weight must be positive on the inputs")
    y = np.sum(w * f(pts)) / np.sum(w)
    return _result(_invert(f, y, lo, hi), "bajraktarevic", pts)


# -- batched evaluators -------------------------------------------------------


def _rows(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DomainError(f"expected a 2-D batch of input vectors, got shape {X.shape}")
    return X


def holder_evaluator(p: float):
    p = float(p)

    def evaluate(X):
        return kernels.holder_rows(_rows(X), p)

    evaluate.__name__ = f"holder[{p:g}]"
    return evaluate


def gini_evaluator(q: float, r: float):
    q, r = float(q), float(r)

    def evaluate(X):
        return kernels.gini_rows(_rows(X), q, r)

    evaluate.__name__ = f"gini[{q:g},{r:g}]"
    return evaluate


def arithmetic_evaluator():
    def evaluate(X):
        return _rows(X).mean(axis=1)

    evaluate.__name__ = "arithmetic"
    return evaluate


def _weighted_rows(f: GeneratorSpec, X, W):
    lo = X.min(axis=1)
    hi = X.max(axis=1)
    y = (W * f(X)).sum(axis=1) / W.sum(axis=1)
    out = _invert(f, y, lo, hi)
    const = lo == hi
    out[const] = X[const, 0]
    return out


def quasiarithmetic_evaluator(f: GeneratorSpec):
    def evaluate(X):
        X = _rows(X)
        return _weighted_rows(f, X, np.ones_like(X))

    evaluate.__name__ = f"quasiarithmetic[{f.name}]"
    return evaluate


def bajraktarevic_evaluator(f: GeneratorSpec, p: WeightSpec):
    def evaluate(X):
        X = _rows(X)
        return _weighted_rows(f, X, p(X))

    evaluate.__name__ = f"bajraktarevic[{f.name},{p.name}]"
    return evaluate


def batched(mean: Callable[[np.ndarray], float]):
    """Adapt a scalar mean ``vector -> float`` to the batched protocol (slow path)."""

    def evaluate(X):
        return np.array([float(mean(row)) for row in _rows(X)])

    evaluate.__name__ = getattr(mean, "__name__", "mean")
    return evaluate
