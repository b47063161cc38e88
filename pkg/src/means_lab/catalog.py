"""The fixed catalog of generator and weight functions used by the CLI.

Text syntax: ``identity``, ``log``, ``power:P``, ``exp`` / ``exp:C``,
``affine:A,B`` (``A*x + B``) and ``const:C`` (weights only).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .means_core import POSITIVE_REALS, REALS, GeneratorSpec, Interval, WeightSpec

FAMILIES = ("identity", "power", "log", "exp", "affine", "const")
_ARITY = {"identity": 0, "log": 0, "power": 1, "exp": 1, "affine": 2, "const": 1}


@dataclass(frozen=True)
class FunctionExpr:
    family: str
    params: tuple = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown function family {self.family!r}; choose from {', '.join(FAMILIES)}")
        params = tuple(float(v) for v in self.params)
        if self.family == "exp" and not params:
            params = (1.0,)
        if len(params) != _ARITY[self.family]:
            raise ValueError(f"{self.family} takes {_ARITY[self.family]} parameter(s), got {len(params)}")
        if self.family == "power" and params[0] == 0:
            raise ValueError("power requires a nonzero exponent (use log for the p -> 0 role)")
        if self.family == "exp" and params[0] == 0:
            raise ValueError("exp requires a nonzero rate")
        if self.family == "affine" and params[0] == 0:
            raise ValueError("affine requires a nonzero slope")
        object.__setattr__(self, "params", params)

    @classmethod
    def parse(cls, text: str) -> "FunctionExpr":
        head, _, tail = text.strip().partition(":")
        params = tuple(float(v) for v in tail.split(",")) if tail else ()
        return cls(head.strip().lower(), params)

    def __str__(self) -> str:
        if not self.params or self.family == "exp" and self.params == (1.0,):
            return self.family
        return f"{self.family}:{','.join(f'{v:g}' for v in self.params)}"

    @property
    def natural_domain(self) -> Interval:
        return POSITIVE_REALS if self.family in ("power", "log") else REALS

    def generator(self, domain: Interval | None = None) -> GeneratorSpec:
        domain = domain or self.natural_domain
        fam = self.family
        name = str(self)
        if fam == "const":
            raise ValueError("const is only allowed as a weight")
        if fam == "identity":
            return GeneratorSpec(
                eval=lambda x: np.asarray(x, dtype=float) * 1.0,
                domain=domain,
                d1=np.ones_like,
                d2=np.zeros_like,
                inverse=lambda y: np.asarray(y, dtype=float) * 1.0,
                name=name,
                family=("power", 1.0),
            )
        if fam == "power":
            (s,) = self.params
            return GeneratorSpec(
                eval=lambda x: np.power(x, s),
                domain=domain,
                monotonicity="increasing" if s > 0 else "decreasing",
                d1=lambda x: s * np.power(x, s - 1.0),
                d2=lambda x: s * (s - 1.0) * np.power(x, s - 2.0),
                inverse=lambda y: np.power(y, 1.0 / s),
                name=name,
                family=("power", s),
            )
        if fam == "log":
            return GeneratorSpec(
                eval=np.log,
                domain=domain,
                d1=lambda x: 1.0 / np.asarray(x, dtype=float),
                d2=lambda x: -1.0 / np.square(x),
                inverse=np.exp,
                name=name,
                family=("log",),
            )
        if fam == "exp":
            (c,) = self.params
            return GeneratorSpec(
                eval=lambda x: np.exp(c * np.asarray(x, dtype=float)),
                domain=domain,
                monotonicity="increasing" if c > 0 else "decreasing",
                d1=lambda x: c * np.exp(c * np.asarray(x, dtype=float)),
                d2=lambda x: c * c * np.exp(c * np.asarray(x, dtype=float)),
                inverse=lambda y: np.log(y) / c,
                name=name,
                family=("exp", c),
            )
        a, b = self.params
        return GeneratorSpec(
            eval=lambda x: a * np.asarray(x, dtype=float) + b,
            domain=domain,
            monotonicity="increasing" if a > 0 else "decreasing",
            d1=lambda x: np.full_like(np.asarray(x, dtype=float), a),
            d2=np.zeros_like,
            inverse=lambda y: (np.asarray(y, dtype=float) - b) / a,
            name=name,
            family=("affine", a, b),
        )

    def weight(self, domain: Interval | None = None) -> WeightSpec:
        domain = domain or self.natural_domain
        fam = self.family
        name = str(self)
        if fam == "const":
            (c,) = self.params
            if c <= 0:
                raise ValueError("a constant weight must be positive")
            return WeightSpec(
                eval=lambda x: np.full_like(np.asarray(x, dtype=float), c),
                domain=domain,
                d1=np.zeros_like,
                name=name,
                family=("const", c),
            )
        g = self.generator(domain)
        w = WeightSpec(eval=g.eval, domain=domain, d1=g.d1, name=name, family=g.family)
        if not w.check_positive():
            raise ValueError(f"weight {name} is not positive on {domain}")
        return w


def parse_generator(text: str, domain: Interval | None = None) -> GeneratorSpec:
    return FunctionExpr.parse(text).generator(domain)


def parse_weight(text: str, domain: Interval | None = None) -> WeightSpec:
    return FunctionExpr.parse(text).weight(domain)


def gini_pair(q: float, r: float, domain: Interval = POSITIVE_REALS) -> tuple[GeneratorSpec, WeightSpec]:
    """Generator/weight pair whose Bajraktarević mean is the Gini mean (q, r)."""
    if abs(q - r) < 1e-12:
        f = FunctionExpr("log").generator(domain)
        p = FunctionExpr("const", (1.0,)).weight(domain) if q == 0 else FunctionExpr("power", (q,)).weight(domain)
        return f, p
    f = FunctionExpr("power", (q - r,)).generator(domain)
    p = FunctionExpr("const", (1.0,)).weight(domain) if r == 0 else FunctionExpr("power", (r,)).weight(domain)
    return f, p


def random_expr(rng: np.random.Generator, role: str) -> FunctionExpr:
    """Draw a catalog member with moderate parameters, valid on (0.5, 5)."""
    if role == "generator":
        fam = rng.choice(["identity", "power", "log", "exp", "affine"])
    else:
        fam = rng.choice(["identity", "power", "exp", "affine", "const"])
    if fam in ("identity", "log"):
        return FunctionExpr(fam)
    if fam == "power":
        s = 0.0
        while abs(s) < 0.1:
            s = float(np.round(rng.uniform(-3, 3), 2))
        return FunctionExpr(fam, (s,))
    if fam == "exp":
        c = 0.0
        while abs(c) < 0.05:
            c = float(np.round(rng.uniform(-1.5, 1.5), 2))
        return FunctionExpr(fam, (c,))
    if fam == "affine":
        a = float(np.round(rng.uniform(0.2, 3.0), 2)) * (1 if rng.random() < 0.5 or role == "weight" else -1)
        b = float(np.round(rng.uniform(0.0, 2.0), 2))
        return FunctionExpr(fam, (a, b))
    return FunctionExpr("const", (float(np.round(rng.uniform(0.5, 3.0), 2)),))


__all__ = ["FunctionExpr", "FAMILIES", "parse_generator", "parse_weight", "gini_pair", "random_expr"]
