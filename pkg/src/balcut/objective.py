"""Ratio objectives ``F = (R1 - R2) / (S1 - S2)`` and the inner objective.

Every part is a convex one-homogeneous functional exposing ``value(f)`` and
``subgradient(f)``. The shipped cut objectives use the graph total
variation for ``R1``, a balance extension for ``S1`` and zero for the two
subtracted parts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Protocol

import numpy as np

from .graph import Graph, total_variation, tv_subgradient
from .setfn import BalanceFunction, Extension

__all__ = [
    "ConvexFunctional",
    "TotalVariation",
    "Zero",
    "Scaled",
    "ZERO",
    "RatioObjective",
    "ConstraintFunction",
    "L2",
    "L2_SQUARED",
    "custom_constraint",
    "Subgradients",
    "DegeneratePointError",
    "cut_objective",
    "ratio_value",
    "subgradients",
    "linear_term",
    "inner_objective_value",
]


class ConvexFunctional(Protocol):
    def value(self, f: np.ndarray) -> float: ...

    def subgradient(self, f: np.ndarray) -> np.ndarray: ...


class DegeneratePointError(ArithmeticError):
    """The denominator of the ratio vanishes at the evaluated point."""


@dataclass(frozen=True)
class TotalVariation:
    graph: Graph

    def value(self, f):
        return total_variation(self.graph, f)

    def subgradient(self, f):
        return tv_subgradient(self.graph, f)


class Zero:
    def value(self, f):
        return 0.0

    def subgradient(self, f):
        return np.zeros(np.shape(f))

    def __repr__(self):
        return "Zero()"


ZERO = Zero()


@dataclass(frozen=True)
class Scaled:
    """``factor * part``; lets tests build objectives with nonzero R2 and S2."""

    part: ConvexFunctional
    factor: float

    def value(self, f):
        return self.factor * self.part.value(f)

    def subgradient(self, f):
        return self.factor * self.part.subgradient(f)


@dataclass(frozen=True)
class RatioObjective:
    r1: ConvexFunctional
    s1: ConvexFunctional
    r2: ConvexFunctional = ZERO
    s2: ConvexFunctional = ZERO
    # set for cut objectives; thresholding and the oracle need it
    graph: Graph | None = None
    balance: BalanceFunction | None = None

    def numerator(self, f) -> float:
        r = self.r1.value(f) - self.r2.value(f)
        if r < -1e-12 * (1.0 + abs(self.r1.value(f))):
            raise ValueError(f"numerator is negative ({r!r}); R1 - R2 must be nonnegative")
        return max(r, 0.0)

    def denominator(self, f) -> float:
        s = self.s1.value(f) - self.s2.value(f)
        if s < -1e-12 * (1.0 + abs(self.s1.value(f))):
            raise ValueError(f"denominator is negative ({s!r}); S1 - S2 must be nonnegative")
        return max(s, 0.0)

    def __call__(self, f) -> float:
        return ratio_value(self, f)


def cut_objective(g: Graph, extension: Extension) -> RatioObjective:
    """``TV(f) / S(f)`` for a balance extension ``S``."""
    return RatioObjective(r1=TotalVariation(g), s1=extension, graph=g, balance=extension.base)


def ratio_value(obj: RatioObjective, f) -> float:
    f = np.asarray(f, dtype=np.float64)
    s = obj.denominator(f)
    if s == 0.0:
        raise DegeneratePointError("denominator vanishes; choose a different point")
    return obj.numerator(f) / s


@dataclass(frozen=True)
class ConstraintFunction:
    """Nonnegative convex ``p``-homogeneous gauge ``G`` defining ``{G <= 1}``.

    The inner solver handles ``'l2'`` and ``'l2-squared'``, which share the
    feasible set ``{||u||_2 <= 1}``.
    """

    kind: str
    degree: float
    value: Callable[[np.ndarray], float]
    subgradient: Callable[[np.ndarray], np.ndarray]

    def normalize(self, f) -> np.ndarray:
        """Rescale ``f`` onto ``{G = 1}``."""
        f = np.asarray(f, dtype=np.float64)
        gv = self.value(f)
        if gv <= 0.0:
            raise DegeneratePointError("cannot normalize the zero vector")
        return f / gv ** (1.0 / self.degree)


def _l2_sub(f):
    nrm = np.linalg.norm(f)
    return f / nrm if nrm > 0 else np.zeros_like(f)


L2 = ConstraintFunction("l2", 1, lambda f: float(np.linalg.norm(f)), _l2_sub)
L2_SQUARED = ConstraintFunction("l2-squared", 2, lambda f: float(np.dot(f, f)), lambda f: 2.0 * f)


def custom_constraint(value, subgradient, degree: float) -> ConstraintFunction:
    if degree < 1:
        raise ValueError("constraint degree must be at least 1")
    return ConstraintFunction("custom", degree, value, subgradient)


class Subgradients(NamedTuple):
    r2: np.ndarray
    s1: np.ndarray
    g: np.ndarray


def subgradients(obj: RatioObjective, gfun: ConstraintFunction, fk) -> Subgradients:
    fk = np.asarray(fk, dtype=np.float64)
    return Subgradients(obj.r2.subgradient(fk), obj.s1.subgradient(fk), gfun.subgradient(fk))


def linear_term(obj: RatioObjective, fk, lam: float, c: float, subgrads: Subgradients) -> np.ndarray:
    """``v = r2(fk) + lam * s1(fk) + c * g(fk)``.

    With it the inner objective reads ``R1(u) + lam * S2(u) - <u, v>``.
    """
    return subgrads.r2 + lam * subgrads.s1 + c * subgrads.g


def inner_objective_value(obj: RatioObjective, gfun: ConstraintFunction, u, fk, lam: float,
                          c: float, subgrads: Subgradients) -> float:
    """``R1(u) - <u, r2> + lam (S2(u) - <u, s1>) - c <u, g>`` at ``fk``'s subgradients."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != np.shape(fk):
        raise ValueError(f"dimension mismatch: {u.shape} vs {np.shape(fk)}")
    v = linear_term(obj, fk, lam, c, subgrads)
    return obj.r1.value(u) + lam * obj.s2.value(u) - float(np.dot(u, v))
