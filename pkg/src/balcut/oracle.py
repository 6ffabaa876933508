"""Exhaustive ground truth and subgradient checks for small instances."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numba import njit

from .graph import Graph, cut_value
from .objective import RatioObjective, ratio_value
from .outer import optimal_threshold
from .setfn import BalanceFunction, balance_set_value

__all__ = [
    "MAX_ORACLE_VERTICES",
    "OracleResult",
    "ExactnessViolation",
    "brute_force_optimum",
    "directional_derivative_check",
    "verify_exact_relaxation",
    "RelaxationReport",
]

MAX_ORACLE_VERTICES = 24


class ExactnessViolation(AssertionError):
    """A sampled point contradicted the exact relaxation guarantees."""


@dataclass
class OracleResult:
    best_set: np.ndarray
    best_ratio: float
    evaluated: int


@njit(cache=True)
def _enumerate_cardinality(n, heads, tails, w, balance_by_size):
    # subsets never containing vertex n-1: each cut is seen exactly once
    total = (1 << (n - 1)) - 1
    best = np.inf
    best_code = -1
    for code in range(1, total + 1):
        size = 0
        x = code
        while x:
            size += x & 1
            x >>= 1
        bal = balance_by_size[size]
        if bal <= 0.0:
            continue
        cut = 0.0
        for e in range(w.size):
            if ((code >> heads[e]) ^ (code >> tails[e])) & 1:
                cut += w[e]
        r = cut / bal
        if best_code < 0 or r < best - 1e-12 * max(best, 1.0):
            best = r
            best_code = code
    return best_code, best, total


def _mask_from_code(code: int, n: int) -> np.ndarray:
    return np.array([(code >> i) & 1 for i in range(n)], dtype=bool)


def brute_force_optimum(g: Graph, b: BalanceFunction, max_n: int = MAX_ORACLE_VERTICES) -> OracleResult:
    """Global minimum of ``cut(A, A^c) / S_hat(A)`` over nonempty proper subsets.

    Each complementary pair is visited once (``2^(n-1) - 1`` sets). Among
    ratios equal up to rounding the smallest binary encoding wins.
    """
    max_n = min(max_n, MAX_ORACLE_VERTICES)
    if g.n > max_n:
        raise ValueError(f"brute force is limited to n <= {max_n}, got n = {g.n}")
    n = g.n
    if n < 2:
        raise ValueError("need at least two vertices")
    if b.cardinality_based:
        by_size = b.of_size(np.arange(n + 1), n).astype(np.float64)
        code, ratio, total = _enumerate_cardinality(
            n, np.ascontiguousarray(g.heads), np.ascontiguousarray(g.tails),
            np.ascontiguousarray(g.weights), by_size)
    else:
        total = (1 << (n - 1)) - 1
        code, ratio = -1, np.inf
        for c in range(1, total + 1):
            mask = _mask_from_code(c, n)
            bal = balance_set_value(b, mask)
            if bal <= 0:
                continue
            r = cut_value(g, mask) / bal
            if code < 0 or r < ratio - 1e-12 * max(ratio, 1.0):
                code, ratio = c, r
    if code < 0:
        raise ValueError("the balance function vanishes on every proper subset")
    mask = _mask_from_code(int(code), n)
    return OracleResult(mask, cut_value(g, mask) / balance_set_value(b, mask), int(total))


def directional_derivative_check(value: Callable[[np.ndarray], float],
                                 subgradient: Callable[[np.ndarray], np.ndarray],
                                 f, trials: int = 100, seed: int = 0) -> float:
    """Largest violation of ``A(f + t d) >= A(f) + t <s(f), d>``.

    Random directions ``d`` and ``t`` in ``{1e-3, 1e-2, 1e-1}``. A valid
    subgradient of a convex ``A`` gives a value ``<= 0`` up to rounding.
    """
    f = np.asarray(f, dtype=np.float64)
    rng = np.random.default_rng(seed)
    s = subgradient(f)
    base = value(f)
    worst = -np.inf
    for _ in range(trials):
        d = rng.standard_normal(f.size)
        for t in (1e-3, 1e-2, 1e-1):
            worst = max(worst, t * float(np.dot(s, d)) - (value(f + t * d) - base))
    return worst


@dataclass
class RelaxationReport:
    optimum: float
    samples: int
    min_sampled_ratio: float
    min_threshold_ratio: float
    solver_runs: int = 0
    solver_hits: int = 0
    solver_ratios: list = field(default_factory=list)

    @property
    def hit_fraction(self) -> float:
        return self.solver_hits / self.solver_runs if self.solver_runs else float("nan")


def verify_exact_relaxation(g: Graph, obj: RatioObjective, samples: int = 1000, seed: int = 0,
                            solver_results=(), tol: float = 1e-10) -> RelaxationReport:
    """Check the thresholding inequality and the set-optimum lower bound.

    For every random ``f``: ``opt <= threshold_ratio(f) <= F(f)`` and
    ``F(f) >= opt`` (all up to ``tol``). Each entry of ``solver_results``
    (a ``SolveResult``) must satisfy the same bounds; the report counts how
    many of them reach the optimum.

    Raises
    ------
    ExactnessViolation
        If any bound fails.
    """
    b = obj.balance
    opt = brute_force_optimum(g, b).best_ratio
    rng = np.random.default_rng(seed)
    min_f = np.inf
    min_thr = np.inf
    drawn = 0
    while drawn < samples:
        f = rng.standard_normal(g.n)
        if np.ptp(f) == 0 or obj.denominator(f) == 0:
            continue
        drawn += 1
        F = ratio_value(obj, f)
        _, thr = optimal_threshold(g, b, f)
        if thr > F + tol:
            raise ExactnessViolation(f"threshold ratio {thr!r} exceeds F(f) = {F!r}")
        if thr < opt - tol:
            raise ExactnessViolation(f"threshold ratio {thr!r} is below the optimum {opt!r}")
        if F < opt - tol:
            raise ExactnessViolation(f"F(f) = {F!r} is below the optimum {opt!r}")
        min_f, min_thr = min(min_f, F), min(min_thr, thr)

    report = RelaxationReport(opt, drawn, min_f, min_thr)
    for res in solver_results:
        ratio = float(res.best_set_ratio)
        if ratio < opt - tol or res.lambda_star < opt - tol:
            raise ExactnessViolation(f"solver output {ratio!r} is below the optimum {opt!r}")
        report.solver_runs += 1
        report.solver_ratios.append(ratio)
        if ratio <= opt + tol * max(1.0, opt):
            report.solver_hits += 1
    return report
