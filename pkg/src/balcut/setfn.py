"""Balancing set functions and their one-homogeneous continuous extensions.

Three extensions are available: the Lovász extension of any balancing
function, a mean-centred l1 norm (for the ratio cut) and a median-centred
l1 norm (for the ratio Cheeger cut). All are even, shift invariant and
agree with the set function on indicator vectors.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "BalanceFunction",
    "Extension",
    "RATIO_CUT",
    "RATIO_CHEEGER",
    "custom_balance",
    "balance_set_value",
    "lovasz_value",
    "lovasz_subgradient",
    "extension_value",
    "extension_subgradient",
    "threshold_chain",
]

BALANCE_KINDS = ("ratio-cut", "cheeger", "custom")
EXTENSION_KINDS = ("lovasz", "mean", "median")


class BalanceFunctionError(ValueError):
    """A custom balancing oracle broke nonnegativity or symmetry."""


@dataclass(frozen=True)
class BalanceFunction:
    """Symmetric nonnegative set function ``S_hat`` with ``S_hat(empty) = 0``.

    ``kind`` is ``'ratio-cut'`` (``|A| |A^c|``), ``'cheeger'``
    (``min(|A|, |A^c|)``) or ``'custom'``, in which case ``oracle`` maps a
    boolean mask to a float.
    """

    kind: str
    oracle: Callable[[np.ndarray], float] | None = None
    submodular: bool = False

    def __post_init__(self):
        if self.kind not in BALANCE_KINDS:
            raise ValueError(f"unknown balance kind {self.kind!r}")
        if (self.kind == "custom") != (self.oracle is not None):
            raise ValueError("an oracle is required for, and only for, custom balance functions")

    @property
    def cardinality_based(self) -> bool:
        return self.kind != "custom"

    def of_size(self, size, n: int):
        """Value on any set of the given cardinality (cardinality kinds only)."""
        size = np.asarray(size)
        if self.kind == "ratio-cut":
            return size * (n - size)
        if self.kind == "cheeger":
            return np.minimum(size, n - size)
        raise TypeError("custom balance functions are not cardinality based")

    def __call__(self, mask) -> float:
        return balance_set_value(self, mask)

    def validate(self, n: int, samples: int = 2000, seed: int = 0) -> None:
        """Check symmetry, nonnegativity and the empty/full set values.

        Exhaustive for ``n <= 12``, random subsets otherwise.
        """
        if n <= 12:
            masks = (np.array(bits, dtype=bool)
                     for bits in itertools.product((False, True), repeat=n))
        else:
            rng = np.random.default_rng(seed)
            masks = (rng.random(n) < 0.5 for _ in range(samples))
        empty = np.zeros(n, dtype=bool)
        for a in itertools.chain([empty, ~empty], masks):
            v = balance_set_value(self, a)
            if (not a.any() or a.all()) and v != 0.0:
                raise BalanceFunctionError("balance function must vanish on the empty and full set")


RATIO_CUT = BalanceFunction("ratio-cut")
RATIO_CHEEGER = BalanceFunction("cheeger")


def custom_balance(oracle: Callable[[np.ndarray], float], submodular: bool = False) -> BalanceFunction:
    return BalanceFunction("custom", oracle=oracle, submodular=submodular)


def _custom_value(b: BalanceFunction, a: np.ndarray) -> float:
    v = float(b.oracle(a))
    if not np.isfinite(v) or v < 0.0:
        raise BalanceFunctionError(f"balance oracle returned {v!r} for a set of size {int(a.sum())}")
    return v


def balance_set_value(b: BalanceFunction, a) -> float:
    """``S_hat(A)`` for a boolean mask ``a``."""
    a = np.asarray(a, dtype=bool)
    if b.cardinality_based:
        return float(b.of_size(int(a.sum()), a.size))
    v = _custom_value(b, a)
    vc = _custom_value(b, ~a)
    if not np.isclose(v, vc, rtol=1e-12, atol=1e-12):
        raise BalanceFunctionError(f"balance oracle is not symmetric: {v!r} vs {vc!r} on the complement")
    return v


def threshold_chain(f) -> tuple[np.ndarray, list[np.ndarray]]:
    """Stable ascending order of ``f`` and the nested upper sets it induces.

    Returns ``order`` and masks ``C_0 = V ⊃ C_1 ⊃ ... ⊃ C_n = ∅`` where
    ``C_i`` holds the ``n - i`` largest entries (ties broken by index).
    """
    f = np.asarray(f, dtype=np.float64)
    n = f.size
    order = np.argsort(f, kind="stable")
    masks = []
    current = np.ones(n, dtype=bool)
    masks.append(current.copy())
    for idx in order:
        current[idx] = False
        masks.append(current.copy())
    return order, masks


def _chain_values(b: BalanceFunction, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = f.size
    order = np.argsort(f, kind="stable")
    if b.cardinality_based:
        sizes = n - np.arange(n + 1)
        return order, b.of_size(sizes, n).astype(np.float64)
    # one oracle call per chain set, walking down from V
    values = np.empty(n + 1)
    current = np.ones(n, dtype=bool)
    values[0] = _custom_value(b, current)
    for i, idx in enumerate(order):
        current[idx] = False
        values[i + 1] = _custom_value(b, current)
    return order, values


def lovasz_value(b: BalanceFunction, f) -> float:
    """Lovász extension ``sum_i S_hat(C_i) (f_(i+1) - f_(i)) + f_(1) S_hat(V)``."""
    f = np.asarray(f, dtype=np.float64)
    order, h = _chain_values(b, f)
    fs = f[order]
    return float(np.dot(h[1:-1], np.diff(fs)) + fs[0] * h[0])


def lovasz_subgradient(b: BalanceFunction, f) -> np.ndarray:
    """Greedy subgradient: the entry at sorted position ``i`` gets
    ``S_hat(C_i) - S_hat(C_{i+1})``."""
    f = np.asarray(f, dtype=np.float64)
    order, h = _chain_values(b, f)
    s = np.empty_like(f)
    s[order] = h[:-1] - h[1:]
    return s


def _lower_median(f: np.ndarray) -> float:
    k = (f.size - 1) // 2
    return float(np.partition(f, k)[k])


@dataclass(frozen=True)
class Extension:
    """A one-homogeneous continuous extension of ``base``.

    ``kind='lovasz'`` works for any base. ``'mean'`` is
    ``(n/2) * ||f - mean(f)||_1`` and extends the ratio-cut balance;
    ``'median'`` is ``sum_i |f_i - median(f)|`` and extends the Cheeger
    balance.
    """

    base: BalanceFunction
    kind: str = "lovasz"
    degree: int = 1

    def __post_init__(self):
        if self.kind not in EXTENSION_KINDS:
            raise ValueError(f"unknown extension kind {self.kind!r}")
        if self.kind == "mean" and self.base.kind != "ratio-cut":
            raise ValueError("the mean extension only extends the ratio-cut balance")
        if self.kind == "median" and self.base.kind != "cheeger":
            raise ValueError("the median extension only extends the Cheeger balance")

    def value(self, f) -> float:
        return extension_value(self, f)

    def subgradient(self, f) -> np.ndarray:
        return extension_subgradient(self, f)


def extension_value(e: Extension, f) -> float:
    f = np.asarray(f, dtype=np.float64)
    if e.kind == "lovasz":
        return lovasz_value(e.base, f)
    if e.kind == "mean":
        return 0.5 * f.size * float(np.abs(f - f.mean()).sum())
    return float(np.abs(f - _lower_median(f)).sum())


def extension_subgradient(e: Extension, f) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if e.kind == "lovasz":
        return lovasz_subgradient(e.base, f)
    n = f.size
    if e.kind == "mean":
        sg = np.sign(f - f.mean())
        return 0.5 * n * (sg - sg.mean())
    med = _lower_median(f)
    s = np.sign(f - med)
    ties = np.flatnonzero(f == med)
    # ties take -1/0/+1 so the entries sum to zero
    imbalance = int(np.count_nonzero(s < 0) - np.count_nonzero(s > 0))
    if abs(imbalance) > ties.size:
        raise ArithmeticError("median tie set too small to balance the subgradient")
    s[ties[:abs(imbalance)]] = np.sign(imbalance)
    return s
