import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from balcut import (RATIO_CHEEGER, RATIO_CUT, Extension, balance_set_value, custom_balance,
                    extension_subgradient, extension_value, lovasz_subgradient, lovasz_value)
from balcut.graph import indicator
from balcut.oracle import directional_derivative_check
from balcut.setfn import BalanceFunctionError, threshold_chain

from conftest import all_masks

EXTENSIONS = [
    Extension(RATIO_CUT, "lovasz"),
    Extension(RATIO_CHEEGER, "lovasz"),
    Extension(RATIO_CUT, "mean"),
    Extension(RATIO_CHEEGER, "median"),
]
EXT_IDS = ["cut-lovasz", "cheeger-lovasz", "mean", "median"]

finite_vectors = arrays(np.float64, st.integers(2, 9), elements=st.floats(-50, 50, width=32))


def greedy_max_oracle(b, f):
    """Lovász extension of a submodular ``b`` as a maximum over all greedy vectors."""
    n = f.size
    best = -np.inf
    for perm in itertools.permutations(range(n)):
        s = np.empty(n)
        mask = np.zeros(n, dtype=bool)
        prev = 0.0
        for i in perm:
            mask[i] = True
            cur = balance_set_value(b, mask)
            s[i] = cur - prev
            prev = cur
        best = max(best, float(s @ f))
    return best


def level_set_integral(b, f):
    """``min(f) * S(V) + integral of S({f > t}) dt`` evaluated between breakpoints."""
    vals = np.unique(f)
    total = vals[0] * balance_set_value(b, np.ones(f.size, dtype=bool))
    for lo, hi in zip(vals[:-1], vals[1:]):
        total += (hi - lo) * balance_set_value(b, f > 0.5 * (lo + hi))
    return total


# --------------------------------------------------------------------------
# set functions

def test_balance_examples():
    assert balance_set_value(RATIO_CUT, [True, False, False]) == 2.0
    assert balance_set_value(RATIO_CHEEGER, [True, True, False]) == 1.0
    for b in (RATIO_CUT, RATIO_CHEEGER):
        assert balance_set_value(b, np.zeros(4, dtype=bool)) == 0.0
        assert balance_set_value(b, np.ones(4, dtype=bool)) == 0.0


def test_balance_symmetric_exhaustive():
    for b in (RATIO_CUT, RATIO_CHEEGER):
        b.validate(10)
        for a in all_masks(7):
            assert balance_set_value(b, a) == balance_set_value(b, ~a) > 0


def test_custom_balance_checks():
    weights = np.array([1.0, 2.0, 3.0, 4.0])

    def good(a):
        return float(min(weights[a].sum(), weights[~a].sum()))

    b = custom_balance(good)
    b.validate(4)
    assert balance_set_value(b, np.array([True, False, False, True])) == 5.0

    lopsided = custom_balance(lambda a: float(weights[a].sum()))
    with pytest.raises(BalanceFunctionError, match="symmetric"):
        balance_set_value(lopsided, np.array([True, False, False, False]))
    negative = custom_balance(lambda a: -1.0)
    with pytest.raises(BalanceFunctionError, match="returned"):
        balance_set_value(negative, np.array([True, False, False, False]))
    with pytest.raises(BalanceFunctionError):
        custom_balance(lambda a: 1.0).validate(3)


def test_balance_kind_validation():
    from balcut import BalanceFunction
    with pytest.raises(ValueError):
        BalanceFunction("normalized")
    with pytest.raises(ValueError):
        BalanceFunction("custom")
    with pytest.raises(ValueError):
        Extension(RATIO_CHEEGER, "mean")
    with pytest.raises(ValueError):
        Extension(RATIO_CUT, "median")


# --------------------------------------------------------------------------
# Lovász extension

def test_lovasz_examples():
    f = np.array([1.0, 2.0, 3.0])
    assert lovasz_value(RATIO_CUT, f) == 4.0
    assert lovasz_value(RATIO_CHEEGER, f) == 2.0
    assert np.array_equal(lovasz_subgradient(RATIO_CUT, f), [-2.0, 0.0, 2.0])
    assert np.array_equal(lovasz_subgradient(RATIO_CHEEGER, f), [-1.0, 0.0, 1.0])
    assert np.dot(f, lovasz_subgradient(RATIO_CHEEGER, f)) == 2.0


def test_lovasz_constant_vector():
    f = np.full(5, 3.0)
    for b in (RATIO_CUT, RATIO_CHEEGER):
        s = lovasz_subgradient(b, f)
        assert lovasz_value(b, f) == 0.0
        assert np.dot(f, s) == pytest.approx(0.0, abs=1e-12)
        assert s.sum() == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("b", [RATIO_CUT, RATIO_CHEEGER], ids=["cut", "cheeger"])
def test_lovasz_at_indicators_equals_set_value(b):
    for a in all_masks(6):
        assert lovasz_value(b, indicator(a)) == balance_set_value(b, a)


@pytest.mark.parametrize("b", [RATIO_CUT, RATIO_CHEEGER], ids=["cut", "cheeger"])
def test_lovasz_matches_greedy_max_oracle(b):
    rng = np.random.default_rng(0)
    for n in range(2, 7):
        for _ in range(10):
            f = rng.standard_normal(n)
            assert lovasz_value(b, f) == pytest.approx(greedy_max_oracle(b, f), abs=1e-10)


@pytest.mark.parametrize("b", [RATIO_CUT, RATIO_CHEEGER], ids=["cut", "cheeger"])
def test_lovasz_matches_level_set_integral(b):
    rng = np.random.default_rng(1)
    for _ in range(100):
        f = np.round(rng.standard_normal(rng.integers(2, 15)), 1)  # rounding creates ties
        assert lovasz_value(b, f) == pytest.approx(level_set_integral(b, f), abs=1e-10)


def test_ratio_cut_lovasz_closed_form():
    rng = np.random.default_rng(2)
    for _ in range(100):
        f = rng.standard_normal(rng.integers(2, 30))
        closed = 0.5 * np.abs(f[:, None] - f[None, :]).sum()
        assert lovasz_value(RATIO_CUT, f) == pytest.approx(closed, rel=1e-12)
        # the greedy subgradient has the rank closed form
        rank = (f[None, :] < f[:, None]).sum(1) - (f[None, :] > f[:, None]).sum(1)
        assert np.array_equal(lovasz_subgradient(RATIO_CUT, f), rank.astype(float))


def test_cheeger_lovasz_equals_median_extension():
    rng = np.random.default_rng(3)
    for _ in range(200):
        f = rng.standard_normal(rng.integers(2, 20))
        assert lovasz_value(RATIO_CHEEGER, f) == pytest.approx(
            extension_value(Extension(RATIO_CHEEGER, "median"), f), rel=1e-12)


def test_custom_balance_lovasz_matches_cardinality_kind():
    b = custom_balance(lambda a: float(a.sum() * (~a).sum()), submodular=True)
    rng = np.random.default_rng(4)
    for _ in range(50):
        f = rng.standard_normal(7)
        assert lovasz_value(b, f) == pytest.approx(lovasz_value(RATIO_CUT, f), rel=1e-12)
        assert np.allclose(lovasz_subgradient(b, f), lovasz_subgradient(RATIO_CUT, f))


def test_threshold_chain_is_nested():
    order, masks = threshold_chain([0.3, -1.0, 0.3, 2.0])
    assert order.tolist() == [1, 0, 2, 3]
    assert masks[0].all() and not masks[-1].any()
    for outer, inner in zip(masks[:-1], masks[1:]):
        assert np.all(inner <= outer) and outer.sum() == inner.sum() + 1


@pytest.mark.parametrize("b", [RATIO_CUT, RATIO_CHEEGER], ids=["cut", "cheeger"])
def test_threshold_identity(b):
    rng = np.random.default_rng(5)
    for _ in range(300):
        f = rng.standard_normal(rng.integers(2, 12))
        s = lovasz_subgradient(b, f)
        for t in np.sort(f)[:-1]:
            c = f > t
            assert abs(s @ indicator(c) - balance_set_value(b, c)) <= 1e-10


def test_threshold_identity_negative_control():
    # a descending greedy order is still a vector but not the Lovász subgradient
    rng = np.random.default_rng(6)
    failures = 0
    for _ in range(50):
        f = rng.standard_normal(6)
        s = lovasz_subgradient(RATIO_CHEEGER, -f)
        failures += any(abs(s @ indicator(f > t) - balance_set_value(RATIO_CHEEGER, f > t)) > 1e-10
                        for t in np.sort(f)[:-1])
    assert failures == 50


# --------------------------------------------------------------------------
# mean and median extensions

def test_mean_and_median_examples():
    f = np.array([1.0, 2.0, 3.0])
    mean = Extension(RATIO_CUT, "mean")
    med = Extension(RATIO_CHEEGER, "median")
    assert extension_value(mean, f) == 3.0
    assert extension_value(mean, [1.0, 0.0, 0.0]) == pytest.approx(2.0, rel=1e-15)
    assert extension_value(med, f) == 2.0
    assert np.array_equal(extension_subgradient(mean, f), [-1.5, 0.0, 1.5])
    assert np.array_equal(extension_subgradient(med, f), [-1.0, 0.0, 1.0])
    for e in (mean, med):
        s = extension_subgradient(e, np.full(4, 7.0))
        assert s.sum() == 0.0 and s @ np.full(4, 7.0) == 0.0


def test_median_matches_brute_force_minimizer():
    rng = np.random.default_rng(7)
    med = Extension(RATIO_CHEEGER, "median")
    for _ in range(100):
        f = rng.integers(-3, 4, rng.integers(1, 12)).astype(float)
        brute = min(np.abs(f - m).sum() for m in f)
        assert extension_value(med, f) == pytest.approx(brute, abs=1e-12)


@pytest.mark.parametrize("e", EXTENSIONS, ids=EXT_IDS)
def test_extensions_agree_with_balance_at_indicators(e):
    for a in all_masks(6):
        assert extension_value(e, indicator(a)) == pytest.approx(balance_set_value(e.base, a),
                                                                 rel=1e-12)


def test_maximality_lovasz_dominates_mean():
    rng = np.random.default_rng(8)
    mean = Extension(RATIO_CUT, "mean")
    for _ in range(1000):
        f = rng.standard_normal(rng.integers(2, 20))
        assert lovasz_value(RATIO_CUT, f) >= extension_value(mean, f) - 1e-10


def test_maximality_equality_at_shifted_scaled_indicators():
    rng = np.random.default_rng(9)
    mean = Extension(RATIO_CUT, "mean")
    for _ in range(200):
        n = int(rng.integers(2, 15))
        a = rng.random(n) < 0.5
        f = rng.uniform(0.1, 5.0) * indicator(a) + rng.uniform(-5.0, 5.0)
        assert abs(lovasz_value(RATIO_CUT, f) - extension_value(mean, f)) <= 1e-10 * (1 + abs(f).max())


def test_maximality_strict_away_from_indicators():
    # negative control: a three-level vector separates the two extensions
    f = np.array([0.0, 1.0, 2.0])
    assert lovasz_value(RATIO_CUT, f) - extension_value(Extension(RATIO_CUT, "mean"), f) == 1.0


# --------------------------------------------------------------------------
# shared extension properties

@pytest.mark.parametrize("e", EXTENSIONS, ids=EXT_IDS)
def test_euler_identity(e):
    rng = np.random.default_rng(10)
    for _ in range(1000):
        f = rng.standard_normal(rng.integers(2, 16))
        if rng.random() < 0.3:
            f = np.round(f)  # ties
        val = extension_value(e, f)
        s = extension_subgradient(e, f)
        assert abs(f @ s - val) <= 1e-10 * (1 + val)
        assert abs(s.sum()) <= 1e-10 * (1 + np.abs(s).sum())


@pytest.mark.parametrize("e", EXTENSIONS, ids=EXT_IDS)
@settings(max_examples=80, deadline=None)
@given(f=finite_vectors)
def test_homogeneous_shift_invariant_even(e, f):
    f = f.astype(np.float64)
    val = extension_value(e, f)
    tol = 1e-12 * (1 + val) + 1e-9 * np.abs(f).sum()
    assert extension_value(e, 2.0 * f) == pytest.approx(2.0 * val, rel=1e-12, abs=1e-12)
    assert abs(extension_value(e, f + 3.0) - val) <= tol
    assert extension_value(e, -f) == pytest.approx(val, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("e", EXTENSIONS, ids=EXT_IDS)
def test_subgradient_inequality(e):
    rng = np.random.default_rng(11)
    for _ in range(100):
        n = int(rng.integers(2, 12))
        f, h = rng.standard_normal((2, n))
        if rng.random() < 0.3:
            f = np.round(f)
        assert extension_value(e, h) >= h @ extension_subgradient(e, f) - 1e-10


@pytest.mark.parametrize("e", EXTENSIONS, ids=EXT_IDS)
def test_directional_derivative_and_negative_control(e):
    rng = np.random.default_rng(12)
    f = rng.standard_normal(8)
    val = lambda x: extension_value(e, x)  # noqa: E731
    sub = lambda x: extension_subgradient(e, x)  # noqa: E731
    assert directional_derivative_check(val, sub, f) <= 1e-10
    assert directional_derivative_check(val, lambda x: 2.0 * sub(x), f) > 1e-3
