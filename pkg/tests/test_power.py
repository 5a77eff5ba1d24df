import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heatsoe.power import (PowerSum, ReductionFailed, build_power_sum,
                           evaluate_power_sum, reduce_power_sum,
                           verify_power_sum)


@pytest.mark.parametrize("beta", [0.5, 1.0, 1.5, 2.0])
@pytest.mark.parametrize("eps", [1e-6, 1e-9])
def test_relative_accuracy(beta, eps):
    ps = build_power_sum(beta, eps, 1e-3, 1.0)
    assert verify_power_sum(ps) <= eps
    assert ps.is_positive()


def test_three_halves_term_count():
    ps = build_power_sum(1.5, 1e-9, 1e-3, 1.0)
    assert len(ps) <= 40
    # dense check between the 1000 log-spaced samples
    t = np.logspace(-3, 0, 20011)
    rel = np.abs(t ** 1.5 * evaluate_power_sum(ps, t) - 1)
    assert rel.max() <= 1e-9


def test_scale_is_absorbed():
    a = build_power_sum(1.0, 1e-8, 1e-3, 1.0)
    b = build_power_sum(1.0, 1e-8, 1e-3, 1.0, scale=0.25)
    np.testing.assert_allclose(b.weights, 0.25 * a.weights, rtol=1e-14)
    np.testing.assert_array_equal(a.rates, b.rates)
    assert verify_power_sum(b) <= 1e-8


def test_reduction_shrinks():
    raw = build_power_sum(1.5, 1e-9, 1e-3, 1.0, reduce=False)
    red = reduce_power_sum(raw, 1e-9)
    assert len(red) < len(raw)
    t = np.logspace(-3, 0, 1000)
    dev = np.abs(evaluate_power_sum(red, t) - evaluate_power_sum(raw, t)) * t ** 1.5
    assert dev.max() <= 0.5e-9


def test_reduction_strict_failure():
    tiny = PowerSum(beta=1.0, weights=[1.0, 2.0], rates=[1.0, 3.0],
                    valid_t_min=1e-3, valid_t_max=1.0, target_eps=1e-9)
    assert reduce_power_sum(tiny, 1e-9) is tiny
    with pytest.raises(ReductionFailed):
        reduce_power_sum(tiny, 1e-9, strict=True)


def test_sorted_and_readonly():
    ps = PowerSum(beta=1.0, weights=[2.0, 1.0], rates=[3.0, 1.0],
                  valid_t_min=1e-3, valid_t_max=1.0, target_eps=1e-3)
    np.testing.assert_array_equal(ps.rates, [1.0, 3.0])
    np.testing.assert_array_equal(ps.weights, [1.0, 2.0])
    with pytest.raises(ValueError):
        ps.weights[0] = 5.0


@pytest.mark.parametrize("kwargs", [dict(beta=0.2), dict(eps=0.9),
                                    dict(delta=0.5)])
def test_rejects(kwargs):
    args = dict(beta=1.0, eps=1e-6, delta=1e-3, T=1.0)
    args.update(kwargs)
    with pytest.raises(ValueError):
        build_power_sum(**args)


@settings(max_examples=15, deadline=None)
@given(beta=st.floats(0.5, 3.0), k=st.integers(3, 10))
def test_positivity_property(beta, k):
    eps = 10.0 ** -k
    ps = build_power_sum(beta, eps, 1e-3, 1.0)
    assert np.all(ps.weights > 0) and np.all(ps.rates > 0)
    assert verify_power_sum(ps) <= eps
    # completely monotone: S and -S' are positive
    t = np.logspace(-3, 0, 50)
    d = -(ps.weights * ps.rates * np.exp(-ps.rates * t[:, None])).sum(axis=1)
    assert np.all(evaluate_power_sum(ps, t) > 0) and np.all(d < 0)


def test_scalar_evaluation():
    ps = build_power_sum(1.0, 1e-6, 1e-3, 1.0)
    v = evaluate_power_sum(ps, 0.5)
    assert isinstance(v, float)
    assert v == pytest.approx(2.0, rel=1e-6)
    assert math.isfinite(verify_power_sum(ps, grid_size=10))
