import math
import warnings

import numpy as np
import pytest

from heatsoe.contour import ValidityWarning, build_contour_sum, select_params
from heatsoe.kernel import (build_dlp_kernel, build_kernel, evaluate_kernel,
                            true_kernel, validate_on_grid)


@pytest.mark.parametrize("dim", [2, 3])
def test_separated_kernel_accuracy(dim):
    k = build_kernel(dim, 1e-6, 1e-3, 1.0)
    err, ratio = validate_on_grid(k)
    assert err <= 1e-6
    assert 1.0 <= ratio <= 2.0


def test_dim_one_is_bare_contour_sum():
    k = build_kernel(1, 1e-6, 1e-3, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        bare = build_contour_sum(select_params(1e-6, 1e-3, 1.0))
    np.testing.assert_array_equal(k.inner.nodes, bare.nodes)
    np.testing.assert_array_equal(k.inner.weights, bare.weights)
    assert k.outer is None and k.n_outer == 0


def test_separability_exact():
    k = build_kernel(2, 1e-6, 1e-3, 1.0)
    t = np.logspace(-3, 0, 9)
    from heatsoe.contour import evaluate_expsum
    from heatsoe.power import evaluate_power_sum
    prod = evaluate_power_sum(k.outer, t) * evaluate_expsum(k.inner, t, 0.3)
    np.testing.assert_array_equal(evaluate_kernel(k, t, 0.3), prod)


@pytest.mark.parametrize("dim", [2, 3])
def test_positive_at_origin(dim):
    k = build_kernel(dim, 1e-6, 1e-3, 1.0)
    t = np.logspace(-3, 0, 1000)
    assert np.all(evaluate_kernel(k, t, 0.0) > 0)


def test_dlp_kernel():
    k = build_dlp_kernel(2, 1e-9, 1e-3, 1.0, 6.5)
    err, _ = validate_on_grid(k)
    assert err <= 1e-9
    assert k.weight_exponent == 2.0
    t = np.array([1e-2, 0.1, 1.0])
    r, dot = 0.7, 0.4
    ref = true_kernel(2, t, r, "double_layer", dot)
    diff = np.abs(evaluate_kernel(k, t, r, dot) - ref)
    assert np.all(diff * t ** 2 <= 1e-9 * dot / r)
    with pytest.raises(ValueError):
        evaluate_kernel(k, t, 7.0, 1.0)
    with pytest.raises(ValueError):
        build_dlp_kernel(2, 1e-9, 1e-3, 1.0, 0.5)


def test_true_kernel_formula():
    # G_2 at r = 2.5, t = 1.02 (source at origin with t0 = 0.02, t = 1)
    g = true_kernel(2, 1.02, 2.5)
    assert g == pytest.approx(math.exp(-6.25 / 4.08) / (4 * math.pi * 1.02), rel=1e-15)
    assert g == pytest.approx(0.016862052, rel=1e-8)


def test_validity_warning():
    k = build_kernel(2, 1e-6, 1e-3, 1.0)
    with pytest.warns(ValidityWarning):
        evaluate_kernel(k, 2.0, 0.0)
    with pytest.raises(ValueError):
        build_kernel(0, 1e-6, 1e-3, 1.0)


def test_dlp_kernel_with_bundled_outer_sum():
    from heatsoe.io import bundled_table4

    t4 = bundled_table4()
    k = build_dlp_kernel(2, 1e-9, 1e-3, 1.0, 6.5, outer=t4)
    assert k.n_outer == len(t4) == 22
    err, _ = validate_on_grid(k, nx=20, nt=200)
    # limited by the table's own 6e-7 relative accuracy
    assert 1e-10 < err < 1e-7
    with pytest.raises(ValueError, match="beta"):
        build_kernel(3, 1e-6, 1e-3, 1.0, outer=t4)
    with pytest.raises(ValueError, match="covers"):
        build_dlp_kernel(2, 1e-6, 1e-4, 1.0, 2.0, outer=t4)
