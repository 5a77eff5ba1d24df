"""Separated approximations of the heat kernel and its double-layer derivative.

For ``G_d(x, t) = (4 pi t)^(-d/2) exp(-|x|^2 / 4t)`` the approximation is

    G_d ~ [sum_j wt_j exp(-lam_j t)] * [sum_k w_k exp(s_k t - sqrt(s_k) |x|)]

where the outer real sum approximates ``(4 pi t)^(-(d-1)/2)`` and the inner
contour sum is the 1D kernel.  The double layer kernel
``D = ((x-y).n_y) / (2t) G_d`` uses an outer sum for
``(4 pi)^(-(d-1)/2) / 2 * t^(-(d+1)/2)`` and multiplies by the dot factor.
"""
import dataclasses
import math
import warnings

import numpy as np

from .contour import (ExpSum, ValidityWarning, build_contour_sum,
                      evaluate_expsum, select_params,
                      stability_ratio, validation_grid)
from .power import PowerSum, build_power_sum, evaluate_power_sum

__all__ = [
    "SeparatedKernel",
    "build_kernel",
    "build_dlp_kernel",
    "evaluate_kernel",
    "true_kernel",
    "validate_on_grid",
]


@dataclasses.dataclass(frozen=True, eq=False)
class SeparatedKernel:
    dim: int
    inner: ExpSum
    outer: PowerSum = None
    kind: str = "kernel"
    R: float = None
    target_eps: float = float("nan")

    @property
    def valid_t_min(self):
        if self.outer is None:
            return self.inner.valid_t_min
        return max(self.inner.valid_t_min, self.outer.valid_t_min)

    @property
    def valid_t_max(self):
        if self.outer is None:
            return self.inner.valid_t_max
        return min(self.inner.valid_t_max, self.outer.valid_t_max)

    @property
    def n_inner(self):
        return len(self.inner)

    @property
    def n_outer(self):
        return 0 if self.outer is None else len(self.outer)

    @property
    def weight_exponent(self):
        """Power ``p`` in the weighted error ``|G - G_A| t^p``."""
        if self.kind == "double_layer":
            return (self.dim + 2) / 2.0
        return self.dim / 2.0


def _inner_sum(eps, delta, T):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        params = select_params(eps, delta, T)
    return build_contour_sum(params)


def _given_outer(ps, beta, scale, delta, T):
    # a precomputed t^-beta sum, e.g. the bundled table, rescaled to ``scale``
    if abs(ps.beta - beta) > 1e-12:
        raise ValueError(f"outer sum has beta={ps.beta:g}, need {beta:g}")
    if ps.valid_t_min > delta * (1 + 1e-12) or ps.valid_t_max < T * (1 - 1e-12):
        raise ValueError(f"outer sum covers [{ps.valid_t_min:g}, "
                         f"{ps.valid_t_max:g}], not [{delta:g}, {T:g}]")
    return ps.scaled(scale / ps.scale)


def build_kernel(dim, eps, delta, T, outer=None):
    """Separated approximation of ``G_dim`` with weighted error ``eps / t^(dim/2)``.

    Each factor is built for ``eps / 3`` so that the product error stays
    below ``eps``.  ``outer`` replaces the constructed ``t^(-(dim-1)/2)``
    sum with a given :class:`PowerSum`; its accuracy then bounds the result.
    """
    if dim < 1 or int(dim) != dim:
        raise ValueError("dim must be a positive integer")
    dim = int(dim)
    if dim == 1:
        # the bare contour sum, built for the full budget
        return SeparatedKernel(dim=1, inner=_inner_sum(eps, delta, T),
                               outer=None, kind="kernel", target_eps=eps)
    inner = _inner_sum(eps / 3.0, delta, T)
    beta = (dim - 1) / 2.0
    if outer is None:
        outer = build_power_sum(beta, eps / 3.0, delta, T,
                                scale=(4.0 * math.pi) ** (-beta))
    else:
        outer = _given_outer(outer, beta, (4.0 * math.pi) ** (-beta), delta, T)
    return SeparatedKernel(dim=dim, inner=inner, outer=outer, kind="kernel",
                           target_eps=eps)


def build_dlp_kernel(dim, eps, delta, T, R, outer=None):
    """Separated double-layer kernel, accurate to ``eps / t^((dim+2)/2)`` for ``|x-y| <= R``.

    ``outer`` optionally supplies the ``t^(-(dim+1)/2)`` sum, as in
    :func:`build_kernel`.
    """
    if not R > 1.0:
        raise ValueError("R must exceed 1")
    if dim < 1 or int(dim) != dim:
        raise ValueError("dim must be a positive integer")
    dim = int(dim)
    eps_hat = eps / (3.0 * R)
    inner = _inner_sum(eps_hat, delta, T)
    beta = (dim + 1) / 2.0
    scale = 0.5 * (4.0 * math.pi) ** (-(dim - 1) / 2.0)
    if outer is None:
        outer = build_power_sum(beta, eps_hat, delta, T, scale=scale)
    else:
        outer = _given_outer(outer, beta, scale, delta, T)
    return SeparatedKernel(dim=dim, inner=inner, outer=outer,
                           kind="double_layer", R=float(R), target_eps=eps)


def evaluate_kernel(k, t, r, dot_factor=1.0, check=True):
    """``outer(t) * inner(t, r)``, times ``dot_factor`` for the double layer."""
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    if check and k.kind == "double_layer" and np.any(r > k.R * (1 + 1e-12)):
        raise ValueError("r exceeds the double-layer radius bound R")
    if check:
        lo, hi = k.valid_t_min, k.valid_t_max
        if np.any(t < lo * (1 - 1e-12)) or np.any(t > hi * (1 + 1e-12)):
            warnings.warn("evaluation outside the validity window",
                          ValidityWarning, stacklevel=2)
    val = evaluate_expsum(k.inner, t, r, check=False)
    if k.outer is not None:
        val = evaluate_power_sum(k.outer, t) * val
    if k.kind == "double_layer":
        val = val * np.asarray(dot_factor, dtype=float)
    return val


def true_kernel(dim, t, r, kind="kernel", dot_factor=1.0):
    """Exact ``G_dim(r, t)`` or ``dot_factor / (2t) * G_dim(r, t)``."""
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    g = np.exp(-r * r / (4.0 * t)) / (4.0 * math.pi * t) ** (dim / 2.0)
    if kind == "double_layer":
        g = g * np.asarray(dot_factor, dtype=float) / (2.0 * t)
    return g


def validate_on_grid(k, nx=50, nt=1000):
    """Maximum weighted error and maximum stability ratio on the validation grid.

    Returns
    -------
    max_weighted_error : float
        ``max |G - G_A| t^p`` with ``p = 1/2, d/2`` or ``(d+2)/2``.  For the
        double layer the radii are capped at ``R`` and the dot factor is
        taken as ``r``, its largest possible value.
    stability_ratio_max : float
        Largest ``sum |w e^{st}| / |sum w e^{st}|`` at ``x = 0``; positive
        outer weights leave the ratio unchanged.
    """
    x, t = validation_grid(k.valid_t_min, k.valid_t_max, nx, nt)
    if k.kind == "double_layer":
        x = x[x <= k.R]
    p = k.weight_exponent
    err = 0.0
    for xi in x:
        dot = xi if k.kind == "double_layer" else 1.0
        approx = evaluate_kernel(k, t, xi, dot, check=False)
        exact = true_kernel(k.dim, t, xi, k.kind, dot)
        err = max(err, float(np.max(np.abs(exact - approx) * t ** p)))
    ratio = float(np.max(stability_ratio(k.inner, t)))
    return err, ratio


def bare_grid_error(sum_, nx=50, nt=1000):
    """Validation of a bare 1D contour sum (weight ``sqrt(t)``)."""
    k = SeparatedKernel(dim=1, inner=sum_, outer=None, target_eps=sum_.target_eps)
    return validate_on_grid(k, nx, nt)

