"""Sums of decaying real exponentials approximating ``scale / t^beta``.

Construction: the trapezoidal rule applied to

    t^{-beta} = (1 / Gamma(beta)) int_R exp(beta s - t e^s) ds,

truncated where the integrand tails fall below the target, followed by an
optional reduction of the slowly decaying terms.  Those terms are nearly
constant on ``[delta, T]``; their partial sum is resampled on an equispaced
grid and refit with fewer exponentials by the matrix-pencil method.
"""
import dataclasses
import logging
import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammainc, gammaincc

from .specfun import ln_gamma

__all__ = [
    "PowerSum",
    "ReductionFailed",
    "trapezoid_step",
    "build_power_sum",
    "verify_power_sum",
    "reduce_power_sum",
    "evaluate_power_sum",
]

log = logging.getLogger(__name__)


class ReductionFailed(RuntimeError):
    pass


@dataclasses.dataclass(frozen=True, eq=False)
class PowerSum:
    """``sum_i w_i exp(-lambda_i t) ~ scale * t^(-beta)`` on ``[valid_t_min, valid_t_max]``."""

    beta: float
    weights: np.ndarray
    rates: np.ndarray
    valid_t_min: float
    valid_t_max: float
    target_eps: float
    scale: float = 1.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        lam = np.asarray(self.rates, dtype=float).ravel()
        if w.shape != lam.shape:
            raise ValueError("weights and rates must have the same length")
        order = np.argsort(lam, kind="stable")
        w, lam = w[order], lam[order]
        w.setflags(write=False)
        lam.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "rates", lam)

    def __len__(self):
        return self.rates.size

    def is_positive(self):
        return bool(np.all(self.weights > 0) and np.all(self.rates >= 0))

    def scaled(self, factor):
        return dataclasses.replace(self, weights=self.weights * factor,
                                   scale=self.scale * factor)


def evaluate_power_sum(ps, t):
    t = np.asarray(t, dtype=float)
    val = (ps.weights * np.exp(-ps.rates * t[..., None])).sum(axis=-1)
    return float(val) if val.ndim == 0 else val


def trapezoid_step(beta, eps):
    return 2.0 * math.pi / (math.log(3.0) + math.log(1.0 / math.cos(1.0)) / beta
                            + math.log(1.0 / eps))


def _raw_trapezoid(beta, eps, delta, T, h):
    tail = eps / 4.0
    # lower tail: terms with e^s T below u_lo; exact relative error at t = T
    u_lo = brentq(lambda u: gammainc(beta, u) - tail, 1e-300, 60.0,
                  xtol=1e-300, rtol=1e-12)
    # upper tail: relative error at t = delta
    v_hi = brentq(lambda v: gammaincc(beta, v) - tail, 1e-8, 1e4, rtol=1e-12)
    k0 = math.floor(math.log(u_lo / T) / h)
    k1 = math.ceil(math.log(v_hi / delta) / h)
    s = np.arange(k0, k1 + 1) * h
    lg = ln_gamma(beta)
    return np.exp(beta * s + math.log(h) - lg), np.exp(s)


def verify_power_sum(ps, grid_size=1000, delta=None, T=None):
    """Max over a log grid of ``|t^beta S(t) / scale - 1|``."""
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    delta = ps.valid_t_min if delta is None else delta
    T = ps.valid_t_max if T is None else T
    t = np.logspace(math.log10(delta), math.log10(T), grid_size)
    approx = evaluate_power_sum(ps, t) / ps.scale
    return float(np.max(np.abs(t ** ps.beta * approx - 1.0)))


def _pencil(weights, rates, T, rtol, n_half=60):
    """Refit ``sum w exp(-lam t)`` on [0, 2T] with fewer exponentials."""
    dt = T / n_half
    m = np.arange(2 * n_half + 1) * dt
    g = (weights * np.exp(-np.outer(m, rates))).sum(axis=1)
    H = np.lib.stride_tricks.sliding_window_view(g, n_half + 1)[:n_half]
    U, S, _ = np.linalg.svd(H)
    r = int(np.sum(S > rtol * S[0]))
    if r == 0:
        return None
    Ur = U[:, :r]
    z = np.linalg.eigvals(np.linalg.pinv(Ur[:-1]) @ Ur[1:])
    if np.any(np.abs(z.imag) > 1e-10) or np.any(z.real <= 0) or \
            np.any(z.real >= 1):
        return None
    mu = -np.log(z.real) / dt
    V = np.exp(-np.outer(m, mu))
    c, *_ = np.linalg.lstsq(V, g, rcond=None)
    return c, mu


_CUTS = (0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0)
_RTOLS = (1e-11, 1e-12, 1e-13, 1e-14)


def reduce_power_sum(ps, eps, strict=False):
    """Reduce the number of terms while keeping deviation from ``ps`` below ``eps/2``.

    The deviation is measured relative to ``scale * t^-beta`` on a 1000-point
    log grid over the validity window.  Returns ``ps`` itself when no smaller
    positive sum is found; with ``strict=True`` that case raises
    :class:`ReductionFailed` instead.
    """
    if len(ps) == 0:
        return ps
    delta, T = ps.valid_t_min, ps.valid_t_max
    t = np.logspace(math.log10(delta), math.log10(T), 1000)
    ref = evaluate_power_sum(ps, t)
    target = ps.scale * t ** (-ps.beta)
    best = ps
    for cut in _CUTS:
        low = ps.rates * T <= cut
        if low.sum() < 3:
            continue
        for rtol in _RTOLS:
            fit = _pencil(ps.weights[low], ps.rates[low], T, rtol)
            if fit is None:
                continue
            c, mu = fit
            if np.any(c <= 0) or np.any(mu <= 0):
                continue
            n_new = c.size + int((~low).sum())
            if n_new >= len(best):
                continue
            cand = dataclasses.replace(ps, weights=np.r_[c, ps.weights[~low]],
                                       rates=np.r_[mu, ps.rates[~low]])
            dev = np.max(np.abs(evaluate_power_sum(cand, t) - ref) / target)
            if dev <= eps / 2:
                best = cand
                break
    if best is ps:
        if strict and len(ps) > 0:
            raise ReductionFailed("no smaller positive sum found")
        log.debug("power-sum reduction kept all %d terms", len(ps))
    return best


def build_power_sum(beta, eps, delta, T, scale=1.0, h=None, reduce=True):
    """Positive exponential sum with relative error ``<= eps`` on ``[delta, T]``.

    Parameters
    ----------
    beta : float
        Exponent, ``beta >= 1/2``.
    eps : float
        Target relative accuracy, ``0 < eps <= 1/e``.
    delta, T : float
        Validity window with ``T > 3 delta > 0``.
    scale : float
        The sum approximates ``scale * t^-beta``.
    h : float, optional
        Trapezoidal step in the log-rate variable (default from ``eps``).
    reduce : bool
        Apply :func:`reduce_power_sum` after the trapezoidal construction.
        Half of ``eps`` is then reserved for the reduction.
    """
    if beta < 0.5:
        raise ValueError("beta must be >= 1/2")
    if not 0.0 < eps <= 1.0 / math.e:
        raise ValueError("eps must lie in (0, 1/e]")
    if not T > 3.0 * delta > 0.0:
        raise ValueError("need T > 3 delta > 0")
    eps_raw = eps / 2.0 if reduce else eps
    if h is None:
        h = trapezoid_step(beta, eps_raw)
    w, lam = _raw_trapezoid(beta, eps_raw, delta, T, h)
    ps = PowerSum(beta=beta, weights=w * scale, rates=lam, valid_t_min=delta,
                  valid_t_max=T, target_eps=eps, scale=scale)
    if reduce:
        ps = reduce_power_sum(ps, eps)
    return ps
