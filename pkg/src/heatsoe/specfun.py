"""Special functions used by the kernel constructions.

The generalized exponential integral is implemented here (vectorized over
``x``) because the local moment kernels evaluate it on whole N_S x N_S
distance matrices.  ``ln_gamma`` and ``erf`` are thin validated wrappers
around the standard library.
"""
import math

import numpy as np

EULER_GAMMA = 0.57721566490153286061

_EPS = 1.0e-16
_CF_EPS = 4.0e-16
_FPMIN = 1.0e-300
_MAXIT = 2000

__all__ = ["expint_en", "ln_gamma", "erf"]


def _en_series(n, x):
    # 0 < x <= 1
    if n == 1:
        ans = -np.log(x) - EULER_GAMMA
    else:
        ans = np.full_like(x, 1.0 / (n - 1))
    fact = np.ones_like(x)
    psi_n = -EULER_GAMMA + sum(1.0 / k for k in range(1, n))
    for i in range(1, _MAXIT + 1):
        fact = fact * (-x / i)
        if i != n - 1:
            delta = -fact / (i - n + 1)
        else:
            delta = fact * (-np.log(x) + psi_n)
        ans = ans + delta
        if np.all(np.abs(delta) <= np.abs(ans) * _EPS):
            return ans
    raise RuntimeError("E_n series failed to converge")


def _en_contfrac(n, x):
    # x > 1, modified Lentz evaluation of the continued fraction
    b = x + n
    c = np.full_like(x, 1.0 / _FPMIN)
    d = 1.0 / b
    h = d.copy()
    done = np.zeros(x.shape, dtype=bool)
    for i in range(1, _MAXIT + 1):
        an = -i * (n - 1.0 + i)
        b = b + 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = np.where(done, 1.0, c * d)
        h = h * delta
        done |= np.abs(delta - 1.0) <= _CF_EPS
        if np.all(done):
            return h * np.exp(-x)
    raise RuntimeError("E_n continued fraction failed to converge")


def expint_en(n, x):
    """Generalized exponential integral ``E_n(x) = int_1^inf e^{-xt} t^{-n} dt``.

    Parameters
    ----------
    n : int
        Order, ``n >= 1``.
    x : float or array_like
        Argument, strictly positive.

    Returns
    -------
    float or ndarray
        ``E_n(x)`` with the shape of ``x``.  Values underflow to 0 for
        ``x`` beyond roughly 745.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"expint_en requires integer n >= 1, got {n!r}")
    n = int(n)
    scalar = np.ndim(x) == 0
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(~(xa > 0.0)):
        raise ValueError("expint_en requires x > 0")
    out = np.empty_like(xa)
    small = xa <= 1.0
    if np.any(small):
        out[small] = _en_series(n, xa[small])
    big = ~small
    if np.any(big):
        xb = xa[big]
        res = np.zeros_like(xb)
        live = xb < 746.0
        if np.any(live):
            res[live] = _en_contfrac(n, xb[live])
        out[big] = res
    return float(out[0]) if scalar else out


def ln_gamma(x):
    """Natural log of the gamma function for ``x > 0``."""
    if not x > 0:
        raise ValueError(f"ln_gamma requires x > 0, got {x!r}")
    return math.lgamma(x)


def erf(x):
    """Real error function; accepts scalars or arrays."""
    if np.ndim(x) == 0:
        return math.erf(float(x))
    return np.vectorize(math.erf, otypes=[float])(x)
