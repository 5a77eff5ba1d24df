"""Hyperbolic-contour sum-of-exponentials for the 1D heat kernel.

The kernel ``G(x, t) = exp(-x^2/4t) / sqrt(4 pi t)`` has Laplace transform
``exp(-sqrt(s)|x|) / (2 sqrt(s))``.  Discretizing the Bromwich integral on
the left branch of the hyperbola ``s = lam (1 - sin(alpha + i u))`` with the
midpoint rule gives

    G(x, t) ~ sum_k w_k exp(s_k t - sqrt(s_k) |x|)

with conjugate-symmetric nodes.  Only the nodes with ``u > 0`` (lower half
plane) are stored; evaluation takes twice the real part.
"""
import dataclasses
import math
import warnings

import numpy as np

__all__ = [
    "ContourParams",
    "ExpSum",
    "ValidityWarning",
    "make_params",
    "select_params",
    "build_contour_sum",
    "error_bound",
    "evaluate_expsum",
    "heat_kernel_1d",
    "validation_grid",
    "grid_error",
    "stability_ratio",
]

EPS_FLOOR = 1.0e-12
DEFAULT_ALPHA = 0.8
DEFAULT_BETA = 0.7


class ValidityWarning(UserWarning):
    """Evaluation or construction outside the guaranteed regime."""


@dataclasses.dataclass(frozen=True)
class ContourParams:
    alpha: float
    beta: float
    theta: float
    n: int
    h: float
    lam: float
    a_theta: float
    delta: float
    T: float
    eps: float = float("nan")

    def as_dict(self):
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True, eq=False)
class ExpSum:
    """Half-plane list of exponential nodes and weights.

    ``conjugate=True`` means the conjugate of every stored pair is implied.
    """

    nodes: np.ndarray
    weights: np.ndarray
    valid_t_min: float
    valid_t_max: float
    target_eps: float
    conjugate: bool = True
    params: ContourParams = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=complex).ravel()
        weights = np.asarray(self.weights, dtype=complex).ravel()
        if nodes.shape != weights.shape:
            raise ValueError("nodes and weights must have the same length")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.nodes.size

    @property
    def n_terms(self):
        """Number of terms in the full (conjugate-completed) sum."""
        return 2 * len(self) if self.conjugate else len(self)

    def full(self):
        """Return all nodes and weights with conjugates made explicit."""
        if not self.conjugate:
            return self.nodes.copy(), self.weights.copy()
        return (np.concatenate([self.nodes, self.nodes.conj()]),
                np.concatenate([self.weights, self.weights.conj()]))

    def truncated(self, count):
        return dataclasses.replace(self, nodes=self.nodes[:count],
                                   weights=self.weights[:count])


def _default_theta(delta, T):
    return 0.9 if T / delta <= 1.0e3 else 0.95


def make_params(n, delta, T, alpha=DEFAULT_ALPHA, beta=DEFAULT_BETA,
                theta=None, eps=float("nan")):
    """Contour parameters for ``n`` nodes per half contour on ``[delta, T]``."""
    if theta is None:
        theta = _default_theta(delta, T)
    if not 0.0 < alpha - beta < alpha + beta < math.pi / 2:
        raise ValueError("need 0 < alpha - beta < alpha + beta < pi/2")
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    if not 0.0 < delta < T:
        raise ValueError("need 0 < delta < T")
    if n < 1:
        raise ValueError("n must be a positive integer")
    if T < 1000.0 * delta:
        warnings.warn(f"T/delta = {T / delta:.3g} < 1000: outside the regime "
                      "covered by the a-priori estimate", ValidityWarning,
                      stacklevel=2)
    a_theta = math.acosh(2.0 * T / (delta * (1.0 - theta) * math.sin(alpha)))
    h = a_theta / n
    lam = 2.0 * math.pi * beta * n * (1.0 - theta) / (T * a_theta)
    return ContourParams(alpha=alpha, beta=beta, theta=theta, n=int(n), h=h,
                         lam=lam, a_theta=a_theta, delta=delta, T=T, eps=eps)


def build_contour_sum(params):
    """Midpoint-rule nodes ``s_k = lam (1 - sin(alpha + i k h))``, k = 1/2, 3/2, ...

    Weights are ``w_k = -h s'_k / (4 pi i sqrt(s_k))`` with
    ``s'_k = -i lam cos(alpha + i k h)``.
    """
    p = params
    u = (np.arange(p.n) + 0.5) * p.h
    arg = p.alpha + 1j * u
    s = p.lam * (1.0 - np.sin(arg))
    ds = -1j * p.lam * np.cos(arg)
    w = -p.h * ds / (4j * math.pi * np.sqrt(s))
    return ExpSum(nodes=s, weights=w, valid_t_min=p.delta, valid_t_max=p.T,
                  target_eps=p.eps, conjugate=True, params=p)


def _phi(alpha, beta):
    sab = math.sin(alpha + beta)
    return (2.0 / math.pi) * math.sqrt((1.0 + sab) / (1.0 - sab)) * \
        math.sqrt(math.e * math.sin(alpha - beta))


def _L(x):
    return 1.0 + abs(math.log(-math.expm1(-x)))


def error_bound(params, t):
    """A-priori bound on ``|G(x, t) - G_A(x, t)|`` for ``delta <= t <= T``."""
    p = params
    if not p.delta * (1 - 1e-12) <= t <= p.T * (1 + 1e-12):
        raise ValueError("t outside [delta, T]")
    arg = p.lam * p.delta * math.sin(p.alpha - p.beta) / 2.0
    return (_phi(p.alpha, p.beta) * _L(arg)
            * math.exp(-2.0 * math.pi * p.theta * p.beta * p.n / p.a_theta)
            / math.sqrt(t))


def _check_window(sum_, t):
    tmin = np.min(t)
    tmax = np.max(t)
    lo = sum_.valid_t_min * (1 - 1e-12)
    hi = sum_.valid_t_max * (1 + 1e-12)
    if tmin < lo or tmax > hi:
        warnings.warn("evaluation outside the validity window "
                      f"[{sum_.valid_t_min:g}, {sum_.valid_t_max:g}]",
                      ValidityWarning, stacklevel=3)


def evaluate_expsum(sum_, t, x_abs=0.0, check=True):
    """Evaluate ``sum_k w_k exp(s_k t - sqrt(s_k) x)`` (real part).

    ``t`` and ``x_abs`` broadcast against each other.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x_abs, dtype=float)
    if check:
        _check_window(sum_, t)
    shape = np.broadcast_shapes(t.shape, x.shape)
    tt = np.broadcast_to(t, shape)[..., None]
    xx = np.broadcast_to(x, shape)[..., None]
    s = sum_.nodes
    z = sum_.weights * np.exp(s * tt - np.sqrt(s) * xx)
    total = z.sum(axis=-1)
    val = 2.0 * total.real if sum_.conjugate else total.real
    return float(val) if val.ndim == 0 else val


def heat_kernel_1d(x, t):
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    return np.exp(-x * x / (4.0 * t)) / np.sqrt(4.0 * np.pi * t)


def validation_grid(delta, T, nx=50, nt=1000):
    """Radii ``0, 2^-15, ..., 2^(nx-17)`` and log-equispaced times."""
    x = np.concatenate([[0.0], 2.0 ** (-16.0 + np.arange(1, nx))])
    t = np.logspace(math.log10(delta), math.log10(T), nt)
    return x, t


def grid_error(sum_, nx=50, nt=1000, delta=None, T=None):
    """Max of ``sqrt(t) |G - G_A|`` over the validation grid."""
    delta = sum_.valid_t_min if delta is None else delta
    T = sum_.valid_t_max if T is None else T
    x, t = validation_grid(delta, T, nx, nt)
    err = 0.0
    for xi in x:
        approx = evaluate_expsum(sum_, t, xi, check=False)
        err = max(err, float(np.max(np.abs(heat_kernel_1d(xi, t) - approx)
                                    * np.sqrt(t))))
    return err


def stability_ratio(sum_, t):
    """``sum |w e^{st}| / |sum w e^{st}|`` at ``x = 0`` over all terms."""
    t = np.asarray(t, dtype=float)[..., None]
    terms = sum_.weights * np.exp(sum_.nodes * t)
    factor = 2.0 if sum_.conjugate else 1.0
    num = factor * np.abs(terms).sum(axis=-1)
    den = np.abs(factor * terms.sum(axis=-1).real if sum_.conjugate
                 else terms.sum(axis=-1))
    return num / den


def select_params(eps, delta, T, mode="empirical", alpha=DEFAULT_ALPHA,
                  beta=DEFAULT_BETA, theta=None, n_max=1000, nx=50, nt=1000):
    """Choose the node count ``n`` for target accuracy ``eps`` on ``[delta, T]``.

    ``mode="bound"`` returns the smallest ``n`` whose a-priori bound is below
    ``eps`` at ``t = T``, i.e. ``sqrt(t) |G - G_A| <= eps`` on the window.
    ``mode="empirical"`` returns the smallest ``n`` whose measured weighted
    error on the validation grid is below ``eps``.
    """
    if not 0.0 < eps < 0.1:
        raise ValueError("eps must lie in (0, 0.1)")
    if not 0.0 < delta < T:
        raise ValueError("need 0 < delta < T")
    if eps < EPS_FLOOR:
        raise ValueError(f"eps below the double-precision floor {EPS_FLOOR:g}")
    if theta is None:
        theta = _default_theta(delta, T)

    def params(n):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ValidityWarning)
            return make_params(n, delta, T, alpha, beta, theta, eps)

    if T < 1000.0 * delta:
        warnings.warn(f"T/delta = {T / delta:.3g} < 1000", ValidityWarning,
                      stacklevel=2)

    if mode == "bound":
        for n in range(1, n_max + 1):
            p = params(n)
            if error_bound(p, T) * math.sqrt(T) <= eps:
                return p
        raise RuntimeError("no n <= n_max meets the bound")
    if mode != "empirical":
        raise ValueError(f"unknown mode {mode!r}")

    def ok(n):
        return grid_error(build_contour_sum(params(n)), nx, nt) <= eps

    # exponential search then bisection; the grid error is monotone in n
    # to within a node or two, so finish with a short linear scan down
    hi = 4
    while not ok(hi):
        hi *= 2
        if hi > n_max:
            raise RuntimeError("no n <= n_max meets the target")
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    n = hi
    while n > 1 and ok(n - 1):
        n -= 1
    return params(n)
