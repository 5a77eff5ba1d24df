"""Local part of the double-layer heat potential on a stationary curve.

On ``[t - delta, t]`` the density is expanded as

    sigma(y, tau) = sum_m sigma_m(y) (t - tau)^m / m!,   m = 0..k-1,

which turns the local part into a sum of spatial integrals against the
moment kernels

    M_m(x, y; delta) = int_0^delta u^m d/dn_y G_2(x - y, u) du
                     = c delta^(m-1) E_m(a / delta),

with ``a = |x - y|^2 / 4``, ``c = (x - y).n_y / (8 pi)`` and
``E_0(z) = e^-z / z``.  ``M_0`` is smooth on the curve; for ``m >= 1`` the
kernels carry a logarithmic singularity at ``x = y``.  Its coefficient is
smooth and independent of ``delta``, so the trapezoidal rule is corrected
by a few stencil weights next to the diagonal, built from the end
corrections ``2 zeta'(-2k) h^(2k+1) g^(2k)(0) / (2k)!``.
"""
import dataclasses
import math
import struct

import numpy as np

from scipy.special import zeta

from .specfun import expint_en

__all__ = [
    "MomentKernelSet",
    "moment_kernel",
    "assemble_local_matrices",
    "target_local_matrices",
    "taylor_weights",
    "taylor_coefficients",
    "apply_local",
    "dump_matrix",
    "load_matrix",
    "log_correction_weights",
]

MAX_MOMENT = 3
# exp(-z) with z beyond this is below 1e-17 relative and is dropped
_CUTOFF = math.log(1.0e17)


@dataclasses.dataclass(frozen=True, eq=False)
class MomentKernelSet:
    order_k: int
    dt: float
    delta: float
    quad_order: int
    matrices: tuple

    def __len__(self):
        return len(self.matrices)


def _moment(m, a, dot, delta):
    # a > 0 elementwise
    z = a / delta
    c = dot / (8.0 * math.pi)
    out = np.zeros_like(z)
    live = z < _CUTOFF
    if m == 0:
        out[live] = c[live] * np.exp(-z[live]) / a[live]
    else:
        out[live] = c[live] * delta ** (m - 1) * expint_en(m, z[live])
    return out


def moment_kernel(m, r, dot_factor, delta):
    """Time-integrated normal-derivative kernel ``int_0^delta u^m dG_2/dn_y du``.

    Parameters
    ----------
    m : int
        Moment order, ``0 <= m <= 3``.
    r : float or array_like
        Distance ``|x - y|``.  At ``r = 0`` the value 0 is returned; the
        diagonal limit of ``M_0`` depends on the curvature and is handled
        by :func:`assemble_local_matrices`.
    dot_factor : float or array_like
        ``(x - y) . n_y``.
    delta : float
        Length of the local window.
    """
    if int(m) != m or not 0 <= m <= MAX_MOMENT:
        raise ValueError(f"moment order must be in 0..{MAX_MOMENT}")
    if not delta > 0:
        raise ValueError("delta must be positive")
    r = np.asarray(r, dtype=float)
    dot = np.broadcast_to(np.asarray(dot_factor, dtype=float), r.shape)
    if np.any(r < 0):
        raise ValueError("r must be nonnegative")
    scalar = r.ndim == 0
    r1 = np.atleast_1d(r)
    d1 = np.atleast_1d(dot)
    out = np.zeros(r1.shape)
    nz = r1 > 0
    if np.any(nz):
        out[nz] = _moment(int(m), 0.25 * r1[nz] ** 2, d1[nz], delta)
    return float(out[0]) if scalar else out


def _pair_data(positions, normals, sources):
    d = positions[:, None, :] - sources[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", d, d)
    dot = np.einsum("ijk,jk->ij", d, normals)
    return r2, dot


def zeta_prime_neg_even(k):
    """``zeta'(-2k)`` for ``k >= 1`` from the functional equation."""
    return (-1) ** k * math.factorial(2 * k) * zeta(2 * k + 1) / \
        (2.0 * (2.0 * math.pi) ** (2 * k))


def _fd_weights(order, half):
    # central weights (unit spacing) for the derivative of ``order`` at 0
    p = np.arange(-half, half + 1, dtype=float)
    V = p[None, :] ** np.arange(2 * half + 1)[:, None]
    rhs = np.zeros(2 * half + 1)
    rhs[order] = math.factorial(order)
    return np.linalg.solve(V, rhs)


def log_correction_weights(quad_order):
    """Stencil offsets and weights ``tau_p`` of the corrected trapezoidal rule.

    For ``f(x) = g(x) ln|x| + smooth`` with ``g(0) = 0``,
    ``int f = h sum_{j != 0} f(jh) + h sum_p tau_p g(ph)`` up to
    ``O(h^(quad_order+1))``.
    """
    n_terms = quad_order // 2 - 1
    half = max(n_terms, 1)
    tau = np.zeros(2 * half + 1)
    for k in range(1, n_terms + 1):
        tau += 2.0 * zeta_prime_neg_even(k) * _fd_weights(2 * k, half) / \
            math.factorial(2 * k)
    tau = 0.5 * (tau + tau[::-1])
    return np.arange(-half, half + 1), tau


def _normal_sign(bdry):
    outward = np.stack([bdry.tangents[:, 1], -bdry.tangents[:, 0]], -1)
    return np.sign(np.einsum("ij,ij->i", bdry.normals, outward))


def assemble_local_matrices(bdry, order_k, dt, quad_order=16):
    """Dense matrices ``K_m``, ``m = 0..order_k-1``, for the local window ``(k-1) dt``.

    ``K_m @ sigma`` approximates ``int_Gamma M_m(x_i, y; delta) sigma(y) ds_y``
    at every boundary node.  ``quad_order=2`` uses the plain trapezoidal
    rule with the diagonal left out for ``m >= 1``; ``quad_order`` 8 or 16
    adds the local log corrections of that order.  ``M_0`` is smooth
    and uses the trapezoidal rule with its diagonal limit ``-s kappa / 4 pi``,
    ``s = +1`` for outward normals and ``-1`` for inward ones.
    """
    if order_k not in (2, 3, 4):
        raise ValueError("order_k must be 2, 3 or 4")
    if quad_order not in (2, 8, 16):
        raise ValueError("quad_order must be 2, 8 or 16")
    n_pts = bdry.n_points
    if n_pts < 4 * quad_order:
        raise ValueError(f"need at least {4 * quad_order} boundary points "
                         f"for quad_order={quad_order}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    delta = (order_k - 1) * dt
    x = bdry.positions
    r2, dot = _pair_data(x, bdry.normals, x)
    a = 0.25 * r2
    off = ~np.eye(n_pts, dtype=bool)
    speed = bdry.speed[None, :]
    h = 2.0 * math.pi / n_pts
    mats = []

    kern = np.zeros((n_pts, n_pts))
    kern[off] = _moment(0, a[off], dot[off], delta)
    diag = -_normal_sign(bdry) * bdry.curvatures / (4.0 * math.pi)
    kern[~off] = diag
    mats.append(h * kern * speed)

    if quad_order != 2:
        offsets, tau = log_correction_weights(quad_order)
        keep = offsets != 0
        offsets, tau = offsets[keep], tau[keep]
        rows = np.arange(n_pts)[:, None]
        cols = (rows + offsets[None, :]) % n_pts

    for m in range(1, order_k):
        kern = np.zeros((n_pts, n_pts))
        kern[off] = _moment(m, a[off], dot[off], delta)
        mat = h * kern * speed
        if quad_order != 2:
            # M_m = K1 ln(a) + smooth with K1 independent of delta, so the
            # coefficient of ln|theta - theta_i| is 2 K1
            ai = a[rows, cols]
            k1 = -(dot[rows, cols] / (8.0 * math.pi)) * (-ai) ** (m - 1) \
                / math.factorial(m - 1)
            corr = h * tau[None, :] * 2.0 * k1 * bdry.speed[cols]
            np.add.at(mat, (np.broadcast_to(rows, cols.shape), cols), corr)
        mats.append(mat)

    for mat in mats:
        mat.setflags(write=False)
    return MomentKernelSet(order_k=order_k, dt=dt, delta=delta,
                           quad_order=quad_order, matrices=tuple(mats))


def target_local_matrices(bdry, targets, order_k, dt):
    """Trapezoidal moment matrices from the boundary to off-curve ``targets``."""
    delta = (order_k - 1) * dt
    r2, dot = _pair_data(np.asarray(targets, dtype=float), bdry.normals,
                         bdry.positions)
    if np.any(r2 <= 0):
        raise ValueError("targets must not lie on the boundary nodes")
    w = bdry.arclength_weights[None, :]
    mats = tuple(w * _moment(m, 0.25 * r2, dot, delta) for m in range(order_k))
    return MomentKernelSet(order_k=order_k, dt=dt, delta=delta, quad_order=2,
                           matrices=mats)


def taylor_weights(k, dt):
    """Matrix ``C`` with ``sigma_m = sum_i C[m, i] sigma(t - i dt)``.

    Inverts ``sigma(t - i dt) = sum_m (i dt)^m / m! sigma_m`` exactly, which
    is the backward interpolating polynomial through ``k`` snapshots.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    i = np.arange(k, dtype=float)[:, None] * dt
    m = np.arange(k)[None, :]
    fact = np.array([math.factorial(j) for j in range(k)], dtype=float)
    vander = i ** m / fact
    return np.linalg.inv(vander)


def taylor_coefficients(history, dt, k=None):
    """Expansion coefficients ``sigma_0..sigma_{k-1}`` from ``k`` snapshots.

    ``history[i]`` is the density at ``t - i dt``.  If ``history[0]`` is
    ``None`` (the current value is the unknown) the weight matrix from
    :func:`taylor_weights` is returned instead.
    """
    k = len(history) if k is None else k
    if len(history) < k:
        raise ValueError(f"need {k} snapshots, got {len(history)}")
    C = taylor_weights(k, dt)
    if history[0] is None:
        return C
    snaps = np.array([np.asarray(s, dtype=float) for s in history[:k]])
    return np.tensordot(C, snaps, axes=(1, 0))


def apply_local(kernels, coeffs):
    """``sum_m K_m sigma_m / m!``."""
    coeffs = np.asarray(coeffs)
    if coeffs.shape[0] != len(kernels):
        raise ValueError(f"expected {len(kernels)} coefficient vectors, "
                         f"got {coeffs.shape[0]}")
    out = None
    for m, (K, s) in enumerate(zip(kernels.matrices, coeffs)):
        if K.shape[1] != s.shape[0]:
            raise ValueError("coefficient length does not match the matrices")
        term = K @ s / math.factorial(m)
        out = term if out is None else out + term
    return out


_HEADER = struct.Struct("<qqd")


def dump_matrix(path, matrix, m, delta):
    """Write ``matrix`` as row-major float64 after an ``(N_S, m, delta)`` header."""
    matrix = np.ascontiguousarray(matrix, dtype="<f8")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(matrix.shape[0], int(m), float(delta)))
        f.write(matrix.tobytes())


def load_matrix(path):
    with open(path, "rb") as f:
        n, m, delta = _HEADER.unpack(f.read(_HEADER.size))
        data = np.frombuffer(f.read(), dtype="<f8")
    if data.size % n:
        raise ValueError("corrupt matrix file")
    return data.reshape(n, -1).copy(), m, delta
