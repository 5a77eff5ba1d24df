"""History part of the double-layer heat potential by exponential recurrence.

With a separated double-layer kernel

    D(x, y; u) ~ (x-y).n_y sum_j wt_j e^{-lam_j u} 2 Re sum_k w_k e^{s_k u - sqrt(s_k)|x-y|},

the history part ``D_H(x, t) = int_0^{t-delta} int_Gamma D sigma ds dtau`` is

    D_H(x, t) = 2 Re sum_{j,k} wt_j w_k H_jk(x, t),
    H_jk(x, t) = int_0^{t-delta} exp(z_jk (t - tau)) V_k(x, tau) dtau,
    V_k(x, tau) = int_Gamma e^{-sqrt(s_k)|x-y|} (x-y).n_y sigma(y, tau) ds_y,

with ``z_jk = s_k - lam_j``.  Each step multiplies ``H`` by ``exp(z dt)`` and
adds one panel integral of ``V_k``, which is interpolated by a polynomial on
a stencil of ``order_k`` samples and integrated against the exponential in
closed form.
"""
import dataclasses
import math
import struct

import numpy as np

__all__ = [
    "SpatialSumPlan",
    "HistoryState",
    "compute_vk",
    "exp_moments",
    "panel_stencil",
    "panel_weights",
    "direct_history",
    "evaluate_history",
]


@dataclasses.dataclass(frozen=True, eq=False)
class SpatialSumPlan:
    """Geometry of the sums ``V_k`` from boundary sources to a set of targets."""

    distances: np.ndarray
    dots: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_boundary(cls, bdry, targets=None):
        x = bdry.positions if targets is None else np.asarray(targets, float)
        d = x[:, None, :] - bdry.positions[None, :, :]
        r = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
        dots = np.einsum("ijk,jk->ij", d, bdry.normals)
        if targets is None:
            np.fill_diagonal(dots, 0.0)
        return cls(distances=r, dots=dots,
                   weights=np.asarray(bdry.arclength_weights, dtype=float))

    @property
    def shape(self):
        return self.distances.shape

    def dipole(self):
        """``w_j (x_i - y_j).n_j``, the spatial weight common to every mode."""
        return self.dots * self.weights[None, :]


def compute_vk(plan, sigma, s_k):
    """``V_k(x_i) = sum_j w_j exp(-sqrt(s_k) r_ij) d_ij sigma_j`` (dense)."""
    sigma = np.asarray(sigma)
    if sigma.shape != (plan.shape[1],):
        raise ValueError("sigma does not match the plan")
    root = np.sqrt(complex(s_k))
    return (np.exp(-root * plan.distances) * plan.dipole()) @ sigma


def exp_moments(zeta, order):
    """``mu_r(zeta) = int_0^1 v^r exp(zeta (1 - v)) dv`` for ``r < order``.

    Power series for ``|zeta| < 1``, upward recurrence otherwise.
    Returns an array of shape ``(order,) + zeta.shape``.
    """
    zeta = np.asarray(zeta, dtype=complex)
    out = np.empty((order,) + zeta.shape, dtype=complex)
    small = np.abs(zeta) < 1.0
    zs = zeta[small]
    for r in range(order):
        # sum_m zeta^m r! / (r + m + 1)!
        term = np.full(zs.shape, 1.0 / (r + 1), dtype=complex)
        acc = term.copy()
        for m in range(1, 40):
            term = term * zs / (r + m + 1)
            acc = acc + term
        out[r][small] = acc
    zb = zeta[~small]
    if zb.size:
        mu = np.expm1(zb) / zb
        out[0][~small] = mu
        for r in range(1, order):
            mu = (-1.0 + r * mu) / zb
            out[r][~small] = mu
    return out


def panel_stencil(order_k, delay):
    """Stencil offset ``off`` and ring length for a panel ``delay`` steps back.

    The panel ``[t_{q-d}, t_{q-d+1}]`` (``q`` the newest sample) is
    interpolated through samples ``q-d-off, ..., q-d-off+order_k-1``.
    """
    p = order_k
    off = max((p - 2) // 2, p - 1 - delay)
    if off > (p - 1):
        raise ValueError("delay too short for the stencil")
    return off, delay + off + 1


def panel_weights(z, dt, order_k, delay):
    """Weights ``omega[i]`` so that the panel integral is ``sum_i omega[i] V(stencil i)``.

    ``z`` may be an array; the result has shape ``(order_k,) + z.shape``.
    """
    p = order_k
    off, _ = panel_stencil(order_k, delay)
    nodes = np.arange(p, dtype=float) - off
    vinv = np.linalg.inv(nodes[:, None] ** np.arange(p)[None, :])
    z = np.asarray(z, dtype=complex)
    mu = exp_moments(z * dt, p)
    scale = dt * np.exp(z * delay * dt)
    return scale * np.tensordot(vinv.T, mu, axes=(1, 0))


class HistoryState:
    """Modes ``H[j, k, i]`` plus the ring of recent ``V_k`` samples.

    Parameters
    ----------
    plan : SpatialSumPlan
        Sources and targets of the spatial sums.
    kernel : SeparatedKernel
        Double-layer kernel with real outer and contour inner sums.
    dt : float
        Time step.
    order_k : int
        Interpolation order of the panel rule; the local window is
        ``delta = (order_k - 1) dt``.
    prune : float, optional
        Drop the ``(j, k)`` pairs whose magnitude for ``u >= delta`` is below
        ``prune`` times the largest one.
    """

    def __init__(self, plan, kernel, dt, order_k, delay=None, prune=0.0):
        self.plan = plan
        self.dt = float(dt)
        self.order_k = int(order_k)
        self.delay = order_k - 1 if delay is None else int(delay)
        self.off, self.ring_len = panel_stencil(self.order_k, self.delay)
        inner, outer = kernel.inner, kernel.outer
        z = inner.nodes[None, :] - outer.rates[:, None]
        coef = outer.weights[:, None] * inner.weights[None, :]
        keep = np.ones(z.shape, dtype=bool)
        if prune > 0:
            uu = self.delay * self.dt
            size = np.abs(coef * np.exp(z * uu))
            keep = size >= prune * size.max()
        self.pairs = np.nonzero(keep)
        self.z = z[self.pairs]
        self.coef = coef[self.pairs]
        self.k_index = self.pairs[1]
        self.roots = np.sqrt(inner.nodes)
        self.decay = np.exp(self.z * self.dt)
        self.omega = panel_weights(self.z, self.dt, self.order_k, self.delay)
        n_t = plan.shape[0]
        self.modes = np.zeros((self.z.size, n_t), dtype=complex)
        self.ring = np.zeros((self.ring_len, inner.nodes.size, n_t),
                             dtype=complex)
        self._head = 0
        self.steps = 0
        self.counters = {"mode_updates": 0, "vk_evals": 0}
        self._expo = None

    @property
    def current_time(self):
        return self.steps * self.dt

    @property
    def nbytes(self):
        return self.modes.nbytes + self.ring.nbytes

    def spatial_factors(self):
        """Cached ``exp(-sqrt(s_k) r) w d`` matrices, shape ``(K, N_t, N_s)``."""
        if self._expo is None:
            dip = self.plan.dipole()
            self._expo = np.exp(-self.roots[:, None, None]
                                * self.plan.distances[None]) * dip[None]
        return self._expo

    def compute_v(self, sigma):
        """All ``V_k`` for one density snapshot, shape ``(K, N_t)``."""
        self.counters["vk_evals"] += self.roots.size
        return self.spatial_factors() @ np.asarray(sigma, dtype=float)

    def push(self, vk):
        self._head = (self._head + 1) % self.ring_len
        self.ring[self._head] = vk

    def sample(self, lag):
        """``V`` at ``lag`` steps behind the newest sample."""
        return self.ring[(self._head - lag) % self.ring_len]

    def advance(self, vk=None, sigma=None):
        """Push the newest ``V`` sample (for ``t_q``) and step the modes to ``t_{q+1}``.

        The panel ``[t_{q-d}, t_{q-d+1}]`` is added once ``q - d >= 0``; before
        that the history window is empty and the modes stay zero.
        """
        if vk is None:
            if sigma is None:
                raise ValueError("pass vk or sigma")
            vk = self.compute_v(sigma)
        vk = np.asarray(vk)
        if vk.shape != self.ring.shape[1:]:
            raise ValueError("V sample has the wrong shape")
        self.push(vk)
        q = self.steps
        self.modes *= self.decay[:, None]
        if q - self.delay >= 0:
            for i in range(self.order_k):
                lag = self.delay + self.off - i
                samp = self.sample(lag)[self.k_index]
                self.modes += self.omega[i][:, None] * samp
        self.steps += 1
        self.counters["mode_updates"] += self.modes.size
        if not np.all(np.isfinite(self.modes)):
            raise FloatingPointError("history modes became non-finite")
        return self

    def evaluate(self):
        """``D_H`` at the targets: ``2 Re sum wt_j w_k H_jk``."""
        return 2.0 * (self.coef[:, None] * self.modes).sum(axis=0).real

    _MAGIC = b"HSTATE01"

    def save(self, path):
        hdr = struct.pack("<8sqqqqq", self._MAGIC, self.modes.shape[0],
                          self.modes.shape[1], self.ring.shape[1],
                          self.steps, self._head)
        with open(path, "wb") as f:
            f.write(hdr)
            f.write(np.ascontiguousarray(self.modes, "<c16").tobytes())
            f.write(np.ascontiguousarray(self.ring, "<c16").tobytes())

    def load(self, path):
        size = struct.calcsize("<8sqqqqq")
        with open(path, "rb") as f:
            magic, nm, nt, nk, steps, head = struct.unpack("<8sqqqqq",
                                                           f.read(size))
            if magic != self._MAGIC or (nm, nt) != self.modes.shape or \
                    nk != self.ring.shape[1]:
                raise ValueError("checkpoint does not match this state")
            data = np.frombuffer(f.read(), dtype="<c16")
        self.modes = data[:self.modes.size].reshape(self.modes.shape).copy()
        self.ring = data[self.modes.size:].reshape(self.ring.shape).copy()
        self.steps, self._head = steps, head
        return self


def evaluate_history(state, outer=None, inner=None):
    return state.evaluate()


def _dlp_true(plan, u):
    # w_j (x-y).n G_2(r, u) / (2u)
    g = np.exp(-plan.distances ** 2 / (4.0 * u)) / (4.0 * math.pi * u)
    return plan.dipole() * g / (2.0 * u)


def direct_history(plan, sigmas, dt, order_k, n, delay=None, n_gauss=12):
    """Reference ``D_H(t_n)`` from the exact kernel; ``O(n N_t N_s)`` per call.

    ``sigmas[m]`` is the density at ``t_m``; negative indices are zero.  The
    density on each panel is the same local interpolant used by
    :class:`HistoryState`, so the two agree up to the kernel approximation.
    """
    delay = order_k - 1 if delay is None else delay
    off, _ = panel_stencil(order_k, delay)
    nodes = np.arange(order_k, dtype=float) - off
    vinv = np.linalg.inv(nodes[:, None] ** np.arange(order_k)[None, :])
    gx, gw = np.polynomial.legendre.leggauss(n_gauss)
    v = 0.5 * (gx + 1.0)
    gw = 0.5 * gw
    # Lagrange basis on the stencil at the Gauss points: (n_gauss, order_k)
    basis = (v[:, None] ** np.arange(order_k)[None, :]) @ vinv
    m_t = plan.shape[0]
    total = np.zeros(m_t)

    def sig(m):
        return sigmas[m] if 0 <= m < len(sigmas) else np.zeros(plan.shape[1])

    # panels [t_a, t_{a+1}] for a = 0 .. n - delay - 1
    for a in range(0, n - delay):
        stencil = np.array([sig(a - off + i) for i in range(order_k)])
        for g in range(n_gauss):
            tau = (a + v[g]) * dt
            dens = basis[g] @ stencil
            total += gw[g] * dt * (_dlp_true(plan, n * dt - tau) @ dens)
    return total
