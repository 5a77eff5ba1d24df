"""Exterior Dirichlet heat problem in 2D by a double-layer Volterra equation.

The solution is represented as ``u = D[sigma]`` with the dipole direction
``nu`` pointing into the curve (out of the exterior domain), so that the
boundary limit gives

    -1/2 sigma + D_L[sigma] = f - D_H[sigma].

The local part uses the moment kernels of :mod:`local_quad`, the history
part the recurrence of :mod:`history`.  Boundary data come from heat
sources inside the curve.
"""
import dataclasses
import logging
import math

import numpy as np
import scipy.linalg

from .geometry import (DEFAULT_POINTS, exterior_targets, interior_sources,
                       make_curve)
from .history import HistoryState, SpatialSumPlan
from .io import bundled_table4
from .kernel import build_dlp_kernel
from .local_quad import (apply_local, assemble_local_matrices,
                         target_local_matrices, taylor_weights)

__all__ = [
    "MarchConfig",
    "SolveRow",
    "SolveReport",
    "exact_solution",
    "assemble_system",
    "march",
    "convergence_study",
    "fit_order",
]

log = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class MarchConfig:
    dt: float
    n_steps: int
    order_k: int = 4
    eps_soe: float = 1e-9
    curve_id: str = "circle"
    n_points: int = None
    quad_order: int = 16
    solver: str = "lu"
    fixed_point_iters: int = None
    n_targets: int = 20
    zero_data: bool = False
    outer_sum: str = "constructed"

    def __post_init__(self):
        if self.order_k not in (2, 3, 4):
            raise ValueError("order_k must be 2, 3 or 4")
        if self.n_steps < 1 or not self.dt > 0:
            raise ValueError("need dt > 0 and n_steps >= 1")
        if self.solver not in ("lu", "fixed_point"):
            raise ValueError("solver must be 'lu' or 'fixed_point'")
        if self.outer_sum not in ("constructed", "bundled"):
            raise ValueError("outer_sum must be 'constructed' or 'bundled'")
        if self.n_points is None:
            object.__setattr__(self, "n_points",
                               DEFAULT_POINTS.get(self.curve_id, 350))

    @property
    def delta(self):
        return (self.order_k - 1) * self.dt

    @property
    def T_final(self):
        return self.n_steps * self.dt


@dataclasses.dataclass
class SolveRow:
    dt: float
    n_steps: int
    K: float
    E: float
    r: float = float("nan")
    t0: float = float("nan")
    n_inner: int = 0
    n_outer: int = 0


@dataclasses.dataclass
class SolveReport:
    curve_id: str
    rows: list = dataclasses.field(default_factory=list)
    plot_data: list = dataclasses.field(default_factory=list)

    def add(self, row):
        if self.rows:
            row.r = self.rows[-1].E / row.E if row.E > 0 else math.inf
        self.rows.append(row)
        return row

    def ratios(self):
        return [self.rows[j - 1].E / self.rows[j].E
                for j in range(1, len(self.rows))]

    def table(self):
        """Rows formatted as ``dt, NT, K, E, r``."""
        return [(row.dt, row.n_steps, row.K, row.E, row.r) for row in self.rows]


def _g2(d2, t):
    return np.exp(-d2 / (4.0 * t)) / (4.0 * math.pi * t)


def exact_solution(sources, x, t):
    """``sum_i q_i G_2(x - p_i, t + t0_i)`` at points ``x`` (shape ``(..., 2)``)."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be nonnegative")
    x = np.asarray(x, dtype=float)
    total = 0.0
    for p, t0, q in sources:
        d = x - np.asarray(p, dtype=float)
        total = total + q * _g2(np.sum(d * d, axis=-1), t + t0)
    return total


def assemble_system(kernels, weights=None):
    """``A = -I/2 + sum_m C[m, 0] / m! K_m`` for the current-time unknown."""
    if weights is None:
        weights = taylor_weights(kernels.order_k, kernels.dt)
    n = kernels.matrices[0].shape[0]
    A = -0.5 * np.eye(n)
    for m, K in enumerate(kernels.matrices):
        A = A + weights[m, 0] / math.factorial(m) * K
    return A


def _dipole_boundary(curve):
    # dipoles point into the curve
    return dataclasses.replace(curve, normals=-curve.normals)


def _known_local(kernels, C, past):
    # local part from the already known snapshots sigma_{n-1}, ..., sigma_{n-k+1}
    k = kernels.order_k
    coeffs = np.zeros((k, past[0].shape[0]))
    for m in range(k):
        for i in range(1, k):
            coeffs[m] += C[m, i] * past[i - 1]
    return apply_local(kernels, coeffs)


class _Marcher:
    def __init__(self, cfg, curve=None, sources=None, targets=None):
        self.cfg = cfg
        base = make_curve(cfg.curve_id, cfg.n_points) if curve is None else curve
        self.curve = _dipole_boundary(base)
        if sources is None:
            sources = interior_sources(cfg.curve_id)
        self.sources = sources
        self.targets = exterior_targets(base, cfg.n_targets) if targets is None \
            else np.asarray(targets, dtype=float)
        k, dt = cfg.order_k, cfg.dt
        self.local = assemble_local_matrices(self.curve, k, dt, cfg.quad_order)
        self.local_t = target_local_matrices(self.curve, self.targets, k, dt)
        self.C = taylor_weights(k, dt)
        self.A = assemble_system(self.local, self.C)
        self.cond = float(np.linalg.cond(self.A))
        self.lu = scipy.linalg.lu_factor(self.A)
        self.plan_b = SpatialSumPlan.from_boundary(self.curve)
        self.plan_t = SpatialSumPlan.from_boundary(self.curve, self.targets)
        T = cfg.T_final
        R = max(self.plan_b.distances.max(), self.plan_t.distances.max(), 1.5)
        delta = cfg.delta
        if cfg.n_steps > k - 1:
            soe_lo = min(delta, T / 1000.0)
            outer = bundled_table4() if cfg.outer_sum == "bundled" else None
            self.kernel = build_dlp_kernel(2, cfg.eps_soe, soe_lo, T, R * 1.001,
                                           outer=outer)
            self.hist_b = HistoryState(self.plan_b, self.kernel, dt, k)
            self.hist_t = HistoryState(self.plan_t, self.kernel, dt, k)
        else:
            self.kernel = None

    def data(self, n):
        if self.cfg.zero_data:
            return np.zeros(self.curve.n_points)
        return exact_solution(self.sources, self.curve.positions, n * self.cfg.dt)

    def solve(self, rhs, guess):
        if self.cfg.solver == "lu":
            return scipy.linalg.lu_solve(self.lu, rhs)
        # sigma = -2 (rhs - (A + I/2) sigma)
        iters = self.cfg.fixed_point_iters or 2 * self.cfg.order_k
        off = self.A + 0.5 * np.eye(self.A.shape[0])
        s = guess
        for _ in range(iters):
            s = -2.0 * (rhs - off @ s)
        return s

    def run(self, emit_plot_data=False):
        cfg = self.cfg
        k = cfg.order_k
        n_b = self.curve.n_points
        zero = np.zeros(n_b)
        sig = [-2.0 * self.data(0)]
        plot = []
        for n in range(1, cfg.n_steps + 1):
            if self.kernel is not None:
                self.hist_b.advance(sigma=sig[n - 1])
                self.hist_t.advance(sigma=sig[n - 1])
                dh = self.hist_b.evaluate()
            else:
                dh = zero
            past = [sig[n - i] if n - i >= 0 else zero for i in range(1, k)]
            rhs = self.data(n) - dh - _known_local(self.local, self.C, past)
            s = self.solve(rhs, sig[-1])
            if not np.all(np.isfinite(s)):
                raise FloatingPointError(f"density became non-finite at step {n}")
            sig.append(s)
            if emit_plot_data:
                plot.append(self.target_error(n, sig))
        return sig, plot

    def target_values(self, n, sig):
        k = self.cfg.order_k
        zero = np.zeros(self.curve.n_points)
        snaps = np.array([sig[n - i] if n - i >= 0 else zero for i in range(k)])
        coeffs = self.C @ snaps
        u = apply_local(self.local_t, coeffs)
        if self.kernel is not None:
            u = u + self.hist_t.evaluate()
        return u

    def target_error(self, n, sig):
        u = self.target_values(n, sig)
        ex = exact_solution(self.sources, self.targets, n * self.cfg.dt)
        return n * self.cfg.dt, u, ex

    def initial_max(self):
        return float(np.max(np.abs(exact_solution(self.sources,
                                                  self.curve.positions, 0.0))))


def march(config, emit_plot_data=False, curve=None, sources=None, targets=None):
    """Run one time march and return ``(SolveRow, densities, plot_data)``.

    ``plot_data`` holds ``(t, computed, exact)`` at the targets per step
    when ``emit_plot_data`` is set.
    """
    m = _Marcher(config, curve, sources, targets)
    sig, plot = m.run(emit_plot_data)
    t, u, ex = m.target_error(config.n_steps, sig)
    denom = math.sqrt(float(np.sum(ex * ex)))
    err = math.sqrt(float(np.sum((u - ex) ** 2)))
    E = err / denom if denom > 0 else err
    t0 = float(m.sources[0][1]) if m.sources else float("nan")
    row = SolveRow(dt=config.dt, n_steps=config.n_steps, K=m.cond, E=E, t0=t0,
                   n_inner=m.kernel.n_inner if m.kernel else 0,
                   n_outer=m.kernel.n_outer if m.kernel else 0)
    log.info("dt=%g NT=%d K=%.3f E=%.3e", config.dt, config.n_steps, m.cond, E)
    return row, sig, plot


def _study_level(cfg, emit_plot_data):
    row, _, plot = march(cfg, emit_plot_data=emit_plot_data)
    return row, plot


def convergence_study(curve_id, levels, order_k=4, eps_soe=1e-9, n_points=None,
                      dt0=0.1, T=1.0, quad_order=16, emit_plot_data=False,
                      workers=None, outer_sum="constructed"):
    """March at ``dt = dt0 2^-l`` for ``l = 0..levels-1`` up to ``T``.

    ``workers > 1`` runs the levels in separate processes; the rows do not
    depend on it.  ``outer_sum="bundled"`` uses the shipped ``t^-3/2`` table
    for the radial factor of the history kernel.
    """
    if levels < 3:
        raise ValueError("levels must be >= 3")
    n0 = int(round(T / dt0))
    if n0 < 1 or abs(n0 * dt0 - T) > 1e-12 * T:
        raise ValueError("T must be a multiple of dt0")
    cfgs = [MarchConfig(dt=dt0 / 2 ** lev, n_steps=n0 * 2 ** lev,
                        order_k=order_k, eps_soe=eps_soe, curve_id=curve_id,
                        n_points=n_points, quad_order=quad_order,
                        outer_sum=outer_sum)
            for lev in range(levels)]
    if workers and workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=min(workers, levels)) as pool:
            # finest (slowest) level first
            futs = [pool.submit(_study_level, c, emit_plot_data)
                    for c in reversed(cfgs)]
            results = [f.result() for f in reversed(futs)]
    else:
        results = [_study_level(c, emit_plot_data) for c in cfgs]
    report = SolveReport(curve_id=curve_id)
    for cfg, (row, plot) in zip(cfgs, results):
        report.add(row)
        if emit_plot_data:
            report.plot_data.append((cfg.dt, plot))
    return report


def fit_order(report):
    """Least-squares slope of ``log2 E`` against ``-log2 dt``."""
    dt = np.array([row.dt for row in report.rows])
    E = np.array([row.E for row in report.rows])
    slope = np.polyfit(-np.log2(dt), np.log2(E), 1)[0]
    return float(-slope)
