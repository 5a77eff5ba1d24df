"""Timing of the recursive history update against direct convolution.

Both paths evaluate ``D_H(t_n)`` at every step ``n = 1..N_T`` for the same
manufactured density on a circle.  The recursive path costs the same per
step; the direct path revisits every earlier panel, so its total work grows
like ``N_T^2``.
"""
import math
import time

import numpy as np

from .geometry import make_curve
from .history import HistoryState, SpatialSumPlan, direct_history
from .kernel import build_dlp_kernel

__all__ = ["manufactured_density", "run_bench", "fitted_exponent",
           "memory_model"]

DEFAULT_SIZES = (20, 40, 80, 160)


def manufactured_density(curve, dt, n_steps):
    """Smooth density vanishing at ``t = 0``, one row per time level."""
    t = dt * np.arange(n_steps + 1)
    space = 1.0 + 0.3 * np.cos(curve.theta) + 0.2 * np.sin(3 * curve.theta)
    return (t ** 2 * np.exp(-t))[:, None] * space[None, :]


def fitted_exponent(sizes, times):
    """Slope of ``log time`` against ``log N_T``."""
    return float(np.polyfit(np.log(sizes), np.log(times), 1)[0])


def memory_model(n_targets, kernel):
    """``N_S N_2 (2 N_1 + 1) 16`` bytes, ``N_1`` the stored contour nodes."""
    return n_targets * kernel.n_outer * (2 * kernel.n_inner + 1) * 16


def _soe_run(plan, kernel, sig, dt, order_k, n_steps):
    state = HistoryState(plan, kernel, dt, order_k)
    out = np.empty((n_steps, plan.shape[0]))
    for n in range(1, n_steps + 1):
        state.advance(sigma=sig[n - 1])
        out[n - 1] = state.evaluate()
    return out, state


def _naive_run(plan, sig, dt, order_k, n_steps, n_gauss):
    out = np.empty((n_steps, plan.shape[0]))
    for n in range(1, n_steps + 1):
        out[n - 1] = direct_history(plan, sig[:n], dt, order_k, n,
                                    n_gauss=n_gauss)
    return out


def run_bench(sizes=DEFAULT_SIZES, n_points=64, dt=1.0 / 160, order_k=4,
              eps=1e-9, n_gauss=12, repeats=1):
    """Time both paths at each ``N_T`` in ``sizes``.

    Returns a dict with per-size rows, fitted exponents and the largest
    difference between the two paths.
    """
    curve = make_curve("circle", n_points)
    plan = SpatialSumPlan.from_boundary(curve)
    R = 1.001 * max(plan.distances.max(), 1.5)
    rows = []
    worst = 0.0
    for n_t in sizes:
        T = n_t * dt
        kernel = build_dlp_kernel(2, eps, min((order_k - 1) * dt, T / 1000.0),
                                  T, R)
        sig = manufactured_density(curve, dt, n_t)
        t_soe = t_naive = math.inf
        for _ in range(repeats):
            t1 = time.perf_counter()
            soe, state = _soe_run(plan, kernel, sig, dt, order_k, n_t)
            t2 = time.perf_counter()
            naive = _naive_run(plan, sig, dt, order_k, n_t, n_gauss)
            t3 = time.perf_counter()
            t_soe = min(t_soe, t2 - t1)
            t_naive = min(t_naive, t3 - t2)
        diff = float(np.max(np.abs(soe - naive)))
        worst = max(worst, diff)
        rows.append({"n_steps": n_t, "soe_seconds": t_soe,
                     "naive_seconds": t_naive, "max_abs_diff": diff,
                     "n_inner": kernel.n_inner, "n_outer": kernel.n_outer,
                     "state_bytes": state.nbytes,
                     "model_bytes": memory_model(n_points, kernel)})
    sizes = [r["n_steps"] for r in rows]
    return {
        "n_points": n_points, "dt": dt, "order_k": order_k, "eps": eps,
        "rows": rows,
        "soe_exponent": fitted_exponent(sizes, [r["soe_seconds"] for r in rows]),
        "naive_exponent": fitted_exponent(sizes,
                                          [r["naive_seconds"] for r in rows]),
        "max_abs_diff": worst,
        "tolerance": 3 * eps + 1e-10,
        "memory_ratio_max": max(r["state_bytes"] / r["model_bytes"]
                                for r in rows),
    }
