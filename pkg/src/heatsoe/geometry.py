"""Closed parametric boundary curves in the plane.

Curves are sampled at ``theta_j = 2 pi j / N`` with analytic first and
second derivatives.  Normals point away from the enclosed region (the
tangent rotated by -pi/2 for a positively oriented curve).
"""
import dataclasses
import math

import numpy as np

__all__ = [
    "BoundaryDiscretization",
    "CURVES",
    "make_curve",
    "make_custom_curve",
    "interior_sources",
    "exterior_targets",
    "winding_number",
    "activation_offset",
]


@dataclasses.dataclass(frozen=True, eq=False)
class BoundaryDiscretization:
    curve_id: str
    theta: np.ndarray
    positions: np.ndarray
    tangents: np.ndarray
    normals: np.ndarray
    curvatures: np.ndarray
    speed: np.ndarray
    arclength_weights: np.ndarray

    @property
    def n_points(self):
        return self.theta.size

    @property
    def perimeter(self):
        return float(self.arclength_weights.sum())

    def max_radius(self):
        return float(np.max(np.hypot(*self.positions.T)))


def _circle(t):
    r = 2.5
    c, s = np.cos(t), np.sin(t)
    return (np.stack([r * c, r * s], -1), np.stack([-r * s, r * c], -1),
            np.stack([-r * c, -r * s], -1))


def _ellipse(t):
    a, b = 2.5, 1.25
    c, s = np.cos(t), np.sin(t)
    return (np.stack([a * c, b * s], -1), np.stack([-a * s, b * c], -1),
            np.stack([-a * c, -b * s], -1))


def _hexagram(t):
    # polar curve r = 2 + 0.5 cos(6 t)
    c, s = np.cos(t), np.sin(t)
    r = 2.0 + 0.5 * np.cos(6 * t)
    dr = -3.0 * np.sin(6 * t)
    d2r = -18.0 * np.cos(6 * t)
    x = r * c
    y = r * s
    dx = dr * c - r * s
    dy = dr * s + r * c
    d2x = d2r * c - 2 * dr * s - r * c
    d2y = d2r * s + 2 * dr * c - r * s
    return (np.stack([x, y], -1), np.stack([dx, dy], -1),
            np.stack([d2x, d2y], -1))


def _crescent(t):
    k = 1.6
    c, s = np.cos(t), np.sin(t)
    c2, s2 = np.cos(2 * t), np.sin(2 * t)
    x = k * (c + 0.65 * c2 - 0.65)
    y = k * 1.5 * s
    dx = k * (-s - 1.3 * s2)
    dy = k * 1.5 * c
    d2x = k * (-c - 2.6 * c2)
    d2y = -k * 1.5 * s
    return (np.stack([x, y], -1), np.stack([dx, dy], -1),
            np.stack([d2x, d2y], -1))


CURVES = {
    "circle": _circle,
    "ellipse": _ellipse,
    "hexagram": _hexagram,
    "crescent": _crescent,
}

# Default resolutions used in the convergence studies.
DEFAULT_POINTS = {"circle": 350, "ellipse": 256, "crescent": 512,
                  "hexagram": 350}


def _discretize(curve_id, func, n_points, scale):
    if n_points < 16 or n_points % 2:
        raise ValueError("n_points must be even and >= 16")
    theta = 2.0 * math.pi * np.arange(n_points) / n_points
    x, dx, d2x = func(theta)
    x, dx, d2x = scale * x, scale * dx, scale * d2x
    speed = np.hypot(dx[:, 0], dx[:, 1])
    tangent = dx / speed[:, None]
    normal = np.stack([tangent[:, 1], -tangent[:, 0]], -1)
    kappa = (dx[:, 0] * d2x[:, 1] - dx[:, 1] * d2x[:, 0]) / speed ** 3
    weights = 2.0 * math.pi * speed / n_points
    return BoundaryDiscretization(curve_id=curve_id, theta=theta, positions=x,
                                  tangents=tangent, normals=normal,
                                  curvatures=kappa, speed=speed,
                                  arclength_weights=weights)


def make_curve(curve_id, n_points=None, scale=1.0):
    """Sample one of the built-in curves ``circle|ellipse|crescent|hexagram``."""
    try:
        func = CURVES[curve_id]
    except KeyError:
        raise ValueError(f"unknown curve id {curve_id!r}; "
                         f"choose from {sorted(CURVES)}") from None
    if n_points is None:
        n_points = DEFAULT_POINTS[curve_id]
    return _discretize(curve_id, func, n_points, scale)


def make_custom_curve(func, n_points):
    """Discretize ``func(theta) -> (x, dx, d2x)``, each of shape ``(..., 2)``."""
    return _discretize("custom", func, n_points, 1.0)


def winding_number(curve, point):
    """Winding number of the sampled polygon ``curve`` around ``point``."""
    d = curve.positions - np.asarray(point, dtype=float)
    ang = np.arctan2(d[:, 1], d[:, 0])
    dang = np.diff(np.r_[ang, ang[0]])
    dang = (dang + np.pi) % (2 * np.pi) - np.pi
    return int(round(dang.sum() / (2 * np.pi)))


# Sources sit well inside each curve: a shallow source needs a small t0,
# and its boundary data then switch on faster than the coarse steps resolve.
_SOURCES = {
    "circle": [(0.0, 0.0), (1.0, 0.5), (-0.8, -0.3)],
    "ellipse": [(0.0, 0.0), (0.6, 0.1), (-0.6, -0.1)],
    "hexagram": [(0.0, 0.0), (0.5, 0.3), (-0.4, -0.4)],
    "crescent": [(-0.08, 0.0), (-0.2, 0.3), (-0.2, -0.3)],
}

# Largest exterior value of the initial data that is tolerated.
INITIAL_DATA_CAP = 1.0e-13


def activation_offset(points, curve, cap=INITIAL_DATA_CAP):
    """Largest ``t0`` such that ``sum_i G_2(x - p_i, t0) <= cap`` on the boundary.

    The bound uses each source's distance to the sampled boundary, so it
    also bounds the initial data everywhere outside the curve.
    """
    pts = np.asarray(points, dtype=float)
    dist = np.min(np.linalg.norm(curve.positions[None] - pts[:, None], axis=-1),
                  axis=1)

    def initial_max(t0):
        return float(np.sum(np.exp(-dist ** 2 / (4 * t0)) / (4 * np.pi * t0)))

    lo, hi = 1e-6, 1.0
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if initial_max(mid) <= cap:
            lo = mid
        else:
            hi = mid
    return lo


def interior_sources(curve_id, curve=None):
    """Three unit heat sources strictly inside ``curve_id``.

    Returns a list of ``(point, t0, strength)``; ``t0`` is the activation
    offset making the exterior initial data negligible.
    """
    try:
        pts = _SOURCES[curve_id]
    except KeyError:
        raise ValueError(f"no sources defined for curve {curve_id!r}") from None
    if curve is None:
        curve = make_curve(curve_id, 2048)
    t0 = activation_offset(pts, curve)
    return [(np.array(p), t0, 1.0) for p in pts]


def exterior_targets(curve, count=20):
    """``count`` points equispaced in angle on a circle of radius 1.3 x max radius."""
    if count < 1:
        raise ValueError("count must be >= 1")
    r = 1.3 * curve.max_radius()
    ang = 2.0 * math.pi * np.arange(count) / count
    return np.stack([r * np.cos(ang), r * np.sin(ang)], -1)
