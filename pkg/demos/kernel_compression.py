"""How many exponentials does the 1D heat kernel need?

Builds sum-of-exponentials approximations of (4 pi t)^(-1/2) exp(-x^2/4t)
for three accuracies, shows the error weighted by sqrt(t) on a grid of
radii and times, and compares the 1e-9 sum with the bundled reference table.

    python demos/kernel_compression.py
"""
import warnings

import numpy as np

from heatsoe import io
from heatsoe.contour import (ValidityWarning, build_contour_sum, grid_error,
                             select_params, stability_ratio, validation_grid)
from heatsoe.power import build_power_sum, verify_power_sum

warnings.simplefilter("ignore", ValidityWarning)

print("window [1e-3, 1]: nodes per half contour and measured error")
for eps in (1e-3, 1e-6, 1e-9):
    p = select_params(eps, 1e-3, 1.0)
    s = build_contour_sum(p)
    print(f"  eps={eps:.0e}  n={p.n:3d}  error={grid_error(s):.2e}")

# the 47 nodes for 1e-9 are printed in the reference table; ours agree
ref = io.bundled_table5()
ours = build_contour_sum(select_params(1e-9, 1e-3, 1.0))
gap = np.max(np.abs(ours.nodes - ref.nodes) / np.abs(ref.nodes))
print(f"largest relative node gap to the reference table: {gap:.1e}")

# complex weights, but the sum is well conditioned everywhere on the window
_, t = validation_grid(1e-3, 1.0)
r = stability_ratio(ours, t)
print(f"stability ratio: median {np.median(r):.3f}, max {r.max():.3f}")

# real exponentials for t^(-3/2), the kernel of the 3D double layer
ps = build_power_sum(1.5, 1e-9, 1e-3, 1.0)
print(f"t^-1.5 with {len(ps)} real exponentials, "
      f"relative error {verify_power_sum(ps):.1e}")
