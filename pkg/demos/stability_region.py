#!/usr/bin/env python3
"""Sample the explicit-part absolute stability region of the PRK2 tableau.

The product scheme embeds into an (s+1)-stage additive IMEX method; the
amplification factor R(z0, z1, z2) is sampled over z0 on the boundary rays
of the stiff wedge, and a plane point z1 is inside S_alpha when |R| <= 1 for
every sampled z0.  Writes a CSV mask and, when matplotlib is available, a
contour plot.
"""

import math

from prkflow.harness import write_csv
from prkflow.stability import RegionWindow, sample_region, stability_function
from prkflow.tableau import prk2_tableau

t = prk2_tableau()
print("R(0, 0, 0) =", stability_function(t, 0.0, 0.0, 0.0))
print("stiff limit R(-1e6, 0, 0) =", stability_function(t, -1e6, 0.0, 0.0))
print("(nonzero limit: the tableau is A-stable in the stiff part, not L-stable)")

window = RegionWindow(-6.0, 2.0, -4.0, 4.0, 200, 200)
sample = sample_region(t, window, alpha=math.pi / 2)
inside = sample.mask
print(f"\n{inside.sum()} of {inside.size} grid points inside S_(pi/2)")

re, im = window.grid()
rows = [(re[i], im[j], int(inside[i, j]), sample.max_abs_r[i, j])
        for i in range(window.nx) for j in range(window.ny)]
write_csv("stability_region.csv", ("re", "im", "inside", "max_abs_R"), rows)
print("wrote stability_region.csv")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None
if plt is not None:
    plt.figure(figsize=(5, 5))
    plt.contourf(re, im, inside.T.astype(float), levels=[0.5, 1.5], colors=["#c44"])
    plt.xlabel("Re z1")
    plt.ylabel("Im z1")
    plt.title("Explicit-part stability region (z2 = 0 slice)")
    plt.gca().set_aspect("equal")
    plt.savefig("stability_region.png", dpi=120)
    print("wrote stability_region.png")
