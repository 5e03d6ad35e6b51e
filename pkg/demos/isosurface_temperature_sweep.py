"""Soft signed distance of a 2D box across smoothing temperatures.

A tall box sliced at z=0 behaves like a 1x1 square. At a sharp temperature
the zero isosurface hugs the square; as the temperature grows the corners
round off and the level set inflates toward a convex blob. Run this script
and plot each CSV (columns x,y,z,phi) as a heatmap with a zero contour to
see the interpolation.
"""
import os

import numpy as np

from softcontact import box_aopc, sample_sdf_grid
from softcontact.ssdf import grid_to_csv

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

square = box_aopc([1.0, 1.0, 3.0], 800, name="square")
print(f"box AOPC: {square.num_points} oriented points, spacing ~{square.spacing():.3f} m")

for eps1 in (0.01, 0.25, 0.5, 10.0):
    pts, phi = sample_sdf_grid(
        square, ([-1.5, -1.5, 0.0], [1.5, 1.5, 1.0]), (121, 121, 2), eps1,
        slice_axis=2, slice_value=0.0,
    )
    path = os.path.join(OUT, f"square_sdf_eps{eps1:g}.csv")
    with open(path, "w") as fh:
        fh.write(grid_to_csv(pts, phi))
    inside = (phi < 0).mean()
    print(f"eps1={eps1:<5g} -> {path}   fraction below zero: {inside:.3f}")

print(
    "\nAt eps1=0.01 the interior fraction matches the square's share of the"
    "\nwindow (1/9 ~ 0.111); larger temperatures swell the zero level set"
    "\nand smooth the corners away."
)
