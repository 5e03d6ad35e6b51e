"""Contact force between two spheres as one sweeps through the other.

The y-component of the soft contact force on the small sphere is smooth
everywhere: no jump at contact onset, a tiny exponential tail well outside
contact (the "force at a distance" that gives optimizers gradients), and an
equilibrium with a sign flip at the concentric configuration.
"""
import os

import numpy as np

from softcontact import (
    Body,
    ContactParams,
    Pose,
    Scene,
    make_state,
    sphere_aopc,
    sphere_inertia,
    total_contact_force,
)
from softcontact.verify import cs_gradient

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

params = ContactParams(k=1e4, mu=0.5, eps1=0.01, eps2=0.01, eps3=0.02)
big = sphere_aopc(0.6, 216)
small = sphere_aopc(0.25, 216)
scene = Scene(
    [Body("big", big, "free", 1.0, sphere_inertia(1.0, 0.6)),
     Body("small", small, "free", 0.3, sphere_inertia(0.3, 0.25))],
    [("big", "small")],
    gravity=np.zeros(3),
    params=params,
)

ys = np.linspace(-1.5, 1.5, 181)
rows = ["y,fy,dfy_dy"]
for y in ys:
    st = make_state(scene, {"small": Pose(np.array([0.0, y, 0.0]), np.array([1.0, 0, 0, 0]))})
    fy = total_contact_force(scene, st)[7]

    def f(x, st=st):
        stc = st.copy()
        stc.q = st.q.astype(x.dtype)
        stc.q[1, 1] = x[0]
        return total_contact_force(scene, stc)[7]

    g = cs_gradient(f, np.array([y]))[0]
    rows.append(f"{y:.6f},{fy:.10e},{g:.10e}")

path = os.path.join(OUT, "two_sphere_force_profile.csv")
with open(path, "w") as fh:
    fh.write("\n".join(rows) + "\n")
print(f"profile written to {path}")

F = np.array([float(r.split(",")[1]) for r in rows[1:]])
i0 = int(np.argmin(np.abs(ys)))
print(f"peak |fy| = {np.abs(F).max():.1f} N")
print(f"fy at first sample (gap {abs(ys[0]) - 0.85:.2f} m outside contact): {F[0]:.3e} N (tiny but nonzero)")
print(f"fy at the concentric sample: {F[i0]:.3e} N, neighbors {F[i0-2]:+.1f} / {F[i0+2]:+.1f} N")
print(
    "\nNote the neighbors' signs: with these temperatures the deepest-point"
    "\nselection makes full containment center-seeking; the expulsive branch"
    "\ntakes over once the small sphere reaches partial overlap."
)
