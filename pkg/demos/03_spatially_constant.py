"""
A spatially constant solution as a sanity check
===============================================

When every datum is constant in space, the Laplacian and the nonlocal term
drop out and each step is a single scalar equation. Solve that scalar
recursion by hand, feed its temperature back as the boundary datum, and
compare with the full solver.
"""
import numpy as np
from scipy.optimize import brentq

from penrose_fife import homogeneous_problem, run

T, N, h = 1.0, 32, 1.0 / 32
f, theta, phi, v = 0.5, 1.5, 0.2, -0.3
beta = lambda r: r**3  # noqa: E731
pi = lambda r: -r  # noqa: E731

u_levels, phis = [], [phi]
for _ in range(N):
    def F(p):
        vv = (p - phi) / h
        th = theta + h * f - (p - phi)
        return (vv - v) / h + vv + beta(p) + pi(p) + 1.0 / th

    top = phi + theta + h * f  # theta reaches 0 here
    p = brentq(F, phi - 10.0, top - 1e-13, xtol=1e-15)
    theta, v, phi = theta + h * f - (p - phi), (p - phi) / h, p
    u_levels.append(-1.0 / theta)
    phis.append(phi)

# The Robin datum equal to u keeps the full solution flat in space.
spec = homogeneous_problem(u_levels, T=T, nodes=16)
traj = run(spec, N)

full = traj.levels("phi")
print("spread across nodes at the final step:", np.ptp(full[-1]))
print("max |phi_solver - phi_scalar|:", np.max(np.abs(full - np.array(phis)[:, None])))
